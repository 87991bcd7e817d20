"""Levenberg-Marquardt least squares with finite-difference Jacobians.

Only steps that lower the cost are accepted, so the recorded cost history is
non-increasing. Deterministic: no randomness, fixed evaluation order.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConvergenceError


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    jac: np.ndarray
    n_iter: int
    n_eval: int
    converged: bool
    message: str
    cost_history: list = field(default_factory=list)

    def covariance(self):
        """Unscaled ``inv(J^T J)`` (pseudo-inverse when rank deficient)."""
        return np.linalg.pinv(self.jac.T @ self.jac)


def _jacobian(fun, x, r0, rel_step):
    n = x.size
    J = np.empty((r0.size, n))
    for j in range(n):
        h = rel_step * max(1.0, abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        J[:, j] = (fun(xp) - fun(xm)) / (2 * h)
    return J


def levenberg_marquardt(fun, x0, max_iter=10_000, ftol=1e-10, gtol=1e-14,
                        rel_step=1e-6, lam0=1e-3, raise_on_fail=True):
    """Minimise ``sum(fun(x)**2)``.

    Stops when an accepted step lowers the cost by less than ``ftol``
    (relative), when the scaled gradient vanishes, or when no damping makes
    progress (local minimum to working precision).
    """
    x = np.array(x0, dtype=float)
    r = np.asarray(fun(x), dtype=float)
    n_eval = 1
    cost = float(r @ r)
    history = [cost]
    if not np.isfinite(cost):
        raise ConvergenceError("initial residual is not finite")
    J = _jacobian(fun, x, r, rel_step)
    n_eval += 2 * x.size
    lam = lam0
    converged = False
    message = "iteration cap reached"
    it = 0
    while it < max_iter:
        it += 1
        if cost == 0.0:
            converged, message = True, "exact fit"
            break
        g = J.T @ r
        JTJ = J.T @ J
        d = np.maximum(np.diag(JTJ), 1e-30)
        if np.max(np.abs(g) / np.sqrt(d)) <= gtol * np.sqrt(cost):
            converged, message = True, "gradient below tolerance"
            break
        # augmented least-squares form of (JTJ + lam*D) dx = -g
        A = np.vstack([J, np.diag(np.sqrt(lam * d))])
        b = np.concatenate([-r, np.zeros(x.size)])
        dx = np.linalg.lstsq(A, b, rcond=None)[0]
        x_new = x + dx
        r_new = np.asarray(fun(x_new), dtype=float)
        n_eval += 1
        cost_new = float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
        if cost_new < cost:
            rel = (cost - cost_new) / cost
            x, r, cost = x_new, r_new, cost_new
            history.append(cost)
            lam = max(lam / 3.0, 1e-12)
            J = _jacobian(fun, x, r, rel_step)
            n_eval += 2 * x.size
            if rel < ftol:
                converged, message = True, "relative cost change below ftol"
                break
        else:
            lam *= 4.0
            if lam > 1e16:
                converged, message = True, "no further decrease possible"
                break
    if not converged and raise_on_fail:
        raise ConvergenceError(f"least squares did not converge in {max_iter} iterations")
    return LMResult(x=x, cost=cost, jac=J, n_iter=it, n_eval=n_eval,
                    converged=converged, message=message, cost_history=history)
