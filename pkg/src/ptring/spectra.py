"""Resonance detection, Lorentzian Q-factor fits and full-model parameter extraction.

Two estimators follow the scikit-learn fit/predict protocol with 1-D
frequency input (a single-column ``X`` is accepted as well):

* :class:`LorentzianDip` -- symmetric Lorentzian dip, for per-resonance Q.
* :class:`CoupledRingRegressor` -- the multi-resonance coupled-ring model,
  recovering the decay rates, coupling, tuning and main-ring resonance.

The functional wrappers :func:`fit_lorentzian` and
:func:`extract_system_params` return plain result records.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._lm import levenberg_marquardt
from ._validation import check_xy
from .exceptions import ConvergenceError, IdentifiabilityWarning
from .tcmt import Spectrum, SystemParams, comb_spectrum

__all__ = [
    "Spectrum", "ResonanceFit", "ParamFitResult", "LorentzianDip",
    "CoupledRingRegressor", "find_resonances", "fit_lorentzian",
    "extract_system_params", "lorentzian_dip", "comb_q_factors", "guess_main_resonance",
]

RATE_NAMES = ("gamma1", "gamma2", "gamma_c", "kappa")


@dataclass(frozen=True)
class ResonanceFit:
    center: float
    fwhm: float
    extinction: float
    q_factor: float
    residual: float

    def to_dict(self):
        return {k: float(getattr(self, k)) for k in
                ("center", "fwhm", "extinction", "q_factor", "residual")}


@dataclass(frozen=True)
class ParamFitResult:
    params: SystemParams
    tuning: float
    covariance_diag: dict
    cost: float
    iterations: int
    cost_history: list = field(default_factory=list, repr=False)
    condition_number: float = float("nan")

    def to_dict(self):
        return dict(params=self.params.to_dict(), tuning=float(self.tuning),
                    covariance_diag={k: float(v) for k, v in self.covariance_diag.items()},
                    cost=float(self.cost), iterations=int(self.iterations),
                    cost_history=[float(c) for c in self.cost_history],
                    condition_number=float(self.condition_number))


def _as_1d(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single frequency column, got shape {X.shape}")
        X = X[:, 0]
    return X


def lorentzian_dip(w, center, fwhm, extinction):
    hw2 = (0.5 * fwhm) ** 2
    return 1.0 - extinction * hw2 / ((w - center) ** 2 + hw2)


def _baseline(x, y, linear):
    if not linear:
        return np.ones_like(y)
    # line through the upper half of the points, refined once
    mask = y >= np.median(y)
    coef = np.polyfit(x[mask], y[mask], 1)
    base = np.polyval(coef, x)
    mask = y >= base - 0.5 * np.std(y[mask] - base[mask])
    coef = np.polyfit(x[mask], y[mask], 1)
    return np.polyval(coef, x)


def find_resonances(spec, prominence, linear_baseline=False):
    """Locate dips deeper than ``prominence`` below the baseline.

    Returns a list of ``(center, (lo, hi))`` sorted by frequency. ``center`` is
    the grid frequency of the deepest point (midpoint index of a flat
    minimum); the window extends to the nearest grid points that recover to
    ``baseline - prominence/2``.
    """
    if not 0 < prominence < 1:
        raise ValueError("prominence must lie in (0, 1)")
    f, v = spec.freqs, spec.values
    depth = _baseline(f, v, linear_baseline) - v
    below = depth > prominence
    if not below.any():
        return []
    edges = np.diff(np.concatenate([[0], below.astype(int), [0]]))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    recovered = depth <= 0.5 * prominence
    out = []
    for s, e in zip(starts, stops):
        seg = depth[s:e]
        best = np.flatnonzero(seg == seg.max())
        i = s + best[len(best) // 2]
        left = np.flatnonzero(recovered[:i])
        right = np.flatnonzero(recovered[i:])
        lo = left[-1] if left.size else 0
        hi = i + right[0] if right.size else f.size - 1
        out.append((float(f[i]), (float(f[lo]), float(f[hi]))))
    return out


class LorentzianDip(RegressorMixin, BaseEstimator):
    """Least-squares fit of ``1 - d*(G/2)^2/((w-w0)^2 + (G/2)^2)``.

    Parameters
    ----------
    baseline : {"fixed", "linear"}
        ``"fixed"`` assumes a normalised spectrum (baseline 1). ``"linear"``
        multiplies the dip by a fitted straight line.
    max_iter : int
    tol : float
        Relative cost tolerance of the optimiser.

    Attributes
    ----------
    center_, fwhm_, extinction_, q_factor_ : float
    residual_ : float
        Root-mean-square residual.
    n_iter_ : int
    """

    def __init__(self, baseline="fixed", max_iter=10_000, tol=1e-10):
        self.baseline = baseline
        self.max_iter = max_iter
        self.tol = tol

    def _model(self, theta, x):
        c, lw, d = theta[:3]
        y = lorentzian_dip(x, c, np.exp(lw), d)
        if self.baseline == "linear":
            y = y * (theta[3] + theta[4] * x)
        return y

    def fit(self, X, y):
        if self.baseline not in ("fixed", "linear"):
            raise ValueError(f"baseline must be 'fixed' or 'linear', got {self.baseline!r}")
        w, y = check_xy(_as_1d(X), y, min_points=5)
        mid = 0.5 * (w[0] + w[-1])
        span = w[-1] - w[0]
        x = (w - mid) / span
        i = int(np.argmin(y))
        d0 = max(1.0 - y[i], 1e-3)
        half = y <= 1.0 - 0.5 * d0
        width0 = (x[half].max() - x[half].min()) if half.sum() >= 2 else 0.25
        width0 = max(width0, 2.0 / w.size)
        theta0 = [x[i], np.log(width0), d0]
        if self.baseline == "linear":
            theta0 += [1.0, 0.0]
        res = levenberg_marquardt(lambda t: self._model(t, x) - y, theta0,
                                  max_iter=self.max_iter, ftol=self.tol)
        c, lw, d = res.x[:3]
        self.center_ = float(mid + c * span)
        self.fwhm_ = float(np.exp(lw) * span)
        self.extinction_ = float(d)
        self.q_factor_ = self.center_ / self.fwhm_
        self.residual_ = float(np.sqrt(res.cost / w.size))
        self.n_iter_ = res.n_iter
        self._theta = res.x
        self._mid, self._span = mid, span
        return self

    def predict(self, X):
        check_is_fitted(self, "center_")
        w = _as_1d(X)
        return self._model(self._theta, (w - self._mid) / self._span)

    def result(self):
        check_is_fitted(self, "center_")
        return ResonanceFit(self.center_, self.fwhm_, self.extinction_,
                            self.q_factor_, self.residual_)


def fit_lorentzian(spec, window, baseline="fixed"):
    """Fit a Lorentzian dip to the part of ``spec`` inside ``window = (lo, hi)``."""
    lo, hi = window
    m = (spec.freqs >= lo) & (spec.freqs <= hi)
    if m.sum() < 5:
        raise ValueError(f"window {window} holds {int(m.sum())} points; need at least 5")
    est = LorentzianDip(baseline=baseline).fit(spec.freqs[m], spec.values[m])
    return est.result()


class CoupledRingRegressor(RegressorMixin, BaseEstimator):
    """Fit the multi-resonance coupled-ring transmission to a measured spectrum.

    Free parameters are ``gamma1, gamma2, gamma_c, kappa`` (fitted in log
    space, so they stay positive), the auxiliary-comb ``tuning`` and the
    main-ring resonance ``omega1``. With ``equal_intrinsic=True`` the two
    intrinsic decay rates are tied (``gamma2 = gamma1``).

    Parameters
    ----------
    geometry : DeviceGeometry
    initial_params : SystemParams
        Starting point; its ``delta_omega`` is ignored.
    tuning : float
        Starting value of the comb tuning shift.
    equal_intrinsic : bool
    max_iter : int
    tol : float
    cond_limit : float
        Condition number of the parameter correlation matrix above which an
        :class:`IdentifiabilityWarning` is issued.

    Attributes
    ----------
    params_ : SystemParams
    tuning_ : float
    covariance_diag_ : dict
        Variance estimates in physical units, keyed by parameter name.
    cost_ : float
        Final sum of squared residuals.
    cost_history_ : list of float
        Cost after every accepted step; non-increasing.
    n_iter_ : int
    condition_number_ : float
    """

    def __init__(self, geometry=None, initial_params=None, tuning=0.0,
                 equal_intrinsic=False, max_iter=10_000, tol=1e-10, cond_limit=1e8):
        self.geometry = geometry
        self.initial_params = initial_params
        self.tuning = tuning
        self.equal_intrinsic = equal_intrinsic
        self.max_iter = max_iter
        self.tol = tol
        self.cond_limit = cond_limit

    def _names(self):
        rates = ["gamma1", "gamma_c", "kappa"] if self.equal_intrinsic else list(RATE_NAMES)
        return rates + ["tuning", "omega1"]

    def _unpack(self, theta):
        names = self._names()
        vals = dict(zip(names, theta))
        rates = {k: float(np.exp(vals[k])) for k in names[:-2]}
        if self.equal_intrinsic:
            rates["gamma2"] = rates["gamma1"]
        tuning = float(vals["tuning"] * self._scale)
        omega1 = float(self._omega0 + vals["omega1"] * self._scale)
        return SystemParams(omega1=omega1, **rates), tuning

    def _model(self, theta, w):
        params, tuning = self._unpack(theta)
        return comb_spectrum(params, self.geometry, tuning, w).values

    def _initial_theta(self, p0):
        floor = 1e-6 * self._scale
        theta = [np.log(max(getattr(p0, k), floor)) for k in self._names()[:-2]]
        return np.array(theta + [self.tuning / self._scale, 0.0])

    def fit(self, X, y):
        if self.geometry is None or self.initial_params is None:
            raise ValueError("geometry and initial_params are required")
        w, y = check_xy(_as_1d(X), y, min_points=8)
        p0 = self.initial_params
        self._omega0 = float(p0.omega1)
        self._scale = float(p0.gamma1 + p0.gamma2 + p0.gamma_c) or float(self.geometry.fsr1)
        theta0 = self._initial_theta(p0)
        n_rates = theta0.size - 2
        # Staged: comb positions with the rates held, then rates with the
        # positions held, then everything. A joint start from a poor guess
        # tends to settle in a shallow local minimum.
        stage0 = levenberg_marquardt(
            lambda t: self._model(np.concatenate([theta0[:n_rates], t]), w) - y,
            theta0[n_rates:], max_iter=self.max_iter, ftol=self.tol)
        pos = stage0.x
        stage1 = levenberg_marquardt(
            lambda t: self._model(np.concatenate([t, pos]), w) - y,
            theta0[:n_rates], max_iter=self.max_iter, ftol=self.tol)
        used = stage0.n_iter + stage1.n_iter
        res = levenberg_marquardt(
            lambda t: self._model(t, w) - y,
            np.concatenate([stage1.x, pos]),
            max_iter=max(self.max_iter - used, 1), ftol=self.tol)
        self._theta = res.x
        self.params_, self.tuning_ = self._unpack(res.x)
        self.cost_ = res.cost
        self.cost_history_ = (stage0.cost_history + stage1.cost_history[1:]
                              + res.cost_history[1:])
        self.n_iter_ = used + res.n_iter

        dof = max(w.size - res.x.size, 1)
        jtj = res.jac.T @ res.jac
        cov = np.linalg.pinv(jtj) * (res.cost / dof)
        # scale-free: condition number of the parameter correlation matrix
        sd = np.sqrt(np.diag(cov))
        if np.all(sd > 0):
            ev = np.linalg.eigvalsh(cov / np.outer(sd, sd))
            self.condition_number_ = float(ev[-1] / ev[0]) if ev[0] > 0 else float("inf")
        else:
            self.condition_number_ = float("inf")
        if self.condition_number_ > self.cond_limit:
            warnings.warn(
                f"parameter covariance condition number {self.condition_number_:.3g} "
                f"exceeds {self.cond_limit:.0e}; some parameters are not identifiable",
                IdentifiabilityWarning, stacklevel=2)
        var = {}
        for i, name in enumerate(self._names()):
            if name in ("tuning", "omega1"):
                var[name] = float(cov[i, i] * self._scale ** 2)
            else:
                var[name] = float(cov[i, i] * getattr(self.params_, name) ** 2)
        if self.equal_intrinsic:
            var["gamma2"] = var["gamma1"]
        self.covariance_diag_ = var
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        return self._model(self._theta, _as_1d(X))

    def result(self):
        check_is_fitted(self, "params_")
        return ParamFitResult(params=self.params_, tuning=self.tuning_,
                              covariance_diag=dict(self.covariance_diag_),
                              cost=self.cost_, iterations=self.n_iter_,
                              cost_history=list(self.cost_history_),
                              condition_number=self.condition_number_)


def extract_system_params(spec, geom, initial_guess, tuning=0.0, equal_intrinsic=False,
                          max_iter=10_000, tol=1e-10):
    """Recover coupled-ring parameters from a transmission spectrum.

    The returned cost never exceeds the cost of ``initial_guess``. Raises
    :class:`ConvergenceError` if the iteration cap is hit.
    """
    est = CoupledRingRegressor(geometry=geom, initial_params=initial_guess, tuning=tuning,
                               equal_intrinsic=equal_intrinsic, max_iter=max_iter, tol=tol)
    est.fit(spec.freqs, spec.values)
    return est.result()


def comb_q_factors(spec, prominence=0.1, linear_baseline=False):
    """Lorentzian fits of every resonance found in ``spec``."""
    fits = []
    for _, window in find_resonances(spec, prominence, linear_baseline=linear_baseline):
        try:
            fits.append(fit_lorentzian(spec, window,
                                       baseline="linear" if linear_baseline else "fixed"))
        except (ConvergenceError, ValueError):
            continue
    return fits


def guess_main_resonance(spec, geom, prominence=0.1, near=None):
    """Starting value for ``omega1`` taken from the sharpest detected dip.

    Weakly coupled main-ring resonances are pulled far less than their
    linewidth, so the highest-Q dip marks the main comb. The estimate is moved
    by whole main-ring FSRs to the comb tooth nearest ``near`` (default: the
    middle of the grid).
    """
    fits = comb_q_factors(spec, prominence)
    if not fits:
        raise ValueError("no resonance found in the spectrum")
    anchor = max(fits, key=lambda r: r.q_factor).center
    mid = 0.5 * (spec.freqs[0] + spec.freqs[-1]) if near is None else near
    return float(anchor + np.round((mid - anchor) / geom.fsr1) * geom.fsr1)
