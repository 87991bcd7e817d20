"""Photon lifetimes from decay rates, and the jitter relation for coincidence widths.

Three lifetime estimators are available and each result is labelled by the
one that produced it:

* ``"high_q"``  -- ``1/(2*gamma1)``, main ring far from the auxiliary line
* ``"low_q"``   -- ``1/gamma_c``, rings aligned near the exceptional point
* ``"exact"``   -- ``1/(2*|Im w|)`` for each eigenfrequency branch

A coincidence peak recorded through two channels with timing jitters ``J1``
and ``J2`` has width ``tau_1e = sqrt(2*tau**2 + J1**2 + J2**2)``.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_nonneg
from .exceptions import InfiniteLifetimeError, JitterDominatedError
from .tcmt import eigenfrequencies


@dataclass(frozen=True)
class LifetimeEstimate:
    tau_1e: float
    jitter1: float
    jitter2: float
    tau: float

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be non-negative")

    @classmethod
    def from_width(cls, tau_1e, jitter1, jitter2):
        return cls(tau_1e, jitter1, jitter2, deconvolve_jitter(tau_1e, jitter1, jitter2))

    def to_dict(self):
        return dict(tau_1e=self.tau_1e, jitter1=self.jitter1,
                    jitter2=self.jitter2, tau=self.tau)


def tau_high_q(params):
    if params.gamma1 == 0:
        raise ZeroDivisionError("tau_high_q undefined for gamma1 = 0")
    return 1.0 / (2.0 * params.gamma1)


def tau_low_q(params):
    if params.gamma_c == 0:
        raise ZeroDivisionError("tau_low_q undefined for gamma_c = 0")
    return 1.0 / params.gamma_c


def tau_exact(params):
    """Lifetimes ``(tau_plus, tau_minus)`` of the two eigenmode branches."""
    sol = eigenfrequencies(params)
    out = []
    for w in (sol.omega_plus, sol.omega_minus):
        if w.imag == 0:
            raise InfiniteLifetimeError(f"eigenfrequency {w} has no decay")
        out.append(1.0 / (2.0 * abs(w.imag)))
    return tuple(out)


def lifetime_contrast(params):
    """Largest achievable lifetime ratio ``gamma_c / (2*gamma1)``."""
    if params.gamma1 == 0:
        raise ZeroDivisionError("contrast undefined for gamma1 = 0")
    return params.gamma_c / (2.0 * params.gamma1)


def predict_lifetimes(params):
    """All estimators for one parameter set, keyed by estimator label."""
    tp, tm = tau_exact(params)
    return {
        "high_q": tau_high_q(params),
        "low_q": tau_low_q(params),
        "exact_plus": tp,
        "exact_minus": tm,
        "contrast": lifetime_contrast(params),
    }


def convolve_jitter(tau, j1, j2):
    for name, v in (("tau", tau), ("j1", j1), ("j2", j2)):
        check_nonneg(name, v)
    return float(np.sqrt(2.0 * tau * tau + j1 * j1 + j2 * j2))


def deconvolve_jitter(tau_1e, j1, j2):
    """Invert :func:`convolve_jitter`.

    Raises :class:`JitterDominatedError` when ``tau_1e`` is narrower than the
    combined jitter; exactly equal widths give ``tau = 0``.
    """
    for name, v in (("tau_1e", tau_1e), ("j1", j1), ("j2", j2)):
        check_nonneg(name, v)
    jit2 = j1 * j1 + j2 * j2
    excess = tau_1e * tau_1e - jit2
    if -8 * np.finfo(float).eps * jit2 <= excess < 0:
        excess = 0.0  # rounding from a zero-lifetime forward pass
    if excess < 0:
        raise JitterDominatedError(
            f"tau_1e={tau_1e:.4g} is below the combined jitter "
            f"{np.hypot(j1, j2):.4g}; lifetime unresolvable")
    return float(np.sqrt(excess / 2.0))
