"""Counting statistics on timestamp streams.

Start-stop coincidence histograms, coincidence-peak width fits, CAR,
two-photon fringe visibility with Monte Carlo errors, heralded g2 and the
Bell-threshold test. Times inside this module are integer picoseconds;
public arguments and results are in seconds.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import special
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._lm import levenberg_marquardt
from ._validation import check_positive, check_xy
from .exceptions import (
    DegenerateFitError,
    InsufficientStatisticsError,
    NoPeakError,
    ZeroAccidentalError,
)

BELL_THRESHOLD = 1.0 / np.sqrt(2.0)


def _to_ps(name, seconds):
    check_positive(name, seconds)
    ps = int(round(seconds * 1e12))
    if ps < 1:
        raise ValueError(f"{name} must be at least 1 ps")
    return ps


# ----------------------------------------------------------------- histogram

@dataclass(frozen=True, eq=False)
class CoincidenceHistogram:
    bin_width: float
    offsets: np.ndarray
    counts: np.ndarray
    start_channel: str = "start"
    stop_channel: str = "stop"
    total_starts: int = 0
    resolution: float = 1e-12

    def __post_init__(self):
        off = np.asarray(self.offsets, dtype=float)
        cnt = np.asarray(self.counts)
        if off.shape != cnt.shape or off.ndim != 1:
            raise ValueError("offsets and counts must be 1-D arrays of equal length")
        if cnt.size and np.any(cnt < 0):
            raise ValueError("counts must be non-negative")
        if off.size > 1 and not np.allclose(np.diff(off), self.bin_width,
                                            rtol=1e-9, atol=1e-18):
            raise ValueError("offsets must be spaced by bin_width")
        object.__setattr__(self, "offsets", off)
        object.__setattr__(self, "counts", cnt.astype(np.int64))

    def to_dict(self):
        return {
            "bin_width_ps": self.bin_width * 1e12,
            "offsets_ps": [float(x) for x in np.round(self.offsets * 1e12, 6)],
            "counts": [int(c) for c in self.counts],
            "start_channel": self.start_channel,
            "stop_channel": self.stop_channel,
            "total_starts": int(self.total_starts),
        }


def _bin_index(d, w):
    # symmetric rounding: offsets of equal magnitude and opposite sign land in
    # mirrored bins, and a difference of exactly half a bin rounds outward
    return np.sign(d) * ((2 * np.abs(d) + w) // (2 * w))


def _pair_differences(start, stop, reach):
    """All ``stop - start`` with ``|stop - start| <= reach`` (integer arrays)."""
    lo = np.searchsorted(stop, start - reach, side="left")
    hi = np.searchsorted(stop, start + reach, side="right")
    n = hi - lo
    total = int(n.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    owner = np.repeat(np.arange(start.size), n)
    first = np.cumsum(n) - n
    stop_idx = lo[owner] + (np.arange(total) - first[owner])
    return stop[stop_idx] - start[owner]


def coincidence_histogram(start, stop, bin_width=10e-12, span=10e-9):
    """Histogram of ``t_stop - t_start`` over every pair within ``±span/2``.

    Bin ``k`` is centred on ``k * bin_width``. A start with several stops in
    range contributes one count per stop.
    """
    w = _to_ps("bin_width", bin_width)
    sp = _to_ps("span", span)
    if sp < w:
        raise ValueError("span must be at least bin_width")
    reach = sp // 2
    n_side = (sp + w) // (2 * w)
    d = _pair_differences(start.times_ps, stop.times_ps, reach)
    k = _bin_index(d, w) + n_side
    counts = np.bincount(k.astype(np.int64), minlength=2 * n_side + 1)
    offsets = np.arange(-n_side, n_side + 1) * w * 1e-12
    return CoincidenceHistogram(w * 1e-12, offsets, counts, start.channel,
                                stop.channel, len(start), 1e-12)


# ---------------------------------------------------------------- peak width

def _tail(t, b, s):
    """``P(X <= -|t|)`` for X = Laplace(scale b) + Normal(0, s)."""
    a = -np.abs(np.asarray(t, dtype=float))
    if s == 0:
        return 0.5 * np.exp(a / b)
    if b == 0:
        return special.ndtr(a / s)
    r = s / b
    u1 = (r - a / s) / np.sqrt(2.0)
    u2 = (r + a / s) / np.sqrt(2.0)
    g1 = np.exp(-0.5 * (a / s) ** 2) * special.erfcx(u1)  # u1 >= 0 always
    g2 = np.where(u2 >= 0,
                  np.exp(-0.5 * (a / s) ** 2) * special.erfcx(np.maximum(u2, 0.0)),
                  np.exp(np.minimum(0.5 * r * r + a / b, 0.0)) * special.erfc(u2))
    return special.ndtr(a / s) - 0.25 * g1 + 0.25 * g2


def _bin_mass(lo, hi, b, s):
    glo, ghi = _tail(lo, b, s), _tail(hi, b, s)
    return np.where(hi <= 0, ghi - glo, np.where(lo >= 0, glo - ghi, 1.0 - glo - ghi))


def _bin_edges(x, w, res):
    """Continuous edges of each bin when the differences are whole multiples of ``res``.

    With an even number of resolution steps per bin, the outward tie rule of
    :func:`coincidence_histogram` moves every off-centre bin half a step
    toward zero and trims the central bin by one step.
    """
    if not res:
        return x - w / 2, x + w / 2
    steps = int(round(w / res))
    if steps % 2:
        return x - w / 2, x + w / 2
    shift = -0.5 * res * np.sign(np.round(x / w))
    lo = x - w / 2 + shift
    hi = x + w / 2 + shift
    centre = np.round(x / w) == 0
    lo = np.where(centre, x - w / 2 + res / 2, lo)
    hi = np.where(centre, x + w / 2 - res / 2, hi)
    return lo, hi


def _peak_density(b, s):
    if s == 0:
        return 0.5 / b
    if b == 0:
        return 1.0 / (s * np.sqrt(2 * np.pi))
    return 0.5 / b * special.erfcx(s / b / np.sqrt(2.0))


@dataclass
class DoubleExpFit:
    """Coincidence-peak fit.

    ``tau_1e`` is the RMS width of the fitted peak, ``sqrt(2*decay**2 +
    jitter**2)``, the quantity that obeys the jitter relation in
    :mod:`ptring.lifetime`. ``decay`` is the exponential scale of each side
    and ``jitter`` the combined Gaussian width.
    """

    tau_1e: float
    amplitude: float
    baseline: float
    center: float
    decay: float
    jitter: float
    cost: float
    n_iter: int
    cost_history: list = field(default_factory=list, repr=False)

    def __iter__(self):
        return iter((self.tau_1e, self.amplitude, self.baseline))

    def to_dict(self):
        return dict(tau_1e=self.tau_1e, amplitude=self.amplitude, baseline=self.baseline,
                    center=self.center, decay=self.decay, jitter=self.jitter,
                    cost=self.cost, n_iter=self.n_iter)


class CoincidencePeakRegressor(RegressorMixin, BaseEstimator):
    """Two-sided exponential peak, blurred by Gaussian jitter, on a flat floor.

    The model for a bin ``[lo, hi]`` is ``N * P(lo < X - t0 < hi) + B`` with
    ``X`` Laplace(``decay``) plus Normal(``jitter``), so bin integration is
    exact. Pass ``jitter`` to hold the Gaussian width fixed. ``resolution``
    is the timestamp step (s) behind the histogram, or None for continuous
    time differences. With ``weighting="poisson"`` an unweighted fit is
    followed by one pass weighted by the inverse model variance.
    """

    def __init__(self, jitter=None, resolution=None, weighting="poisson", region=5.0,
                 max_iter=2000, tol=1e-12):
        self.jitter = jitter
        self.resolution = resolution
        self.weighting = weighting
        self.region = region
        self.max_iter = max_iter
        self.tol = tol

    def _widths(self, theta):
        b = self._w * np.exp(np.clip(theta[2], -40.0, 40.0))
        s = (self._w * np.exp(np.clip(theta[3], -40.0, 40.0))
             if self.jitter is None else self.jitter * 1e12)
        return b, s

    def _model(self, theta, edges):
        b, s = self._widths(theta)
        lo, hi = edges
        t0 = theta[1] * self._w
        return theta[0] * self._n0 * _bin_mass(lo - t0, hi - t0, b, s) + theta[4] * self._b0

    def fit(self, X, y):
        x, y = check_xy(X, y)
        x = x * 1e12
        if x.size < 5:
            raise ValueError("need at least 5 bins")
        if self.weighting not in ("poisson", "none"):
            raise ValueError("weighting must be 'poisson' or 'none'")
        bw = float(np.median(np.diff(x)))
        med = float(np.median(y))
        if y.max() <= 0 or y.max() < 5 * med:
            raise NoPeakError(f"max count {y.max():g} below 5x median {med:g}")
        excess = y - med
        ipk = int(np.argmax(excess))
        above = np.flatnonzero(excess >= 0.5 * excess[ipk])
        fwhm = max((above.max() - above.min() + 1) * bw, bw)
        hw = max(self.region * fwhm, 10 * bw)
        t_guess = float(np.sum(x[above] * excess[above]) / np.sum(excess[above]))
        sel = np.abs(x - t_guess) <= hw
        xs, ys = x[sel], y[sel]
        step = self.resolution * 1e12 if self.resolution else None
        edges = _bin_edges(xs, bw, step)
        self._w = fwhm / 2.3548
        self._n0 = max(float(np.sum(excess[above])) * 2.0, 1.0)
        self._b0 = max(med, 1.0)
        theta0 = np.array([1.0, t_guess / self._w, np.log(1 / np.sqrt(3)),
                           np.log(1 / np.sqrt(3)), med / self._b0])
        free = np.ones(5, dtype=bool)
        if self.jitter is not None:
            free[3] = False

        def run(th_start, weight):
            def resid(p):
                th = th_start.copy()
                th[free] = p
                return (self._model(th, edges) - ys) * weight
            out = levenberg_marquardt(resid, th_start[free], max_iter=self.max_iter,
                                      ftol=self.tol)
            th = th_start.copy()
            th[free] = out.x
            return th, out

        theta, out = run(theta0, 1.0)
        history = list(out.cost_history)
        n_iter = out.n_iter
        if self.weighting == "poisson":
            # one reweighting pass: Pearson weights frozen at the unweighted model
            weight = 1.0 / np.sqrt(np.maximum(self._model(theta, edges), 1.0))
            theta, out = run(theta, weight)
            history += out.cost_history
            n_iter += out.n_iter
        self.theta_ = theta
        self.bin_width_ = bw
        self.step_ = step
        b, s = self._widths(theta)
        self.decay_ = b * 1e-12
        self.jitter_ = s * 1e-12
        self.center_ = theta[1] * self._w * 1e-12
        self.tau_1e_ = float(np.sqrt(2 * b * b + s * s)) * 1e-12
        self.baseline_ = float(theta[4] * self._b0)
        self.amplitude_ = float(theta[0] * self._n0 * bw * _peak_density(b, s))
        self.cost_ = out.cost
        self.n_iter_ = n_iter
        self.cost_history_ = history
        return self

    def predict(self, X):
        check_is_fitted(self, "theta_")
        x = np.asarray(X, dtype=float).ravel() * 1e12
        return self._model(self.theta_, _bin_edges(x, self.bin_width_, self.step_))

    def result(self):
        check_is_fitted(self, "theta_")
        return DoubleExpFit(self.tau_1e_, self.amplitude_, self.baseline_, self.center_,
                            self.decay_, self.jitter_, self.cost_, self.n_iter_,
                            list(self.cost_history_))


def fit_double_exponential(hist, jitter=None, weighting="poisson", max_iter=2000):
    est = CoincidencePeakRegressor(jitter=jitter, resolution=hist.resolution,
                                   weighting=weighting, max_iter=max_iter)
    return est.fit(hist.offsets, hist.counts).result()


# ----------------------------------------------------------------------- CAR

def _peak_centroid(off, cnt):
    excess = cnt - np.median(cnt)
    top = excess.max()
    if top <= 0:
        return 0.0
    sel = excess >= 0.5 * top
    return float(np.sum(off[sel] * excess[sel]) / np.sum(excess[sel]))


def car(hist, peak_window, accidental_window, center=None, lower_bound=False):
    """Coincidence-to-accidental ratio ``(car, sigma)``.

    ``peak_window`` is the full width of the peak region around ``center``
    (default: centroid of the bins above half the peak excess). Bins at least
    ``accidental_window/2`` from the centre give the accidental level. With ``lower_bound=True`` an empty
    accidental region is treated as one count, giving a lower bound.
    """
    check_positive("peak_window", peak_window)
    check_positive("accidental_window", accidental_window)
    if accidental_window < peak_window:
        raise ValueError("accidental region must lie outside the peak window")
    off, cnt = hist.offsets, hist.counts
    c0 = _peak_centroid(off, cnt) if center is None else center
    dist = np.abs(off - c0)
    eps = 1e-6 * hist.bin_width
    in_peak = dist <= peak_window / 2 + eps
    in_acc = dist >= accidental_window / 2 - eps
    n_p, n_a = int(in_peak.sum()), int(in_acc.sum())
    if n_p == 0 or n_a == 0:
        raise ValueError("peak or accidental window contains no bins")
    P = float(cnt[in_peak].sum())
    A = float(cnt[in_acc].sum())
    if A == 0:
        if not lower_bound:
            raise ZeroAccidentalError("no accidental counts; CAR unbounded")
        A = 1.0
    value = P * n_a / (A * n_p)
    sigma = value * np.sqrt((1.0 / P if P > 0 else 0.0) + 1.0 / A)
    return value, float(sigma)


# ---------------------------------------------------------------- visibility

@dataclass
class VisibilityResult:
    visibility: float
    sigma: float
    fit_amplitude: float
    fit_offset: float
    fit_phase: float
    n_trials: int

    def to_dict(self):
        return dict(visibility=self.visibility, sigma=self.sigma,
                    fit_amplitude=self.fit_amplitude, fit_offset=self.fit_offset,
                    fit_phase=self.fit_phase, n_trials=self.n_trials)


def _fringe_design(phases):
    return np.column_stack([np.ones_like(phases), np.cos(phases), np.sin(phases)])


class FringeRegressor(RegressorMixin, BaseEstimator):
    """``C(phi) = O * (1 + V cos(phi - phi0))`` by linear least squares.

    The error on V comes from ``n_trials`` Poisson resamples of the observed
    counts; trial ``i`` draws from ``numpy.random.default_rng([random_state, i])``.
    """

    def __init__(self, n_trials=1000, random_state=0):
        self.n_trials = n_trials
        self.random_state = random_state

    def fit(self, X, y):
        phases, counts = check_xy(X, y, min_points=5)
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        if np.ptp(phases) < np.pi:
            raise ValueError("phase points must span at least pi")
        if np.all(counts == counts[0]):
            raise DegenerateFitError("all counts are equal; fringe undefined")
        D = _fringe_design(phases)
        a, bc, bs = np.linalg.lstsq(D, counts, rcond=None)[0]
        if a <= 0:
            raise DegenerateFitError("fitted fringe offset is not positive")
        amp = float(np.hypot(bc, bs))
        self.offset_ = float(a)
        self.amplitude_ = amp
        self.phase_ = float(np.arctan2(bs, bc))
        self.visibility_ = amp / a
        vs = np.empty(self.n_trials)
        for i in range(self.n_trials):
            rng = np.random.default_rng([self.random_state, i])
            vs[i] = self._vis(D, rng.poisson(counts).astype(float))
        self.sigma_ = float(np.nanstd(vs)) if self.n_trials > 1 else 0.0
        self.trial_visibilities_ = vs
        return self

    @staticmethod
    def _vis(D, c):
        a, bc, bs = np.linalg.lstsq(D, c, rcond=None)[0]
        return np.hypot(bc, bs) / a if a > 0 else np.nan

    def predict(self, X):
        check_is_fitted(self, "offset_")
        ph = np.asarray(X, dtype=float)
        return self.offset_ + self.amplitude_ * np.cos(ph - self.phase_)

    def result(self):
        check_is_fitted(self, "offset_")
        return VisibilityResult(self.visibility_, self.sigma_, self.amplitude_,
                                self.offset_, self.phase_, self.n_trials)


def visibility_fit(phases, coincidences, n_trials=1000, seed=0):
    est = FringeRegressor(n_trials=n_trials, random_state=seed)
    return est.fit(phases, coincidences).result()


def bell_threshold_check(result):
    """``(violates, margin)`` with a strict ``V > 1/sqrt(2)`` test."""
    v = result.visibility if hasattr(result, "visibility") else float(result)
    return bool(v > BELL_THRESHOLD), float(v - BELL_THRESHOLD)


# ------------------------------------------------------------------------ g2

@dataclass
class G2Result:
    delays: np.ndarray
    g2: np.ndarray
    g2_zero: float
    sigma_zero: float
    n_herald: int = 0
    n_threefold_zero: int = 0

    def to_dict(self):
        return {
            "delays_ps": [float(x) for x in np.round(np.asarray(self.delays) * 1e12, 6)],
            "g2": [float(x) for x in self.g2],
            "g2_zero": self.g2_zero,
            "sigma_zero": self.sigma_zero,
            "n_herald": int(self.n_herald),
            "n_threefold_zero": int(self.n_threefold_zero),
        }


def _hits(herald, arm, shift, half):
    lo = np.searchsorted(arm, herald + shift - half, side="left")
    hi = np.searchsorted(arm, herald + shift + half, side="right")
    return hi > lo


def heralded_g2(herald, arm1, arm2, coincidence_window=1e-9, delays=None):
    """Heralded autocorrelation ``N3 * Nh / (Nh1 * Nh2)`` versus arm-2 delay.

    A herald at ``t`` counts for arm ``i`` when that arm fires within
    ``±coincidence_window/2`` of ``t`` (arm 2 of ``t + delay``).
    """
    win = _to_ps("coincidence_window", coincidence_window)
    half = win // 2
    if delays is None:
        delays = np.arange(-20, 21) * 1e-9
    delays = np.asarray(delays, dtype=float)
    h = herald.times_ps
    n_h = h.size
    has1 = _hits(h, arm1.times_ps, 0, half)
    n_h1 = int(has1.sum())

    def one(delay_ps):
        has2 = _hits(h, arm2.times_ps, delay_ps, half)
        n_h2 = int(has2.sum())
        if n_h1 * n_h2 == 0:
            raise InsufficientStatisticsError(
                f"no herald-arm coincidences (N_h1={n_h1}, N_h2={n_h2})")
        n3 = int(np.count_nonzero(has1 & has2))
        return n3, n_h2

    g2 = np.empty(delays.size)
    for i, d in enumerate(delays):
        n3, n_h2 = one(int(round(d * 1e12)))
        g2[i] = n3 * n_h / (n_h1 * n_h2)
    n3, n_h2 = one(0)
    g0 = n3 * n_h / (n_h1 * n_h2)
    rel = np.sqrt(1.0 / max(n3, 1) + 1.0 / n_h1 + 1.0 / n_h2 + 1.0 / n_h)
    sigma = (g0 if n3 > 0 else n_h / (n_h1 * n_h2)) * rel
    return G2Result(delays, g2, float(g0), float(sigma), n_h, n3)
