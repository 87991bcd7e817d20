"""Monte Carlo photon-pair sources and detection records.

Pairs are created by a Poisson process whose rate grows with the square of
the pump power. Each photon leaves its cavity after an exponential delay set
by the cavity lifetime, is detected with a fixed efficiency and picks up
Gaussian channel jitter. Dark counts are independent Poisson processes.
Timestamps are integers in picoseconds (round-half-even).

Every generator takes its seed from the config or an argument; there is no
global random state.
"""

import warnings
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy import integrate

from ._validation import check_fraction, check_nonneg, check_positive, check_sorted_times
from .exceptions import IntegrationWindowWarning
from .tcmt import _amplitudes, eigenfrequencies

PS = 1e12  # picoseconds per second


@dataclass(frozen=True)
class PairSourceConfig:
    """Pair source and detection chain.

    Rates in s^-1, times in s, pump power in mW. ``jitter_*`` are the
    standard deviations of the Gaussian channel responses.
    """

    pgr_coefficient: float = 1.0e4
    pump_power: float = 1.0
    tau_signal: float = 156.4e-12
    tau_idler: float = 156.4e-12
    eff_signal: float = 0.9
    eff_idler: float = 0.9
    dark_signal: float = 30.0
    dark_idler: float = 30.0
    jitter_signal: float = 74.5e-12
    jitter_idler: float = 53.5e-12
    duration: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("pgr_coefficient", "pump_power", "tau_signal", "tau_idler",
                     "dark_signal", "dark_idler", "jitter_signal", "jitter_idler"):
            check_nonneg(name, getattr(self, name))
        check_fraction("eff_signal", self.eff_signal)
        check_fraction("eff_idler", self.eff_idler)
        check_positive("duration", self.duration)
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class TimestampStream:
    """Detection times of one channel, in integer picoseconds."""

    channel: str
    times_ps: np.ndarray
    duration: float = None

    def __post_init__(self):
        t = check_sorted_times(self.times_ps)
        if t.size and t[0] < 0:
            raise ValueError("timestamps must be non-negative")
        if self.duration is not None and t.size and t[-1] > round(self.duration * PS):
            raise ValueError("timestamps extend past the acquisition duration")
        object.__setattr__(self, "times_ps", t)

    @property
    def times(self):
        return self.times_ps * 1e-12

    def __len__(self):
        return self.times_ps.size


@dataclass(frozen=True)
class FransonConfig:
    phase: float = 0.0
    visibility_true: float = 0.871
    base_rate: float = 25.0
    singles_rate_signal: float = 40.1e3
    singles_rate_idler: float = 40.0e3
    integration_time: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.phase):
            raise ValueError("phase must be finite")
        check_fraction("visibility_true", self.visibility_true)
        check_nonneg("base_rate", self.base_rate)
        check_nonneg("singles_rate_signal", self.singles_rate_signal)
        check_nonneg("singles_rate_idler", self.singles_rate_idler)
        check_positive("integration_time", self.integration_time)

    def replace(self, **changes):
        return replace(self, **changes)


def pair_rate(config):
    return config.pgr_coefficient * config.pump_power ** 2


def dos_integral(params, n_widths=10.0):
    """Integral of the unnormalised main-ring DOS ``|a1|^2`` over frequency.

    The window extends ``n_widths`` times ``gamma1 + gamma2 + gamma_c`` beyond
    both eigenmode resonances. Warns if the DOS at the window edges exceeds
    1e-3 of its peak.
    """
    if params.kappa == 0 or params.gamma_c == 0:
        return 0.0
    sol = eigenfrequencies(params)
    center = params.omega1 + 0.5 * params.delta_omega
    width = params.gamma1 + params.gamma2 + params.gamma_c
    re = sorted(w.real - center for w in (sol.omega_plus, sol.omega_minus))
    lo, hi = re[0] - n_widths * width, re[1] + n_widths * width

    def dos(x):
        a1, _, _ = _amplitudes(params, center + x)
        return float(np.abs(a1) ** 2)

    probe = np.linspace(lo, hi, 4001)
    peak = max(float(np.max(np.abs(_amplitudes(params, center + probe)[0]) ** 2)),
               *(dos(r) for r in re))
    edge = max(dos(lo), dos(hi))
    if edge > 1e-3 * peak:
        warnings.warn(f"DOS at integration edge is {edge / peak:.2e} of peak",
                      IntegrationWindowWarning, stacklevel=2)
    pts = [r for r in re if lo < r < hi]
    val, _ = integrate.quad(dos, lo, hi, points=pts, limit=500, epsabs=0.0, epsrel=1e-10)
    return val


def dos_weighted_rate(config, params_signal, params_idler, reference_params):
    """Pair rate scaled by the signal and idler DOS integrals relative to a reference."""
    ref = dos_integral(reference_params)
    if ref == 0:
        raise ValueError("reference DOS integral is zero")
    factor = dos_integral(params_signal) * dos_integral(params_idler) / ref ** 2
    return pair_rate(config) * factor


def _decorate(rng, created_ps, eff, tau, jitter):
    # draw every random array for every photon so that the stream is a
    # fixed function of the seed regardless of efficiency
    keep = rng.random(created_ps.size) < eff
    delay = rng.exponential(tau * PS, created_ps.size) if tau > 0 else np.zeros(created_ps.size)
    noise = rng.normal(0.0, jitter * PS, created_ps.size) if jitter > 0 else np.zeros(created_ps.size)
    return (created_ps + delay + noise)[keep]


def _finish(rng, channel, photons_ps, dark_rate, duration):
    n_dark = rng.poisson(dark_rate * duration)
    dark = rng.uniform(0.0, duration * PS, n_dark)
    t = np.concatenate([photons_ps, dark])
    t = np.rint(t)
    t = t[(t >= 0) & (t <= round(duration * PS))]
    return TimestampStream(channel, np.sort(t.astype(np.int64)), duration)


def generate_pair_streams(config):
    """Signal and idler detection streams for a CW-pumped pair source."""
    c = config
    rng = np.random.default_rng(c.seed)
    n = rng.poisson(pair_rate(c) * c.duration)
    created = rng.uniform(0.0, c.duration * PS, n)
    sig = _decorate(rng, created, c.eff_signal, c.tau_signal, c.jitter_signal)
    idl = _decorate(rng, created, c.eff_idler, c.tau_idler, c.jitter_idler)
    signal = _finish(rng, "signal", sig, c.dark_signal, c.duration)
    idler = _finish(rng, "idler", idl, c.dark_idler, c.duration)
    return signal, idler


def simulate_franson(config):
    """Singles and coincidence counts at one interferometer phase.

    Returns ``(signal_singles, idler_singles, coincidences)``. The mean
    coincidence number is ``base_rate * T * (1 + V cos(phase)) / 2``.
    """
    c = config
    rng = np.random.default_rng(c.seed)
    s1 = rng.poisson(c.singles_rate_signal * c.integration_time)
    s2 = rng.poisson(c.singles_rate_idler * c.integration_time)
    mean = c.base_rate * c.integration_time * 0.5 * (1.0 + c.visibility_true * np.cos(c.phase))
    cc = rng.poisson(max(mean, 0.0))
    return int(s1), int(s2), int(cc)


def franson_scan(config, phases):
    """Run :func:`simulate_franson` over ``phases``; arrays of the three counts.

    Point ``i`` uses the seed ``[config.seed, i]``.
    """
    rows = []
    for i, ph in enumerate(np.asarray(phases, dtype=float)):
        seed = int(np.random.SeedSequence([config.seed, i]).generate_state(1)[0])
        rows.append(simulate_franson(config.replace(phase=float(ph), seed=seed)))
    s1, s2, cc = (np.array(col, dtype=np.int64) for col in zip(*rows))
    return s1, s2, cc


def simulate_hbt(config, mean_pairs_per_window, splitter_ratio=0.5, n_windows=1_000_000,
                 seed=None, window=1e-9):
    """Heralded Hanbury Brown-Twiss experiment.

    Signal photons go to the herald detector; idler photons meet a beam
    splitter and go to arm 1 with probability ``splitter_ratio``. The record
    covers ``n_windows`` consecutive windows of length ``window`` each holding a
    Poisson(``mean_pairs_per_window``) number of pairs at uniform random
    times, which is drawn as one Poisson total over the whole record.
    Lifetimes, efficiencies, jitters and dark rates come from ``config``; its
    pump settings and duration are not used.

    Returns ``(herald, arm1, arm2)``.
    """
    check_nonneg("mean_pairs_per_window", mean_pairs_per_window)
    if not 0 < splitter_ratio < 1:
        raise ValueError("splitter_ratio must lie in (0, 1)")
    check_positive("window", window)
    c = config
    rng = np.random.default_rng(c.seed if seed is None else seed)
    duration = n_windows * window
    n = rng.poisson(mean_pairs_per_window * n_windows)
    created = rng.uniform(0.0, duration * PS, n)
    herald = _decorate(rng, created, c.eff_signal, c.tau_signal, c.jitter_signal)
    idler = _decorate(rng, created, 1.0, c.tau_idler, c.jitter_idler)
    detected = rng.random(n) < c.eff_idler
    to_arm1 = rng.random(n) < splitter_ratio
    h = _finish(rng, "herald", herald, c.dark_signal, duration)
    a1 = _finish(rng, "arm1", idler[detected & to_arm1], c.dark_idler, duration)
    a2 = _finish(rng, "arm2", idler[detected & ~to_arm1], c.dark_idler, duration)
    return h, a1, a2
