"""Two-mode non-Hermitian coupled-mode model of the main/auxiliary ring pair.

All rates and frequencies are plain numbers in s^-1. No factors of 2*pi are
applied anywhere: a linewidth, a detuning and a resonance position given in
the same unit can be compared directly, and Q is ``center / fwhm``.

The bus waveguide couples only to the auxiliary ring. With the time
dependence ``exp(-i w t)`` the driven equations are::

    da1/dt = (-i w1 - g1/2) a1 - i k a2
    da2/dt = (-i w2 - (g2 + gc)/2) a2 - i k a1 + sqrt(gc) s_in
    s_out  = s_in - sqrt(gc) a2
"""

from dataclasses import dataclass, field, replace

import numpy as np

from ._validation import check_grid, check_nonneg, check_positive
from .exceptions import SingularSystemError

C_LIGHT = 299_792_458.0

# Rates extracted from the fabricated device (s^-1).
DEVICE_RATES = dict(gamma1=3.0e9, gamma2=3.0e9, gamma_c=146.8e9, kappa=45.5e9)


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters of the coupled dual-ring system.

    Parameters
    ----------
    omega1 : float
        Main-ring resonance. Zero is allowed so that models can be evaluated
        in a frame rotating at the main-ring resonance.
    delta_omega : float
        Detuning ``omega2 - omega1`` of the auxiliary ring.
    gamma1, gamma2 : float
        Intrinsic decay rates of the main and auxiliary ring.
    gamma_c : float
        Auxiliary-ring to bus-waveguide coupling decay rate.
    kappa : float
        Ring-ring coupling strength.
    """

    omega1: float
    delta_omega: float = 0.0
    gamma1: float = 0.0
    gamma2: float = 0.0
    gamma_c: float = 0.0
    kappa: float = 0.0

    def __post_init__(self):
        check_nonneg("omega1", self.omega1)
        if not np.isfinite(self.delta_omega):
            raise ValueError("delta_omega must be finite")
        for name in ("gamma1", "gamma2", "gamma_c", "kappa"):
            check_nonneg(name, getattr(self, name))

    @property
    def omega2(self):
        return self.omega1 + self.delta_omega

    @classmethod
    def device(cls, omega1=0.0, delta_omega=0.0):
        """Parameters fitted to the fabricated device."""
        return cls(omega1=omega1, delta_omega=delta_omega, **DEVICE_RATES)

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return {k: float(getattr(self, k)) for k in
                ("omega1", "delta_omega", "gamma1", "gamma2", "gamma_c", "kappa")}


@dataclass(frozen=True)
class DeviceGeometry:
    """Frequency combs of the two rings.

    Main-ring resonances sit at ``omega1 + m * fsr1`` for
    ``m = -n_modes .. n_modes``; auxiliary lines sit at
    ``omega1 + alignment_offset + tuning + k * fsr2``.
    """

    fsr1: float
    fsr2: float
    n_modes: int = 3
    alignment_offset: float = 0.0

    def __post_init__(self):
        check_positive("fsr1", self.fsr1)
        check_positive("fsr2", self.fsr2)
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise ValueError(f"n_modes must be a positive integer, got {self.n_modes!r}")
        if not np.isfinite(self.alignment_offset):
            raise ValueError("alignment_offset must be finite")

    @classmethod
    def from_wavelengths(cls, center_nm, fsr1_nm, fsr_ratio=2.0, n_modes=3,
                         alignment_offset=0.0, angular=True):
        """Build a geometry from a carrier wavelength and the main-ring FSR in nm.

        With ``angular=True`` the FSRs are returned as ``2*pi*c*dlambda/lambda**2``
        so that they share the angular convention of the fitted decay rates.
        """
        lam = center_nm * 1e-9
        fsr1 = C_LIGHT * fsr1_nm * 1e-9 / lam**2
        if angular:
            fsr1 *= 2 * np.pi
        return cls(fsr1=fsr1, fsr2=fsr_ratio * fsr1, n_modes=n_modes,
                   alignment_offset=alignment_offset)

    def main_resonances(self, omega1):
        m = np.arange(-self.n_modes, self.n_modes + 1)
        return m, omega1 + m * self.fsr1

    def to_dict(self):
        return dict(fsr1=float(self.fsr1), fsr2=float(self.fsr2),
                    n_modes=int(self.n_modes), alignment_offset=float(self.alignment_offset))


@dataclass(frozen=True)
class EigenSolution:
    omega_plus: complex
    omega_minus: complex
    eigvec_plus: np.ndarray = field(repr=False)
    eigvec_minus: np.ndarray = field(repr=False)

    @property
    def splitting(self):
        return self.omega_plus - self.omega_minus


@dataclass(frozen=True, eq=False)
class SteadyStateResponse:
    a1: complex
    a2: complex
    s_out: complex
    drive_freq: float

    @property
    def transmission(self):
        return np.abs(self.s_out) ** 2


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Values sampled on an ascending frequency grid.

    ``kind`` is ``"transmission"`` or ``"dos"`` and selects the CSV column
    name. Measured spectra may carry noise outside the physical range, so the
    ``[0, 1]`` bound on transmission is only enforced by :meth:`check_physical`,
    which every model in this module calls on its output.
    """

    freqs: np.ndarray
    values: np.ndarray
    kind: str = "transmission"

    def __post_init__(self):
        freqs = check_grid(self.freqs)
        values = np.asarray(self.values, dtype=float).ravel()
        if values.shape != freqs.shape:
            raise ValueError(f"freqs and values lengths differ: {freqs.size} != {values.size}")
        if not np.all(np.isfinite(values)):
            raise ValueError("spectrum values must be finite")
        if self.kind not in ("transmission", "dos"):
            raise ValueError(f"unknown spectrum kind {self.kind!r}")
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.freqs.size

    def check_physical(self):
        if np.any(self.values < 0):
            raise ValueError("spectrum has negative values")
        if self.kind == "transmission" and self.values.max() > 1 + 1e-6:
            raise ValueError(f"transmission exceeds 1 (max {self.values.max():.9g})")
        return self


def hamiltonian(params):
    p = params
    return np.array([
        [p.omega1 - 0.5j * p.gamma1, p.kappa],
        [p.kappa, p.omega2 - 0.5j * (p.gamma2 + p.gamma_c)],
    ], dtype=complex)


def _eigvec(lam, a, d, kappa):
    # Two equivalent null vectors of (H - lam); keep the better conditioned one.
    v1 = np.array([kappa, lam - a], dtype=complex)
    v2 = np.array([lam - d, kappa], dtype=complex)
    v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
    n = np.linalg.norm(v)
    if n == 0:
        return np.array([1.0 + 0j, 0.0 + 0j])
    return v / n


def eigenfrequencies(params):
    """Exact complex eigenfrequencies of :func:`hamiltonian`.

    ``omega_plus`` is the root with the larger real part; when the real parts
    coincide it is the root with the larger imaginary part (slower decay).
    """
    p = params
    gsum = p.gamma1 + p.gamma2 + p.gamma_c
    mean = complex(p.omega1 + 0.5 * p.delta_omega, -0.25 * gsum)
    # half-difference of the diagonal, formed from the small quantities only
    q = complex(-0.5 * p.delta_omega, 0.25 * (p.gamma2 + p.gamma_c - p.gamma1))
    s = np.sqrt(q * q + p.kappa ** 2)
    if abs(s.real) <= 1e-13 * abs(s):
        s = complex(0.0, abs(s.imag))
    elif s.real < 0:
        s = -s
    lp, lm = mean + s, mean - s
    a = complex(p.omega1, -0.5 * p.gamma1)
    d = complex(p.omega2, -0.5 * (p.gamma2 + p.gamma_c))
    return EigenSolution(lp, lm, _eigvec(lp, a, d, p.kappa), _eigvec(lm, a, d, p.kappa))


def closed_form_eigenfrequencies(params):
    """Aligned-ring (zero detuning) closed form of the eigenfrequencies.

    Returns ``(omega_plus, omega_minus)`` labelled like :func:`eigenfrequencies`.
    Only exact for ``delta_omega == 0``; the real offset is the mean resonance
    ``(omega1 + omega2) / 2``.
    """
    p = params
    center = 0.5 * (p.omega1 + p.omega2) - 0.25j * (p.gamma2 + p.gamma_c + p.gamma1)
    disc = 16 * p.kappa ** 2 - (p.gamma2 + p.gamma_c - p.gamma1) ** 2
    root = 0.25 * np.sqrt(complex(disc))
    if disc < 0:
        root = complex(0.0, abs(root.imag))
    return center + root, center - root


def ep_distance(params):
    """Signed distance ``kappa - (gamma2 + gamma_c - gamma1)/4`` from the exceptional point.

    Positive values are the split (PT-symmetric) phase, negative the broken
    phase. Only meaningful as an EP criterion at zero detuning.
    """
    p = params
    return p.kappa - 0.25 * (p.gamma2 + p.gamma_c - p.gamma1)


def _amplitudes(params, w, s_in=1.0):
    p = params
    A = 1j * (p.omega1 - w) + 0.5 * p.gamma1
    B = 1j * (p.omega2 - w) + 0.5 * (p.gamma2 + p.gamma_c)
    det = A * B + p.kappa ** 2
    if np.any(det == 0):
        raise SingularSystemError(
            "steady-state system is singular: lossless configuration driven on resonance")
    drive = np.sqrt(p.gamma_c) * s_in
    a1 = -1j * p.kappa * drive / det
    a2 = A * drive / det
    s_out = s_in - np.sqrt(p.gamma_c) * a2
    return a1, a2, s_out


def steady_state_response(params, drive_freq, s_in=1.0):
    """Driven steady state at ``drive_freq`` (scalar or array)."""
    if s_in == 0:
        raise ValueError("s_in must be non-zero")
    w = np.asarray(drive_freq, dtype=float)
    a1, a2, s_out = _amplitudes(params, w, s_in)
    if w.ndim == 0:
        a1, a2, s_out, w = complex(a1), complex(a2), complex(s_out), float(w)
    return SteadyStateResponse(a1=a1, a2=a2, s_out=s_out, drive_freq=w)


def transmission_spectrum(params, grid):
    grid = check_grid(grid)
    _, _, s_out = _amplitudes(params, grid)
    return Spectrum(grid, np.abs(s_out) ** 2, kind="transmission").check_physical()


def dos_spectrum(params, grid, normalize=False):
    """Main-ring intracavity photon DOS ``|a1|^2`` for unit drive."""
    grid = check_grid(grid)
    a1, _, _ = _amplitudes(params, grid)
    dos = np.abs(a1) ** 2
    if normalize:
        peak = dos.max()
        if peak > 0:
            dos = dos / peak
    return Spectrum(grid, dos, kind="dos").check_physical()


def aux_line_nearest(params_base, geom, tuning=0.0):
    """Auxiliary comb line nearest to each main-ring resonance.

    Returns ``(main_freqs, detunings)`` with ``detunings[i]`` the signed offset
    of that line from main resonance ``i``, in ``[-fsr2/2, fsr2/2)``.
    """
    _, main = geom.main_resonances(params_base.omega1)
    rel = (geom.alignment_offset + tuning - (main - params_base.omega1)) / geom.fsr2
    return main, (rel - np.floor(rel + 0.5)) * geom.fsr2


def comb_spectrum(params_base, geom, tuning, grid):
    """Transmission of the multi-resonance band.

    The auxiliary ring is an unbroken comb of lines at
    ``omega1 + alignment_offset + tuning + k*fsr2`` (all integers ``k``), all
    sharing the bus port. Each of the ``2*n_modes + 1`` main resonances
    couples with strength ``kappa`` to every auxiliary line, at a point of the
    auxiliary ring away from the bus coupler. Solving the coupled system gives

        S_eff = (S_B + K * (pi/fsr2)**2) / (1 + K * S_B),   K = kappa**2 * S_A
        r     = 1 - gamma_c * S_eff / (1 + gamma_c/2 * S_eff)

    with ``S_A = sum 1/(i(w_m - w) + gamma1/2)`` over the main modes and
    ``S_B = sum 1/(i(w_k - w) + gamma2/2)`` over the auxiliary lines, which
    has the closed form ``-i*pi/fsr2 * cot(pi*(w_aux - w - i*gamma2/2)/fsr2)``.
    The ``(pi/fsr2)**2`` term is the round trip from the bus coupler to the
    ring-ring coupler and back; it does not depend on where along the ring the
    second coupler sits.

    The result is passive, periodic in ``tuning`` with period ``fsr2`` and
    smooth in every parameter. A main mode aligned with a line behaves like
    the two-mode system of :func:`transmission_spectrum`. A main mode midway
    between lines sees the auxiliary anti-resonance and an effective bus
    coupling of about ``gamma_c * (pi*kappa/fsr2)**2``.
    ``params_base.delta_omega`` is ignored.
    """
    grid = check_grid(grid)
    p = params_base
    _, main = geom.main_resonances(p.omega1)
    w_aux = p.omega1 + geom.alignment_offset + tuning
    A = 1j * (main[:, None] - grid[None, :]) + 0.5 * p.gamma1
    # reduce the phase before the cotangent so large grid offsets keep precision
    x = ((w_aux - grid) / geom.fsr2) % 1.0
    z = np.pi * (x - 0.5j * p.gamma2 / geom.fsr2)
    P = (np.pi / geom.fsr2) ** 2
    gc = p.gamma_c
    with np.errstate(divide="ignore", invalid="ignore"):
        sb = -1j * np.pi / geom.fsr2 / np.tan(z)
        K = p.kappa ** 2 * np.sum(1.0 / A, axis=0) if p.kappa > 0 else np.zeros(grid.size)
        r = 1.0 - gc * (sb + K * P) / (1.0 + K * sb + 0.5 * gc * (sb + K * P))
        # lossless resonances hit exactly: limits S_B -> inf and K -> inf
        lim_b = 1.0 - gc / (K + 0.5 * gc)
        lim_k = 1.0 - gc * P / (sb + 0.5 * gc * P)
    inf_b = ~np.isfinite(sb)
    inf_k = ~np.isfinite(K)
    r = np.where(inf_b & ~inf_k, lim_b, r)
    r = np.where(inf_k & ~inf_b, lim_k, r)
    r = np.where(inf_k & inf_b, 1.0 + 0j, r)
    if gc == 0:
        r = np.ones_like(r)
    if not np.all(np.isfinite(r)):
        raise SingularSystemError("comb system is singular at a grid point")
    return Spectrum(grid, np.abs(r) ** 2, kind="transmission").check_physical()


def dos_map(params, detunings, grid, normalize=True):
    """Main-ring DOS for each detuning, shape ``(len(detunings), len(grid))``."""
    grid = check_grid(grid)
    rows = [dos_spectrum(params.replace(delta_omega=float(d)), grid, normalize=False).values
            for d in np.asarray(detunings, dtype=float)]
    out = np.vstack(rows)
    if normalize and out.max() > 0:
        out = out / out.max()
    return out
