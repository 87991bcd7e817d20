"""Coupled dual-microring photon-pair source: model, simulation and analysis.

Modules
-------
tcmt        two-mode non-Hermitian model, eigenfrequencies, spectra, DOS
spectra     resonance finding, Lorentzian Q fits, full-model parameter fits
lifetime    photon lifetimes from decay rates, jitter relation
photon_sim  Monte Carlo pair streams, Franson counts, heralded HBT streams
counting    coincidence histograms, peak fits, CAR, visibility, heralded g2
io, cli     file formats and the ``ptring`` command
"""

__version__ = "0.1.0"

from .counting import (
    CoincidenceHistogram,
    CoincidencePeakRegressor,
    DoubleExpFit,
    FringeRegressor,
    G2Result,
    VisibilityResult,
    bell_threshold_check,
    car,
    coincidence_histogram,
    fit_double_exponential,
    heralded_g2,
    visibility_fit,
)
from .exceptions import *  # noqa: F401,F403
from .lifetime import (
    LifetimeEstimate,
    convolve_jitter,
    deconvolve_jitter,
    lifetime_contrast,
    predict_lifetimes,
    tau_exact,
    tau_high_q,
    tau_low_q,
)
from .photon_sim import (
    FransonConfig,
    PairSourceConfig,
    TimestampStream,
    dos_integral,
    dos_weighted_rate,
    franson_scan,
    generate_pair_streams,
    pair_rate,
    simulate_franson,
    simulate_hbt,
)
from .spectra import (
    CoupledRingRegressor,
    LorentzianDip,
    ParamFitResult,
    ResonanceFit,
    comb_q_factors,
    extract_system_params,
    find_resonances,
    fit_lorentzian,
    guess_main_resonance,
)
from .tcmt import (
    DeviceGeometry,
    EigenSolution,
    Spectrum,
    SteadyStateResponse,
    SystemParams,
    closed_form_eigenfrequencies,
    comb_spectrum,
    dos_map,
    dos_spectrum,
    eigenfrequencies,
    ep_distance,
    hamiltonian,
    steady_state_response,
    transmission_spectrum,
)
