"""Command-line front end.

Every subcommand takes its settings from built-in defaults, then an optional
``--config`` JSON file, then explicit flags (later wins). Exit codes: 0 on
success, 2 for bad input, 3 for a numerical failure. Errors are reported as a
single line on stderr::

    ptring: error: <kind>: <message>
"""

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .counting import (
    bell_threshold_check,
    car,
    coincidence_histogram,
    fit_double_exponential,
    heralded_g2,
    visibility_fit,
)
from .exceptions import (
    ConvergenceError,
    DegenerateFitError,
    InfiniteLifetimeError,
    InsufficientStatisticsError,
    JitterDominatedError,
    NoPeakError,
    SingularSystemError,
    ZeroAccidentalError,
)
from .io import (
    read_single_stream,
    read_spectrum_csv,
    write_json,
    write_matrix_csv,
    write_spectrum_csv,
    write_timestamps_csv,
)
from .lifetime import LifetimeEstimate, predict_lifetimes
from .photon_sim import (
    FransonConfig,
    PairSourceConfig,
    franson_scan,
    generate_pair_streams,
    pair_rate,
    simulate_hbt,
)
from .spectra import comb_q_factors, extract_system_params, guess_main_resonance
from .tcmt import (
    C_LIGHT,
    DEVICE_RATES,
    DeviceGeometry,
    SystemParams,
    comb_spectrum,
    dos_map,
    dos_spectrum,
    eigenfrequencies,
    transmission_spectrum,
)

NUMERICAL = (NoPeakError, ConvergenceError, JitterDominatedError, ZeroAccidentalError,
             InsufficientStatisticsError, DegenerateFitError, SingularSystemError,
             InfiniteLifetimeError, ArithmeticError)


class UsageError(Exception):
    pass


def nm_to_angular(nm):
    """Angular frequency ``2*pi*c/lambda`` (s^-1) of a vacuum wavelength in nm."""
    if nm <= 0:
        raise ValueError("wavelength must be positive")
    return 2 * math.pi * C_LIGHT / (nm * 1e-9)


def _bool(v):
    if isinstance(v, bool):
        return v
    raise ValueError(f"expected true/false, got {v!r}")


# option tables: (name, type, default, help); type None marks a switch
SYSTEM = [
    ("omega1", float, None, "main-ring resonance, s^-1 (default: from --center-nm)"),
    ("center_nm", float, 1536.9, "main-ring resonance wavelength, nm"),
    ("delta_omega", float, 0.0, "auxiliary minus main resonance, s^-1"),
    ("gamma1", float, DEVICE_RATES["gamma1"], "main-ring intrinsic decay rate, s^-1"),
    ("gamma2", float, DEVICE_RATES["gamma2"], "auxiliary-ring intrinsic decay rate, s^-1"),
    ("gamma_c", float, DEVICE_RATES["gamma_c"], "bus coupling decay rate, s^-1"),
    ("kappa", float, DEVICE_RATES["kappa"], "ring-ring coupling, s^-1"),
]
GEOMETRY = [
    ("fsr1", float, None, "main-ring FSR, s^-1 (default: from --fsr1-nm)"),
    ("fsr1_nm", float, 0.78, "main-ring FSR, nm"),
    ("fsr_ratio", float, 2.0, "auxiliary FSR over main FSR"),
    ("n_modes", int, 3, "main resonances on each side of the centre one"),
    ("alignment_offset", float, 0.0, "auxiliary comb offset at zero tuning, s^-1"),
    ("tuning", float, 0.0, "auxiliary comb shift, s^-1"),
]
GRID = [
    ("start", float, None, "grid start, s^-1 (default: from --stop-nm)"),
    ("stop", float, None, "grid stop, s^-1 (default: from --start-nm)"),
    ("start_nm", float, 1534.0, "short-wavelength end of the grid, nm"),
    ("stop_nm", float, 1540.0, "long-wavelength end of the grid, nm"),
    ("points", int, 20001, "number of grid points"),
]
_PAIR = PairSourceConfig()
PAIR = [(k, type(getattr(_PAIR, k)), getattr(_PAIR, k), f"pair source {k.replace('_', ' ')}")
        for k in ("pgr_coefficient", "pump_power", "tau_signal", "tau_idler", "eff_signal",
                  "eff_idler", "dark_signal", "dark_idler", "jitter_signal", "jitter_idler",
                  "duration", "seed")]
_FR = FransonConfig()
FRANSON = [(k, type(getattr(_FR, k)), getattr(_FR, k), f"Franson {k.replace('_', ' ')}")
           for k in ("visibility_true", "base_rate", "singles_rate_signal",
                     "singles_rate_idler", "integration_time", "seed")]

COMMANDS = {
    "simulate-spectrum": dict(
        help="synthesise a transmission or DOS spectrum",
        options=SYSTEM + GEOMETRY + GRID + [
            ("mode", str, "comb", "comb (multi-resonance band) or single (one ring pair)"),
            ("kind", str, "transmission", "transmission or dos (dos needs --mode single)"),
            ("format", str, "csv", "output format: csv or json"),
            ("output", str, None, "output file"),
        ]),
    "sweep-detuning": dict(
        help="main-ring DOS versus auxiliary detuning, near the EP and in the splitting regime",
        options=SYSTEM + [
            ("detuning_start", float, -3.0e11, "first detuning, s^-1"),
            ("detuning_stop", float, 3.0e11, "last detuning, s^-1"),
            ("detuning_points", int, 61, "number of detunings"),
            ("probe_span", float, 8.0e11, "probe window width around omega1, s^-1"),
            ("probe_points", int, 801, "probe frequencies per row"),
            ("splitting_gamma_c", float, 0.3e9, "bus coupling used for the splitting-regime map"),
            ("output_dir", str, None, "directory for the two map files"),
        ]),
    "fit-spectrum": dict(
        help="extract decay rates and coupling from a measured spectrum",
        options=SYSTEM + GEOMETRY + [
            ("input", str, None, "spectrum CSV (freq_hz,transmission)"),
            ("output", str, None, "result JSON"),
            ("prominence", float, 0.1, "minimum dip depth for resonance detection"),
            ("equal_intrinsic", None, False, "tie gamma2 to gamma1"),
            ("max_iter", int, 10000, "iteration cap"),
        ]),
    "predict-lifetime": dict(
        help="photon lifetimes and contrast from decay rates",
        options=SYSTEM + [("output", str, None, "optional result JSON")]),
    "simulate-pairs": dict(
        help="simulate signal and idler timestamp streams",
        options=PAIR + [
            ("output_signal", str, None, "signal timestamp CSV"),
            ("output_idler", str, None, "idler timestamp CSV"),
        ]),
    "analyze": dict(
        help="coincidence histogram, lifetime and CAR from two timestamp files",
        options=[
            ("signal", str, None, "signal timestamp CSV (stop channel)"),
            ("idler", str, None, "idler timestamp CSV (start channel)"),
            ("bin_width", float, 10e-12, "histogram bin width, s"),
            ("span", float, 10e-9, "histogram span, s"),
            ("jitter_signal", float, 74.5e-12, "signal channel jitter, s"),
            ("jitter_idler", float, 53.5e-12, "idler channel jitter, s"),
            ("peak_window", float, 6.0, "CAR peak window, in units of the fitted width"),
            ("accidental_window", float, 20.0,
             "CAR excluded central region, in units of the fitted width"),
            ("output", str, None, "analysis JSON"),
            ("histogram_output", str, None, "histogram JSON (default: next to --output)"),
        ]),
    "franson": dict(
        help="simulate a two-photon fringe and fit its visibility",
        options=FRANSON + [
            ("phase_points", int, 41, "number of phase settings"),
            ("phase_stop", float, 4 * math.pi, "last phase, rad (first is 0)"),
            ("n_trials", int, 1000, "Monte Carlo trials"),
            ("output", str, None, "fringe JSON"),
        ]),
    "g2": dict(
        help="simulate a heralded HBT run and compute g2 versus delay",
        options=[o for o in PAIR if o[0] not in ("pgr_coefficient", "pump_power", "duration")] + [
            ("mean_pairs", float, 0.03, "mean pairs per window"),
            ("splitter_ratio", float, 0.5, "fraction of idlers sent to arm 1"),
            ("n_windows", int, 5_000_000, "number of windows"),
            ("window", float, 1e-9, "window length, s"),
            ("coincidence_window", float, 1e-9, "coincidence window, s"),
            ("delay_max", float, 20e-9, "largest |delay|, s"),
            ("delay_step", float, 1e-9, "delay step, s"),
            ("output", str, None, "G2 JSON"),
        ]),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="ptring", description="Coupled dual-ring photon-pair toolkit.")
    parser.add_argument("--version", action="version", version=f"ptring {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    for name, spec in COMMANDS.items():
        p = sub.add_parser(name, help=spec["help"], description=spec["help"],
                           argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="JSON file with option values (flags override it)")
        for opt, typ, default, text in spec["options"]:
            flag = "--" + opt.replace("_", "-")
            shown = "" if default is None else f" [default: {default}]"
            if typ is None:
                p.add_argument(flag, dest=opt, action="store_true", help=text + shown)
            else:
                p.add_argument(flag, dest=opt, type=typ, help=text + shown)
    return parser


def _merge(command, ns):
    spec = {o[0]: o for o in COMMANDS[command]["options"]}
    cfg = {k: d for k, (_, _, d, _) in spec.items()}
    given = vars(ns).copy()
    given.pop("command", None)
    path = given.pop("config", None)
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"config {path}: invalid JSON ({exc.msg})") from exc
        if not isinstance(data, dict):
            raise ValueError(f"config {path}: top level must be an object")
        for k, v in data.items():
            key = k.replace("-", "_")
            if key not in spec:
                raise ValueError(f"config {path}: unknown key {k!r} for {command}")
            typ = spec[key][1]
            try:
                cfg[key] = None if v is None else (_bool(v) if typ is None else typ(v))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"config {path}: bad value for {k!r}: {v!r}") from exc
    cfg.update(given)
    return cfg


def _require(cfg, *names):
    for n in names:
        if cfg.get(n) in (None, ""):
            raise ValueError(f"--{n.replace('_', '-')} is required")


def _params(cfg, delta_omega=None):
    omega1 = cfg["omega1"] if cfg["omega1"] is not None else nm_to_angular(cfg["center_nm"])
    return SystemParams(omega1=omega1,
                        delta_omega=cfg["delta_omega"] if delta_omega is None else delta_omega,
                        gamma1=cfg["gamma1"], gamma2=cfg["gamma2"],
                        gamma_c=cfg["gamma_c"], kappa=cfg["kappa"])


def _geometry(cfg):
    if cfg["fsr1"] is not None:
        fsr1 = cfg["fsr1"]
        return DeviceGeometry(fsr1=fsr1, fsr2=cfg["fsr_ratio"] * fsr1, n_modes=cfg["n_modes"],
                              alignment_offset=cfg["alignment_offset"])
    return DeviceGeometry.from_wavelengths(cfg["center_nm"], cfg["fsr1_nm"],
                                           fsr_ratio=cfg["fsr_ratio"], n_modes=cfg["n_modes"],
                                           alignment_offset=cfg["alignment_offset"])


def _grid(cfg):
    start = cfg["start"] if cfg["start"] is not None else nm_to_angular(cfg["stop_nm"])
    stop = cfg["stop"] if cfg["stop"] is not None else nm_to_angular(cfg["start_nm"])
    if cfg["points"] < 2:
        raise ValueError("--points must be at least 2")
    if not stop > start:
        raise ValueError("grid stop must exceed grid start")
    return np.linspace(start, stop, cfg["points"])


def _say(obj):
    print(json.dumps(obj, sort_keys=True))


def cmd_simulate_spectrum(cfg):
    _require(cfg, "output")
    if cfg["mode"] not in ("comb", "single"):
        raise ValueError("--mode must be comb or single")
    if cfg["kind"] not in ("transmission", "dos"):
        raise ValueError("--kind must be transmission or dos")
    if cfg["format"] not in ("csv", "json"):
        raise ValueError("--format must be csv or json")
    params = _params(cfg)
    grid = _grid(cfg)
    if cfg["mode"] == "comb":
        if cfg["kind"] == "dos":
            raise ValueError("--kind dos requires --mode single")
        spec = comb_spectrum(params, _geometry(cfg), cfg["tuning"], grid)
    elif cfg["kind"] == "dos":
        spec = dos_spectrum(params, grid)
    else:
        spec = transmission_spectrum(params, grid)
    if cfg["format"] == "csv":
        write_spectrum_csv(cfg["output"], spec)
    else:
        write_json(cfg["output"], {"freq_hz": spec.freqs, spec.kind: spec.values})
    _say({"output": cfg["output"], "points": len(spec)})


def _eig_row(params):
    sol = eigenfrequencies(params)
    return [sol.omega_plus.real, sol.omega_plus.imag, sol.omega_minus.real, sol.omega_minus.imag]


def cmd_sweep_detuning(cfg):
    _require(cfg, "output_dir")
    if cfg["detuning_points"] < 1 or cfg["probe_points"] < 2:
        raise ValueError("need at least 1 detuning and 2 probe points")
    base = _params(cfg)
    det = np.linspace(cfg["detuning_start"], cfg["detuning_stop"], cfg["detuning_points"])
    half = 0.5 * cfg["probe_span"]
    probe = base.omega1 + np.linspace(-half, half, cfg["probe_points"])
    regimes = {"dos_map_ep.csv": base,
               "dos_map_splitting.csv": base.replace(gamma_c=cfg["splitting_gamma_c"])}
    tables = {}
    for fname, p in regimes.items():
        m = dos_map(p, det, probe, normalize=True)
        rows = [[d] + _eig_row(p.replace(delta_omega=float(d))) + list(r)
                for d, r in zip(det, m)]
        tables[fname] = rows
    header = (["detuning_hz", "omega_plus_re", "omega_plus_im", "omega_minus_re",
               "omega_minus_im"] + [repr(float(f)) for f in probe])
    out = Path(cfg["output_dir"])
    for fname, rows in tables.items():
        write_matrix_csv(out / fname, header, rows)
    _say({"outputs": [str(out / f) for f in tables], "rows": len(det),
          "columns": len(probe)})


def cmd_fit_spectrum(cfg):
    _require(cfg, "input", "output")
    spec = read_spectrum_csv(cfg["input"])
    if spec.kind != "transmission":
        raise ValueError("fit-spectrum needs a transmission spectrum")
    geom = _geometry(cfg)
    omega1 = cfg["omega1"]
    if omega1 is None:
        omega1 = guess_main_resonance(spec, geom, cfg["prominence"])
    guess = _params(dict(cfg, omega1=omega1))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        fit = extract_system_params(spec, geom, guess, tuning=cfg["tuning"],
                                    equal_intrinsic=cfg["equal_intrinsic"],
                                    max_iter=cfg["max_iter"])
    life = predict_lifetimes(fit.params)
    q = comb_q_factors(spec, prominence=cfg["prominence"])
    result = fit.to_dict()
    result["lifetimes"] = life
    result["resonances"] = [r.to_dict() for r in q]
    result["geometry"] = geom.to_dict()
    result["warnings"] = [str(w.message) for w in caught]
    write_json(cfg["output"], result)
    p = fit.params
    print(f"gamma1={p.gamma1:.6g} gamma2={p.gamma2:.6g} gamma_c={p.gamma_c:.6g} "
          f"kappa={p.kappa:.6g} tau_high_q_ps={life['high_q'] * 1e12:.4g} "
          f"tau_low_q_ps={life['low_q'] * 1e12:.4g} contrast={life['contrast']:.4g}")


def cmd_predict_lifetime(cfg):
    life = predict_lifetimes(_params(cfg))
    out = {"high_q": life["high_q"], "low_q": life["low_q"],
           "exact_plus": life["exact_plus"], "exact_minus": life["exact_minus"],
           "contrast": life["contrast"]}
    if cfg["output"]:
        write_json(cfg["output"], out)
    _say(out)


def _pair_config(cfg, keys=None):
    keys = keys or [o[0] for o in PAIR]
    return PairSourceConfig(**{k: cfg[k] for k in keys})


def cmd_simulate_pairs(cfg):
    _require(cfg, "output_signal", "output_idler")
    pc = _pair_config(cfg)
    signal, idler = generate_pair_streams(pc)
    write_timestamps_csv(cfg["output_signal"], signal)
    write_timestamps_csv(cfg["output_idler"], idler)
    rate = pair_rate(pc)
    _say({"pair_rate": rate,
          "expected_singles_signal": rate * pc.eff_signal + pc.dark_signal,
          "expected_singles_idler": rate * pc.eff_idler + pc.dark_idler,
          "n_signal": len(signal), "n_idler": len(idler)})


def cmd_analyze(cfg):
    _require(cfg, "signal", "idler", "output")
    signal = read_single_stream(cfg["signal"])
    idler = read_single_stream(cfg["idler"])
    hist = coincidence_histogram(idler, signal, cfg["bin_width"], cfg["span"])
    fit = fit_double_exponential(hist)
    est = LifetimeEstimate.from_width(fit.tau_1e, cfg["jitter_signal"], cfg["jitter_idler"])
    value, sigma = car(hist, cfg["peak_window"] * fit.tau_1e,
                       cfg["accidental_window"] * fit.tau_1e, center=fit.center)
    hpath = cfg["histogram_output"] or str(Path(cfg["output"]).with_suffix("")) + ".histogram.json"
    result = {"tau_1e": est.tau_1e, "tau": est.tau, "jitter1": est.jitter1,
              "jitter2": est.jitter2, "car": value, "car_sigma": sigma,
              "histogram": hpath, "fit": fit.to_dict()}
    write_json(hpath, hist.to_dict())
    write_json(cfg["output"], result)
    _say({k: result[k] for k in ("tau_1e", "tau", "car", "car_sigma")})


def cmd_franson(cfg):
    _require(cfg, "output")
    if cfg["phase_points"] < 5:
        raise ValueError("--phase-points must be at least 5")
    fc = FransonConfig(**{o[0]: cfg[o[0]] for o in FRANSON})
    phases = np.linspace(0.0, cfg["phase_stop"], cfg["phase_points"])
    s1, s2, cc = franson_scan(fc, phases)
    res = visibility_fit(phases, cc, n_trials=cfg["n_trials"], seed=fc.seed)
    ok, margin = bell_threshold_check(res)
    out = res.to_dict()
    out.update(phases=phases, coincidences=cc, singles_signal=s1, singles_idler=s2,
               bell_violation=ok, bell_margin=margin)
    write_json(cfg["output"], out)
    _say({"visibility": res.visibility, "sigma": res.sigma, "bell_violation": ok})


def cmd_g2(cfg):
    _require(cfg, "output")
    keys = [o[0] for o in COMMANDS["g2"]["options"] if o[0] in PairSourceConfig.__dataclass_fields__]
    pc = _pair_config(cfg, keys)
    if cfg["delay_step"] <= 0 or cfg["delay_max"] < 0:
        raise ValueError("--delay-step must be positive and --delay-max non-negative")
    if cfg["n_windows"] < 1:
        raise ValueError("--n-windows must be positive")
    h, a1, a2 = simulate_hbt(pc, cfg["mean_pairs"], cfg["splitter_ratio"], cfg["n_windows"],
                             seed=pc.seed, window=cfg["window"])
    n = int(round(cfg["delay_max"] / cfg["delay_step"]))
    delays = np.arange(-n, n + 1) * cfg["delay_step"]
    res = heralded_g2(h, a1, a2, cfg["coincidence_window"], delays)
    write_json(cfg["output"], res.to_dict())
    _say({"g2_zero": res.g2_zero, "sigma_zero": res.sigma_zero, "n_herald": res.n_herald})


HANDLERS = {
    "simulate-spectrum": cmd_simulate_spectrum,
    "sweep-detuning": cmd_sweep_detuning,
    "fit-spectrum": cmd_fit_spectrum,
    "predict-lifetime": cmd_predict_lifetime,
    "simulate-pairs": cmd_simulate_pairs,
    "analyze": cmd_analyze,
    "franson": cmd_franson,
    "g2": cmd_g2,
}


def _fail(kind, exc, code):
    msg = " ".join(str(exc).split()) or type(exc).__name__
    print(f"ptring: error: {kind}: {msg}", file=sys.stderr)
    return code


def main(argv=None):
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        cfg = _merge(ns.command, ns)
        HANDLERS[ns.command](cfg)
    except UsageError as exc:
        return _fail("usage", exc, 2)
    except NUMERICAL as exc:
        return _fail("numerical", exc, 3)
    except (ValueError, TypeError, OSError) as exc:
        return _fail("input", exc, 2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
