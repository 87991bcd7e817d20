import json
import re
import subprocess
import sys

import numpy as np
import pytest

from ptring import SystemParams
from ptring.cli import COMMANDS, main
from ptring.io import read_spectrum_csv, read_timestamps_csv

DEVICE = SystemParams.device(0.0)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def last_json(out):
    return json.loads(out.strip().splitlines()[-1])


class TestContract:
    @pytest.mark.parametrize("command", list(COMMANDS))
    def test_help_lists_every_flag(self, capsys, command):
        with pytest.raises(SystemExit) as exc:
            main([command, "--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for opt in COMMANDS[command]["options"]:
            assert "--" + opt[0].replace("_", "-") in out
        assert "--config" in out

    def test_unknown_flag(self, capsys):
        code, _, err = run(capsys, "predict-lifetime", "--gama1", "1e9")
        assert code == 2
        assert err.startswith("ptring: error: usage:") and err.count("\n") == 1

    def test_unknown_command(self, capsys):
        assert run(capsys, "fly")[0] == 2

    def test_validation_exit_2(self, capsys, tmp_path):
        code, _, err = run(capsys, "simulate-pairs", "--eff-signal", "1.5",
                           "--output-signal", tmp_path / "s.csv",
                           "--output-idler", tmp_path / "i.csv")
        assert code == 2 and "input" in err
        assert list(tmp_path.iterdir()) == []

    def test_missing_required(self, capsys):
        code, _, err = run(capsys, "simulate-spectrum")
        assert code == 2 and "--output" in err

    def test_console_script(self, tmp_path):
        res = subprocess.run([sys.executable, "-m", "ptring.cli", "predict-lifetime"],
                             capture_output=True, text=True, check=False)
        assert res.returncode == 0
        assert json.loads(res.stdout)["high_q"] == pytest.approx(1 / 6e9)


class TestConfig:
    def test_file_and_flag_precedence(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"gamma1": 1e9, "gamma-c": 2e11}))
        _, out, _ = run(capsys, "predict-lifetime", "--config", cfg)
        d = last_json(out)
        assert d["high_q"] == pytest.approx(5e-10) and d["low_q"] == pytest.approx(5e-12)
        _, out, _ = run(capsys, "predict-lifetime", "--config", cfg, "--gamma1", "2e9")
        assert last_json(out)["high_q"] == pytest.approx(2.5e-10)
        assert last_json(out)["low_q"] == pytest.approx(5e-12)

    @pytest.mark.parametrize("body", ['{"nope": 1}', "[1, 2]", "{bad json", '{"gamma1": "x"}'])
    def test_bad_config(self, capsys, tmp_path, body):
        cfg = tmp_path / "c.json"
        cfg.write_text(body)
        assert run(capsys, "predict-lifetime", "--config", cfg)[0] == 2

    def test_missing_config_file(self, capsys, tmp_path):
        assert run(capsys, "predict-lifetime", "--config", tmp_path / "none.json")[0] == 2


class TestSpectrumCommands:
    def test_two_point_grid(self, capsys, tmp_path):
        out = tmp_path / "s.csv"
        code, _, _ = run(capsys, "simulate-spectrum", "--points", 2, "--output", out)
        assert code == 0
        assert len(out.read_text().splitlines()) == 3

    def test_uncoupled_bus(self, capsys, tmp_path):
        out = tmp_path / "s.csv"
        run(capsys, "simulate-spectrum", "--gamma-c", 0, "--points", 101, "--output", out)
        assert np.all(read_spectrum_csv(out).values == 1.0)

    def test_single_dos_and_json(self, capsys, tmp_path):
        out = tmp_path / "d.json"
        code, _, _ = run(capsys, "simulate-spectrum", "--mode", "single", "--kind", "dos",
                         "--format", "json", "--omega1", 0, "--start", -2e11, "--stop", 2e11,
                         "--points", 51, "--output", out)
        assert code == 0
        d = json.loads(out.read_text())
        from ptring import dos_spectrum
        expect = dos_spectrum(DEVICE, np.linspace(-2e11, 2e11, 51)).values
        assert d["dos"] == expect.tolist()
        code, _, _ = run(capsys, "simulate-spectrum", "--kind", "dos", "--output", out)
        assert code == 2

    def test_alternating_comb(self, capsys, tmp_path):
        out = tmp_path / "s.csv"
        run(capsys, "simulate-spectrum", "--output", out)
        from ptring import comb_q_factors
        q = np.array([r.q_factor for r in comb_q_factors(read_spectrum_csv(out), 0.1)])
        assert q.size == 7
        assert np.all(q[1::2].max() < q[::2].min())

    def test_sweep_detuning(self, capsys, tmp_path):
        code, out, _ = run(capsys, "sweep-detuning", "--detuning-points", 5,
                           "--probe-points", 401, "--output-dir", tmp_path)
        assert code == 0 and len(last_json(out)["outputs"]) == 2
        for name in ("dos_map_ep.csv", "dos_map_splitting.csv"):
            rows = np.loadtxt(tmp_path / name, delimiter=",", skiprows=1)
            maps = rows[:, 5:]
            # equal intrinsic losses make +/- detuning rows mirror images
            assert np.allclose(maps[0], maps[-1][::-1], atol=1e-12)
        ep = np.loadtxt(tmp_path / "dos_map_ep.csv", delimiter=",", skiprows=1)[2, 5:]
        split = np.loadtxt(tmp_path / "dos_map_splitting.csv", delimiter=",", skiprows=1)[2, 5:]
        probe = np.linspace(-4e11, 4e11, 401)

        def peaks(row):
            i = np.flatnonzero((row[1:-1] > row[:-2]) & (row[1:-1] > row[2:])) + 1
            return probe[i[row[i] > 0.5 * row.max()]]

        assert len(peaks(ep)) == 1
        pk = peaks(split)
        assert len(pk) == 2 and pk[1] - pk[0] == pytest.approx(2 * DEVICE.kappa, rel=0.02)

    def test_fit_round_trip(self, capsys, tmp_path):
        spec = tmp_path / "s.csv"
        res = tmp_path / "fit.json"
        run(capsys, "simulate-spectrum", "--points", 4001, "--output", spec)
        code, out, _ = run(capsys, "fit-spectrum", "--input", spec, "--output", res,
                           "--gamma1", 3.6e9, "--gamma2", 2.4e9, "--gamma-c", 120e9,
                           "--kappa", 55e9)
        assert code == 0
        fit = json.loads(res.read_text())
        for k in ("gamma1", "gamma2", "gamma_c", "kappa"):
            assert fit["params"][k] == pytest.approx(getattr(DEVICE, k), rel=0.02)
        printed = dict(kv.split("=") for kv in out.split())
        assert float(printed["tau_high_q_ps"]) == pytest.approx(166.7, abs=0.5)
        assert float(printed["tau_low_q_ps"]) == pytest.approx(6.81, abs=0.05)
        assert len(fit["resonances"]) == 7

    def test_fit_malformed_input(self, capsys, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("freq_hz,transmission\n1,x\n")
        res = tmp_path / "fit.json"
        code, _, err = run(capsys, "fit-spectrum", "--input", bad, "--output", res)
        assert code == 2 and not res.exists()
        assert len(err.splitlines()) == 1

    def test_fit_nonconvergence(self, capsys, tmp_path):
        spec = tmp_path / "s.csv"
        res = tmp_path / "fit.json"
        run(capsys, "simulate-spectrum", "--points", 2001, "--output", spec)
        code, _, err = run(capsys, "fit-spectrum", "--input", spec, "--output", res,
                           "--gamma1", 4e9, "--max-iter", 2)
        assert code == 3 and "numerical" in err and not res.exists()


@pytest.fixture(scope="module")
def lifetimes(tmp_path_factory):
    d = tmp_path_factory.mktemp("pairs")
    taus = {}
    for tag, tau in (("high", 156.4e-12), ("low", 4.1e-12)):
        s, i, res = d / f"{tag}_s.csv", d / f"{tag}_i.csv", d / f"{tag}.json"
        assert main(["simulate-pairs", "--pgr-coefficient", str(1e6 / 0.81),
                     "--tau-signal", str(tau), "--tau-idler", str(tau),
                     "--output-signal", str(s), "--output-idler", str(i)]) == 0
        assert main(["analyze", "--signal", str(s), "--idler", str(i),
                     "--output", str(res)]) == 0
        taus[tag] = json.loads(res.read_text())
    return d, taus


class TestPairCommands:
    def test_predict_lifetime(self, capsys):
        code, out, _ = run(capsys, "predict-lifetime")
        d = last_json(out)
        assert code == 0
        assert d["high_q"] * 1e12 == pytest.approx(166.67, abs=0.01)
        assert d["low_q"] * 1e12 == pytest.approx(6.81, abs=0.01)
        assert d["contrast"] == pytest.approx(24.47, abs=0.01)

    def test_simulate_pairs_deterministic(self, capsys, tmp_path):
        outs = []
        for k in range(2):
            s, i = tmp_path / f"s{k}.csv", tmp_path / f"i{k}.csv"
            code, out, _ = run(capsys, "simulate-pairs", "--duration", 0.1,
                               "--output-signal", s, "--output-idler", i)
            assert code == 0
            outs.append((s.read_bytes(), i.read_bytes()))
        assert outs[0] == outs[1]
        info = last_json(out)
        assert info["pair_rate"] == 1e4
        n = len(read_timestamps_csv(tmp_path / "s0.csv")["signal"])
        expect = 1e3 * 0.9 + 3
        assert abs(n - expect) < 5 * np.sqrt(expect)

    def test_zero_efficiency(self, capsys, tmp_path):
        s, i = tmp_path / "s.csv", tmp_path / "i.csv"
        run(capsys, "simulate-pairs", "--eff-signal", 0, "--eff-idler", 0, "--dark-signal", 0,
            "--dark-idler", 0, "--output-signal", s, "--output-idler", i)
        assert s.read_text() == i.read_text() == "channel,time_ps\n"

    def test_analyze_high(self, lifetimes):
        d, taus = lifetimes
        r = taus["high"]
        assert r["tau"] * 1e12 == pytest.approx(156.4, rel=0.05)
        assert r["tau_1e"] * 1e12 == pytest.approx(239.4, rel=0.05)
        assert r["car"] > 1 and r["car_sigma"] > 0
        hist = json.loads(open(r["histogram"]).read())
        assert hist["bin_width_ps"] == 10 and len(hist["counts"]) == 1001

    def test_analyze_low(self, lifetimes):
        assert abs(lifetimes[1]["low"]["tau"] * 1e12 - 4.1) < 3.0

    def test_analyze_no_peak(self, capsys, tmp_path):
        s, i, res = tmp_path / "s.csv", tmp_path / "i.csv", tmp_path / "r.json"
        run(capsys, "simulate-pairs", "--pgr-coefficient", 0, "--dark-signal", 1e4,
            "--dark-idler", 1e4, "--duration", 0.2, "--output-signal", s, "--output-idler", i)
        code, _, err = run(capsys, "analyze", "--signal", s, "--idler", i, "--output", res)
        assert code == 3 and "numerical" in err
        assert not res.exists() and not (tmp_path / "r.histogram.json").exists()

    @pytest.mark.parametrize("v,expect", [(0.871, True), (0.6, False)])
    def test_franson(self, capsys, tmp_path, v, expect):
        out = tmp_path / "f.json"
        code, text, _ = run(capsys, "franson", "--visibility-true", v, "--output", out)
        assert code == 0
        d = json.loads(out.read_text())
        assert d["bell_violation"] is expect
        assert abs(d["visibility"] - v) < 3 * d["sigma"]
        first = out.read_bytes()
        run(capsys, "franson", "--visibility-true", v, "--output", out)
        assert out.read_bytes() == first

    def test_g2(self, capsys, tmp_path):
        out = tmp_path / "g.json"
        code, text, _ = run(capsys, "g2", "--n-windows", 1_000_000, "--delay-max", 5e-9,
                            "--output", out)
        assert code == 0
        d = json.loads(out.read_text())
        assert d["g2_zero"] < 0.1
        assert len(d["delays_ps"]) == 11 and d["delays_ps"][5] == 0.0
        assert re.search(r'"g2_zero"', text)
