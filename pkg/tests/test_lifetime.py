import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import GHZ, PS
from ptring import (
    InfiniteLifetimeError,
    JitterDominatedError,
    LifetimeEstimate,
    SystemParams,
    convolve_jitter,
    deconvolve_jitter,
    lifetime_contrast,
    predict_lifetimes,
    tau_exact,
    tau_high_q,
    tau_low_q,
)
from strategies import system_params

J1, J2 = 74.5 * PS, 53.5 * PS
time = st.floats(min_value=0.0, max_value=1e-8, allow_nan=False)
pos_time = st.floats(min_value=1e-15, max_value=1e-8, allow_nan=False)


class TestRateFormulas:
    def test_high_q(self, device):
        assert tau_high_q(device) / PS == pytest.approx(166.667, abs=1e-3)
        # the printed 167.7 ps comes from an unrounded rate
        assert abs(tau_high_q(device) / PS - 167.7) < 2.0
        assert tau_high_q(SystemParams(0.0, gamma1=0.5e9)) == pytest.approx(1e-9)

    def test_low_q(self, device):
        assert tau_low_q(device) / PS == pytest.approx(6.812, abs=1e-3)
        assert tau_low_q(SystemParams(0.0, gamma_c=100 * GHZ)) == pytest.approx(10 * PS)
        assert tau_low_q(SystemParams(0.0, gamma_c=1e12)) == pytest.approx(1 * PS)

    @given(st.floats(1e6, 1e13))
    def test_doubling_halves(self, g):
        a = tau_high_q(SystemParams(0.0, gamma1=g))
        b = tau_high_q(SystemParams(0.0, gamma1=2 * g))
        assert b == pytest.approx(a / 2, rel=1e-15)

    def test_zero_rates(self):
        with pytest.raises(ZeroDivisionError):
            tau_high_q(SystemParams(0.0))
        with pytest.raises(ZeroDivisionError):
            tau_low_q(SystemParams(0.0))
        with pytest.raises(ZeroDivisionError):
            lifetime_contrast(SystemParams(0.0, gamma_c=1e9))

    def test_contrast(self, device):
        assert lifetime_contrast(device) == pytest.approx(24.4667, rel=1e-4)
        assert lifetime_contrast(SystemParams(0.0, gamma1=2e9, gamma_c=4e9)) == 1.0

    @given(system_params(lossy=True))
    def test_contrast_identity(self, p):
        assert lifetime_contrast(p) == pytest.approx(tau_high_q(p) / tau_low_q(p), rel=1e-12)


class TestExact:
    def test_decoupled(self):
        p = SystemParams(0.0, delta_omega=5e10, gamma1=3e9, gamma2=2e9, gamma_c=7e9)
        assert sorted(tau_exact(p)) == pytest.approx(sorted([1 / 3e9, 1 / 9e9]), rel=1e-12)

    def test_device_aligned(self, device):
        tp, tm = tau_exact(device)
        assert tp == pytest.approx(tm, rel=1e-12)
        assert tp / PS == pytest.approx(1 / (2 * 38.2e9) / PS, rel=1e-9)
        assert tp / PS == pytest.approx(13.09, abs=0.01)

    def test_ep_degenerate(self):
        p = SystemParams(0.0, gamma1=3e9, gamma2=3e9, gamma_c=146.8e9, kappa=146.8e9 / 4)
        tp, tm = tau_exact(p)
        assert tp == pytest.approx(tm, rel=1e-6)

    def test_lossless_branch(self):
        with pytest.raises(InfiniteLifetimeError):
            tau_exact(SystemParams(0.0, delta_omega=1e10, gamma2=1e9))

    @given(system_params(lossy=True))
    def test_branches_bracketed(self, p):
        # decay of each branch lies between the two bare decays when coupled
        tp, tm = tau_exact(p)
        lo = 1 / max(p.gamma1, p.gamma2 + p.gamma_c)
        hi = 1 / min(p.gamma1, p.gamma2 + p.gamma_c)
        for t in (tp, tm):
            assert lo * (1 - 1e-9) <= t <= hi * (1 + 1e-9)

    def test_predict_lifetimes(self, device):
        d = predict_lifetimes(device)
        assert set(d) == {"high_q", "low_q", "exact_plus", "exact_minus", "contrast"}
        assert d["contrast"] == lifetime_contrast(device)


class TestJitter:
    def test_forward_examples(self):
        assert convolve_jitter(156.4 * PS, J1, J2) / PS == pytest.approx(239.4, abs=0.1)
        assert convolve_jitter(4.1 * PS, J1, J2) / PS == pytest.approx(91.9, abs=0.1)
        assert convolve_jitter(3.0, 0.0, 0.0) == pytest.approx(3.0 * np.sqrt(2))

    def test_inverse_examples(self):
        high = deconvolve_jitter(239.4 * PS, J1, J2)
        low = deconvolve_jitter(91.9 * PS, J1, J2)
        assert high / PS == pytest.approx(156.4, abs=0.1)
        assert low / PS == pytest.approx(4.1, abs=0.1)
        assert 37 <= high / low <= 39

    @given(time, time, time)
    def test_round_trip(self, tau, j1, j2):
        j = np.hypot(j1, j2)
        back = deconvolve_jitter(convolve_jitter(tau, j1, j2), j1, j2)
        if tau == 0:
            assert back <= 1e-7 * j
        else:
            # squaring and subtracting loses digits once jitter dwarfs tau
            assume(tau >= 1e-3 * j)
            assert back == pytest.approx(tau, rel=1e-9)

    @given(pos_time, time, time, st.integers(0, 2), st.floats(1.001, 10))
    def test_monotone(self, tau, j1, j2, which, factor):
        args = [tau, j1, j2]
        # an argument below ~1e-8 of the largest vanishes when squared and summed
        assume(args[which] > 1e-6 * max(args))
        bigger = list(args)
        bigger[which] *= factor
        assert convolve_jitter(*bigger) > convolve_jitter(*args)

    def test_jitter_dominated(self):
        with pytest.raises(JitterDominatedError):
            deconvolve_jitter(80 * PS, J1, J2)
        assert deconvolve_jitter(5.0, 3.0, 4.0) == 0.0

    def test_negative_inputs(self):
        with pytest.raises(ValueError):
            convolve_jitter(-1.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            deconvolve_jitter(1.0, -1.0, 0.0)

    def test_estimate(self):
        est = LifetimeEstimate.from_width(239.4 * PS, J1, J2)
        assert est.tau / PS == pytest.approx(156.4, abs=0.1)
        assert est.to_dict()["tau_1e"] == 239.4 * PS
        with pytest.raises(ValueError):
            LifetimeEstimate(1.0, 0.0, 0.0, -1.0)
        with pytest.raises(JitterDominatedError):
            LifetimeEstimate.from_width(10 * PS, J1, J2)
