import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bsrdaa import loop
from bsrdaa.channel import ChannelSnapshot, eig_analysis, random_channel
from bsrdaa.errors import (
    DegenerateRegressionError,
    DimensionError,
    DivergenceError,
    InsufficientDataError,
)
from bsrdaa.loop import LoopParams, LoopState


def cvec(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 5), m=st.integers(1, 5))
def test_step_composes_to_gram_map(seed, n, m):
    rng = np.random.default_rng(seed)
    ch = random_channel(n, m, rng)
    p = LoopParams(gain_g=3.0 * np.exp(0.4j), loss_l=0.7 * np.exp(-1.1j), rx_saturation_w=None)
    v = cvec(rng, m)
    nxt = loop.step(LoopState.initial(v, n), ch, p)
    s = ch.s21
    expected = np.conj(p.loss_l) * p.gain_g * (s.conj().T @ s) @ v
    np.testing.assert_allclose(nxt.v1f, expected, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(nxt.v2f, np.conj(p.gain_g * s @ v), rtol=1e-13)
    assert nxt.k == 1
    assert nxt.t == pytest.approx(p.loop_time_s)


def test_zero_input_oracle_matches_engine():
    rng = np.random.default_rng(11)
    ch = random_channel(4, 4, rng)
    p = LoopParams(gain_g=1.4, rx_saturation_w=None)
    v0 = cvec(rng, 4)
    states = loop.run_loop(ch, p, v0, 50)
    for k in (0, 1, 7, 50):
        ref = loop.zero_input_oracle(ch, p, v0, k)
        np.testing.assert_allclose(states[k].v1f, ref, rtol=1e-9,
                                   atol=1e-9 * np.linalg.norm(ref))
    with pytest.raises(ValueError):
        loop.zero_input_oracle(ch, p, v0, -1)


def test_power_recursion_on_principal_mode():
    ch = random_channel(4, 4, np.random.default_rng(2))
    ea = eig_analysis(ch)
    lg = 0.9 / ea.xi_max
    p = LoopParams(gain_g=lg, rx_saturation_w=None)
    states = loop.run_loop(ch, p, ea.b_max * 1e-3, 12)
    p1 = loop.power_out(states[1], ch, p).power_w
    for k in range(1, 13):
        got = loop.power_out(states[k], ch, p).power_w
        assert got == pytest.approx(loop.power_recursion_oracle(p1, ea.xi_max, lg, k - 1), rel=1e-9)


def test_power_recursion_db_example():
    # r + g = 2 dB per circulation lifts -140 dBW to -120 dBW in ten steps
    assert loop.power_recursion_db(-140.0, 2.0, 10) == pytest.approx(-120.0)
    assert loop.power_recursion_oracle(1.0, 0.5, 2.0, 10) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        loop.power_recursion_oracle(-1.0, 0.5, 1.0, 1)


def test_power_out_zero_excitation_undefined():
    ch = random_channel(2, 2, np.random.default_rng(0))
    r = loop.power_out(LoopState.initial(np.ones(2), 2), ch, LoopParams())
    assert r == (0.0, 0.0, False)


def test_stability_classes():
    ch = ChannelSnapshot(np.diag([0.5, 0.2]).astype(complex))
    ea = eig_analysis(ch)
    assert loop.classify_stability(LoopParams(gain_g=4.0), ea) == "marginal"
    assert loop.classify_stability(LoopParams(gain_g=3.0), ea) == "stable"
    assert loop.classify_stability(LoopParams(gain_g=5.0), ea) == "unstable"
    assert loop.marginal_loop_gain(0.25) == 4.0


def test_attenuator_bounds_for_40_db_amplifier():
    lo, hi = loop.attenuator_xi_bounds(40.0, -35.0, -3.0)
    assert lo == pytest.approx(0.014125, rel=1e-4)
    assert hi == pytest.approx(0.562341, rel=1e-5)


def test_unstable_loop_raises_divergence():
    ch = ChannelSnapshot(np.diag([0.5, 0.2]).astype(complex))
    p = LoopParams(gain_g=40.0, rx_saturation_w=None)
    with pytest.raises(DivergenceError):
        loop.run_loop(ch, p, np.ones(2), 400)


def test_receiver_clip_limits_amplitude():
    ch = ChannelSnapshot(np.diag([0.5, 0.5]).astype(complex))
    p = LoopParams(rx_saturation_w=1.0)
    v1b = loop.received(np.array([1e3, 1.0]), ch, p)
    assert abs(v1b[0]) == pytest.approx(np.sqrt(50.0))
    assert v1b[1] == pytest.approx(0.5)


def test_dimension_checks():
    ch = random_channel(3, 2, np.random.default_rng(0))
    with pytest.raises(DimensionError):
        loop.step(LoopState.initial(np.ones(3), 3), ch, LoopParams())
    with pytest.raises(DimensionError):
        loop.step(LoopState.initial(np.ones(2), 3), ch, LoopParams(), u=np.ones(3))


def test_noise_power_per_port():
    p = LoopParams(noise_power_dbw=-140.0)
    u = loop.noise_sample(p, 200000, np.random.default_rng(1))
    assert np.mean(np.abs(u) ** 2) / p.z0 == pytest.approx(1e-14, rel=0.02)


def test_loop_param_validation():
    with pytest.raises(ValueError):
        LoopParams(loss_l=1.5)
    with pytest.raises(ValueError):
        LoopParams(z0=0.0)
    p = LoopParams(gain_g=-20.0, loss_l=0.5).with_loop_gain(3.0)
    assert p.loop_gain == pytest.approx(3.0)
    assert np.angle(p.gain_g) == pytest.approx(np.pi)


def test_bisection_matches_eigenvalue():
    for seed in range(5):
        ch = random_channel(4, 4, np.random.default_rng(seed))
        xi = eig_analysis(ch).xi_max
        assert loop.spectral_radius(ch, 2.0) == pytest.approx(2.0 * xi, rel=1e-12)
        assert loop.bisect_marginal_gain(ch) == pytest.approx(1.0 / xi, rel=1e-11)


def test_regression_preconditions():
    with pytest.raises(InsufficientDataError):
        loop.marginal_regression(n_channels=5)
    ch = random_channel(4, 4, np.random.default_rng(0))
    with pytest.raises(DegenerateRegressionError):
        loop.marginal_regression(channels=[ch] * 10)


def test_gain_sweep_peaks_at_marginal():
    rng = np.random.default_rng(4)
    ch = random_channel(4, 4, rng)
    xi = eig_analysis(ch).xi_max
    marg = -20 * np.log10(xi)
    sw = loop.gain_sweep(ch, LoopParams(), marg + np.arange(-6.0, 6.01, 0.5),
                         steps_per_point=1500, rng=rng)
    assert sw.marginal_db == pytest.approx(marg)
    assert abs(sw.peak_db - marg) <= 0.5
    assert np.max(sw.efficiency) == pytest.approx(xi, rel=0.02)
    # deep below marginal the loop holds mostly noise
    assert sw.efficiency[0] < np.max(sw.efficiency)
    assert sw.noise_baseline < np.max(sw.efficiency)


def test_convergence_to_principal_mode():
    rng = np.random.default_rng(9)
    ch = random_channel(4, 4, rng)
    ea = eig_analysis(ch)
    p = LoopParams(gain_g=1.0 / ea.xi_max, rx_saturation_w=None)
    states = loop.run_loop(ch, p, cvec(rng, 4), 400)
    last = states[-1]
    reading = loop.power_out(last, ch, p)
    assert reading.efficiency == pytest.approx(ea.xi_max, abs=1e-9)
    from bsrdaa.channel import alignment

    assert alignment(ea, last.v2f) > 1 - 1e-9
    # with conjugate feedback the pilot state is stationary at marginal gain
    np.testing.assert_allclose(np.abs(last.v1f), np.abs(states[-2].v1f), rtol=1e-8)
