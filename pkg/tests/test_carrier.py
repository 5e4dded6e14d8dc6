import math

import numpy as np
import pytest
from scipy import signal

from bsrdaa import carrier
from bsrdaa.carrier import CarrierConfig, DelayLineBank, design_bpf, tone
from bsrdaa.channel import random_channel
from bsrdaa.control import ControllerParams
from bsrdaa.errors import BudgetError, ConfigError, DimensionError, NyquistError
from bsrdaa.loop import LoopParams
from bsrdaa.trajectory import Static

pytestmark = pytest.mark.carrier
CFG = CarrierConfig()


def test_sample_rate_is_twenty_per_period():
    assert CFG.fs == pytest.approx(48e9)
    assert CFG.samples_per_period == pytest.approx(20.0)
    assert carrier._lo_period(CFG) == 100


def test_bpf_center_and_edges():
    for fc in (0.4 * CFG.f0, CFG.f0):
        b, a = design_bpf(fc, 10.0, CFG.fs)
        _, h = signal.freqz(b, a, worN=[fc, fc * (1 - 1 / 20), fc * (1 + 1 / 20), 0.0], fs=CFG.fs)
        db = 20 * np.log10(np.abs(h[:3]))
        assert db[0] == pytest.approx(0.0, abs=1e-9)
        assert np.angle(h[0]) == pytest.approx(0.0, abs=1e-9)
        # half-power edges at fc (1 +- 1/(2Q)), up to bilinear warping
        np.testing.assert_allclose(db[1:], -3.01, atol=0.3)
        assert abs(h[3]) < 1e-9


def test_bpf_rejects_mixer_images():
    b, a = design_bpf(0.4 * CFG.f0, 10.0, CFG.fs)
    _, h = signal.freqz(b, a, worN=[2.4 * CFG.f0], fs=CFG.fs)
    assert 20 * np.log10(abs(h[0])) < -30
    b, a = design_bpf(CFG.f0, 10.0, CFG.fs)
    _, h = signal.freqz(b, a, worN=[0.2 * CFG.f0], fs=CFG.fs)
    assert 20 * np.log10(abs(h[0])) < -30


def test_bpf_nyquist_guard():
    with pytest.raises(NyquistError):
        design_bpf(30e9, 10.0, 48e9)


def test_avg_power_two_tones():
    n = 40000
    x = tone(CFG, 2.0, n) + tone(CFG, 1.0j, n, freq=0.6 * CFG.f0)
    p = carrier.avg_power(x, 10000, z0=50.0)
    assert p[-1] == pytest.approx((4.0 + 1.0) / 50.0, rel=0.01)
    assert p[0] == pytest.approx(x[0] ** 2 / 50.0)
    with pytest.raises(ValueError):
        carrier.avg_power(x, 0)


def test_tone_demodulate_round_trip():
    v = np.array([1 + 2j, -0.5j])
    x = tone(CFG, v, 2000, k0=37)
    np.testing.assert_allclose(carrier.demodulate(CFG, x, k0=37), v, atol=1e-12)


@pytest.mark.parametrize("deg", range(0, 360, 30))
def test_conjugator_negates_phase(deg):
    n = 60000
    x = tone(CFG, np.exp(1j * math.radians(deg)), n)
    y = carrier.conjugate(CFG, x)
    v = carrier.demodulate(CFG, y[-20000:], k0=n - 20000)
    assert abs(v) == pytest.approx(1.0, rel=0.05)
    err = math.degrees(np.angle(v * np.exp(1j * math.radians(deg))))
    assert abs(err) < 1.0


def test_conjugator_stage_spectra():
    n = 2 ** 18
    x = tone(CFG, 1.0, n)[None, :]
    s1, s2 = carrier.Conjugator(CFG, 1).stage_outputs(x)
    # the second half is steady state; its spectral peak must sit on the band centre
    for s, fc in ((s1[0], 0.4 * CFG.f0), (s2[0], CFG.f0)):
        seg = s[n // 2:]
        sp = np.abs(np.fft.rfft(seg * signal.windows.hann(len(seg))))
        fr = np.fft.rfftfreq(len(seg), CFG.sample_period)
        assert fr[np.argmax(sp)] == pytest.approx(fc, abs=2 * fr[1])


def test_delay_line_matches_channel():
    rng = np.random.default_rng(1)
    ch = random_channel(4, 3, rng)
    bank = DelayLineBank.from_channel(ch, CFG)
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    y = carrier.port_synthesis(bank, tone(CFG, v, 4000))
    out = carrier.demodulate(CFG, y[:, -2000:], k0=2000)
    ref = ch.s21.T @ v
    np.testing.assert_allclose(np.abs(out) / np.abs(ref), 1.0, atol=1e-10)
    np.testing.assert_allclose(np.angle(out / ref), 0.0, atol=1e-10)
    u = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    back = carrier.port_synthesis(bank, tone(CFG, u, 4000), reverse=True)
    np.testing.assert_allclose(carrier.demodulate(CFG, back[:, -2000:], k0=2000), ch.s21 @ u,
                               rtol=1e-9, atol=1e-12)
    assert bank.min_delay >= 2 * 20
    with pytest.raises(DimensionError):
        carrier.port_synthesis(bank, np.zeros((3, 10)))


def test_fractional_weight_gives_exact_phase():
    theta = 2 * math.pi / 20
    for psi in np.linspace(0, theta * 0.999, 9):
        a = carrier._frac_for_phase(psi, theta)
        h = (1 - a) + a * np.exp(-1j * theta)
        assert -np.angle(h) == pytest.approx(psi, abs=1e-12)
        assert 0.0 <= a < 1.0


def test_loop_latency_measurement():
    ch = Static().sample(0.0)
    measured = carrier.measure_loop_latency(CFG, ch)
    analytic = carrier.analytic_loop_latency(CFG, ch)
    assert measured == pytest.approx(analytic, rel=0.01)


def test_config_validation():
    with pytest.raises(ConfigError):
        CarrierConfig(sample_period=1 / (10 * 2.4e9))
    with pytest.raises(ConfigError):
        CarrierConfig(lo1_ratio=1.5, lo2_ratio=0.6)
    with pytest.raises(ConfigError):
        CarrierConfig.from_dict({"bogus": 1})
    assert CarrierConfig.from_dict({"mixer_amplitudes": [2, 2]}).mixer_amplitudes == (2, 2)


def test_sample_budget():
    cfg = CarrierConfig(max_samples=1000)
    with pytest.raises(BudgetError):
        carrier.run_carrier_loop(cfg, Static(), LoopParams(), ControllerParams(), 1e-6)


def test_raw_dump_layout(tmp_path):
    path = tmp_path / "rx.f64"
    tr = carrier.run_carrier_loop(CFG, Static(), LoopParams(), ControllerParams(k_i=1e7),
                                  0.5e-6, rng=0, dump_path=path)
    data = np.fromfile(path, dtype="<f8")
    assert data.size == 24000 * 4
    assert len(tr) >= 1
    assert tr.meta["loop_time_s"] == pytest.approx(560 * CFG.sample_period)
    tr.validate()
