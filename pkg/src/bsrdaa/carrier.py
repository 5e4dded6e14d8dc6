"""Sample-level carrier simulation of the retrodirective loop.

Every port carries a real carrier waveform.  Paths are fractional delay
lines, phase conjugation is a two-stage superheterodyne (mix, band-pass,
mix, band-pass), and power is estimated by moving averages of x^2 / Z0.

A phasor V (power |V|^2 / Z0) corresponds to the waveform
sqrt(2) Re(V exp(j w0 t)).

The closed loop is simulated in blocks no longer than the shortest path
delay, so each block only needs samples that already exist.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, fields, replace

import numpy as np
from scipy import signal

from . import control, loop
from ._validation import as_rng
from .channel import alignment, eig_analysis, efficiency
from .errors import BudgetError, ConfigError, DimensionError, NyquistError
from .trace import SimulationTrace


@dataclass(frozen=True)
class CarrierConfig:
    f0: float = 2.4e9
    # 20 samples per carrier period; keeps both LO plans periodic in 100 samples
    sample_period: float = 1.0 / (20 * 2.4e9)
    lo1_ratio: float = 1.4
    lo2_ratio: float = 0.6
    mixer_amplitudes: tuple = (2.0, 2.0)
    lo_phases: tuple = (0.0, 0.0)
    bpf_order: int = 2
    bpf_q: float = 10.0
    avg_window_samples: int = 10000
    bulk_delay_periods: int = 2
    block_samples: int = 20
    max_samples: int = 20_000_000

    def __post_init__(self):
        if not self.f0 > 0:
            raise ConfigError("f0 must be positive", path="carrier.f0")
        if self.sample_period > 1.0 / (20 * self.f0) * (1 + 1e-12):
            raise ConfigError("need at least 20 samples per carrier period",
                              path="carrier.sample_period")
        if not self.lo1_ratio > 1 > self.lo2_ratio > 0:
            raise ConfigError("need lo1_ratio > 1 > lo2_ratio > 0", path="carrier.lo1_ratio")
        if abs((self.lo1_ratio - 1) + self.lo2_ratio - 1) > 1e-12:
            raise ConfigError("(lo1_ratio - 1) + lo2_ratio must equal 1", path="carrier.lo2_ratio")
        if self.bpf_order != 2:
            raise ConfigError("only second-order band-pass sections are implemented",
                              path="carrier.bpf_order")
        if self.avg_window_samples < 1:
            raise ConfigError("avg_window_samples must be >= 1", path="carrier.avg_window_samples")
        if self.bulk_delay_periods < 1:
            raise ConfigError("bulk_delay_periods must be >= 1", path="carrier.bulk_delay_periods")
        if self.block_samples < 1:
            raise ConfigError("block_samples must be >= 1", path="carrier.block_samples")

    @property
    def fs(self):
        return 1.0 / self.sample_period

    @property
    def samples_per_period(self):
        return self.fs / self.f0

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        extra = set(d) - names
        if extra:
            raise ConfigError(f"unknown carrier fields {sorted(extra)}", path="carrier")
        d = dict(d)
        for key in ("mixer_amplitudes", "lo_phases"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


# ---------------------------------------------------------------- filters


def design_bpf(center_hz, q, fs):
    """Second-order resonator (bandwidth center/q), bilinear with prewarp at center.

    Returns ``(b, a)``; the response at ``center_hz`` is exactly 1.
    """
    if not 0 < center_hz < fs / 2:
        raise NyquistError(f"center {center_hz:.4g} Hz is not below fs/2 = {fs / 2:.4g} Hz")
    if not q > 0:
        raise ValueError("q must be positive")
    w0 = 2 * fs * math.tan(math.pi * center_hz / fs)
    b, a = signal.bilinear([w0 / q, 0.0], [1.0, w0 / q, w0 * w0], fs=fs)
    return b, a


def group_delay_at_center(center_hz, q):
    """Envelope delay of the resonator at its center, 2 q / w0."""
    return 2 * q / (2 * math.pi * center_hz)


def avg_power(stream, window, z0=50.0):
    """Trailing moving average of x^2 / Z0 (shorter at the start)."""
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.asarray(stream, dtype=float)
    c = np.concatenate([[0.0], np.cumsum(x * x)])
    k = np.arange(1, len(x) + 1)
    lo = np.maximum(0, k - window)
    return (c[k] - c[lo]) / (k - lo) / z0


def tone(cfg, phasor, n_samples, k0=0, freq=None):
    """Waveform samples for ``phasor`` (scalar or per-port vector)."""
    f = cfg.f0 if freq is None else freq
    t = (k0 + np.arange(n_samples)) * cfg.sample_period
    ph = np.atleast_1d(np.asarray(phasor, dtype=complex))
    w = np.sqrt(2) * np.real(ph[:, None] * np.exp(2j * np.pi * f * t)[None, :])
    return w[0] if np.ndim(phasor) == 0 else w


def demodulate(cfg, x, k0=0):
    """Phasor of the f0 component of ``x`` (last axis), averaged over the record."""
    x = np.asarray(x, dtype=float)
    t = (k0 + np.arange(x.shape[-1])) * cfg.sample_period
    lo = np.exp(-2j * np.pi * cfg.f0 * t)
    return np.sqrt(2) * (x @ lo) / x.shape[-1]


# ---------------------------------------------------------------- delay lines


def _frac_for_phase(psi, theta):
    """Linear-interpolation weight whose phase lag at f0 equals ``psi`` (0 <= psi < theta)."""
    return math.sin(psi) / (math.sin(psi) + math.sin(theta - psi))


@dataclass(frozen=True)
class DelayLineBank:
    """Per-path delays and gains realizing a channel matrix at the carrier.

    Path (n, m) delays by ``int_delay[n, m] + frac[n, m]`` samples and scales
    by ``gain[n, m]``.  The gain folds in the interpolator's own magnitude at
    f0, and the fractional part is chosen so the phase at f0 is exact.
    """

    int_delay: np.ndarray
    frac: np.ndarray
    gain: np.ndarray
    amplitude: np.ndarray
    delay_s: np.ndarray

    @classmethod
    def from_channel(cls, ch, cfg):
        spp = cfg.samples_per_period
        if abs(spp - round(spp)) > 1e-9:
            raise ConfigError("sample rate must be an integer multiple of f0",
                              path="carrier.sample_period")
        spp = int(round(spp))
        theta = 2 * math.pi / spp
        s = ch.s21
        amp = np.abs(s)
        lag = np.mod(-np.angle(s), 2 * np.pi)  # phase lag in [0, 2 pi)
        lag_samples = lag / theta
        whole = np.floor(lag_samples).astype(int)
        psi = (lag_samples - whole) * theta
        frac = np.vectorize(lambda p: _frac_for_phase(p, theta))(psi)
        h = np.abs((1 - frac) + frac * np.exp(-1j * theta))
        int_delay = whole + cfg.bulk_delay_periods * spp
        delay_s = (int_delay + lag_samples - whole) * cfg.sample_period
        return cls(int_delay, frac, amp / h, amp, delay_s)

    @property
    def shape(self):
        return self.gain.shape

    @property
    def min_delay(self):
        return int(self.int_delay.min())

    @property
    def max_delay(self):
        return int(self.int_delay.max()) + 1

    def mean_delay_s(self):
        w = self.amplitude ** 2
        return float(np.sum(w * self.delay_s) / np.sum(w)) if w.sum() > 0 else 0.0


def port_synthesis(bank, inputs, reverse=False):
    """Apply the bank to full input records.

    Forward: ``inputs`` has N rows (generator ports), output has M rows.
    ``reverse=True`` runs the reciprocal direction (M in, N out).
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    n, m = bank.shape
    n_in = m if reverse else n
    if x.shape[0] != n_in:
        raise DimensionError(f"expected {n_in} input rows, got {x.shape[0]}")
    k = x.shape[1]
    pad = np.concatenate([np.zeros((n_in, bank.max_delay + 1)), x], axis=1)
    off = bank.max_delay + 1
    idx = np.arange(k)
    d = bank.int_delay.T if reverse else bank.int_delay
    fr = bank.frac.T if reverse else bank.frac
    g = bank.gain.T if reverse else bank.gain
    # rows of d/fr/g index the source; columns the destination
    n_src, n_dst = d.shape
    out = np.zeros((n_dst, k))
    for i in range(n_src):
        for j in range(n_dst):
            if g[i, j] == 0:
                continue
            base = off + idx - d[i, j]
            out[j] += g[i, j] * ((1 - fr[i, j]) * pad[i, base] + fr[i, j] * pad[i, base - 1])
    return out


class _RingBuffer:
    def __init__(self, ports, length):
        self.buf = np.zeros((ports, length))
        self.length = length

    def write(self, k0, block):
        idx = (k0 + np.arange(block.shape[1])) % self.length
        self.buf[:, idx] = block

    def gather(self, src, k):
        return self.buf[src, k % self.length]


class _PathBlock:
    """Block-wise evaluation of a bank in one direction from a ring buffer."""

    def __init__(self, bank, reverse):
        d = bank.int_delay.T if reverse else bank.int_delay
        self.set(bank, reverse)
        self.n_src, self.n_dst = d.shape

    def set(self, bank, reverse):
        self.d = (bank.int_delay.T if reverse else bank.int_delay)[:, :, None]
        fr = (bank.frac.T if reverse else bank.frac)[:, :, None]
        g = (bank.gain.T if reverse else bank.gain)[:, :, None]
        self.w0 = g * (1 - fr)
        self.w1 = g * fr
        self.src = np.arange(self.d.shape[0])[:, None, None]

    def apply(self, ring, k0, b):
        k = k0 + np.arange(b)[None, None, :] - self.d
        x0 = ring.gather(self.src, k)
        x1 = ring.gather(self.src, k - 1)
        return np.sum(self.w0 * x0 + self.w1 * x1, axis=0)


# ---------------------------------------------------------------- conjugator


class Conjugator:
    """Superheterodyne phase conjugator for ``ports`` parallel channels.

    A cos(w0 t + p) -> A (X1 X2 / 4) cos(w0 t + phi1 + phi2 - p).
    """

    def __init__(self, cfg, ports):
        self.cfg = cfg
        fs = cfg.fs
        self.b1, self.a1 = design_bpf((cfg.lo1_ratio - 1) * cfg.f0, cfg.bpf_q, fs)
        self.b2, self.a2 = design_bpf(cfg.f0, cfg.bpf_q, fs)
        self.z1 = np.zeros((ports, 2))
        self.z2 = np.zeros((ports, 2))
        x1, x2 = cfg.mixer_amplitudes
        p1, p2 = cfg.lo_phases
        per = _lo_period(cfg)
        t = np.arange(per) * cfg.sample_period
        self._per = per
        self.lo1 = x1 * np.cos(2 * np.pi * cfg.lo1_ratio * cfg.f0 * t + p1)
        self.lo2 = x2 * np.cos(2 * np.pi * cfg.lo2_ratio * cfg.f0 * t + p2)

    def process(self, x, k0):
        idx = (k0 + np.arange(x.shape[1])) % self._per
        s1, self.z1 = signal.lfilter(self.b1, self.a1, x * self.lo1[idx], axis=1, zi=self.z1)
        s2, self.z2 = signal.lfilter(self.b2, self.a2, s1 * self.lo2[idx], axis=1, zi=self.z2)
        return s2

    def stage_outputs(self, x, k0=0):
        """Both stage outputs for a record (for spectral inspection)."""
        idx = (k0 + np.arange(x.shape[1])) % self._per
        s1, self.z1 = signal.lfilter(self.b1, self.a1, x * self.lo1[idx], axis=1, zi=self.z1)
        s2, self.z2 = signal.lfilter(self.b2, self.a2, s1 * self.lo2[idx], axis=1, zi=self.z2)
        return s1, s2

    def group_delay(self):
        cfg = self.cfg
        return (group_delay_at_center((cfg.lo1_ratio - 1) * cfg.f0, cfg.bpf_q)
                + group_delay_at_center(cfg.f0, cfg.bpf_q))


def _lo_period(cfg):
    """Smallest sample count after which both LO waveforms repeat."""
    fs = cfg.fs
    for n in range(1, 100001):
        c1 = cfg.lo1_ratio * cfg.f0 * n / fs
        c2 = cfg.lo2_ratio * cfg.f0 * n / fs
        if abs(c1 - round(c1)) < 1e-9 and abs(c2 - round(c2)) < 1e-9:
            return n
    raise ConfigError("LO frequencies are not commensurate with the sample rate",
                      path="carrier.lo1_ratio")


def conjugate(cfg, x):
    """Run one stream (or a stack of streams) through a fresh conjugator."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    out = Conjugator(cfg, x2.shape[0]).process(x2, 0)
    return out[0] if single else out


# ---------------------------------------------------------------- latency


def analytic_loop_latency(cfg, ch):
    """Two path traversals plus two conjugators."""
    bank = DelayLineBank.from_channel(ch, cfg)
    return 2 * bank.mean_delay_s() + 2 * Conjugator(cfg, 1).group_delay()


def _envelope_delay(env, dt):
    """Area above a normalized step response: its mean delay."""
    final = np.mean(env[-len(env) // 10:])
    return float(np.sum(1.0 - env / final) * dt)


def measure_loop_latency(cfg, ch, settle_s=200e-9):
    """Open-loop step response of one circulation, measured on the envelope.

    A tone in the receiver's principal mode is switched on at the receiver
    output and followed through both path directions and both conjugators.
    """
    n = int(round(settle_s / cfg.sample_period))
    ea = eig_analysis(ch)
    bank = DelayLineBank.from_channel(ch, cfg)
    pilot = tone(cfg, ea.b_max, n)
    at_gen = port_synthesis(bank, pilot, reverse=True)
    gen_out = Conjugator(cfg, ch.n).process(at_gen, 0)
    at_rx = port_synthesis(bank, gen_out)
    back = Conjugator(cfg, ch.m).process(at_rx, 0)
    # project the returned waveform onto the principal mode as a complex envelope
    t = np.arange(n) * cfg.sample_period
    analytic = signal.hilbert(back, axis=1) * np.exp(-2j * np.pi * cfg.f0 * t)[None, :]
    env_out = np.abs(ea.b_max.conj() @ analytic)
    env_in = np.abs(signal.hilbert(pilot[0]) * np.exp(-2j * np.pi * cfg.f0 * t))
    # keep away from the record edges where the Hilbert transform rings
    cut = slice(0, n - n // 20)
    return (_envelope_delay(env_out[cut], cfg.sample_period)
            - _envelope_delay(env_in[cut], cfg.sample_period))


# ---------------------------------------------------------------- closed loop


def _db(x):
    return 10 * math.log10(x) if x > 0 else -math.inf


def run_carrier_loop(cfg, traj, lp, cp, duration, rng=None, loop_time_s=None, dump_path=None):
    """Closed carrier-level loop with the PI controller updating once per loop time.

    The controller's update interval is the measured loop latency unless
    ``loop_time_s`` is given.  Returns a :class:`SimulationTrace` whose
    ``meta`` holds the latency and the power-ratio efficiency estimate.
    """
    rng = as_rng(rng)
    total = int(round(duration / cfg.sample_period))
    if total > cfg.max_samples:
        raise BudgetError(f"{total} samples exceed the budget of {cfg.max_samples}")
    ch = traj.sample(0.0)
    n, m = ch.s21.shape
    bank = DelayLineBank.from_channel(ch, cfg)
    b = min(cfg.block_samples, bank.min_delay)
    t_loop = measure_loop_latency(cfg, ch) if loop_time_s is None else loop_time_s
    # control interval: whole blocks, and a whole number of half periods
    half = int(round(cfg.samples_per_period / 2))
    unit = b * half // math.gcd(b, half)
    ctl_blocks = max(1, int(round(t_loop / cfg.sample_period / unit))) * unit // b
    ctl_len = ctl_blocks * b
    t_ctl = ctl_len * cfg.sample_period
    avg_blocks = max(1, cfg.avg_window_samples // b)

    fwd = _PathBlock(bank, reverse=False)        # generator -> receiver
    rev = _PathBlock(bank, reverse=True)         # receiver -> generator
    ring_len = bank.max_delay + b + 2
    rx_out = _RingBuffer(m, ring_len)
    gen_out = _RingBuffer(n, ring_len)
    conj_gen = Conjugator(cfg, n)
    conj_rx = Conjugator(cfg, m)
    sigma = math.sqrt(lp.noise_power_w * lp.z0)
    a_sat = None if lp.rx_saturation_w is None else math.sqrt(2 * lp.rx_saturation_w * lp.z0)
    g_abs = abs(lp.gain_g)
    spp = int(round(cfg.samples_per_period))
    demod = np.exp(-2j * np.pi * np.arange(spp) / spp)

    cs = control.ControlState(0.0, cp.r_min_db)
    cs, r = control.pi_step(cs, cp, _db(m * lp.noise_power_w), t_ctl)
    rx_pow = deque(maxlen=avg_blocks)
    tx_pow = deque(maxlen=avg_blocks)
    gen_ph = deque(maxlen=avg_blocks)
    ctl_acc = 0.0
    rows, stab, ratio_eff = [], [], []
    dump = [] if dump_path is not None else None
    ea = eig_analysis(ch)
    k0 = 0
    blk = 0
    while k0 < total:
        bb = min(b, total - k0)
        t_now = k0 * cfg.sample_period
        at_gen = rev.apply(rx_out, k0, bb)
        # only |G| is realizable as a waveform gain; a common phase does not steer
        out_g = g_abs * 10 ** (r / 20) * conj_gen.process(at_gen, k0)
        gen_out.write(k0, out_g)
        at_rx = fwd.apply(gen_out, k0, bb)
        at_rx = at_rx + sigma * rng.standard_normal((m, bb))
        if a_sat is not None:
            at_rx = np.clip(at_rx, -a_sat, a_sat)
        back = abs(lp.loss_l) * conj_rx.process(at_rx, k0)
        rx_out.write(k0, back)
        if dump is not None:
            dump.append(at_rx.T.copy())

        p_rx = float(np.sum(at_rx * at_rx)) / lp.z0
        rx_pow.append(p_rx)
        tx_pow.append(float(np.sum(out_g * out_g)) / lp.z0)
        idx = (k0 + np.arange(bb)) % spp
        gen_ph.append(out_g @ demod[idx])
        ctl_acc += p_rx
        k0 += bb
        blk += 1
        if blk % ctl_blocks == 0:
            y = _db(ctl_acc / ctl_len)
            ctl_acc = 0.0
            t = k0 * cfg.sample_period
            v = np.sqrt(2) * np.sum(gen_ph, axis=0) / (len(gen_ph) * b)
            eff = efficiency(ch, v) if np.any(v) else 0.0
            ratio_eff.append(sum(rx_pow) / sum(tx_pow) if sum(tx_pow) > 0 else 0.0)
            lp_k = replace(lp, gain_g=g_abs * 10 ** (r / 20))
            rows.append((t, y, r, 20 * math.log10(ea.xi_max * g_abs * abs(lp.loss_l)),
                         eff, ea.xi_max, alignment(ea, v)))
            stab.append(loop.classify_stability(lp_k, ea, 1e-2))
            cs, r = control.pi_step(cs, cp, y, t_ctl)
            new = traj.sample(t)
            if new.s21 is not ch.s21 and not np.array_equal(new.s21, ch.s21):
                ch = new
                ea = eig_analysis(ch)
                bank = DelayLineBank.from_channel(ch, cfg)
                fwd.set(bank, reverse=False)
                rev.set(bank, reverse=True)
    if dump is not None:
        data = np.concatenate(dump, axis=0).astype("<f8")
        data.tofile(dump_path)
    cols = [np.array(c) for c in zip(*rows)]
    tr = SimulationTrace(*cols, stab, label="bs_rdaa_carrier")
    tr.meta.update({"loop_time_s": t_ctl, "measured_latency_s": t_loop,
                    "measured_efficiency": np.array(ratio_eff)})
    return tr
