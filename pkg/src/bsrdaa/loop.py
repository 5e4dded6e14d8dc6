"""Phasor-domain simulation of the two-sided retrodirective loop.

One call to :func:`step` is one circulation of the wave around the loop:

    v2b = S21 v1f            pilot arrives at the generator
    v2f = conj(G v2b)        generator amplifies and conjugates
    v1b = S21^T v2f          power arrives at the receiver (clipped if saturating)
    v1f' = conj(L v1b) + u   receiver couples a conjugated sample back, plus noise

so v1f' = conj(L) G S21^H S21 v1f + u when nothing saturates.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy.stats import linregress

from ._validation import as_rng, check_complex_vector
from .channel import eig_analysis, random_channel
from .errors import (
    DegenerateRegressionError,
    DimensionError,
    DivergenceError,
    InsufficientDataError,
)

DIVERGENCE_LIMIT = 1e154
DEFAULT_LOOP_TIME = 26.33e-9


@dataclass(frozen=True)
class LoopParams:
    # 40 dB amplifier; the coupler loss is folded into G by default
    gain_g: complex = 100.0
    loss_l: complex = 1.0
    noise_power_dbw: float = -140.0
    z0: float = 50.0
    rx_saturation_w: float | None = 10.0
    loop_time_s: float = DEFAULT_LOOP_TIME

    def __post_init__(self):
        if abs(self.loss_l) > 1.0:
            raise ValueError("|L| must not exceed 1")
        if not np.isfinite(self.noise_power_dbw):
            raise ValueError("noise_power_dbw must be finite")
        if not self.z0 > 0:
            raise ValueError("z0 must be positive")
        if self.rx_saturation_w is not None and not self.rx_saturation_w > 0:
            raise ValueError("rx_saturation_w must be positive or None")
        if not self.loop_time_s > 0:
            raise ValueError("loop_time_s must be positive")

    @property
    def loop_gain(self):
        return abs(self.loss_l * self.gain_g)

    @property
    def noise_power_w(self):
        return 10.0 ** (self.noise_power_dbw / 10.0)

    def with_loop_gain(self, lg_mag):
        """Same L, with |G| rescaled so that |LG| = ``lg_mag``."""
        g = self.gain_g
        phase = g / abs(g) if g != 0 else 1.0
        return replace(self, gain_g=phase * lg_mag / abs(self.loss_l))


@dataclass(frozen=True)
class LoopState:
    v1f: np.ndarray
    v2f: np.ndarray
    k: int = 0
    t: float = 0.0

    @classmethod
    def initial(cls, v1f, n):
        v1f = np.asarray(v1f, dtype=complex)
        return cls(v1f, np.zeros(n, dtype=complex), 0, 0.0)


def _clip(v, sat_w, z0):
    if sat_w is None:
        return v
    amax = np.sqrt(sat_w * z0)
    mag = np.abs(v)
    over = mag > amax
    if not np.any(over):
        return v
    out = v.copy()
    out[over] *= amax / mag[over]
    return out


def _guard(*vecs):
    for v in vecs:
        if not np.all(np.isfinite(v)) or np.max(np.abs(v), initial=0.0) > DIVERGENCE_LIMIT:
            raise DivergenceError("loop state exceeded 1e154; the loop is unstable")


def noise_sample(p, m, rng):
    """Circular complex Gaussian noise with E|u_i|^2 / Z0 = noise power, per port."""
    scale = np.sqrt(p.noise_power_w * p.z0 / 2.0)
    return scale * (rng.standard_normal(m) + 1j * rng.standard_normal(m))


def forward(v1f, ch, p):
    """Generator excitation produced by pilot ``v1f``."""
    return np.conj(p.gain_g * (ch.s21 @ v1f))


def received(v2f, ch, p):
    """Receiver-side incident wave for generator excitation ``v2f``, after clipping."""
    return _clip(ch.return_channel @ v2f, p.rx_saturation_w, p.z0)


def step(state, ch, p, u=None):
    """Advance the loop by one circulation; ``u`` is the injected pilot noise."""
    n, m = ch.s21.shape
    if state.v1f.shape != (m,):
        raise DimensionError(f"v1f has length {state.v1f.shape[0]}, channel expects {m}")
    if u is None:
        u = np.zeros(m, dtype=complex)
    elif np.shape(u) != (m,):
        raise DimensionError(f"noise vector has length {np.shape(u)}, expected ({m},)")
    v2f = forward(state.v1f, ch, p)
    v1b = received(v2f, ch, p)
    v1f = np.conj(p.loss_l * v1b) + u
    _guard(v2f, v1f)
    return LoopState(v1f, v2f, state.k + 1, (state.k + 1) * p.loop_time_s)


def run_loop(ch, p, v1f0, n_steps, rng=None, noise=False):
    """Iterate :func:`step`; returns the list of states including the initial one."""
    rng = as_rng(rng)
    v1f0 = check_complex_vector(v1f0, ch.m, "v1f0")
    states = [LoopState.initial(v1f0, ch.n)]
    for _ in range(n_steps):
        u = noise_sample(p, ch.m, rng) if noise else None
        states.append(step(states[-1], ch, p, u))
    return states


def zero_input_oracle(ch, p, v1f0, k):
    """Closed-form noiseless pilot after ``k`` circulations."""
    if k < 0:
        raise ValueError("k must be >= 0")
    v1f0 = check_complex_vector(v1f0, ch.m, "v1f0")
    ea = eig_analysis(ch)
    b = ea.b_vecs
    w = b.conj().T @ v1f0
    coef = (np.conj(p.loss_l) * p.gain_g) ** k
    return coef * (b @ (ea.xi_rx.astype(complex) ** k * w))


class PowerReading(NamedTuple):
    power_w: float
    efficiency: float
    defined: bool


def power_out(state, ch, p):
    """Receiver output power for the current excitation and its efficiency.

    With ``v2f = 0`` the efficiency is reported as 0 with ``defined=False``.
    """
    v2f = state.v2f
    v1b = received(v2f, ch, p)
    power = float(np.vdot(v1b, v1b).real / p.z0)
    tx = float(np.vdot(v2f, v2f).real)
    if tx == 0.0:
        return PowerReading(power, 0.0, False)
    gram = np.conj(ch.s21) @ ch.s21.T
    eff = float(np.vdot(v2f, gram @ v2f).real / tx)
    return PowerReading(power, eff, True)


def measured_power(state, ch, p, u):
    """What a receiver-side sensor reads: clipped signal plus receiver noise."""
    v = received(state.v2f, ch, p) + u
    return float(np.vdot(v, v).real / p.z0)


def classify_stability(p, ea, tol=1e-9):
    """'stable', 'marginal' or 'unstable' from |LG| xi_max against 1."""
    if not ea.xi_max > 0:
        raise ValueError("xi_max must be positive")
    rho = p.loop_gain * ea.xi_max
    if abs(rho - 1.0) <= tol:
        return "marginal"
    return "stable" if rho < 1.0 else "unstable"


def marginal_loop_gain(xi_max):
    return 1.0 / xi_max


def attenuator_xi_bounds(g_db=40.0, r_min_db=-35.0, r_max_db=-3.0):
    """Range of xi_max the loop can be held marginal over, given the attenuator span.

    Marginality needs r + G_dB + 20 log10(xi_max) = 0, so the most attenuation
    serves the strongest channel.
    """
    lo = 10.0 ** (-(r_max_db + g_db) / 20.0)
    hi = 10.0 ** (-(r_min_db + g_db) / 20.0)
    return lo, hi


def power_recursion_oracle(p0_w, xi_max, lg_mag, k):
    if p0_w < 0:
        raise ValueError("p0_w must be >= 0")
    return p0_w * abs(xi_max * lg_mag) ** (2 * k)


def power_recursion_db(y0_dbw, step_gain_db, k):
    """The same recursion in dB: y_k = (r + g) k + y0."""
    return y0_dbw + step_gain_db * k


# ---------------------------------------------------------------- experiments


@dataclass
class GainSweep:
    lg_db: np.ndarray
    efficiency: np.ndarray
    noise_baseline: float
    marginal_db: float

    @property
    def peak_db(self):
        return float(self.lg_db[int(np.argmax(self.efficiency))])


def _sweep_point(ch, p, n_steps, rng):
    m = ch.m
    state = LoopState.initial(noise_sample(p, m, rng), ch.n)
    rx_acc = tx_acc = 0.0
    settle = n_steps // 2
    for k in range(n_steps):
        state = step(state, ch, p, noise_sample(p, m, rng))
        if k >= settle:
            v1b = received(state.v2f, ch, p)
            rx_acc += np.vdot(v1b, v1b).real
            tx_acc += np.vdot(state.v2f, state.v2f).real
    return rx_acc / tx_acc if tx_acc > 0 else 0.0


def gain_sweep(ch, p_template, lg_range_db, steps_per_point=2000, rx_saturation_w=10.0, rng=None):
    """Measured steady-state efficiency against loop gain |LG| (dB).

    Efficiency is the ratio of time-averaged received (clipped) power to
    time-averaged transmitted power over the second half of each run.  The
    noise baseline is the same measurement with the receiver coupling cut
    (L = 0), so every pilot is pure noise.
    """
    rng = as_rng(rng)
    base = replace(p_template, rx_saturation_w=rx_saturation_w)
    lg_db = np.asarray(lg_range_db, dtype=float)
    eff = np.array([
        _sweep_point(ch, base.with_loop_gain(10 ** (g / 20)), steps_per_point, rng)
        for g in lg_db
    ])
    cut = replace(base, loss_l=0.0, gain_g=base.with_loop_gain(1.0).gain_g)
    baseline = _sweep_point(ch, cut, steps_per_point, rng)
    xi = eig_analysis(ch).xi_max
    return GainSweep(lg_db, eff, float(baseline), float(-20 * np.log10(xi)))


def spectral_radius(ch, lg_mag):
    """Largest |eigenvalue| of the loop map |LG| S21^H S21 (general eigensolver)."""
    s = ch.s21
    return float(np.max(np.abs(np.linalg.eigvals(lg_mag * (s.conj().T @ s)))))


def bisect_marginal_gain(ch, lo=1e-3, hi=1e9, rtol=1e-13):
    """|LG| at which the loop map's spectral radius crosses 1."""
    lo_l, hi_l = np.log(lo), np.log(hi)
    for _ in range(200):
        mid = 0.5 * (lo_l + hi_l)
        if spectral_radius(ch, np.exp(mid)) < 1.0:
            lo_l = mid
        else:
            hi_l = mid
        if hi_l - lo_l < rtol:
            break
    return float(np.exp(0.5 * (lo_l + hi_l)))


@dataclass
class MarginalRegression:
    slope: float
    intercept: float
    r2: float
    lg_db: np.ndarray
    inv_xi_db: np.ndarray


def marginal_regression(n_channels=30, seed=0, channels=None):
    """Regress bisected marginal gain (dB) on -20 log10 xi_max over random channels."""
    if channels is None:
        if n_channels < 10:
            raise InsufficientDataError(f"need at least 10 channels, got {n_channels}")
        rng = as_rng(seed)
        channels = [random_channel(4, 4, rng, sigma_max=rng.uniform(0.05, 0.9))
                    for _ in range(n_channels)]
    channels = list(channels)
    if len(channels) < 10:
        raise InsufficientDataError(f"need at least 10 channels, got {len(channels)}")
    lg_db = np.array([20 * np.log10(bisect_marginal_gain(ch)) for ch in channels])
    inv_xi_db = np.array([-20 * np.log10(eig_analysis(ch).xi_max) for ch in channels])
    if np.ptp(inv_xi_db) <= 1e-12 * max(1.0, np.max(np.abs(inv_xi_db))):
        raise DegenerateRegressionError("all channels share the same xi_max")
    fit = linregress(inv_xi_db, lg_db)
    return MarginalRegression(float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2),
                              lg_db, inv_xi_db)
