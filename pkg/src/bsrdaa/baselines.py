"""Comparison beam-control methods: position tracking, single-side pilot
retrodirection, and iterative superposition driven by Nelder-Mead.

All of them transmit a unit-power excitation; one transmission costs one
loop time.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import alignment, efficiency, eig_analysis
from .errors import ConfigError
from .optimize import NelderMeadOptions, nelder_mead_search
from .trace import SimulationTrace

METHODS = ("position_tracking", "ss_rdaa", "nelder_mead_simultaneous", "nelder_mead_sequential")


def position_tracking_weights(tx, rx_position):
    """Equal-amplitude excitation phased to focus on ``rx_position``."""
    d = np.linalg.norm(tx.element_positions - np.asarray(rx_position, float), axis=1)
    n = len(d)
    return np.exp(2j * np.pi * d / tx.wavelength) / np.sqrt(n)


def ss_rdaa_weights(ch, pilot_element=0):
    """Conjugate of the pilot element's column: what a one-sided retrodirective
    array sends back after hearing a single receiver element."""
    if not 0 <= pilot_element < ch.m:
        raise IndexError(f"pilot element {pilot_element} outside 0..{ch.m - 1}")
    w = np.conj(ch.s21[:, pilot_element])
    nw = np.linalg.norm(w)
    if nw == 0:
        return w
    return w / nw


def weights_from_params(x, n):
    """Phase (first n entries) and log-amplitude (last n) to a unit-norm excitation."""
    x = np.asarray(x, dtype=float)
    w = np.exp(x[n:] + 1j * x[:n])
    return w / np.linalg.norm(w)


@dataclass(frozen=True)
class BaselineConfig:
    method: str
    iteration_time: float = 26.33e-9
    pilot_element: int = 0
    nm_options: NelderMeadOptions = field(
        default_factory=lambda: NelderMeadOptions(xtol=1e-3, max_iter=400)
    )
    # per-element sub-search cap in sequential mode
    sequential_max_iter: int = 8
    restart_change: float = 0.01

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown baseline {self.method!r}; expected one of {METHODS}",
                              path="method")
        if not self.iteration_time > 0:
            raise ConfigError("iteration_time must be positive", path="iteration_time")


class _Recorder:
    def __init__(self, label):
        self.label = label
        self.rows = []

    def add(self, t, ch, ea, w):
        eta = efficiency(ch, w)
        self.rows.append((t, eta, ea.xi_max, alignment(ea, w)))
        return eta

    def trace(self):
        t, eta, xi, al = (np.array(c) for c in zip(*self.rows))
        power = 10 * np.log10(np.maximum(eta, 1e-300))
        nan = np.full(len(t), np.nan)
        tr = SimulationTrace(t, power, nan, nan, eta, xi, al, ["open-loop"] * len(t),
                             label=self.label)
        # at 1 W transmit the receiver noise floor is ~1e-13 of the signal
        tr.meta["measured_efficiency"] = eta
        return tr


def _n_steps(duration, dt):
    return max(1, int(round(duration / dt)))


def run_position_tracking(traj, duration, cfg):
    rec = _Recorder("position_tracking")
    dt = cfg.iteration_time
    for k in range(1, _n_steps(duration, dt) + 1):
        t = k * dt
        tx, rx = traj.geometry(t)
        ch = traj.sample(t)
        rec.add(t, ch, eig_analysis(ch), position_tracking_weights(tx, rx.center))
    return rec.trace()


def run_ss_rdaa(traj, duration, cfg):
    rec = _Recorder("ss_rdaa")
    dt = cfg.iteration_time
    heard = traj.sample(0.0)
    for k in range(1, _n_steps(duration, dt) + 1):
        t = k * dt
        w = ss_rdaa_weights(heard, cfg.pilot_element)
        ch = traj.sample(t)
        rec.add(t, ch, eig_analysis(ch), w)
        heard = ch
    return rec.trace()


class _Clock:
    """Transmits candidates one loop time apart and records what each achieved."""

    def __init__(self, traj, duration, cfg, label):
        self.traj = traj
        self.dt = cfg.iteration_time
        self.n = _n_steps(duration, self.dt)
        self.k = 0
        self.rec = _Recorder(label)

    @property
    def done(self):
        return self.k >= self.n

    def transmit(self, w):
        self.k += 1
        t = self.k * self.dt
        ch = self.traj.sample(t)
        return self.rec.add(t, ch, eig_analysis(ch), w)


def _drive(gen, clock, to_weights):
    """Feed a search generator measured efficiencies until it finishes or time runs out."""
    try:
        x = next(gen)
        while not clock.done:
            x = gen.send(-clock.transmit(to_weights(x)))
    except StopIteration as stop:
        return stop.value
    return None


def _monitor(clock, w, change, ref):
    """Hold ``w`` until the measured efficiency moves more than ``change`` (relative) from ``ref``.

    ``ref`` is what the search believed ``w`` achieves, so a channel that moved
    mid-search triggers a restart at once.  A rise counts too: the search only
    sees power, so any shift means the channel moved.
    """
    while not clock.done:
        eta = clock.transmit(w)
        if abs(eta - ref) > change * ref:
            return


def run_nm_simultaneous(traj, duration, cfg):
    clock = _Clock(traj, duration, cfg, "nelder_mead_simultaneous")
    n = traj.sample(0.0).n
    x = np.zeros(2 * n)
    while not clock.done:
        res = _drive(nelder_mead_search(x, cfg.nm_options), clock,
                     lambda v: weights_from_params(v, n))
        if res is None:
            break
        x = res.x
        _monitor(clock, weights_from_params(x, n), cfg.restart_change, -res.fun)
    return clock.rec.trace()


def run_nm_sequential(traj, duration, cfg):
    clock = _Clock(traj, duration, cfg, "nelder_mead_sequential")
    n = traj.sample(0.0).n
    x = np.zeros(2 * n)
    sub = NelderMeadOptions(
        reflection=cfg.nm_options.reflection, expansion=cfg.nm_options.expansion,
        contraction=cfg.nm_options.contraction, shrink=cfg.nm_options.shrink,
        initial_edge=cfg.nm_options.initial_edge, xtol=cfg.nm_options.xtol,
        ftol=cfg.nm_options.ftol, max_iter=cfg.sequential_max_iter,
    )

    def element_weights(j, base):
        def to_w(v):
            y = base.copy()
            y[j], y[n + j] = v
            return weights_from_params(y, n)
        return to_w

    while not clock.done:
        sweep_moved = 0.0
        best = 0.0
        for j in range(n):
            if clock.done:
                break
            res = _drive(nelder_mead_search([x[j], x[n + j]], sub), clock, element_weights(j, x))
            if res is None:
                break
            sweep_moved = max(sweep_moved, abs(res.x[0] - x[j]), abs(res.x[1] - x[n + j]))
            x[j], x[n + j] = res.x
            best = -res.fun
        if sweep_moved <= cfg.nm_options.xtol and not clock.done:
            _monitor(clock, weights_from_params(x, n), cfg.restart_change, best)
    return clock.rec.trace()


def iterative_superposition_run(traj, mode, duration, cfg=None):
    """Time-stepped iterative superposition in ``sequential`` or ``simultaneous`` mode."""
    method = f"nelder_mead_{mode}"
    cfg = cfg or BaselineConfig(method)
    if mode == "simultaneous":
        return run_nm_simultaneous(traj, duration, cfg)
    if mode == "sequential":
        return run_nm_sequential(traj, duration, cfg)
    raise ConfigError(f"mode must be 'sequential' or 'simultaneous', got {mode!r}", path="mode")


def run_baseline(traj, duration, cfg):
    if cfg.method == "position_tracking":
        if not traj.has_geometry:
            raise ConfigError("position tracking needs a geometric trajectory", path="trajectory")
        return run_position_tracking(traj, duration, cfg)
    if cfg.method == "ss_rdaa":
        return run_ss_rdaa(traj, duration, cfg)
    if cfg.method == "nelder_mead_simultaneous":
        return run_nm_simultaneous(traj, duration, cfg)
    return run_nm_sequential(traj, duration, cfg)
