"""Log-domain plant and PI controller that holds the loop at marginal stability.

In dB the loop behaves like an integrator: each circulation adds the net
loop gain r + g to the output power, so ``t_p dy/dt = r + g``.  The
controller closes the loop with

    r = K_I * integral(R - y) dt + b - K_F * y

which gives the closed-loop transfer K_I / (t_p s^2 + K_F s + K_I) from the
setpoint and s / (t_p s^2 + K_F s + K_I) from the disturbance g.
"""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    AggressiveDesignWarning,
    NoExtremumError,
    NonOverdampedError,
    StepSizeError,
    UnderdampedError,
)

CRITICAL_RTOL = 1e-12


@dataclass(frozen=True)
class PlantParams:
    t_p: float = 26.33e-9
    y0_dbw: float = -140.0

    def __post_init__(self):
        if not self.t_p > 0:
            raise ValueError("t_p must be positive")


@dataclass(frozen=True)
class ControllerParams:
    k_f: float = 1.0
    k_i: float = 5e6
    b_db: float = -120.0
    r_min_db: float = -35.0
    r_max_db: float = -3.0
    y_min_dbw: float = -150.0
    y_max_dbw: float = 10.0
    reference_dbw: float = -30.0

    def __post_init__(self):
        if not self.k_f > 0:
            raise ValueError("k_f must be positive")
        if not self.k_i > 0:
            raise ValueError("k_i must be positive")
        if not self.r_min_db < self.r_max_db:
            raise ValueError("r_min_db must be below r_max_db")
        if not self.y_min_dbw < self.y_max_dbw:
            raise ValueError("y_min_dbw must be below y_max_dbw")


@dataclass(frozen=True)
class ControlState:
    integrator: float = 0.0
    last_r_db: float = 0.0


def plant_response(p, r_db, g_db, t):
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be >= 0")
    return (r_db + g_db) * np.asarray(t) / p.t_p + p.y0_dbw


def discriminant(c, p):
    return c.k_f ** 2 - 4.0 * c.k_i * p.t_p


def damping_class(c, p):
    d = discriminant(c, p)
    if abs(d) <= CRITICAL_RTOL * c.k_f ** 2:
        return "critical"
    return "overdamped" if d > 0 else "underdamped"


class Poles(NamedTuple):
    p1: complex
    p2: complex
    damping_class: str


def poles(c, p):
    """Closed-loop poles; ``p1`` is the fast one, ``p2`` the slow (dominant) one.

    Real-valued floats unless underdamped, in which case a conjugate pair.
    """
    kind = damping_class(c, p)
    d = discriminant(c, p)
    two_tp = 2.0 * p.t_p
    if kind == "critical":
        pole = -c.k_f / two_tp
        return Poles(pole, pole, kind)
    if kind == "overdamped":
        sd = math.sqrt(d)
        return Poles((-c.k_f - sd) / two_tp, (-c.k_f + sd) / two_tp, kind)
    sd = cmath.sqrt(d)
    return Poles((-c.k_f - sd) / two_tp, (-c.k_f + sd) / two_tp, kind)


def settling_time(c, p):
    kind = damping_class(c, p)
    if kind == "critical":
        return 10.0 * p.t_p / c.k_f
    if kind == "overdamped":
        return 5.0 * c.k_f / c.k_i
    raise UnderdampedError("settling time is defined only for critical or overdamped designs")


def design_gains(t_s_target, p, k_f=1.0, **controller_fields):
    """PI gains for a target settling time, K_I = 5 K_F / t_s.

    Warns with :class:`AggressiveDesignWarning` when ``t_s_target <= 20 t_p``
    (the loop time is then too large a share of the settling time).
    """
    if not t_s_target > 0:
        raise ValueError("t_s_target must be positive")
    c = ControllerParams(k_f=k_f, k_i=5.0 * k_f / t_s_target, **controller_fields)
    if t_s_target <= 20.0 * p.t_p:
        warnings.warn(
            f"t_s = {t_s_target:.3g} s is only {t_s_target / p.t_p:.1f} loop times; "
            f"design is {damping_class(c, p)}",
            AggressiveDesignWarning,
            stacklevel=2,
        )
    return c


def overshoot_step_disturbance(c, p, g0_db):
    """Peak output excursion after a step disturbance ``g0_db`` with R = 0."""
    kind = damping_class(c, p)
    if kind == "critical":
        return 2.0 * g0_db / (math.e * c.k_f)
    if kind == "overdamped":
        return g0_db / c.k_f
    raise UnderdampedError("overshoot bound is defined only for critical or overdamped designs")


def ramp_error(c, c0_db_per_s):
    """Steady tracking error against a disturbance ramping at ``c0`` dB/s."""
    return c0_db_per_s / c.k_i


class StartupTerms(NamedTuple):
    p1: float
    p2: float
    a1: float
    a2: float


def startup_terms(c, p, r0_db, g0_db, y0_dbw):
    """Partial-fraction coefficients of the start-up trajectory.

    The integrator starts at zero and the disturbance seen by the loop is
    ``g0 + b`` from t = 0.
    """
    if damping_class(c, p) != "overdamped":
        raise NonOverdampedError("start-up closed form needs two distinct real poles")
    p1, p2, _ = poles(c, p)
    sd = math.sqrt(discriminant(c, p))
    g = g0_db + c.b_db
    ki, tp = c.k_i, p.t_p
    a1 = -(ki * r0_db + p1 * g + p1 ** 2 * tp * y0_dbw) / (p1 * sd)
    a2 = (ki * r0_db + p2 * g + p2 ** 2 * tp * y0_dbw) / (p2 * sd)
    return StartupTerms(p1, p2, a1, a2)


def startup_response(c, p, r0_db, g0_db, y0_dbw, t):
    """Output power (dBW) after switch-on, for setpoint ``r0_db``."""
    p1, p2, a1, a2 = startup_terms(c, p, r0_db, g0_db, y0_dbw)
    t = np.asarray(t, dtype=float)
    return r0_db + a1 * np.exp(p1 * t) + a2 * np.exp(p2 * t)


class Extremum(NamedTuple):
    y_dbw: float
    t_s: float
    kind: str  # "peak" or "trough"


def startup_extremum(c, p, r0_db, g0_db, y0_dbw):
    """Interior stationary point of the start-up trajectory."""
    p1, p2, a1, a2 = startup_terms(c, p, r0_db, g0_db, y0_dbw)
    if a2 == 0.0:
        raise NoExtremumError("slow mode absent; trajectory is monotone")
    x = -a1 * p1 / (a2 * p2)
    if not x > 0:
        raise NoExtremumError("no stationary point; trajectory is monotone")
    t_star = math.log(x) / (p2 - p1)
    if t_star < 0:
        raise NoExtremumError("stationary point lies before switch-on")
    sd_tp = p2 - p1
    y = r0_db + a1 * x ** (p1 / sd_tp) + a2 * x ** (p2 / sd_tp)
    # second derivative sign: a1 p1^2 e^{p1 t} + a2 p2^2 e^{p2 t}
    curv = a1 * p1 ** 2 * math.exp(p1 * t_star) + a2 * p2 ** 2 * math.exp(p2 * t_star)
    return Extremum(float(y), float(t_star), "peak" if curv < 0 else "trough")


def startup_max(c, p, r0_db, g0_db, y0_dbw):
    """Value of the start-up trajectory at its stationary point.

    For strongly negative bias the stationary point is a trough below the
    setpoint, i.e. a negative overshoot.
    """
    return startup_extremum(c, p, r0_db, g0_db, y0_dbw).y_dbw


def pi_step(cs, c, y_meas_dbw, dt):
    """One discrete PI update with sensor clamp, actuator clamp and anti-windup."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    y = min(max(y_meas_dbw, c.y_min_dbw), c.y_max_dbw)
    err = c.reference_dbw - y
    # conditional integration: hold only while the output is already pinned
    # and the error would drive it further
    r_now = cs.integrator + c.b_db - c.k_f * y
    winding_up = (r_now >= c.r_max_db and err > 0) or (r_now <= c.r_min_db and err < 0)
    integ = cs.integrator if winding_up else cs.integrator + c.k_i * err * dt
    r = min(max(integ + c.b_db - c.k_f * y, c.r_min_db), c.r_max_db)
    return ControlState(integ, r), r


def pi_step_unbounded(cs, c, y_meas_dbw, dt):
    """PI update without sensor or actuator limits (linear analysis)."""
    integ = cs.integrator + c.k_i * (c.reference_dbw - y_meas_dbw) * dt
    r = integ + c.b_db - c.k_f * y_meas_dbw
    return ControlState(integ, r), r


@dataclass
class LinearTrace:
    t: np.ndarray
    y: np.ndarray
    r: np.ndarray


def _as_signal(x):
    return x if callable(x) else (lambda t, v=float(x): v)


def simulate_closed_loop_linear(c, p, r_ref, g, y0, duration, dt):
    """Continuous closed loop with linear plant and PI controller, RK4 at fixed step.

    ``r_ref`` and ``g`` are constants or functions of time.  The controller
    bias ``b`` adds to the disturbance; the integrator starts at zero.
    """
    if not dt > 0 or dt > p.t_p / 4.0 * (1 + 1e-12):
        raise StepSizeError(f"dt = {dt:.3g} s must be positive and at most t_p/4")
    ref = _as_signal(r_ref)
    dist = _as_signal(g)
    tp, kf, ki, b = p.t_p, c.k_f, c.k_i, c.b_db

    def deriv(t, y, integ):
        r = integ + b - kf * y
        return (r + dist(t)) / tp, ki * (ref(t) - y)

    n = int(math.ceil(duration / dt - 1e-9))
    ts = np.arange(n + 1) * dt
    ys = np.empty(n + 1)
    rs = np.empty(n + 1)
    y, integ = float(y0), 0.0
    h = dt
    for k in range(n):
        t = ts[k]
        ys[k] = y
        rs[k] = integ + b - kf * y
        k1y, k1i = deriv(t, y, integ)
        k2y, k2i = deriv(t + h / 2, y + h / 2 * k1y, integ + h / 2 * k1i)
        k3y, k3i = deriv(t + h / 2, y + h / 2 * k2y, integ + h / 2 * k2i)
        k4y, k4i = deriv(t + h, y + h * k3y, integ + h * k3i)
        y += h / 6 * (k1y + 2 * k2y + 2 * k3y + k4y)
        integ += h / 6 * (k1i + 2 * k2i + 2 * k3i + k4i)
    ys[n] = y
    rs[n] = integ + b - kf * y
    return LinearTrace(ts, ys, rs)


def design_report(c, p):
    """Summary of a controller design, as plain data."""
    pl = poles(c, p)

    def num(z):
        z = complex(z)
        return z.real if z.imag == 0 else [z.real, z.imag]

    out = {
        "k_f": c.k_f,
        "k_i": c.k_i,
        "b_db": c.b_db,
        "t_p_s": p.t_p,
        "poles": [num(pl.p1), num(pl.p2)],
        "damping_class": pl.damping_class,
        "discriminant": discriminant(c, p),
    }
    try:
        out["settling_time_s"] = settling_time(c, p)
    except UnderdampedError:
        out["settling_time_s"] = None
    try:
        out["overshoot_per_db_disturbance"] = overshoot_step_disturbance(c, p, 1.0)
    except UnderdampedError:
        out["overshoot_per_db_disturbance"] = None
    out["ramp_error_per_db_per_us"] = ramp_error(c, 1e6)
    return out
