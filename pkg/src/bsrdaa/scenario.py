"""Scenario configuration and orchestration.

A scenario couples a channel trajectory with the retrodirective loop and the
PI controller: every loop circulation the controller reads the receiver
power, then sets the attenuator that scales the generator gain for the next
circulation.
"""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources

import jsonschema
import numpy as np

from . import control, loop
from ._validation import as_rng
from .baselines import METHODS as BASELINE_METHODS
from .baselines import BaselineConfig, run_baseline
from .channel import alignment, eig_analysis
from .errors import ConfigError, FeatureDisabledError
from .trace import SimulationTrace, settling_time
from .trajectory import trajectory_from_config

ALL_METHODS = ("bs_rdaa",) + BASELINE_METHODS
STABILITY_LABEL_TOL = 1e-2
DEFAULT_TRAJECTORY = {"kind": "static", "angle_deg": 0.0}


def load_schema():
    text = resources.files("bsrdaa").joinpath("data/scenario.schema.json").read_text()
    return json.loads(text)


@dataclass
class ScenarioConfig:
    trajectory: dict = field(default_factory=lambda: dict(DEFAULT_TRAJECTORY))
    loop: loop.LoopParams = field(default_factory=loop.LoopParams)
    controller: control.ControllerParams = field(default_factory=control.ControllerParams)
    engine: str = "phasor"
    duration: float = 10e-6
    seed: int = 0
    method: str = "bs_rdaa"
    feature_carrier: bool = False
    carrier: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.duration > 0:
            raise ConfigError("duration must be positive", path="duration")
        if self.engine not in ("phasor", "carrier"):
            raise ConfigError(f"engine must be 'phasor' or 'carrier', got {self.engine!r}",
                              path="engine")
        if self.engine == "carrier" and not self.feature_carrier:
            raise FeatureDisabledError("carrier engine requires the carrier feature flag",
                                       path="engine")
        if self.method not in ALL_METHODS:
            raise ConfigError(f"unknown method {self.method!r}", path="method")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer", path="seed")

    @property
    def plant(self):
        return control.PlantParams(t_p=self.loop.loop_time_s)

    def build_trajectory(self):
        return trajectory_from_config(self.trajectory)

    @classmethod
    def from_dict(cls, data):
        try:
            jsonschema.validate(data, load_schema())
        except jsonschema.ValidationError as exc:
            path = ".".join(str(p) for p in exc.absolute_path) or None
            raise ConfigError(exc.message, path=path) from exc
        data = copy.deepcopy(data)
        kw = {}
        for key in ("trajectory", "engine", "duration", "seed", "method",
                    "feature_carrier", "carrier", "outputs"):
            if key in data:
                kw[key] = data[key]
        if "loop" in data:
            lp = dict(data["loop"])
            if "gain_db" in lp:
                lp["gain_g"] = 10 ** (lp.pop("gain_db") / 20)
            kw["loop"] = _build(loop.LoopParams, lp, "loop")
        if "controller" in data:
            kw["controller"] = _build(control.ControllerParams, data["controller"], "controller")
        return cls(**kw)

    def to_dict(self):
        lp = asdict(self.loop)
        lp["gain_g"] = float(abs(self.loop.gain_g))
        lp["loss_l"] = float(abs(self.loop.loss_l))
        return {
            "trajectory": self.trajectory,
            "loop": lp,
            "controller": asdict(self.controller),
            "engine": self.engine,
            "duration": self.duration,
            "seed": self.seed,
            "method": self.method,
            "feature_carrier": self.feature_carrier,
            "carrier": self.carrier,
            "outputs": self.outputs,
        }


def _build(cls, values, path):
    names = {f.name for f in fields(cls)}
    extra = set(values) - names
    if extra:
        raise ConfigError(f"unknown fields {sorted(extra)}", path=path)
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path=path) from exc


def load_config(path):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno}: {exc.msg}", path=str(path)) from exc
    return ScenarioConfig.from_dict(data)


# ---------------------------------------------------------------- phasor engine


def _db(x):
    return 10.0 * np.log10(x) if x > 0 else -np.inf


def run_phasor_loop(traj, lp, cp, duration, rng):
    """Closed-loop retrodirective simulation, one PI update per loop time."""
    t_p = lp.loop_time_s
    n = max(1, int(round(duration / t_p)))
    ch = traj.sample(0.0)
    state = loop.LoopState.initial(loop.noise_sample(lp, ch.m, rng), ch.n)
    cs = control.ControlState(0.0, cp.r_min_db)
    y = _db(loop.measured_power(state, ch, lp, loop.noise_sample(lp, ch.m, rng)))
    cs, r = control.pi_step(cs, cp, y, t_p)
    g_abs = abs(lp.gain_g)
    rows = []
    stab = []
    measured_eff = []
    for k in range(1, n + 1):
        t = k * t_p
        ch = traj.sample(t)
        ea = eig_analysis(ch)
        lp_k = replace(lp, gain_g=lp.gain_g * 10 ** (r / 20))
        state = loop.step(state, ch, lp_k, loop.noise_sample(lp, ch.m, rng))
        reading = loop.power_out(state, ch, lp_k)
        p_meas = loop.measured_power(state, ch, lp_k, loop.noise_sample(lp, ch.m, rng))
        y = _db(p_meas)
        p_tx = float(np.vdot(state.v2f, state.v2f).real) / lp.z0
        measured_eff.append(p_meas / p_tx if p_tx > 0 else np.inf)
        g_db = 20 * np.log10(ea.xi_max * g_abs * abs(lp.loss_l))
        # r is the attenuator setting that produced this circulation
        rows.append((t, y, r, g_db, reading.efficiency, ea.xi_max,
                     alignment(ea, state.v2f)))
        stab.append(loop.classify_stability(lp_k, ea, STABILITY_LABEL_TOL))
        cs, r = control.pi_step(cs, cp, y, t_p)
    cols = [np.array(c) for c in zip(*rows)]
    tr = SimulationTrace(*cols, stab, label="bs_rdaa")
    # sensor power over transmitted power: what the hardware can observe, noise included
    tr.meta["measured_efficiency"] = np.array(measured_eff)
    return tr


def run_scenario(cfg):
    """Run one configured scenario and return its trace (deterministic per seed)."""
    rng = as_rng(int(cfg.seed))
    traj = cfg.build_trajectory()
    if cfg.method != "bs_rdaa":
        bc = BaselineConfig(cfg.method, iteration_time=cfg.loop.loop_time_s)
        tr = run_baseline(traj, cfg.duration, bc)
    elif cfg.engine == "carrier":
        from .carrier import CarrierConfig, run_carrier_loop

        ccfg = CarrierConfig.from_dict(cfg.carrier)
        tr = run_carrier_loop(ccfg, traj, cfg.loop, cfg.controller, cfg.duration, rng=rng,
                              dump_path=cfg.outputs.get("raw_dump"))
    else:
        tr = run_phasor_loop(traj, cfg.loop, cfg.controller, cfg.duration, rng)
    tr.validate()
    return tr


# ---------------------------------------------------------------- comparison


@dataclass
class MethodResult:
    method: str
    trace: SimulationTrace
    settling_time_s: float
    mean_ratio: float
    final_ratio: float


@dataclass
class ComparisonReport:
    results: dict

    def summary(self):
        return {
            m: {"settling_time_s": r.settling_time_s, "mean_ratio": r.mean_ratio,
                "final_ratio": r.final_ratio}
            for m, r in self.results.items()
        }


def ratio_settling_time(trace, band=0.01, tail=0.1):
    """Settling of the measured efficiency ratio into the band around its end-of-run level.

    Uses the noise-inclusive measured efficiency when the trace carries one.
    """
    ratio = np.asarray(trace.meta.get("measured_efficiency", trace.efficiency)) / trace.xi_max
    k = max(1, int(len(ratio) * tail))
    final = float(np.median(ratio[-k:]))
    return settling_time(trace.t_s, ratio, final=final, band=band, t_start=0.0)


def run_comparison(cfg, methods, mean_window=None):
    """Run every method on the same trajectory and compare efficiency ratios."""
    methods = list(methods)
    if not methods:
        raise ConfigError("method list is empty", path="methods")
    results = {}
    for m in methods:
        if m not in ALL_METHODS:
            raise ConfigError(f"unknown method {m!r}", path="methods")
        tr = run_scenario(replace(cfg, method=m))
        ratio = tr.ratio
        sel = np.ones(len(tr), bool) if mean_window is None else tr.window(*mean_window)
        results[m] = MethodResult(m, tr, ratio_settling_time(tr), float(np.mean(ratio[sel])),
                                  float(ratio[-1]))
    return ComparisonReport(results)


# ---------------------------------------------------------------- sweeps


def overshoot_sweep(bias_grid_db, k_f_values, t_s=1e-6, t_p=1e-9, r0_db=-30.0, y0_dbw=-140.0,
                    g0_db=0.0):
    """Start-up extremum against total initial disturbance g0 + b for several K_F."""
    plant = control.PlantParams(t_p=t_p, y0_dbw=y0_dbw)
    rows = []
    for kf in k_f_values:
        c0 = control.ControllerParams(k_f=kf, k_i=5 * kf / t_s, b_db=0.0)
        for gb in bias_grid_db:
            c = replace(c0, b_db=gb - g0_db)
            try:
                ext = control.startup_extremum(c, plant, r0_db, g0_db, y0_dbw)
                rows.append((kf, gb, ext.y_dbw - r0_db, ext.kind))
            except control.NoExtremumError:
                rows.append((kf, gb, float("nan"), "none"))
            except control.NonOverdampedError:
                rows.append((kf, gb, float("nan"), "not-overdamped"))
    return rows


@dataclass
class SweepTable:
    header: tuple
    rows: list
    summary: dict = field(default_factory=dict)

    def to_csv(self):
        return table_to_csv(self.header, self.rows)


def run_sweep(spec):
    """Dispatch a sweep specification (kind: bias, gain or regression)."""
    kind = spec.get("kind")
    if kind == "bias":
        grid = np.asarray(spec.get("g0_plus_b_db", np.arange(-160.0, 40.0 + 1e-9, 5.0)))
        if grid.size == 0:
            raise ConfigError("sweep grid is empty", path="g0_plus_b_db")
        kfs = spec.get("k_f", [0.25, 0.5, 1.0, 2.0, 4.0])
        rows = overshoot_sweep(grid, kfs, t_s=spec.get("t_s", 1e-6), t_p=spec.get("t_p", 1e-9),
                               r0_db=spec.get("r0_db", -30.0), y0_dbw=spec.get("y0_dbw", -140.0))
        return SweepTable(("k_f", "g0_plus_b_db", "overshoot_db", "extremum"), rows)
    if kind == "gain":
        from .channel import random_channel

        rng = as_rng(spec.get("seed", 0))
        ch = random_channel(4, 4, rng)
        xi = eig_analysis(ch).xi_max
        marg = -20 * np.log10(xi)
        span = spec.get("span_db", 10.0)
        stepdb = spec.get("step_db", 0.5)
        offs = np.arange(-span, span + 1e-9, stepdb)
        if offs.size == 0:
            raise ConfigError("sweep grid is empty", path="span_db")
        sw = loop.gain_sweep(ch, loop.LoopParams(), marg + offs,
                             spec.get("steps_per_point", 2000), spec.get("rx_saturation_w", 10.0),
                             rng)
        rows = [(float(g), float(g - marg), float(e)) for g, e in zip(sw.lg_db, sw.efficiency)]
        return SweepTable(("lg_db", "offset_from_marginal_db", "efficiency"), rows,
                          {"marginal_db": sw.marginal_db, "peak_db": sw.peak_db,
                           "noise_baseline": sw.noise_baseline})
    if kind == "regression":
        n = spec.get("n_channels", 30)
        res = loop.marginal_regression(n, spec.get("seed", 0))
        rows = [(float(a), float(b)) for a, b in zip(res.inv_xi_db, res.lg_db)]
        return SweepTable(("inv_xi_max_db", "marginal_lg_db"), rows,
                          {"slope": res.slope, "intercept": res.intercept, "r2": res.r2})
    raise ConfigError(f"unknown sweep kind {kind!r}; expected bias, gain or regression",
                      path="kind")


def table_to_csv(header, rows):
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(repr(x) if isinstance(x, float) else str(x) for x in r))
    return "\n".join(lines) + "\n"
