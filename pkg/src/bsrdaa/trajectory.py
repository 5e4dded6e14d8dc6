"""Time-varying channels.

Each trajectory exposes ``sample(t) -> ChannelSnapshot``.  Geometric kinds
also expose ``geometry(t) -> (tx, rx)`` so position-based beam steering can
see where the arrays are.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import (
    DEFAULT_RANGE,
    DEFAULT_SPACING,
    DEFAULT_WAVELENGTH,
    ChannelSnapshot,
    Obstruction,
    channel_from_dict,
    planar_array,
    synth_channel,
)
from .errors import ConfigError

KINDS = ("static", "revolve", "obstruction-transit", "scripted")


@dataclass(frozen=True)
class ArrayPairSpec:
    """Shared layout of the facing generator/receiver array pair."""

    nx: int = 2
    ny: int = 2
    spacing: float = DEFAULT_SPACING
    range_m: float = DEFAULT_RANGE
    wavelength: float = DEFAULT_WAVELENGTH
    element_gain: float = 1.5
    pattern_exponent: float = 1.0
    z0: float = 50.0

    def receiver(self):
        return planar_array(
            self.nx, self.ny, self.spacing, (0.0, 0.0, 0.0), (0.0, 0.0, 1.0),
            self.element_gain, self.wavelength, self.pattern_exponent,
        )

    def generator(self, angle_rad=0.0):
        # the generator keeps its orientation and slides along an arc, so at
        # nonzero angle the receiver sits off its boresight
        c = self.range_m * np.array([np.sin(angle_rad), 0.0, np.cos(angle_rad)])
        return planar_array(
            self.nx, self.ny, self.spacing, c, (0.0, 0.0, -1.0),
            self.element_gain, self.wavelength, self.pattern_exponent,
        )


class ChannelTrajectory:
    kind = "abstract"

    def sample(self, t):
        raise NotImplementedError

    def geometry(self, t):
        raise ConfigError(f"trajectory kind '{self.kind}' carries no array geometry")

    @property
    def has_geometry(self):
        return False

    def max_step_change(self, duration, dt):
        """Largest entrywise |S21(t+dt) - S21(t)| over a grid spanning ``duration``."""
        ts = np.arange(0.0, duration, dt)
        prev = self.sample(0.0).s21
        worst = 0.0
        for t in ts[1:]:
            cur = self.sample(float(t)).s21
            worst = max(worst, float(np.max(np.abs(cur - prev))))
            prev = cur
        return worst


@dataclass
class Static(ChannelTrajectory):
    """Fixed arrays, optionally with the generator displaced by ``angle_deg``."""

    arrays: ArrayPairSpec = field(default_factory=ArrayPairSpec)
    angle_deg: float = 0.0
    kind = "static"

    def __post_init__(self):
        self._tx = self.arrays.generator(np.radians(self.angle_deg))
        self._rx = self.arrays.receiver()
        self._ch = synth_channel(self._tx, self._rx, z0=self.arrays.z0)

    @property
    def has_geometry(self):
        return True

    def geometry(self, t):
        return self._tx, self._rx

    def sample(self, t):
        return self._ch.with_timestamp(t)


@dataclass
class Revolve(ChannelTrajectory):
    """Generator swept along an arc of constant range, linear in angle.

    The angle moves from ``start_deg`` to ``end_deg`` over ``sweep_s`` and
    holds thereafter.
    """

    arrays: ArrayPairSpec = field(default_factory=ArrayPairSpec)
    start_deg: float = 60.0
    end_deg: float = 0.0
    sweep_s: float = 225e-6
    kind = "revolve"

    def __post_init__(self):
        if not self.sweep_s > 0:
            raise ConfigError("sweep duration must be positive", path="trajectory.sweep_s")
        self._rx = self.arrays.receiver()

    @property
    def has_geometry(self):
        return True

    def angle_deg(self, t):
        frac = min(max(t / self.sweep_s, 0.0), 1.0)
        return self.start_deg + (self.end_deg - self.start_deg) * frac

    def geometry(self, t):
        return self.arrays.generator(np.radians(self.angle_deg(t))), self._rx

    def sample(self, t):
        tx, rx = self.geometry(t)
        return synth_channel(tx, rx, z0=self.arrays.z0, timestamp=t)


def default_blocker():
    # 50 mm square at mid-range, crossing the link sideways
    return Obstruction(
        center=(-0.09, 0.0, DEFAULT_RANGE / 2),
        half_extents=(0.025, 0.025),
        attenuation=0.05,
        velocity=(800.0, 0.0, 0.0),
        edge_softness=0.02,
    )


@dataclass
class ObstructionTransit(ChannelTrajectory):
    """Aligned arrays with a blocker moving through the link."""

    arrays: ArrayPairSpec = field(default_factory=ArrayPairSpec)
    obstruction: Obstruction = field(default_factory=default_blocker)
    angle_deg: float = 0.0
    kind = "obstruction-transit"

    def __post_init__(self):
        self._tx = self.arrays.generator(np.radians(self.angle_deg))
        self._rx = self.arrays.receiver()

    @property
    def has_geometry(self):
        return True

    def geometry(self, t):
        return self._tx, self._rx

    def sample(self, t):
        return synth_channel(
            self._tx, self._rx, obstruction=self.obstruction.at(t),
            z0=self.arrays.z0, timestamp=t,
        )


@dataclass
class Scripted(ChannelTrajectory):
    """Piecewise-linear interpolation between timestamped snapshots."""

    snapshots: list = field(default_factory=list)
    kind = "scripted"

    def __post_init__(self):
        if not self.snapshots:
            raise ConfigError("scripted trajectory needs at least one snapshot",
                              path="trajectory.snapshots")
        snaps = sorted(self.snapshots, key=lambda s: s.timestamp)
        ts = np.array([s.timestamp for s in snaps])
        if np.any(np.diff(ts) <= 0):
            raise ConfigError("snapshot timestamps must be distinct", path="trajectory.snapshots")
        shapes = {s.s21.shape for s in snaps}
        if len(shapes) != 1:
            raise ConfigError("snapshots differ in shape", path="trajectory.snapshots")
        self._snaps = snaps
        self._ts = ts

    def sample(self, t):
        ts = self._ts
        if t <= ts[0]:
            return self._snaps[0].with_timestamp(t)
        if t >= ts[-1]:
            return self._snaps[-1].with_timestamp(t)
        i = int(np.searchsorted(ts, t, side="right")) - 1
        w = (t - ts[i]) / (ts[i + 1] - ts[i])
        s = (1 - w) * self._snaps[i].s21 + w * self._snaps[i + 1].s21
        # convex combination of passive matrices stays passive
        return ChannelSnapshot(s, z0=self._snaps[i].z0, timestamp=t)


def _arrays_from(d):
    allowed = set(ArrayPairSpec.__dataclass_fields__)
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown array fields {sorted(extra)}", path="trajectory.arrays")
    return ArrayPairSpec(**d)


def trajectory_from_config(cfg):
    """Build a trajectory from its JSON-style description."""
    kind = cfg.get("kind")
    arrays = _arrays_from(cfg.get("arrays", {}))
    if kind == "static":
        return Static(arrays, cfg.get("angle_deg", 0.0))
    if kind == "revolve":
        return Revolve(arrays, cfg.get("start_deg", 60.0), cfg.get("end_deg", 0.0),
                       cfg.get("sweep_s", 225e-6))
    if kind == "obstruction-transit":
        ob = cfg.get("obstruction")
        blocker = default_blocker() if ob is None else Obstruction(
            center=tuple(ob.get("center", (-0.09, 0.0, arrays.range_m / 2))),
            half_extents=tuple(ob.get("half_extents", (0.025, 0.025))),
            attenuation=ob.get("attenuation", 0.05),
            velocity=tuple(ob.get("velocity", (800.0, 0.0, 0.0))),
            normal=tuple(ob.get("normal", (0.0, 0.0, 1.0))),
            edge_softness=ob.get("edge_softness", 0.02),
        )
        return ObstructionTransit(arrays, blocker, cfg.get("angle_deg", 0.0))
    if kind == "scripted":
        snaps = []
        for i, entry in enumerate(cfg.get("snapshots", [])):
            ch = channel_from_dict(entry)
            snaps.append(ch.with_timestamp(float(entry.get("timestamp_s", 0.0))))
        return Scripted(snaps)
    raise ConfigError(f"unknown trajectory kind {kind!r}; expected one of {KINDS}",
                      path="trajectory.kind")
