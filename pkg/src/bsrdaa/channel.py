"""Wireless channel model: array geometry, S21 synthesis, beam modes, file I/O.

Conventions
-----------
``s21`` has shape ``(N, M)``: row index is the generator port, column index
the receiver port.  A pilot ``v1f`` (length M) arrives at the generator as
``s21 @ v1f``; a generator excitation ``v2f`` (length N) arrives at the
receiver as ``s21.T @ v2f`` (reciprocal channel).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erf

from ._validation import as_rng, check_complex_matrix, check_complex_vector
from .errors import (
    DimensionError,
    GeometryError,
    NumericalError,
    ParseError,
    PassivityError,
    RankError,
    ZeroVectorError,
)

SPEED_OF_LIGHT = 299_792_458.0

# 2.4 GHz carrier; the reference arrays are 2x2 at half-wavelength pitch.
DEFAULT_WAVELENGTH = 0.125
DEFAULT_SPACING = 0.0625
DEFAULT_RANGE = 0.2

RANK_COND_LIMIT = 1e12
DEGENERACY_RTOL = 1e-9


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ArrayGeometry:
    """Element layout of one antenna array.

    ``pattern_exponent`` q shapes each element's amplitude pattern as
    ``cos(theta)**q`` about ``element_normal``; q = 0 is isotropic.
    """

    element_positions: np.ndarray
    element_gain: float = 1.0
    wavelength: float = DEFAULT_WAVELENGTH
    element_normal: tuple = (0.0, 0.0, 1.0)
    pattern_exponent: float = 0.0

    def __post_init__(self):
        pos = np.asarray(self.element_positions, dtype=float)
        if pos.ndim == 1 and pos.shape[0] == 3:
            pos = pos[None, :]
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise GeometryError(f"element_positions must be (K, 3), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise GeometryError("element_positions must be finite")
        if pos.shape[0] > 1:
            d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=2)
            d[np.diag_indices_from(d)] = np.inf
            if d.min() <= 0:
                raise GeometryError("array elements must be at distinct positions")
        if not self.wavelength > 0:
            raise GeometryError("wavelength must be positive")
        if not self.element_gain > 0:
            raise GeometryError("element_gain must be positive")
        if self.pattern_exponent < 0:
            raise GeometryError("pattern_exponent must be >= 0")
        n = np.asarray(self.element_normal, dtype=float)
        if n.shape != (3,) or not np.linalg.norm(n) > 0:
            raise GeometryError("element_normal must be a nonzero 3-vector")
        object.__setattr__(self, "element_positions", _readonly(pos))
        object.__setattr__(self, "element_normal", tuple(n / np.linalg.norm(n)))

    @property
    def n_elements(self):
        return self.element_positions.shape[0]

    @property
    def center(self):
        return self.element_positions.mean(axis=0)

    def translated(self, offset):
        return ArrayGeometry(
            self.element_positions + np.asarray(offset, dtype=float),
            self.element_gain,
            self.wavelength,
            self.element_normal,
            self.pattern_exponent,
        )


def planar_array(
    nx=2,
    ny=2,
    spacing=DEFAULT_SPACING,
    center=(0.0, 0.0, 0.0),
    facing=(0.0, 0.0, 1.0),
    element_gain=1.0,
    wavelength=DEFAULT_WAVELENGTH,
    pattern_exponent=0.0,
):
    """Rectangular ``nx`` x ``ny`` array in the plane normal to ``facing``."""
    n = np.asarray(facing, dtype=float)
    n = n / np.linalg.norm(n)
    # in-plane axes: keep y as the second axis whenever the normal allows it
    ref = np.array([0.0, 1.0, 0.0]) if abs(n[1]) < 0.9 else np.array([1.0, 0.0, 0.0])
    ex = np.cross(ref, n)
    ex /= np.linalg.norm(ex)
    ey = np.cross(n, ex)
    xs = (np.arange(nx) - (nx - 1) / 2) * spacing
    ys = (np.arange(ny) - (ny - 1) / 2) * spacing
    pts = [np.asarray(center, float) + x * ex + y * ey for x in xs for y in ys]
    return ArrayGeometry(np.array(pts), element_gain, wavelength, tuple(n), pattern_exponent)


@dataclass(frozen=True)
class Obstruction:
    """Rectangular blocker lying in the plane through ``center`` normal to ``normal``.

    A path whose crossing point falls inside the rectangle is scaled by
    ``attenuation``.  ``edge_softness`` > 0 blurs the rectangle edge with an
    erf profile so the channel varies continuously as the blocker moves.
    """

    center: tuple
    half_extents: tuple = (0.025, 0.025)
    attenuation: float = 0.05
    velocity: tuple = (0.0, 0.0, 0.0)
    normal: tuple = (0.0, 0.0, 1.0)
    edge_softness: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.attenuation <= 1.0:
            raise GeometryError("attenuation must lie in [0, 1]")
        he = tuple(float(h) for h in self.half_extents)
        if len(he) != 2 or min(he) <= 0:
            raise GeometryError("half_extents must be two positive sizes")
        if self.edge_softness < 0:
            raise GeometryError("edge_softness must be >= 0")
        object.__setattr__(self, "half_extents", he)
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "velocity", tuple(float(c) for c in self.velocity))

    def at(self, t):
        """The blocker displaced by ``velocity * t``."""
        c = np.asarray(self.center) + np.asarray(self.velocity) * t
        return Obstruction(
            tuple(c), self.half_extents, self.attenuation, self.velocity,
            self.normal, self.edge_softness,
        )

    def transmission(self, a, b):
        """Amplitude factor for straight segments a[i] -> b[j], shape (len(a), len(b))."""
        n = np.asarray(self.normal, float)
        n = n / np.linalg.norm(n)
        c = np.asarray(self.center, float)
        ref = np.array([0.0, 1.0, 0.0]) if abs(n[1]) < 0.9 else np.array([1.0, 0.0, 0.0])
        ex = np.cross(ref, n)
        ex /= np.linalg.norm(ex)
        ey = np.cross(n, ex)
        ha = (a - c) @ n
        hb = (b - c) @ n
        denom = ha[:, None] - hb[None, :]
        crosses = (ha[:, None] * hb[None, :]) < 0
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(crosses, ha[:, None] / denom, 0.0)
        p = a[:, None, :] + s[..., None] * (b[None, :, :] - a[:, None, :])
        u = (p - c) @ ex
        v = (p - c) @ ey
        hx, hy = self.half_extents
        if self.edge_softness > 0:
            w = self.edge_softness
            wu = 0.5 * (erf((hx - u) / w) + erf((hx + u) / w))
            wv = 0.5 * (erf((hy - v) / w) + erf((hy + v) / w))
            cover = wu * wv
        else:
            cover = ((np.abs(u) <= hx) & (np.abs(v) <= hy)).astype(float)
        cover = np.where(crosses, cover, 0.0)
        return 1.0 - (1.0 - self.attenuation) * cover


@dataclass(frozen=True)
class ChannelSnapshot:
    """Generator-to-receiver coupling matrix at one instant."""

    s21: np.ndarray
    z0: float = 50.0
    timestamp: float = 0.0

    def __post_init__(self):
        s = check_complex_matrix(self.s21, "s21")
        if not self.z0 > 0:
            raise ValueError("z0 must be positive")
        smax = np.linalg.norm(s, 2)
        if not smax < 1.0:
            raise PassivityError(f"largest singular value {smax:.6g} >= 1 (not passive)")
        object.__setattr__(self, "s21", _readonly(s))

    @property
    def n(self):
        return self.s21.shape[0]

    @property
    def m(self):
        return self.s21.shape[1]

    @property
    def sigma_max(self):
        return float(np.linalg.norm(self.s21, 2))

    @property
    def return_channel(self):
        """Receiver-bound channel; exactly the transpose (reciprocity)."""
        return self.s21.T

    def with_timestamp(self, t):
        return ChannelSnapshot(self.s21, self.z0, t)


@dataclass(frozen=True)
class EigenAnalysis:
    """Beam modes of a channel.

    Columns of ``a_vecs`` are eigenvectors of conj(S21) S21^T (generator side)
    with eigenvalues ``xi``; columns of ``b_vecs`` are eigenvectors of
    S21^H S21 (receiver side) with eigenvalues ``xi_rx``.  Both sorted
    descending.
    """

    xi: np.ndarray
    a_vecs: np.ndarray
    b_vecs: np.ndarray
    xi_rx: np.ndarray = field(default=None)

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        object.__setattr__(self, "xi", _readonly(xi))
        object.__setattr__(self, "a_vecs", _readonly(np.asarray(self.a_vecs, complex)))
        object.__setattr__(self, "b_vecs", _readonly(np.asarray(self.b_vecs, complex)))
        xr = xi if self.xi_rx is None else np.asarray(self.xi_rx, dtype=float)
        object.__setattr__(self, "xi_rx", _readonly(xr))

    @property
    def xi_max(self):
        return float(self.xi[0])

    @property
    def a_max(self):
        return self.a_vecs[:, 0]

    @property
    def b_max(self):
        return self.b_vecs[:, 0]

    @property
    def multiplicity(self):
        """Number of modes sharing the largest eigenvalue."""
        if self.xi_max == 0:
            return len(self.xi)
        return int(np.sum(np.abs(self.xi - self.xi_max) <= DEGENERACY_RTOL * self.xi_max))

    @property
    def max_subspace(self):
        return self.a_vecs[:, : self.multiplicity]

    @property
    def spectral_gap(self):
        """xi_2 / xi_max (0 for a single mode)."""
        if len(self.xi) < 2 or self.xi_max == 0:
            return 0.0
        return float(self.xi[self.multiplicity] / self.xi_max) if self.multiplicity < len(self.xi) else 1.0


def _propagation_matrix(tx, rx):
    diff = rx.element_positions[None, :, :] - tx.element_positions[:, None, :]
    dist = np.linalg.norm(diff, axis=2)
    return diff, dist


def _pattern(geom, unit_dirs):
    if geom.pattern_exponent == 0:
        return np.ones(unit_dirs.shape[:-1])
    cos = np.clip(unit_dirs @ np.asarray(geom.element_normal), 0.0, None)
    return cos ** geom.pattern_exponent


def synth_channel(tx, rx, obstruction=None, z0=50.0, timestamp=0.0):
    """Free-space coupling between two arrays.

    s_nm = g_tx g_rx * lambda / (4 pi d) * exp(-j 2 pi d / lambda), times the
    element patterns and the blocker transmission of the straight path.
    """
    if not np.isclose(tx.wavelength, rx.wavelength, rtol=1e-12):
        raise GeometryError("transmitter and receiver wavelengths differ")
    lam = tx.wavelength
    diff, dist = _propagation_matrix(tx, rx)
    if dist.min() <= lam / 10:
        raise GeometryError(
            f"arrays overlap: closest elements {dist.min():.4g} m apart (< lambda/10)"
        )
    unit = diff / dist[..., None]
    amp = tx.element_gain * rx.element_gain * lam / (4 * np.pi * dist)
    amp = amp * _pattern(tx, unit) * _pattern(rx, -unit)
    s = amp * np.exp(-2j * np.pi * dist / lam)
    if obstruction is not None:
        s = s * obstruction.transmission(tx.element_positions, rx.element_positions)
    smax = np.linalg.norm(s, 2)
    if not smax < 1.0:
        raise PassivityError(
            f"coupling law gives sigma_max = {smax:.4g} >= 1; geometry or gains unphysical"
        )
    return ChannelSnapshot(s, z0=z0, timestamp=timestamp)


def eig_analysis(ch):
    """Beam-mode decomposition via Hermitian eigensolvers on both Gram matrices."""
    s = ch.s21
    gram_tx = np.conj(s) @ s.T
    gram_rx = s.conj().T @ s
    try:
        wa, va = np.linalg.eigh(0.5 * (gram_tx + gram_tx.conj().T))
        wb, vb = np.linalg.eigh(0.5 * (gram_rx + gram_rx.conj().T))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    ia = np.argsort(wa)[::-1]
    ib = np.argsort(wb)[::-1]
    xi = np.clip(wa[ia], 0.0, None)
    xi_rx = np.clip(wb[ib], 0.0, None)
    return EigenAnalysis(xi, va[:, ia], vb[:, ib], xi_rx)


def efficiency(ch, v2f):
    """Power transfer efficiency of excitation ``v2f`` (Rayleigh quotient)."""
    v = check_complex_vector(v2f, ch.n, "v2f")
    den = np.vdot(v, v).real
    if den == 0:
        raise ZeroVectorError("v2f is zero; efficiency undefined")
    gram = np.conj(ch.s21) @ ch.s21.T
    return float(np.vdot(v, gram @ v).real / den)


def decompose_input(ea, v2f):
    """Weights ``w`` with ``v2f = a_vecs @ w``."""
    a = ea.a_vecs
    v = check_complex_vector(v2f, a.shape[0], "v2f")
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > RANK_COND_LIMIT:
        raise RankError(f"eigenbasis is rank deficient (condition number {cond:.3g})")
    return np.linalg.solve(a, v)


def modal_efficiency(xi, weights):
    """Efficiency as the xi-weighted average of modal powers."""
    p = np.abs(np.asarray(weights)) ** 2
    total = p.sum()
    if total == 0:
        raise ZeroVectorError("all modal weights are zero")
    return float(np.dot(np.asarray(xi), p) / total)


def alignment(ea, v2f):
    """Fraction |P v| / |v| of ``v2f`` lying in the maximum-efficiency eigenspace."""
    v = np.asarray(v2f, complex)
    nv = np.linalg.norm(v)
    if nv == 0:
        return 0.0
    q = ea.max_subspace
    return float(np.linalg.norm(q.conj().T @ v) / nv)


def random_channel(n=4, m=4, rng=None, sigma_max=None, z0=50.0):
    """Random passive channel with a prescribed (or uniform 0.2-0.9) sigma_max."""
    rng = as_rng(rng)
    s = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
    if sigma_max is None:
        sigma_max = rng.uniform(0.2, 0.9)
    s *= sigma_max / np.linalg.norm(s, 2)
    return ChannelSnapshot(s, z0=z0)


# ---------------------------------------------------------------- file I/O


def channel_to_dict(ch):
    return {
        "n": ch.n,
        "m": ch.m,
        "z0_ohm": float(ch.z0),
        "s21": [[[float(z.real), float(z.imag)] for z in row] for row in ch.s21],
    }


def channel_from_dict(data, line=None):
    if not isinstance(data, dict):
        raise ParseError("channel document must be a JSON object", line=line)
    for key in ("n", "m", "s21"):
        if key not in data:
            raise ParseError("missing dimension header" if key in "nm" else "missing matrix",
                             line=line, field=key)
    n, m = data["n"], data["m"]
    if not (isinstance(n, int) and isinstance(m, int)) or n < 1 or m < 1:
        raise ParseError("dimensions must be positive integers", line=line, field="n/m")
    rows = data["s21"]
    if not isinstance(rows, list) or len(rows) != n:
        raise ParseError(f"expected {n} rows", line=line, field="s21")
    s = np.empty((n, m), dtype=complex)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != m:
            raise ParseError(f"expected {m} entries", line=line, field=f"s21[{i}]")
        for j, entry in enumerate(row):
            if (not isinstance(entry, list) or len(entry) != 2
                    or not all(isinstance(x, (int, float)) for x in entry)):
                raise ParseError("entry must be [re, im]", line=line, field=f"s21[{i}][{j}]")
            s[i, j] = complex(entry[0], entry[1])
    z0 = data.get("z0_ohm", 50.0)
    if not isinstance(z0, (int, float)):
        raise ParseError("z0_ohm must be a number", line=line, field="z0_ohm")
    return ChannelSnapshot(s, z0=float(z0), timestamp=float(data.get("timestamp_s", 0.0)))


def save_channel(ch, path):
    # json emits shortest round-trip reprs, so load(save(x)) is bit-exact
    text = json.dumps(channel_to_dict(ch), indent=1)
    Path(path).write_text(text + "\n")


def load_channel(path):
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    return channel_from_dict(data)


__all__ = [
    "ArrayGeometry",
    "ChannelSnapshot",
    "DimensionError",
    "EigenAnalysis",
    "Obstruction",
    "alignment",
    "channel_from_dict",
    "channel_to_dict",
    "decompose_input",
    "eig_analysis",
    "efficiency",
    "load_channel",
    "modal_efficiency",
    "planar_array",
    "random_channel",
    "save_channel",
    "synth_channel",
]
