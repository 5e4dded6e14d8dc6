import numpy as np
import pytest

from bsrdaa.channel import ChannelSnapshot, channel_to_dict, eig_analysis
from bsrdaa.errors import ConfigError
from bsrdaa.trajectory import (
    ArrayPairSpec,
    ObstructionTransit,
    Revolve,
    Scripted,
    Static,
    trajectory_from_config,
)


def test_reference_arrays():
    spec = ArrayPairSpec()
    rx = spec.receiver()
    tx = spec.generator(0.0)
    assert rx.n_elements == tx.n_elements == 4
    np.testing.assert_allclose(rx.center, 0.0, atol=1e-15)
    np.testing.assert_allclose(tx.center, [0, 0, 0.2], atol=1e-15)
    d = np.linalg.norm(rx.element_positions[0] - rx.element_positions[1])
    assert d == pytest.approx(0.0625)
    off = spec.generator(np.radians(40.0)).center
    assert np.linalg.norm(off) == pytest.approx(0.2)


def test_static_is_time_invariant_and_strongest_when_aligned():
    aligned = Static(angle_deg=0.0)
    offset = Static(angle_deg=40.0)
    a, b = aligned.sample(0.0), aligned.sample(5e-6)
    np.testing.assert_array_equal(a.s21, b.s21)
    assert b.timestamp == 5e-6
    xa = eig_analysis(a).xi_max
    xo = eig_analysis(offset.sample(0.0)).xi_max
    assert 0 < xo < xa < 1


def test_revolve_profile():
    rv = Revolve()
    assert rv.angle_deg(0.0) == 60.0
    assert rv.angle_deg(112.5e-6) == pytest.approx(30.0)
    assert rv.angle_deg(225e-6) == 0.0
    assert rv.angle_deg(1e-3) == 0.0
    np.testing.assert_allclose(rv.sample(112.5e-6).s21, Static(angle_deg=30.0).sample(0).s21,
                               rtol=1e-12)
    with pytest.raises(ConfigError):
        Revolve(sweep_s=0.0)


def test_revolve_changes_slowly_per_loop_time():
    rv = Revolve()
    step = rv.max_step_change(2e-6, 26.33e-9)
    scale = np.max(np.abs(rv.sample(0.0).s21))
    assert 0 < step < 1e-3 * scale


def test_obstruction_transit_dips_and_recovers():
    ob = ObstructionTransit()
    t_mid = 0.09 / 800.0
    x0 = eig_analysis(ob.sample(0.0)).xi_max
    xm = eig_analysis(ob.sample(t_mid)).xi_max
    x1 = eig_analysis(ob.sample(225e-6)).xi_max
    clear = eig_analysis(Static().sample(0.0)).xi_max
    assert xm < 0.5 * clear
    assert x0 == pytest.approx(clear, rel=0.05)
    assert x1 == pytest.approx(clear, rel=0.05)
    assert ob.has_geometry


def test_scripted_interpolates_linearly():
    a = ChannelSnapshot(np.diag([0.6, 0.2]).astype(complex), timestamp=0.0)
    b = ChannelSnapshot(np.diag([0.2, 0.6]).astype(complex), timestamp=1e-6)
    tr = Scripted([b, a])
    np.testing.assert_allclose(tr.sample(0.5e-6).s21, np.diag([0.4, 0.4]))
    np.testing.assert_array_equal(tr.sample(-1.0).s21, a.s21)
    np.testing.assert_array_equal(tr.sample(2e-6).s21, b.s21)
    assert not tr.has_geometry
    with pytest.raises(ConfigError):
        tr.geometry(0.0)
    with pytest.raises(ConfigError):
        Scripted([])
    with pytest.raises(ConfigError):
        Scripted([a, a])


def test_trajectory_from_config():
    assert isinstance(trajectory_from_config({"kind": "static", "angle_deg": 10}), Static)
    rv = trajectory_from_config({"kind": "revolve", "start_deg": 20, "end_deg": 10, "sweep_s": 1e-6})
    assert rv.angle_deg(1e-6) == 10
    ob = trajectory_from_config({"kind": "obstruction-transit",
                                 "obstruction": {"attenuation": 0.5}})
    assert ob.obstruction.attenuation == 0.5
    snap = channel_to_dict(ChannelSnapshot(np.diag([0.5, 0.1]).astype(complex)))
    sc = trajectory_from_config({"kind": "scripted",
                                 "snapshots": [{**snap, "timestamp_s": 0.0},
                                               {**snap, "timestamp_s": 1e-6}]})
    assert sc.sample(0.3e-6).s21[0, 0] == pytest.approx(0.5)
    with pytest.raises(ConfigError):
        trajectory_from_config({"kind": "spiral"})
    with pytest.raises(ConfigError):
        trajectory_from_config({"kind": "static", "arrays": {"colour": 1}})
