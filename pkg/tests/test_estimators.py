import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from bsrdaa.channel import efficiency, eig_analysis, random_channel
from bsrdaa.errors import ConfigError, DimensionError
from bsrdaa.estimators import (
    BeamModeAnalyzer,
    EigenBeamformer,
    IterativeSuperpositionBeamformer,
    PilotBeamformer,
    PositionTrackingBeamformer,
    RetrodirectiveLoopBeamformer,
)
from bsrdaa.trajectory import ArrayPairSpec, Static


@pytest.fixture
def channel():
    return random_channel(4, 4, np.random.default_rng(21))


def test_mode_analyzer_round_trip(channel):
    an = BeamModeAnalyzer().fit(channel.s21)
    rng = np.random.default_rng(0)
    V = rng.standard_normal((5, 4)) + 1j * rng.standard_normal((5, 4))
    W = an.transform(V)
    np.testing.assert_allclose(an.inverse_transform(W), V, atol=1e-12)
    np.testing.assert_allclose(an.predict(V), [efficiency(channel, v) for v in V])
    assert an.score(an.a_vecs_[:, :1].T) == pytest.approx(an.xi_[0])
    assert an.n_features_in_ == 4
    with pytest.raises(DimensionError):
        an.transform(np.ones((2, 3)))


def test_unfitted_raises():
    with pytest.raises(NotFittedError):
        BeamModeAnalyzer().transform(np.ones(4))
    with pytest.raises(NotFittedError):
        EigenBeamformer().predict(np.eye(2) * 0.5)


def test_params_and_clone():
    est = RetrodirectiveLoopBeamformer(n_steps=50, random_state=3)
    assert est.get_params() == {"n_steps": 50, "random_state": 3}
    twin = clone(est).set_params(n_steps=60)
    assert twin.n_steps == 60 and est.n_steps == 50


def test_beamformer_scores(channel):
    assert EigenBeamformer().fit(channel).score() == pytest.approx(1.0, abs=1e-12)
    loop_bf = RetrodirectiveLoopBeamformer(n_steps=400, random_state=0).fit(channel)
    assert loop_bf.score() == pytest.approx(1.0, abs=1e-6)
    nm = IterativeSuperpositionBeamformer(max_iter=3000, xtol=1e-7).fit(channel)
    assert nm.score() > 0.999
    pilot = PilotBeamformer().fit(channel)
    assert 0 < pilot.score() < 1.0
    xi = eig_analysis(channel).xi_max
    assert pilot.efficiency_ == pytest.approx(pilot.score() * xi)


def test_position_tracking_estimator():
    spec = ArrayPairSpec()
    ch = Static(angle_deg=40.0).sample(0.0)
    est = PositionTrackingBeamformer(tx_geometry=spec.generator(np.radians(40.0)))
    s = est.fit(ch).score()
    assert 0.5 < s < 0.99
    other = Static(angle_deg=0.0).sample(0.0)
    assert est.predict(other) == pytest.approx(efficiency(other, est.weights_))
    with pytest.raises(ConfigError):
        PositionTrackingBeamformer().fit(ch)
