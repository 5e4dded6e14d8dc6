"""scikit-learn style wrappers.

``BeamModeAnalyzer`` learns a channel's beam modes and maps excitations to
modal weights.  The beamformers learn one excitation vector from a channel;
``score`` reports the fraction of the maximum efficiency they achieve.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_rng, check_excitations
from .baselines import position_tracking_weights, ss_rdaa_weights, weights_from_params
from .channel import ChannelSnapshot, decompose_input, eig_analysis, efficiency
from .errors import ConfigError
from .loop import LoopParams, noise_sample, run_loop
from .optimize import NelderMeadOptions, nelder_mead_optimize


def _as_channel(X):
    if isinstance(X, ChannelSnapshot):
        return X
    return ChannelSnapshot(np.asarray(X))


class BeamModeAnalyzer(TransformerMixin, BaseEstimator):
    """Eigen-decomposition of a channel's generator-side Gram matrix.

    ``fit`` takes an S21 matrix (or snapshot); ``transform`` takes
    excitations as rows and returns their modal weights.
    """

    def fit(self, X, y=None):
        ch = _as_channel(X)
        ea = eig_analysis(ch)
        self.channel_ = ch
        self.eig_ = ea
        self.xi_ = np.array(ea.xi)
        self.a_vecs_ = np.array(ea.a_vecs)
        self.b_vecs_ = np.array(ea.b_vecs)
        self.n_features_in_ = ch.n
        return self

    def transform(self, X):
        check_is_fitted(self, "eig_")
        V = check_excitations(X, self.n_features_in_)
        return np.array([decompose_input(self.eig_, v) for v in V])

    def inverse_transform(self, W):
        check_is_fitted(self, "eig_")
        W = check_excitations(W, self.n_features_in_, name="weights")
        return W @ self.a_vecs_.T

    def predict(self, X):
        """Efficiency of each excitation row."""
        check_is_fitted(self, "eig_")
        V = check_excitations(X, self.n_features_in_)
        return np.array([efficiency(self.channel_, v) for v in V])

    def score(self, X, y=None):
        """Mean efficiency of the excitations."""
        return float(np.mean(self.predict(X)))


class _Beamformer(BaseEstimator):
    def _weights(self, ch):
        raise NotImplementedError

    def fit(self, X, y=None):
        ch = _as_channel(X)
        w = np.asarray(self._weights(ch), dtype=complex)
        self.weights_ = w / np.linalg.norm(w)
        self.xi_max_ = eig_analysis(ch).xi_max
        self.efficiency_ = efficiency(ch, self.weights_)
        self.n_features_in_ = ch.n
        return self

    def predict(self, X):
        """Efficiency the learned excitation achieves on channel ``X``."""
        check_is_fitted(self, "weights_")
        return efficiency(_as_channel(X), self.weights_)

    def score(self, X=None, y=None):
        """Efficiency over the channel maximum (the fitted channel if ``X`` is None)."""
        check_is_fitted(self, "weights_")
        if X is None:
            return self.efficiency_ / self.xi_max_
        ch = _as_channel(X)
        return self.predict(ch) / eig_analysis(ch).xi_max


class EigenBeamformer(_Beamformer):
    """The principal beam mode itself."""

    def _weights(self, ch):
        return eig_analysis(ch).a_max


class PositionTrackingBeamformer(_Beamformer):
    def __init__(self, tx_geometry=None, rx_position=(0.0, 0.0, 0.0)):
        self.tx_geometry = tx_geometry
        self.rx_position = rx_position

    def _weights(self, ch):
        if self.tx_geometry is None:
            raise ConfigError("tx_geometry is required", path="tx_geometry")
        if self.tx_geometry.n_elements != ch.n:
            raise ConfigError("geometry and channel disagree on element count", path="tx_geometry")
        return position_tracking_weights(self.tx_geometry, self.rx_position)


class PilotBeamformer(_Beamformer):
    def __init__(self, pilot_element=0):
        self.pilot_element = pilot_element

    def _weights(self, ch):
        return ss_rdaa_weights(ch, self.pilot_element)


class RetrodirectiveLoopBeamformer(_Beamformer):
    """Excitation the two-sided loop settles on when held at marginal gain."""

    def __init__(self, n_steps=500, random_state=None):
        self.n_steps = n_steps
        self.random_state = random_state

    def _weights(self, ch):
        rng = as_rng(self.random_state)
        xi = eig_analysis(ch).xi_max
        p = LoopParams(gain_g=1.0 / xi, loss_l=1.0, rx_saturation_w=None)
        states = run_loop(ch, p, noise_sample(p, ch.m, rng), self.n_steps)
        return states[-1].v2f


class IterativeSuperpositionBeamformer(_Beamformer):
    """Nelder-Mead search over per-element phase and log-amplitude."""

    def __init__(self, max_iter=2000, xtol=1e-6, initial_edge=0.5):
        self.max_iter = max_iter
        self.xtol = xtol
        self.initial_edge = initial_edge

    def _weights(self, ch):
        n = ch.n
        opts = NelderMeadOptions(initial_edge=self.initial_edge, xtol=self.xtol, ftol=1e-14,
                                 max_iter=self.max_iter)
        res = nelder_mead_optimize(lambda x: -efficiency(ch, weights_from_params(x, n)),
                                   np.zeros(2 * n), opts)
        self.n_iter_ = res.n_iter
        return weights_from_params(res.x, n)
