"""Input validation helpers for complex-valued arrays.

scikit-learn's ``check_array`` rejects complex input, so the estimators and
engine functions share these instead.
"""
import numpy as np

from .errors import DimensionError, ZeroVectorError


def check_complex_matrix(X, name="matrix"):
    X = np.asarray(X)
    if X.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise DimensionError(f"{name} must have at least one row and column")
    X = X.astype(complex)
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    return X


def check_complex_vector(v, size=None, name="vector", allow_zero=True):
    v = np.asarray(v).astype(complex)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {v.shape}")
    if size is not None and v.shape[0] != size:
        raise DimensionError(f"{name} has length {v.shape[0]}, expected {size}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    if not allow_zero and not np.any(v):
        raise ZeroVectorError(f"{name} must be nonzero")
    return v


def check_excitations(V, size, name="excitations"):
    """Accept one excitation vector or a stack of them (rows)."""
    V = np.asarray(V).astype(complex)
    if V.ndim == 1:
        V = V[None, :]
    if V.ndim != 2 or V.shape[1] != size:
        raise DimensionError(f"{name} must have shape (n_samples, {size}), got {V.shape}")
    return V


def as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
