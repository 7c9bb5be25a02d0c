"""Input validation helpers.

scikit-learn's ``check_array`` rejects complex input, so the array checks
used by the estimators live here instead.
"""

import numbers

import numpy as np

from .exceptions import DomainError


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise DomainError(f"{name} must be a positive finite real, got {value!r}")
    return float(value)


def check_int(value, name, minimum=None, even=False):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise DomainError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise DomainError(f"{name} must be >= {minimum}, got {value}")
    if even and value % 2:
        raise DomainError(f"{name} must be even, got {value}")
    return value


def check_positions(positions, name="positions"):
    x = np.asarray(positions, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise DomainError(f"{name} must be a non-empty 1D sequence")
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{name} must be finite")
    return x


def check_complex_matrix(a, name, shape=None):
    a = np.asarray(a)
    if a.ndim != 2:
        raise DomainError(f"{name} must be 2D, got shape {a.shape}")
    if shape is not None:
        for got, want in zip(a.shape, shape):
            if want is not None and got != want:
                raise DomainError(f"{name} has shape {a.shape}, expected {shape}")
    a = a.astype(complex, copy=False)
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} contains non-finite entries")
    return a


def check_hermitian(a, name, tol=1e-10, psd=False):
    """Validate a square Hermitian (optionally PSD) matrix; tolerance is relative."""
    a = check_complex_matrix(a, name)
    if a.shape[0] != a.shape[1]:
        raise DomainError(f"{name} must be square, got {a.shape}")
    scale = max(np.linalg.norm(a), 1.0)
    if np.linalg.norm(a - a.conj().T) > tol * scale:
        raise DomainError(f"{name} is not Hermitian")
    if psd:
        w = np.linalg.eigvalsh((a + a.conj().T) / 2)
        if w.min() < -tol * scale:
            raise DomainError(f"{name} is not positive semidefinite (min eig {w.min():.3e})")
    return a


def check_snapshots(X, n_sensors=None):
    """Snapshots in scikit-learn orientation: (n_snapshots, n_sensors)."""
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[np.newaxis, :]
    X = check_complex_matrix(X, "X")
    if n_sensors is not None and X.shape[1] != n_sensors:
        raise DomainError(f"X has {X.shape[1]} sensor columns, expected {n_sensors}")
    if X.shape[0] < 1:
        raise DomainError("X needs at least one snapshot")
    return X
