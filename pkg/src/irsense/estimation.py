"""Snapshot synthesis, MUSIC and array interpolation for DoA estimation.

The two estimators follow the scikit-learn conventions: constructor
arguments are stored verbatim, learned state gets a trailing underscore and
``X`` is always ``(n_snapshots, n_sensors)``. They compose in a
:class:`sklearn.pipeline.Pipeline`::

    interp = ArrayInterpolator(positions=x, wavelength=0.2, spacing=0.1).fit()
    doa = make_pipeline(interp, interp.music()).fit_predict(Y.T)

The module-level functions wrap the same machinery for callers that work
with ``K x T`` snapshot blocks and ``K x K`` covariances directly.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, TransformerMixin, clone
from sklearn.utils.validation import check_is_fitted

from ._validation import check_hermitian, check_int, check_positions, check_positive, check_snapshots
from .channel import channel_gains, ms_steering, optimal_beamformer, optimal_phase_shifts, ula_steering
from .exceptions import AmbiguityError, ConditioningError, DomainError, IrsenseError
from .geometry import SensorLayout

__all__ = [
    "Beta0Mode",
    "Normalization",
    "Pipeline",
    "SnapshotSet",
    "Spectrum",
    "VirtualArraySpec",
    "MUSIC",
    "ArrayInterpolator",
    "MonteCarloResult",
    "trial_seed",
    "synthesize_snapshots",
    "sample_covariance",
    "music_spectrum",
    "interpolate_virtual_array",
    "estimate_doa",
    "monte_carlo_rmse",
    "beampattern",
    "echo_power",
    "angle_grid",
]

DEFAULT_GRID_STEP = 0.01  # degrees


class Beta0Mode(enum.Enum):
    FIXED_UNIT = "fixed"
    SAMPLED = "sampled"


class Normalization(enum.Enum):
    LINEAR = "linear"
    PEAK_DB = "peak_db"


class Pipeline(enum.Enum):
    DIRECT = "direct"
    INTERPOLATED = "interpolated"


def angle_grid(step=DEFAULT_GRID_STEP, lo=-90.0, hi=90.0):
    """Uniform grid in degrees including both ends."""
    step = check_positive(step, "grid step")
    n = int(round((hi - lo) / step))
    # rounding keeps grid points at their decimal values, e.g. 59.99 rather than 59.990000000000002
    return np.round(lo + step * np.arange(n + 1), 12)


def _as_positions(layout):
    return layout.array if isinstance(layout, SensorLayout) else check_positions(layout)


def _steering_matrix(positions, angles_deg, wavelength):
    u = np.sin(np.deg2rad(np.asarray(angles_deg, dtype=float)))
    return np.exp(2j * np.pi / wavelength * np.outer(positions, u))


def _noise_subspace(R, n_sources):
    R = (R + R.conj().T) / 2
    w, V = np.linalg.eigh(R)  # ascending eigenvalues
    return w, V[:, : R.shape[0] - n_sources]


def _whitener(Q):
    """``Λ^-1/2 Uᴴ`` on the numerical range of a PSD noise covariance."""
    w, U = np.linalg.eigh((Q + Q.conj().T) / 2)
    keep = w > 1e-10 * w.max()
    return (U[:, keep] / np.sqrt(w[keep])).conj().T


def _music_values(noise_subspace, positions, angles_deg, wavelength, whitener=None):
    A = _steering_matrix(positions, angles_deg, wavelength)
    if whitener is not None:
        A = whitener @ A
    den = np.sum(np.abs(noise_subspace.conj().T @ A) ** 2, axis=0)
    # an exact null would give inf; clamp so the spectrum stays finite
    den = np.maximum(den, 1e-16 * max(den.max(), np.finfo(float).tiny))
    return 1.0 / den


# --- data containers ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SnapshotSet:
    """Received block ``Y`` with shape ``(K, T)`` and how it was generated."""

    Y: np.ndarray
    seed: object
    beta0_mode: Beta0Mode
    true_theta: float  # radians
    beta0: complex = 1.0

    @property
    def T(self):
        return self.Y.shape[1]


@dataclass(frozen=True, eq=False)
class Spectrum:
    angles: np.ndarray  # degrees
    values: np.ndarray
    normalization: Normalization = Normalization.LINEAR

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if angles.ndim != 1 or angles.shape != values.shape or angles.size == 0:
            raise DomainError("spectrum needs matching non-empty 1D angles and values")
        if not np.all(np.isfinite(values)):
            raise DomainError("spectrum values must be finite")
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "values", values)

    @property
    def peak_index(self):
        return int(np.argmax(self.values))

    @property
    def peak_angle(self):
        return float(self.angles[self.peak_index])

    @property
    def peak_value(self):
        return float(self.values[self.peak_index])

    def linear(self):
        if self.normalization is Normalization.LINEAR:
            return self.values
        return 10.0 ** (self.values / 10.0)

    def to_db(self):
        """Peak-normalised dB copy; its maximum is exactly 0 dB."""
        if self.normalization is Normalization.PEAK_DB:
            return self
        v = self.values
        db = 10.0 * np.log10(np.maximum(v, np.finfo(float).tiny) / v.max())
        db[self.peak_index] = 0.0
        return Spectrum(self.angles, db, Normalization.PEAK_DB)

    def width_3db(self):
        """Main-lobe width in degrees between the -3 dB crossings around the peak.

        Crossings are linearly interpolated in dB. A lobe that runs off the grid
        is measured up to the grid edge.
        """
        db = self.to_db().values
        a = self.angles
        i = self.peak_index
        cut = 10.0 * math.log10(0.5)

        def crossing(indices):
            prev = i
            for j in indices:
                if db[j] <= cut:
                    t = (db[prev] - cut) / (db[prev] - db[j])
                    return a[prev] + t * (a[j] - a[prev])
                prev = j
            return a[prev]

        right = crossing(range(i + 1, a.size))
        left = crossing(range(i - 1, -1, -1))
        return float(right - left)


@dataclass(frozen=True)
class VirtualArraySpec:
    """Uniform virtual array over ``span`` and the sector used to fit the map."""

    spacing: float
    span: tuple
    sector: tuple = (40.0, 80.0)  # degrees
    ridge: float = 1e-6
    sector_step: float = 0.1  # degrees

    def __post_init__(self):
        check_positive(self.spacing, "spacing")
        lo, hi = self.span
        if not hi > lo:
            raise DomainError(f"empty span {self.span}")
        s0, s1 = self.sector
        if not (s1 > s0 and -90 <= s0 and s1 <= 90):
            raise DomainError(f"sector must be a non-empty interval in [-90, 90], got {self.sector}")
        if self.ridge < 0:
            raise DomainError("ridge must be non-negative")

    @property
    def element_count(self):
        lo, hi = self.span
        return int(round((hi - lo) / self.spacing)) + 1

    @property
    def positions(self):
        return self.span[0] + self.spacing * np.arange(self.element_count)

    @classmethod
    def for_target(cls, spacing, D, theta_deg, half_width=20.0, **kw):
        """Sector centred on ``theta_deg`` and clipped to [-90, 90]."""
        sector = (max(-90.0, theta_deg - half_width), min(90.0, theta_deg + half_width))
        return cls(spacing, (0.0, D), sector, **kw)


# --- estimators --------------------------------------------------------------

class MUSIC(BaseEstimator):
    """MUSIC pseudo-spectrum over an arbitrary linear array.

    Parameters
    ----------
    positions : array-like of shape (n_sensors,)
        Sensor coordinates in metres.
    wavelength : float
    grid_step : float
        Angular grid step in degrees over ``angle_range``.
    angle_range : tuple of float
    n_sources : int
    noise_covariance : array-like of shape (n_sensors, n_sensors), optional
        Known noise covariance up to scale. When given, the covariance and
        the steering vectors are whitened on its range before the
        eigendecomposition, which is what interpolated data needs.
    """

    def __init__(self, positions=None, wavelength=0.2, grid_step=DEFAULT_GRID_STEP,
                 angle_range=(-90.0, 90.0), n_sources=1, noise_covariance=None):
        self.positions = positions
        self.wavelength = wavelength
        self.grid_step = grid_step
        self.angle_range = angle_range
        self.n_sources = n_sources
        self.noise_covariance = noise_covariance

    def _check_params(self):
        x = check_positions(self.positions)
        check_positive(self.wavelength, "wavelength")
        n = check_int(self.n_sources, "n_sources", minimum=1)
        if n >= x.size:
            raise DomainError(f"n_sources={n} must be below the sensor count {x.size}")
        return x

    def fit(self, X, y=None):
        X = check_snapshots(X, n_sensors=check_positions(self.positions).size)
        return self.fit_covariance(X.T @ X.conj() / X.shape[0])

    def fit_covariance(self, R):
        x = self._check_params()
        R = check_hermitian(R, "R")
        if R.shape[0] != x.size:
            raise DomainError(f"R is {R.shape}, expected {x.size}x{x.size}")
        self.covariance_ = (R + R.conj().T) / 2
        if self.noise_covariance is None:
            self.whitener_ = None
            Rw = self.covariance_
        else:
            Q = check_hermitian(self.noise_covariance, "noise_covariance", psd=True)
            if Q.shape != R.shape:
                raise DomainError(f"noise_covariance is {Q.shape}, expected {R.shape}")
            self.whitener_ = _whitener(Q)
            Rw = self.whitener_ @ self.covariance_ @ self.whitener_.conj().T
            if self.n_sources >= Rw.shape[0]:
                raise DomainError("noise covariance rank leaves no noise subspace")
        self.eigenvalues_, self.noise_subspace_ = _noise_subspace(Rw, self.n_sources)
        self.angles_ = angle_grid(self.grid_step, *self.angle_range)
        self.spectrum_ = Spectrum(self.angles_, self.pseudo_spectrum(self.angles_))
        self.doa_ = estimate_doa(self.spectrum_)
        return self

    def pseudo_spectrum(self, angles_deg):
        check_is_fitted(self, "noise_subspace_")
        return _music_values(self.noise_subspace_, check_positions(self.positions),
                             angles_deg, self.wavelength, self.whitener_)

    def predict(self, X=None):
        """Fitted DoA in degrees; ``X`` is accepted for pipeline compatibility."""
        check_is_fitted(self, "doa_")
        return np.array([self.doa_])

    def fit_predict(self, X, y=None):
        return self.fit(X).predict()


class ArrayInterpolator(TransformerMixin, BaseEstimator):
    """Least-squares map from a non-uniform array onto a uniform virtual array.

    The map ``T`` minimises ``sum ||T a_phys(θ) - a_virt(θ)||²`` over a grid
    of angles in ``sector`` with Tikhonov weight ``ridge * s_max²``, where
    ``s_max`` is the largest singular value of the physical steering matrix.

    The virtual array is uniform and therefore centro-symmetric, so with
    ``forward_backward`` the mapped data are also averaged with their
    conjugate reversal. ``noise_covariance_`` is the image of white sensor
    noise under the whole transform; pass it to :class:`MUSIC` so the
    virtual spectrum is computed on whitened data.

    Parameters
    ----------
    positions : array-like of shape (n_sensors,)
    wavelength : float
    spacing : float
        Virtual element spacing in metres.
    span : tuple of float, optional
        Virtual aperture; defaults to ``(0, max(positions))``.
    sector, sector_step, ridge
        See :class:`VirtualArraySpec`.
    forward_backward : bool
    max_residual : float
        Largest tolerated relative fit residual before :class:`ConditioningError`.
    """

    def __init__(self, positions=None, wavelength=0.2, spacing=0.1, span=None,
                 sector=(40.0, 80.0), sector_step=0.1, ridge=1e-6, forward_backward=True,
                 max_residual=0.25):
        self.positions = positions
        self.wavelength = wavelength
        self.spacing = spacing
        self.span = span
        self.sector = sector
        self.sector_step = sector_step
        self.ridge = ridge
        self.forward_backward = forward_backward
        self.max_residual = max_residual

    @classmethod
    def from_spec(cls, positions, wavelength, spec, **kw):
        return cls(positions=positions, wavelength=wavelength, spacing=spec.spacing,
                   span=tuple(spec.span), sector=tuple(spec.sector),
                   sector_step=spec.sector_step, ridge=spec.ridge, **kw)

    def spec(self):
        x = check_positions(self.positions)
        span = (0.0, float(x.max())) if self.span is None else tuple(self.span)
        return VirtualArraySpec(self.spacing, span, tuple(self.sector), self.ridge, self.sector_step)

    def virtual_positions(self):
        return self.spec().positions

    def fit(self, X=None, y=None):
        x = check_positions(self.positions)
        lam = check_positive(self.wavelength, "wavelength")
        spec = self.spec()
        if spec.element_count < x.size:
            raise DomainError(f"virtual array ({spec.element_count}) is smaller than the physical one ({x.size})")
        fit_angles = angle_grid(spec.sector_step, *spec.sector)
        A_p = _steering_matrix(x, fit_angles, lam)
        A_v = _steering_matrix(spec.positions, fit_angles, lam)
        v = spec.positions
        if x.size == v.size and np.allclose(x, v, rtol=0, atol=1e-12 * max(1.0, abs(v).max())):
            # no holes to fill: the exact map is the identity, which the ridge would only blur
            T = np.eye(x.size, dtype=complex)
        else:
            s_max = np.linalg.norm(A_p, 2)
            gram = A_p @ A_p.conj().T + spec.ridge * s_max**2 * np.eye(x.size)
            # T = A_v A_pᴴ (A_p A_pᴴ + μI)⁻¹, solved without forming the inverse
            T = np.linalg.solve(gram.T, (A_v @ A_p.conj().T).T).T
        err = np.linalg.norm(T @ A_p - A_v, axis=0) / np.linalg.norm(A_v, axis=0)
        self.matrix_ = T
        self.virtual_positions_ = spec.positions
        self.residual_ = float(err.max())
        self.n_features_in_ = x.size
        self.noise_covariance_ = self._fb(T @ T.conj().T)
        if not self.residual_ <= self.max_residual:
            raise ConditioningError(
                f"interpolation residual {self.residual_:.3e} exceeds {self.max_residual:.3e}; "
                "narrow the sector or shrink the virtual span", residual=self.residual_)
        return self

    def _fb(self, R):
        if not self.forward_backward:
            return R
        return (R + R[::-1, ::-1].conj()) / 2

    def transform(self, X):
        """Map snapshots; forward-backward appends the conjugate-reversed copies."""
        check_is_fitted(self, "matrix_")
        X = check_snapshots(X, n_sensors=self.n_features_in_)
        Xv = X @ self.matrix_.T
        if self.forward_backward:
            Xv = np.vstack([Xv, Xv[:, ::-1].conj()])
        return Xv

    def transform_covariance(self, R):
        """``T R Tᴴ`` (forward-backward averaged when enabled), Hermitian."""
        check_is_fitted(self, "matrix_")
        R = check_hermitian(R, "R")
        if R.shape[0] != self.n_features_in_:
            raise DomainError(f"R is {R.shape}, expected {self.n_features_in_}x{self.n_features_in_}")
        Rv = self._fb(self.matrix_ @ R @ self.matrix_.conj().T)
        return (Rv + Rv.conj().T) / 2

    def music(self, **kw):
        """A :class:`MUSIC` estimator configured for this virtual array."""
        check_is_fitted(self, "matrix_")
        return MUSIC(positions=self.virtual_positions_, wavelength=self.wavelength,
                     noise_covariance=self.noise_covariance_, **kw)


# --- functional API ----------------------------------------------------------

def trial_seed(seed, index):
    """Independent, order-free child seed for trial ``index``."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))


def synthesize_snapshots(config, layout, gains=None, seed=0, beta0_mode=Beta0Mode.FIXED_UNIT):
    """Noisy echoes at the sensors under the optimal beamformer and IRS phases.

    Symbols are unit-modulus with uniform random phase and the noise is
    circular Gaussian with per-entry variance ``config.sigma2``. The random
    draws happen in a fixed order (symbols, noise, then ``beta0``) so runs
    that differ only in power share the same realisations.
    """
    x = _as_positions(layout)
    beta0_mode = Beta0Mode(beta0_mode)
    rng = np.random.default_rng(seed)
    T, K = config.T, x.size

    symbols = np.exp(2j * np.pi * rng.random(T))
    noise = math.sqrt(config.sigma2 / 2) * (rng.standard_normal((K, T)) + 1j * rng.standard_normal((K, T)))
    if beta0_mode is Beta0Mode.SAMPLED:
        beta0 = complex(rng.standard_normal(), rng.standard_normal()) / math.sqrt(2)
        gains = channel_gains(config, beta0)
    elif gains is None:
        gains = channel_gains(config)

    lam = config.wavelength
    a = ula_steering(config.N, config.d_I, config.theta, lam)
    a_in = ula_steering(config.N, config.d_I, config.theta_A, lam)
    c = ula_steering(config.M, config.d_B, config.theta_D, lam)
    chain = np.sum(a * optimal_phase_shifts(config) * a_in) * (c @ optimal_beamformer(config))
    b = ms_steering(x, config.theta, lam)
    Y = gains.amplitude * chain * np.outer(b, symbols) + noise
    return SnapshotSet(Y, seed, beta0_mode, config.theta, gains.beta_0)


def sample_covariance(Y):
    """``Y Yᴴ / T`` for a ``(K, T)`` block."""
    Y = np.asarray(Y, dtype=complex)
    if Y.ndim == 1:
        Y = Y[:, np.newaxis]
    if Y.ndim != 2 or Y.shape[1] < 1:
        raise DomainError("Y must be a (K, T) block with T >= 1")
    R = Y @ Y.conj().T / Y.shape[1]
    return (R + R.conj().T) / 2


def music_spectrum(R, positions, wavelength, grid=None, n_sources=1, noise_covariance=None):
    """MUSIC pseudo-spectrum of covariance ``R`` on the array ``positions``.

    ``grid`` is an array of angles in degrees (default 0.01° over ±90°).
    ``noise_covariance`` whitens both ``R`` and the steering vectors first.
    """
    x = _as_positions(positions)
    n_sources = check_int(n_sources, "n_sources", minimum=1)
    if n_sources >= x.size:
        raise DomainError(f"n_sources={n_sources} must be below the sensor count {x.size}")
    R = check_hermitian(R, "R")
    if R.shape[0] != x.size:
        raise DomainError(f"R is {R.shape}, expected {x.size}x{x.size}")
    grid = angle_grid() if grid is None else np.asarray(grid, dtype=float)
    W = None
    if noise_covariance is not None:
        W = _whitener(check_hermitian(noise_covariance, "noise_covariance", psd=True))
        R = W @ R @ W.conj().T
        if n_sources >= R.shape[0]:
            raise DomainError("noise covariance rank leaves no noise subspace")
    _, En = _noise_subspace(R, n_sources)
    return Spectrum(grid, _music_values(En, x, grid, wavelength, W))


def interpolate_virtual_array(R, layout, spec, wavelength, max_residual=0.25, forward_backward=True):
    """Map a physical ``K x K`` covariance onto the ``V x V`` virtual array.

    Use :class:`ArrayInterpolator` directly to also get the fit residual and
    the virtual noise covariance needed for whitened MUSIC.
    """
    interp = ArrayInterpolator.from_spec(_as_positions(layout), wavelength, spec,
                                         forward_backward=forward_backward,
                                         max_residual=max_residual).fit()
    return interp.transform_covariance(R)


def estimate_doa(spectrum):
    """Peak angle in degrees, refined by a three-point parabola.

    The parabola is fitted to the reciprocal of the linear spectrum, which is
    exactly quadratic around an isolated MUSIC null.
    """
    v = spectrum.linear()
    a = spectrum.angles
    if v.size == 0:
        raise AmbiguityError("empty spectrum")
    if v.max() - v.min() <= 1e-12 * abs(v.max()):
        raise AmbiguityError("flat spectrum has no peak")
    i = int(np.argmax(v))
    if i == 0 or i == v.size - 1:
        return float(a[i])
    y0, y1, y2 = 1.0 / v[i - 1], 1.0 / v[i], 1.0 / v[i + 1]
    curv = y0 - 2 * y1 + y2
    if curv <= 0:
        return float(a[i])
    delta = 0.5 * (y0 - y2) / curv
    return float(a[i] + np.clip(delta, -0.5, 0.5) * (a[i + 1] - a[i - 1]) / 2)


def _pipeline_estimator(positions, wavelength, pipeline, grid_step, spec):
    if Pipeline(pipeline) is Pipeline.DIRECT:
        return None, MUSIC(positions=positions, wavelength=wavelength, grid_step=grid_step)
    interp = ArrayInterpolator.from_spec(positions, wavelength, spec).fit()
    return interp, interp.music(grid_step=grid_step)


def _default_spec(config, positions):
    return VirtualArraySpec.for_target(config.d_min, float(np.max(positions)), math.degrees(config.theta))


@dataclass(frozen=True)
class MonteCarloResult:
    rmse_deg: float
    bias_deg: float
    estimates: np.ndarray
    errors: np.ndarray
    failures: tuple = field(default=())

    @property
    def n_failed(self):
        return len(self.failures)


def _run_trial(config, positions, seed, index, interp, music, beta0_mode):
    snaps = synthesize_snapshots(config, positions, seed=trial_seed(seed, index), beta0_mode=beta0_mode)
    R = sample_covariance(snaps.Y)
    if interp is not None:
        R = interp.transform_covariance(R)
    try:
        return clone(music).fit_covariance(R).doa_, None
    except IrsenseError as exc:
        return math.nan, f"{type(exc).__name__}: {exc}"


def monte_carlo_rmse(config, layout, trials, seed=0, pipeline=Pipeline.DIRECT,
                     grid_step=DEFAULT_GRID_STEP, spec=None, n_jobs=1,
                     beta0_mode=Beta0Mode.FIXED_UNIT):
    """RMSE and bias (degrees) of MUSIC DoA estimates over independent trials.

    Trial ``i`` uses the child seed ``trial_seed(seed, i)``, so the result does
    not depend on ``n_jobs``. Failed trials are recorded and excluded; more
    than half failing raises :class:`AmbiguityError`.
    """
    trials = check_int(trials, "trials", minimum=1)
    x = _as_positions(layout)
    spec = spec or _default_spec(config, x)
    interp, music = _pipeline_estimator(x, config.wavelength, pipeline, grid_step, spec)
    out = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_run_trial)(config, x, seed, i, interp, music, beta0_mode) for i in range(trials))
    est = np.array([o[0] for o in out])
    failures = tuple((i, msg) for i, (_, msg) in enumerate(out) if msg is not None)
    if len(failures) * 2 > trials:
        raise AmbiguityError(f"{len(failures)} of {trials} trials failed")
    err = est - math.degrees(config.theta)
    ok = err[np.isfinite(err)]
    return MonteCarloResult(float(np.sqrt(np.mean(ok**2))), float(np.mean(ok)), est, err, failures)


def echo_power(config, gain_product_sq=None):
    """Per-sensor echo power ``|β|² N² P0 M`` under the optimal beamformer and phases."""
    ps = channel_gains(config).product_sq if gain_product_sq is None else gain_product_sq
    return ps * config.N**2 * config.P0 * config.M


def beampattern(layout, config, grid=None, interpolate=False, spec=None, seed=0,
                snapshots=None, snr_db=20.0):
    """Peak-normalised MUSIC pseudo-spectrum (dB) from one synthesised snapshot block.

    ``interpolate`` runs whitened MUSIC on the virtual array instead of the
    physical one. ``snapshots`` overrides ``config.T``. ``snr_db`` sets the
    per-sensor SNR by rescaling ``sigma2``; pass ``None`` to keep
    ``config.sigma2``.
    """
    x = _as_positions(layout)
    cfg = config if snapshots is None else config.replace(T=int(snapshots))
    if snr_db is not None:
        cfg = cfg.replace(sigma2=echo_power(cfg) / 10 ** (float(snr_db) / 10))
    R = sample_covariance(synthesize_snapshots(cfg, x, seed=seed).Y)
    grid = angle_grid() if grid is None else np.asarray(grid, dtype=float)
    if not interpolate:
        return music_spectrum(R, x, cfg.wavelength, grid).to_db()
    spec = spec or _default_spec(cfg, x)
    interp = ArrayInterpolator.from_spec(x, cfg.wavelength, spec).fit()
    return music_spectrum(interp.transform_covariance(R), interp.virtual_positions_, cfg.wavelength,
                          grid, noise_covariance=interp.noise_covariance_).to_db()
