"""Far-field channel model of the BS -> IRS -> target -> IRS-sensor link.

Angles are radians throughout this module; degree conversion happens at the
user-facing boundaries (:mod:`irsense.experiments` and the CLI).
"""

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_int, check_positions, check_positive
from .exceptions import DomainError
from .geometry import SensorLayout, is_feasible

__all__ = [
    "SystemConfig",
    "ChannelGains",
    "dbm_to_watt",
    "watt_to_dbm",
    "ula_steering",
    "ula_steering_derivative",
    "ms_steering",
    "ms_steering_derivative",
    "channel_gains",
    "optimal_beamformer",
    "optimal_phase_shifts",
    "response_matrix",
]


def dbm_to_watt(dbm):
    return 10.0 ** (dbm / 10.0) * 1e-3


def watt_to_dbm(watt):
    return 10.0 * np.log10(watt) + 30.0


@dataclass(frozen=True)
class SystemConfig:
    """Physical and system parameters. SI units, angles in radians.

    ``d_B`` and ``d_I`` default to half a wavelength when left as ``None``.
    """

    M: int = 32
    N: int = 32
    L: int = 4
    Kb: int = 2
    wavelength: float = 0.2
    d_min: float = 0.1
    D: float = 2.0
    theta: float = math.radians(60.0)
    theta_A: float = 0.0
    theta_D: float = 0.0
    P0: float = 10 ** 1.5 * 1e-3
    T: int = 64
    sigma2: float = 1e-12
    d_BI: float = 60.0
    d_IT: float = 20.0
    kappa: float = 10 ** 0.7
    d_B: float = None
    d_I: float = None

    def __post_init__(self):
        if self.d_B is None:
            object.__setattr__(self, "d_B", self.wavelength / 2)
        if self.d_I is None:
            object.__setattr__(self, "d_I", self.wavelength / 2)
        check_int(self.M, "M", minimum=2, even=True)
        check_int(self.N, "N", minimum=2, even=True)
        check_int(self.L, "L", minimum=1)
        check_int(self.Kb, "Kb", minimum=1)
        check_int(self.T, "T", minimum=1)
        if self.K < 2:
            raise DomainError(f"need K = L*Kb >= 2, got {self.K}")
        for name in ("wavelength", "d_min", "D", "P0", "sigma2", "d_BI", "d_IT", "kappa", "d_B", "d_I"):
            check_positive(getattr(self, name), name)
        if not abs(self.theta) < math.pi / 2:
            raise DomainError(f"|theta| must be < 90 deg, got {math.degrees(self.theta)} deg")
        if not is_feasible(self.D, self.K, self.d_min):
            raise DomainError(f"infeasible geometry: D={self.D} < (K-1)*d_min = {(self.K - 1) * self.d_min}")

    @property
    def K(self):
        return self.L * self.Kb

    def replace(self, **changes):
        # recompute default spacings when only the wavelength changes
        if "wavelength" in changes:
            changes.setdefault("d_B", None if self.d_B == self.wavelength / 2 else self.d_B)
            changes.setdefault("d_I", None if self.d_I == self.wavelength / 2 else self.d_I)
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class ChannelGains:
    beta_bi: float
    beta_1: float
    beta_0: complex
    product_sq: float

    @property
    def amplitude(self):
        """Complex ``beta_BI * beta_IS`` multiplying the noiseless echo."""
        return self.beta_bi * self.beta_0 * self.beta_1


def _centred_index(count):
    count = check_int(count, "count", minimum=2, even=True)
    return 2.0 * np.arange(1, count + 1) - count - 1


def ula_steering(count, spacing, angle, wavelength):
    """Centroid-referenced ULA response, entries ``exp(jπ(2n-count-1) d sinθ / λ)``."""
    idx = _centred_index(count)
    return np.exp(1j * np.pi * idx * spacing * math.sin(angle) / wavelength)


def ula_steering_derivative(count, spacing, angle, wavelength):
    idx = _centred_index(count)
    a = np.exp(1j * np.pi * idx * spacing * math.sin(angle) / wavelength)
    return 1j * np.pi * (spacing / wavelength) * math.cos(angle) * idx * a


def ms_steering(positions, angle, wavelength):
    """Movable-sensor array response ``exp(j 2π x_k sinθ / λ)``."""
    x = check_positions(positions)
    return np.exp(2j * np.pi * x * math.sin(angle) / wavelength)


def ms_steering_derivative(positions, angle, wavelength):
    x = check_positions(positions)
    b = np.exp(2j * np.pi * x * math.sin(angle) / wavelength)
    return 1j * (2 * np.pi / wavelength) * math.cos(angle) * x * b


def channel_gains(config, beta0=1.0):
    """Large-scale path gains, with ``beta0`` the small-scale fading factor."""
    lam = check_positive(config.wavelength, "wavelength")
    d_bi = check_positive(config.d_BI, "d_BI")
    d_it = check_positive(config.d_IT, "d_IT")
    kappa = check_positive(config.kappa, "kappa")
    beta_bi = math.sqrt(lam**2 / (16 * math.pi**2 * d_bi**2))
    beta_1 = math.sqrt(lam**2 * kappa / (64 * math.pi**3 * d_it**4))
    beta0 = complex(beta0)
    return ChannelGains(beta_bi, beta_1, beta0, abs(beta0) ** 2 * beta_bi**2 * beta_1**2)


def optimal_beamformer(config):
    """Maximum-ratio transmit beamformer toward the IRS; ``||w||² = P0``."""
    c = ula_steering(config.M, config.d_B, config.theta_D, config.wavelength)
    return math.sqrt(config.P0 / config.M) * c.conj()


def optimal_phase_shifts(config):
    """Unit-modulus IRS profile aligning the cascaded phases toward ``theta``."""
    a_t = ula_steering(config.N, config.d_I, config.theta, config.wavelength)
    a_a = ula_steering(config.N, config.d_I, config.theta_A, config.wavelength)
    v = a_t * a_a
    return v.conj() / np.abs(v)


def response_matrix(config, layout, phase, gains=None):
    """Noiseless response ``B`` (K x M) and its angle derivative.

    ``B = b(x,θ) aᵀ(θ) Φ a(θ_A) cᵀ(θ_D)``. When ``gains`` is given both
    matrices are scaled by ``beta_BI * beta_IS``.
    """
    x = layout.array if isinstance(layout, SensorLayout) else check_positions(layout)
    phase = np.asarray(phase, dtype=complex)
    if phase.shape != (config.N,):
        raise DomainError(f"phase must have length N={config.N}, got shape {phase.shape}")
    lam, th = config.wavelength, config.theta
    a = ula_steering(config.N, config.d_I, th, lam)
    a_dot = ula_steering_derivative(config.N, config.d_I, th, lam)
    a_in = ula_steering(config.N, config.d_I, config.theta_A, lam)
    c = ula_steering(config.M, config.d_B, config.theta_D, lam)
    b = ms_steering(x, th, lam)
    b_dot = ms_steering_derivative(x, th, lam)

    gain = np.sum(a * phase * a_in)
    gain_dot = np.sum(a_dot * phase * a_in)
    B = gain * np.outer(b, c)
    Bdot = np.outer(gain_dot * b + gain * b_dot, c)
    if gains is not None:
        B = gains.amplitude * B
        Bdot = gains.amplitude * Bdot
    return B, Bdot
