"""Cramér-Rao bounds on the target DoA.

Two independent routes are provided: :func:`crb_general` evaluates the trace
formula on explicit response matrices, :func:`crb_closed` uses the
variance-only expression that holds under the optimal beamformer and IRS
phases. Everything else (optimal and fixed-position CRBs, reduction ratios
and the element/group budget trade-off) builds on the closed form.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_complex_matrix, check_hermitian, check_int, check_positive
from .channel import SystemConfig, channel_gains
from .exceptions import DomainError, SingularityError
from .geometry import closed_form_variance, fp_variance, is_feasible

__all__ = [
    "CrbReport",
    "TraceTerms",
    "Parity",
    "BudgetSpec",
    "BudgetResult",
    "RatioBound",
    "trace_terms",
    "crb_general",
    "crb_closed",
    "crb_ms_opt",
    "crb_fp",
    "reduction_ratio",
    "reduction_ratio_bound",
    "budget_optimal_L",
    "budget_polynomial_roots",
]

RAD2_TO_DEG2 = (180.0 / math.pi) ** 2
MIN_VARIANCE = 1e-15  # m²; below this the geometry carries no angular information


@dataclass(frozen=True)
class CrbReport:
    crb_rad2: float
    variance_used: float = None
    gain_product_sq: float = None
    components: dict = field(default_factory=dict)

    @property
    def crb_deg2(self):
        return self.crb_rad2 * RAD2_TO_DEG2

    @property
    def crb_db(self):
        """``10 log10`` of the CRB in deg²."""
        return 10.0 * math.log10(self.crb_deg2)


@dataclass(frozen=True)
class TraceTerms:
    t_bb: float
    t_bbd: complex
    t_bdbd: float


def trace_terms(B, Bdot, R):
    """Direct evaluation of ``tr(BRBᴴ)``, ``tr(BRḂᴴ)`` and ``tr(ḂRḂᴴ)``."""
    B = check_complex_matrix(B, "B")
    Bdot = check_complex_matrix(Bdot, "Bdot", shape=B.shape)
    R = check_hermitian(R, "R", psd=True)
    if R.shape[0] != B.shape[1]:
        raise DomainError(f"R is {R.shape}, expected {B.shape[1]}x{B.shape[1]}")
    t_bb = np.trace(B @ R @ B.conj().T)
    t_bbd = np.trace(B @ R @ Bdot.conj().T)
    t_bdbd = np.trace(Bdot @ R @ Bdot.conj().T)
    return TraceTerms(float(t_bb.real), complex(t_bbd), float(t_bdbd.real))


def crb_general(traces, sigma2, T, gain_product_sq):
    """CRB from trace terms; valid for any beamformer and phase profile."""
    sigma2 = check_positive(sigma2, "sigma2")
    T = check_int(T, "T", minimum=1)
    gain_product_sq = check_positive(gain_product_sq, "gain_product_sq")
    if traces.t_bb <= 0:
        raise SingularityError("tr(B R B^H) is zero: no signal reaches the sensors")
    info = traces.t_bdbd - abs(traces.t_bbd) ** 2 / traces.t_bb
    if info <= 1e-12 * traces.t_bdbd:
        raise SingularityError(f"vanishing Fisher information ({info:.3e}); sensors are co-located")
    crb = sigma2 / (2 * T * gain_product_sq * info)
    return CrbReport(crb, None, gain_product_sq,
                     {"power": None, "snapshots": T, "fisher": info})


def _gain(config, gain_product_sq):
    if gain_product_sq is None:
        return channel_gains(config).product_sq
    return check_positive(gain_product_sq, "gain_product_sq")


def crb_closed(config, variance, gain_product_sq=None):
    """Closed-form CRB under the optimal beamformer and IRS phases.

    ``gain_product_sq`` defaults to the path-loss product with ``|β0|² = 1``.
    """
    if not variance >= MIN_VARIANCE:
        raise SingularityError(f"position variance {variance!r} m² is degenerate")
    ps = _gain(config, gain_product_sq)
    c2 = math.cos(config.theta) ** 2
    denom = (8 * math.pi**2 * c2 * config.P0 * config.T * config.M * config.K
             * config.N**2 * ps * variance)
    crb = config.sigma2 * config.wavelength**2 / denom
    return CrbReport(crb, float(variance), ps, {
        "power": config.P0,
        "snapshots": config.T,
        "geometry": config.K * variance,
        "array_gain": config.M * config.N**2,
    })


def crb_ms_opt(config, gain_product_sq=None):
    """CRB with the sensors at the closed-form optimal grouped positions."""
    if config.L < 2:
        raise DomainError("the grouped placement needs L >= 2")
    var = closed_form_variance(config.D, config.Kb, config.L, config.d_min)
    return crb_closed(config, var, gain_product_sq)


def crb_fp(config, gain_product_sq=None):
    """CRB of the fixed half-wavelength ULA with ``K`` sensors."""
    K = check_int(config.K, "K", minimum=2)
    ps = _gain(config, gain_product_sq)
    c2 = math.cos(config.theta) ** 2
    crb = 6 * config.sigma2 / (math.pi**2 * c2 * config.P0 * config.T * config.M
                               * config.N**2 * ps * (K**3 - K))
    var = fp_variance(K, config.wavelength)
    return CrbReport(crb, var, ps, {
        "power": config.P0,
        "snapshots": config.T,
        "geometry": K * var,
        "array_gain": config.M * config.N**2,
    })


def reduction_ratio(config, fp_config=None):
    """``(CRB_FP - CRB_MS) / CRB_FP``; both schemes must share ``N`` and ``K``."""
    fp_config = config if fp_config is None else fp_config
    if fp_config.N != config.N or fp_config.K != config.K:
        raise DomainError("reduction ratio needs equal N and K for both schemes")
    return 1.0 - crb_ms_opt(config).crb_rad2 / crb_fp(fp_config).crb_rad2


class Parity(enum.Enum):
    ODD = "odd"
    EVEN = "even"
    BOTH = "both"


@dataclass(frozen=True)
class RatioBound:
    parity: Parity
    printed: float
    direct: float
    extremal_L: int

    @property
    def discrepancy(self):
        return self.direct - self.printed

    @property
    def exceeded(self):
        """True when the directly computed extremal ratio is above the printed bound."""
        return self.discrepancy > 1e-12


def reduction_ratio_bound(per_group, D, d_min, wavelength, parity):
    """Printed upper bound on the reduction ratio and the extremal ``f(L)``.

    The extremum sits at ``L = 3`` for odd and ``L = 2`` for even group
    counts. The two numbers are returned side by side; for even parity and
    ``per_group >= 2`` the printed expression is slightly below the direct
    value, which :attr:`RatioBound.exceeded` reports.
    """
    Kb = check_int(per_group, "per_group", minimum=1)
    D = check_positive(D, "D")
    d = check_positive(d_min, "d_min")
    lam = check_positive(wavelength, "wavelength")
    parity = Parity(parity)
    if parity is Parity.ODD:
        L = 3
        den = 32 * D**2 - 32 * (3 * Kb - 2) * D * d + 4 * (3 * Kb - 1) * (9 * Kb - 5) * d**2
        num = 3 * lam**2 * (3 * Kb**2 - 1)
    elif parity is Parity.EVEN:
        L = 2
        den = 12 * D**2 - 8 * (Kb - 1) * (3 * D + d) * d
        num = lam**2 * (4 * Kb**2 - 1)
    else:
        raise DomainError("parity must be odd or even")
    if den <= 0:
        raise DomainError("bound denominator is not positive")
    if not is_feasible(D, L * Kb, d):
        raise DomainError(f"L={L} groups of {Kb} do not fit in D={D}")
    direct = 1.0 - fp_variance(L * Kb, lam) / closed_form_variance(D, Kb, L, d)
    return RatioBound(parity, 1.0 - num / den, direct, L)


@dataclass(frozen=True)
class BudgetSpec:
    """Linear budget ``W1 * N + W2 * L <= Q`` over IRS elements and sensor groups."""

    Q: float
    W1: float
    W2: float
    parity: Parity = Parity.BOTH

    def __post_init__(self):
        check_positive(self.W1, "W1")
        if not (self.W2 >= 0 and math.isfinite(self.W2)):
            raise DomainError(f"W2 must be a non-negative finite real, got {self.W2!r}")
        if not self.Q > 2 * self.W1 + 2 * self.W2:
            raise DomainError("budget Q leaves no room for N = 2 and L = 2")
        object.__setattr__(self, "parity", Parity(self.parity))

    def elements_for(self, L):
        """Largest even ``N >= 2`` affordable with ``L`` groups, or 0."""
        n = math.floor((self.Q - self.W2 * L) / self.W1 + 1e-9)
        n -= n % 2
        return n if n >= 2 else 0


@dataclass(frozen=True)
class BudgetResult:
    L: int
    N: int
    objective: float
    crb: CrbReport
    rows: tuple
    roots: dict


def budget_polynomial_roots(budget, D, d_min, per_group):
    """Real roots of the stationary-point polynomials in a continuous ``L``.

    Returned as diagnostics only; the odd-parity polynomial carries no budget
    terms, so the integer search in :func:`budget_optimal_L` is what decides.
    """
    Kb, d, Q, W2 = per_group, d_min, budget.Q, budget.W2
    c0 = 2 * d**2 + 6 * D * d + 3 * D**2
    odd = [3 * d**2 * Kb**2, -6 * Kb * d * (D + d), c0, 0.0, c0]
    even = [-5 * W2 * Kb * d**2,
            3 * Kb * d * (Q * d + 4 * W2 * d + 4 * D * W2),
            -3 * (2 * Kb * d * (d + D) * Q + W2 * c0),
            Q * c0]

    def real_roots(coeffs):
        coeffs = np.trim_zeros(np.asarray(coeffs, dtype=float), "f")
        if coeffs.size < 2:
            return []
        r = np.roots(coeffs)
        return sorted(float(z.real) for z in r if abs(z.imag) <= 1e-9 * max(1.0, abs(z)))

    return {"odd": real_roots(odd), "even": real_roots(even)}


def budget_optimal_L(budget, D, d_min, per_group, config=None):
    """Maximise ``N² * g(L)`` over integer group counts under the budget.

    ``g = K * var(x_opt)``. For each ``L`` the element count is the largest
    affordable even ``N``. Ties keep the smallest ``L``. ``config`` supplies
    the remaining system parameters for the CRB of the winner.
    """
    Kb = check_int(per_group, "per_group", minimum=1)
    D = check_positive(D, "D")
    d = check_positive(d_min, "d_min")
    L_max = math.floor((D / d + 1) / Kb + 1e-9)
    rows = []
    for L in range(2, L_max + 1):
        if budget.parity is Parity.ODD and L % 2 == 0:
            continue
        if budget.parity is Parity.EVEN and L % 2:
            continue
        if not is_feasible(D, L * Kb, d):
            continue
        N = budget.elements_for(L)
        if N < 2:
            continue
        g = L * Kb * closed_form_variance(D, Kb, L, d)
        rows.append((L, N, N**2 * g))
    if not rows:
        raise DomainError("no (L, N) pair satisfies the budget and geometry")
    best = max(rows, key=lambda r: (r[2], -r[0]))
    L, N, p = best
    base = (config or SystemConfig()).replace(L=L, Kb=Kb, N=N, D=D, d_min=d)
    return BudgetResult(L, N, p, crb_ms_opt(base), tuple(rows),
                        budget_polynomial_roots(budget, D, d, Kb))
