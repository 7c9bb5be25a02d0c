"""Grouped movable-sensor layouts on a line segment.

A layout holds ``L`` groups of ``K̄`` sensors. Within a group the sensors are
``d_min`` apart and consecutive groups start at least ``K̄ * d_min`` apart,
all inside ``[0, D]``. The DoA CRB is inversely proportional to the
population variance of the sensor coordinates, so the placement problem is
a variance maximisation over group offsets.
"""

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_int, check_positions, check_positive
from .exceptions import DomainError, SearchSpaceError

__all__ = [
    "PlacementVariant",
    "SensorLayout",
    "Violation",
    "ValidationResult",
    "validate_layout",
    "variance",
    "optimal_positions",
    "closed_form_variance",
    "brute_force_optimal",
    "fp_positions",
    "fp_variance",
    "is_feasible",
]

# Slack for comparing coordinates built from sums/differences of d_min.
_REL_TOL = 1e-9
MAX_CANDIDATES = 10**7


class PlacementVariant(enum.Enum):
    """Which of the two optimal layouts to emit when ``L`` is odd.

    ``LEFT_HEAVY`` packs ``floor(L/2)`` groups against 0 and the rest against
    ``D``. ``RIGHT_HEAVY`` packs ``floor(L/2) + 1`` groups against 0. The two
    are mirror images with equal variance and coincide for even ``L``.
    """

    LEFT_HEAVY = "left"
    RIGHT_HEAVY = "right"


@dataclass(frozen=True)
class SensorLayout:
    """Flattened sensor coordinates ``x_{1,1} .. x_{L,K̄}`` in metres."""

    positions: tuple
    groups: int
    per_group: int
    min_spacing: float
    aperture: float
    group_sizes: tuple = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "positions", tuple(float(p) for p in self.positions))
        if self.group_sizes is None:
            object.__setattr__(self, "group_sizes", (self.per_group,) * self.groups)
        else:
            object.__setattr__(self, "group_sizes", tuple(int(k) for k in self.group_sizes))

    @property
    def n_sensors(self):
        return len(self.positions)

    @property
    def array(self):
        return np.asarray(self.positions, dtype=float)

    def reflect(self):
        """Mirror the layout about the segment centre ``D/2``."""
        x = self.aperture - self.array[::-1]
        return SensorLayout(tuple(x), self.groups, self.per_group, self.min_spacing,
                            self.aperture, self.group_sizes[::-1])


@dataclass(frozen=True)
class Violation:
    kind: str  # count | order | bound | intra_group | inter_group | infeasible_spacing
    message: str
    index: int = None


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple = ()

    @property
    def valid(self):
        return not self.violations

    @property
    def first(self):
        return self.violations[0] if self.violations else None

    def __bool__(self):
        return self.valid


def is_feasible(D, n_sensors, d_min):
    """``0 < d_min <= D / (K - 1)``, with a small relative slack."""
    return d_min > 0 and D >= (n_sensors - 1) * d_min * (1 - _REL_TOL) - 1e-15


def validate_layout(layout):
    """Check every placement constraint and return all violations found.

    Never raises on a bad layout; the first entry of ``violations`` is the
    first constraint broken in the order: sensor count, feasibility of
    ``d_min``, ordering, segment bounds, intra-group and inter-group spacing.
    """
    out = []
    x = np.asarray(layout.positions, dtype=float)
    sizes = layout.group_sizes
    K = int(sum(sizes))
    D, d = layout.aperture, layout.min_spacing
    slack = _REL_TOL * max(D, d, 1e-300)

    if len(sizes) != layout.groups or x.size != K:
        out.append(Violation("count", f"expected {K} positions in {layout.groups} groups, got {x.size}"))
        return ValidationResult(tuple(out))
    if d <= 0 or K >= 2 and not is_feasible(D, K, d):
        out.append(Violation(
            "infeasible_spacing",
            f"d_min={d} infeasible: need 0 < d_min <= D/(K-1) = {D / max(K - 1, 1):.6g}"))
    if np.any(np.diff(x) < -slack):
        i = int(np.argmax(np.diff(x) < -slack))
        out.append(Violation("order", f"positions decrease at index {i + 1}", i + 1))
    if x[0] < -slack:
        out.append(Violation("bound", f"first sensor at {x[0]} < 0", 0))
    if x[-1] > D + slack:
        out.append(Violation("bound", f"last sensor at {x[-1]} > D={D}", K - 1))

    starts = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(int)
    for l, (s, k) in enumerate(zip(starts, sizes)):
        gaps = np.diff(x[s:s + k])
        bad = np.nonzero(gaps < d - slack)[0]
        if bad.size:
            i = s + int(bad[0]) + 1
            out.append(Violation("intra_group",
                                 f"group {l + 1}: spacing {gaps[bad[0]]:.6g} < d_min={d}", i))
    for l in range(1, len(sizes)):
        gap = x[starts[l]] - x[starts[l - 1]]
        need = sizes[l - 1] * d
        if gap < need - slack:
            out.append(Violation("inter_group",
                                 f"groups {l}->{l + 1}: first-sensor gap {gap:.6g} < {need:.6g}",
                                 int(starts[l])))
    return ValidationResult(tuple(out))


def variance(positions):
    """Population variance ``mean(x**2) - mean(x)**2`` in m²."""
    x = check_positions(positions)
    # centred form is the numerically stable equivalent of the raw-moment definition
    return float(np.mean((x - x.mean()) ** 2))


def _check_geometry(D, per_group, groups, d_min):
    D = check_positive(D, "D")
    d_min = check_positive(d_min, "d_min")
    per_group = check_int(per_group, "per_group", minimum=1)
    groups = check_int(groups, "groups", minimum=2)
    K = per_group * groups
    if not is_feasible(D, K, d_min):
        raise DomainError(f"infeasible geometry: D={D} < (K-1)*d_min = {(K - 1) * d_min}")
    return D, per_group, groups, d_min


def optimal_positions(D, per_group, groups, d_min, variant=PlacementVariant.LEFT_HEAVY):
    """Closed-form variance-maximising layout.

    Groups are packed at spacing ``d_min`` against the two ends of the
    segment. For even ``groups`` both variants return the same layout.
    """
    D, Kb, L, d = _check_geometry(D, per_group, groups, d_min)
    variant = PlacementVariant(variant)
    K = Kb * L
    n_left = L // 2
    if variant is PlacementVariant.RIGHT_HEAVY and L % 2:
        n_left += 1
    x = []
    for l in range(1, L + 1):
        for k in range(1, Kb + 1):
            if l <= n_left:
                x.append((Kb * (l - 1) + k - 1) * d)
            else:
                x.append(D - (K - Kb * (l - 1) - k) * d)
    return SensorLayout(tuple(x), L, Kb, d, D)


def closed_form_variance(D, per_group, groups, d_min):
    """Variance of the optimal layout, in m²."""
    D, Kb, L, d = _check_geometry(D, per_group, groups, d_min)
    K = Kb * L
    if L % 2:
        return Kb / (12 * K**2) * (3 * (K * L - Kb) * D**2
                                   - 3 * (K - 2) * (K * L - Kb) * D * d
                                   + (K - 1) * (L * K**2 - 2 * L * K + 3 * Kb) * d**2)
    return (3 * D**2 - 3 * (Kb * L - 2) * D * d + (Kb**2 * L**2 - 3 * Kb * L + 2) * d**2) / 12


def _grid_units(value, step, name):
    n = value / step
    r = round(n)
    if abs(n - r) > 1e-12 * max(1.0, abs(n)) and abs(n - r) * step > 1e-12:
        raise DomainError(f"grid_step={step} does not divide {name}={value}")
    return int(r)


def _n_candidates(slack_units, groups):
    return math.comb(slack_units + groups, groups)


def brute_force_optimal(D, per_group, groups, d_min, grid_step=None, group_sizes=None):
    """Exhaustively search group offsets on a grid for the variance maximiser.

    Intra-group spacing is fixed at ``d_min``; only the left edge of each
    group moves. ``group_sizes`` overrides the equal ``per_group`` split to
    explore unequal groups. Ties go to the lexicographically smallest offset
    tuple. Returns ``(layout, variance)``.

    Raises :class:`SearchSpaceError` when more than ``MAX_CANDIDATES``
    offset tuples would be visited.
    """
    D = check_positive(D, "D")
    d_min = check_positive(d_min, "d_min")
    if group_sizes is None:
        per_group = check_int(per_group, "per_group", minimum=1)
        groups = check_int(groups, "groups", minimum=2)
        sizes = np.full(groups, per_group, dtype=np.int64)
    else:
        sizes = np.asarray([check_int(k, "group size", minimum=1) for k in group_sizes], dtype=np.int64)
        groups = check_int(len(sizes), "groups", minimum=2)
    K = int(sizes.sum())
    if not is_feasible(D, K, d_min):
        raise DomainError(f"infeasible geometry: D={D} < (K-1)*d_min = {(K - 1) * d_min}")
    step = check_positive(d_min / 2 if grid_step is None else grid_step, "grid_step")

    g = _grid_units(d_min, step, "d_min")
    G = _grid_units(D, step, "D")
    slack = G - (K - 1) * g
    if slack < 0:
        raise DomainError("no feasible layout on this grid")
    n = _n_candidates(slack, groups)
    if n > MAX_CANDIDATES:
        suggestion = None
        common = math.gcd(g, G)
        for m in range(2, common + 1):
            if common % m == 0 and _n_candidates(G // m - (K - 1) * (g // m), groups) <= MAX_CANDIDATES:
                suggestion = step * m
                break
        hint = (f"use grid_step >= {suggestion:g}" if suggestion is not None
                else "no grid step commensurate with d_min fits; reduce D or the group count")
        raise SearchSpaceError(f"{n} candidate offset tuples exceed {MAX_CANDIDATES}; {hint}",
                               candidates=n, suggested_step=suggestion)

    # offset_l = u_l + g * (sizes before l); u is any non-decreasing tuple in [0, slack]
    shift = g * np.concatenate(([0], np.cumsum(sizes)[:-1]))
    k_sum = g * sizes * (sizes - 1) // 2
    k_sq = g * g * (sizes - 1) * sizes * (2 * sizes - 1) // 6

    best_num, best_u = -1, None
    combos = itertools.combinations_with_replacement(range(slack + 1), groups)
    chunk = 1 << 18
    while True:
        block = np.fromiter(itertools.chain.from_iterable(itertools.islice(combos, chunk)),
                            dtype=np.int64)
        if block.size == 0:
            break
        u = block.reshape(-1, groups)
        o = u + shift
        s1 = o @ sizes + k_sum.sum()
        s2 = (o * o) @ sizes + 2 * (o @ k_sum) + k_sq.sum()
        num = K * s2 - s1 * s1  # K² · var in grid units², exact in integers
        i = int(np.argmax(num))
        if num[i] > best_num:
            best_num, best_u = int(num[i]), u[i].copy()

    offsets = best_u + shift
    x = [float((o + k * g) * step) for o, kl in zip(offsets, sizes) for k in range(kl)]
    layout = SensorLayout(tuple(x), groups, int(sizes[0]) if np.all(sizes == sizes[0]) else 0,
                          d_min, D, tuple(int(k) for k in sizes))
    return layout, best_num * step * step / K**2


def fp_positions(n_sensors, wavelength):
    """Fixed half-wavelength ULA ``{0, λ/2, ..., (K-1)λ/2}``."""
    K = check_int(n_sensors, "n_sensors", minimum=2)
    lam = check_positive(wavelength, "wavelength")
    return np.arange(K) * lam / 2


def fp_variance(n_sensors, wavelength):
    K = check_int(n_sensors, "n_sensors", minimum=2)
    return wavelength**2 * (K + 1) * (K - 1) / 48
