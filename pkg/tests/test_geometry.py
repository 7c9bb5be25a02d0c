import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from irsense.exceptions import DomainError, SearchSpaceError
from irsense.geometry import (PlacementVariant, SensorLayout, brute_force_optimal, closed_form_variance,
                              fp_positions, fp_variance, is_feasible, optimal_positions, validate_layout,
                              variance)


def layout(x, L, Kb, d, D):
    return SensorLayout(tuple(x), L, Kb, d, D)


# --- validate_layout ---------------------------------------------------------

def test_valid_layout():
    assert validate_layout(layout([0, 0.1, 1.9, 2.0], 4, 1, 0.1, 2.0)).valid


def test_inter_group_gap_violation():
    res = validate_layout(layout([0, 0.05], 2, 1, 0.1, 2.0))
    assert not res.valid
    assert res.first.kind == "inter_group"


def test_infeasible_spacing_reported():
    x = np.arange(8) * 0.3
    res = validate_layout(layout(x, 4, 2, 0.3, 2.0))
    assert res.first.kind == "infeasible_spacing"


def test_other_violations():
    assert validate_layout(layout([0, 0.1, 2.1], 3, 1, 0.1, 2.0)).first.kind == "bound"
    assert validate_layout(layout([-0.1, 0.1, 1.0], 3, 1, 0.1, 2.0)).first.kind == "bound"
    assert validate_layout(layout([0, 0.05, 1.0, 1.1], 2, 2, 0.1, 2.0)).first.kind == "intra_group"
    assert validate_layout(layout([0.5, 0.2], 2, 1, 0.1, 2.0)).first.kind == "order"
    assert validate_layout(layout([0, 0.1, 0.2], 2, 1, 0.1, 2.0)).first.kind == "count"


def test_validate_never_raises_on_garbage():
    res = validate_layout(layout([3.0, -1.0, 0.0, 0.0], 2, 2, 0.5, 1.0))
    assert not res.valid and len(res.violations) >= 2


# --- variance ----------------------------------------------------------------

@pytest.mark.parametrize("x, expected", [
    ([0, 2], 1.0),
    ([0, 1.9, 2.0], 0.8466666666666667),
    ([0, 0.1, 1.9, 2.0], 0.905),
])
def test_variance_examples(x, expected):
    assert variance(x) == pytest.approx(expected, rel=1e-12)


def test_variance_empty():
    with pytest.raises(DomainError):
        variance([])


@given(st.lists(st.floats(0, 10), min_size=1, max_size=30), st.floats(-50, 50))
def test_variance_translation_reflection(x, c):
    v = variance(x)
    assert variance(np.asarray(x) + c) == pytest.approx(v, rel=1e-9, abs=1e-12)
    assert variance(10.0 - np.asarray(x)) == pytest.approx(v, rel=1e-12, abs=1e-14)


def test_layout_reflection_preserves_variance():
    lay = optimal_positions(2.0, 2, 3, 0.1)
    assert variance(lay.reflect().positions) == pytest.approx(variance(lay.positions), rel=1e-12)


# --- optimal_positions / closed form ----------------------------------------

def test_optimal_positions_examples():
    assert optimal_positions(2, 1, 4, 0.1).positions == pytest.approx((0, 0.1, 1.9, 2.0))
    assert optimal_positions(2, 1, 3, 0.1, PlacementVariant.LEFT_HEAVY).positions == pytest.approx((0, 1.9, 2.0))
    assert optimal_positions(2, 1, 3, 0.1, PlacementVariant.RIGHT_HEAVY).positions == pytest.approx((0, 0.1, 2.0))
    assert optimal_positions(0.3, 1, 4, 0.1).positions == pytest.approx((0, 0.1, 0.2, 0.3))


def test_right_heavy_equals_left_for_even_L():
    a = optimal_positions(2, 2, 4, 0.1, "left")
    b = optimal_positions(2, 2, 4, 0.1, "right")
    assert a.positions == b.positions


@pytest.mark.parametrize("D, Kb, L, d, expected", [
    (2, 1, 3, 0.1, 0.8466666666666667),
    (2, 2, 10, 0.1, 0.385),
    (0.4, 1, 4, 0.1, 0.025),
    (2, 2, 2, 0.1, 0.905),
    (2, 2, 4, 0.1, 0.735),
])
def test_closed_form_examples(D, Kb, L, d, expected):
    assert closed_form_variance(D, Kb, L, d) == pytest.approx(expected, rel=1e-12)


def test_closed_form_matches_reference_formula_odd():
    D, d = 2.0, 0.1
    assert closed_form_variance(D, 1, 3, d) == pytest.approx(2 / 9 * (D**2 - D * d + d**2), rel=1e-12)


def test_infeasible_geometry_raises():
    with pytest.raises(DomainError):
        optimal_positions(2.0, 2, 4, 0.3)
    with pytest.raises(DomainError):
        closed_form_variance(2.0, 2, 4, 0.3)
    with pytest.raises(DomainError):
        optimal_positions(2.0, 2, 1, 0.1)


@st.composite
def geometries(draw):
    Kb = draw(st.integers(1, 4))
    L = draw(st.integers(2, 9))
    K = Kb * L
    d = draw(st.floats(0.01, 0.5))
    D = (K - 1) * d * draw(st.floats(1.0, 5.0))
    return D, Kb, L, d


@given(geometries(), st.sampled_from(list(PlacementVariant)))
def test_optimal_layout_valid_and_matches_closed_form(g, variant):
    D, Kb, L, d = g
    lay = optimal_positions(D, Kb, L, d, variant)
    assert validate_layout(lay).valid
    assert variance(lay.positions) == pytest.approx(closed_form_variance(D, Kb, L, d), rel=1e-9)


def test_closed_form_agreement_1000_draws():
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(1000):
        Kb, L = int(rng.integers(1, 5)), int(rng.integers(2, 10))
        d = float(rng.uniform(0.01, 0.5))
        D = (Kb * L - 1) * d * float(rng.uniform(1.0, 5.0))
        cf = closed_form_variance(D, Kb, L, d)
        for v in PlacementVariant:
            worst = max(worst, abs(variance(optimal_positions(D, Kb, L, d, v).positions) - cf) / cf)
    assert worst < 1e-12


@given(geometries(), st.floats(1.0, 3.0))
def test_closed_form_non_decreasing_in_D(g, scale):
    D, Kb, L, d = g
    assert closed_form_variance(D * scale, Kb, L, d) >= closed_form_variance(D, Kb, L, d) * (1 - 1e-12)


# --- brute force -------------------------------------------------------------

def test_brute_force_examples():
    lay, v = brute_force_optimal(0.4, 1, 4, 0.1, grid_step=0.05)
    assert v == pytest.approx(0.025, rel=1e-12)
    assert lay.positions == pytest.approx((0, 0.1, 0.3, 0.4))

    lay, v = brute_force_optimal(2.0, 2, 2, 0.1, grid_step=0.1)
    assert lay.positions == pytest.approx((0, 0.1, 1.9, 2.0))
    assert v == pytest.approx(0.905, rel=1e-12)

    lay, v = brute_force_optimal(0.3, 1, 4, 0.1, grid_step=0.1)
    assert lay.positions == pytest.approx((0, 0.1, 0.2, 0.3))
    assert v == pytest.approx(closed_form_variance(0.3, 1, 4, 0.1), rel=1e-12)


def test_brute_force_tie_break_is_lexicographic():
    # L=3, Kb=1: both odd variants are optimal; the smaller offset tuple wins
    lay, _ = brute_force_optimal(2.0, 1, 3, 0.1)
    assert lay.positions == pytest.approx((0, 0.1, 2.0))


def test_brute_force_refuses_large_search():
    with pytest.raises(SearchSpaceError) as info:
        brute_force_optimal(2.0, 1, 8, 0.1, grid_step=0.01)
    assert info.value.candidates > 10**7
    assert info.value.suggested_step == pytest.approx(0.1)
    _, v = brute_force_optimal(2.0, 1, 8, 0.1, grid_step=info.value.suggested_step)
    assert v == pytest.approx(closed_form_variance(2.0, 1, 8, 0.1), rel=1e-12)


def test_brute_force_refusal_without_suggestion():
    with pytest.raises(SearchSpaceError) as info:
        brute_force_optimal(20.0, 1, 8, 0.1, grid_step=0.01)
    assert info.value.suggested_step is None
    assert "reduce D" in str(info.value)


def test_brute_force_grid_must_divide():
    with pytest.raises(DomainError):
        brute_force_optimal(2.0, 1, 3, 0.1, grid_step=0.03)


def test_brute_force_unequal_groups():
    lay, v = brute_force_optimal(1.0, None, None, 0.1, group_sizes=(1, 2, 1))
    assert validate_layout(lay).valid
    assert v == pytest.approx(variance(lay.positions), rel=1e-12)


@given(st.integers(1, 3), st.integers(2, 4), st.integers(0, 8))
def test_brute_force_never_beats_closed_form(Kb, L, extra):
    d = 0.1
    K = Kb * L
    D = round((K - 1 + extra) * d, 10)
    _, v = brute_force_optimal(D, Kb, L, d)
    assert v == pytest.approx(closed_form_variance(D, Kb, L, d), rel=1e-12)


# --- fixed positions ---------------------------------------------------------

@pytest.mark.parametrize("K, expected", [(2, 0.0025), (8, 0.0525), (20, 0.3325)])
def test_fp_variance(K, expected):
    assert variance(fp_positions(K, 0.2)) == pytest.approx(expected, rel=1e-12)
    assert fp_variance(K, 0.2) == pytest.approx(expected, rel=1e-12)


def test_fp_positions_values():
    assert fp_positions(2, 0.2) == pytest.approx([0, 0.1])
    with pytest.raises(DomainError):
        fp_positions(1, 0.2)


def test_is_feasible_boundary():
    assert is_feasible(0.3, 4, 0.1)
    assert not is_feasible(0.29, 4, 0.1)
    assert not math.isnan(closed_form_variance(0.3, 1, 4, 0.1))
