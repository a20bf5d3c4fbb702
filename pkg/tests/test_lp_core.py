import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from migratepack.binpack import RoundedInstance, build_config_lp
from migratepack.errors import CapTooSmall, InfeasibleRow
from migratepack.lp_core import (
    Lp,
    LpSolution,
    fmt_rational,
    format_lp,
    format_solution,
    parse_lp,
    parse_solution,
    reduce_support,
    solve_approx,
    solve_exact,
    to_fraction,
)

from helpers import rand_lp, vertex_min


def test_identity():
    x = solve_exact(Lp([[1, 0], [0, 1]], [1, 1]))
    assert x.values == {0: 1, 1: 1}
    assert x.objective == 2


def test_two_by_two():
    # basic solutions: (1,2)->3, (0,3)->3 via surplus on row 0, best is 3 at (0,3)
    x = solve_exact(Lp([[2, 1], [0, 1]], [2, 3]))
    assert x.objective == 3
    assert x.values == {1: 3}


def test_config_lp_lin_two():
    inst = RoundedInstance(((0, F(3, 5), 2), (1, F(2, 5), 2)))
    lp = build_config_lp(inst)
    x = solve_exact(lp)
    assert x.objective == 2
    assert lp.from_vector(x) == {((0, 1), (1, 1)): 2}


def test_zero_row_rejected():
    with pytest.raises(InfeasibleRow):
        solve_exact(Lp([[0, 0], [1, 1]], [1, 1]))


def test_negative_entries_rejected():
    with pytest.raises(ValueError):
        Lp([[1, -1]], [1])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_optimum_matches_vertex_enumeration(seed):
    rng = random.Random(seed)
    lp = rand_lp(rng, rng.randint(1, 3), rng.randint(1, 4))
    x = solve_exact(lp)
    assert lp.is_feasible(x)
    assert len(x.values) <= lp.m
    assert x.objective == vertex_min(lp)


def test_solution_invariants():
    x = LpSolution({0: F(1, 2), 3: F(0)})
    assert x.values == {0: F(1, 2)}
    assert x.objective == F(1, 2)
    with pytest.raises(ValueError):
        LpSolution({0: F(-1)})


def test_approx_rho_zero_is_exact():
    lp = Lp([[1, 2], [3, 1]], [4, 5])
    assert solve_approx(lp, 0) == solve_exact(lp)


def test_approx_adversarial_inflates_to_bound():
    x = solve_approx(Lp([[1]], [4]), F(1, 2), adversarial=True)
    assert x.values == {0: 6}


def test_approx_ratio():
    lp = Lp([[1, 1]], [2])
    for adv in (False, True):
        assert solve_approx(lp, F(1, 4), adv).objective <= F(5, 2)


def test_reduce_support_untouched_under_cap():
    lp = Lp([[1, 1]], [2])
    x = LpSolution({0: 1, 1: 1})
    assert reduce_support(lp, x, 2) == x


def test_reduce_support_cap_too_small():
    with pytest.raises(CapTooSmall):
        reduce_support(Lp([[1, 1]], [2]), LpSolution({0: 1, 1: 1}), 1)


def test_reduce_support_one_row():
    lp = Lp([[1, 1, 1]], [3])
    y = reduce_support(lp, LpSolution({0: 1, 1: 1, 2: 1}), 2)
    assert len(y.values) <= 2
    assert y.objective == 3
    assert lp.is_feasible(y)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_reduce_support_preserves_product(seed):
    rng = random.Random(seed)
    lp = rand_lp(rng, rng.randint(1, 3), rng.randint(4, 7))
    x = LpSolution({j: F(rng.randint(1, 6), rng.randint(1, 4)) for j in range(lp.n)})
    # scale up to feasibility
    worst = max((bi / ai for bi, ai in zip(lp.b, lp.product(x)) if ai), default=F(1))
    x = x.scaled(max(worst, F(1)))
    assert lp.is_feasible(x)
    y = reduce_support(lp, x, lp.m + 1)
    assert len(y.values) <= lp.m + 1
    assert y.objective == x.objective
    assert lp.product(y) == lp.product(x)


def test_text_round_trip():
    lp = Lp([[F(1, 2), 0], ["0.25", 3]], [1, F(7, 3)])
    text = format_lp(lp)
    assert text == "2 2\n1/2 0/1\n1/4 3/1\n1/1 7/3\n"
    assert parse_lp(text) == lp
    x = LpSolution({1: F(3, 4), 0: F(2)})
    assert parse_solution(format_solution(x)) == x


def test_fmt_rational():
    assert fmt_rational(F(6, 4)) == "3/2"
    assert fmt_rational(F(3)) == "3/1"
    assert to_fraction("0.125") == F(1, 8)
