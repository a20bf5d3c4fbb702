import random
from dataclasses import replace
from fractions import Fraction as F

import pytest

from migratepack.binpack import Item
from migratepack.errors import BadEpsilon, DivisibilityError, MigratePackError
from migratepack.online import (
    PhaseMachine,
    alg7_budget,
    arrive,
    bootstrap_budget,
    derive_params,
    evaluate_properties,
    handoff_bootstrap,
    initial_state,
    run_stream,
    snap_up,
)

M = 4


def stream(seed, n, m=M):
    prm = derive_params(F(1, 2), pin_m=m, pin_delta=1)
    rng = random.Random(seed)
    lo = prm.eps_internal / 2
    return prm, [Item(i, lo + (1 - lo) * F(rng.randint(0, 10**4), 10**4)) for i in range(n)]


@pytest.fixture(scope="module")
def short_run():
    prm, items = stream(1, 80)
    state, stats = run_stream(prm, items, oracle_cap=12)
    return prm, items, state, stats


def test_derive_half():
    p = derive_params(F(1, 2))
    assert p.eps_internal == F(1, 160)
    assert p.m == 25600
    assert p.eps_bar == p.delta_bar == F(1, 10)
    assert p.Delta == 2 * p.eps_bar + p.eps_bar ** 2


def test_derive_rejects():
    with pytest.raises(BadEpsilon):
        derive_params(F(3, 5))
    with pytest.raises(BadEpsilon):
        derive_params(F(0))
    with pytest.raises(BadEpsilon):
        derive_params(F(1, 2), pin_m=3)


def test_derive_m_even():
    for k in range(3, 40):
        assert derive_params(F(1, k)).m % 2 == 0


def test_ratio_within_user_eps():
    # eps_bar = eps/5 so 2*Delta = 4eps/5 + 2eps^2/25, which is at most eps for eps <= 5/2
    for k in range(2, 60):
        eps = F(1, k)
        p = derive_params(eps)
        assert 2 * p.Delta == F(4, 5) * eps + 2 * eps * eps / 25
        assert 2 * p.Delta <= eps


def test_pins():
    p = derive_params(F(1, 2), pin_m=6, pin_delta=1)
    assert p.m == 6 and p.delta_bar == 1
    assert p.bootstrap_threshold == 8 * 5


def test_phase_machine_cycle():
    pm = PhaseMachine("insert", 0, 2)
    seen = []
    for _ in range(2 + 2 * 2 * 2):
        seen.append((pm.phase, pm.step, pm.pair))
        pm = pm.advance(4)
    assert seen == [
        ("insert", 0, 0), ("insert", 1, 0),
        ("creation", 0, 0), ("creation", 1, 0), ("union", 0, 0), ("union", 1, 0),
        ("creation", 0, 1), ("creation", 1, 1), ("union", 0, 1), ("union", 1, 1),
    ]
    assert (pm.phase, pm.K, pm.cycle) == ("insert", 4, 1)


def test_phase_machine_bootstrap_stays():
    assert PhaseMachine().advance(4) == PhaseMachine()


def test_first_small_item():
    st = initial_state(derive_params(F(1, 2), pin_m=M))
    st, s = arrive(st, Item(0, F(1, 1000)))
    assert s.kind == "small" and s.bins == 1 and s.migration == 0
    assert s.phase == "bootstrap"


def test_first_large_item():
    st = initial_state(derive_params(F(1, 2), pin_m=M))
    st, s = arrive(st, Item(0, F(1, 10)))
    assert s.kind == "large" and s.bins == 1 and s.migration == 0
    assert s.ok


def test_ids_must_increase():
    st = initial_state(derive_params(F(1, 2), pin_m=M))
    st, _ = arrive(st, Item(3, F(1, 10)))
    with pytest.raises(MigratePackError):
        arrive(st, Item(3, F(1, 10)))


def test_handoff_needs_divisibility():
    prm = derive_params(F(1, 2), pin_m=M)
    st = initial_state(prm)
    st = replace(st, large=tuple(Item(i, F(1, 2)) for i in range(M)))
    with pytest.raises(DivisibilityError):
        handoff_bootstrap(st)


def test_handoff_equal_groups():
    prm = derive_params(F(1, 2), pin_m=M)
    its = tuple(Item(i, F(1, 2) + F(i, 100)) for i in range(2 * (M + 1)))
    st = replace(initial_state(prm), items=its, large=its)
    h = handoff_bootstrap(st)
    assert h.rounding.group_sizes() == [2] * (M + 1)
    assert h.machine == PhaseMachine("insert", 0, 2)
    assert h.tau == len(its)
    assert all(h.y[c] >= v for c, v in h.x.items())
    assert sum(h.y.values()) <= sum(h.x.values()) + M + 1


def test_bootstrap_exit_rule(short_run):
    prm, items, _, stats = short_run
    tau = next(s.t for s in stats if s.phase == "bootstrap>insert")
    large = [it for it in items[:tau] if it.size >= prm.eps_internal / 2]
    assert len(large) % (M + 1) == 0
    assert sum(it.size for it in large) > prm.bootstrap_threshold
    # no earlier divisible point already crossed the threshold
    for s in stats[: tau - 1]:
        nl = [it for it in items[: s.t] if it.size >= prm.eps_internal / 2]
        if len(nl) % (M + 1) == 0 and len(nl) >= M + 1:
            assert sum(it.size for it in nl) <= prm.bootstrap_threshold
    assert all(s.phase == "bootstrap" for s in stats[: tau - 1])


def test_short_stream_invariants(short_run):
    prm, _, _, stats = short_run
    for s in stats:
        assert all(s.properties.values()), (s.t, s.properties)
        assert s.certificate == (), (s.t, s.certificate[:2])
        assert s.migration <= s.budget
    assert any(s.phase == "creation" for s in stats)


def test_short_stream_budgets(short_run):
    prm, _, _, stats = short_run
    for s in stats:
        if s.phase.startswith("bootstrap"):
            assert s.budget == bootstrap_budget(prm, s.total_size) or s.kind == "small"
        elif s.kind == "large":
            assert s.budget == alg7_budget(prm)


def test_short_stream_embedding(short_run):
    _, _, state, stats = short_run
    tau = state.tau
    assert all(s.embed for s in stats if s.t >= tau)
    assert all(s.embed is None for s in stats if s.t < tau)


def test_short_stream_bins_count(short_run):
    _, _, state, stats = short_run
    last = stats[-1]
    # bins are y-bins plus own bins, and FirstFit never opened extra ones here
    assert last.bins <= last.y_norm + last.r0
    assert last.bins == state.packing.nonempty_count()


def test_oracle_used_when_small(short_run):
    _, _, _, stats = short_run
    assert all(s.opt_exact is not None for s in stats[:12])
    assert all(s.opt_exact is None for s in stats[12:])
    assert all(s.opt_exact >= s.opt_lb for s in stats[:12])


def test_adversarial_same_verdict(short_run):
    prm, items, _, stats = short_run
    _, adv = run_stream(prm, items[:66], oracle_cap=0, adversarial=True)
    assert [s.ok for s in adv] == [s.ok for s in stats[:66]]


def test_snap_up_dominates():
    x = {"a": F(1, 3), "b": F(2)}
    y = snap_up(x)
    assert y["b"] == 2
    assert x["a"] <= y["a"] < x["a"] + F(1, 2**20)
    assert (y["a"] * 2**20).denominator == 1


def test_evaluate_properties():
    prm = derive_params(F(1, 2), pin_m=M)
    x = {((1, 1),): F(3, 2)}
    y = {((1, 1),): 2}
    ok = evaluate_properties(prm, 3, F(3, 2), 1, x, y, 3)
    assert all(ok.values())
    bad = evaluate_properties(prm, 3, F(3, 2), 1, {((1, 1),): F(5, 2)}, y, 3)
    assert not bad["dominated"]
