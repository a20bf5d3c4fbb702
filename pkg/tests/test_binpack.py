import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from migratepack.binpack import (
    Item,
    PackingState,
    RoundedInstance,
    build_config_lp,
    classify,
    enumerate_configurations,
    first_fit,
    make_config,
    migration_factor,
    pack_from_solution,
    packing_from_json,
    packing_to_json,
    read_items,
    write_items,
)
from migratepack.errors import ExplosionGuard, MigratePackError, SlotShortfall
from migratepack.lp_core import solve_exact
from migratepack.oracle import brute_opt, verify_packing
from migratepack.rounding import Group, RoundingState

from helpers import rand_items


def packing(*bins, sizes):
    return PackingState(tuple((k, frozenset(c)) for k, c in enumerate(bins)), sizes)


def rounding(r0, *groups, sizes):
    gs = [Group(0, "r0", tuple(r0))] + [Group(k + 1, "group", tuple(g)) for k, g in enumerate(groups)]
    return RoundingState(tuple(gs), sizes, len(gs))


def test_classify_examples():
    assert classify(Item(0, F(1, 5)), F(1, 2)) == "small"
    assert classify(Item(0, F(1, 4)), F(1, 2)) == "large"
    assert classify(Item(0, F(1)), F(1, 10)) == "large"


def test_classify_rejects_eps():
    with pytest.raises(MigratePackError):
        classify(Item(0, F(1, 2)), F(3, 4))


def test_item_size_range():
    with pytest.raises(MigratePackError):
        Item(0, F(0))
    with pytest.raises(MigratePackError):
        Item(0, F(3, 2))


def test_enumerate_two_sizes():
    inst = RoundedInstance(((0, F(3, 5), 1), (1, F(2, 5), 1)))
    cfgs = enumerate_configurations(inst)
    expect = {make_config(d) for d in ({0: 1}, {1: 1}, {1: 2}, {0: 1, 1: 1})}
    assert set(cfgs) == expect and len(cfgs) == 4


def test_enumerate_single_sizes():
    assert enumerate_configurations(RoundedInstance(((0, F(3, 5), 1),))) == [((0, 1),)]
    assert set(enumerate_configurations(RoundedInstance(((0, F(1, 2), 1),)))) == {((0, 1),), ((0, 2),)}


def test_enumerate_guard():
    inst = RoundedInstance(tuple((k, F(1, 20), 1) for k in range(4)))
    with pytest.raises(ExplosionGuard):
        enumerate_configurations(inst, cap=50)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(5, 20), min_size=1, max_size=4, unique=True))
def test_enumerate_is_complete(nums):
    sizes = sorted((F(k, 20) for k in nums), reverse=True)
    inst = RoundedInstance(tuple((h, s, 1) for h, s in enumerate(sizes)))
    got = set(enumerate_configurations(inst))
    expect = set()
    ranges = [range(int(1 / s) + 1) for s in sizes]

    def rec(k, acc):
        if k == len(sizes):
            if any(acc) and sum(c * s for c, s in zip(acc, sizes)) <= 1:
                expect.add(make_config(dict(enumerate(acc))))
            return
        for c in ranges[k]:
            rec(k + 1, acc + [c])

    rec(0, [])
    assert got == expect
    assert len(got) <= (2 / (2 * min(sizes)) + 1) ** len(sizes)


def test_config_lp_examples():
    lp = build_config_lp(RoundedInstance(((0, F(3, 5), 2), (1, F(2, 5), 2))))
    assert (lp.m, lp.n) == (2, 4)
    assert solve_exact(lp).objective == 2
    assert solve_exact(build_config_lp(RoundedInstance(((0, F(1), 5),)))).objective == 5
    assert solve_exact(build_config_lp(RoundedInstance(((0, F(1, 2), 3),)))).objective == F(3, 2)


def test_config_lp_empty():
    with pytest.raises(MigratePackError):
        build_config_lp(RoundedInstance(()))


def test_first_fit_one_item():
    p = first_fit(PackingState((), {}), [Item(0, F(1, 10))])
    assert p.bin_count == 1


def test_first_fit_four_thirds():
    p = first_fit(PackingState((), {}), [Item(k, F(3, 10)) for k in range(4)])
    assert [sorted(c) for _, c in p.bins] == [[0, 1, 2], [3]]


def test_first_fit_tops_up():
    p = packing({0}, sizes={0: F(95, 100)})
    q = first_fit(p, [Item(1, F(4, 100))])
    assert q.bin_count == 1 and q.load(0) == F(99, 100)


def test_first_fit_bound_against_oracle():
    rng = random.Random(11)
    eps = F(1, 2)
    for _ in range(40):
        large = rand_items(rng, rng.randint(0, 4), lo=F(1, 4))
        small = [Item(len(large) + k, F(rng.randint(1, 12), 50)) for k in range(rng.randint(1, 6))]
        small = [it for it in small if it.size < eps / 2]
        base = first_fit(PackingState((), {}), large)
        out = first_fit(base, small)
        opt = brute_opt(large + small).opt_bins
        assert out.bin_count <= max(base.bin_count, (1 + eps) * opt + 1)
        assert verify_packing(large + small, [(b, sorted(c)) for b, c in out.bins])[0]


def test_pack_single_class():
    sizes = {0: F(3, 5), 1: F(3, 5)}
    p = pack_from_solution(rounding((), (0, 1), sizes=sizes), {((1, 1),): 2})
    assert p.bin_count == 2 and all(len(c) == 1 for _, c in p.bins)


def test_pack_pair_slots():
    sizes = {0: F(1, 2), 1: F(1, 2)}
    p = pack_from_solution(rounding((), (0, 1), sizes=sizes), {((1, 2),): 1})
    assert [sorted(c) for _, c in p.bins] == [[0, 1]]


def test_pack_r0_own_bin():
    sizes = {0: F(9, 10), 1: F(1, 2)}
    p = pack_from_solution(rounding((0,), (1,), sizes=sizes), {((1, 1),): 1})
    assert p.bin_count == 2
    assert frozenset({0}) in {c for _, c in p.bins}


def test_pack_shortfall():
    sizes = {0: F(1, 2), 1: F(1, 2), 2: F(1, 2)}
    with pytest.raises(SlotShortfall):
        pack_from_solution(rounding((), (0, 1, 2), sizes=sizes), {((1, 2),): 1})


def test_pack_bin_count_is_norm_plus_r0():
    sizes = {0: F(9, 10), 1: F(1, 2), 2: F(1, 2), 3: F(2, 5)}
    R = rounding((0,), (1, 2), (3,), sizes=sizes)
    y = {((1, 1), (2, 1)): 1, ((1, 1),): 1}
    p = pack_from_solution(R, y)
    assert p.bin_count == 2 + 1
    assert all(p.load(b) <= 1 for b, _ in p.bins)


def test_migration_nothing_moved():
    sizes = {0: F(1, 2), 1: F(1, 4)}
    before = packing({0}, sizes=sizes)
    after = packing({0}, {1}, sizes=sizes)
    assert migration_factor(before, after, Item(1, F(1, 4))) == 0


def test_migration_ratio():
    # six halves re-paired: the best bin matching keeps 3/2 in place, so 3/2 moves
    sizes = {k: F(1, 2) for k in range(7)}
    before = packing({0, 1}, {2, 3}, {4, 5}, sizes=sizes)
    after = packing({0, 2}, {1, 4}, {3, 5}, {6}, sizes=sizes)
    assert migration_factor(before, after, Item(6, F(1, 2))) == 3


def test_migration_relabel_is_free():
    sizes = {0: F(1, 2), 1: F(1, 3), 2: F(1, 5), 3: F(1, 5)}
    before = PackingState(((0, frozenset({0, 2})), (1, frozenset({1}))), sizes)
    after = PackingState(((7, frozenset({1})), (3, frozenset({0, 2})), (9, frozenset({3}))), sizes)
    assert migration_factor(before, after, Item(3, F(1, 5))) == 0


def test_migration_arriving_excluded():
    sizes = {0: F(1, 2), 1: F(1, 4)}
    before = packing({0}, sizes=sizes)
    after = packing({0, 1}, sizes=sizes)
    assert migration_factor(before, after, Item(1, F(1, 4))) == 0


def test_items_round_trip():
    its = [Item(0, F(1, 3)), Item(2, F(1))]
    text = write_items(its)
    assert text == '{"id": 0, "size": "1/3"}\n{"id": 2, "size": "1/1"}\n'
    assert read_items(text) == its


def test_items_ids_increasing():
    with pytest.raises(MigratePackError):
        read_items('{"id": 1, "size": "1/2"}\n{"id": 0, "size": "1/2"}\n')


def test_packing_json_round_trip():
    sizes = {0: F(1, 2), 1: F(1, 3), 2: F(1, 5)}
    p = packing({0, 2}, {1}, sizes=sizes)
    assert packing_from_json(packing_to_json(p), sizes) == p
