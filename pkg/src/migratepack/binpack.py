"""Items, configurations, the configuration LP, packings and migration accounting."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Iterable, Mapping

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ExplosionGuard, MigratePackError, SlotShortfall
from .lp_core import Lp, LpSolution, fmt_rational, to_fraction

DEFAULT_CONFIG_CAP = 10**6


@dataclass(frozen=True)
class Item:
    id: int
    size: Fraction

    def __post_init__(self):
        s = to_fraction(self.size)
        object.__setattr__(self, "size", s)
        if not 0 < s <= 1:
            raise MigratePackError(f"item {self.id}: size {s} outside (0, 1]")


def classify(item: Item, eps) -> str:
    eps = to_fraction(eps)
    if not 0 < eps <= Fraction(1, 2):
        raise MigratePackError("0 < eps <= 1/2 required")
    return "small" if item.size < eps / 2 else "large"


# A configuration is a sorted tuple of (class handle, count) pairs.
Configuration = tuple


def make_config(counts: Mapping[int, int]) -> Configuration:
    return tuple(sorted((h, c) for h, c in counts.items() if c > 0))


def config_load(cfg: Configuration, sizes: Mapping[int, Fraction]) -> Fraction:
    return sum((sizes[h] * c for h, c in cfg), Fraction(0))


@dataclass(frozen=True)
class RoundedInstance:
    classes: tuple  # (handle, rounded size, multiplicity), sizes non-increasing

    def __post_init__(self):
        for h, s, b in self.classes:
            if b < 1:
                raise MigratePackError(f"class {h} has multiplicity {b}")

    @property
    def handles(self) -> list:
        return [h for h, _, _ in self.classes]

    @property
    def sizes(self) -> dict:
        return {h: s for h, s, _ in self.classes}

    @property
    def rhs(self) -> list:
        return [b for _, _, b in self.classes]


def enumerate_configurations(inst: RoundedInstance, cap: int = DEFAULT_CONFIG_CAP) -> list:
    """All non-empty count vectors fitting in one bin, in lexicographic order of counts."""
    hs = inst.handles
    sizes = [s for _, s, _ in inst.classes]
    out = []
    counts = [0] * len(hs)

    def rec(k: int, room: Fraction):
        if k == len(hs):
            if any(counts):
                out.append(make_config(dict(zip(hs, counts))))
                if len(out) > cap:
                    raise ExplosionGuard(f"more than {cap} configurations")
            return
        c = 0
        while True:
            counts[k] = c
            rec(k + 1, room - c * sizes[k])
            c += 1
            if c * sizes[k] > room:
                break
        counts[k] = 0

    rec(0, Fraction(1))
    return sorted(out, key=lambda cfg: [dict(cfg).get(h, 0) for h in hs])


class ConfigLp(Lp):
    """Configuration LP that remembers which configuration each column is."""

    __slots__ = ("configs", "handles", "index")

    def __init__(self, inst: RoundedInstance, configs: list):
        rows = [[dict(cfg).get(h, 0) for cfg in configs] for h in inst.handles]
        super().__init__(rows, inst.rhs)
        self.configs = list(configs)
        self.handles = inst.handles
        self.index = {cfg: j for j, cfg in enumerate(configs)}

    def to_vector(self, sol: Mapping[Configuration, Fraction]) -> LpSolution:
        vals = {}
        for cfg, v in sol.items():
            if v == 0:
                continue
            if cfg not in self.index:
                raise MigratePackError(f"configuration {cfg} is not a column of this LP")
            vals[self.index[cfg]] = Fraction(v)
        return LpSolution(vals)

    def from_vector(self, x: LpSolution) -> dict:
        return {self.configs[j]: v for j, v in x.values.items()}


def build_config_lp(inst: RoundedInstance, cap: int = DEFAULT_CONFIG_CAP) -> ConfigLp:
    if not inst.classes:
        raise MigratePackError("empty rounded instance")
    return ConfigLp(inst, enumerate_configurations(inst, cap))


@dataclass(frozen=True)
class PackingState:
    """Immutable snapshot: bin id -> frozenset of item ids, plus item sizes."""

    bins: tuple
    sizes: Mapping = field(compare=False, repr=False)

    @property
    def bin_count(self) -> int:
        return len(self.bins)

    def bin_map(self) -> dict:
        return dict(self.bins)

    def load(self, bid) -> Fraction:
        return sum((self.sizes[i] for i in self.bin_map()[bid]), Fraction(0))

    def assignment(self) -> dict:
        return {i: bid for bid, content in self.bins for i in content}

    def items(self) -> set:
        return {i for _, content in self.bins for i in content}


class Bin:
    __slots__ = ("id", "label", "slots", "own", "smalls")

    def __init__(self, bid: int, label=None):
        self.id = bid
        self.label = label
        self.slots = {h: [] for h, _ in label} if label else {}
        self.own = None
        self.smalls = []

    def large(self) -> list:
        out = [i for ids in self.slots.values() for i in ids]
        if self.own is not None:
            out.append(self.own)
        return out

    def contents(self) -> list:
        return self.large() + self.smalls

    def relabel(self, label) -> None:
        slots = {h: [] for h, _ in label} if label else {}
        for h, ids in self.slots.items():
            if ids:
                if h not in slots:
                    raise MigratePackError(f"bin {self.id}: relabel drops occupied class {h}")
                slots[h] = ids
        self.label = label
        self.slots = slots


class LivePacking:
    """Mutable packing that tracks which configuration slot each large item fills.

    Bins carry a configuration label (or None for single-item and small-only
    bins).  Operations mutate in place; callers copy first for value semantics.
    """

    def __init__(self, sizes: Mapping[int, Fraction]):
        self.sizes = dict(sizes)
        self.bins: dict = {}
        self.next_id = 0

    def copy(self) -> "LivePacking":
        c = LivePacking(self.sizes)
        c.next_id = self.next_id
        for bid, b in self.bins.items():
            nb = Bin(bid)
            nb.label = b.label
            nb.slots = {h: list(v) for h, v in b.slots.items()}
            nb.own = b.own
            nb.smalls = list(b.smalls)
            c.bins[bid] = nb
        return c

    def add_size(self, item: Item) -> None:
        self.sizes[item.id] = item.size

    def open_bin(self, label=None) -> Bin:
        b = Bin(self.next_id, label)
        self.bins[b.id] = b
        self.next_id += 1
        return b

    def load(self, b: Bin) -> Fraction:
        return sum((self.sizes[i] for i in b.contents()), Fraction(0))

    def locate(self, item_id: int):
        for b in self.bins.values():
            if b.own == item_id:
                return b, "own", None
            for h, ids in b.slots.items():
                if item_id in ids:
                    return b, "slot", h
            if item_id in b.smalls:
                return b, "small", None
        raise MigratePackError(f"item {item_id} is not packed")

    def label_counts(self) -> dict:
        out = {}
        for b in self.bins.values():
            if b.label:
                out[b.label] = out.get(b.label, 0) + 1
        return out

    def drop_empty(self) -> None:
        for bid in [bid for bid, b in self.bins.items() if not b.label and not b.contents()]:
            del self.bins[bid]

    def first_fit(self, item_id: int) -> None:
        s = self.sizes[item_id]
        for bid in sorted(self.bins):
            b = self.bins[bid]
            if self.load(b) + s <= 1:
                b.smalls.append(item_id)
                return
        self.open_bin().smalls.append(item_id)

    def evict_overflow(self, b: Bin) -> list:
        """Remove smalls (latest first) until the bin fits; returns the evicted ids."""
        out = []
        while self.load(b) > 1 and b.smalls:
            out.append(b.smalls.pop())
        if self.load(b) > 1:
            raise MigratePackError(f"bin {b.id} over capacity from large items alone")
        return out

    def free_slot(self, handle: int):
        for bid in sorted(self.bins):
            b = self.bins[bid]
            if b.label and handle in b.slots and len(b.slots[handle]) < dict(b.label)[handle]:
                return b
        return None

    def sync_to(self, y: Mapping[Configuration, int], class_of: Mapping[int, int]) -> None:
        """Make the multiset of bin labels equal y, moving as few bins as the rule allows.

        Surplus bins with the fewest large items are emptied; their items fill
        free slots of the remaining and newly opened bins.
        """
        have = self.label_counts()
        displaced, loose = [], []
        for cfg in sorted(set(have) | set(y)):
            extra = have.get(cfg, 0) - y.get(cfg, 0)
            if extra > 0:
                cands = [b for b in self.bins.values() if b.label == cfg]
                cands.sort(key=lambda b: (len(b.large()), self.load(b), b.id))
                for b in cands[:extra]:
                    displaced += [i for ids in b.slots.values() for i in ids]
                    loose += b.smalls
                    del self.bins[b.id]
            elif extra < 0:
                for _ in range(-extra):
                    self.open_bin(cfg)
        touched = set()
        for i in sorted(displaced, key=lambda i: (-self.sizes[i], i)):
            b = self.free_slot(class_of[i])
            if b is None:
                raise SlotShortfall(f"no free slot of class {class_of[i]} for item {i}")
            b.slots[class_of[i]].append(i)
            touched.add(b.id)
        for bid in sorted(touched):
            loose += self.evict_overflow(self.bins[bid])
        for i in sorted(loose):
            self.first_fit(i)
        self.drop_empty()

    def snapshot(self) -> PackingState:
        bins = tuple((bid, frozenset(b.contents())) for bid, b in sorted(self.bins.items()) if b.contents())
        return PackingState(bins, self.sizes)

    def nonempty_count(self) -> int:
        return sum(1 for b in self.bins.values() if b.contents())


def first_fit(packing: PackingState, items: Iterable[Item]) -> PackingState:
    sizes = dict(packing.sizes)
    bins = [(bid, set(c)) for bid, c in packing.bins]
    loads = [sum((sizes[i] for i in c), Fraction(0)) for _, c in bins]
    next_id = max((bid for bid, _ in bins), default=-1) + 1
    for it in items:
        sizes[it.id] = it.size
        for k, (bid, content) in enumerate(bins):
            if loads[k] + it.size <= 1:
                content.add(it.id)
                loads[k] += it.size
                break
        else:
            bins.append((next_id, {it.id}))
            loads.append(it.size)
            next_id += 1
    return PackingState(tuple((bid, frozenset(c)) for bid, c in bins), sizes)


def live_from_solution(rounding, y: Mapping[Configuration, int], smalls: Iterable[int] = ()) -> LivePacking:
    """Own bins for R^0 items, then one bin per unit of y filled in slot order; smalls by FirstFit."""
    live = LivePacking(rounding.sizes)
    for i in rounding.r0_items():
        live.open_bin().own = i
    queues = {h: list(ids) for h, ids in rounding.class_groups()}
    for cfg in sorted(y):
        for _ in range(int(y[cfg])):
            b = live.open_bin(cfg)
            for h, c in cfg:
                q = queues.get(h, [])
                b.slots[h] = q[:c]
                del q[:c]
    short = {h: len(q) for h, q in queues.items() if q}
    if short:
        raise SlotShortfall(f"y leaves items uncovered in classes {short}")
    for i in smalls:
        live.first_fit(i)
    return live


def pack_from_solution(rounding, y: Mapping[Configuration, int]) -> PackingState:
    return live_from_solution(rounding, y).snapshot()


def matched_overlap(before: PackingState, after: PackingState, skip: int | None = None) -> Fraction:
    """Largest total size kept in place over all one-to-one matchings of bins."""
    sizes = after.sizes
    left = [c - {skip} for _, c in before.bins]
    right = [c - {skip} for _, c in after.bins]
    right_pool = {}
    for k, c in enumerate(right):
        right_pool.setdefault(c, []).append(k)
    kept = Fraction(0)
    rest_l, used_r = [], set()
    # identical bins are matched first; an optimal matching always allows this
    for c in left:
        pool = right_pool.get(c)
        if c and pool:
            used_r.add(pool.pop())
            kept += sum((sizes[i] for i in c), Fraction(0))
        elif c:
            rest_l.append(c)
    rest_r = [c for k, c in enumerate(right) if k not in used_r and c]
    if not rest_l or not rest_r:
        return kept
    where = {}
    for k, c in enumerate(rest_r):
        for i in c:
            where[i] = k
    weights = [[Fraction(0)] * len(rest_r) for _ in rest_l]
    for r, c in enumerate(rest_l):
        for i in c:
            if i in where:
                weights[r][where[i]] += sizes[i]
    scale = lcm(*(w.denominator for row in weights for w in row))
    ints = [[int(w * scale) for w in row] for row in weights]
    if max(max(row) for row in ints) < 2**52:
        cost = np.array(ints, dtype=np.int64)
    else:
        cost = np.array([[float(w) for w in row] for row in weights])
    rows, cols = linear_sum_assignment(cost, maximize=True)
    return kept + sum((weights[r][c] for r, c in zip(rows, cols)), Fraction(0))


def migration_factor(before: PackingState, after: PackingState, arriving: Item) -> Fraction:
    return moved_size(before, after, arriving.id) / arriving.size


def moved_size(before: PackingState, after: PackingState, arriving_id: int | None = None) -> Fraction:
    total = sum((before.sizes[i] for i in before.items() if i != arriving_id), Fraction(0))
    return total - matched_overlap(before, after, arriving_id)


def read_items(text: str) -> list:
    items = []
    for line in text.splitlines():
        line = line.strip()
        if line:
            rec = json.loads(line)
            items.append(Item(int(rec["id"]), to_fraction(str(rec["size"]))))
    ids = [it.id for it in items]
    if ids != sorted(ids) or len(set(ids)) != len(ids):
        raise MigratePackError("item ids must be unique and increasing")
    return items


def write_items(items: Iterable[Item]) -> str:
    return "".join(json.dumps({"id": it.id, "size": fmt_rational(it.size)}) + "\n" for it in items)


def packing_to_json(p: PackingState) -> str:
    return json.dumps({str(bid): sorted(c) for bid, c in p.bins}, sort_keys=True)


def packing_from_json(text: str, sizes: Mapping[int, Fraction]) -> PackingState:
    raw = json.loads(text)
    bins = tuple((int(bid), frozenset(int(i) for i in ids)) for bid, ids in sorted(raw.items(), key=lambda kv: int(kv[0])))
    return PackingState(bins, dict(sizes))


def raw_packing_from_json(text: str) -> list:
    """Bins as lists so duplicate placements survive for validation."""
    raw = json.loads(text)
    return [(int(bid), [int(i) for i in ids]) for bid, ids in raw.items()]
