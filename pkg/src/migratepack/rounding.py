"""Rounding groups and the operations that keep them valid as items arrive.

A rounding is an ordered list of groups.  Position 0 holds the largest items,
which are never size-rounded and sit one per bin.  Every later group of kind
``group`` is a class of the configuration LP whose size is the group maximum.
During a creation phase two subgroups (kinds ``sub15``/``sub25``) live between
the groups; they behave like position 0.

The operations take an optional live packing and optional x/y solutions
(dicts keyed by configuration) and return updated copies of all of them.
"""

from __future__ import annotations

from bisect import insort
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Mapping

from .binpack import LivePacking, RoundedInstance, make_config
from .errors import MigratePackError, PhaseError, TooFewItems
from .lp_core import fmt_rational

OWN_KINDS = ("r0", "sub15", "sub25")


@dataclass(frozen=True)
class Group:
    handle: int
    kind: str
    items: tuple


@dataclass(frozen=True)
class RoundingState:
    groups: tuple
    sizes: Mapping
    next_handle: int
    union: tuple | None = None

    def key(self, i: int):
        return (-self.sizes[i], i)

    def lam(self, g: Group) -> int:
        return g.items[0]

    def iota(self, g: Group) -> int | None:
        return g.items[1] if len(g.items) > 1 else None

    def r0_items(self) -> list:
        return [i for g in self.groups if g.kind in OWN_KINDS for i in g.items]

    def r0_size(self) -> int:
        return len(self.r0_items())

    def class_groups(self) -> list:
        return [(g.handle, g.items) for g in self.groups if g.kind == "group" and g.items]

    def class_of(self) -> dict:
        return {i: g.handle for g in self.groups if g.kind == "group" for i in g.items}

    def rounded_size(self, handle: int) -> Fraction:
        g = self.by_handle(handle)
        return self.sizes[self.lam(g)]

    def by_handle(self, handle: int) -> Group:
        for g in self.groups:
            if g.handle == handle:
                return g
        raise MigratePackError(f"no group with handle {handle}")

    def index_of(self, handle: int) -> int:
        for k, g in enumerate(self.groups):
            if g.handle == handle:
                return k
        raise MigratePackError(f"no group with handle {handle}")

    def has_subs(self) -> bool:
        return any(g.kind in ("sub15", "sub25") for g in self.groups)

    def labels(self) -> list:
        out, k = [], 0
        for g in self.groups:
            if g.kind == "r0":
                out.append("0")
            elif g.kind == "group":
                k += 1
                out.append(str(k))
            else:
                out.append("1.5" if g.kind == "sub15" else "2.5")
        return out

    def group_sizes(self) -> list:
        """[|R^0| including subgroups, |R^1|, ..., |R^last|]."""
        return [self.r0_size()] + [len(g.items) for g in self.groups if g.kind == "group"]

    def lambda_sizes(self) -> list:
        return [self.sizes[g.items[0]] if g.items else None for g in self.groups]

    def large_count(self) -> int:
        return sum(len(g.items) for g in self.groups)


def _sorted_items(sizes: Mapping, ids) -> tuple:
    return tuple(sorted(ids, key=lambda i: (-sizes[i], i)))


def round_instance(R: RoundingState) -> RoundedInstance:
    return RoundedInstance(tuple((h, R.sizes[ids[0]], len(ids)) for h, ids in R.class_groups()))


def offline_round(items, m: int) -> RoundingState:
    """Position 0 gets the n - m*q largest items, q = n // (m+1); then m groups of q."""
    sizes = {it.id: it.size for it in items}
    n = len(sizes)
    if n < m + 1:
        raise TooFewItems(f"{n} large items, need at least m+1 = {m + 1}")
    order = _sorted_items(sizes, sizes)
    q = n // (m + 1)
    head = n - m * q
    groups = [Group(0, "r0", order[:head])]
    for k in range(m):
        groups.append(Group(k + 1, "group", order[head + k * q: head + (k + 1) * q]))
    return RoundingState(tuple(groups), sizes, m + 1)


def singleton_round(items) -> RoundingState:
    """Every item its own class and position 0 empty: the rounded instance is the instance."""
    sizes = {it.id: it.size for it in items}
    order = _sorted_items(sizes, sizes)
    groups = [Group(0, "r0", ())] + [Group(k + 1, "group", (i,)) for k, i in enumerate(order)]
    return RoundingState(tuple(groups), sizes, len(order) + 1)


def _copies(B, x, y):
    return (B.copy() if B is not None else None,
            dict(x) if x is not None else None,
            dict(y) if y is not None else None)


def _bump(sol: dict, cfg, delta) -> None:
    v = sol.get(cfg, 0) + delta
    if v:
        sol[cfg] = v
    else:
        sol.pop(cfg, None)


def _detach(B: LivePacking, item: int):
    """Remove item from its spot; return (bin, kind, handle) of the old spot."""
    b, kind, h = B.locate(item)
    if kind == "own":
        b.own = None
    elif kind == "slot":
        b.slots[h].remove(item)
    else:
        b.smalls.remove(item)
    return b, kind, h


def _cascade(R: RoundingState, B, item):
    sizes = dict(R.sizes)
    sizes[item.id] = item.size
    lists = [list(g.items) for g in R.groups]
    kinds = [g.kind for g in R.groups]
    positions = [k for k in range(1, len(lists)) if lists[k]]
    j = None
    for k in positions:
        if sizes[lists[k][0]] >= item.size:
            j = k
    chain = positions[: positions.index(j) + 1] if j is not None else []
    movers = [lists[k][0] for k in chain] + [item.id]
    targets = [0] + chain
    for k in chain:
        lists[k].pop(0)
    for mv, tgt in zip(movers, targets):
        insort(lists[tgt], mv, key=lambda i: (-sizes[i], i))

    if B is not None:
        B.add_size(item)
        handles = [g.handle for g in R.groups]
        prev = None
        for mv, tgt in zip(movers, targets):
            cur = None if mv == item.id else B.locate(mv)
            if kinds[tgt] == "group":
                if prev is None or prev[1] != "slot" or prev[2] != handles[tgt]:
                    raise MigratePackError("cascade lost the slot of the displaced group maximum")
                vac = _detach(B, mv) if cur else None
                prev[0].slots[handles[tgt]].append(mv)
            elif cur is not None and cur[1] == "own":
                vac = None
            else:
                vac = _detach(B, mv) if cur else None
                if prev is not None and prev[1] == "own" and prev[0].own is None and not prev[0].label:
                    prev[0].own = mv
                else:
                    B.open_bin().own = mv
            prev = vac
        B.drop_empty()

    groups = tuple(replace(g, items=tuple(lst)) for g, lst in zip(R.groups, lists))
    label = R.labels()[j] if j is not None else "0"
    return replace(R, groups=groups, sizes=sizes), label


def insert_op(R: RoundingState, B, x, y, item):
    """Item joins the last group whose maximum is at least its size; maxima shift one group up."""
    if R.has_subs():
        raise PhaseError("subgroups present: use modified_insert_op")
    B, x, y = _copies(B, x, y)
    R2, j = _cascade(R, B, item)
    return R2, B, x, y, j


def modified_insert_op(R: RoundingState, B, x, y, item):
    """Insertion that also walks through the creation subgroups."""
    if not R.has_subs():
        raise PhaseError("no subgroups: creation phase not active")
    B, x, y = _copies(B, x, y)
    R2, j = _cascade(R, B, item)
    return R2, B, x, y, j


def begin_creation(R: RoundingState) -> RoundingState:
    """Split position 0 (size 2k, k = |R^1|) into the subgroups and add two empty groups."""
    if R.has_subs():
        raise PhaseError("creation already active")
    r0 = R.groups[0]
    firsts = [g for g in R.groups if g.kind == "group"]
    k = len(firsts[0].items) if firsts else 0
    if len(r0.items) != 2 * k or k == 0:
        raise PhaseError(f"|R^0| = {len(r0.items)} but 2|R^1| = {2 * k}")
    h = R.next_handle
    head = (
        Group(0, "r0", ()),
        Group(h, "group", ()),
        Group(h + 1, "sub15", r0.items[:k]),
        Group(h + 2, "group", ()),
        Group(h + 3, "sub25", r0.items[k:]),
    )
    return replace(R, groups=head + R.groups[1:], next_handle=h + 4)


def creation_step(R: RoundingState, B, x, y):
    """Move the maxima of both subgroups into the two new groups; each gets a singleton config."""
    kinds = [g.kind for g in R.groups]
    if "sub15" not in kinds or "sub25" not in kinds:
        raise PhaseError("creation phase not initialised")
    s15, s25 = kinds.index("sub15"), kinds.index("sub25")
    g1, g2 = s15 - 1, s25 - 1
    lists = [list(g.items) for g in R.groups]
    if not lists[s15] or not lists[s25]:
        raise PhaseError("subgroups exhausted")
    B, x, y = _copies(B, x, y)
    handles = [g.handle for g in R.groups]
    for src, dst in ((s15, g1), (s25, g2)):
        mv = lists[src].pop(0)
        insort(lists[dst], mv, key=lambda i: (-R.sizes[i], i))
        cfg = make_config({handles[dst]: 1})
        if B is not None:
            b, kind, _ = B.locate(mv)
            if kind != "own":
                raise MigratePackError(f"subgroup item {mv} is not in its own bin")
            b.own = None
            b.relabel(cfg)
            b.slots[handles[dst]].append(mv)
        if x is not None:
            _bump(x, cfg, 1)
        if y is not None:
            _bump(y, cfg, 1)
    groups = [replace(g, items=tuple(lst)) for g, lst in zip(R.groups, lists)]
    if not lists[s15] and not lists[s25]:
        groups = [g for g in groups if g.kind not in ("sub15", "sub25")]
    return replace(R, groups=tuple(groups)), B, x, y


def union_index(R: RoundingState) -> int:
    """Position j (1-based among groups) whose group and the one two before it are drained."""
    sizes = [len(g.items) for g in R.groups if g.kind == "group"]
    last = len(sizes)
    j = last
    for k in range(1, last):
        if sizes[k - 1] < sizes[k]:
            j = k
    if j < 4:
        raise PhaseError(f"union index {j} leaves no group j-3")
    return j


def _drop_handles(R: RoundingState, B, x, y, dead: set):
    def strip(cfg):
        return tuple((h, c) for h, c in cfg if h not in dead)

    for sol in (x, y):
        if sol is None:
            continue
        merged = {}
        for cfg, v in sol.items():
            c2 = strip(cfg)
            if c2:
                merged[c2] = merged.get(c2, 0) + v
        sol.clear()
        sol.update(merged)
    if B is not None:
        for b in B.bins.values():
            if b.label and any(h in dead for h, _ in b.label):
                for h in dead:
                    if b.slots.get(h):
                        raise MigratePackError(f"bin {b.id} still holds items of a removed class")
                    b.slots.pop(h, None)
                b.label = strip(b.label) or None
        B.drop_empty()


def union_step(R: RoundingState, B, x, y):
    """lambda_j joins group j-1 in lambda_{j-2}'s slot; lambda_{j-2} joins group j-3 in a new bin."""
    if R.has_subs():
        raise PhaseError("subgroups present during union")
    if R.union is None:
        gs = [g for g in R.groups if g.kind == "group"]
        j = union_index(R)
        R = replace(R, union=tuple(gs[j - 1 - d].handle for d in range(4)))
    hj, hj1, hj2, hj3 = R.union
    idx = {h: R.index_of(h) for h in R.union}
    lists = [list(g.items) for g in R.groups]
    if not lists[idx[hj]] or not lists[idx[hj2]]:
        raise PhaseError("union groups exhausted")
    B, x, y = _copies(B, x, y)
    lam_j = lists[idx[hj]].pop(0)
    lam_j2 = lists[idx[hj2]].pop(0)
    key = lambda i: (-R.sizes[i], i)
    insort(lists[idx[hj1]], lam_j, key=key)
    insort(lists[idx[hj3]], lam_j2, key=key)

    if B is not None:
        b2, kind2, h2 = B.locate(lam_j2)
        b0, kind0, h0 = B.locate(lam_j)
        if kind2 != "slot" or kind0 != "slot":
            raise MigratePackError("union items must sit in configuration slots")
        C = b2.label
        b0.slots[hj].remove(lam_j)
        b2.slots[hj2].remove(lam_j2)
        counts = dict(C)
        counts[hj2] -= 1
        counts[hj1] = counts.get(hj1, 0) + 1
        C_hat = make_config(counts)
        b2.relabel(C_hat)
        b2.slots[hj1].append(lam_j)
        C_new = make_config({hj3: 1})
        B.open_bin(C_new).slots[hj3].append(lam_j2)
        if y is not None:
            _bump(y, C, -1)
            _bump(y, C_hat, 1)
            _bump(y, C_new, 1)
        if x is not None:
            xc = x.get(C, Fraction(0))
            # keep x <= y and equal supports while covering the shifted rhs
            if xc >= 1:
                f = Fraction(1)
            elif y is not None and C not in y:
                f = xc
            else:
                f = xc / 2
            _bump(x, C, -f)
            _bump(x, C_hat, 1)
            _bump(x, C_new, 1)
    groups = tuple(replace(g, items=tuple(lst)) for g, lst in zip(R.groups, lists))
    R2 = replace(R, groups=groups)
    if not lists[idx[hj]] and not lists[idx[hj2]]:
        dead = {g.handle for g in groups if g.kind == "group" and not g.items}
        R2 = replace(R2, groups=tuple(g for g in groups if g.kind != "group" or g.items), union=None)
        _drop_handles(R2, B, x, y, dead)
    return R2, B, x, y


@dataclass(frozen=True)
class PropertyReport:
    a_constant: Fraction
    b_equal: bool
    c_constant: Fraction | None
    d_monotone: bool

    def valid(self) -> bool:
        return (self.a_constant >= Fraction(1, 4) and self.b_equal and self.c_constant is not None
                and 1 <= self.c_constant <= 2 and self.d_monotone)


def monotone(R: RoundingState) -> bool:
    prev_min = None
    for g in R.groups:
        if not g.items:
            continue
        sz = [R.sizes[i] for i in g.items]
        if prev_min is not None and max(sz) > prev_min:
            return False
        prev_min = min(sz)
    return True


def check_properties(R: RoundingState, eps) -> PropertyReport:
    eps = Fraction(eps)
    gs = [len(g.items) for g in R.groups if g.kind == "group"]
    c = len(gs) * eps * eps
    b_equal = bool(gs) and all(s == gs[0] for s in gs) and gs[0] > 0
    d = Fraction(R.r0_size(), gs[0]) if gs and gs[0] else None
    return PropertyReport(c, b_equal, d, monotone(R))


def embed_check(R: RoundingState, t: int, K: int) -> bool:
    """Embed R into the canonical rounding with groups of 2K and position 0 of 2K + t mod 2K."""
    if t != R.large_count():
        raise MigratePackError(f"t = {t} but the rounding holds {R.large_count()} items")
    order = sorted((i for g in R.groups for i in g.items), key=R.key)
    head = 2 * K + t % (2 * K)
    if head > t:
        head = t
    if R.r0_size() > head:
        return False
    cls = {}
    for g in R.groups:
        for i in g.items:
            cls[i] = None if g.kind in OWN_KINDS else R.sizes[g.items[0]]
    for start in range(head, t, 2 * K):
        block = order[start: start + 2 * K]
        cap = R.sizes[block[0]]
        for i in block:
            if cls[i] is None or cls[i] > cap:
                return False
    return True


def trace_record(R: RoundingState, t: int, op: str, j, x=None, y=None) -> dict:
    return {
        "t": t,
        "op": op,
        "j": j,
        "group_sizes": R.group_sizes(),
        "lambda_sizes": [fmt_rational(s) if s is not None else None for s in R.lambda_sizes()],
        "x_norm": fmt_rational(sum(x.values(), Fraction(0))) if x is not None else None,
        "y_norm": int(sum(y.values())) if y is not None else None,
        "r0": R.r0_size(),
    }


def validate_correspondence(R: RoundingState, B: LivePacking, y: Mapping) -> list:
    """Problems found when comparing packing, rounding and y; empty means they correspond."""
    problems = []
    if B.label_counts() != {c: v for c, v in y.items() if v}:
        problems.append("bin labels differ from y")
    class_of = R.class_of()
    r0 = set(R.r0_items())
    for b in B.bins.values():
        if B.load(b) > 1:
            problems.append(f"bin {b.id} over capacity")
        if b.own is not None and b.own not in r0:
            problems.append(f"item {b.own} has its own bin but is not in position 0")
        if b.own is not None and b.label:
            problems.append(f"bin {b.id} mixes an own item with a configuration")
        for h, ids in b.slots.items():
            if len(ids) > dict(b.label).get(h, 0):
                problems.append(f"bin {b.id} overfills class {h}")
            for i in ids:
                if class_of.get(i) != h:
                    problems.append(f"item {i} sits in a slot of class {h}")
    return problems
