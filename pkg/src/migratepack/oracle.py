"""Brute-force ground truth: exact OPT, exact LIN and packing validation."""

from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from math import ceil, floor
from typing import Iterable, Sequence

from .binpack import Item, PackingState, RoundedInstance, build_config_lp
from .errors import TooLarge
from .lp_core import LpSolution, solve_exact

DEFAULT_CAP = 18


def oracle_cap() -> int:
    return int(os.environ.get("MIGRATEPACK_ORACLE_CAP", DEFAULT_CAP))


@dataclass(frozen=True)
class OracleResult:
    opt_bins: int
    witness: PackingState
    lin_value: Fraction | None = None
    lin_witness: LpSolution | None = None


def brute_opt(items: Sequence[Item], cap: int | None = None, with_lin: bool = False) -> OracleResult:
    """Branch and bound over item-to-bin assignments.

    Items are visited by decreasing size; a new bin is only ever opened by
    the lowest-index unassigned item, and bins with equal loads are tried once.
    """
    cap = oracle_cap() if cap is None else cap
    if len(items) > cap:
        raise TooLarge(f"{len(items)} items exceed the oracle cap {cap}")
    order = sorted(items, key=lambda it: (-it.size, it.id))
    sizes = [it.size for it in order]
    n = len(order)
    suffix = [Fraction(0)] * (n + 1)
    for k in range(n - 1, -1, -1):
        suffix[k] = suffix[k + 1] + sizes[k]
    lb = ceil(suffix[0]) if n else 0

    # first-fit decreasing as incumbent
    best_loads, best_assign = [], []
    for s in sizes:
        for b, ld in enumerate(best_loads):
            if ld + s <= 1:
                best_loads[b] += s
                best_assign.append(b)
                break
        else:
            best_loads.append(s)
            best_assign.append(len(best_loads) - 1)
    best = [len(best_loads), list(best_assign)]

    loads: list = []
    assign: list = []

    def rec(k: int):
        if k == n:
            if len(loads) < best[0]:
                best[0], best[1] = len(loads), list(assign)
            return
        free = sum((1 - ld for ld in loads), Fraction(0))
        extra = max(0, ceil(suffix[k] - free))
        if len(loads) + extra >= best[0]:
            return
        s = sizes[k]
        seen = set()
        for b, ld in enumerate(loads):
            if ld + s <= 1 and ld not in seen:
                seen.add(ld)
                loads[b] += s
                assign.append(b)
                rec(k + 1)
                assign.pop()
                loads[b] -= s
                if best[0] == lb:
                    return
        if len(loads) + 1 < best[0]:
            loads.append(s)
            assign.append(len(loads) - 1)
            rec(k + 1)
            assign.pop()
            loads.pop()

    if best[0] > lb:
        rec(0)
    bins = {}
    for it, b in zip(order, best[1]):
        bins.setdefault(b, set()).add(it.id)
    witness = PackingState(tuple((b, frozenset(c)) for b, c in sorted(bins.items())), {it.id: it.size for it in items})
    lin, lin_x = brute_lin(items) if with_lin and items else (None, None)
    return OracleResult(best[0], witness, lin, lin_x)


def brute_lin(items: Sequence[Item], rounding=None):
    """Exact LIN over the full configuration LP; items of equal size share a class."""
    if rounding is not None:
        from .rounding import round_instance
        inst = round_instance(rounding)
    else:
        counts = {}
        for it in items:
            counts[it.size] = counts.get(it.size, 0) + 1
        inst = RoundedInstance(tuple((k, s, counts[s]) for k, s in enumerate(sorted(counts, reverse=True))))
    if not inst.classes:
        return Fraction(0), LpSolution({})
    x = solve_exact(build_config_lp(inst))
    return x.objective, x


def lin_lower_bound(sizes: Iterable[Fraction], grid: int = 10) -> Fraction:
    """LIN of the instance with sizes rounded down to multiples of 1/grid; never above LIN."""
    down = [Fraction(floor(s * grid), grid) for s in sizes]
    down = [Item(k, s) for k, s in enumerate(down) if s > 0]
    return brute_lin(down)[0] if down else Fraction(0)


def verify_packing(items: Sequence[Item], bins) -> tuple:
    """bins: iterable of (bin id, iterable of item ids). Returns (ok, violations)."""
    sizes = {it.id: it.size for it in items}
    problems = []
    seen = {}
    for bid, content in bins:
        content = list(content)
        load = Fraction(0)
        for i in content:
            if i not in sizes:
                problems.append(f"unknown item {i} in bin {bid}")
                continue
            if i in seen:
                problems.append(f"item placed twice: {i} in bins {seen[i]} and {bid}")
            seen[i] = bid
            load += sizes[i]
        if load > 1:
            problems.append(f"bin over capacity: bin {bid} load {load}")
    for i in sizes:
        if i not in seen:
            problems.append(f"item not placed: {i}")
    return not problems, problems
