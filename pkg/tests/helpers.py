"""Shared generators and independent oracles for the test suite."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction as F
from math import ceil

from migratepack.binpack import Item
from migratepack.improve import IntegralSolution
from migratepack.lp_core import Lp, LpSolution, solve_exact
from migratepack.rounding import begin_creation, creation_step, insert_op, modified_insert_op, offline_round, union_step


def rand_rational(rng: random.Random, top: int = 12, denom: int = 12) -> F:
    return F(rng.randint(0, top), rng.randint(1, denom))


def rand_lp(rng: random.Random, m: int, n: int, b_scale: int = 1, denom: int = 12) -> Lp:
    """Non-negative A with no zero row; b positive with denominators at most ``denom``."""
    A = []
    for _ in range(m):
        row = [rand_rational(rng, 12, denom) if rng.random() < 0.7 else F(0) for _ in range(n)]
        if not any(row):
            row[rng.randrange(n)] = F(rng.randint(1, 12), rng.randint(1, denom))
        A.append(row)
    b = [F(rng.randint(1, 12 * b_scale), rng.randint(1, denom)) for _ in range(m)]
    return Lp(A, b)


def gauss_solve(M, rhs):
    """Unique solution of the square system M z = rhs, or None if singular."""
    k = len(M)
    aug = [list(M[i]) + [rhs[i]] for i in range(k)]
    for c in range(k):
        piv = next((r for r in range(c, k) if aug[r][c] != 0), None)
        if piv is None:
            return None
        aug[c], aug[piv] = aug[piv], aug[c]
        for r in range(k):
            if r != c and aug[r][c] != 0:
                f = aug[r][c] / aug[c][c]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[c])]
    return [aug[i][k] / aug[i][i] for i in range(k)]


def vertex_min(lp: Lp) -> F:
    """Minimum of sum(x) over all basic feasible solutions of [A, -I](x, s) = b."""
    m, n = lp.m, lp.n
    cols = [list(lp.column(j)) for j in range(n)] + [[F(-1) if i == k else F(0) for i in range(m)] for k in range(m)]
    best = None
    for basis in itertools.combinations(range(n + m), m):
        M = [[cols[j][i] for j in basis] for i in range(m)]
        z = gauss_solve(M, lp.b)
        if z is None or any(v < 0 for v in z):
            continue
        obj = sum((v for j, v in zip(basis, z) if j < n), F(0))
        best = obj if best is None else min(best, obj)
    return best


def lin_of(lp: Lp) -> F:
    return solve_exact(lp).objective


def inflate(x: LpSolution, delta) -> LpSolution:
    """x scaled to objective exactly (1+delta) times its own."""
    return x.scaled(1 + F(delta))


def paired_inputs(lp: Lp, delta):
    """(x_opt, x', y') with x' = (1+delta) x_opt and y' = ceil(x')."""
    x_opt = solve_exact(lp)
    xp = inflate(x_opt, delta)
    yp = IntegralSolution({j: ceil(v) for j, v in xp.values.items()})
    return x_opt, xp, yp


def rand_items(rng: random.Random, n: int, lo=F(1, 20), denom: int = 20, start: int = 0) -> list:
    out = []
    for k in range(n):
        s = F(rng.randint(1, denom), denom)
        out.append(Item(start + k, max(s, lo)))
    return out


def doubling_cycle(K: int, m: int, seed: int, start=None, check=None):
    """One full insert/creation/union cycle from m+1 equal groups of K random items.

    ``start(R)`` builds (B, x, y) for the initial rounding; ``check`` runs after
    every arrival.  Returns the final rounding, the group sizes at each phase
    end (first row is the start) and the number of large items.
    """
    rng = random.Random(seed)
    n = K * (m + 1)
    R = offline_round([Item(i, F(rng.randint(1, 1000), 1000)) for i in range(n)], m)
    B, x, y = start(R) if start else (None, None, None)
    check = check or (lambda *a: None)
    nid = n
    rows = [R.group_sizes()]

    def fresh():
        nonlocal nid
        nid += 1
        return Item(nid - 1, F(rng.randint(1, 1000), 1000))

    for _ in range(K):
        R, B, x, y, _ = insert_op(R, B, x, y, fresh())
        check(R, B, x, y)
    rows.append(R.group_sizes())
    for _ in range(m // 2):
        R = begin_creation(R)
        for _ in range(K):
            R, B, x, y, _ = modified_insert_op(R, B, x, y, fresh())
            R, B, x, y = creation_step(R, B, x, y)
            check(R, B, x, y)
        rows.append(R.group_sizes())
        for _ in range(K):
            R, B, x, y, _ = insert_op(R, B, x, y, fresh())
            R, B, x, y = union_step(R, B, x, y)
            check(R, B, x, y)
        rows.append(R.group_sizes())
    return R, rows, nid


def report(name: str, ok: bool, detail: str = "") -> None:
    print(f"{'PASS' if ok else 'FAIL'} {name}{': ' + detail if detail else ''}")
