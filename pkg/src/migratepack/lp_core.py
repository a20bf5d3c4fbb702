"""Exact covering LPs: min sum(x) subject to Ax >= b, x >= 0.

All arithmetic uses ``fractions.Fraction``.  The solver is a revised
two-phase primal simplex (Dantzig pricing, Bland's rule on degenerate
steps), so results are deterministic
and every optimum returned is a basic solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Iterable, Mapping, Sequence

from .errors import CapTooSmall, InfeasibleRow, MigratePackError


def to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        # floats are converted through their shortest repr, not their binary value
        return Fraction(repr(value))
    return Fraction(value)


def fmt_rational(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


class Lp:
    """Covering LP with non-negative data and unit costs."""

    __slots__ = ("A", "b", "m", "n", "_cols")

    def __init__(self, A: Sequence[Sequence], b: Sequence):
        rows = tuple(tuple(to_fraction(v) for v in row) for row in A)
        rhs = tuple(to_fraction(v) for v in b)
        if not rows or len(rows) != len(rhs):
            raise MigratePackError("A and b must have the same positive number of rows")
        n = len(rows[0])
        if n == 0 or any(len(r) != n for r in rows):
            raise MigratePackError("A must be a non-empty rectangular matrix")
        for i, row in enumerate(rows):
            if any(v < 0 for v in row) or rhs[i] < 0:
                raise MigratePackError(f"negative entry in row {i}")
        self.A = rows
        self.b = rhs
        self.m = len(rows)
        self.n = n
        self._cols = None

    def column(self, j: int) -> tuple:
        if self._cols is None:
            self._cols = tuple(tuple(self.A[i][j] for i in range(self.m)) for j in range(self.n))
        return self._cols[j]

    def with_rhs(self, b: Sequence) -> "Lp":
        return Lp(self.A, b)

    def row_max(self) -> list:
        return [max(row) for row in self.A]

    def product(self, x: "LpSolution") -> list:
        out = [Fraction(0)] * self.m
        for j, v in x.values.items():
            col = self.column(j)
            for i in range(self.m):
                if col[i]:
                    out[i] += col[i] * v
        return out

    def is_feasible(self, x: "LpSolution") -> bool:
        if any(j < 0 or j >= self.n for j in x.values):
            return False
        return all(ax >= bi for ax, bi in zip(self.product(x), self.b))

    def __eq__(self, other):
        return isinstance(other, Lp) and self.A == other.A and self.b == other.b

    def __hash__(self):
        return hash((self.A, self.b))

    def __repr__(self):
        return f"Lp(m={self.m}, n={self.n})"


@dataclass(frozen=True)
class LpSolution:
    """Sparse non-negative vector; zero entries are never stored."""

    values: Mapping[int, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for j, v in self.values.items():
            v = to_fraction(v)
            if v < 0:
                raise MigratePackError(f"negative component {j}")
            if v:
                clean[int(j)] = v
        object.__setattr__(self, "values", dict(sorted(clean.items())))

    @classmethod
    def from_dense(cls, vec: Iterable) -> "LpSolution":
        return cls({j: v for j, v in enumerate(vec)})

    @property
    def objective(self) -> Fraction:
        return sum(self.values.values(), Fraction(0))

    @property
    def support(self) -> list:
        return list(self.values)

    def __getitem__(self, j: int) -> Fraction:
        return self.values.get(j, Fraction(0))

    def dense(self, n: int) -> list:
        return [self[j] for j in range(n)]

    def scaled(self, factor) -> "LpSolution":
        factor = to_fraction(factor)
        return LpSolution({j: v * factor for j, v in self.values.items()})

    def __add__(self, other: "LpSolution") -> "LpSolution":
        out = dict(self.values)
        for j, v in other.values.items():
            out[j] = out.get(j, Fraction(0)) + v
        return LpSolution(out)

    def __sub__(self, other: "LpSolution") -> "LpSolution":
        out = dict(self.values)
        for j, v in other.values.items():
            out[j] = out.get(j, Fraction(0)) - v
        return LpSolution(out)

    def distance(self, other: "LpSolution") -> Fraction:
        keys = set(self.values) | set(other.values)
        return sum((abs(self[j] - other[j]) for j in keys), Fraction(0))


def _check_rows(lp: Lp) -> None:
    for i, row in enumerate(lp.A):
        if lp.b[i] > 0 and not any(row):
            raise InfeasibleRow(f"row {i} has no positive entry but b[{i}] = {lp.b[i]}")


class _Revised:
    """Revised simplex over x (cost 1), surplus s (column -e_i), artificial a (column e_i)."""

    def __init__(self, lp: Lp):
        self.lp = lp
        m, n = lp.m, lp.n
        self.m, self.n = m, n
        self.basis = [n + m + i for i in range(m)]
        self.binv = [[Fraction(int(i == k)) for k in range(m)] for i in range(m)]
        self.xb = list(lp.b)
        self._icols = None

    def col(self, v: int) -> list:
        m, n = self.m, self.n
        if v < n:
            return list(self.lp.column(v))
        if v < n + m:
            return [Fraction(-1) if i == v - n else Fraction(0) for i in range(m)]
        return [Fraction(1) if i == v - n - m else Fraction(0) for i in range(m)]

    def ftran(self, column: list) -> list:
        nz = [(k, c) for k, c in enumerate(column) if c]
        return [sum((row[k] * c for k, c in nz), Fraction(0)) for row in self.binv]

    def _int_columns(self) -> list:
        # column j scaled by the lcm of its denominators: (scale, [(row, int entry)])
        if self._icols is None:
            cols = []
            for j in range(self.n):
                col = self.lp.column(j)
                L = lcm(*(c.denominator for c in col)) if col else 1
                cols.append((L, [(i, int(c * L)) for i, c in enumerate(col) if c]))
            self._icols = cols
        return self._icols

    def _reduced_cost_key(self, v: int, cost, pi, D, P, icols):
        """Reduced cost of column v, as (value, scale): the sign is that of value, magnitude value/scale."""
        n, m = self.n, self.m
        if v < n:
            L, nz = icols[v]
            c = D * L if cost is _phase2_cost else 0
            return c - sum(P[i] * a for i, a in nz), D * L
        if v < n + m:
            return cost(v, n, m) + pi[v - n], 1
        return cost(v, n, m) - pi[v - n - m], 1

    def run(self, cost) -> None:
        """Dantzig pricing; after a degenerate pivot, Bland's rule until progress resumes.

        Cycling needs an unbroken run of degenerate pivots, and every such run
        is governed by Bland's rule, so the method terminates.
        """
        m, n = self.m, self.n
        allowed = n + m if cost is _phase2_cost else n + 2 * m
        icols = self._int_columns()
        bland = False
        while True:
            cb = [cost(v, n, m) for v in self.basis]
            pi = [sum((cb[i] * self.binv[i][k] for i in range(m)), Fraction(0)) for k in range(m)]
            D = lcm(*(q.denominator for q in pi))
            P = [int(q * D) for q in pi]
            entering = None
            best_rc = Fraction(0)
            in_basis = set(self.basis)
            for v in range(allowed):
                if v in in_basis:
                    continue
                val, scale = self._reduced_cost_key(v, cost, pi, D, P, icols)
                if val < 0:
                    if bland:
                        entering = v
                        break
                    rc = Fraction(val) / scale
                    if rc < best_rc:
                        best_rc, entering = rc, v
            if entering is None:
                return
            d = self.ftran(self.col(entering))
            leave = None
            best = None
            for i in range(m):
                if d[i] > 0:
                    ratio = self.xb[i] / d[i]
                    if best is None or ratio < best or (ratio == best and self.basis[i] < self.basis[leave]):
                        best, leave = ratio, i
            if leave is None:
                raise MigratePackError("unbounded direction in a covering LP")
            bland = best == 0
            self.pivot(leave, entering, d)

    def pivot(self, r: int, entering: int, d: list) -> None:
        m = self.m
        piv = d[r]
        row_r = [v / piv for v in self.binv[r]]
        xr = self.xb[r] / piv
        for i in range(m):
            if i == r or not d[i]:
                continue
            f = d[i]
            self.binv[i] = [a - f * b for a, b in zip(self.binv[i], row_r)]
            self.xb[i] -= f * xr
        self.binv[r] = row_r
        self.xb[r] = xr
        self.basis[r] = entering

    def drive_out_artificials(self) -> None:
        m, n = self.m, self.n
        for r in range(m):
            if self.basis[r] < n + m:
                continue
            # artificial at level zero: swap in any structural or surplus column with a pivot entry
            for v in range(n + m):
                if v in self.basis:
                    continue
                d = self.ftran(self.col(v))
                if d[r]:
                    self.pivot(r, v, d)
                    break


def _phase1_cost(v, n, m):
    return Fraction(1) if v >= n + m else Fraction(0)


def _phase2_cost(v, n, m):
    return Fraction(1) if v < n else Fraction(0)


def solve_exact(lp: Lp) -> LpSolution:
    """Optimal basic solution; at most m non-zero entries."""
    _check_rows(lp)
    sx = _Revised(lp)
    sx.run(_phase1_cost)
    if any(sx.xb[i] > 0 for i in range(lp.m) if sx.basis[i] >= lp.n + lp.m):
        raise InfeasibleRow("phase one ended with positive artificial mass")
    sx.drive_out_artificials()
    sx.run(_phase2_cost)
    return LpSolution({v: sx.xb[i] for i, v in enumerate(sx.basis) if v < lp.n})


def solve_approx(lp: Lp, rho, adversarial: bool = False) -> LpSolution:
    """Solution with objective at most (1+rho)*LIN.

    The default delegates to ``solve_exact``.  With ``adversarial=True`` the
    exact optimum is deliberately inflated by rho*LIN on its first support
    column, giving a feasible solution with objective exactly (1+rho)*LIN.
    """
    rho = to_fraction(rho)
    if rho < 0:
        raise MigratePackError("rho must be non-negative")
    x = solve_exact(lp)
    if not adversarial or rho == 0 or not x.values:
        return x
    extra = rho * x.objective
    j = x.support[0]
    vals = dict(x.values)
    vals[j] += extra
    return LpSolution(vals)


def _kernel_vector(mat: list, ncols: int) -> list | None:
    """A non-zero v with mat @ v = 0, or None if the columns are independent."""
    rows = [list(r) for r in mat]
    pivots = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, len(rows)) if rows[i][c]), None)
        if p is None:
            continue
        rows[r], rows[p] = rows[p], rows[r]
        inv = 1 / rows[r][c]
        rows[r] = [v * inv for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c]:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    free = next((c for c in range(ncols) if c not in pivots), None)
    if free is None:
        return None
    v = [Fraction(0)] * ncols
    v[free] = Fraction(1)
    for i, c in enumerate(pivots):
        v[c] = -rows[i][free]
    return v


def reduce_support(lp: Lp, x: LpSolution, cap: int) -> LpSolution:
    """Shrink the support of a feasible x to at most ``cap`` columns.

    Moves along kernel directions of the support columns of A stacked with
    the all-ones row, so both Ax and the objective stay exactly the same.
    """
    if cap < lp.m + 1:
        raise CapTooSmall(f"cap {cap} < m+1 = {lp.m + 1}")
    vals = dict(x.values)
    while len(vals) > cap:
        supp = sorted(vals)
        mat = [[lp.A[i][j] for j in supp] for i in range(lp.m)]
        mat.append([Fraction(1)] * len(supp))
        v = _kernel_vector(mat, len(supp))
        if v is None:
            raise MigratePackError("support columns unexpectedly independent")
        # v sums to zero, so it has a negative entry
        theta = min(vals[j] / -vk for j, vk in zip(supp, v) if vk < 0)
        for j, vk in zip(supp, v):
            nv = vals[j] + theta * vk
            if nv:
                vals[j] = nv
            else:
                del vals[j]
    return LpSolution(vals)


def parse_lp(text: str) -> Lp:
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or len(lines[0]) != 2:
        raise MigratePackError("first line must be 'm n'")
    m, n = int(lines[0][0]), int(lines[0][1])
    if len(lines) != m + 2:
        raise MigratePackError(f"expected {m} matrix rows and one rhs line")
    A = [[Fraction(tok) for tok in row] for row in lines[1:m + 1]]
    b = [Fraction(tok) for tok in lines[m + 1]]
    if any(len(r) != n for r in A) or len(b) != m:
        raise MigratePackError("row length does not match header")
    return Lp(A, b)


def format_lp(lp: Lp) -> str:
    out = [f"{lp.m} {lp.n}"]
    out += [" ".join(fmt_rational(v) for v in row) for row in lp.A]
    out.append(" ".join(fmt_rational(v) for v in lp.b))
    return "\n".join(out) + "\n"


def parse_solution(text: str) -> LpSolution:
    vals = {}
    for ln in text.splitlines():
        if not ln.strip() or ln.lstrip().startswith("#"):
            continue
        idx, val = ln.split()
        vals[int(idx)] = vals.get(int(idx), Fraction(0)) + Fraction(val)
    return LpSolution(vals)


def format_solution(x) -> str:
    return "".join(f"{j} {fmt_rational(Fraction(v))}\n" for j, v in x.values.items())
