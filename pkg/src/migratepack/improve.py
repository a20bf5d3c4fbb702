"""Improving LP and ILP solutions while staying close to the input.

Every routine takes a covering LP, an existing solution and a target
improvement ``alpha`` and returns a solution whose objective drops by about
``alpha`` while only a bounded amount of solution mass moves.  The bounds
are exact rational inequalities; see the ``*_budget`` helpers.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import ceil, floor
from typing import Mapping

from .errors import AlphaTooLarge, BudgetTooSmall, PreconditionViolated
from .lp_core import Lp, LpSolution, reduce_support, solve_approx, solve_exact, to_fraction


class IntegralSolution(LpSolution):
    """LpSolution whose stored values are positive integers."""

    def __post_init__(self):
        super().__post_init__()
        for j, v in self.values.items():
            if v.denominator != 1:
                raise PreconditionViolated(f"component {j} = {v} is not integral")


@dataclass(frozen=True)
class ImproveParams:
    alpha: Fraction
    delta: Fraction
    var_factor: int = 1

    def __post_init__(self):
        a, d = to_fraction(self.alpha), to_fraction(self.delta)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "delta", d)
        if a <= 0:
            raise PreconditionViolated("alpha > 0")
        if not 0 < d <= 1:
            raise PreconditionViolated("0 < delta <= 1")
        if self.var_factor not in (1, 2):
            raise PreconditionViolated("var_factor in {1, 2}")

    @property
    def var_budget(self) -> Fraction:
        return self.var_factor * self.alpha * (1 / self.delta + 1)


@dataclass(frozen=True)
class Split:
    x_fix: LpSolution
    x_var: LpSolution
    b_var: tuple


def split(lp: Lp, x_prime: LpSolution, p: ImproveParams) -> Split:
    norm = x_prime.objective
    if norm < p.var_budget:
        raise BudgetTooSmall(f"||x'||_1 = {norm} < {p.var_budget}")
    x_var = x_prime.scaled(p.var_budget / norm)
    x_fix = x_prime - x_var
    ax = lp.product(x_fix)
    b_var = tuple(max(Fraction(0), bi - ai) for bi, ai in zip(lp.b, ax))
    return Split(x_fix, x_var, b_var)


def _lin(lp: Lp) -> Fraction:
    return solve_exact(lp).objective


def _require(cond: bool, text: str) -> None:
    if not cond:
        raise PreconditionViolated(text)


def theorem1_witness(lp: Lp, x_prime: LpSolution, x_opt: LpSolution, p: ImproveParams) -> LpSolution:
    """Convex combination (1-beta) x' + beta x_opt with beta = alpha(1/delta+1)/||x'||."""
    lin = x_opt.objective
    if p.alpha > p.delta * lin:
        raise AlphaTooLarge(f"alpha = {p.alpha} > delta*LIN = {p.delta * lin}")
    norm = x_prime.objective
    _require(lin <= norm <= (1 + p.delta) * lin, "LIN <= ||x'||_1 <= (1+delta)LIN")
    beta = p.alpha * (1 / p.delta + 1) / norm
    return x_prime.scaled(1 - beta) + x_opt.scaled(beta)


def theorem1_constraints(lp: Lp, x: LpSolution, x_prime: LpSolution, x_opt: LpSolution, p: ImproveParams) -> dict:
    """Evaluate each constraint of the witness LP exactly; used by tests and the CLI."""
    lin = x_opt.objective
    beta = p.alpha * (1 / p.delta + 1) / x_prime.objective
    cols = set(x.values) | set(x_prime.values) | set(x_opt.values)
    return {
        "covering": lp.is_feasible(x),
        "nonnegative": all(v >= 0 for v in x.values.values()),
        "lower": all(x[j] >= x_prime[j] - beta * x_prime[j] for j in cols),
        "upper": all(x[j] <= x_prime[j] + beta * x_opt[j] for j in cols),
        "objective": x.objective <= (1 + p.delta) * lin - p.alpha,
    }


def improve_exact(lp: Lp, x_prime: LpSolution, p: ImproveParams) -> LpSolution:
    _require(p.var_factor == 1, "var_factor = 1")
    s = split(lp, x_prime, p)
    x_hat = solve_exact(lp.with_rhs(s.b_var))
    return s.x_fix + x_hat


def improve_approx(lp: Lp, x_prime: LpSolution, p: ImproveParams, adversarial: bool = False) -> LpSolution:
    _require(p.var_factor == 2, "var_factor = 2")
    s = split(lp, x_prime, p)
    x_hat = solve_approx(lp.with_rhs(s.b_var), p.delta / 2, adversarial)
    cand = s.x_fix + x_hat
    return cand if cand.objective < x_prime.objective else x_prime


def choose_budgeted_integral(z: Mapping[int, Fraction], budget) -> dict:
    """Greedy member of V(z) with 1-norm min(floor(budget), sum floor(z_i))."""
    left = floor(to_fraction(budget))
    heads = {j: floor(v) for j, v in z.items() if v >= 1}
    out = {}
    for j in sorted(heads, key=lambda j: (-heads[j], j)):
        if left <= 0:
            break
        take = min(heads[j], left)
        out[j] = take
        left -= take
    return out


def _gap(y: LpSolution, x: LpSolution) -> dict:
    return {j: y[j] - x[j] for j in set(y.values) | set(x.values)}


def _minus(y: Mapping[int, int], d: Mapping[int, int]) -> IntegralSolution:
    out = {j: Fraction(v) for j, v in y.items()}
    for j, v in d.items():
        out[j] -= v
    return IntegralSolution(out)


def _check_pairing(x: LpSolution, y: LpSolution, same_support: bool) -> None:
    _require(all(y[j] >= v for j, v in x.values.items()), "y'_i >= x'_i for all i")
    if same_support:
        _require(set(x.values) == set(y.values), "x' and y' have the same support")


def improve_integral_min_reduction(lp: Lp, x_prime: LpSolution, y_prime: LpSolution, p: ImproveParams):
    """Few reductions of y': total decrease at most alpha(1/delta+2)."""
    _require(p.alpha.denominator == 1, "alpha is a positive integer")
    _check_pairing(x_prime, y_prime, same_support=False)
    if x_prime.objective < p.alpha * (1 / p.delta + 1):
        raise BudgetTooSmall(f"||x'||_1 < alpha(1/delta+1) = {p.alpha * (1 / p.delta + 1)}")
    lin = _lin(lp)
    _require(x_prime.objective <= (1 + p.delta) * lin, "||x'||_1 <= (1+delta)LIN")
    _require(y_prime.objective <= (1 + p.delta) * lin + lp.n, "||y'||_1 <= (1+delta)LIN + n")

    c = choose_budgeted_integral(_gap(y_prime, x_prime), p.alpha)
    y_bar = _minus({j: int(v) for j, v in y_prime.values.items()}, c)
    if sum(c.values()) == p.alpha:
        return x_prime, y_bar
    x_new = improve_exact(lp, x_prime, ImproveParams(p.alpha, p.delta, 1))
    keys = set(x_new.values) | set(y_bar.values)
    y_hat = {j: max(ceil(x_new[j]), int(y_bar[j])) for j in keys}
    d = choose_budgeted_integral({j: y_hat[j] - x_new[j] for j in keys}, p.alpha * (1 / p.delta + 1))
    return x_new, _minus(y_hat, d)


def prefix_length(y: LpSolution, threshold) -> tuple:
    """Largest l such that the l smallest support values of y sum to at most threshold.

    Returns (l, L, order) where order lists the support sorted by value, ties by index.
    """
    threshold = to_fraction(threshold)
    order = sorted(y.values, key=lambda j: (y[j], j))
    total = Fraction(0)
    ell = 0
    for j in order:
        if total + y[j] > threshold:
            break
        total += y[j]
        ell += 1
    return ell, total, order


@dataclass(frozen=True)
class SparseOutcome:
    x: LpSolution
    y: IntegralSolution
    ell: int
    L: Fraction
    K: int
    lin: Fraction
    d_norm: int

    def distance_budget(self, m: int, p: ImproveParams) -> Fraction:
        inv = 1 / p.delta
        return 2 * (m + 1) * (inv + 2) + 2 * m + p.alpha * (2 * inv + 3)


def improve_integral_sparse_detailed(lp: Lp, x_prime: LpSolution, y_prime: LpSolution, p: ImproveParams) -> SparseOutcome:
    m, a, inv = lp.m, p.alpha, 1 / p.delta
    _require(a.denominator == 1, "alpha is a positive integer")
    _check_pairing(x_prime, y_prime, same_support=True)
    lin = _lin(lp)
    K = len(x_prime.values)
    _require(x_prime.objective <= (1 + p.delta) * lin, "||x'||_1 <= (1+delta)LIN")
    _require(x_prime.objective >= a * (inv + 1), "||x'||_1 >= alpha(1/delta+1)")
    _require(y_prime.objective <= (1 + 2 * p.delta) * lin, "||y'||_1 <= (1+2delta)LIN")
    _require(y_prime.objective >= (m + 1) * (inv + 2), "||y'||_1 >= (m+1)(1/delta+2)")
    _require(K <= p.delta * lin, "K <= delta*LIN")

    ell, L, order = prefix_length(y_prime, (m + 1) * (inv + 2))
    prefix = set(order[:ell])
    factor = a * (inv + 1) / x_prime.objective
    x_var = LpSolution({j: v if j in prefix else v * factor for j, v in x_prime.values.items()})
    y_bar = {j: int(v) for j, v in y_prime.values.items() if j not in prefix}
    x_fix = x_prime - x_var
    ax = lp.product(x_fix)
    b_var = [max(Fraction(0), bi - ai) for bi, ai in zip(lp.b, ax)]
    x_new = x_fix + solve_exact(lp.with_rhs(b_var))
    y_hat = {j: max(ceil(v), y_bar.get(j, 0)) for j, v in x_new.values.items()}
    # the distance and objective analysis spend alpha(1/delta+2)+m on d
    d = choose_budgeted_integral({j: y_hat[j] - x_new[j] for j in y_hat}, a * (inv + 2) + m)
    return SparseOutcome(x_new, _minus(y_hat, d), ell, L, K, lin, sum(d.values()))


def improve_integral_sparse(lp: Lp, x_prime: LpSolution, y_prime: LpSolution, p: ImproveParams):
    out = improve_integral_sparse_detailed(lp, x_prime, y_prime, p)
    return out.x, out.y


@dataclass(frozen=True)
class PairedOutcome:
    x: LpSolution
    y: IntegralSolution
    kept: bool
    ell: int
    L: Fraction
    threshold: Fraction
    d_budget: Fraction
    d_norm: int

    def distance_budget(self, m: int, p: ImproveParams) -> Fraction:
        inv = 1 / p.delta
        return self.threshold + (2 * p.alpha * (inv + 1) + self.L + 1) + self.d_budget


def paired_d_budget(m: int, p: ImproveParams) -> Fraction:
    return 2 * p.alpha * (1 / p.delta + 2) + m + 1


def paired_distance_budget_max(m: int, p: ImproveParams, extra_budget: int = 0) -> Fraction:
    """Distance bound with L at its largest admissible value."""
    inv = 1 / p.delta
    threshold = (m + 2) * (inv + 2) + extra_budget
    return threshold + (2 * p.alpha * (inv + 1) + threshold + 1) + paired_d_budget(m, p)


def improve_paired_detailed(
    lp: Lp,
    x_prime: LpSolution,
    y_prime: LpSolution,
    p: ImproveParams,
    extra_budget: int = 0,
    C=None,
    strict: bool = True,
    adversarial: bool = False,
) -> PairedOutcome:
    m, a, inv = lp.m, p.alpha, 1 / p.delta
    _require(a.denominator == 1, "alpha is a positive integer")
    _require(extra_budget in (0, 2), "extra_budget in {0, 2}")
    _check_pairing(x_prime, y_prime, same_support=True)
    _require(x_prime.objective >= 2 * a * (inv + 1), "||x'||_1 >= 2alpha(1/delta+1)")
    if strict:
        _require(y_prime.objective >= (m + 2) * (inv + 2), "||y'||_1 >= (m+2)(1/delta+2)")
    if C is not None:
        C = to_fraction(C)
        lin = _lin(lp)
        _require(C >= p.delta * lin, "C >= delta*LIN")
        _require(y_prime.objective <= lin + 2 * C, "||y'||_1 <= LIN + 2C")
        _require(len(y_prime.values) <= C, "K <= C")

    s = split(lp, x_prime, ImproveParams(a, p.delta, 2))
    x_hat = solve_approx(lp.with_rhs(s.b_var), p.delta / 2, adversarial)
    threshold = (m + 2) * (inv + 2) + extra_budget
    d_budget = paired_d_budget(m, p)
    y_int = {j: int(v) for j, v in y_prime.values.items()}

    if (s.x_fix + x_hat).objective >= x_prime.objective:
        d = choose_budgeted_integral(_gap(y_prime, x_prime), d_budget)
        return PairedOutcome(x_prime, _minus(y_int, d), True, 0, Fraction(0), threshold, d_budget, sum(d.values()))

    ell, L, order = prefix_length(y_prime, threshold)
    prefix = set(order[:ell])
    x_fix_bar = LpSolution({j: v for j, v in s.x_fix.values.items() if j not in prefix})
    y_bar = {j: v for j, v in y_int.items() if j not in prefix}
    # the frozen parts of the zeroed columns are handed to the re-solved part
    x_bar = x_hat + LpSolution({j: v for j, v in s.x_fix.values.items() if j in prefix})
    ax = lp.product(x_fix_bar)
    rhs = [max(Fraction(0), bi - ai) for bi, ai in zip(lp.b, ax)]
    x_bar = reduce_support(lp.with_rhs(rhs), x_bar, m + 1)
    x_new = x_fix_bar + x_bar
    y_hat = {j: max(ceil(v), y_bar.get(j, 0)) for j, v in x_new.values.items()}
    d = choose_budgeted_integral({j: y_hat[j] - x_new[j] for j in y_hat}, d_budget)
    return PairedOutcome(x_new, _minus(y_hat, d), False, ell, L, threshold, d_budget, sum(d.values()))


def improve_paired(lp, x_prime, y_prime, p, extra_budget=0, C=None, strict=True, adversarial=False):
    out = improve_paired_detailed(lp, x_prime, y_prime, p, extra_budget, C, strict, adversarial)
    return out.x, out.y


def sensitivity_transfer(lp_old: Lp, lp_new: Lp, x_prime: LpSolution, delta) -> LpSolution:
    """Carry x' from rhs b' to rhs b'' with distance at most (2/delta+7)*||(b''-b')/c||_1."""
    delta = to_fraction(delta)
    _require(lp_old.A == lp_new.A, "identical constraint matrices")
    _require(0 < delta <= 1, "0 < delta <= 1")
    cmax = lp_new.row_max()
    shift = [(bn - bo) / c for bn, bo, c in zip(lp_new.b, lp_old.b, cmax)]
    norm = sum((abs(v) for v in shift), Fraction(0))
    if norm == 0:
        return x_prime
    raised = dict(x_prime.values)
    for i, v in enumerate(shift):
        if v > 0:
            row = lp_new.A[i]
            j = max(range(lp_new.n), key=lambda k: (row[k], -k))
            raised[j] = raised.get(j, Fraction(0)) + v
    x_raised = LpSolution(raised)
    alpha = (1 + delta) * norm
    budget = alpha * (1 / delta + 1)
    if x_raised.objective <= budget:
        # the whole solution is variable: re-solving is within the same distance bound
        return solve_exact(lp_new)
    s = split(lp_new, x_raised, ImproveParams(alpha, delta, 1))
    return s.x_fix + solve_exact(lp_new.with_rhs(s.b_var))
