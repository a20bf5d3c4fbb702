"""Online controller: bootstrap by offline recomputation, then the doubling cycle.

Each large arrival after the bootstrap runs one paired improvement on the
current configuration LP, re-syncs the packing to the new integral solution,
inserts the item and applies the phase's creation or union step.  Small
items are placed by FirstFit and never trigger repacking.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from math import ceil

from .binpack import Item, LivePacking, build_config_lp, classify, live_from_solution, moved_size
from .errors import BadEpsilon, DivisibilityError, MigratePackError
from .improve import ImproveParams, improve_paired_detailed, paired_distance_budget_max
from .lp_core import solve_exact, to_fraction
from .oracle import brute_opt, lin_lower_bound
from .rounding import (
    begin_creation,
    creation_step,
    embed_check,
    insert_op,
    modified_insert_op,
    offline_round,
    round_instance,
    singleton_round,
    trace_record,
    union_step,
    validate_correspondence,
)


@dataclass(frozen=True)
class Params:
    eps_user: Fraction
    eps_internal: Fraction
    m: int
    eps_bar: Fraction
    delta_bar: Fraction
    Delta: Fraction

    @property
    def bootstrap_threshold(self) -> Fraction:
        return (self.m + 2) * (1 / self.delta_bar + 4)

    @property
    def ratio(self) -> Fraction:
        return 1 + 2 * self.Delta


def derive_params(eps_user, pin_m: int | None = None, pin_delta=None) -> Params:
    eps = to_fraction(eps_user)
    if not 0 < eps <= Fraction(1, 2):
        raise BadEpsilon(f"eps = {eps} outside (0, 1/2]")
    eps_int = eps / 80
    m = ceil(1 / (eps_int * eps_int))
    m += m % 2
    if pin_m is not None:
        if pin_m <= 0 or pin_m % 2:
            raise BadEpsilon(f"pinned m = {pin_m} must be a positive even integer")
        m = pin_m
    eps_bar = 16 * eps_int
    delta_bar = eps_bar
    if pin_delta is not None:
        delta_bar = to_fraction(pin_delta)
        if not 0 < delta_bar <= 1:
            raise BadEpsilon(f"pinned delta = {delta_bar} outside (0, 1]")
    return Params(eps, eps_int, m, eps_bar, delta_bar, eps_bar + delta_bar + eps_bar * delta_bar)


@dataclass(frozen=True)
class PhaseMachine:
    phase: str = "bootstrap"  # bootstrap | insert | creation | union
    step: int = 0
    K: int = 0
    pair: int = 0
    cycle: int = 0

    def advance(self, m: int) -> "PhaseMachine":
        if self.phase == "bootstrap":
            return self
        step = self.step + 1
        if step < self.K:
            return replace(self, step=step)
        if self.phase == "insert":
            return replace(self, phase="creation", step=0, pair=0)
        if self.phase == "creation":
            return replace(self, phase="union", step=0)
        if self.pair + 1 < m // 2:
            return replace(self, phase="creation", step=0, pair=self.pair + 1)
        return PhaseMachine("insert", 0, 2 * self.K, 0, self.cycle + 1)


@dataclass(frozen=True)
class OnlineState:
    params: Params
    items: tuple = ()
    large: tuple = ()
    smalls: tuple = ()
    rounding: object = None
    x: dict = field(default_factory=dict)
    y: dict = field(default_factory=dict)
    packing: LivePacking = None
    machine: PhaseMachine = PhaseMachine()
    total_size: Fraction = Fraction(0)
    large_size: Fraction = Fraction(0)
    max_migration: Fraction = Fraction(0)
    adversarial: bool = False
    tau: int | None = None

    @property
    def t(self) -> int:
        return len(self.items)


def initial_state(params: Params, adversarial: bool = False) -> OnlineState:
    return OnlineState(params, packing=LivePacking({}), adversarial=adversarial)


def alg7_budget(params: Params) -> Fraction:
    """Per-arrival migration bound after the bootstrap.

    Bins removed by the improvement hold at most D in total (D: distance
    budget with the largest admissible prefix), evictions move at most as much
    again, the cascade moves one item per position and union two more.  Every
    moved item has size at most 1 and the arrival at least eps/2.
    """
    m = params.m
    p = ImproveParams(2, params.delta_bar, 2)
    D = paired_distance_budget_max(m + 2, p, extra_budget=2)
    return 2 / params.eps_internal * (2 * D + (m + 4) + 2)


def bootstrap_budget(params: Params, total_size: Fraction) -> Fraction:
    return 2 / params.eps_internal * total_size


def certify(R, x: dict, y: dict) -> list:
    """Exact feasibility of (x, y) for the configuration LP of R, plus pairing invariants."""
    problems = []
    groups = dict(R.class_groups())
    sizes = {h: R.sizes[ids[0]] for h, ids in groups.items()}
    for name, sol in (("x", x), ("y", y)):
        cover = {h: Fraction(0) for h in groups}
        for cfg, v in sol.items():
            if v < 0:
                problems.append(f"{name} negative on {cfg}")
            load = Fraction(0)
            for h, c in cfg:
                if h not in sizes:
                    problems.append(f"{name} uses unknown class {h}")
                    continue
                load += sizes[h] * c
                cover[h] += v * c
            if load > 1:
                problems.append(f"{name} uses overfull configuration {cfg}")
        for h, ids in groups.items():
            if cover[h] < len(ids):
                problems.append(f"{name} covers class {h} {cover[h]} < {len(ids)}")
    for cfg, v in x.items():
        if v > y.get(cfg, 0):
            problems.append(f"x exceeds y on {cfg}")
    if set(k for k, v in x.items() if v) != set(k for k, v in y.items() if v):
        problems.append("x and y supports differ")
    return problems


SNAP = 2**20


def snap_up(x: dict) -> dict:
    """Round each entry up to a multiple of 1/SNAP.

    Repeated rescaling would otherwise grow denominators without bound.  The
    result dominates x, so covering, x <= y (y integral) and supports survive.
    """
    return {c: Fraction(ceil(v * SNAP), SNAP) for c, v in x.items()}


def _solve_fresh(R):
    inst = round_instance(R)
    if not inst.classes:
        return {}, {}
    lp = build_config_lp(inst)
    xv = solve_exact(lp)
    x = lp.from_vector(xv)
    y = {c: ceil(v) for c, v in x.items()}
    return x, y


def _bootstrap_round(large, m: int):
    return singleton_round(large) if len(large) <= m else offline_round(large, m)


def handoff_bootstrap(state: OnlineState) -> OnlineState:
    m = state.params.m
    n = len(state.large)
    if n % (m + 1) or n == 0:
        raise DivisibilityError(f"{n} large items not a positive multiple of m+1 = {m + 1}")
    R = offline_round(state.large, m)
    K = n // (m + 1)
    if R.group_sizes() != [K] * (m + 1):
        raise DivisibilityError("offline rounding did not give equal groups")
    x, y = _solve_fresh(R)
    same = (state.rounding is not None and state.rounding.groups == R.groups and state.y == y)
    B = state.packing if same else live_from_solution(R, y, state.smalls)
    return replace(state, rounding=R, x=x, y=y, packing=B, machine=PhaseMachine("insert", 0, K), tau=state.t)


@dataclass(frozen=True)
class ArrivalStats:
    t: int
    size: Fraction
    kind: str
    phase: str
    bins: int
    total_size: Fraction
    lin_lb: Fraction
    opt_lb: int
    opt_exact: int | None
    migration: Fraction
    max_migration: Fraction
    budget: Fraction
    support: int
    x_norm: Fraction
    y_norm: int
    r0: int
    group_sizes: tuple
    properties: dict
    certificate: tuple
    embed: bool | None
    distance: int | None
    trace: tuple = ()

    @property
    def ok(self) -> bool:
        return all(self.properties.values()) and not self.certificate and self.embed is not False and self.migration <= self.budget


def _exit_bootstrap(state: OnlineState) -> bool:
    m = state.params.m
    n = len(state.large)
    return state.large_size > state.params.bootstrap_threshold and n >= m + 1 and n % (m + 1) == 0


def _large_step(state: OnlineState, item: Item, trace: list):
    """One post-bootstrap large arrival; returns (R, B, x, y, certificate problems, distance)."""
    prm = state.params
    R, B = state.rounding, state.packing
    phase = state.machine.phase
    lp = build_config_lp(round_instance(R))
    alpha = 2 if phase == "union" else 1
    extra = 2 if phase in ("creation", "union") else 0
    out = improve_paired_detailed(
        lp, lp.to_vector(state.x), lp.to_vector(state.y), ImproveParams(alpha, prm.delta_bar, 2),
        extra_budget=extra, strict=True, adversarial=state.adversarial,
    )
    x = snap_up(lp.from_vector(out.x))
    y = {c: int(v) for c, v in lp.from_vector(out.y).items()}
    distance = int(sum(abs(out.y[j] - lp.to_vector(state.y)[j]) for j in set(out.y.values) | set(lp.to_vector(state.y).values)))
    B = B.copy()
    B.sync_to(y, R.class_of())
    problems = certify(R, x, y)
    t = state.t + 1
    trace.append(trace_record(R, t, "improve", None, x, y))
    if phase == "creation":
        if state.machine.step == 0:
            R = begin_creation(R)
        R, B, x, y, j = modified_insert_op(R, B, x, y, item)
        problems += certify(R, x, y)
        trace.append(trace_record(R, t, "modified_insert", j, x, y))
        R, B, x, y = creation_step(R, B, x, y)
        trace.append(trace_record(R, t, "create", None, x, y))
    elif phase == "union":
        R, B, x, y, j = insert_op(R, B, x, y, item)
        problems += certify(R, x, y)
        trace.append(trace_record(R, t, "insert", j, x, y))
        R, B, x, y = union_step(R, B, x, y)
        trace.append(trace_record(R, t, "union", None, x, y))
    else:
        R, B, x, y, j = insert_op(R, B, x, y, item)
        trace.append(trace_record(R, t, "insert", j, x, y))
    problems += certify(R, x, y)
    problems += validate_correspondence(R, B, y)
    return R, B, x, y, problems, distance


def evaluate_properties(params: Params, bins: int, x_norm, r0: int, x: dict, y: dict, opt) -> dict:
    supp_x = {c for c, v in x.items() if v}
    supp_y = {c for c, v in y.items() if v}
    return {
        "bins": bins <= params.ratio * opt + params.m,
        "fractional": x_norm + r0 <= (1 + params.Delta) * opt,
        "dominated": all(v <= y.get(c, 0) for c, v in x.items()),
        "support": supp_x == supp_y and len(supp_x) <= params.Delta * opt + params.m,
    }


def arrive(state: OnlineState, item: Item, oracle_cap: int = 0):
    """Process one arrival; returns the successor state and its statistics."""
    prm = state.params
    if state.items and item.id <= state.items[-1].id:
        raise MigratePackError("item ids must increase with arrival order")
    before = state.packing.snapshot()
    kind = classify(item, prm.eps_internal)
    total = state.total_size + item.size
    trace: list = []
    problems: list = []
    distance = None
    items = state.items + (item,)
    phase_used = state.machine.phase

    if kind == "small":
        B = state.packing.copy()
        B.add_size(item)
        B.first_fit(item.id)
        st = replace(state, items=items, smalls=state.smalls + (item.id,), packing=B, total_size=total)
        budget = Fraction(0)
    elif state.machine.phase == "bootstrap":
        large = state.large + (item,)
        R = _bootstrap_round(large, prm.m)
        x, y = _solve_fresh(R)
        B = live_from_solution(R, y, state.smalls)
        st = replace(state, items=items, large=large, rounding=R, x=x, y=y, packing=B,
                     total_size=total, large_size=state.large_size + item.size)
        trace.append(trace_record(R, len(items), "recompute", None, x, y))
        budget = bootstrap_budget(prm, total)
    else:
        R, B, x, y, problems, distance = _large_step(state, item, trace)
        st = replace(state, items=items, large=state.large + (item,), rounding=R, x=x, y=y, packing=B,
                     total_size=total, large_size=state.large_size + item.size,
                     machine=state.machine.advance(prm.m))
        budget = alg7_budget(prm)

    if st.machine.phase == "bootstrap" and _exit_bootstrap(st):
        st = handoff_bootstrap(st)
        trace.append(trace_record(st.rounding, st.t, "handoff", None, st.x, st.y))
        if kind == "small":
            budget = bootstrap_budget(prm, total)

    after = st.packing.snapshot()
    migration = moved_size(before, after, item.id) / item.size
    st = replace(st, max_migration=max(st.max_migration, migration))

    sizes = [it.size for it in items]
    lin_lb = lin_lower_bound(sizes)
    opt_lb = max(ceil(total), ceil(lin_lb))
    opt_exact = brute_opt(items, cap=max(oracle_cap, 0)).opt_bins if len(items) <= oracle_cap else None
    opt = opt_exact if opt_exact is not None else opt_lb
    R = st.rounding
    x_norm = sum(st.x.values(), Fraction(0))
    r0 = R.r0_size() if R is not None else 0
    bins = after.bin_count
    props = evaluate_properties(prm, bins, x_norm, r0, st.x, st.y, opt)
    if R is not None and phase_used == "bootstrap" and kind == "large":
        problems += certify(R, st.x, st.y) + validate_correspondence(R, st.packing, st.y)
    embed = None
    if st.machine.phase != "bootstrap":
        embed = embed_check(R, len(st.large), st.machine.K)

    stats = ArrivalStats(
        t=st.t, size=item.size, kind=kind, phase=phase_used if phase_used == st.machine.phase else f"{phase_used}>{st.machine.phase}",
        bins=bins, total_size=total, lin_lb=lin_lb, opt_lb=opt_lb, opt_exact=opt_exact,
        migration=migration, max_migration=st.max_migration, budget=budget,
        support=sum(1 for v in st.x.values() if v), x_norm=x_norm, y_norm=int(sum(st.y.values())),
        r0=r0, group_sizes=tuple(R.group_sizes()) if R is not None else (), properties=props,
        certificate=tuple(problems), embed=embed, distance=distance, trace=tuple(trace),
    )
    return st, stats


def run_stream(params: Params, items, oracle_cap: int = 0, adversarial: bool = False):
    state = initial_state(params, adversarial)
    out = []
    for it in items:
        state, s = arrive(state, it, oracle_cap)
        out.append(s)
    return state, out
