"""Independent ground-truth engines for single-generator self-scheduling.

Three engines that deliberately share no code with the formulation builders:

* ``interval_dispatch_cost``: LP value of dispatching one committed ON run,
  net of energy revenue at the given prices (no-load excluded; callers add it).
* ``dp_self_schedule``: backward dynamic program over shutdown/restart nodes,
  yielding the optimal net cost over all feasible schedules.
* ``enumerate_best_schedule``: exhaustive scan of on/off patterns with
  per-run dispatch LPs; exact for small horizons.

Sign convention: values are net costs (cost minus revenue); the maximum
self-scheduling profit is the negated value.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .algebra import LinearModel
from .instance import GeneratorSpec
from .simplexcore import OPTIMAL, SolverOptions, solve_lp

_DISPATCH_OPTS = SolverOptions(feasibility_tol=1e-9, optimality_tol=1e-9)


@dataclass
class DpTables:
    """Value functions of the self-scheduling dynamic program.

    ``v_down[p]`` is the optimal net cost from period p onward given the unit
    goes (or stays) off at p; ``v_up[r]`` the same given a run starts at r.
    ``phi`` is the overall optimum; the backpointer dicts reconstruct one
    optimal schedule deterministically (earliest shutdown wins ties).
    """

    v_down: np.ndarray
    v_up: np.ndarray
    phi: float
    down_choice: dict[int, int | None]    # p -> restart period, None = stay off
    up_choice: dict[int, int]             # r -> last on period of the run
    first_choice: tuple[str, int | None]  # ("block", k) / ("start", r) / ("off", None)


@dataclass
class ScheduleValue:
    """One feasible schedule with its dispatch and net cost."""

    on: tuple[int, ...]
    dispatch: np.ndarray
    net_cost: float
    scanned: int = 0


def _dispatch_model(g: GeneratorSpec, start: int, end: int, prices: np.ndarray,
                    has_startup: bool, has_shutdown: bool):
    """LP for one committed run; returns (model, xs) or None when the
    ramp-clipped bounds already contradict the minimum output."""
    model = LinearModel(f"{g.gen_id}.run[{start}.{end}]")
    xs, fs = [], []
    for s in range(start, end + 1):
        hi = g.p_max[s]
        if s == start and has_startup:
            hi = min(hi, g.su_ramp[s])
        if s == end and has_shutdown:
            hi = min(hi, g.sd_ramp[s])
        if g.p_min[s] > hi + 1e-12:
            return None
        xs.append(model.add_variable(f"x[{s}]", g.p_min[s], hi))
        fs.append(model.add_variable(f"f[{s}]", -math.inf, math.inf))
    for off, s in enumerate(range(start, end + 1)):
        for j, (slope, intercept) in enumerate(g.cost_segments[s]):
            model.add_constraint(
                [(fs[off], 1.0), (xs[off], -slope)], ">=", intercept, f"pc[{s}][{j}]"
            )
    for off, s in enumerate(range(start + 1, end + 1), start=1):
        model.add_constraint(
            [(xs[off], 1.0), (xs[off - 1], -1.0)], "<=", g.ramp_up[s], f"ru[{s}]"
        )
        model.add_constraint(
            [(xs[off - 1], 1.0), (xs[off], -1.0)], "<=", g.ramp_down[s], f"rd[{s}]"
        )
    model.set_objective(
        [(f, 1.0) for f in fs]
        + [(x, -prices[s]) for x, s in zip(xs, range(start, end + 1))]
    )
    return model, xs


def interval_dispatch_cost(g: GeneratorSpec, start: int, end: int,
                           price=None, *, has_startup: bool | None = None,
                           has_shutdown: bool | None = None) -> float:
    """Optimal net dispatch cost of running exactly over periods start..end.

    Returns +inf when the run is infeasible (e.g. the start-up ramp cannot
    reach the minimum output). Start-up/shut-down ramps apply only when the
    run begins with a genuine start or ends inside the horizon; the defaults
    infer both from the generator's initial state.
    """
    T = g.horizon
    if not 0 <= start <= end < T:
        raise ValueError(f"bad interval [{start}, {end}] for horizon {T}")
    if has_startup is None:
        has_startup = not (start == 0 and not g.initially_off)
    if has_shutdown is None:
        has_shutdown = end < T - 1
    prices = np.zeros(T) if price is None else np.asarray(price, dtype=float)
    built = _dispatch_model(g, start, end, prices, has_startup, has_shutdown)
    if built is None:
        return math.inf
    res = solve_lp(built[0], _DISPATCH_OPTS)
    if res.status != OPTIMAL:
        return math.inf
    return res.objective


def _dispatch_levels(g: GeneratorSpec, start: int, end: int, prices,
                     has_startup: bool, has_shutdown: bool) -> np.ndarray:
    built = _dispatch_model(g, start, end, prices, has_startup, has_shutdown)
    if built is None:
        raise RuntimeError("dispatch re-solve failed on a chosen interval")
    model, xs = built
    res = solve_lp(model, _DISPATCH_OPTS)
    if res.status != OPTIMAL:
        raise RuntimeError("dispatch re-solve failed on a chosen interval")
    return np.array([res.value(x) for x in xs])


class _RunCosts:
    """Memoized net cost of each candidate run, no-load included."""

    def __init__(self, g: GeneratorSpec, prices: np.ndarray):
        self.g = g
        self.prices = prices
        self._memo: dict[tuple[int, int, bool, bool], float] = {}

    def run(self, start: int, end: int, *, has_startup: bool, has_shutdown: bool) -> float:
        key = (start, end, has_startup, has_shutdown)
        if key not in self._memo:
            base = interval_dispatch_cost(
                self.g, start, end, self.prices,
                has_startup=has_startup, has_shutdown=has_shutdown,
            )
            if math.isfinite(base):
                base += sum(self.g.no_load[s] for s in range(start, end + 1))
            self._memo[key] = base
        return self._memo[key]


def dp_self_schedule(g: GeneratorSpec, price) -> tuple[ScheduleValue, DpTables]:
    """Optimal self-schedule net cost via the backward dynamic program."""
    T = g.horizon
    prices = np.asarray(price, dtype=float)
    if prices.shape != (T,):
        raise ValueError(f"price vector must have length {T}")
    costs = _RunCosts(g, prices)
    max_up = math.inf if math.isinf(g.max_up) else int(g.max_up)
    s0 = g.initial_on_duration

    v_up = np.full(T, math.inf)
    v_down = np.zeros(T)
    up_choice: dict[int, int] = {}
    down_choice: dict[int, int | None] = {}

    def restarts_from(p: int):
        if g.free_initial_state and p == 0:
            return range(1, T)
        return (r for r in range(p + 1, T) if r - p >= g.min_down_at(r))

    # both tables only reference strictly later indices, so one backward
    # sweep fills them together
    for t in range(T - 1, -1, -1):
        best_u, arg_u = math.inf, None
        lo_e = min(t + g.min_up_at(t) - 1, T - 1)
        hi_e = T - 1 if math.isinf(max_up) else min(t + max_up - 1, T - 1)
        for e in range(lo_e, hi_e + 1):
            run = costs.run(t, e, has_startup=True, has_shutdown=e < T - 1)
            if not math.isfinite(run):
                continue
            if e < T - 1:
                val = g.shutdown_cost_at(e - t + 1) + run + v_down[e + 1]
            else:
                val = run
            if val < best_u:
                best_u, arg_u = val, e
        v_up[t] = best_u
        if arg_u is not None:
            up_choice[t] = arg_u

        best_d, arg_d = 0.0, None
        for r in restarts_from(t):
            if not math.isfinite(v_up[r]):
                continue
            start_cost = (
                g.startup_states[0].cost
                if (g.free_initial_state and t == 0)
                else g.startup_cost_any(r - t)
            )
            val = start_cost + v_up[r]
            if val < best_d - 1e-15:
                best_d, arg_d = val, r
        v_down[t] = best_d
        down_choice[t] = arg_d

    phi = math.inf
    first: tuple[str, int | None] = ("off", None)
    if g.initially_off:
        phi = 0.0
        for r in range(T):
            if g.initial_off_duration + r < g.min_down_at(r):
                continue
            if not math.isfinite(v_up[r]):
                continue
            val = g.startup_cost_any(g.initial_off_duration + r) + v_up[r]
            if val < phi - 1e-15:
                phi, first = val, ("start", r)
    else:
        t0 = min(max(g.min_up - s0, 0), T) if g.initially_on else 0
        cap = T if math.isinf(max_up) else min(max_up - s0, T)
        for k in range(t0, cap + 1):
            if k == 0:
                val = (g.shutdown_cost_at(s0) if g.initially_on else 0.0) + v_down[0]
            else:
                run = costs.run(0, k - 1, has_startup=False, has_shutdown=k < T)
                if not math.isfinite(run):
                    continue
                val = run
                if k < T:
                    val += g.shutdown_cost_at(k + s0) + v_down[k]
            if val < phi:
                phi, first = val, ("block", k)

    tables = DpTables(v_down, v_up, phi, down_choice, up_choice, first)
    schedule = _reconstruct(g, prices, tables)
    return schedule, tables


def _reconstruct(g: GeneratorSpec, prices: np.ndarray, tables: DpTables) -> ScheduleValue:
    T = g.horizon
    runs: list[tuple[int, int, bool]] = []  # (start, end, has_startup)
    kind, arg = tables.first_choice
    p: int | None = None
    if kind == "block":
        k = arg
        if k >= 1:
            runs.append((0, k - 1, False))
        p = k if k < T else None
    elif kind == "start":
        r = arg
        e = tables.up_choice[r]
        runs.append((r, e, True))
        p = e + 1 if e < T - 1 else None
    while p is not None and p <= T - 1:
        nxt = tables.down_choice.get(p)
        if nxt is None:
            break
        e = tables.up_choice[nxt]
        runs.append((nxt, e, True))
        p = e + 1 if e < T - 1 else None
    on = np.zeros(T, dtype=int)
    dispatch = np.zeros(T)
    for start, end, has_start in runs:
        on[start:end + 1] = 1
        dispatch[start:end + 1] = _dispatch_levels(
            g, start, end, prices, has_start, end < T - 1
        )
    return ScheduleValue(tuple(int(b) for b in on), dispatch, tables.phi)


# ---------------------------------------------------------------------------
# brute force
# ---------------------------------------------------------------------------


def _pattern_runs(pattern: tuple[int, ...]) -> list[tuple[int, int]]:
    runs = []
    start = None
    for t, bit in enumerate(pattern):
        if bit and start is None:
            start = t
        elif not bit and start is not None:
            runs.append((start, t - 1))
            start = None
    if start is not None:
        runs.append((start, len(pattern) - 1))
    return runs


def _pattern_cost(g: GeneratorSpec, pattern: tuple[int, ...], costs: _RunCosts) -> float:
    """Net cost of one on/off pattern, +inf when infeasible."""
    T = g.horizon
    max_up = math.inf if math.isinf(g.max_up) else int(g.max_up)
    runs = _pattern_runs(pattern)
    s0 = g.initial_on_duration
    total = 0.0
    prev_end: int | None = None

    if g.initially_on and (not runs or runs[0][0] != 0):
        if max(g.min_up - s0, 0) > 0:
            return math.inf  # still owes minimum-up time
        total += g.shutdown_cost_at(s0)  # immediate shutdown at period 0

    for r, e in runs:
        first_block = r == 0 and not g.initially_off
        duration = e - r + 1
        if first_block:
            if g.initially_on and e < T - 1 and duration < max(g.min_up - s0, 0):
                return math.inf
            if duration + s0 > max_up:
                return math.inf
        else:
            if e < T - 1 and duration < g.min_up_at(r):
                return math.inf
            if duration > max_up:
                return math.inf
            if prev_end is not None:
                gap = r - prev_end - 1
                if gap < g.min_down_at(r):
                    return math.inf
                total += g.startup_cost_any(gap)
            elif g.initially_off:
                off_time = g.initial_off_duration + r
                if off_time < g.min_down_at(r):
                    return math.inf
                total += g.startup_cost_any(off_time)
            elif g.initially_on:
                gap = r  # off during periods 0..r-1 after the period-0 shutdown
                if gap < g.min_down_at(r):
                    return math.inf
                total += g.startup_cost_any(gap)
            else:
                total += g.startup_states[0].cost  # free-state initial gap
        run_cost = costs.run(r, e, has_startup=not first_block, has_shutdown=e < T - 1)
        if not math.isfinite(run_cost):
            return math.inf
        total += run_cost
        if e < T - 1:
            total += g.shutdown_cost_at(duration + (s0 if first_block else 0))
        prev_end = e
    return total


def enumerate_best_schedule(g: GeneratorSpec, price) -> ScheduleValue:
    """Exact optimum by scanning all on/off patterns (horizons up to 12)."""
    T = g.horizon
    if T > 12:
        raise ValueError(f"horizon {T} too large for exhaustive enumeration")
    prices = np.asarray(price, dtype=float)
    costs = _RunCosts(g, prices)
    best = math.inf
    best_pattern: tuple[int, ...] | None = None
    scanned = 0
    for pattern in itertools.product((0, 1), repeat=T):
        scanned += 1
        val = _pattern_cost(g, pattern, costs)
        if val < best - 1e-15:
            best = val
            best_pattern = pattern
    if best_pattern is None:
        raise RuntimeError(f"no feasible schedule for generator {g.gen_id}")
    dispatch = np.zeros(T)
    for r, e in _pattern_runs(best_pattern):
        first_block = r == 0 and not g.initially_off
        dispatch[r:e + 1] = _dispatch_levels(
            g, r, e, prices, not first_block, e < T - 1
        )
    return ScheduleValue(best_pattern, dispatch, best, scanned)


def feasible_patterns(g: GeneratorSpec) -> list[tuple[int, ...]]:
    """All feasible on/off patterns (status-rule check only, free dispatch)."""
    T = g.horizon
    if T > 12:
        raise ValueError(f"horizon {T} too large for exhaustive enumeration")
    costs = _RunCosts(g, np.zeros(T))
    out = []
    for pattern in itertools.product((0, 1), repeat=T):
        if math.isfinite(_pattern_cost(g, pattern, costs)):
            out.append(pattern)
    return out
