"""Embedded LP/MIP core: bounded-variable primal simplex and branch-and-bound.

The LP path runs a two-phase revised simplex on the bounded standard form
``min c'x  s.t.  Ax + s = b,  lo <= (x, s) <= hi`` with one ranged slack per
row and one signed artificial per row for phase 1. Pricing is Dantzig with a
Bland fallback after a degenerate stall; the basis inverse is maintained with
product-form eta updates and periodic refactorization (dense LU for small
systems, SuperLU above that). Duals come from the final basis: under
minimization, binding >= rows carry duals >= 0 and binding <= rows duals <= 0.

The MIP path is plain best-bound branch and bound over the binary variables,
most-fractional or pseudo-cost branching, no cuts, no warm starts.
"""
from __future__ import annotations

import heapq
import math
import time
import weakref
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .algebra import EQ, GE, LE, LinearModel

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"
TIME_LIMIT = "time_limit"

_AT_LOWER, _AT_UPPER, _BASIC, _FREE = 0, 1, 2, 3
_DENSE_LIMIT = 320  # row count; larger systems use the sparse backend


class SolverError(RuntimeError):
    pass


class _SingularBasis(RuntimeError):
    """Internal: the basis factorization failed; retry with larger pivots."""


@dataclass
class SolverOptions:
    """Tolerances and limits; all comparisons are absolute-plus-relative."""

    feasibility_tol: float = 1e-7
    optimality_tol: float = 1e-7
    mip_gap: float = 1e-3
    iteration_limit: int | None = None
    time_limit: float | None = None
    branching: str = "most_fractional"  # or "pseudo_cost"
    refactor_every: int = 64
    bland_threshold: int = 1000

    def __post_init__(self):
        if self.feasibility_tol <= 0 or self.optimality_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if self.mip_gap < 0:
            raise ValueError("mip_gap must be >= 0")
        if self.branching not in ("most_fractional", "pseudo_cost"):
            raise ValueError(f"unknown branching rule {self.branching!r}")


@dataclass
class SolveResult:
    """Primal/dual solution plus solver telemetry."""

    status: str
    objective: float
    primal: np.ndarray | None
    dual: np.ndarray | None
    reduced_costs: np.ndarray | None = None
    iterations: int = 0
    elapsed: float = 0.0
    best_bound: float | None = None
    gap: float | None = None
    nodes: int | None = None

    def value(self, var) -> float:
        idx = var.index if hasattr(var, "index") else int(var)
        return float(self.primal[idx])

    def dual_for(self, model: LinearModel, tag: str) -> float:
        return float(self.dual[model.row_index(tag)])


def close(a: float, b: float, tol: float) -> bool:
    """Absolute-plus-relative comparison |a-b| <= tol*(1+max(|a|,|b|))."""
    return abs(a - b) <= tol * (1.0 + max(abs(a), abs(b)))


# ---------------------------------------------------------------------------
# basis backends: full column system [A | I_slack | I_artificial]
# ---------------------------------------------------------------------------


class _DenseEngine:
    def __init__(self, a_all: sp.spmatrix):
        self.a = np.asarray(a_all.todense())
        self.lu = None

    def column(self, j: int) -> np.ndarray:
        return self.a[:, j].copy()

    def refactor(self, basis: np.ndarray) -> None:
        lu, piv = sla.lu_factor(self.a[:, basis], check_finite=False)
        if not np.all(np.isfinite(lu)) or np.abs(np.diag(lu)).min(initial=1.0) < 1e-14:
            raise _SingularBasis
        self.lu = (lu, piv)

    def solve(self, v: np.ndarray) -> np.ndarray:
        return sla.lu_solve(self.lu, v, check_finite=False)

    def solve_t(self, v: np.ndarray) -> np.ndarray:
        return sla.lu_solve(self.lu, v, trans=1, check_finite=False)

    def price(self, y: np.ndarray) -> np.ndarray:
        return self.a.T @ y

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.a @ v


class _SparseEngine:
    def __init__(self, a_all: sp.spmatrix):
        self.a = a_all.tocsc()
        self.at = self.a.T.tocsr()
        self.lu = None

    def column(self, j: int) -> np.ndarray:
        sl = slice(self.a.indptr[j], self.a.indptr[j + 1])
        col = np.zeros(self.a.shape[0])
        col[self.a.indices[sl]] = self.a.data[sl]
        return col

    def refactor(self, basis: np.ndarray) -> None:
        try:
            self.lu = spla.splu(self.a[:, basis].tocsc(), permc_spec="COLAMD")
        except RuntimeError as exc:  # SuperLU reports exact singularity this way
            raise _SingularBasis from exc

    def solve(self, v: np.ndarray) -> np.ndarray:
        return self.lu.solve(v)

    def solve_t(self, v: np.ndarray) -> np.ndarray:
        return self.lu.solve(v, trans="T")

    def price(self, y: np.ndarray) -> np.ndarray:
        return self.at @ y

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.a @ v


class _LpCore:
    """Standard-form column system for one model structure, reusable across solves."""

    def __init__(self, model: LinearModel):
        compiled = model.compile()
        self.rhs = compiled.rhs
        self.senses = compiled.senses
        m, n = compiled.a_csr.shape
        self.m, self.n = m, n
        self.ncols = n + 2 * m
        eye = sp.identity(m, format="csc", dtype=np.float64)
        a_all = sp.hstack([compiled.a_csr.tocsc(), eye, eye], format="csc")
        self.engine = _DenseEngine(a_all) if m <= _DENSE_LIMIT else _SparseEngine(a_all)
        slack_lo = np.empty(m)
        slack_hi = np.empty(m)
        for i, sense in enumerate(compiled.senses):
            if sense == LE:
                slack_lo[i], slack_hi[i] = 0.0, math.inf
            elif sense == GE:
                slack_lo[i], slack_hi[i] = -math.inf, 0.0
            else:
                slack_lo[i], slack_hi[i] = 0.0, 0.0
        self.slack_lo, self.slack_hi = slack_lo, slack_hi

    def solve(self, options: SolverOptions, lower: np.ndarray, upper: np.ndarray,
              cost: np.ndarray, constant: float = 0.0,
              deadline: float | None = None) -> SolveResult:
        t0 = time.monotonic()
        m, n = self.m, self.n
        if np.any(lower > upper + 1e-12):
            return SolveResult(INFEASIBLE, math.inf, None, None,
                               elapsed=time.monotonic() - t0)
        iters1 = iters2 = 0
        for pivot_tol in (1e-9, 1e-7, 1e-5):
            it = _Iterator(self, lower, upper, options, deadline, pivot_tol)
            try:
                status, iters1 = it.run_phase1()
                if status != OPTIMAL:
                    obj = math.inf if status == INFEASIBLE else math.nan
                    return SolveResult(status, obj, None, None, iterations=iters1,
                                       elapsed=time.monotonic() - t0)
                cost2 = np.zeros(self.ncols)
                cost2[:n] = cost
                status, iters2 = it.run_phase2(cost2)
                break
            except _SingularBasis:
                continue
        else:
            raise SolverError("basis factorization kept failing")
        iters = iters1 + iters2
        elapsed = time.monotonic() - t0
        if status != OPTIMAL:
            keep = status == ITERATION_LIMIT
            obj = float(cost2 @ it.val + constant) if keep else math.nan
            return SolveResult(status, obj, it.val[:n].copy() if keep else None, None,
                               iterations=iters, elapsed=elapsed)
        y = it.btran(cost2[it.basis])
        d_all = cost2 - it.price(y)
        obj = float(cost2 @ it.val + constant)
        return SolveResult(OPTIMAL, obj, it.val[:n].copy(), y,
                           reduced_costs=d_all[:n].copy(),
                           iterations=iters, elapsed=elapsed)


class _Iterator:
    """State of one simplex run: values, statuses, basis, eta file."""

    def __init__(self, core: _LpCore, lower, upper, options: SolverOptions,
                 deadline, pivot_tol: float = 1e-9):
        self.core = core
        self.opt = options
        self.deadline = deadline
        self.pivot_tol = pivot_tol
        m, n = core.m, core.n
        self.m, self.n = m, n
        self.ncols = core.ncols
        self.lo = np.concatenate([lower, core.slack_lo, np.zeros(m)])
        self.hi = np.concatenate([upper, core.slack_hi, np.zeros(m)])
        self.val = np.zeros(self.ncols)
        self.status = np.full(self.ncols, _AT_LOWER, dtype=np.int8)
        self.basis = np.arange(n + m, n + 2 * m, dtype=np.int64)
        self.etas: list[tuple[int, np.ndarray]] = []
        self.iter_limit = options.iteration_limit or max(20000, 120 * (m + n) + 5000)

    # eta-file wrapped engine operations

    def refactor(self) -> None:
        self.core.engine.refactor(self.basis)
        self.etas.clear()

    def ftran(self, v: np.ndarray) -> np.ndarray:
        x = self.core.engine.solve(v)
        for r, w in self.etas:
            xr = x[r] / w[r]
            x -= w * xr
            x[r] = xr
        return x

    def btran(self, cb: np.ndarray) -> np.ndarray:
        c = np.array(cb, dtype=np.float64)
        for r, w in reversed(self.etas):
            c[r] = (c[r] - (c @ w) + c[r] * w[r]) / w[r]
        return self.core.engine.solve_t(c)

    def price(self, y: np.ndarray) -> np.ndarray:
        return self.core.engine.price(y)

    def column(self, j: int) -> np.ndarray:
        return self.core.engine.column(j)

    def refresh_basics(self) -> None:
        """Recompute basic values from the nonbasic point to kill drift."""
        nb = self.val.copy()
        nb[self.basis] = 0.0
        r = self.core.rhs - self.core.engine.apply(nb)
        self.val[self.basis] = self.ftran(r)

    # phases

    def run_phase1(self) -> tuple[str, int]:
        m, n = self.m, self.n
        for j in range(n + m):
            if math.isfinite(self.lo[j]):
                self.val[j], self.status[j] = self.lo[j], _AT_LOWER
            elif math.isfinite(self.hi[j]):
                self.val[j], self.status[j] = self.hi[j], _AT_UPPER
            else:
                self.val[j], self.status[j] = 0.0, _FREE
        nb = self.val.copy()
        nb[n + m:] = 0.0
        resid = self.core.rhs - self.core.engine.apply(nb)
        cost1 = np.zeros(self.ncols)
        for i in range(m):
            j = n + m + i
            self.val[j] = resid[i]
            self.status[j] = _BASIC
            if resid[i] >= 0:
                self.lo[j], self.hi[j] = 0.0, math.inf
                cost1[j] = 1.0
            else:
                self.lo[j], self.hi[j] = -math.inf, 0.0
                cost1[j] = -1.0
        self.refactor()
        status, iters = self._iterate(cost1, phase=1)
        if status != OPTIMAL:
            return status, iters
        self.refactor()
        self.refresh_basics()
        infeas = float(cost1 @ self.val)
        scale = 1.0 + float(np.abs(self.core.rhs).max(initial=0.0))
        if infeas > self.opt.feasibility_tol * scale:
            return INFEASIBLE, iters
        self.lo[n + m:] = 0.0
        self.hi[n + m:] = 0.0
        in_basis = np.zeros(self.ncols, dtype=bool)
        in_basis[self.basis] = True
        for j in range(n + m, self.ncols):
            if not in_basis[j]:
                self.val[j] = 0.0
                self.status[j] = _AT_LOWER
        return OPTIMAL, iters

    def run_phase2(self, cost2: np.ndarray) -> tuple[str, int]:
        total = 0
        for _ in range(4):
            status, iters = self._iterate(cost2, phase=2)
            total += iters
            if status != OPTIMAL:
                return status, total
            # confirm optimality against a fresh factorization
            self.refactor()
            self.refresh_basics()
            if not self._has_candidate(cost2):
                return OPTIMAL, total
        return OPTIMAL, total

    # pricing helpers

    def _reduced(self, cost: np.ndarray) -> np.ndarray:
        y = self.btran(cost[self.basis])
        d = cost - self.price(y)
        d[self.basis] = 0.0
        return d

    def _eligibility(self, cost: np.ndarray):
        tol_d = self.opt.optimality_tol * (1.0 + float(np.abs(cost).max(initial=0.0)))
        d = self._reduced(cost)
        movable = self.hi - self.lo > 1e-12
        stat = self.status
        up = (stat == _AT_LOWER) & movable & (d < -tol_d)
        dn = (stat == _AT_UPPER) & movable & (d > tol_d)
        fr = (stat == _FREE) & (np.abs(d) > tol_d)
        return d, up | dn | fr

    def _has_candidate(self, cost: np.ndarray) -> bool:
        _, eligible = self._eligibility(cost)
        return bool(np.any(eligible))

    # main loop

    def _iterate(self, cost: np.ndarray, phase: int) -> tuple[str, int]:
        iters = 0
        degen_run = 0
        bland = False
        last_obj = float(cost @ self.val)
        while True:
            if iters >= self.iter_limit:
                return ITERATION_LIMIT, iters
            if self.deadline is not None and time.monotonic() > self.deadline:
                return ITERATION_LIMIT, iters
            d, eligible = self._eligibility(cost)
            if not np.any(eligible):
                return OPTIMAL, iters
            idx = np.nonzero(eligible)[0]
            if bland:
                e = int(idx[0])
            else:
                e = int(idx[np.argmax(np.abs(d[idx]))])
            if self.status[e] == _AT_LOWER:
                direction = 1.0
            elif self.status[e] == _AT_UPPER:
                direction = -1.0
            else:
                direction = 1.0 if d[e] < 0 else -1.0
            w = self.ftran(self.column(e))
            delta = -direction * w
            xb = self.val[self.basis]
            blo = self.lo[self.basis]
            bhi = self.hi[self.basis]
            theta_own = self.hi[e] - self.lo[e]
            ptol = self.pivot_tol
            with np.errstate(divide="ignore", invalid="ignore"):
                up_room = np.where(delta > ptol, (bhi - xb) / delta, math.inf)
                dn_room = np.where(delta < -ptol, (blo - xb) / delta, math.inf)
            ratios = np.minimum(up_room, dn_room)
            np.maximum(ratios, 0.0, out=ratios)
            rmin = float(ratios.min(initial=math.inf))
            theta = min(theta_own, rmin)
            if math.isinf(theta):
                if phase == 1:
                    raise SolverError("phase-1 subproblem unbounded")
                return UNBOUNDED, iters
            iters += 1
            if rmin <= theta_own:
                near = np.nonzero(ratios <= rmin + 1e-12)[0]
                if bland:
                    leave = int(near[np.argmin(self.basis[near])])
                else:
                    leave = int(near[np.argmax(np.abs(delta[near]))])
                bl = int(self.basis[leave])
                hit_upper = delta[leave] > 0
                self.val[self.basis] = xb + theta * delta
                self.val[bl] = bhi[leave] if hit_upper else blo[leave]
                self.status[bl] = _AT_UPPER if hit_upper else _AT_LOWER
                self.basis[leave] = e
                self.status[e] = _BASIC
                self.val[e] = self.val[e] + direction * theta
                self.etas.append((leave, w))
                if len(self.etas) >= self.opt.refactor_every:
                    self.refactor()
                    self.refresh_basics()
            else:
                # bound flip: entering travels to its opposite finite bound
                self.val[self.basis] = xb + theta * delta
                if direction > 0:
                    self.val[e], self.status[e] = self.hi[e], _AT_UPPER
                else:
                    self.val[e], self.status[e] = self.lo[e], _AT_LOWER
            obj = float(cost @ self.val)
            if obj < last_obj - 1e-9 * (1.0 + abs(last_obj)):
                degen_run = 0
                bland = False
            else:
                degen_run += 1
                if degen_run > self.opt.bland_threshold:
                    bland = True
            last_obj = obj


# ---------------------------------------------------------------------------
# model-level entry points
# ---------------------------------------------------------------------------

_CORE_CACHE: "weakref.WeakKeyDictionary[LinearModel, tuple[int, _LpCore]]" = (
    weakref.WeakKeyDictionary()
)


def _get_core(model: LinearModel) -> _LpCore:
    cached = _CORE_CACHE.get(model)
    version = model.num_variables * 1_000_003 + model.num_constraints
    if cached is not None and cached[0] == version:
        return cached[1]
    core = _LpCore(model)
    _CORE_CACHE[model] = (version, core)
    return core


def solve_lp(model: LinearModel, options: SolverOptions | None = None,
             lower_override: np.ndarray | None = None,
             upper_override: np.ndarray | None = None,
             deadline: float | None = None) -> SolveResult:
    """Solve the model as an LP (binaries relaxed to their [0, 1] boxes)."""
    options = options or SolverOptions()
    compiled = model.compile()
    core = _get_core(model)
    lower = compiled.lower if lower_override is None else lower_override
    upper = compiled.upper if upper_override is None else upper_override
    if deadline is None and options.time_limit is not None:
        deadline = time.monotonic() + options.time_limit
    return core.solve(options, lower, upper, compiled.cost, compiled.constant, deadline)


def _fractional(values: np.ndarray, bins: np.ndarray, int_tol: float) -> np.ndarray:
    frac = np.abs(values[bins] - np.round(values[bins]))
    return bins[frac > int_tol]


def solve_mip(model: LinearModel, options: SolverOptions | None = None) -> SolveResult:
    """Best-bound branch and bound over the model's binary variables."""
    options = options or SolverOptions()
    t0 = time.monotonic()
    deadline = t0 + options.time_limit if options.time_limit is not None else None
    compiled = model.compile()
    core = _get_core(model)
    bins = model.binary_indices()
    int_tol = max(1e-6, options.feasibility_tol * 10)

    root = core.solve(options, compiled.lower, compiled.upper, compiled.cost,
                      compiled.constant, deadline)
    total_iters = root.iterations
    if root.status in (INFEASIBLE, UNBOUNDED):
        return SolveResult(root.status, root.objective, None, None,
                           iterations=total_iters, elapsed=time.monotonic() - t0, nodes=1)
    if root.status != OPTIMAL:
        return SolveResult(root.status, math.nan, None, None, iterations=total_iters,
                           elapsed=time.monotonic() - t0, nodes=1)

    inc_obj = math.inf
    inc_primal: np.ndarray | None = None
    seq = 0
    heap: list[tuple[float, int, np.ndarray, np.ndarray, np.ndarray]] = []
    nodes = 1
    # pseudo-cost state: per variable, per direction (down, up)
    ps_sum = np.zeros((model.num_variables, 2))
    ps_cnt = np.zeros((model.num_variables, 2), dtype=np.int64)

    def relgap(inc: float, bound: float) -> float:
        return (inc - bound) / max(1e-10, abs(inc))

    def register(result: SolveResult, lo: np.ndarray, hi: np.ndarray) -> None:
        nonlocal inc_obj, inc_primal, seq
        frac = _fractional(result.primal, bins, int_tol) if len(bins) else np.array([], dtype=int)
        if len(frac) == 0:
            if result.objective < inc_obj - 1e-12:
                inc_obj = result.objective
                inc_primal = result.primal.copy()
        else:
            seq += 1
            heapq.heappush(heap, (result.objective, seq, lo, hi, result.primal))

    register(root, compiled.lower.copy(), compiled.upper.copy())
    bound_floor = root.objective
    pruned_floor = math.inf  # lowest bound among gap-pruned subtrees
    status = OPTIMAL

    while heap:
        node_bound, _, lo, hi, primal = heapq.heappop(heap)
        bound_floor = node_bound
        if math.isfinite(inc_obj) and relgap(inc_obj, node_bound) <= options.mip_gap:
            heapq.heappush(heap, (node_bound, 0, lo, hi, primal))
            break
        if deadline is not None and time.monotonic() > deadline:
            heapq.heappush(heap, (node_bound, 0, lo, hi, primal))
            status = TIME_LIMIT
            break
        frac = _fractional(primal, bins, int_tol)
        fdist = primal[frac] - np.floor(primal[frac])
        if options.branching == "pseudo_cost":
            with np.errstate(divide="ignore", invalid="ignore"):
                avg = np.where(ps_cnt[frac] > 0, ps_sum[frac] / np.maximum(ps_cnt[frac], 1), 1.0)
            gain_dn = np.maximum(avg[:, 0] * fdist, 1e-6)
            gain_up = np.maximum(avg[:, 1] * (1.0 - fdist), 1e-6)
            pick = int(np.argmax(gain_dn * gain_up))
        else:
            pick = int(np.argmin(np.abs(fdist - 0.5)))
        var = int(frac[pick])
        dist = float(fdist[pick])
        for side, fixval in ((0, 0.0), (1, 1.0)):
            clo, chi = lo.copy(), hi.copy()
            clo[var] = fixval
            chi[var] = fixval
            res = core.solve(options, clo, chi, compiled.cost, compiled.constant, deadline)
            nodes += 1
            total_iters += res.iterations
            if res.status == ITERATION_LIMIT:
                status = TIME_LIMIT if deadline and time.monotonic() > deadline else ITERATION_LIMIT
                break
            if res.status != OPTIMAL:
                continue
            gain = res.objective - node_bound
            width = dist if side == 0 else 1.0 - dist
            ps_sum[var, side] += gain / max(width, 1e-6)
            ps_cnt[var, side] += 1
            if math.isfinite(inc_obj) and relgap(inc_obj, res.objective) <= options.mip_gap:
                pruned_floor = min(pruned_floor, res.objective)
                continue  # cannot improve beyond the target gap
            register(res, clo, chi)
        if status in (TIME_LIMIT, ITERATION_LIMIT):
            break

    if heap:
        best_bound = min(bound_floor, min(h[0] for h in heap), pruned_floor)
    else:
        best_bound = min(inc_obj if math.isfinite(inc_obj) else bound_floor, pruned_floor)
    elapsed = time.monotonic() - t0
    if inc_primal is None:
        final_status = status if status in (TIME_LIMIT, ITERATION_LIMIT) else INFEASIBLE
        return SolveResult(final_status, math.inf, None, None, iterations=total_iters,
                           elapsed=elapsed, best_bound=best_bound, nodes=nodes)
    gap = relgap(inc_obj, best_bound)
    final_status = status if status in (TIME_LIMIT, ITERATION_LIMIT) else OPTIMAL
    return SolveResult(final_status, inc_obj, inc_primal, None, iterations=total_iters,
                       elapsed=elapsed, best_bound=best_bound, gap=max(gap, 0.0), nodes=nodes)


# ---------------------------------------------------------------------------
# solution checking (used by tests and the verification suites)
# ---------------------------------------------------------------------------


def check_solution(model: LinearModel, result: SolveResult, tol: float = 1e-6) -> list[str]:
    """Feasibility, dual-sign, complementary-slackness, and strong-duality checks.

    Returns a list of violation messages; an empty list means the solution
    certificate is consistent.
    """
    problems: list[str] = []
    if result.status != OPTIMAL or result.primal is None:
        return [f"not an optimal result: {result.status}"]
    compiled = model.compile()
    x = result.primal
    act = compiled.a_csr @ x
    for i, (sense, rhs) in enumerate(zip(compiled.senses, compiled.rhs)):
        slackness = act[i] - rhs
        allow = tol * (1.0 + abs(rhs))
        if sense == LE and slackness > allow:
            problems.append(f"row {i} violates <= by {slackness}")
        elif sense == GE and slackness < -allow:
            problems.append(f"row {i} violates >= by {-slackness}")
        elif sense == EQ and abs(slackness) > allow:
            problems.append(f"row {i} violates == by {slackness}")
    for j in range(model.num_variables):
        lo, hi = compiled.lower[j], compiled.upper[j]
        if x[j] < lo - tol * (1.0 + abs(lo)) or x[j] > hi + tol * (1.0 + abs(hi)):
            problems.append(f"variable {j} out of bounds: {x[j]} not in [{lo}, {hi}]")
    if result.dual is None:
        return problems
    y = result.dual
    dual_tol = tol * (1.0 + float(np.abs(compiled.cost).max(initial=0.0)))
    for i, (sense, rhs) in enumerate(zip(compiled.senses, compiled.rhs)):
        if sense == LE and y[i] > dual_tol:
            problems.append(f"row {i} (<=) has positive dual {y[i]}")
        if sense == GE and y[i] < -dual_tol:
            problems.append(f"row {i} (>=) has negative dual {y[i]}")
        if abs(y[i]) > dual_tol and not close(act[i], rhs, tol):
            problems.append(f"row {i} dual {y[i]} nonzero but slack {act[i] - rhs}")
    d = compiled.cost - compiled.a_csr.T @ y
    dual_obj = float(y @ compiled.rhs) + compiled.constant
    for j in range(model.num_variables):
        lo, hi = compiled.lower[j], compiled.upper[j]
        at_lo = math.isfinite(lo) and x[j] <= lo + tol * (1.0 + abs(lo))
        at_hi = math.isfinite(hi) and x[j] >= hi - tol * (1.0 + abs(hi))
        if abs(d[j]) <= dual_tol:
            continue
        if d[j] > 0 and not at_lo:
            problems.append(f"variable {j} reduced cost {d[j]} > 0 but not at lower bound")
        elif d[j] > 0:
            dual_obj += d[j] * lo
        if d[j] < 0 and not at_hi:
            problems.append(f"variable {j} reduced cost {d[j]} < 0 but not at upper bound")
        elif d[j] < 0:
            dual_obj += d[j] * hi
    if not close(dual_obj, result.objective, max(tol, 1e-6)):
        problems.append(f"strong duality gap: primal {result.objective} dual {dual_obj}")
    return problems
