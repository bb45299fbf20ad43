"""Pricing algorithms: LMP, the tight-relaxation price (TLP), the iterative
algorithms (IA1/IA2), the parallel complementary pass (IAC), and the full
hull formulation (OPT), with uplift accounting throughout.

Uplift convention: for a price vector with duals gamma of the system rows,
the Lagrangian value is z_c(gamma) = gamma'p + sum_i min(cost_i - pi_i'x_i)
over each generator's current hull, where pi_i is the generator's effective
(bus) price. The reported uplift is the MIP incumbent minus z_c(gamma); with
the incumbent rather than the true optimum this is an upper bound whose
overstatement is at most the incumbent-bound gap.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .hulls import (FormulationHandle, GammaDuals, SystemModel, build_P3,
                    build_system, hull_kind_for)
from .instance import GeneratorClass, SystemInstance, classify
from .oracle import dp_self_schedule
from .simplexcore import (INFEASIBLE, OPTIMAL, SolveResult, SolverError,
                          SolverOptions, solve_lp, solve_mip)


@dataclass
class PricingOptions:
    solver: SolverOptions = field(default_factory=SolverOptions)
    frac_tol: float = 1e-5          # distance from the nearest integer
    improvement_tol: float = 1e-6   # complementary pass acceptance threshold
    max_outer: int = 50
    workers: int | None = None      # per-generator LP parallelism
    iac_groups: int | None = None   # M; defaults to the candidate count
    iac_n_stop: int | None = None   # stop after this many accepted upgrades
    iac_time_limit: float | None = None


@dataclass
class PriceVector:
    """Uniform per-period prices, plus per-bus prices when transmission binds."""

    values: np.ndarray              # (T,) duals of the balance rows
    bus: np.ndarray | None = None   # (T, B)

    def flat(self) -> np.ndarray:
        return self.bus.ravel() if self.bus is not None else self.values


@dataclass
class PricingRunReport:
    algorithm: str
    gamma: PriceVector
    z_qip: float
    z_qip_bound: float
    relaxation_objective: float
    z_c: float
    uplift: float
    gamma_set: tuple[str, ...] = ()
    gamma_trace: tuple[tuple[str, ...], ...] = ()
    objective_trace: tuple[float, ...] = ()
    uplift_trace: tuple[float, ...] = ()
    iteration_seconds: tuple[float, ...] = ()
    fractional_final: tuple[str, ...] = ()
    accepted_upgrades: tuple[str, ...] = ()
    status: str = "ok"
    wall_seconds: float = 0.0
    price_diff_vs_lmp: float | None = None
    gamma_dot_p: float = 0.0


def compute_uplift(z_qip_upper: float, z_c_at_gamma: float) -> float:
    """Uplift payment implied by an upper bound on the commitment optimum."""
    if not (math.isfinite(z_qip_upper) and math.isfinite(z_c_at_gamma)):
        raise ValueError("uplift needs finite objective values")
    return z_qip_upper - z_c_at_gamma


def price_difference(gamma, beta) -> float:
    """Average absolute componentwise price deviation (over periods x buses)."""
    a = gamma.flat() if isinstance(gamma, PriceVector) else np.asarray(gamma, dtype=float).ravel()
    b = beta.flat() if isinstance(beta, PriceVector) else np.asarray(beta, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"price vectors differ in shape: {a.shape} vs {b.shape}")
    return float(np.abs(a - b).mean())


@dataclass
class P2Result:
    z_c: float
    per_gen: dict[str, float]
    flags: tuple[str, ...]
    solutions: dict[str, np.ndarray]


class PricingContext:
    """Shared state for one instance: classes, the commitment MIP, model caches."""

    def __init__(self, instance: SystemInstance, options: PricingOptions | None = None):
        self.instance = instance
        self.opt = options or PricingOptions()
        self.classes = {g.gen_id: classify(g) for g in instance.generators}
        self.g4_ids = tuple(
            g.gen_id for g in instance.generators
            if self.classes[g.gen_id] == GeneratorClass.G4
        )
        self._qip: tuple[SolveResult, SystemModel] | None = None
        self._p2_handles: dict[tuple[str, str], FormulationHandle] = {}

    # -- commitment problem ------------------------------------------------------

    def qip(self) -> tuple[SolveResult, SystemModel]:
        if self._qip is None:
            sm = build_system(
                self.instance, {g.gen_id: "3bin" for g in self.instance.generators},
                name="uc-mip",
            )
            res = solve_mip(sm.model, self.opt.solver)
            if res.status == INFEASIBLE:
                raise SolverError("commitment problem is infeasible")
            self._qip = (res, sm)
        return self._qip

    # -- relaxations ----------------------------------------------------------------

    def kinds(self, gamma_set: set[str]) -> dict[str, str]:
        return {
            g.gen_id: hull_kind_for(g, g.gen_id in gamma_set)
            for g in self.instance.generators
        }

    def build_p1(self, gamma_set: set[str], name: str = "p1") -> SystemModel:
        return build_system(self.instance, self.kinds(gamma_set), name=name)

    def solve_p1(self, sm: SystemModel) -> tuple[SolveResult, GammaDuals]:
        res = solve_lp(sm.model, self.opt.solver)
        if res.status != OPTIMAL:
            raise SolverError(f"relaxation solve failed: {res.status}")
        return res, sm.gamma_from(res)

    # -- per-generator subproblems ---------------------------------------------------

    def _p2_handle(self, gen_id: str, kind: str) -> FormulationHandle:
        key = (gen_id, kind)
        if key not in self._p2_handles:
            from .hulls import _standalone  # local import to keep the public API tidy

            self._p2_handles[key] = _standalone(self.instance.generator(gen_id), kind)
        return self._p2_handles[key]

    def effective_prices(self, gd: GammaDuals) -> dict[str, np.ndarray]:
        return {
            g.gen_id: gd.price_for_bus(g.bus) for g in self.instance.generators
        }

    def evaluate_p2(self, gd: GammaDuals, gamma_set: set[str]) -> P2Result:
        prices = self.effective_prices(gd)
        kinds = self.kinds(gamma_set)
        gens = list(self.instance.generators)

        def solve_one(g):
            handle = self._p2_handle(g.gen_id, kinds[g.gen_id])
            terms = list(handle.obj_terms)
            pi = prices[g.gen_id]
            for t in range(g.horizon):
                for var, coeff in handle.x_terms[t]:
                    terms.append((var, -pi[t] * coeff))
            handle.model.set_objective(terms, handle.obj_constant)
            res = solve_lp(handle.model, self.opt.solver)
            if res.status != OPTIMAL:
                raise SolverError(
                    f"self-scheduling LP for {g.gen_id} failed: {res.status}"
                )
            gap = handle.max_integrality_gap(res.primal)
            return g.gen_id, res.objective, gap, res.primal

        results = _parallel_map(solve_one, gens, self.opt.workers)
        per_gen = {gid: val for gid, val, _, _ in results}
        solutions = {gid: primal for gid, _, _, primal in results}
        flags = tuple(
            gid for gid, _, gap, _ in results
            if gid in self.g4_ids and gid not in gamma_set and gap > self.opt.frac_tol
        )
        z_c = gd.dot_p() + sum(per_gen.values())
        return P2Result(z_c, per_gen, flags, solutions)

    def p3_infeasible(self, gen_id: str, sm: SystemModel, primal: np.ndarray) -> bool:
        handle = sm.handles[gen_id]
        u, v, e = handle.uve_values(primal)
        hat = {
            "x": handle.x_values(primal),
            "f": handle.f_values(primal),
            "u": u, "v": v, "e": e,
        }
        model = build_P3(self.instance.generator(gen_id), hat)
        res = solve_lp(model, self.opt.solver)
        return res.status == INFEASIBLE

    def true_lagrangian(self, gd: GammaDuals) -> float:
        """Oracle-side Lagrangian: gamma'p plus per-generator DP net costs."""
        prices = self.effective_prices(gd)
        total = gd.dot_p()
        for g in self.instance.generators:
            _, tables = dp_self_schedule(g, prices[g.gen_id])
            total += tables.phi
        return total


def _parallel_map(fn, items, workers: int | None):
    n = len(items)
    if n <= 1:
        return [fn(it) for it in items]
    w = workers if workers is not None else min(n, os.cpu_count() or 1)
    if w <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=w) as pool:
        return list(pool.map(fn, items))


def _price_vector(gd: GammaDuals) -> PriceVector:
    return PriceVector(gd.y_bal.copy(), gd.bus_prices())


def _fractional_g4(ctx: PricingContext, sm: SystemModel, res: SolveResult,
                   gamma_set: set[str]) -> list[str]:
    out = []
    for gid in ctx.g4_ids:
        if gid in gamma_set:
            continue
        if sm.handles[gid].max_integrality_gap(res.primal) > ctx.opt.frac_tol:
            out.append(gid)
    return out


# ---------------------------------------------------------------------------
# algorithms
# ---------------------------------------------------------------------------


def compute_lmp(instance: SystemInstance, options: PricingOptions | None = None,
                context: PricingContext | None = None) -> PricingRunReport:
    """Locational marginal prices: fix the commitment incumbent, price the
    dispatch LP, and account the uplift against per-generator oracles."""
    t0 = time.monotonic()
    ctx = context or PricingContext(instance, options)
    qip_res, qip_sm = ctx.qip()
    assignments = []
    for g in instance.generators:
        handle = qip_sm.handles[g.gen_id]
        uvals = np.round([qip_res.primal[var.index] for var in handle.parts["u"]])
        prev = 1.0 if g.initially_on else 0.0
        if g.free_initial_state:
            v0, e0 = 0.0, 0.0
        else:
            v0 = max(uvals[0] - prev, 0.0)
            e0 = max(prev - uvals[0], 0.0)
        vvals = [v0] + [max(uvals[t] - uvals[t - 1], 0.0) for t in range(1, g.horizon)]
        evals = [e0] + [max(uvals[t - 1] - uvals[t], 0.0) for t in range(1, g.horizon)]
        for t in range(g.horizon):
            assignments.append((handle.parts["u"][t], uvals[t]))
            assignments.append((handle.parts["v"][t], vvals[t]))
            assignments.append((handle.parts["e"][t], evals[t]))
    fixed = qip_sm.model.fix_variables(assignments)
    res = solve_lp(fixed, ctx.opt.solver)
    if res.status != OPTIMAL:
        raise SolverError(f"dispatch pricing LP failed: {res.status}")
    gd = SystemModel(fixed, qip_sm.handles, qip_sm.sys, instance).gamma_from(res)
    z_c_true = ctx.true_lagrangian(gd)
    uplift = compute_uplift(qip_res.objective, z_c_true)
    return PricingRunReport(
        algorithm="lmp",
        gamma=_price_vector(gd),
        z_qip=qip_res.objective,
        z_qip_bound=qip_res.best_bound if qip_res.best_bound is not None else qip_res.objective,
        relaxation_objective=res.objective,
        z_c=z_c_true,
        uplift=uplift,
        wall_seconds=time.monotonic() - t0,
        gamma_dot_p=gd.dot_p(),
    )


def _finish_report(ctx, algorithm, gd, p2, qip_res, relax_obj, trace, t0,
                   gamma_set=(), status="ok", accepted=()) -> PricingRunReport:
    uplift = compute_uplift(qip_res.objective, p2.z_c)
    return PricingRunReport(
        algorithm=algorithm,
        gamma=_price_vector(gd),
        z_qip=qip_res.objective,
        z_qip_bound=qip_res.best_bound if qip_res.best_bound is not None else qip_res.objective,
        relaxation_objective=relax_obj,
        z_c=p2.z_c,
        uplift=uplift,
        gamma_set=tuple(sorted(gamma_set)),
        gamma_trace=tuple(tuple(sorted(s)) for s in trace["gamma"]),
        objective_trace=tuple(trace["obj"]),
        uplift_trace=tuple(trace["uplift"]),
        iteration_seconds=tuple(trace["secs"]),
        fractional_final=p2.flags,
        accepted_upgrades=tuple(accepted),
        status=status,
        wall_seconds=time.monotonic() - t0,
        gamma_dot_p=gd.dot_p(),
    )


def run_tlp(instance: SystemInstance, options: PricingOptions | None = None,
            context: PricingContext | None = None) -> PricingRunReport:
    """Tight LP relaxation price: one solve of the hull relaxation."""
    t0 = time.monotonic()
    ctx = context or PricingContext(instance, options)
    qip_res, _ = ctx.qip()
    gamma_set: set[str] = set()
    sm = ctx.build_p1(gamma_set, name="tlp")
    res, gd = ctx.solve_p1(sm)
    p2 = ctx.evaluate_p2(gd, gamma_set)
    trace = {"gamma": [set()], "obj": [res.objective],
             "uplift": [compute_uplift(qip_res.objective, res.objective)], "secs": [0.0]}
    return _finish_report(ctx, "tlp", gd, p2, qip_res, res.objective, trace, t0,
                          gamma_set=gamma_set)


def run_ia(instance: SystemInstance, variant: str = "ia1",
           options: PricingOptions | None = None,
           context: PricingContext | None = None) -> PricingRunReport:
    """Iterative hull-upgrade pricing. ``ia1`` clears the per-generator
    subproblem flags in the inner loop and probes hull membership in the
    outer loop; ``ia2`` exchanges the two."""
    if variant not in ("ia1", "ia2"):
        raise ValueError(f"unknown variant {variant!r}")
    t0 = time.monotonic()
    ctx = context or PricingContext(instance, options)
    qip_res, _ = ctx.qip()
    gamma_set: set[str] = set()
    trace = {"gamma": [], "obj": [], "uplift": [], "secs": []}

    def solve_current():
        tick = time.monotonic()
        sm = ctx.build_p1(gamma_set, name=f"{variant}-p1")
        res, gd = ctx.solve_p1(sm)
        trace["gamma"].append(set(gamma_set))
        trace["obj"].append(res.objective)
        trace["uplift"].append(compute_uplift(qip_res.objective, res.objective))
        trace["secs"].append(time.monotonic() - tick)
        return sm, res, gd

    sm, res, gd = solve_current()
    status = "iteration_cap"
    p2 = None
    for _ in range(ctx.opt.max_outer):
        if variant == "ia1":
            # inner: clear subproblem fractionality, upgrading as needed
            while True:
                p2 = ctx.evaluate_p2(gd, gamma_set)
                if not p2.flags:
                    break
                gamma_set.update(p2.flags)
                sm, res, gd = solve_current()
            n = 0
            for gid in _fractional_g4(ctx, sm, res, gamma_set):
                if ctx.p3_infeasible(gid, sm, res.primal):
                    gamma_set.add(gid)
                    n += 1
            if n == 0:
                status = "ok"
                break
            sm, res, gd = solve_current()
        else:
            # ia2: membership probes first, then the subproblem check
            while True:
                n = 0
                for gid in _fractional_g4(ctx, sm, res, gamma_set):
                    if ctx.p3_infeasible(gid, sm, res.primal):
                        gamma_set.add(gid)
                        n += 1
                if n == 0:
                    break
                sm, res, gd = solve_current()
            p2 = ctx.evaluate_p2(gd, gamma_set)
            if not p2.flags:
                status = "ok"
                break
            gamma_set.update(p2.flags)
            sm, res, gd = solve_current()
    if p2 is None or status != "ok":
        p2 = ctx.evaluate_p2(gd, gamma_set)
    return _finish_report(ctx, variant, gd, p2, qip_res, res.objective, trace, t0,
                          gamma_set=gamma_set, status=status)


def run_opt(instance: SystemInstance, options: PricingOptions | None = None,
            context: PricingContext | None = None) -> PricingRunReport:
    """Exact hull pricing: every class-G4 generator in extended form."""
    t0 = time.monotonic()
    ctx = context or PricingContext(instance, options)
    qip_res, _ = ctx.qip()
    gamma_set = set(ctx.g4_ids)
    sm = ctx.build_p1(gamma_set, name="opt")
    res, gd = ctx.solve_p1(sm)
    p2 = ctx.evaluate_p2(gd, gamma_set)
    trace = {"gamma": [set(gamma_set)], "obj": [res.objective],
             "uplift": [compute_uplift(qip_res.objective, res.objective)], "secs": [0.0]}
    status = "ok" if not p2.flags else "flags_nonzero"
    return _finish_report(ctx, "opt", gd, p2, qip_res, res.objective, trace, t0,
                          gamma_set=gamma_set, status=status)


def run_complementary(instance: SystemInstance, base: PricingRunReport,
                      options: PricingOptions | None = None,
                      context: PricingContext | None = None) -> PricingRunReport:
    """Parallel complementary pass: probe the remaining candidates in worker
    groups and apply the upgrades that improve the relaxation objective."""
    t0 = time.monotonic()
    ctx = context or PricingContext(instance, options)
    opt = ctx.opt
    qip_res, _ = ctx.qip()
    gamma_set = set(base.gamma_set)
    remaining = [gid for gid in ctx.g4_ids if gid not in gamma_set]
    deadline = t0 + opt.iac_time_limit if opt.iac_time_limit is not None else None

    trace = {"gamma": [set(gamma_set)], "obj": [], "uplift": [], "secs": []}
    sm = ctx.build_p1(gamma_set, name="iac-base")
    res, gd = ctx.solve_p1(sm)
    trace["obj"].append(res.objective)
    trace["uplift"].append(compute_uplift(qip_res.objective, res.objective))
    trace["secs"].append(0.0)
    base_obj = res.objective

    accepted_reports: list[list[str]] = []
    if remaining:
        m = opt.iac_groups if opt.iac_groups is not None else len(remaining)
        m = max(1, min(m, len(remaining), os.cpu_count() or 1))
        groups = [remaining[i::m] for i in range(m)]

        def probe(group: list[str]) -> list[str]:
            local = set(gamma_set)
            prev = base_obj
            found = []
            for gid in group:
                if deadline is not None and time.monotonic() > deadline:
                    break
                local.add(gid)
                psm = ctx.build_p1(local, name=f"iac-probe-{gid}")
                pres = solve_lp(psm.model, opt.solver)
                if pres.status != OPTIMAL:
                    continue
                if pres.objective > prev + opt.improvement_tol * (1 + abs(prev)):
                    found.append(gid)
                prev = pres.objective
            return found

        accepted_reports = _parallel_map(probe, groups, len(groups))

    applied: list[str] = []
    stop = False
    for group_found in accepted_reports:
        for gid in group_found:
            if opt.iac_n_stop is not None and len(applied) >= opt.iac_n_stop:
                stop = True
            if deadline is not None and time.monotonic() > deadline:
                stop = True
            if stop:
                break
            gamma_set.add(gid)
            applied.append(gid)
            tick = time.monotonic()
            sm = ctx.build_p1(gamma_set, name="iac-master")
            res, gd = ctx.solve_p1(sm)
            trace["gamma"].append(set(gamma_set))
            trace["obj"].append(res.objective)
            trace["uplift"].append(compute_uplift(qip_res.objective, res.objective))
            trace["secs"].append(time.monotonic() - tick)
        if stop:
            break
    p2 = ctx.evaluate_p2(gd, gamma_set)
    algorithm = "iac1" if base.algorithm in ("ia1", "iac1") else "iac2"
    return _finish_report(ctx, algorithm, gd, p2, qip_res, res.objective, trace, t0,
                          gamma_set=gamma_set, accepted=applied)


def lagrangian_value(instance: SystemInstance, gamma_set, gamma,
                     options: PricingOptions | None = None,
                     context: PricingContext | None = None) -> P2Result:
    """Evaluate the Lagrangian at a given price (array of balance duals or a
    full GammaDuals bundle) with the current hull selection."""
    ctx = context or PricingContext(instance, options)
    if isinstance(gamma, GammaDuals):
        gd = gamma
    else:
        arr = np.asarray(gamma, dtype=float)
        sm = ctx.build_p1(set(gamma_set), name="lagrange-shape")
        nl = len(sm.sys.line_hi_tags)
        zero = np.zeros((nl, instance.horizon)) if sm.sys.sf is not None else None
        gd = GammaDuals(arr, zero, zero, sm.sys)
    return ctx.evaluate_p2(gd, set(gamma_set))
