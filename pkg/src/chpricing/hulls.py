"""Formulation builders: 3-bin blocks, hull relaxations D1-D3, the extended
interval formulation D4, system assembly, and the per-generator membership
test model.

Period indices are 0-based. Interval conventions for the extended formulation:

* "down node" p: the unit is off from period p until it restarts; for the
  first block, the count of leading ON periods equals p.
* first-block choice k (variable w[k]): on for periods 0..k-1, off from k;
  k = T means on through the whole horizon.
* ON run (r, e): periods r..e inclusive. OFF gap (p, r): off periods
  p..r-1 with a restart at r, so the gap length is r - p.

Runs truncated by the end of the horizon are exempt from min-up; max-up is
never waived. Start-up ramps bind only on genuine starts (never on the first
block of an initially-on or free-state unit); shut-down ramps bind only on
shutdowns inside the horizon, at the last on period. Production cost
variables carry the raw segment intercepts; no-load cost is charged on the
status (u) or interval (w/y) variables.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .algebra import BINARY, CONTINUOUS, LinearModel, VarRef
from .instance import GeneratorClass, GeneratorSpec, SystemInstance, classify

Expr = list[tuple[VarRef, float]]


@dataclass(frozen=True)
class IntervalIndexSets:
    """Index sets of the extended interval formulation for one generator."""

    kbar: tuple[int, ...]                 # first-block lengths (w domain)
    tk1: tuple[tuple[int, int], ...]      # first-block ON intervals (0, k-1)
    tk2: tuple[tuple[int, int], ...]      # restart ON runs (r, e)
    kt: tuple[tuple[int, int], ...]       # OFF gaps (p, r)
    theta_domain: tuple[int, ...]         # down nodes (each has a stay-off arc)
    entry_starts: tuple[int, ...]         # initially-off first starts
    stay_off: bool                        # initially-off stay-off arc present
    free_gap: bool                        # node 0 is the free-state initial gap


def build_index_sets(g: GeneratorSpec) -> IntervalIndexSets:
    """All interval families reachable from this generator's initial state."""
    T = g.horizon
    max_up = math.inf if math.isinf(g.max_up) else int(g.max_up)
    if g.initially_off:
        kbar: tuple[int, ...] = ()
        entry = tuple(
            r for r in range(T) if g.initial_off_duration + r >= g.min_down_at(r)
        )
        seed_down: set[int] = set()
        seed_up = set(entry)
        stay_off, free_gap = True, False
    else:
        s0 = g.initial_on_duration
        t0 = min(max(g.min_up - s0, 0), T) if g.initially_on else 0
        cap = T if math.isinf(max_up) else min(max_up - s0, T)
        kbar = tuple(range(t0, cap + 1))
        entry = ()
        seed_down = {k for k in kbar if k < T}
        seed_up = set()
        stay_off = False
        free_gap = g.free_initial_state and 0 in seed_down

    down_nodes = set(seed_down)
    up_nodes = set(seed_up)
    tk2: set[tuple[int, int]] = set()
    kt: set[tuple[int, int]] = set()
    pend_down = list(seed_down)
    pend_up = list(seed_up)
    while pend_down or pend_up:
        while pend_down:
            p = pend_down.pop()
            relaxed = free_gap and p == 0
            for r in range(p + 1, T):
                if relaxed or r - p >= g.min_down_at(r):
                    kt.add((p, r))
                    if r not in up_nodes:
                        up_nodes.add(r)
                        pend_up.append(r)
        while pend_up:
            r = pend_up.pop()
            lo_e = min(r + g.min_up_at(r) - 1, T - 1)
            hi_e = T - 1 if math.isinf(max_up) else min(r + max_up - 1, T - 1)
            for e in range(lo_e, hi_e + 1):
                tk2.add((r, e))
                if e <= T - 2 and e + 1 not in down_nodes:
                    down_nodes.add(e + 1)
                    pend_down.append(e + 1)

    return IntervalIndexSets(
        kbar=kbar,
        tk1=tuple((0, k - 1) for k in kbar if k >= 1),
        tk2=tuple(sorted(tk2)),
        kt=tuple(sorted(kt)),
        theta_domain=tuple(sorted(down_nodes)),
        entry_starts=entry,
        stay_off=stay_off,
        free_gap=free_gap,
    )


@dataclass
class FormulationHandle:
    """One generator's block inside a model, with value/expression helpers."""

    kind: str  # "3bin" | "D1" | "D2" | "D3" | "D4"
    gen: GeneratorSpec
    model: LinearModel
    prefix: str
    parts: dict
    x_terms: list[Expr]
    obj_terms: Expr
    obj_constant: float = 0.0
    index_sets: IntervalIndexSets | None = None

    # symbolic expressions -----------------------------------------------------

    def f_terms(self) -> list[Expr]:
        T = self.gen.horizon
        if self.kind != "D4":
            return [[(self.parts["f"][t], 1.0)] for t in range(T)]
        out: list[Expr] = [[] for _ in range(T)]
        for (r, e), phis in self.parts["phi"].items():
            for s, var in zip(range(r, e + 1), phis):
                out[s].append((var, 1.0))
        return out

    def uve_terms(self) -> tuple[list[Expr], list[Expr], list[Expr]]:
        T = self.gen.horizon
        if self.kind != "D4":
            return (
                [[(self.parts["u"][t], 1.0)] for t in range(T)],
                [[(self.parts["v"][t], 1.0)] for t in range(T)],
                [[(self.parts["e"][t], 1.0)] for t in range(T)],
            )
        u: list[Expr] = [[] for _ in range(T)]
        v: list[Expr] = [[] for _ in range(T)]
        e: list[Expr] = [[] for _ in range(T)]
        for k, var in self.parts["w"].items():
            for t in range(k):
                u[t].append((var, 1.0))
            if k < T and (self.gen.initially_on or k >= 1):
                # k = 0 on a free-state unit starts off without a shutdown event
                e[k].append((var, 1.0))
        for (r, ee), var in self.parts["y"].items():
            for t in range(r, ee + 1):
                u[t].append((var, 1.0))
            if ee + 1 <= T - 1:
                e[ee + 1].append((var, 1.0))
        for (p, r), var in self.parts["z"].items():
            v[r].append((var, 1.0))
        for r, var in self.parts["z0"].items():
            v[r].append((var, 1.0))
        return u, v, e

    # numeric extraction ---------------------------------------------------------

    @staticmethod
    def _eval(exprs: list[Expr], primal: np.ndarray) -> np.ndarray:
        out = np.zeros(len(exprs))
        for t, expr in enumerate(exprs):
            for var, coeff in expr:
                out[t] += coeff * primal[var.index]
        return out

    def x_values(self, primal: np.ndarray) -> np.ndarray:
        return self._eval(self.x_terms, primal)

    def f_values(self, primal: np.ndarray) -> np.ndarray:
        return self._eval(self.f_terms(), primal)

    def uve_values(self, primal: np.ndarray):
        ue, ve, ee = self.uve_terms()
        return self._eval(ue, primal), self._eval(ve, primal), self._eval(ee, primal)

    def cost_value(self, primal: np.ndarray) -> float:
        total = self.obj_constant
        for var, coeff in self.obj_terms:
            total += coeff * primal[var.index]
        return float(total)

    def max_integrality_gap(self, primal: np.ndarray) -> float:
        """Largest distance from an integer among the block's status levels."""
        if self.kind == "D4":
            vals = [primal[v.index] for v in self.parts["w"].values()]
            vals += [primal[v.index] for v in self.parts["y"].values()]
            vals += [primal[v.index] for v in self.parts["z"].values()]
            vals += [primal[v.index] for v in self.parts["z0"].values()]
            arr = np.array(vals) if vals else np.zeros(1)
        else:
            u, v, e = self.uve_values(primal)
            arr = np.concatenate([u, v, e])
        return float(np.abs(arr - np.round(arr)).max(initial=0.0))


# ---------------------------------------------------------------------------
# 3-bin family (MIP block and hull relaxations D1-D3)
# ---------------------------------------------------------------------------


def _restart_locked(g: GeneratorSpec, j: int) -> bool:
    """True when no feasible schedule can start a run at period j."""
    if g.initially_on:
        t0 = min(max(g.min_up - g.initial_on_duration, 0), g.horizon)
        return j < t0 + g.min_down_at(j)
    if g.initially_off:
        return g.initial_off_duration + j < g.min_down_at(j)
    return j == 0  # free state: period 0 carries no priced transition


def _first_possible_on(g: GeneratorSpec) -> int:
    for j in range(g.horizon):
        if g.initial_off_duration + j >= g.min_down_at(j):
            return j
    return g.horizon


def _cost_tilts(segments, cap: float) -> list[float]:
    """Per-segment cost gap at a ramp cap: for segments inactive below the
    cap, the piecewise cost at the cap sits above their line by this amount.
    Tilting the epigraph row by it (weighted by the start/stop level) gives
    the exact cost envelope when part of the mixture is ramp-capped."""
    cval = max(a * cap + b for a, b in segments)
    slope_at = max(a for a, b in segments if a * cap + b >= cval - 1e-12)
    return [max(0.0, cval - a * cap - b) if a > slope_at else 0.0 for a, b in segments]


def _emit_threebin(model: LinearModel, g: GeneratorSpec, prefix: str, *,
                   kind: str) -> FormulationHandle:
    """Emit one 3-bin style block; ``kind`` selects the constraint families."""
    T = g.horizon
    gid = g.gen_id
    mip = kind == "3bin"
    var_kind = BINARY if mip else CONTINUOUS
    pfx = prefix
    big_x = max(g.p_max)
    t0 = min(max(g.min_up - g.initial_on_duration, 0), T) if g.initially_on else 0
    first_on = _first_possible_on(g) if g.initially_off else 0

    u, v, e = [], [], []
    for t in range(T):
        u_lo = 1.0 if (g.initially_on and t < t0) else 0.0
        u_hi = 0.0 if (g.initially_off and t < first_on) else 1.0
        v_hi = 0.0 if _restart_locked(g, t) else 1.0
        e_locked = (
            (g.initially_on and t < t0)
            or (g.initially_off and t <= first_on)
            or (g.free_initial_state and t == 0)
        )
        u.append(model.add_variable(f"u[{gid}][{t}]", u_lo, u_hi, var_kind))
        v.append(model.add_variable(f"v[{gid}][{t}]", 0.0, v_hi, var_kind))
        e.append(model.add_variable(f"e[{gid}][{t}]", 0.0, 0.0 if e_locked else 1.0, var_kind))
    x = [model.add_variable(f"x[{gid}][{t}]", 0.0, big_x) for t in range(T)]
    f = [model.add_variable(f"f[{gid}][{t}]", -math.inf, math.inf) for t in range(T)]

    def v_live(j: int) -> bool:
        return model.bounds(v[j].index)[1] > 0.0

    for t in range(T):
        vu = min(g.su_ramp[t], g.p_max[t])
        tilt_u = _cost_tilts(g.cost_segments[t], max(vu, g.p_min[t])) \
            if vu < g.p_max[t] else None
        ve = min(g.sd_ramp[t], g.p_max[t])
        tilt_e = _cost_tilts(g.cost_segments[t], max(ve, g.p_min[t])) \
            if ve < g.p_max[t] and t + 1 < T else None
        for j, (slope, intercept) in enumerate(g.cost_segments[t]):
            coeffs: Expr = [(f[t], 1.0), (x[t], -slope), (u[t], -intercept)]
            if tilt_u is not None and tilt_u[j] > 0 and model.bounds(v[t].index)[1] > 0:
                coeffs.append((v[t], -tilt_u[j]))
            model.add_constraint(coeffs, ">=", 0.0, f"{pfx}/cost[{t}][{j}]")
            if (tilt_e is not None and tilt_e[j] > 0
                    and model.bounds(e[t + 1].index)[1] > 0):
                model.add_constraint(
                    [(f[t], 1.0), (x[t], -slope), (u[t], -intercept),
                     (e[t + 1], -tilt_e[j])],
                    ">=", 0.0, f"{pfx}/coste[{t}][{j}]",
                )
    if not g.free_initial_state:
        u_prev = 1.0 if g.initially_on else 0.0
        model.add_constraint(
            [(u[0], 1.0), (v[0], -1.0), (e[0], 1.0)], "=", u_prev, f"{pfx}/logic[0]"
        )
    for t in range(1, T):
        model.add_constraint(
            [(u[t], 1.0), (u[t - 1], -1.0), (v[t], -1.0), (e[t], 1.0)], "=", 0.0,
            f"{pfx}/logic[{t}]",
        )
    for t in range(T):
        window = [
            j for j in range(max(t - g.min_up + 1, 0), t + 1)
            if g.mu_enforced[j] and v_live(j)
        ]
        if window:
            model.add_constraint(
                [(v[j], 1.0) for j in window] + [(u[t], -1.0)], "<=", 0.0,
                f"{pfx}/minup[{t}]",
            )
    # min-down, one row per anchor period a: every restart whose protected
    # off-window contains a shares the row with u_a. The restart at a+1 is
    # always protected (a start requires the previous period off), which also
    # rules out the spurious simultaneous start+stop pair.
    for a in range(0, T - 1):
        window = []
        if v_live(a + 1):
            window.append(a + 1)
        for j in range(a + 2, min(a + g.min_down, T - 1) + 1):
            if g.md_enforced[j] and v_live(j):
                window.append(j)
        if window:
            model.add_constraint(
                [(v[j], 1.0) for j in window] + [(u[a], 1.0)], "<=", 1.0,
                f"{pfx}/mindown[{a}]",
            )
    for t in range(T):
        model.add_constraint([(x[t], 1.0), (u[t], -g.p_min[t])], ">=", 0.0, f"{pfx}/capl[{t}]")
        model.add_constraint([(x[t], 1.0), (u[t], -g.p_max[t])], "<=", 0.0, f"{pfx}/capu[{t}]")

    if mip:
        for t in range(1, T):
            model.add_constraint(
                [(x[t], 1.0), (x[t - 1], -1.0), (u[t - 1], -g.ramp_up[t]),
                 (v[t], -g.su_ramp[t])],
                "<=", 0.0, f"{pfx}/rampup[{t}]",
            )
            model.add_constraint(
                [(x[t - 1], 1.0), (x[t], -1.0), (u[t], -g.ramp_down[t]),
                 (e[t], -g.sd_ramp[t - 1])],
                "<=", 0.0, f"{pfx}/rampdn[{t}]",
            )
        if g.initially_off and g.su_ramp[0] < g.p_max[0]:
            model.add_constraint(
                [(x[0], 1.0), (u[0], -g.su_ramp[0])], "<=", 0.0, f"{pfx}/rampup[0]"
            )

    if mip or kind in ("D2", "D3"):
        for t in range(T):
            if v_live(t) and g.su_ramp[t] < g.p_max[t]:
                model.add_constraint(
                    [(x[t], 1.0), (u[t], -g.p_max[t]), (v[t], g.p_max[t] - g.su_ramp[t])],
                    "<=", 0.0, f"{pfx}/sru[{t}]",
                )
            if (t + 1 < T and model.bounds(e[t + 1].index)[1] > 0
                    and g.sd_ramp[t] < g.p_max[t]):
                model.add_constraint(
                    [(x[t], 1.0), (u[t], -g.p_max[t]),
                     (e[t + 1], g.p_max[t] - g.sd_ramp[t])],
                    "<=", 0.0, f"{pfx}/sde[{t}]",
                )

    if (mip or kind == "D3") and not math.isinf(g.max_up):
        max_up = int(g.max_up)
        credit = g.initial_on_duration
        for t in range(T):
            if not g.initially_off and t + 1 + credit <= max_up:
                continue  # the unbroken initial run may still cover t
            window = [
                j for j in range(max(t - max_up + 1, 0), t + 1) if v_live(j)
            ]
            model.add_constraint(
                [(u[t], 1.0)] + [(v[j], -1.0) for j in window], "<=", 0.0,
                f"{pfx}/maxup[{t}]",
            )

    parts = {"u": u, "v": v, "e": e, "x": x, "f": f}

    use_delta = mip and not g.constant_startup
    if use_delta:
        delta = {
            st.name: [model.add_variable(f"d.{st.name}[{gid}][{t}]", 0, 1) for t in range(T)]
            for st in g.startup_states
        }
        for t in range(T):
            model.add_constraint(
                [(delta[st.name][t], 1.0) for st in g.startup_states] + [(v[t], -1.0)],
                "=", 0.0, f"{pfx}/dsum[{t}]",
            )
        for si, st in enumerate(g.startup_states[:-1]):
            lo_off = 1 if si == 0 else st.min_off  # quick relaxed restarts stay hot
            for t in range(T):
                if g.initially_off and lo_off <= g.initial_off_duration + t <= st.max_off:
                    continue  # pre-horizon off time alone admits this state
                coeffs: Expr = [(delta[st.name][t], 1.0)]
                j = lo_off
                while j <= min(st.max_off, t):
                    coeffs.append((e[t - j], -1.0))
                    j += 1
                model.add_constraint(coeffs, "<=", 0.0, f"{pfx}/dwin[{st.name}][{t}]")
        parts["delta"] = delta

    obj_terms: Expr = []
    sdown = g.shutdown_floor
    for t in range(T):
        if g.no_load[t]:
            obj_terms.append((u[t], g.no_load[t]))
        obj_terms.append((f[t], 1.0))
        if sdown:
            obj_terms.append((e[t], sdown))
    if use_delta:
        for st in g.startup_states:
            for t in range(T):
                obj_terms.append((parts["delta"][st.name][t], st.cost))
    else:
        sup = g.cheapest_startup_cost
        if sup:
            for t in range(T):
                obj_terms.append((v[t], sup))

    return FormulationHandle(
        kind=kind, gen=g, model=model, prefix=pfx, parts=parts,
        x_terms=[[(x[t], 1.0)] for t in range(T)],
        obj_terms=obj_terms,
    )


# ---------------------------------------------------------------------------
# extended interval formulation (D4)
# ---------------------------------------------------------------------------


def _emit_d4(model: LinearModel, g: GeneratorSpec, prefix: str) -> FormulationHandle:
    T = g.horizon
    gid = g.gen_id
    pfx = prefix
    sets = build_index_sets(g)
    s0 = g.initial_on_duration
    hot_cost = g.startup_states[0].cost

    w = {k: model.add_variable(f"w[{gid}][{k}]", 0, 1) for k in sets.kbar}
    z0: dict[int, VarRef] = {}
    theta0 = None
    if sets.stay_off:
        theta0 = model.add_variable(f"th0[{gid}]", 0, 1)
        z0 = {r: model.add_variable(f"z0[{gid}][{r}]", 0, 1) for r in sets.entry_starts}
    y = {(r, e): model.add_variable(f"y[{gid}][{r}.{e}]", 0, 1) for r, e in sets.tk2}
    z = {(p, r): model.add_variable(f"z[{gid}][{p}.{r}]", 0, 1) for p, r in sets.kt}
    theta = {p: model.add_variable(f"th[{gid}][{p}]", 0, 1) for p in sets.theta_domain}

    # dispatch intervals: first blocks ride on w[k], restart runs on y[r, e];
    # keys never collide because first blocks start at period 0 and restart
    # runs never do (initially-off units have no first block).
    intervals: list[tuple[tuple[int, int], VarRef, bool]] = []
    for k in sets.kbar:
        if k >= 1:
            intervals.append(((0, k - 1), w[k], False))
    for (r, e) in sets.tk2:
        intervals.append(((r, e), y[(r, e)], True))

    big_x = max(g.p_max)
    q: dict[tuple[int, int], list[VarRef]] = {}
    phi: dict[tuple[int, int], list[VarRef]] = {}
    for (r, e), ind, is_start in intervals:
        key = (r, e)
        if key in q:
            raise AssertionError(f"duplicate dispatch interval {key} for {gid}")
        q[key] = [
            model.add_variable(f"q[{gid}][{r}.{e}][{s}]", 0, big_x)
            for s in range(r, e + 1)
        ]
        phi[key] = [
            model.add_variable(f"ph[{gid}][{r}.{e}][{s}]", -math.inf, math.inf)
            for s in range(r, e + 1)
        ]
        for off, s in enumerate(range(r, e + 1)):
            qs, ps = q[key][off], phi[key][off]
            model.add_constraint(
                [(qs, 1.0), (ind, -g.p_min[s])], ">=", 0.0, f"{pfx}/qlo[{r}.{e}][{s}]"
            )
            model.add_constraint(
                [(qs, 1.0), (ind, -g.p_max[s])], "<=", 0.0, f"{pfx}/qhi[{r}.{e}][{s}]"
            )
            for j, (slope, intercept) in enumerate(g.cost_segments[s]):
                model.add_constraint(
                    [(ps, 1.0), (qs, -slope), (ind, -intercept)], ">=", 0.0,
                    f"{pfx}/pc[{r}.{e}][{s}][{j}]",
                )
        if is_start and g.su_ramp[r] < g.p_max[r]:
            model.add_constraint(
                [(q[key][0], 1.0), (ind, -g.su_ramp[r])], "<=", 0.0, f"{pfx}/sur[{r}.{e}]"
            )
        if e < T - 1 and g.sd_ramp[e] < g.p_max[e]:
            model.add_constraint(
                [(q[key][-1], 1.0), (ind, -g.sd_ramp[e])], "<=", 0.0, f"{pfx}/sdr[{r}.{e}]"
            )
        for off, s in enumerate(range(r + 1, e + 1), start=1):
            model.add_constraint(
                [(q[key][off], 1.0), (q[key][off - 1], -1.0), (ind, -g.ramp_up[s])],
                "<=", 0.0, f"{pfx}/rup[{r}.{e}][{s}]",
            )
            model.add_constraint(
                [(q[key][off - 1], 1.0), (q[key][off], -1.0), (ind, -g.ramp_down[s])],
                "<=", 0.0, f"{pfx}/rdn[{r}.{e}][{s}]",
            )

    # unit flow: one source choice, conservation at every down/up node
    if sets.stay_off:
        src: Expr = [(theta0, 1.0)] + [(var, 1.0) for var in z0.values()]
    else:
        src = [(var, 1.0) for var in w.values()]
    model.add_constraint(src, "=", 1.0, f"{pfx}/src")
    for p in sets.theta_domain:
        coeffs: Expr = []
        if p in w and p < T:
            coeffs.append((w[p], 1.0))
        for (r, e), var in y.items():
            if e + 1 == p:
                coeffs.append((var, 1.0))
        for (pp, r), var in z.items():
            if pp == p:
                coeffs.append((var, -1.0))
        coeffs.append((theta[p], -1.0))
        model.add_constraint(coeffs, "=", 0.0, f"{pfx}/down[{p}]")
    up_nodes = sorted({r for r, _ in sets.tk2})
    for r in up_nodes:
        coeffs = [(var, 1.0) for (pp, rr), var in z.items() if rr == r]
        if r in z0:
            coeffs.append((z0[r], 1.0))
        coeffs += [(var, -1.0) for (rr, e), var in y.items() if rr == r]
        model.add_constraint(coeffs, "=", 0.0, f"{pfx}/up[{r}]")

    # objective: duration-indexed start/stop costs on arcs, no-load on
    # intervals, and the dispatch cost epigraph variables
    obj_terms: Expr = []
    for k in sets.kbar:
        cost = 0.0
        if k < T and (g.initially_on or k >= 1):
            cost += g.shutdown_cost_at(k + s0)
        cost += sum(g.no_load[t] for t in range(k))
        if cost:
            obj_terms.append((w[k], cost))
    for (r, e), var in y.items():
        cost = sum(g.no_load[t] for t in range(r, e + 1))
        if e < T - 1:
            cost += g.shutdown_cost_at(e - r + 1)
        if cost:
            obj_terms.append((var, cost))
    for (p, r), var in z.items():
        cost = hot_cost if (sets.free_gap and p == 0) else g.startup_cost_any(r - p)
        if cost:
            obj_terms.append((var, cost))
    for r, var in z0.items():
        cost = g.startup_cost_any(g.initial_off_duration + r)
        if cost:
            obj_terms.append((var, cost))
    for key in q:
        for var in phi[key]:
            obj_terms.append((var, 1.0))

    x_terms: list[Expr] = [[] for _ in range(T)]
    for (r, e) in q:
        for off, s in enumerate(range(r, e + 1)):
            x_terms[s].append((q[(r, e)][off], 1.0))

    parts = {"w": w, "y": y, "z": z, "theta": theta, "z0": z0, "theta0": theta0,
             "q": q, "phi": phi}
    return FormulationHandle(
        kind="D4", gen=g, model=model, prefix=pfx, parts=parts,
        x_terms=x_terms, obj_terms=obj_terms, index_sets=sets,
    )


# ---------------------------------------------------------------------------
# public builders
# ---------------------------------------------------------------------------

_EMITTERS = {"3bin": _emit_threebin, "D1": _emit_threebin, "D2": _emit_threebin,
             "D3": _emit_threebin}


def _emit(model: LinearModel, g: GeneratorSpec, kind: str) -> FormulationHandle:
    if kind == "D4":
        return _emit_d4(model, g, g.gen_id)
    return _emit_threebin(model, g, g.gen_id, kind=kind)


def _standalone(g: GeneratorSpec, kind: str) -> FormulationHandle:
    model = LinearModel(f"{g.gen_id}.{kind}")
    handle = _emit(model, g, kind)
    model.set_objective(handle.obj_terms, handle.obj_constant)
    return handle


def build_3bin(g: GeneratorSpec) -> FormulationHandle:
    """Full MIP block for one generator (binaries, ramps, start-up types)."""
    return _standalone(g, "3bin")


def build_hull_D1(g: GeneratorSpec) -> FormulationHandle:
    if classify(g) != GeneratorClass.G1:
        raise ValueError(f"{g.gen_id}: D1 requires a class-G1 generator")
    return _standalone(g, "D1")


def build_hull_D2(g: GeneratorSpec) -> FormulationHandle:
    if classify(g) != GeneratorClass.G2:
        raise ValueError(f"{g.gen_id}: D2 requires a class-G2 generator")
    return _standalone(g, "D2")


def build_hull_D3(g: GeneratorSpec) -> FormulationHandle:
    if classify(g) not in (GeneratorClass.G3, GeneratorClass.G4):
        raise ValueError(f"{g.gen_id}: D3 serves class G3 or as the G4 relaxation")
    return _standalone(g, "D3")


def build_hull_D4(g: GeneratorSpec) -> FormulationHandle:
    return _standalone(g, "D4")


def hull_kind_for(g: GeneratorSpec, in_gamma: bool = False) -> str:
    """Hull selection used by the pricing relaxation (D4 when upgraded)."""
    cls = classify(g)
    if cls == GeneratorClass.G1:
        return "D1"
    if cls == GeneratorClass.G2:
        return "D2"
    if cls == GeneratorClass.G3:
        return "D3"
    return "D4" if in_gamma else "D3"


# ---------------------------------------------------------------------------
# system assembly
# ---------------------------------------------------------------------------


@dataclass
class SystemRows:
    """Tags and data of the system-wide rows, for dual extraction."""

    bal_tags: list[str]
    line_hi_tags: list[list[str]]  # [line][t], flow <= limit direction
    line_lo_tags: list[list[str]]  # [line][t], flow >= -limit direction
    demand: np.ndarray
    limits: np.ndarray | None
    sf: np.ndarray | None  # line x bus shift factors
    buses: tuple[str, ...]


@dataclass
class GammaDuals:
    """Duals of the system rows: the price content of one LP solve."""

    y_bal: np.ndarray              # (T,)
    y_hi: np.ndarray | None        # (L, T), duals of flow <= limit rows (>= 0)
    y_lo: np.ndarray | None        # (L, T)
    sys: SystemRows

    def bus_prices(self) -> np.ndarray | None:
        if self.sys.sf is None:
            return None
        adj = self.sys.sf.T @ (self.y_lo - self.y_hi)  # (B, T)
        return (self.y_bal[None, :] + adj).T  # (T, B)

    def price_for_bus(self, bus: str) -> np.ndarray:
        if self.sys.sf is None:
            return self.y_bal.copy()
        b = self.sys.buses.index(bus)
        return self.y_bal + self.sys.sf[:, b] @ (self.y_lo - self.y_hi)

    def dot_p(self) -> float:
        total = float(self.y_bal @ self.sys.demand)
        if self.sys.sf is not None:
            total += float(np.sum((self.y_hi + self.y_lo) * (-self.sys.limits[:, None])))
        return total


@dataclass
class SystemModel:
    model: LinearModel
    handles: dict[str, FormulationHandle]
    sys: SystemRows
    instance: SystemInstance

    def gamma_from(self, result) -> GammaDuals:
        T = self.instance.horizon
        y_bal = np.array([result.dual[self.model.row_index(tag)] for tag in self.sys.bal_tags])
        y_hi = y_lo = None
        if self.sys.sf is not None:
            nl = len(self.sys.line_hi_tags)
            y_hi = np.zeros((nl, T))
            y_lo = np.zeros((nl, T))
            for li in range(nl):
                for t in range(T):
                    y_hi[li, t] = result.dual[self.model.row_index(self.sys.line_hi_tags[li][t])]
                    y_lo[li, t] = result.dual[self.model.row_index(self.sys.line_lo_tags[li][t])]
        return GammaDuals(y_bal, y_hi, y_lo, self.sys)


def build_system(instance: SystemInstance, kinds: dict[str, str],
                 name: str = "system") -> SystemModel:
    """Assemble per-generator blocks plus load balance and flow-limit rows.

    ``kinds`` maps generator id to one of "3bin", "D1".."D4". The balance row
    at t is sum of generation = demand; line flows are shift factors applied
    to generator injections, limited symmetrically in both directions.
    """
    T = instance.horizon
    model = LinearModel(name)
    handles: dict[str, FormulationHandle] = {}
    obj: Expr = []
    constant = 0.0
    for g in instance.generators:
        handle = _emit(model, g, kinds[g.gen_id])
        handles[g.gen_id] = handle
        obj.extend(handle.obj_terms)
        constant += handle.obj_constant
    bal_tags = []
    for t in range(T):
        coeffs: Expr = []
        for handle in handles.values():
            coeffs.extend(handle.x_terms[t])
        tag = f"sys/bal[{t}]"
        model.add_constraint(coeffs, "=", float(instance.demand[t]), tag)
        bal_tags.append(tag)
    line_hi: list[list[str]] = []
    line_lo: list[list[str]] = []
    sf = limits = None
    if instance.transmission is not None:
        tr = instance.transmission
        sf = np.array(tr.shift_factors, dtype=float)
        limits = np.array(tr.limits, dtype=float)
        for li in range(len(tr.lines)):
            hi_tags, lo_tags = [], []
            for t in range(T):
                coeffs_hi: Expr = []
                coeffs_lo: Expr = []
                for g in instance.generators:
                    factor = sf[li, instance.bus_index(g.bus)]
                    if factor == 0.0:
                        continue
                    for var, c in handles[g.gen_id].x_terms[t]:
                        coeffs_hi.append((var, -factor * c))
                        coeffs_lo.append((var, factor * c))
                tag_hi = f"sys/linehi[{li}][{t}]"
                tag_lo = f"sys/linelo[{li}][{t}]"
                model.add_constraint(coeffs_hi, ">=", -float(limits[li]), tag_hi)
                model.add_constraint(coeffs_lo, ">=", -float(limits[li]), tag_lo)
                hi_tags.append(tag_hi)
                lo_tags.append(tag_lo)
            line_hi.append(hi_tags)
            line_lo.append(lo_tags)
    model.set_objective(obj, constant)
    sys_rows = SystemRows(bal_tags, line_hi, line_lo,
                          np.array(instance.demand, dtype=float), limits, sf,
                          instance.buses)
    return SystemModel(model, handles, sys_rows, instance)


# ---------------------------------------------------------------------------
# hull membership test (the feasibility probe of the iterative algorithm)
# ---------------------------------------------------------------------------


def build_P3(g: GeneratorSpec, hat: dict[str, np.ndarray]) -> LinearModel:
    """Feasibility model: can the extended formulation reproduce the relaxed
    block's point? ``hat`` carries arrays x, f, u, v, e over the horizon.
    Infeasibility certifies the point lies outside the generator's hull."""
    T = g.horizon
    model = LinearModel(f"{g.gen_id}.membership")
    handle = _emit_d4(model, g, g.gen_id)
    u_terms, v_terms, e_terms = handle.uve_terms()
    f_terms = handle.f_terms()
    for t in range(T):
        model.add_constraint(handle.x_terms[t], "=", float(hat["x"][t]), f"map/x[{t}]")
        model.add_constraint(f_terms[t], "=", float(hat["f"][t]), f"map/f[{t}]")
        model.add_constraint(u_terms[t], "=", float(hat["u"][t]), f"map/u[{t}]")
        model.add_constraint(v_terms[t], "=", float(hat["v"][t]), f"map/v[{t}]")
        model.add_constraint(e_terms[t], "=", float(hat["e"][t]), f"map/e[{t}]")
    model.set_objective([], 1.0)
    return model
