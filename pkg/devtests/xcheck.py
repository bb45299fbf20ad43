"""Dev harness: cross-check enumerator / DP / 3-bin MIP / hull LPs on random gens."""
import math
import sys

sys.path.insert(0, "src")

import numpy as np

from chpricing.instance import GeneratorSpec, StartupState, classify, validate_generator
from chpricing.hulls import build_3bin, build_hull_D1, build_hull_D2, build_hull_D3, build_hull_D4
from chpricing.oracle import dp_self_schedule, enumerate_best_schedule
from chpricing.simplexcore import SolverOptions, solve_lp, solve_mip, check_solution

OPTS = SolverOptions(mip_gap=1e-9)


def rand_gen(rng, cls, T, init_mode=None):
    """Random generator of a requested class."""
    pmin = round(rng.uniform(5, 30), 1)
    pmax = round(pmin + rng.uniform(20, 90), 1)
    gap = pmax - pmin
    L = int(rng.integers(1, 4))
    ell = int(rng.integers(1, 4))
    n_seg = int(rng.integers(1, 4))
    slopes = np.sort(rng.uniform(15, 60, n_seg))
    slopes = [round(s, 2) for s in slopes]
    # continuous convex pw cost through breakpoints
    b0 = round(rng.uniform(-10, 10), 2)
    segs = [(slopes[0], b0)]
    xs = np.sort(rng.uniform(pmin, pmax, n_seg - 1)) if n_seg > 1 else []
    for j in range(1, n_seg):
        prev_a, prev_b = segs[-1]
        bj = prev_b + (prev_a - slopes[j]) * xs[j - 1]
        segs.append((slopes[j], round(bj, 4)))
    su_c = round(rng.uniform(20, 250), 1)
    sd_c = round(rng.uniform(0, 40), 1)
    noload = round(rng.uniform(0, 25), 1)
    kw = dict(
        gen_id="g", horizon=T, bus="bus0",
        p_min=(pmin,) * T, p_max=(pmax,) * T,
        ramp_up=(pmax,) * T, ramp_down=(pmax,) * T,
        su_ramp=(pmax,) * T, sd_ramp=(pmax,) * T,
        min_up=L, min_down=ell, max_up=math.inf,
        mu_enforced=(1,) * T, md_enforced=(1,) * T,
        no_load=(noload,) * T,
        cost_segments=(tuple(segs),) * T,
        startup_states=(StartupState("hot", su_c, ell, math.inf),),
        shutdown_steps=((None, sd_c),),
    )
    if cls in ("G2", "G3"):
        kw["su_ramp"] = (round(rng.uniform(max(pmin, 0.35 * pmax), 0.95 * pmax), 1),) * T
    if cls == "G3":
        kw["max_up"] = float(int(rng.integers(L, L + 4)))
    if cls == "G4":
        flavor = rng.integers(0, 5)
        if flavor == 0:  # time-variant capacity
            kw["p_max"] = tuple(round(pmax * rng.uniform(0.8, 1.2), 1) for _ in range(T))
            kw["p_min"] = (min(pmin, min(kw["p_max"])),) * T
        elif flavor == 1:  # binding operating ramps
            kw["ramp_up"] = (round(rng.uniform(0.25, 0.9) * gap, 1),) * T
            kw["ramp_down"] = (round(rng.uniform(0.25, 0.9) * gap, 1),) * T
            kw["su_ramp"] = (round(rng.uniform(pmin, pmax), 1),) * T
            kw["sd_ramp"] = (round(rng.uniform(pmin, pmax), 1),) * T
        elif flavor == 2:  # hot/warm/cold startup (needs a declared initial state)
            tw = ell + int(rng.integers(1, 3))
            tc = tw + int(rng.integers(1, 3))
            kw["startup_states"] = (
                StartupState("hot", su_c, ell, tw - 1),
                StartupState("warm", round(su_c * 1.5, 1), tw, tc - 1),
                StartupState("cold", round(su_c * 2.2, 1), tc, math.inf),
            )
            if init_mode is None:
                init_mode = int(rng.integers(0, 2))
        elif flavor == 3:  # relaxed min-up/down windows (at least one period relaxed)
            mu = [int(rng.random() < 0.6) for _ in range(T)]
            md = [int(rng.random() < 0.6) for _ in range(T)]
            if all(mu) and all(md):
                (mu if rng.random() < 0.5 else md)[int(rng.integers(0, T))] = 0
            kw["mu_enforced"] = tuple(mu)
            kw["md_enforced"] = tuple(md)
        else:  # max-up plus binding ramps
            kw["max_up"] = float(int(rng.integers(L, L + 3)))
            kw["ramp_up"] = (round(rng.uniform(0.3, 0.9) * gap, 1),) * T
            kw["ramp_down"] = (round(rng.uniform(0.3, 0.9) * gap, 1),) * T
    mode = init_mode if init_mode is not None else rng.integers(0, 3)
    if mode == 0:
        hi = int(kw["max_up"]) if not math.isinf(kw["max_up"]) else L + 3
        kw["initial_on_duration"] = int(rng.integers(1, max(hi, 1) + 1))
    elif mode == 1:
        kw["initial_off_duration"] = int(rng.integers(1, ell + 3))
    g = GeneratorSpec(**kw)
    validate_generator(g)
    return g


def hull_lp_value(handle, price):
    g = handle.gen
    model = handle.model
    terms = list(handle.obj_terms)
    for t in range(g.horizon):
        for var, coeff in handle.x_terms[t]:
            terms.append((var, -price[t] * coeff))
    model.set_objective(terms, handle.obj_constant)
    res = solve_lp(model, OPTS)
    return res


def mip_value(handle, price):
    g = handle.gen
    model = handle.model
    terms = list(handle.obj_terms)
    for t in range(g.horizon):
        for var, coeff in handle.x_terms[t]:
            terms.append((var, -price[t] * coeff))
    model.set_objective(terms, handle.obj_constant)
    return solve_mip(model, OPTS)


def main():
    rng = np.random.default_rng(int(sys.argv[1]) if len(sys.argv) > 1 else 7)
    n_trials = int(sys.argv[2]) if len(sys.argv) > 2 else 40
    bad = 0
    for trial in range(n_trials):
        cls = ["G1", "G2", "G3", "G4"][trial % 4]
        T = int(rng.integers(3, 7))
        g = rand_gen(rng, cls, T)
        got_cls = classify(g).value
        if got_cls != cls:
            print(f"[{trial}] class mismatch: wanted {cls} got {got_cls}")
            bad += 1
            continue
        price = np.round(rng.uniform(0, 80, T), 2)
        enum = enumerate_best_schedule(g, price)
        sched, tables = dp_self_schedule(g, price)
        if abs(enum.net_cost - tables.phi) > 1e-6 * (1 + abs(enum.net_cost)):
            print(f"[{trial}] {cls} T={T} DP {tables.phi} != enum {enum.net_cost}  "
                  f"init=({g.initial_on_duration},{g.initial_off_duration})")
            bad += 1
            continue
        # 3-bin MIP self-schedule
        h3 = build_3bin(g)
        m = mip_value(h3, price)
        if abs(m.objective - enum.net_cost) > 1e-6 * (1 + abs(enum.net_cost)):
            print(f"[{trial}] {cls} T={T} MIP {m.objective} != enum {enum.net_cost}  "
                  f"init=({g.initial_on_duration},{g.initial_off_duration}) "
                  f"maxup={g.max_up} L={g.min_up} s0={g.initial_on_duration}")
            bad += 1
            continue
        # D4 LP strong duality + integrality
        h4 = build_hull_D4(g)
        r4 = hull_lp_value(h4, price)
        if r4.status != "optimal" or abs(r4.objective - enum.net_cost) > 1e-6 * (1 + abs(enum.net_cost)):
            print(f"[{trial}] {cls} T={T} D4 {r4.status} {r4.objective} != {enum.net_cost} "
                  f"init=({g.initial_on_duration},{g.initial_off_duration})")
            bad += 1
            continue
        gap4 = h4.max_integrality_gap(r4.primal)
        if gap4 > 1e-5:
            print(f"[{trial}] {cls} D4 fractional vertex gap={gap4}")
            bad += 1
            continue
        # class hull LP
        if cls in ("G1", "G2", "G3"):
            build = {"G1": build_hull_D1, "G2": build_hull_D2, "G3": build_hull_D3}[cls]
            hh = build(g)
            rh = hull_lp_value(hh, price)
            if rh.status != "optimal" or abs(rh.objective - enum.net_cost) > 1e-6 * (1 + abs(enum.net_cost)):
                print(f"[{trial}] {cls} hull {rh.objective} != {enum.net_cost} "
                      f"init=({g.initial_on_duration},{g.initial_off_duration})")
                bad += 1
                continue
            gaph = hh.max_integrality_gap(rh.primal)
            if gaph > 1e-5:
                print(f"[{trial}] {cls} hull fractional gap={gaph}")
                bad += 1
                continue
    print(f"done: {n_trials} trials, {bad} failures")


if __name__ == "__main__":
    main()
