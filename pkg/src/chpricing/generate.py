"""Randomized synthetic instance generation with a controlled class mix.

Everything is driven by one seeded generator, so identical parameters yield
byte-identical instance documents. Demand is shaped between the forced
minimum (initially-on units still inside their minimum-up run) and a safe
fraction of always-available capacity, which keeps the commitment problem
feasible by construction.
"""
from __future__ import annotations

import math

import numpy as np

from .instance import (GeneratorSpec, StartupState, SystemInstance, classify,
                       validate_instance)

_DEF_MIX = (0.50, 0.01, 0.08, 0.41)  # observed share of classes G1..G4


def random_generator(rng: np.random.Generator, cls: str, horizon: int,
                     gen_id: str = "g", bus: str = "bus0",
                     init_mode: int | None = None) -> GeneratorSpec:
    """One random generator of the requested class (G1..G4)."""
    T = horizon
    pmin = round(float(rng.uniform(5, 30)), 1)
    pmax = round(pmin + float(rng.uniform(25, 95)), 1)
    gap = pmax - pmin
    min_up = int(rng.integers(1, 4))
    min_down = int(rng.integers(1, 4))
    n_seg = int(rng.integers(1, 4))
    slopes = sorted(round(float(s), 2) for s in rng.uniform(15, 60, n_seg))
    b0 = round(float(rng.uniform(-10, 10)), 2)
    segs = [(slopes[0], b0)]
    brk = np.sort(rng.uniform(pmin, pmax, n_seg - 1))
    for j in range(1, n_seg):
        prev_a, prev_b = segs[-1]
        segs.append((slopes[j], round(prev_b + (prev_a - slopes[j]) * float(brk[j - 1]), 4)))
    su_cost = round(float(rng.uniform(20, 250)), 1)
    sd_cost = round(float(rng.uniform(0, 40)), 1)
    no_load = round(float(rng.uniform(0, 25)), 1)
    kw = dict(
        gen_id=gen_id, horizon=T, bus=bus,
        p_min=(pmin,) * T, p_max=(pmax,) * T,
        ramp_up=(pmax,) * T, ramp_down=(pmax,) * T,
        su_ramp=(pmax,) * T, sd_ramp=(pmax,) * T,
        min_up=min_up, min_down=min_down, max_up=math.inf,
        mu_enforced=(1,) * T, md_enforced=(1,) * T,
        no_load=(no_load,) * T,
        cost_segments=(tuple(segs),) * T,
        startup_states=(StartupState("hot", su_cost, min_down, math.inf),),
        shutdown_steps=((None, sd_cost),),
    )
    if cls in ("G2", "G3"):
        kw["su_ramp"] = (round(float(rng.uniform(max(pmin, 0.35 * pmax), 0.95 * pmax)), 1),) * T
    if cls == "G3":
        kw["max_up"] = float(int(rng.integers(min_up, min_up + 4)))
    if cls == "G4":
        flavor = int(rng.integers(0, 5))
        if flavor == 0:  # time-variant capacity
            caps = tuple(round(pmax * float(rng.uniform(0.8, 1.2)), 1) for _ in range(T))
            kw["p_max"] = caps
            kw["p_min"] = (min(pmin, min(caps)),) * T
        elif flavor == 1:  # binding operating ramps
            kw["ramp_up"] = (round(float(rng.uniform(0.25, 0.9)) * gap, 1),) * T
            kw["ramp_down"] = (round(float(rng.uniform(0.25, 0.9)) * gap, 1),) * T
            kw["su_ramp"] = (round(float(rng.uniform(pmin, pmax)), 1),) * T
            kw["sd_ramp"] = (round(float(rng.uniform(pmin, pmax)), 1),) * T
        elif flavor == 2:  # hot/warm/cold start-up costs
            t_warm = min_down + int(rng.integers(1, 3))
            t_cold = t_warm + int(rng.integers(1, 3))
            kw["startup_states"] = (
                StartupState("hot", su_cost, min_down, t_warm - 1),
                StartupState("warm", round(su_cost * 1.5, 1), t_warm, t_cold - 1),
                StartupState("cold", round(su_cost * 2.2, 1), t_cold, math.inf),
            )
            if init_mode is None:
                init_mode = int(rng.integers(0, 2))
        elif flavor == 3:  # relaxed min-up/down windows (at least one relaxed)
            mu = [int(rng.random() < 0.6) for _ in range(T)]
            md = [int(rng.random() < 0.6) for _ in range(T)]
            if all(mu) and all(md):
                (mu if rng.random() < 0.5 else md)[int(rng.integers(0, T))] = 0
            kw["mu_enforced"] = tuple(mu)
            kw["md_enforced"] = tuple(md)
        else:  # finite max-up plus binding ramps
            kw["max_up"] = float(int(rng.integers(min_up, min_up + 3)))
            kw["ramp_up"] = (round(float(rng.uniform(0.3, 0.9)) * gap, 1),) * T
            kw["ramp_down"] = (round(float(rng.uniform(0.3, 0.9)) * gap, 1),) * T
    mode = int(rng.integers(0, 3)) if init_mode is None else init_mode
    if mode == 0:
        cap_hours = int(kw["max_up"]) if not math.isinf(kw["max_up"]) else min_up + 3
        kw["initial_on_duration"] = int(rng.integers(1, max(cap_hours, 1) + 1))
    elif mode == 1:
        kw["initial_off_duration"] = int(rng.integers(1, min_down + 3))
    g = GeneratorSpec(**kw)
    got = classify(g).value
    if got != cls:
        raise AssertionError(f"sampled class {got}, wanted {cls}")
    return g


def class_counts(n_gens: int, mix=_DEF_MIX) -> tuple[int, int, int, int]:
    """Integer class counts approximating the mix, always at least one G1."""
    total = sum(mix)
    raw = [m / total * n_gens for m in mix]
    counts = [int(c) for c in raw]
    while sum(counts) < n_gens:
        fracs = [r - c for r, c in zip(raw, counts)]
        counts[fracs.index(max(fracs))] += 1
    if counts[0] == 0:
        donor = max(range(4), key=lambda i: counts[i])
        counts[donor] -= 1
        counts[0] += 1
    return tuple(counts)


def random_instance(seed: int, n_gens: int = 8, horizon: int = 6,
                    mix=_DEF_MIX, name: str | None = None,
                    n_buses: int = 1, n_lines: int = 0) -> SystemInstance:
    """A feasible synthetic pricing case with the requested class mix."""
    rng = np.random.default_rng(seed)
    counts = class_counts(n_gens, mix)
    buses = tuple(f"b{i}" for i in range(max(1, n_buses)))
    gens = []
    idx = 0
    for cls, count in zip(("G1", "G2", "G3", "G4"), counts):
        for _ in range(count):
            bus = buses[idx % len(buses)]
            gens.append(random_generator(rng, cls, horizon, gen_id=f"u{idx:02d}", bus=bus))
            idx += 1
    # demand between the forced floor and a shaped share of dependable capacity
    floor = np.zeros(horizon)
    for g in gens:
        lock = min(max(g.min_up - g.initial_on_duration, 0), horizon) if g.initially_on else 0
        for t in range(lock):
            floor[t] += g.p_min[t]
    dependable = np.array([
        sum(g.p_max[t] for g in gens if not g.initially_off) for t in range(horizon)
    ])
    shape = 0.45 + 0.4 * np.sin(np.linspace(0.4, 2.4, horizon))
    demand = np.maximum(floor + 8.0, dependable * shape * 0.62)
    demand = np.minimum(demand, dependable * 0.85)
    inst = SystemInstance(
        name=name or f"rand{seed}",
        horizon=horizon,
        buses=buses,
        demand=tuple(round(float(d), 1) for d in demand),
        generators=tuple(gens),
        transmission=None,
    )
    if n_lines > 0 and len(buses) > 1:
        from .instance import TransmissionData

        lines, factors, limits = [], [], []
        peak = max(inst.demand)
        for li in range(n_lines):
            lines.append(f"l{li}")
            row = tuple(round(float(rng.uniform(-0.4, 0.4)), 2) for _ in buses)
            factors.append(row)
            limits.append(round(peak * float(rng.uniform(0.15, 0.35)), 1))
        inst = SystemInstance(inst.name, horizon, buses, inst.demand, inst.generators,
                              TransmissionData(tuple(lines), tuple(factors), tuple(limits)))
    validate_instance(inst)
    return inst
