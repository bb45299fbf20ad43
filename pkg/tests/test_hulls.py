"""Formulation builder tests: index sets, block families, hull integrality,
system assembly, and the membership probe."""
import math

import numpy as np
import pytest

from chpricing.generate import random_generator
from chpricing.hulls import (build_3bin, build_hull_D1, build_hull_D2,
                             build_hull_D3, build_hull_D4, build_index_sets,
                             build_P3, build_system)
from chpricing.instance import (GeneratorSpec, StartupState, classify,
                                parse_instance)
from chpricing.oracle import enumerate_best_schedule, feasible_patterns
from chpricing.simplexcore import SolverOptions, solve_lp, solve_mip

from conftest import priced_objective

TIGHT = SolverOptions(mip_gap=1e-9)


def gen(T=4, **kw):
    base = dict(
        gen_id="g", horizon=T, bus="b",
        p_min=(10.0,) * T, p_max=(100.0,) * T,
        ramp_up=(100.0,) * T, ramp_down=(100.0,) * T,
        su_ramp=(100.0,) * T, sd_ramp=(100.0,) * T,
        min_up=1, min_down=1, max_up=math.inf,
        mu_enforced=(1,) * T, md_enforced=(1,) * T,
        no_load=(5.0,) * T,
        cost_segments=(((20.0, 0.0),),) * T,
        startup_states=(StartupState("hot", 100.0, 1, math.inf),),
        shutdown_steps=((None, 0.0),),
    )
    base["startup_states"] = (
        StartupState("hot", 100.0, kw.get("min_down", 1), math.inf),
    )
    base.update(kw)
    return GeneratorSpec(**base)


# -- index sets ---------------------------------------------------------------


def test_index_sets_first_block_domain():
    g = gen(T=6, min_up=2, min_down=2, max_up=3.0, su_ramp=(50.0,) * 6,
            initial_on_duration=1)
    sets = build_index_sets(g)
    assert sets.kbar == (1, 2)
    assert sets.tk1 == ((0, 0), (0, 1))
    # restarts possible from periods >= t0 + min_down + 1 = 4 (1-based), 3 (0-based)
    assert all(r >= 3 for r, _ in sets.tk2)


def test_index_sets_unbounded_maxup():
    g = gen(T=5, min_up=2, initial_on_duration=1)
    sets = build_index_sets(g)
    assert sets.kbar == tuple(range(1, 6))  # [t0, T]


def test_index_sets_relaxed_minup_admits_short_run():
    g = gen(T=5, min_up=3, mu_enforced=(1, 1, 0, 1, 1), initial_on_duration=3)
    sets = build_index_sets(g)
    assert (2, 2) in sets.tk2  # single-period run allowed where relaxed
    assert not any(r == 3 and e == 3 for r, e in sets.tk2)  # enforced elsewhere


def test_index_sets_cover_feasible_runs():
    rng = np.random.default_rng(4)
    for trial in range(24):
        cls = ("G1", "G3", "G4")[trial % 3]
        g = random_generator(rng, cls, int(rng.integers(3, 6)), gen_id=f"c{trial}")
        sets = build_index_sets(g)
        allowed = set(sets.tk1) | set(sets.tk2)
        for pattern in feasible_patterns(g):
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
            for run in runs:
                assert run in allowed, (trial, pattern, run)


def test_index_sets_forced_on_through_horizon():
    g = gen(T=3, min_up=8, initial_on_duration=1)
    sets = build_index_sets(g)
    assert sets.kbar == (3,)
    assert sets.tk2 == ()
    assert sets.theta_domain == ()


# -- 3-bin block ---------------------------------------------------------------


def test_3bin_single_period_free_unit():
    g = gen(T=1)
    h = build_3bin(g)
    assert h.model.kind(h.parts["u"][0].index) == "binary"
    assert h.model.has_row("g/capl[0]")
    assert h.model.has_row("g/capu[0]")


def test_3bin_minup_row_range():
    g = gen(T=5, min_up=3)
    h = build_3bin(g)
    # rows exist across the horizon with truncated windows near the start
    for t in range(1, 5):
        assert h.model.has_row(f"g/minup[{t}]")


def test_3bin_multistate_delta_rows():
    g = gen(T=6, min_down=2, initial_on_duration=1,
            startup_states=(
                StartupState("hot", 50.0, 2, 3),
                StartupState("warm", 80.0, 4, 7),
                StartupState("cold", 120.0, 8, math.inf),
            ))
    h = build_3bin(g)
    assert "delta" in h.parts
    assert h.model.has_row("g/dsum[3]")
    assert h.model.has_row("g/dwin[hot][4]")
    assert not any("dwin[cold]" in tag for tag in h.model.row_tags())


# -- hull gating and families ----------------------------------------------------


def test_hull_class_gates():
    g1 = gen()
    g2 = gen(su_ramp=(50.0,) * 4)
    g3 = gen(su_ramp=(50.0,) * 4, max_up=10.0)
    with pytest.raises(ValueError):
        build_hull_D1(g2)
    with pytest.raises(ValueError):
        build_hull_D2(g1)
    with pytest.raises(ValueError):
        build_hull_D3(g1)
    build_hull_D1(g1)
    build_hull_D2(g2)
    build_hull_D3(g3)
    g4 = gen(p_max=(100.0, 90.0, 100.0, 100.0))
    build_hull_D3(g4)  # accepted as the relaxation
    build_hull_D4(g1)  # any class


def test_d2_startup_ramp_facet_binds():
    g = gen(T=3, su_ramp=(40.0,) * 3)
    h = build_hull_D2(g)
    m = h.model
    # force a full start at t=1 and maximize x_1
    fixed = m.fix_variables([
        (h.parts["u"][0], 0.0), (h.parts["u"][1], 1.0), (h.parts["v"][1], 1.0),
    ])
    fixed.set_objective([(h.parts["x"][1], -1.0)])
    res = solve_lp(fixed, TIGHT)
    assert res.status == "optimal"
    assert -res.objective == pytest.approx(40.0)


def test_d3_maxup_cuts_long_run():
    g = gen(T=3, su_ramp=(50.0,) * 3, max_up=2.0, min_up=1)
    h = build_hull_D3(g)
    fixed = h.model.fix_variables(
        [(h.parts["u"][t], 1.0) for t in range(3)]
    )
    fixed.set_objective([])
    assert solve_lp(fixed, TIGHT).status == "infeasible"


def test_d4_structure():
    g = gen(T=2, min_up=2, initial_on_duration=1)
    h = build_hull_D4(g)
    assert h.model.has_row("g/src")
    sets = h.index_sets
    assert sets.kbar == (1, 2)
    # shut-down ramp rows only for in-horizon shutdowns
    tags = h.model.row_tags()
    assert not any(tag.startswith("g/sdr") and tag.endswith("[1]") for tag in tags)


def test_d4_lp_integral_on_random_objectives():
    rng = np.random.default_rng(15)
    for trial in range(16):
        cls = ("G1", "G2", "G3", "G4")[trial % 4]
        g = random_generator(rng, cls, int(rng.integers(2, 6)), gen_id=f"h{trial}")
        h = build_hull_D4(g)
        price = rng.uniform(0, 80, g.horizon)
        res = solve_lp(priced_objective(h, price), TIGHT)
        assert res.status == "optimal"
        assert h.max_integrality_gap(res.primal) <= 1e-5
        enum = enumerate_best_schedule(g, price)
        assert res.objective == pytest.approx(
            enum.net_cost, abs=1e-6 * (1 + abs(enum.net_cost))
        )


# -- system assembly ---------------------------------------------------------------


SYSTEM_DOC = """
horizon: 2
demand: [60, 80]
buses: [b1, b2]
lines:
  - shift_factors: {b1: 0.5, b2: -0.5}
    limit: 30
generators:
  - id: a
    bus: b1
    p_min: 0
    p_max: 100
    cost_segments: [{slope: 20}]
  - id: b
    bus: b2
    p_min: 0
    p_max: 100
    cost_segments: [{slope: 30}]
"""


def test_build_system_row_counts():
    inst = parse_instance(SYSTEM_DOC)
    sm = build_system(inst, {"a": "D1", "b": "D1"})
    tags = sm.model.row_tags()
    assert sum(tag.startswith("sys/bal") for tag in tags) == 2
    assert sum(tag.startswith("sys/line") for tag in tags) == 4  # 2 dirs x 2 periods


def test_d4_balance_touches_q_only():
    doc = SYSTEM_DOC.replace("buses: [b1, b2]", "buses: [b1, b2]")
    inst = parse_instance(doc)
    sm = build_system(inst, {"a": "D4", "b": "D1"})
    bal = sm.model.row(sm.model.row_index("sys/bal[0]"))
    names = [sm.model.variable_names()[i] for i in bal.indices]
    assert any(name.startswith("q[a]") for name in names)
    assert not any(name.startswith("x[a]") for name in names)
    assert any(name.startswith("x[b]") for name in names)


# -- membership probe -----------------------------------------------------------------


def test_p3_accepts_integral_schedule():
    g = gen(T=4, min_up=2, initial_on_duration=2,
            p_max=(100.0, 90.0, 100.0, 100.0))  # class G4
    h = build_3bin(g)
    res = solve_mip(priced_objective(h, [40.0, 0.0, 0.0, 55.0]), TIGHT)
    assert res.status == "optimal"
    hat = {
        "x": h.x_values(res.primal),
        "f": h.f_values(res.primal),
    }
    u, v, e = h.uve_values(res.primal)
    hat.update({"u": np.round(u), "v": np.round(v), "e": np.round(e)})
    # tighten f to the exact epigraph value of the integral point
    for t in range(4):
        hat["f"][t] = max(
            a * hat["x"][t] + b * hat["u"][t] for a, b in g.cost_segments[t]
        )
    model = build_P3(g, hat)
    assert solve_lp(model, TIGHT).status == "optimal"


def test_p3_rejects_minup_blip_mixture():
    # a fractional two-period blip on a min-up-3 unit lies outside the hull:
    # the starting mass must stay on for three periods, but u drops to zero
    g = gen(T=5, min_up=3, min_down=1,
            p_max=(100.0, 90.0, 100.0, 100.0, 100.0))
    assert classify(g).value == "G4"
    T = 5
    u = np.array([0.0, 0.5, 0.5, 0.0, 0.0])
    v = np.array([0.0, 0.5, 0.0, 0.0, 0.0])
    e = np.array([0.0, 0.0, 0.0, 0.5, 0.0])
    x = 10.0 * u
    f = np.array([
        max(a * x[t] + b * u[t] for a, b in g.cost_segments[t]) for t in range(T)
    ])
    model = build_P3(g, {"x": x, "f": f, "u": u, "v": v, "e": e})
    assert solve_lp(model, TIGHT).status == "infeasible"


def test_p3_accepts_d3_vertex_of_g3():
    g = gen(T=4, su_ramp=(50.0,) * 4, max_up=2.0)
    assert classify(g).value == "G3"
    h = build_hull_D3(g)
    res = solve_lp(priced_objective(h, [30.0, 80.0, 10.0, 45.0]), TIGHT)
    u, v, e = h.uve_values(res.primal)
    hat = {"x": h.x_values(res.primal), "f": h.f_values(res.primal),
           "u": u, "v": v, "e": e}
    assert solve_lp(build_P3(g, hat), TIGHT).status == "optimal"


def test_mapping_consistency_integral_point():
    # integral extended-form optimum maps to a feasible 3-bin point of equal cost
    rng = np.random.default_rng(29)
    for trial in range(8):
        g = random_generator(rng, "G4", 4, gen_id=f"m{trial}")
        if not g.constant_startup:
            continue  # cost parity needs duration-independent start-up
        price = rng.uniform(0, 70, 4)
        h4 = build_hull_D4(g)
        r4 = solve_lp(priced_objective(h4, price), TIGHT)
        assert h4.max_integrality_gap(r4.primal) <= 1e-6
        u, v, e = h4.uve_values(r4.primal)
        x = h4.x_values(r4.primal)
        cost4 = h4.cost_value(r4.primal)
        h3 = build_3bin(g)
        fixed = h3.model.fix_variables(
            [(h3.parts["u"][t], round(u[t])) for t in range(4)]
            + [(h3.parts["v"][t], round(v[t])) for t in range(4)]
            + [(h3.parts["e"][t], round(e[t])) for t in range(4)]
            + [(h3.parts["x"][t], x[t]) for t in range(4)]
        )
        res3 = solve_lp(fixed, TIGHT)
        assert res3.status == "optimal"
        cost3 = h3.cost_value(res3.primal)
        assert cost3 == pytest.approx(cost4, abs=1e-6 * (1 + abs(cost4)))
