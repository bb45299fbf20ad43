"""Pricing algorithm tests: LMP, uplift accounting, iterative runs, and the
complementary pass, on hand-checked toys and randomized instances."""
import numpy as np
import pytest

from chpricing.generate import random_instance
from chpricing.instance import load_instance, parse_instance
from chpricing.oracle import dp_self_schedule
from chpricing.pricing import (PricingContext, PricingOptions, compute_lmp,
                               compute_uplift, lagrangian_value,
                               price_difference, run_complementary, run_ia,
                               run_opt, run_tlp)

CONGESTION_DOC = """
name: congestion
horizon: 2
demand: [40, 100]
buses: [b1, b2]
lines:
  - shift_factors: {b1: 0.5, b2: -0.5}
    limit: 30
generators:
  - id: cheap
    bus: b1
    p_min: 0
    p_max: 100
    no_load: 1
    cost_segments: [{slope: 20}]
  - id: dear
    bus: b2
    p_min: 0
    p_max: 100
    no_load: 1
    cost_segments: [{slope: 30}]
"""


def lemma1_gap(inst, rep):
    """|sum_i Z^i(gamma) + (z_c - gamma'p)| from independent oracles."""
    total = 0.0
    for g in inst.generators:
        if rep.gamma.bus is not None:
            pi = rep.gamma.bus[:, inst.bus_index(g.bus)]
        else:
            pi = rep.gamma.values
        _, tables = dp_self_schedule(g, pi)
        total += tables.phi
    return abs(total - (rep.z_c - rep.gamma_dot_p))


def test_compute_uplift_values():
    assert compute_uplift(100.0, 100.0) == 0.0
    assert compute_uplift(39_986_855.0, 39_986_726.0) == 129.0
    assert compute_uplift(55_311_277.0, 55_309_361.0) == 1_916.0
    with pytest.raises(ValueError):
        compute_uplift(float("inf"), 0.0)


def test_price_difference():
    assert price_difference([20.0, 30.0], [20.0, 30.0]) == 0.0
    assert price_difference([21.0, 29.0], [20.0, 30.0]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        price_difference([1.0, 2.0], [1.0, 2.0, 3.0])


def test_d_toy_lmp_prices(instance_dir):
    inst = load_instance(str(instance_dir / "d_toy.yaml"))
    rep = compute_lmp(inst)
    assert np.allclose(rep.gamma.values, 20.0, atol=1e-7)
    assert rep.uplift == pytest.approx(20.0, abs=1e-6)


def test_d_toy_ordering(instance_dir):
    inst = load_instance(str(instance_dir / "d_toy.yaml"))
    ctx = PricingContext(inst)
    lmp = compute_lmp(inst, context=ctx)
    tlp = run_tlp(inst, context=ctx)
    opt = run_opt(inst, context=ctx)
    assert lmp.uplift >= tlp.uplift - 1e-9
    assert tlp.uplift == pytest.approx(opt.uplift, abs=1e-7)  # no class-G4 units


def test_congested_bus_prices_differ():
    inst = parse_instance(CONGESTION_DOC)
    rep = compute_lmp(inst)
    bus = rep.gamma.bus
    assert bus is not None
    assert bus[0, 0] == pytest.approx(bus[0, 1], abs=1e-6)   # uncongested hour
    assert bus[1, 0] == pytest.approx(20.0, abs=1e-6)
    assert bus[1, 1] == pytest.approx(30.0, abs=1e-6)


def test_ia_without_g4_is_tlp():
    inst = random_instance(21, n_gens=5, horizon=5, mix=(0.7, 0.15, 0.15, 0.0))
    ctx = PricingContext(inst)
    assert not ctx.g4_ids
    tlp = run_tlp(inst, context=ctx)
    ia = run_ia(inst, "ia1", context=ctx)
    assert len(ia.objective_trace) == 1  # single relaxation solve, no upgrades
    assert ia.uplift == pytest.approx(tlp.uplift, abs=1e-6 * (1 + abs(tlp.uplift)))
    assert ia.gamma_set == ()


@pytest.mark.parametrize("seed", [11, 37])
def test_pricing_pipeline_randomized(seed):
    inst = random_instance(seed, n_gens=8, horizon=6)
    ctx = PricingContext(inst)
    lmp = compute_lmp(inst, context=ctx)
    tlp = run_tlp(inst, context=ctx)
    ia1 = run_ia(inst, "ia1", context=ctx)
    ia2 = run_ia(inst, "ia2", context=ctx)
    opt = run_opt(inst, context=ctx)
    slack = 1e-6 * (1 + abs(lmp.uplift))
    assert lmp.uplift >= tlp.uplift - slack
    assert tlp.uplift >= ia1.uplift - slack
    assert ia1.uplift >= opt.uplift - slack
    assert ia2.uplift >= opt.uplift - slack
    for rep in (ia1, ia2):
        assert rep.status == "ok"
        assert rep.fractional_final == ()
        trace = rep.uplift_trace
        assert all(
            trace[i + 1] <= trace[i] + 1e-6 * (1 + abs(trace[0]))
            for i in range(len(trace) - 1)
        )
    # sandwich on objectives: relaxations never exceed the incumbent
    assert tlp.relaxation_objective <= ia1.relaxation_objective + slack
    assert ia1.relaxation_objective <= opt.relaxation_objective + slack
    assert opt.relaxation_objective <= opt.z_qip + slack
    assert opt.status == "ok"


def test_complementary_reaches_opt_when_ia_misses():
    # an instance where the iterative run terminates with an integral but
    # loose generator; the complementary probes find and add it
    inst = random_instance(11, n_gens=8, horizon=6)
    ctx = PricingContext(inst)
    ia1 = run_ia(inst, "ia1", context=ctx)
    opt = run_opt(inst, context=ctx)
    iac = run_complementary(inst, ia1, context=ctx)
    tol = 1e-5 * (1 + abs(opt.uplift))
    assert iac.uplift <= ia1.uplift + tol
    assert iac.uplift == pytest.approx(opt.uplift, abs=tol)
    trace = iac.uplift_trace
    assert all(
        trace[i + 1] <= trace[i] + 1e-6 * (1 + abs(trace[0]))
        for i in range(len(trace) - 1)
    )


def test_complementary_already_optimal_accepts_nothing():
    inst = random_instance(37, n_gens=8, horizon=6)
    ctx = PricingContext(inst)
    ia1 = run_ia(inst, "ia1", context=ctx)
    opt = run_opt(inst, context=ctx)
    tol = 1e-5 * (1 + abs(opt.uplift))
    if abs(ia1.uplift - opt.uplift) <= tol:
        iac = run_complementary(inst, ia1, context=ctx)
        assert iac.accepted_upgrades == ()
        assert iac.uplift == pytest.approx(ia1.uplift, abs=tol)


def test_complementary_n_stop():
    inst = random_instance(11, n_gens=8, horizon=6)
    options = PricingOptions(iac_n_stop=0)
    ctx = PricingContext(inst, options)
    ia1 = run_ia(inst, "ia1", context=ctx)
    iac = run_complementary(inst, ia1, context=ctx)
    assert len(iac.accepted_upgrades) == 0


def test_lemma1_identity_at_termination():
    for seed in (11, 37):
        inst = random_instance(seed, n_gens=8, horizon=6)
        ctx = PricingContext(inst)
        rep = run_ia(inst, "ia1", context=ctx)
        gap = lemma1_gap(inst, rep)
        assert gap <= 1e-5 * (1 + abs(rep.z_c)), f"seed {seed}: gap {gap}"


def test_lagrangian_value_flags_match_run(instance_dir):
    inst = load_instance(str(instance_dir / "d_toy.yaml"))
    res = lagrangian_value(inst, set(), [20.0, 20.0, 20.0, 20.0])
    assert res.flags == ()
    # at the marginal price the unit is indifferent; the self-schedule value
    # cannot be positive
    assert res.z_c <= 20.0 * (50 + 60 + 70 + 55) + 1e-6
