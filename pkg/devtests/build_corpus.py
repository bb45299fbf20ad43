"""Generate corpus candidates and validate the acceptance properties on each."""
import sys
import time

sys.path.insert(0, "src")

import numpy as np

from chpricing.generate import random_instance
from chpricing.instance import serialize_instance
from chpricing.oracle import dp_self_schedule
from chpricing.pricing import (PricingContext, PricingOptions, compute_lmp,
                               run_complementary, run_ia, run_opt, run_tlp)

SPECS = [
    # (seed, gens, horizon, mix, buses, lines, name)
    (101, 6, 5, None, 1, 0, "c01"),
    (102, 7, 5, None, 1, 0, "c02"),
    (103, 8, 6, None, 1, 0, "c03"),
    (104, 8, 6, None, 1, 0, "c04"),
    (105, 9, 6, None, 1, 0, "c05"),
    (106, 10, 6, None, 1, 0, "c06"),
    (107, 10, 6, None, 1, 0, "c07"),
    (108, 6, 6, (0.3, 0.05, 0.15, 0.5), 1, 0, "c08"),
    (109, 8, 6, (0.3, 0.05, 0.15, 0.5), 1, 0, "c09"),
    (110, 12, 6, None, 1, 0, "c10"),
    (111, 13, 6, None, 1, 0, "c11"),
    (112, 14, 6, None, 1, 0, "c12"),
    (113, 15, 5, None, 1, 0, "c13"),
    (114, 8, 8, None, 1, 0, "c14"),
    (115, 10, 8, None, 1, 0, "c15"),
    (116, 12, 8, None, 1, 0, "c16"),
    (117, 8, 6, None, 3, 2, "c17"),
    (118, 10, 6, None, 3, 2, "c18"),
    (119, 9, 7, (0.4, 0.05, 0.1, 0.45), 1, 0, "c19"),
    (120, 11, 7, None, 1, 0, "c20"),
]


def lemma1_gap(inst, rep):
    total = 0.0
    for g in inst.generators:
        if rep.gamma.bus is not None:
            pi = rep.gamma.bus[:, inst.bus_index(g.bus)]
        else:
            pi = rep.gamma.values
        _, tables = dp_self_schedule(g, pi)
        total += tables.phi
    return abs(total - (rep.z_c - rep.gamma_dot_p))


def validate(inst):
    t0 = time.time()
    issues = []
    ctx = PricingContext(inst, PricingOptions())
    lmp = compute_lmp(inst, context=ctx)
    tlp = run_tlp(inst, context=ctx)
    ia1 = run_ia(inst, "ia1", context=ctx)
    ia2 = run_ia(inst, "ia2", context=ctx)
    opt = run_opt(inst, context=ctx)
    slack = 1e-6 * (1 + abs(lmp.uplift))
    if not (lmp.uplift >= tlp.uplift - slack):
        issues.append(f"order lmp {lmp.uplift:.3f} < tlp {tlp.uplift:.3f}")
    for rep in (ia1, ia2):
        if not (tlp.uplift >= rep.uplift - slack):
            issues.append(f"order tlp < {rep.algorithm}")
        if not (rep.uplift >= opt.uplift - 1e-6 * (1 + abs(opt.uplift))):
            issues.append(f"order {rep.algorithm} {rep.uplift:.4f} < opt {opt.uplift:.4f}")
        tr = rep.uplift_trace
        if not all(tr[i + 1] <= tr[i] + 1e-6 * (1 + abs(tr[0])) for i in range(len(tr) - 1)):
            issues.append(f"{rep.algorithm} trace not monotone {tr}")
        if rep.status != "ok" or rep.fractional_final:
            issues.append(f"{rep.algorithm} dirty termination")
        gap = lemma1_gap(inst, rep)
        if gap > 1e-5 * (1 + abs(rep.z_c)):
            issues.append(f"{rep.algorithm} lemma1 gap {gap:.2e}")
    if opt.status != "ok":
        issues.append("opt flags nonzero")
    tol5 = 1e-5 * (1 + abs(opt.uplift))
    exact = min(ia1.uplift, ia2.uplift) <= opt.uplift + tol5
    via_iac = None
    if not exact:
        iac1 = run_complementary(inst, ia1, context=ctx)
        gap1 = lemma1_gap(inst, iac1)
        if gap1 > 1e-5 * (1 + abs(iac1.z_c)):
            issues.append(f"iac1 lemma1 gap {gap1:.2e}")
        exact = iac1.uplift <= opt.uplift + tol5
        via_iac = iac1.uplift
        if not exact:
            iac2 = run_complementary(inst, ia2, context=ctx)
            exact = iac2.uplift <= opt.uplift + tol5
            via_iac = min(via_iac, iac2.uplift)
    if not exact:
        issues.append(
            f"exactness: ia {min(ia1.uplift, ia2.uplift):.4f} iac {via_iac} "
            f"opt {opt.uplift:.4f}"
        )
    n_g4 = len(ctx.g4_ids)
    note = (f"U: lmp {lmp.uplift:9.2f} tlp {tlp.uplift:8.2f} ia1 {ia1.uplift:8.2f} "
            f"ia2 {ia2.uplift:8.2f} opt {opt.uplift:8.2f} G4={n_g4} "
            f"Gam={len(ia1.gamma_set)} {time.time()-t0:5.1f}s")
    return issues, note


def main():
    out = []
    for seed, gens, horizon, mix, buses, lines, name in SPECS:
        inst = random_instance(seed, n_gens=gens, horizon=horizon,
                               mix=mix or (0.50, 0.01, 0.08, 0.41),
                               name=name, n_buses=buses, n_lines=lines)
        issues, note = validate(inst)
        status = "OK " if not issues else "BAD"
        print(f"{status} {name} |G|={gens} T={horizon} {note}")
        for issue in issues:
            print(f"      - {issue}")
        if not issues:
            out.append((name, inst))
    print(f"\n{len(out)}/{len(SPECS)} candidates clean")
    if "--write" in sys.argv:
        for name, inst in out:
            path = f"instances/{name}.yaml"
            with open(path, "w") as fh:
                fh.write(serialize_instance(inst))
            print("wrote", path)


if __name__ == "__main__":
    main()
