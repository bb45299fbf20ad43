"""Command-line front end: price instances, generate synthetic cases, and run
the oracle cross-check suites.

Exit codes: 0 success, 1 usage error, 2 instance/data error, 3 solve failure,
4 verification failure. Machine-readable reports are deterministic for a
fixed configuration and seed; wall-clock timings go to a separate file.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .algebra import export_lp_text
from .generate import random_generator, random_instance
from .hulls import build_hull_D1, build_hull_D2, build_hull_D3, build_hull_D4
from .instance import InstanceError, load_instance, serialize_instance
from .oracle import dp_self_schedule, enumerate_best_schedule
from .pricing import (PricingContext, PricingOptions, PricingRunReport,
                      compute_lmp, price_difference, run_complementary, run_ia,
                      run_opt, run_tlp)
from .simplexcore import OPTIMAL, SolverError, SolverOptions, solve_lp

_ALGOS = ("lmp", "tlp", "ia1", "ia2", "iac1", "iac2", "opt")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def _env_float(name: str, default: float) -> float:
    raw = os.environ.get(name)
    return float(raw) if raw else default


def _solver_options(args) -> SolverOptions:
    return SolverOptions(
        feasibility_tol=_env_float("CHPRICING_FEAS_TOL", args.feas_tol),
        optimality_tol=_env_float("CHPRICING_OPT_TOL", args.opt_tol),
        mip_gap=_env_float("CHPRICING_MIP_GAP", args.mip_gap),
        time_limit=args.time_limit,
        branching=args.branching,
    )


def _pricing_options(args) -> PricingOptions:
    return PricingOptions(
        solver=_solver_options(args),
        frac_tol=_env_float("CHPRICING_FRAC_TOL", args.frac_tol),
        iac_groups=args.iac_groups,
        iac_n_stop=args.iac_n_stop,
        iac_time_limit=args.iac_time_limit,
    )


def report_to_dict(rep: PricingRunReport, instance_name: str) -> dict:
    d = {
        "algorithm": rep.algorithm,
        "instance": instance_name,
        "status": rep.status,
        "z_qip": rep.z_qip,
        "z_qip_bound": rep.z_qip_bound,
        "relaxation_objective": rep.relaxation_objective,
        "z_c": rep.z_c,
        "uplift": rep.uplift,
        "gamma": [round(v, 9) for v in rep.gamma.values],
        "gamma_set": list(rep.gamma_set),
        "gamma_trace": [list(s) for s in rep.gamma_trace],
        "objective_trace": [round(v, 9) for v in rep.objective_trace],
        "uplift_trace": [round(v, 9) for v in rep.uplift_trace],
        "fractional_final": list(rep.fractional_final),
        "accepted_upgrades": list(rep.accepted_upgrades),
        "gamma_dot_p": round(rep.gamma_dot_p, 9),
    }
    if rep.gamma.bus is not None:
        d["bus_prices"] = [[round(v, 9) for v in row] for row in rep.gamma.bus]
    if rep.price_diff_vs_lmp is not None:
        d["price_diff_vs_lmp"] = round(rep.price_diff_vs_lmp, 9)
    return d


def _fmt_money(v: float) -> str:
    return f"{v:,.2f}"


def render_table(case: str, reports: dict[str, PricingRunReport]) -> str:
    """Comparison table, one row per algorithm, after the published layout."""
    lines = [
        f"Case {case}",
        f"{'Model':<6} {'Solution ($)':>16} {'Uplift ($)':>14} {'Time (s)':>9} "
        f"{'Save ($)':>12} {'Optimal':>8} {'Diff ($/MWh)':>13}",
    ]
    opt_rep = reports.get("opt")
    lmp_rep = reports.get("lmp")
    tlp_rep = reports.get("tlp")
    any_rep = next(iter(reports.values()))
    lines.append(
        f"{'MIP':<6} {_fmt_money(any_rep.z_qip):>16} {'-':>14} {'-':>9} "
        f"{'-':>12} {'-':>8} {'-':>13}"
    )
    for name in ("lmp", "tlp", "ia1", "ia2", "iac1", "iac2", "opt"):
        rep = reports.get(name)
        if rep is None:
            continue
        solution = "-" if name == "lmp" else _fmt_money(rep.relaxation_objective)
        save = "-"
        if lmp_rep is not None and name == "tlp":
            save = _fmt_money(lmp_rep.uplift - rep.uplift)
        elif tlp_rep is not None and name not in ("lmp", "tlp"):
            save = "+" + _fmt_money(tlp_rep.uplift - rep.uplift)
        optimal = "-"
        if name == "opt":
            optimal = "*"
        elif opt_rep is not None:
            tol = 1e-5 * (1 + abs(opt_rep.uplift))
            optimal = "Y" if rep.uplift <= opt_rep.uplift + tol else "N"
        diff = "-"
        if lmp_rep is not None and name != "lmp" and rep.price_diff_vs_lmp is not None:
            diff = f"{rep.price_diff_vs_lmp:.4f}"
        marker = ""
        if name.startswith("iac"):
            marker = f" (+{len(rep.accepted_upgrades)})"
        lines.append(
            f"{name.upper():<6} {solution:>16} {_fmt_money(rep.uplift):>14} "
            f"{rep.wall_seconds:>9.2f} {save:>12} {optimal:>8} {diff:>13}{marker}"
        )
    return "\n".join(lines) + "\n"


def cmd_solve(args) -> int:
    try:
        inst = load_instance(args.instance)
    except (OSError, InstanceError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    options = _pricing_options(args)
    wanted = list(_ALGOS) if args.algorithm == "all" else [args.algorithm]
    ctx = PricingContext(inst, options)
    reports: dict[str, PricingRunReport] = {}
    try:
        if "lmp" in wanted or args.algorithm == "all":
            reports["lmp"] = compute_lmp(inst, context=ctx)
        for name in wanted:
            if name == "lmp":
                continue
            if name == "tlp":
                reports[name] = run_tlp(inst, context=ctx)
            elif name in ("ia1", "ia2"):
                reports[name] = run_ia(inst, name, context=ctx)
            elif name in ("iac1", "iac2"):
                base = run_ia(inst, "ia1" if name == "iac1" else "ia2", context=ctx)
                reports[name] = run_complementary(inst, base, context=ctx)
            elif name == "opt":
                reports[name] = run_opt(inst, context=ctx)
    except SolverError as exc:
        print(f"solve failure: {exc}", file=sys.stderr)
        return 3
    lmp_rep = reports.get("lmp")
    if lmp_rep is not None:
        for name, rep in reports.items():
            if name != "lmp":
                rep.price_diff_vs_lmp = price_difference(rep.gamma, lmp_rep.gamma)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    timings = []
    for name, rep in reports.items():
        payload = report_to_dict(rep, inst.name)
        path = out_dir / f"report_{name}.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        timings.append(f"{name}: {rep.wall_seconds:.3f}s")
    (out_dir / "timings.txt").write_text("\n".join(timings) + "\n")
    table = render_table(inst.name, reports)
    (out_dir / "table.txt").write_text(table)
    print(table, end="")
    if args.dump_lp:
        for name, rep in reports.items():
            if name in ("lmp",):
                continue
            sm = ctx.build_p1(set(rep.gamma_set), name=f"{name}-final")
            (out_dir / f"model_{name}.lp").write_text(export_lp_text(sm.model))
    return 0


def cmd_gen(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    mix = tuple(float(x) for x in args.mix.split(",")) if args.mix else None
    for i in range(args.count):
        seed = args.seed + i
        inst = random_instance(
            seed, n_gens=args.gens, horizon=args.horizon,
            mix=mix or (0.50, 0.01, 0.08, 0.41),
            name=f"gen{seed}", n_buses=args.buses, n_lines=args.lines,
        )
        path = out_dir / f"{inst.name}.yaml"
        path.write_text(serialize_instance(inst))
        print(path)
    return 0


def cmd_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    options = _pricing_options(args)
    failures: list[str] = []

    def check(label: str, ok: bool, detail: str = ""):
        mark = "pass" if ok else "FAIL"
        print(f"[{mark}] {label}" + (f"  {detail}" if detail and not ok else ""))
        if not ok:
            failures.append(label)

    builders = {"G1": build_hull_D1, "G2": build_hull_D2, "G3": build_hull_D3}
    for trial in range(args.trials):
        cls = ("G1", "G2", "G3", "G4")[trial % 4]
        T = int(rng.integers(3, min(args.horizon, 6) + 1))
        g = random_generator(rng, cls, T, gen_id=f"v{trial}")
        price = np.round(rng.uniform(0, 80, T), 2)
        enum = enumerate_best_schedule(g, price)
        _, tables = dp_self_schedule(g, price)
        tol = 1e-6 * (1 + abs(enum.net_cost))
        if abs(enum.net_cost - tables.phi) > tol:
            failures.append(f"dp-vs-enum trial {trial}")
            continue
        handle = build_hull_D4(g)
        terms = list(handle.obj_terms)
        for t in range(T):
            for var, coeff in handle.x_terms[t]:
                terms.append((var, -price[t] * coeff))
        handle.model.set_objective(terms, handle.obj_constant)
        res = solve_lp(handle.model, options.solver)
        if res.status != OPTIMAL or abs(res.objective - tables.phi) > tol:
            failures.append(f"d4-duality trial {trial}")
            continue
        if handle.max_integrality_gap(res.primal) > 1e-5:
            failures.append(f"d4-integrality trial {trial}")
            continue
        if cls in builders:
            hh = builders[cls](g)
            terms = list(hh.obj_terms)
            for t in range(T):
                for var, coeff in hh.x_terms[t]:
                    terms.append((var, -price[t] * coeff))
            hh.model.set_objective(terms, hh.obj_constant)
            rh = solve_lp(hh.model, options.solver)
            if rh.status != OPTIMAL or abs(rh.objective - enum.net_cost) > tol:
                failures.append(f"hull-exactness trial {trial}")
            elif hh.max_integrality_gap(rh.primal) > 1e-5:
                failures.append(f"hull-integrality trial {trial}")
    check(f"single-generator suites ({args.trials} trials)", not failures,
          ", ".join(failures[:5]))

    for path in args.instances or []:
        try:
            inst = load_instance(path)
        except (OSError, InstanceError) as exc:
            print(f"data error: {exc}", file=sys.stderr)
            return 2
        ctx = PricingContext(inst, options)
        for variant in ("ia1", "ia2"):
            rep = run_ia(inst, variant, context=ctx)
            trace = rep.uplift_trace
            mono = all(
                trace[i + 1] <= trace[i] + 1e-6 * (1 + abs(trace[0]))
                for i in range(len(trace) - 1)
            )
            check(f"{inst.name}:{variant} uplift monotone", mono, str(trace))
            check(f"{inst.name}:{variant} terminated clean",
                  rep.status == "ok" and not rep.fractional_final)
    return 4 if failures else 0


def main(argv=None) -> int:
    parser = _Parser(prog="chpricing",
                     description="Convex hull pricing for multi-period unit commitment")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--feas-tol", type=float, default=1e-7)
        p.add_argument("--opt-tol", type=float, default=1e-7)
        p.add_argument("--mip-gap", type=float, default=1e-3)
        p.add_argument("--frac-tol", type=float, default=1e-5)
        p.add_argument("--time-limit", type=float, default=None)
        p.add_argument("--branching", choices=("most_fractional", "pseudo_cost"),
                       default="most_fractional")
        p.add_argument("--iac-groups", type=int, default=None,
                       help="number of complementary worker groups (default: candidates)")
        p.add_argument("--iac-n-stop", type=int, default=None)
        p.add_argument("--iac-time-limit", type=float, default=None)

    ps = sub.add_parser("solve", help="price an instance")
    ps.add_argument("--instance", required=True)
    ps.add_argument("--algorithm", choices=_ALGOS + ("all",), default="all")
    ps.add_argument("--out", default="out")
    ps.add_argument("--dump-lp", action="store_true")
    add_common(ps)
    ps.set_defaults(fn=cmd_solve)

    pg = sub.add_parser("gen", help="generate synthetic instances")
    pg.add_argument("--gens", type=int, default=8)
    pg.add_argument("--horizon", type=int, default=6)
    pg.add_argument("--seed", type=int, default=1)
    pg.add_argument("--count", type=int, default=1)
    pg.add_argument("--mix", default=None,
                    help="class weights as four comma-separated numbers")
    pg.add_argument("--buses", type=int, default=1)
    pg.add_argument("--lines", type=int, default=0)
    pg.add_argument("--out", default="instances")
    pg.set_defaults(fn=cmd_gen)

    pv = sub.add_parser("verify", help="run the oracle cross-check suites")
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--trials", type=int, default=40)
    pv.add_argument("--horizon", type=int, default=6)
    pv.add_argument("instances", nargs="*",
                    help="optional instance files for the pricing suites")
    add_common(pv)
    pv.set_defaults(fn=cmd_verify)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except InstanceError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solve failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
