"""Shared fixtures and reference-solver helpers for the test suite."""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import linprog, milp
from scipy.optimize import Bounds, LinearConstraint

from chpricing.algebra import BINARY, LinearModel
from chpricing.simplexcore import SolverOptions

INSTANCE_DIR = Path(__file__).resolve().parent.parent / "instances"

TIGHT = SolverOptions(mip_gap=1e-9)


@pytest.fixture(scope="session")
def instance_dir() -> Path:
    return INSTANCE_DIR


def reference_lp(model: LinearModel):
    """Solve a LinearModel with scipy's HiGHS; returns (status, objective).

    status is one of "optimal", "infeasible", "unbounded".
    """
    comp = model.compile()
    a_ub, b_ub, a_eq, b_eq = [], [], [], []
    for i in range(model.num_constraints):
        row = comp.a_csr.getrow(i).toarray().ravel()
        sense = comp.senses[i]
        if sense == "<=":
            a_ub.append(row)
            b_ub.append(comp.rhs[i])
        elif sense == ">=":
            a_ub.append(-row)
            b_ub.append(-comp.rhs[i])
        else:
            a_eq.append(row)
            b_eq.append(comp.rhs[i])
    res = linprog(
        comp.cost,
        A_ub=np.array(a_ub) if a_ub else None, b_ub=b_ub or None,
        A_eq=np.array(a_eq) if a_eq else None, b_eq=b_eq or None,
        bounds=list(zip(comp.lower, comp.upper)),
        method="highs",
    )
    if res.status == 2:
        return "infeasible", math.inf
    if res.status == 3:
        return "unbounded", -math.inf
    return "optimal", res.fun + comp.constant


def reference_mip(model: LinearModel):
    """Solve a LinearModel as a MIP with scipy's HiGHS branch and bound."""
    comp = model.compile()
    n = model.num_variables
    integrality = np.zeros(n)
    for j in range(n):
        if model.kind(j) == BINARY:
            integrality[j] = 1
    constraints = []
    for i in range(model.num_constraints):
        row = comp.a_csr.getrow(i).toarray().ravel()
        sense = comp.senses[i]
        if sense == "<=":
            constraints.append(LinearConstraint(row, -np.inf, comp.rhs[i]))
        elif sense == ">=":
            constraints.append(LinearConstraint(row, comp.rhs[i], np.inf))
        else:
            constraints.append(LinearConstraint(row, comp.rhs[i], comp.rhs[i]))
    res = milp(
        comp.cost,
        constraints=constraints,
        integrality=integrality,
        bounds=Bounds(comp.lower, comp.upper),
        options={"mip_rel_gap": 1e-9},
    )
    if res.status == 2:
        return "infeasible", math.inf
    return "optimal", res.fun + comp.constant


def priced_objective(handle, price):
    """Set a handle's model objective to cost minus energy revenue."""
    terms = list(handle.obj_terms)
    for t in range(handle.gen.horizon):
        for var, coeff in handle.x_terms[t]:
            terms.append((var, -float(price[t]) * coeff))
    handle.model.set_objective(terms, handle.obj_constant)
    return handle.model
