"""Model builder, LP text export/import, and bound-fixing tests."""
import math

import numpy as np
import pytest

from chpricing.algebra import (LinearModel, ModelError, export_lp_text,
                               fix_variables, parse_lp_text)
from chpricing.simplexcore import solve_lp

from conftest import reference_lp


def test_empty_model():
    m = LinearModel("empty")
    assert m.num_variables == 0
    assert m.num_constraints == 0


def test_one_dim_lp():
    m = LinearModel()
    x = m.add_variable("x", 0, 10)
    m.add_constraint([(x, 1.0)], ">=", 3.0, "floor")
    m.set_objective([(x, 1.0)])
    res = solve_lp(m)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(3.0)


def test_duplicate_tag_rejected():
    m = LinearModel()
    x = m.add_variable("x", 0, 1)
    m.add_constraint([(x, 1.0)], "<=", 1.0, "cap")
    with pytest.raises(ModelError):
        m.add_constraint([(x, 1.0)], ">=", 0.0, "cap")


def test_unknown_variable_rejected():
    m = LinearModel()
    m.add_variable("x", 0, 1)
    with pytest.raises(ModelError):
        m.add_constraint([(99, 1.0)], "<=", 1.0, "bad")


def test_nonfinite_coefficient_rejected():
    m = LinearModel()
    x = m.add_variable("x", 0, 1)
    with pytest.raises(ModelError):
        m.add_constraint([(x, math.inf)], "<=", 1.0, "bad")
    with pytest.raises(ModelError):
        m.add_constraint([(x, 1.0)], "<=", math.nan, "bad2")


def _sample_model():
    m = LinearModel("sample")
    x = m.add_variable("x", 0, 10)
    y = m.add_variable("y", -math.inf, math.inf)
    b = m.add_variable("b", 0, 1, "binary")
    m.add_constraint([(x, 2.0), (y, -1.0)], "<=", 4.0, "r1")
    m.add_constraint([(x, 1.0), (y, 1.0), (b, 5.0)], "=", 6.0, "r2")
    m.add_constraint([(y, 1.0)], ">=", -3.0, "r3")
    m.set_objective([(x, 1.5), (y, 1.0)], constant=2.0)
    return m


def test_export_sections_and_determinism():
    m = _sample_model()
    text = export_lp_text(m)
    assert "Minimize" in text
    assert "Subject To" in text
    assert "Bounds" in text
    assert "Binaries" in text
    assert " = 6" in text  # equality sense rendered
    assert export_lp_text(m) == text  # byte-identical re-export


def test_export_parse_roundtrip_matches_reference():
    m = _sample_model()
    parsed = parse_lp_text(export_lp_text(m))
    st1, obj1 = reference_lp(m)
    st2, obj2 = reference_lp(parsed)
    assert st1 == st2 == "optimal"
    assert obj1 == pytest.approx(obj2, abs=1e-9)
    mine = solve_lp(parsed)
    assert mine.objective == pytest.approx(obj1, abs=1e-6)


def test_fix_variables():
    m = LinearModel()
    b = m.add_variable("b", 0, 1, "binary")
    x = m.add_variable("x", 0, 10)
    fixed = fix_variables(m, [(b, 1.0), (x, 5.0)])
    assert fixed.bounds(b.index) == (1.0, 1.0)
    assert fixed.bounds(x.index) == (5.0, 5.0)
    assert m.bounds(x.index) == (0.0, 10.0)  # original untouched
    with pytest.raises(ModelError):
        fix_variables(m, [(x, 11.0)])


def test_construction_order_does_not_change_objective():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(4, 5))
    b = rng.normal(size=4) * 2
    c = rng.normal(size=5)
    objs = []
    for order in (range(4), reversed(range(4))):
        m = LinearModel()
        xs = [m.add_variable(f"x{j}", 0, 5) for j in range(5)]
        for i in order:
            m.add_constraint([(xs[j], A[i, j]) for j in range(5)], "<=", b[i], f"c{i}")
        m.set_objective([(xs[j], c[j]) for j in range(5)])
        objs.append(solve_lp(m).objective)
    assert objs[0] == pytest.approx(objs[1], abs=1e-9)
