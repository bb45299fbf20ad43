"""Sparse algebraic LP/MIP models shared by formulation builders and the solver.

Models are append-only: variables and constraints are added once and never
mutated (the objective may be reset, which is how pricing re-targets the same
generator model at a new price vector). ``fix_variables`` returns a copy with
pinned bounds. Finished models are immutable in practice and safe to share
across threads as long as each thread solves its own copy or the same compiled
snapshot.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

CONTINUOUS = "continuous"
BINARY = "binary"

LE, EQ, GE = "<=", "=", ">="
_SENSES = (LE, EQ, GE)


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class VarRef:
    """Handle for one model variable (a snapshot of its creation-time bounds)."""

    index: int
    name: str
    lower: float
    upper: float
    kind: str


@dataclass
class _Row:
    indices: np.ndarray
    values: np.ndarray
    sense: str
    rhs: float
    tag: str


@dataclass(frozen=True)
class CompiledModel:
    """Solver-ready snapshot: CSR matrix plus bound/cost arrays."""

    a_csr: sp.csr_matrix
    senses: tuple[str, ...]
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    cost: np.ndarray
    constant: float
    kinds: tuple[str, ...]


class LinearModel:
    """Sparse LP/MIP builder: variables with bounds, rows with senses, min objective."""

    def __init__(self, name: str = "model"):
        self.name = name
        self._names: list[str] = []
        self._name_set: set[str] = set()
        self._lower: list[float] = []
        self._upper: list[float] = []
        self._kinds: list[str] = []
        self._rows: list[_Row] = []
        self._tag_index: dict[str, int] = {}
        self._obj: dict[int, float] = {}
        self.objective_constant: float = 0.0
        self._compiled: CompiledModel | None = None

    # -- introspection ---------------------------------------------------------

    @property
    def num_variables(self) -> int:
        return len(self._names)

    @property
    def num_constraints(self) -> int:
        return len(self._rows)

    def variable_names(self) -> list[str]:
        return list(self._names)

    def bounds(self, index: int) -> tuple[float, float]:
        return self._lower[index], self._upper[index]

    def kind(self, index: int) -> str:
        return self._kinds[index]

    def binary_indices(self) -> np.ndarray:
        return np.array([i for i, k in enumerate(self._kinds) if k == BINARY], dtype=int)

    def row_index(self, tag: str) -> int:
        return self._tag_index[tag]

    def row(self, index: int) -> _Row:
        return self._rows[index]

    def row_tags(self) -> list[str]:
        return [r.tag for r in self._rows]

    def has_row(self, tag: str) -> bool:
        return tag in self._tag_index

    # -- construction ------------------------------------------------------------

    def add_variable(self, name: str, lower: float = 0.0, upper: float = math.inf,
                     kind: str = CONTINUOUS) -> VarRef:
        if kind not in (CONTINUOUS, BINARY):
            raise ModelError(f"unknown variable kind {kind!r}")
        if not lower <= upper:
            raise ModelError(f"variable {name!r}: lower {lower} > upper {upper}")
        if kind == BINARY and (lower < 0 or upper > 1):
            raise ModelError(f"binary variable {name!r} bounds must lie within [0, 1]")
        if name in self._name_set:
            raise ModelError(f"duplicate variable name {name!r}")
        idx = len(self._names)
        self._names.append(name)
        self._name_set.add(name)
        self._lower.append(float(lower))
        self._upper.append(float(upper))
        self._kinds.append(kind)
        self._compiled = None
        return VarRef(idx, name, float(lower), float(upper), kind)

    def _var_index(self, var) -> int:
        idx = var.index if isinstance(var, VarRef) else int(var)
        if not 0 <= idx < len(self._names):
            raise ModelError(f"unknown variable reference {var!r}")
        return idx

    def add_constraint(self, coeffs, sense: str, rhs: float, tag: str) -> int:
        if sense not in _SENSES:
            raise ModelError(f"unknown sense {sense!r}")
        if tag in self._tag_index:
            raise ModelError(f"duplicate constraint tag {tag!r}")
        if not math.isfinite(rhs):
            raise ModelError(f"constraint {tag!r}: rhs must be finite")
        acc: dict[int, float] = {}
        for var, value in coeffs:
            v = float(value)
            if not math.isfinite(v):
                raise ModelError(f"constraint {tag!r}: non-finite coefficient")
            if v == 0.0:
                continue
            idx = self._var_index(var)
            acc[idx] = acc.get(idx, 0.0) + v
        idx_arr = np.fromiter(acc.keys(), dtype=np.int64, count=len(acc))
        val_arr = np.fromiter(acc.values(), dtype=np.float64, count=len(acc))
        order = np.argsort(idx_arr, kind="stable")
        row = _Row(idx_arr[order], val_arr[order], sense, float(rhs), tag)
        self._tag_index[tag] = len(self._rows)
        self._rows.append(row)
        self._compiled = None
        return len(self._rows) - 1

    def set_objective(self, coeffs, constant: float = 0.0) -> None:
        acc: dict[int, float] = {}
        for var, value in coeffs:
            v = float(value)
            if not math.isfinite(v):
                raise ModelError("objective: non-finite coefficient")
            if v == 0.0:
                continue
            idx = self._var_index(var)
            acc[idx] = acc.get(idx, 0.0) + v
        self._obj = acc
        self.objective_constant = float(constant)
        self._compiled = None

    def add_objective_terms(self, coeffs) -> None:
        for var, value in coeffs:
            idx = self._var_index(var)
            v = self._obj.get(idx, 0.0) + float(value)
            if v == 0.0:
                self._obj.pop(idx, None)
            else:
                self._obj[idx] = v
        self._compiled = None

    def objective_coeffs(self) -> dict[int, float]:
        return dict(self._obj)

    # -- derived models ----------------------------------------------------------

    def copy(self, name: str | None = None) -> "LinearModel":
        m = LinearModel(name or self.name)
        m._names = list(self._names)
        m._name_set = set(self._name_set)
        m._lower = list(self._lower)
        m._upper = list(self._upper)
        m._kinds = list(self._kinds)
        m._rows = list(self._rows)  # rows are never mutated in place
        m._tag_index = dict(self._tag_index)
        m._obj = dict(self._obj)
        m.objective_constant = self.objective_constant
        return m

    def fix_variables(self, assignments) -> "LinearModel":
        """Copy of the model with the given variables pinned to fixed values."""
        m = self.copy(self.name + "+fixed")
        for var, value in assignments:
            idx = self._var_index(var)
            v = float(value)
            lo, hi = self._lower[idx], self._upper[idx]
            if v < lo - 1e-9 or v > hi + 1e-9:
                raise ModelError(
                    f"cannot fix {self._names[idx]!r} to {v}: outside bounds [{lo}, {hi}]"
                )
            m._lower[idx] = v
            m._upper[idx] = v
        return m

    # -- compile -------------------------------------------------------------------

    def compile(self) -> CompiledModel:
        if self._compiled is not None:
            return self._compiled
        n = len(self._names)
        m = len(self._rows)
        nnz = sum(len(r.indices) for r in self._rows)
        data = np.empty(nnz, dtype=np.float64)
        cols = np.empty(nnz, dtype=np.int64)
        indptr = np.zeros(m + 1, dtype=np.int64)
        pos = 0
        for i, r in enumerate(self._rows):
            k = len(r.indices)
            data[pos:pos + k] = r.values
            cols[pos:pos + k] = r.indices
            pos += k
            indptr[i + 1] = pos
        a_csr = sp.csr_matrix((data, cols, indptr), shape=(m, n))
        cost = np.zeros(n, dtype=np.float64)
        for idx, v in self._obj.items():
            cost[idx] = v
        compiled = CompiledModel(
            a_csr=a_csr,
            senses=tuple(r.sense for r in self._rows),
            rhs=np.array([r.rhs for r in self._rows], dtype=np.float64),
            lower=np.array(self._lower, dtype=np.float64),
            upper=np.array(self._upper, dtype=np.float64),
            cost=cost,
            constant=self.objective_constant,
            kinds=tuple(self._kinds),
        )
        self._compiled = compiled
        return compiled


# ---------------------------------------------------------------------------
# module-level functional aliases
# ---------------------------------------------------------------------------


def new_model(name: str = "model") -> LinearModel:
    return LinearModel(name)


def add_variable(model: LinearModel, name: str, bounds=(0.0, math.inf),
                 kind: str = CONTINUOUS) -> VarRef:
    lower, upper = bounds
    return model.add_variable(name, lower, upper, kind)


def add_constraint(model: LinearModel, coeffs, sense: str, rhs: float, tag: str) -> int:
    return model.add_constraint(coeffs, sense, rhs, tag)


def set_objective(model: LinearModel, coeffs, constant: float = 0.0) -> None:
    model.set_objective(coeffs, constant)


def fix_variables(model: LinearModel, assignments) -> LinearModel:
    return model.fix_variables(assignments)


# ---------------------------------------------------------------------------
# LP-format text export / import
# ---------------------------------------------------------------------------

_NAME_OK = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")


def _sanitize_names(names) -> list[str]:
    out, used = [], set()
    for name in names:
        s = re.sub(r"[^A-Za-z0-9_.]", "_", name)
        if not s or not (s[0].isalpha() or s[0] == "_"):
            s = "v_" + s
        base, k = s, 1
        while s in used:
            k += 1
            s = f"{base}_{k}"
        used.add(s)
        out.append(s)
    return out


def _num(x: float) -> str:
    return format(x, ".17g")


def _term(coeff: float, name: str, first: bool) -> str:
    sign = "-" if coeff < 0 else ("" if first else "+")
    mag = abs(coeff)
    lead = "" if first and sign == "" else f"{sign} "
    if first and sign == "-":
        lead = "- "
    return f"{lead}{_num(mag)} {name}"


def export_lp_text(model: LinearModel) -> str:
    """Deterministic CPLEX-style LP text; identical models export identical bytes."""
    names = _sanitize_names(model.variable_names())
    rownames = _sanitize_names(["c_" + r.tag for r in model._rows])
    out = [f"\\ {model.name}", "Minimize"]
    terms = []
    obj = model.objective_coeffs()
    first = True
    for idx in sorted(obj):
        terms.append(_term(obj[idx], names[idx], first))
        first = False
    if model.objective_constant:
        terms.append(_term(model.objective_constant, "", first).rstrip())
    if not terms:
        terms = ["0 " + names[0]] if names else ["0"]
    out.append(" obj: " + " ".join(terms))
    out.append("Subject To")
    for rn, row in zip(rownames, model._rows):
        body = []
        first = True
        for idx, val in zip(row.indices, row.values):
            body.append(_term(val, names[idx], first))
            first = False
        if not body:
            body = ["0 " + names[0]]
        out.append(f" {rn}: " + " ".join(body) + f" {row.sense} {_num(row.rhs)}")
    out.append("Bounds")
    for idx, name in enumerate(names):
        lo, hi = model.bounds(idx)
        if lo == hi:
            out.append(f" {name} = {_num(lo)}")
        elif math.isinf(lo) and math.isinf(hi):
            out.append(f" {name} free")
        elif math.isinf(lo):
            out.append(f" -inf <= {name} <= {_num(hi)}")
        elif math.isinf(hi):
            out.append(f" {name} >= {_num(lo)}")
        else:
            out.append(f" {_num(lo)} <= {name} <= {_num(hi)}")
    binaries = [names[i] for i in range(model.num_variables) if model.kind(i) == BINARY]
    if binaries:
        out.append("Binaries")
        for i in range(0, len(binaries), 8):
            out.append(" " + " ".join(binaries[i:i + 8]))
    out.append("End")
    return "\n".join(out) + "\n"


_TOKEN = re.compile(r"(<=|>=|=|\+|-|\[|\]|[A-Za-z_][A-Za-z0-9_.]*|[0-9.][0-9.eE+-]*|:)")


def parse_lp_text(text: str) -> LinearModel:
    """Parse the LP dialect written by export_lp_text back into a LinearModel."""
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("\\")]
    section = None
    model = LinearModel("parsed")
    var_map: dict[str, VarRef] = {}
    pending_bounds: dict[str, tuple[float, float]] = {}
    binaries: set[str] = set()
    obj_terms: list[tuple[str, float]] = []
    obj_constant = 0.0
    rows: list[tuple[str, list[tuple[str, float]], str, float]] = []

    def parse_expr(tokens):
        terms: list[tuple[str, float]] = []
        const = 0.0
        sign, coeff = 1.0, None
        for tok in tokens:
            if tok in ("+", "-"):
                if coeff is not None:  # dangling number was a constant term
                    const += sign * coeff
                    coeff = None
                sign = 1.0 if tok == "+" else -1.0
            elif tok == ":":
                continue
            elif re.match(r"^[0-9.]", tok):
                coeff = float(tok)
            else:
                terms.append((tok, sign * (1.0 if coeff is None else coeff)))
                sign, coeff = 1.0, None
        if coeff is not None:
            const += sign * coeff
        return terms, const

    for ln in lines:
        s = ln.strip()
        low = s.lower()
        if low in ("minimize", "maximise", "minimise"):
            section = "obj"
            continue
        if low == "subject to":
            section = "rows"
            continue
        if low == "bounds":
            section = "bounds"
            continue
        if low in ("binaries", "binary"):
            section = "bin"
            continue
        if low == "end":
            break
        if section == "obj":
            body = s.split(":", 1)[1] if ":" in s else s
            terms, const = parse_expr(_TOKEN.findall(body))
            obj_terms.extend(terms)
            obj_constant += const
        elif section == "rows":
            label, body = s.split(":", 1)
            m = re.search(r"(<=|>=|=)\s*([-+0-9.eE]+)\s*$", body)
            if not m:
                raise ModelError(f"cannot parse row: {s!r}")
            sense, rhs = m.group(1), float(m.group(2))
            terms, _ = parse_expr(_TOKEN.findall(body[: m.start()]))
            tag = label.strip()
            rows.append((tag, terms, sense, rhs))
        elif section == "bounds":
            if s.endswith(" free"):
                pending_bounds[s[:-5].strip()] = (-math.inf, math.inf)
                continue
            m = re.match(r"^(-inf|[-+0-9.eE]+)\s*<=\s*(\S+)\s*<=\s*([-+0-9.eE]+)$", s)
            if m:
                lo = -math.inf if m.group(1) == "-inf" else float(m.group(1))
                pending_bounds[m.group(2)] = (lo, float(m.group(3)))
                continue
            m = re.match(r"^(\S+)\s*(>=|=|<=)\s*([-+0-9.eE]+)$", s)
            if m:
                name, op, val = m.group(1), m.group(2), float(m.group(3))
                if op == ">=":
                    pending_bounds[name] = (val, math.inf)
                elif op == "<=":
                    old = pending_bounds.get(name, (0.0, math.inf))
                    pending_bounds[name] = (old[0], val)
                else:
                    pending_bounds[name] = (val, val)
                continue
            raise ModelError(f"cannot parse bound line: {s!r}")
        elif section == "bin":
            binaries.update(s.split())

    seen: list[str] = []
    seen_set = set()
    for _, terms, _, _ in rows:
        for name, _ in terms:
            if name not in seen_set:
                seen_set.add(name)
                seen.append(name)
    for name, _ in obj_terms:
        if name not in seen_set:
            seen_set.add(name)
            seen.append(name)
    for name in list(pending_bounds) + sorted(binaries):
        if name not in seen_set:
            seen_set.add(name)
            seen.append(name)
    for name in seen:
        lo, hi = pending_bounds.get(name, (0.0, math.inf))
        kind = BINARY if name in binaries else CONTINUOUS
        if kind == BINARY:
            lo, hi = max(lo, 0.0), min(hi, 1.0)
        var_map[name] = model.add_variable(name, lo, hi, kind)
    for tag, terms, sense, rhs in rows:
        model.add_constraint([(var_map[n], c) for n, c in terms], sense, rhs, tag)
    model.set_objective([(var_map[n], c) for n, c in obj_terms], obj_constant)
    return model
