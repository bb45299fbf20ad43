"""Problem instances: generator data, demand, network data, and classification.

Periods are 0-based internally (t = 0..T-1). Instances are immutable after
parsing and safe to share across worker threads.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from enum import Enum

import yaml

INF = math.inf


class InstanceError(ValueError):
    """Raised on malformed or inconsistent instance data; message carries the field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class GeneratorClass(str, Enum):
    G1 = "G1"
    G2 = "G2"
    G3 = "G3"
    G4 = "G4"


@dataclass(frozen=True)
class StartupState:
    """One start-up state: cost applies when the off time falls in [min_off, max_off]."""

    name: str
    cost: float
    min_off: int
    max_off: float  # inf for the coldest state


@dataclass(frozen=True)
class GeneratorSpec:
    """Physical and cost data for one generator over the horizon.

    Array fields have length T. ``startup_states`` is ordered from hottest to
    coldest and its off-time windows partition [min_down, inf). The shutdown
    cost is a step function of completed run duration given as
    ``shutdown_steps`` = ((up_to, cost), ..., (None, cost)); a single
    (None, cost) entry is a constant cost.
    """

    gen_id: str
    horizon: int
    bus: str
    p_min: tuple[float, ...]
    p_max: tuple[float, ...]
    ramp_up: tuple[float, ...]
    ramp_down: tuple[float, ...]
    su_ramp: tuple[float, ...]
    sd_ramp: tuple[float, ...]
    min_up: int
    min_down: int
    max_up: float
    mu_enforced: tuple[int, ...]
    md_enforced: tuple[int, ...]
    no_load: tuple[float, ...]
    cost_segments: tuple[tuple[tuple[float, float], ...], ...]  # per t: ((slope, intercept), ...)
    startup_states: tuple[StartupState, ...]
    shutdown_steps: tuple[tuple[float | None, float], ...]
    initial_on_duration: int = 0
    initial_off_duration: int = 0

    # -- initial-state helpers -------------------------------------------------

    @property
    def initially_on(self) -> bool:
        return self.initial_on_duration > 0

    @property
    def initially_off(self) -> bool:
        return self.initial_off_duration > 0

    @property
    def free_initial_state(self) -> bool:
        return not self.initially_on and not self.initially_off

    def initial_lock(self) -> int:
        """Periods the unit must stay on before its first allowed shutdown, [L - s0]+."""
        return max(self.min_up - self.initial_on_duration, 0)

    # -- per-period effective limits ------------------------------------------

    def min_up_at(self, t: int) -> int:
        """Effective min-up for a run starting at period t (1 when relaxed)."""
        return self.min_up if self.mu_enforced[t] else 1

    def min_down_at(self, t: int) -> int:
        """Effective min-down for a restart at period t (1 when relaxed)."""
        return self.min_down if self.md_enforced[t] else 1

    # -- cost helpers ----------------------------------------------------------

    def startup_state_for(self, down_time: float) -> StartupState:
        """State whose window contains ``down_time``; times below the hottest window map hot."""
        for st in self.startup_states:
            if down_time <= st.max_off:
                return st
        return self.startup_states[-1]

    def startup_cost_any(self, down_time: float) -> float:
        """Start-up cost for any positive off time (no min-down gate)."""
        return self.startup_state_for(down_time).cost

    @property
    def constant_startup(self) -> bool:
        return len(self.startup_states) == 1

    @property
    def cheapest_startup_cost(self) -> float:
        return min(st.cost for st in self.startup_states)

    def shutdown_cost_at(self, duration: float) -> float:
        """Shut-down cost as a function of the completed run duration in hours."""
        for up_to, cost in self.shutdown_steps:
            if up_to is None or duration <= up_to:
                return cost
        return self.shutdown_steps[-1][1]

    @property
    def constant_shutdown(self) -> bool:
        return len(self.shutdown_steps) == 1

    @property
    def shutdown_floor(self) -> float:
        return min(cost for _, cost in self.shutdown_steps)


@dataclass(frozen=True)
class TransmissionData:
    """Shift-factor network: one row of factors per line, symmetric MW limits."""

    lines: tuple[str, ...]
    shift_factors: tuple[tuple[float, ...], ...]  # line x bus
    limits: tuple[float, ...]


@dataclass(frozen=True)
class SystemInstance:
    """A pricing case: generators, per-period demand, optional transmission."""

    name: str
    horizon: int
    buses: tuple[str, ...]
    demand: tuple[float, ...]
    generators: tuple[GeneratorSpec, ...]
    transmission: TransmissionData | None = None

    def generator(self, gen_id: str) -> GeneratorSpec:
        for g in self.generators:
            if g.gen_id == gen_id:
                return g
        raise KeyError(gen_id)

    def bus_index(self, bus: str) -> int:
        return self.buses.index(bus)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def startup_cost_at(g: GeneratorSpec, down_time: float) -> float:
    """Start-up cost after ``down_time`` off hours; errors below min-down."""
    if down_time < g.min_down:
        raise ValueError(
            f"down_time {down_time} below min_down {g.min_down} for generator {g.gen_id}"
        )
    return g.startup_cost_any(down_time)


def initial_lock(g: GeneratorSpec) -> int:
    """First allowed shutdown offset [L - s0]+ (unit may first be off at that 0-based period)."""
    return max(g.min_up - g.initial_on_duration, 0)


def _time_invariant(seq) -> bool:
    return all(v == seq[0] for v in seq)


def classify(g: GeneratorSpec) -> GeneratorClass:
    """Generator class tag G1..G4, a pure function of the physical data."""
    invariant = (
        _time_invariant(g.p_min)
        and _time_invariant(g.p_max)
        and _time_invariant(g.ramp_up)
        and _time_invariant(g.ramp_down)
        and _time_invariant(g.su_ramp)
        and _time_invariant(g.sd_ramp)
        and _time_invariant(g.no_load)
        and _time_invariant(g.cost_segments)
    )
    gap = g.p_max[0] - g.p_min[0]
    simple = (
        invariant
        and g.constant_startup
        and g.constant_shutdown
        and all(k == 1 for k in g.mu_enforced)
        and all(w == 1 for w in g.md_enforced)
        and g.ramp_up[0] >= gap
        and g.ramp_down[0] >= gap
        and g.sd_ramp[0] >= g.p_max[0]
    )
    if not simple:
        return GeneratorClass.G4
    if g.su_ramp[0] >= g.p_max[0]:
        if math.isinf(g.max_up):
            return GeneratorClass.G1
        return GeneratorClass.G4
    if math.isinf(g.max_up):
        return GeneratorClass.G2
    return GeneratorClass.G3


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def validate_generator(g: GeneratorSpec, path: str = "") -> None:
    p = path or f"generator {g.gen_id}"
    T = g.horizon
    if T < 1:
        raise InstanceError(p, "horizon must be >= 1")
    arrays = {
        "p_min": g.p_min,
        "p_max": g.p_max,
        "ramp_up": g.ramp_up,
        "ramp_down": g.ramp_down,
        "su_ramp": g.su_ramp,
        "sd_ramp": g.sd_ramp,
        "mu_enforced": g.mu_enforced,
        "md_enforced": g.md_enforced,
        "no_load": g.no_load,
        "cost_segments": g.cost_segments,
    }
    for name, arr in arrays.items():
        if len(arr) != T:
            raise InstanceError(f"{p}.{name}", f"length {len(arr)} != horizon {T}")
    for t in range(T):
        if not 0 <= g.p_min[t] <= g.p_max[t]:
            raise InstanceError(
                f"{p}.p_min[{t}]",
                f"need 0 <= p_min <= p_max, got ({g.p_min[t]}, {g.p_max[t]})",
            )
        for name in ("ramp_up", "ramp_down", "su_ramp", "sd_ramp"):
            if arrays[name][t] < 0:
                raise InstanceError(f"{p}.{name}[{t}]", "ramp rates must be >= 0")
        if g.mu_enforced[t] not in (0, 1):
            raise InstanceError(f"{p}.mu_enforced[{t}]", "flags must be 0 or 1")
        if g.md_enforced[t] not in (0, 1):
            raise InstanceError(f"{p}.md_enforced[{t}]", "flags must be 0 or 1")
        segs = g.cost_segments[t]
        if not segs:
            raise InstanceError(f"{p}.cost_segments[{t}]", "need at least one segment")
        slopes = [s for s, _ in segs]
        if any(b >= a for a, b in zip(slopes[1:], slopes[:-1])):
            raise InstanceError(f"{p}.cost_segments[{t}]", "segment slopes must strictly increase")
    if g.min_up < 1 or g.min_down < 1:
        raise InstanceError(f"{p}.min_up", "min_up and min_down must be >= 1")
    if g.max_up < g.min_up:
        raise InstanceError(f"{p}.max_up", f"max_up {g.max_up} < min_up {g.min_up}")
    if g.initial_on_duration < 0 or g.initial_off_duration < 0:
        raise InstanceError(f"{p}.initial_on_duration", "initial durations must be >= 0")
    if g.initial_on_duration > 0 and g.initial_off_duration > 0:
        raise InstanceError(
            f"{p}.initial_on_duration", "at most one of initial on/off durations may be positive"
        )
    if g.initially_on and not math.isinf(g.max_up) and g.initial_on_duration > g.max_up:
        raise InstanceError(
            f"{p}.initial_on_duration",
            f"already on {g.initial_on_duration}h exceeds max_up {g.max_up}",
        )
    if not g.startup_states:
        raise InstanceError(f"{p}.startup_states", "need at least one start-up state")
    states = g.startup_states
    if states[0].min_off != g.min_down:
        raise InstanceError(f"{p}.startup_states", "hottest window must start at min_down")
    for a, b in zip(states[:-1], states[1:]):
        if a.cost > b.cost:
            raise InstanceError(f"{p}.startup_states", "start-up cost must be non-decreasing")
        if a.max_off + 1 != b.min_off:
            raise InstanceError(f"{p}.startup_states", "off-time windows must partition")
    if not math.isinf(states[-1].max_off):
        raise InstanceError(f"{p}.startup_states", "coldest window must be open-ended")
    for st in states:
        if st.cost < 0:
            raise InstanceError(f"{p}.startup_states", "start-up costs must be >= 0")
    for _, cost in g.shutdown_steps:
        if cost < 0:
            raise InstanceError(f"{p}.shutdown_cost", "shut-down costs must be >= 0")
    if not g.constant_startup and g.free_initial_state:
        raise InstanceError(
            f"{p}.startup_states",
            "duration-dependent start-up costs require a declared initial state "
            "(set initial_on_duration or initial_off_duration)",
        )


def validate_instance(inst: SystemInstance) -> None:
    if inst.horizon < 1:
        raise InstanceError("horizon", "must be >= 1")
    if len(inst.demand) != inst.horizon:
        raise InstanceError("demand", f"length {len(inst.demand)} != horizon {inst.horizon}")
    for t, d in enumerate(inst.demand):
        if d < 0:
            raise InstanceError(f"demand[{t}]", "must be >= 0")
    if not inst.generators:
        raise InstanceError("generators", "need at least one generator")
    seen = set()
    for i, g in enumerate(inst.generators):
        path = f"generators[{i}]"
        if g.gen_id in seen:
            raise InstanceError(f"{path}.id", f"duplicate generator id {g.gen_id!r}")
        seen.add(g.gen_id)
        if g.horizon != inst.horizon:
            raise InstanceError(f"{path}.horizon", f"{g.horizon} != instance horizon {inst.horizon}")
        if g.bus not in inst.buses:
            raise InstanceError(f"{path}.bus", f"unknown bus {g.bus!r}")
        validate_generator(g, path)
        if not g.constant_shutdown:
            raise InstanceError(
                f"{path}.shutdown_cost",
                "system instances require a constant shut-down cost "
                "(duration-indexed steps are supported at the single-generator level only)",
            )
    if inst.transmission is not None:
        tr = inst.transmission
        for li, row in enumerate(tr.shift_factors):
            if len(row) != len(inst.buses):
                raise InstanceError(
                    f"lines[{li}].shift_factors",
                    f"width {len(row)} != bus count {len(inst.buses)}",
                )
            if tr.limits[li] < 0:
                raise InstanceError(f"lines[{li}].limit", "must be >= 0")


# ---------------------------------------------------------------------------
# parsing / serialization
# ---------------------------------------------------------------------------


def _broadcast(value, T: int, path: str, cast=float) -> tuple:
    if isinstance(value, (list, tuple)):
        if len(value) != T:
            raise InstanceError(path, f"array length {len(value)} != horizon {T}")
        return tuple(cast(v) for v in value)
    return tuple(cast(value) for _ in range(T))


def _parse_segments(raw, T: int, path: str):
    if not isinstance(raw, list) or not raw:
        raise InstanceError(path, "cost_segments must be a non-empty list")
    if isinstance(raw[0], dict):  # one segment list broadcast to all periods
        per_t = [raw] * T
    else:
        if len(raw) != T:
            raise InstanceError(path, f"per-period segment lists: length {len(raw)} != horizon {T}")
        per_t = raw
    out = []
    for t, segs in enumerate(per_t):
        if not isinstance(segs, list) or not segs:
            raise InstanceError(f"{path}[{t}]", "expected a non-empty segment list")
        row = []
        for j, seg in enumerate(segs):
            try:
                row.append((float(seg["slope"]), float(seg.get("intercept", 0.0))))
            except (KeyError, TypeError) as exc:
                raise InstanceError(f"{path}[{t}][{j}]", f"bad segment: {exc}") from None
        out.append(tuple(row))
    return tuple(out)


def _parse_startup(raw_cost, raw_states, min_down: int, path: str):
    if raw_states is None:
        cost = 0.0 if raw_cost is None else float(raw_cost)
        return (StartupState("hot", cost, min_down, INF),)
    states = []
    prev_max = min_down - 1
    for j, st in enumerate(raw_states):
        name = str(st.get("state", f"s{j}"))
        try:
            cost = float(st["cost"])
        except (KeyError, TypeError):
            raise InstanceError(f"{path}[{j}].cost", "missing start-up state cost") from None
        max_off = int(st["max_off"]) if st.get("max_off") is not None else INF
        states.append(StartupState(name, cost, int(prev_max) + 1, max_off))
        prev_max = max_off
    return tuple(states)


_GEN_KEYS = {
    "id", "bus", "p_min", "p_max", "ramp_up", "ramp_down", "su_ramp", "sd_ramp",
    "min_up", "min_down", "max_up", "mu_enforced", "md_enforced", "no_load",
    "cost_segments", "startup_cost", "startup_states", "shutdown_cost",
    "initial_on_duration", "initial_off_duration",
}


def _parse_generator(raw: dict, T: int, path: str) -> GeneratorSpec:
    if not isinstance(raw, dict):
        raise InstanceError(path, "generator entries must be mappings")
    unknown = set(raw) - _GEN_KEYS
    if unknown:
        raise InstanceError(path, f"unknown fields {sorted(unknown)}")
    if "id" not in raw:
        raise InstanceError(f"{path}.id", "missing generator id")
    required = ("p_min", "p_max")
    for key in required:
        if key not in raw:
            raise InstanceError(f"{path}.{key}", "missing required field")
    p_max = _broadcast(raw["p_max"], T, f"{path}.p_max")
    big = max(p_max) if p_max else 0.0
    min_down = int(raw.get("min_down", 1))
    raw_max_up = raw.get("max_up", None)
    max_up = INF if raw_max_up in (None, "inf", ".inf") else float(raw_max_up)
    g = GeneratorSpec(
        gen_id=str(raw["id"]),
        horizon=T,
        bus=str(raw.get("bus", "bus0")),
        p_min=_broadcast(raw["p_min"], T, f"{path}.p_min"),
        p_max=p_max,
        ramp_up=_broadcast(raw.get("ramp_up", big), T, f"{path}.ramp_up"),
        ramp_down=_broadcast(raw.get("ramp_down", big), T, f"{path}.ramp_down"),
        su_ramp=_broadcast(raw.get("su_ramp", big), T, f"{path}.su_ramp"),
        sd_ramp=_broadcast(raw.get("sd_ramp", big), T, f"{path}.sd_ramp"),
        min_up=int(raw.get("min_up", 1)),
        min_down=min_down,
        max_up=max_up,
        mu_enforced=_broadcast(raw.get("mu_enforced", 1), T, f"{path}.mu_enforced", cast=int),
        md_enforced=_broadcast(raw.get("md_enforced", 1), T, f"{path}.md_enforced", cast=int),
        no_load=_broadcast(raw.get("no_load", 0.0), T, f"{path}.no_load"),
        cost_segments=_parse_segments(raw.get("cost_segments"), T, f"{path}.cost_segments"),
        startup_states=_parse_startup(
            raw.get("startup_cost"), raw.get("startup_states"), min_down, f"{path}.startup_states"
        ),
        shutdown_steps=((None, float(raw.get("shutdown_cost", 0.0))),),
        initial_on_duration=int(raw.get("initial_on_duration", 0)),
        initial_off_duration=int(raw.get("initial_off_duration", 0)),
    )
    validate_generator(g, path)
    return g


def parse_instance(text: str, name: str = "instance") -> SystemInstance:
    """Parse an instance document (YAML) into a validated SystemInstance."""
    try:
        raw = yaml.safe_load(io.StringIO(text))
    except yaml.YAMLError as exc:
        raise InstanceError("document", f"not parseable: {exc}") from None
    if not isinstance(raw, dict):
        raise InstanceError("document", "top level must be a mapping")
    for key in ("horizon", "demand", "generators"):
        if key not in raw:
            raise InstanceError(key, "missing required top-level key")
    T = int(raw["horizon"])
    demand = raw["demand"]
    if not isinstance(demand, list):
        raise InstanceError("demand", "must be an array")
    buses = tuple(str(b) for b in raw.get("buses", ["bus0"]))
    gens = tuple(
        _parse_generator(g, T, f"generators[{i}]") for i, g in enumerate(raw["generators"])
    )
    transmission = None
    if raw.get("lines"):
        lines, factors, limits = [], [], []
        for li, line in enumerate(raw["lines"]):
            lines.append(str(line.get("id", f"line{li}")))
            sf = line.get("shift_factors")
            if isinstance(sf, dict):
                factors.append(tuple(float(sf.get(b, 0.0)) for b in buses))
            elif isinstance(sf, list):
                factors.append(tuple(float(v) for v in sf))
            else:
                raise InstanceError(f"lines[{li}].shift_factors", "missing shift factors")
            try:
                limits.append(float(line["limit"]))
            except (KeyError, TypeError):
                raise InstanceError(f"lines[{li}].limit", "missing line limit") from None
        transmission = TransmissionData(tuple(lines), tuple(factors), tuple(limits))
    inst = SystemInstance(
        name=str(raw.get("name", name)),
        horizon=T,
        buses=buses,
        demand=tuple(float(d) for d in demand),
        generators=gens,
        transmission=transmission,
    )
    validate_instance(inst)
    return inst


def _compact(seq):
    """Collapse a constant per-period array to a scalar for serialization."""
    lst = list(seq)
    if all(v == lst[0] for v in lst):
        return lst[0]
    return lst


def _gen_to_dict(g: GeneratorSpec) -> dict:
    d = {
        "id": g.gen_id,
        "bus": g.bus,
        "p_min": _compact(g.p_min),
        "p_max": _compact(g.p_max),
        "ramp_up": _compact(g.ramp_up),
        "ramp_down": _compact(g.ramp_down),
        "su_ramp": _compact(g.su_ramp),
        "sd_ramp": _compact(g.sd_ramp),
        "min_up": g.min_up,
        "min_down": g.min_down,
        "no_load": _compact(g.no_load),
        "shutdown_cost": g.shutdown_steps[0][1],
        "initial_on_duration": g.initial_on_duration,
        "initial_off_duration": g.initial_off_duration,
    }
    if not math.isinf(g.max_up):
        d["max_up"] = g.max_up
    if any(k != 1 for k in g.mu_enforced):
        d["mu_enforced"] = list(g.mu_enforced)
    if any(w != 1 for w in g.md_enforced):
        d["md_enforced"] = list(g.md_enforced)
    segs_t = [
        [{"slope": a, "intercept": b} for a, b in segs] for segs in g.cost_segments
    ]
    d["cost_segments"] = segs_t[0] if all(s == segs_t[0] for s in segs_t) else segs_t
    if g.constant_startup:
        d["startup_cost"] = g.startup_states[0].cost
    else:
        d["startup_states"] = [
            {"state": st.name, "cost": st.cost}
            | ({} if math.isinf(st.max_off) else {"max_off": st.max_off})
            for st in g.startup_states
        ]
    return d


def serialize_instance(inst: SystemInstance) -> str:
    """Instance back to document text; parse(serialize(x)) == x on all fields."""
    doc: dict = {
        "name": inst.name,
        "horizon": inst.horizon,
        "demand": list(inst.demand),
        "buses": list(inst.buses),
    }
    if inst.transmission is not None:
        doc["lines"] = [
            {"id": lid, "shift_factors": list(sf), "limit": lim}
            for lid, sf, lim in zip(
                inst.transmission.lines,
                inst.transmission.shift_factors,
                inst.transmission.limits,
            )
        ]
    doc["generators"] = [_gen_to_dict(g) for g in inst.generators]
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None, width=100)


def load_instance(path: str) -> SystemInstance:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_instance(fh.read(), name=path)
