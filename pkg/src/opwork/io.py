"""Scenario files in, canonical reports out.

Scenario files are JSON. Complex matrices are nested arrays of ``[re, im]``
pairs (a bare real number is accepted for a purely real entry). Every parse
error names the offending field, e.g. ``hamiltonians.h0[1][0]``. The schema
is documented in ``docs/scenario_schema.md``.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .driving import (
    ConstantPath,
    DrivingProtocol,
    LinearPath,
    SampledPath,
    Segment,
    propagator,
)
from .errors import OpworkError, ValidationError
from .meter import JointHamiltonian, MeterProtocol
from .openthermo import (
    DampingEvent,
    DampingSchedule,
    QuantumChannel,
    dephasing_channel,
    energy_conserving_unitary,
    mixture_reset_channel,
    partial_swap,
    reset_channel,
    thermal_attach_channel,
)
from .operators import eig_hermitian, hermitian, kron, max_norm
from .optimize import OptimizationConfig
from .states import (
    POVM,
    check_unitary,
    decompose_via_povm,
    density_operator,
    energy_decomposition,
    gibbs_state,
    haar_unitary,
    purify,
    random_povm,
    trivial_decomposition,
)

SCENARIO_VERSION = "opwork-scenario/1"
ENDPOINT_TOL = 1e-9

WORK_COLUMNS = ("scenario_id", "beta", "W_avg", "delta_F_tilde", "delta_F", "estimator",
                "gap_jensen", "gap_quantum", "seed")
METER_COLUMNS = ("steps", "dt", "error", "variance", "predicted_variance")
VERIFY_COLUMNS = ("suite", "probes", "violations", "worst_margin")


# ---------------------------------------------------------------- canonical JSON

def _float_token(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def _plain(obj):
    """Numpy scalars/arrays and complex numbers to JSON-native values."""
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _dump(obj, indent: int | None, level: int, out: list) -> None:
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    sep = ","
    colon = ":" if indent is None else ": "
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_float_token(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for k, key in enumerate(sorted(obj)):
            if k:
                out.append(sep)
            out.append(pad + json.dumps(key, ensure_ascii=False) + colon)
            _dump(obj[key], indent, level + 1, out)
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        out.append("[")
        for k, v in enumerate(obj):
            if k:
                out.append(sep)
            out.append(pad)
            _dump(v, indent, level + 1, out)
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_json(obj, indent: int | None = 2) -> str:
    """Sorted keys, floats with 17 significant digits, non-finite floats as null."""
    out: list[str] = []
    _dump(_plain(obj), indent, 0, out)
    return "".join(out)


def digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj, indent=None).encode()).hexdigest()


# ---------------------------------------------------------------- matrices

def parse_complex(value, path: str) -> complex:
    if isinstance(value, bool):
        raise ValidationError("expected a number or [re, im] pair", field=path)
    if isinstance(value, (int, float)):
        return complex(float(value), 0.0)
    if (isinstance(value, list) and len(value) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
        return complex(float(value[0]), float(value[1]))
    raise ValidationError("expected a number or [re, im] pair", field=path)


def parse_matrix(value, path: str) -> np.ndarray:
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise ValidationError("expected a non-empty list of rows", field=path)
    n = len(value[0])
    rows = []
    for i, row in enumerate(value):
        if len(row) != n:
            raise ValidationError(f"row has {len(row)} entries, expected {n}", field=f"{path}[{i}]")
        rows.append([parse_complex(x, f"{path}[{i}][{j}]") for j, x in enumerate(row)])
    m = np.array(rows, dtype=complex)
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix has non-finite entries", field=path)
    return m


def parse_vector(value, path: str) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise ValidationError("expected a non-empty list", field=path)
    return np.array([parse_complex(x, f"{path}[{i}]") for i, x in enumerate(value)], dtype=complex)


def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


# ---------------------------------------------------------------- field access

def _get(d: dict, key: str, path: str, kind=None, default=...):
    if not isinstance(d, dict):
        raise ValidationError("expected an object", field=path)
    if key not in d:
        if default is ...:
            raise ValidationError("missing required field", field=f"{path}.{key}" if path else key)
        return default
    v = d[key]
    where = f"{path}.{key}" if path else key
    if kind is float:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ValidationError("expected a finite number", field=where)
        return float(v)
    if kind is int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ValidationError("expected an integer", field=where)
        return v
    if kind is not None and not isinstance(v, kind):
        raise ValidationError(f"expected {kind.__name__}", field=where)
    return v


def _rewrap(err: OpworkError, path: str) -> ValidationError:
    field_ = getattr(err, "field", None)
    msg = str(err)
    if field_ and msg.startswith(f"{field_}: "):
        msg = msg[len(field_) + 2:]
    return ValidationError(f"{msg} [{err.category}]" if err.category != "validation" else msg, field=path)


# ---------------------------------------------------------------- scenario

@dataclass
class Scenario:
    """A parsed, validated scenario. ``raw`` is the JSON object it came from."""

    id: str
    beta: float
    seed: int
    hamiltonians: dict
    h0: np.ndarray
    ht: np.ndarray
    protocol: DrivingProtocol | None
    steps: int
    raw: dict = field(repr=False)

    @property
    def digest(self) -> str:
        return digest(self.raw)

    @property
    def dim(self) -> int:
        return self.h0.shape[0]


def _hamiltonian_ref(ref, names: dict, path: str) -> np.ndarray:
    if isinstance(ref, str):
        if ref not in names:
            raise ValidationError(f"unknown Hamiltonian {ref!r}", field=path)
        return names[ref]
    return hermitian(parse_matrix(ref, path), path)


def _parse_protocol(block, names, path="protocol") -> tuple[DrivingProtocol, int]:
    duration = _get(block, "duration", path, float, 1.0)
    steps = _get(block, "steps", path, int, 64)
    if steps < 1:
        raise ValidationError("must be >= 1", field=f"{path}.steps")
    segs_raw = _get(block, "segments", path, list)
    segments = []
    for k, s in enumerate(segs_raw):
        where = f"{path}.segments[{k}]"
        kind = _get(s, "type", where, str)
        t0 = _get(s, "t_start", where, float, 0.0 if k == 0 else None)
        if t0 is None:
            t0 = segments[-1].t_end
        t1 = _get(s, "t_end", where, float, duration if k == len(segs_raw) - 1 else ...)
        if kind == "constant":
            p = ConstantPath(_hamiltonian_ref(_get(s, "h", where), names, f"{where}.h"))
        elif kind == "linear":
            p = LinearPath(_hamiltonian_ref(_get(s, "from", where), names, f"{where}.from"),
                           _hamiltonian_ref(_get(s, "to", where), names, f"{where}.to"))
        elif kind == "sampled":
            samples = _get(s, "samples", where, list)
            if not samples:
                raise ValidationError("need at least one sample", field=f"{where}.samples")
            p = SampledPath(tuple(_hamiltonian_ref(h, names, f"{where}.samples[{i}]")
                                  for i, h in enumerate(samples)))
        else:
            raise ValidationError(f"unknown segment type {kind!r}", field=f"{where}.type")
        segments.append(Segment(t0, t1, p))
    try:
        return DrivingProtocol(duration, tuple(segments)), steps
    except ValidationError as e:
        raise _rewrap(e, e.field or path) from None


def parse_scenario(obj, seed: int | None = None) -> Scenario:
    """Validate a scenario object. ``seed`` overrides the file's base seed."""
    if not isinstance(obj, dict):
        raise ValidationError("scenario must be a JSON object", field="$")
    version = _get(obj, "version", "", str, SCENARIO_VERSION)
    if version != SCENARIO_VERSION:
        raise ValidationError(f"unsupported version {version!r}; expected {SCENARIO_VERSION!r}",
                              field="version")
    sid = _get(obj, "id", "", str, "scenario")
    beta = _get(obj, "beta", "", float)
    if beta < 0:
        raise ValidationError("must be >= 0", field="beta")
    base_seed = _get(obj, "seed", "", int, 0)
    if seed is not None:
        base_seed = int(seed)
    hams_raw = _get(obj, "hamiltonians", "", dict)
    names = {name: hermitian(parse_matrix(m, f"hamiltonians.{name}"), f"hamiltonians.{name}")
             for name, m in hams_raw.items()}
    h0_name = _get(obj, "initial", "", str, "h0")
    ht_name = _get(obj, "final", "", str, "ht")
    h0 = _hamiltonian_ref(h0_name, names, "initial")
    ht = _hamiltonian_ref(ht_name, names, "final")
    if h0.shape != ht.shape:
        raise ValidationError(f"shape {ht.shape} differs from initial {h0.shape}", field="final")
    protocol, steps = None, 64
    if "protocol" in obj:
        protocol, steps = _parse_protocol(obj["protocol"], names)
        if protocol.dim != h0.shape[0]:
            raise ValidationError("protocol dimension differs from the Hamiltonians", field="protocol")
        if max_norm(protocol.initial_hamiltonian - h0) > ENDPOINT_TOL:
            raise ValidationError("protocol does not start at the initial Hamiltonian", field="protocol")
        if max_norm(protocol.final_hamiltonian - ht) > ENDPOINT_TOL:
            raise ValidationError("protocol does not end at the final Hamiltonian", field="protocol")
    sc = Scenario(sid, beta, base_seed, names, h0, ht, protocol, steps, obj)
    # fail early on anything that would only surface inside a command
    gibbs_state(h0, beta)
    build_decomposition(sc)
    build_unitary(sc)
    if obj.get("damping"):
        build_schedule(sc)
    if "meter" in obj:
        build_meter(sc)
    if "optimize" in obj:
        build_optimization_config(sc)
    return sc


def load_scenario(path, seed: int | None = None) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ValidationError(f"cannot read scenario: {e.strerror}", field=str(path)) from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"line {e.lineno} column {e.colno}: {e.msg}", field=str(path)) from None
    return parse_scenario(obj, seed)


# ---------------------------------------------------------------- builders

def _sub_seed(sc: Scenario, block: dict, path: str, salt: int) -> int | list:
    """Explicit ``seed`` in the block, else a stream derived from the base seed."""
    s = _get(block, "seed", path, int, None)
    return s if s is not None else [sc.seed, salt]


def build_unitary(sc: Scenario) -> np.ndarray:
    default = "protocol" if sc.protocol is not None else "identity"
    block = sc.raw.get("unitary", {"type": default})
    kind = _get(block, "type", "unitary", str)
    if kind == "identity":
        return np.eye(sc.dim, dtype=complex)
    if kind == "protocol":
        if sc.protocol is None:
            raise ValidationError("type 'protocol' needs a protocol block", field="unitary.type")
        return propagator(sc.protocol, sc.steps)
    if kind == "haar":
        return haar_unitary(sc.dim, np.random.default_rng(_sub_seed(sc, block, "unitary", 1)))
    if kind == "explicit":
        try:
            return check_unitary(parse_matrix(_get(block, "matrix", "unitary"), "unitary.matrix"))
        except ValidationError as e:
            raise _rewrap(e, "unitary.matrix") from None
    raise ValidationError(f"unknown unitary type {kind!r}", field="unitary.type")


def build_decomposition(sc: Scenario):
    block = sc.raw.get("decomposition", {"type": "eigen"})
    kind = _get(block, "type", "decomposition", str)
    if kind == "trivial":
        return trivial_decomposition(gibbs_state(sc.h0, sc.beta))
    if kind == "eigen":
        return energy_decomposition(sc.h0, sc.beta)
    psi = purify(gibbs_state(sc.h0, sc.beta))
    if kind == "povm_random":
        m = _get(block, "m", "decomposition", int)
        if m < 1:
            raise ValidationError("must be >= 1", field="decomposition.m")
        projective = _get(block, "projective", "decomposition", bool, False)
        rng = np.random.default_rng(_sub_seed(sc, block, "decomposition", 2))
        try:
            povm = random_povm(sc.dim, m, rng, projective=projective)
        except ValidationError as e:
            raise _rewrap(e, "decomposition") from None
        return decompose_via_povm(psi, povm)
    if kind == "povm_explicit":
        els = _get(block, "elements", "decomposition", list)
        mats = [parse_matrix(a, f"decomposition.elements[{i}]") for i, a in enumerate(els)]
        try:
            return decompose_via_povm(psi, POVM(np.array(mats)))
        except (ValidationError, ValueError) as e:
            if isinstance(e, OpworkError):
                raise _rewrap(e, "decomposition.elements") from None
            raise ValidationError(str(e), field="decomposition.elements") from None
    raise ValidationError(f"unknown decomposition type {kind!r}", field="decomposition.type")


def _build_channel(block, h, beta, sc: Scenario, path: str, salt: int) -> QuantumChannel:
    kind = _get(block, "type", path, str)
    d = h.shape[0]
    if kind == "mixture_reset":
        return mixture_reset_channel(h, beta, _get(block, "lambda", path, float))
    if kind == "reset":
        return reset_channel(gibbs_state(h, beta))
    if kind == "dephasing":
        _, vecs = eig_hermitian(h)
        strength = _get(block, "strength", path, float, 1.0)
        if not 0 <= strength <= 1:
            raise ValidationError("must lie in [0, 1]", field=f"{path}.strength")
        return dephasing_channel(vecs, strength)
    if kind == "thermal_attach":
        if "theta" in block:
            v = partial_swap(d, _get(block, "theta", path, float))
        else:
            h_tot = kron(h, np.eye(d)) + kron(np.eye(d), h)
            v = energy_conserving_unitary(h_tot, np.random.default_rng(_sub_seed(sc, block, path, salt)))
        return thermal_attach_channel(h, beta, v)
    if kind == "kraus":
        ops = _get(block, "operators", path, list)
        mats = [parse_matrix(k, f"{path}.operators[{i}]") for i, k in enumerate(ops)]
        try:
            return QuantumChannel(np.array(mats))
        except ValueError as e:
            raise ValidationError(str(e), field=f"{path}.operators") from None
    raise ValidationError(f"unknown channel type {kind!r}", field=f"{path}.type")


def build_schedule(sc: Scenario) -> DampingSchedule:
    events_raw = sc.raw.get("damping", [])
    if not isinstance(events_raw, list):
        raise ValidationError("expected a list of events", field="damping")
    if events_raw and sc.protocol is None:
        raise ValidationError("damping events need a protocol block", field="damping")
    events = []
    for n, ev in enumerate(events_raw):
        where = f"damping[{n}]"
        t = _get(ev, "time", where, float)
        if sc.protocol is not None and not 0 <= t <= sc.protocol.duration:
            raise ValidationError(f"outside [0, {sc.protocol.duration}]", field=f"{where}.time")
        h = sc.protocol.hamiltonian(t)
        if "hamiltonian" in ev:
            h = _hamiltonian_ref(ev["hamiltonian"], sc.hamiltonians, f"{where}.hamiltonian")
        try:
            channel = _build_channel(_get(ev, "channel", where, dict), h, sc.beta, sc,
                                     f"{where}.channel", 100 + n)
        except OpworkError as e:
            raise _rewrap(e, f"{where}.channel") from None
        events.append(DampingEvent(t, h, channel))
    try:
        schedule = DampingSchedule(tuple(events))
        if sc.protocol is not None:
            schedule.validate(sc.protocol, sc.beta)
    except ValidationError as e:
        fld = (e.field or "").replace("schedule.events", "damping").replace("schedule", "damping")
        raise _rewrap(e, fld or "damping") from None
    return schedule


@dataclass(frozen=True)
class MeterSetup:
    rho0: np.ndarray
    joint: JointHamiltonian
    protocol: MeterProtocol
    step_counts: tuple
    shots: int
    seed: object


def build_meter(sc: Scenario) -> MeterSetup:
    block = _get(sc.raw, "meter", "", dict)
    path = "meter"
    d_s = _get(block, "system_dim", path, int, sc.dim)
    d_m = _get(block, "meter_dim", path, int, 2)
    h_sm = hermitian(parse_matrix(_get(block, "h_sm", path), "meter.h_sm"), "meter.h_sm")
    try:
        joint = JointHamiltonian(d_s, d_m, h_sm)
    except ValidationError as e:
        raise _rewrap(e, "meter.h_sm") from None
    duration = _get(block, "duration", path, float, 1.0)
    counts = _get(block, "steps", path, list, [25, 50, 100, 200])
    for i, n in enumerate(counts):
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            raise ValidationError("expected a positive integer", field=f"meter.steps[{i}]")
    if not counts:
        raise ValidationError("need at least one step count", field="meter.steps")
    shots = _get(block, "shots", path, int, 4000)
    if shots < 2:
        raise ValidationError("must be >= 2", field="meter.shots")
    pblock = _get(block, "path", path, dict)
    kind = _get(pblock, "type", "meter.path", str)
    n0 = counts[0]
    if kind == "rotation":
        axis = _get(pblock, "axis", "meter.path", list, [0, 1])
        if len(axis) != 2 or not all(isinstance(a, int) and 0 <= a < d_m for a in axis) or axis[0] == axis[1]:
            raise ValidationError("expected two distinct meter levels", field="meter.path.axis")
        mp = MeterProtocol.rotation(_get(pblock, "omega", "meter.path", float), duration, n0, d_m, tuple(axis))
    elif kind == "constant":
        mu = parse_vector(_get(pblock, "state", "meter.path"), "meter.path.state")
        if mu.size != d_m or np.linalg.norm(mu) == 0:
            raise ValidationError(f"expected a non-zero vector of length {d_m}", field="meter.path.state")
        mp = MeterProtocol.constant(mu, duration, n0)
    elif kind == "sampled":
        times = _get(pblock, "times", "meter.path", list)
        states = [parse_vector(s, f"meter.path.states[{i}]")
                  for i, s in enumerate(_get(pblock, "states", "meter.path", list))]
        for i, s in enumerate(states):
            if s.size != d_m or np.linalg.norm(s) == 0:
                raise ValidationError(f"expected a non-zero vector of length {d_m}",
                                      field=f"meter.path.states[{i}]")
        try:
            mp = MeterProtocol.sampled(times, states, n0)
        except ValidationError as e:
            raise _rewrap(e, e.field or "meter.path") from None
    else:
        raise ValidationError(f"unknown meter path type {kind!r}", field="meter.path.type")
    init = block.get("initial_state", {"type": "gibbs", "hamiltonian": "h0"})
    ikind = _get(init, "type", "meter.initial_state", str)
    if ikind == "gibbs":
        h = _hamiltonian_ref(_get(init, "hamiltonian", "meter.initial_state"), sc.hamiltonians,
                             "meter.initial_state.hamiltonian")
        rho0 = gibbs_state(h, sc.beta)
    elif ikind == "matrix":
        try:
            rho0 = density_operator(parse_matrix(_get(init, "matrix", "meter.initial_state"),
                                                 "meter.initial_state.matrix"), tol=1e-10)
        except ValidationError as e:
            raise _rewrap(e, "meter.initial_state.matrix") from None
    else:
        raise ValidationError(f"unknown initial state type {ikind!r}", field="meter.initial_state.type")
    if rho0.shape[0] != d_s:
        raise ValidationError(f"dimension {rho0.shape[0]} differs from system_dim {d_s}",
                              field="meter.initial_state")
    return MeterSetup(rho0, joint, mp, tuple(int(n) for n in counts), shots, _sub_seed(sc, block, path, 3))


def build_optimization_config(sc: Scenario, jobs: int = 1) -> OptimizationConfig:
    block = sc.raw.get("optimize", {})
    path = "optimize"
    known = {"restarts": int, "max_iters": int, "initial_scale": float, "simplex_step": float,
             "tol": float, "xatol": float, "povm_outcomes": int, "polish_rounds": int}
    kwargs = {}
    for key in block:
        if key == "seed":
            continue
        if key not in known:
            raise ValidationError("unknown option", field=f"{path}.{key}")
        kwargs[key] = _get(block, key, path, known[key])
    seed = _get(block, "seed", path, int, sc.seed)
    try:
        return OptimizationConfig(seed=seed, jobs=jobs, **kwargs)
    except ValidationError as e:
        raise _rewrap(e, e.field or path) from None


# ---------------------------------------------------------------- sweeps

SWEEP_ALIASES = ("beta", "lambda", "steps", "seed")


def _set_path(obj, dotted: str, value):
    keys = []
    for part in dotted.split("."):
        while "[" in part:
            head, rest = part.split("[", 1)
            if head:
                keys.append(head)
            idx, part = rest.split("]", 1)
            keys.append(int(idx))
        if part:
            keys.append(part)
    cur = obj
    for k in keys[:-1]:
        cur = cur[k]
    cur[keys[-1]] = value


def apply_sweep_value(raw: dict, parameter: str, value) -> dict:
    """Copy of ``raw`` with one sweep parameter set.

    ``lambda`` sets every mixture-reset strength; ``steps`` the protocol
    steps; any other name is a dotted path such as ``decomposition.m``.
    """
    out = copy.deepcopy(raw)
    try:
        if parameter == "lambda":
            hits = 0
            for ev in out.get("damping", []):
                ch = ev.get("channel", {})
                if "lambda" in ch:
                    ch["lambda"] = value
                    hits += 1
            if not hits:
                raise ValidationError("no damping channel has a lambda", field="sweep.parameter")
        elif parameter == "steps":
            _set_path(out, "protocol.steps", value)
        else:
            _set_path(out, parameter, value)
    except (KeyError, IndexError, TypeError, ValueError) as e:
        if isinstance(e, ValidationError):
            raise
        raise ValidationError(f"cannot set {parameter!r}: {e}", field="sweep.parameter") from None
    return out


# ---------------------------------------------------------------- reports

@dataclass
class RunReport:
    """Command output. ``rows`` feed the CSV form, ``payload`` the JSON form."""

    kind: str
    scenario_id: str
    seed: object
    payload: dict
    input_digest: str
    rows: list = field(default_factory=list)
    columns: tuple = WORK_COLUMNS
    violations: list = field(default_factory=list)
    tool_version: str = __version__
    wall_time: float | None = None

    def to_dict(self, timing: bool = False) -> dict:
        d = {
            "kind": self.kind,
            "scenario_id": self.scenario_id,
            "seed": self.seed,
            "payload": self.payload,
            "input_digest": self.input_digest,
            "rows": self.rows,
            "columns": list(self.columns),
            "violations": self.violations,
            "tool_version": self.tool_version,
        }
        if timing:
            d["wall_time"] = self.wall_time
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(kind=d["kind"], scenario_id=d["scenario_id"], seed=d["seed"], payload=d["payload"],
                   input_digest=d["input_digest"], rows=d.get("rows", []),
                   columns=tuple(d.get("columns", WORK_COLUMNS)), violations=d.get("violations", []),
                   tool_version=d["tool_version"], wall_time=d.get("wall_time"))


def work_row(report, scenario_id: str, seed) -> dict:
    return {"scenario_id": scenario_id, "beta": report.beta, "W_avg": report.W_avg,
            "delta_F_tilde": report.delta_F_tilde, "delta_F": report.delta_F,
            "estimator": report.estimator, "gap_jensen": report.gap_jensen,
            "gap_quantum": report.gap_quantum, "seed": seed}


def _csv_cell(v) -> str:
    v = _plain(v)
    if isinstance(v, float):
        return _float_token(v) if math.isfinite(v) else ""
    if isinstance(v, list):
        return canonical_json(v, indent=None)
    return "" if v is None else str(v)


def emit_report(report: RunReport, fmt: str = "json", timing: bool = False) -> bytes:
    """Serialize ``report``. JSON is canonical; wall time only appears with ``timing``."""
    if fmt == "json":
        return (canonical_json(report.to_dict(timing)) + "\n").encode()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(report.columns)
        for row in report.rows:
            w.writerow([_csv_cell(row.get(c)) for c in report.columns])
        return buf.getvalue().encode()
    raise ValidationError(f"unknown format {fmt!r}", field="format")


def parse_report(data: bytes | str) -> RunReport:
    if isinstance(data, bytes):
        data = data.decode()
    return RunReport.from_dict(json.loads(data))
