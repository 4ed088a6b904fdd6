"""Factor graph data model and JSON graph documents.

Document layout::

    {
      "variables": [{"id": "x0", "prior": [0.1, 0.9]},
                    {"id": "x1", "amplitudes": [[re, im], [re, im]]}],
      "functions": [{"id": "f0", "scope": ["x0", "x1", "x2"], "kind": "xor"},
                    {"id": "f1", "scope": ["x1", "x2"], "kind": "diag",
                     "values": [[re, im], ...]}],
      "schedule": {"kind": "phased", "phases": [["f0"], ["f1"]],
                   "bad_qubit_timeout": null}
    }

``scope[0]`` is bit 0 of the diagonal index.  A classical prior ``[p0, p1]``
becomes the amplitude pair ``(sqrt(p0), sqrt(p1))``.  The schedule block is
optional and defaults to a free-running schedule.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import GraphParseError
from .statevector import DiagonalOperator, MAX_QUBITS

PRESETS = ("fig1", "fig1-alt", "fig2", "fig3", "chain4", "nine")


def xor_diag(arity: int) -> DiagonalOperator:
    """Even-parity sieve: entry ``k`` is 1 when ``popcount(k)`` is even."""
    if not isinstance(arity, (int, np.integer)) or not 1 <= arity <= MAX_QUBITS:
        raise ValueError(f"arity must be in 1..{MAX_QUBITS}, got {arity!r}")
    k = np.arange(1 << arity)
    parity = np.zeros_like(k)
    for j in range(arity):
        parity ^= (k >> j) & 1
    return DiagonalOperator((parity == 0).astype(float))


def complement_diag(f: DiagonalOperator) -> DiagonalOperator:
    """Diagonal ``g`` completing ``f`` to a unitary block operator.

    Satisfies ``|f|² + |g|² = 1`` and ``f* g + f g* = 0`` entrywise, with
    ``g = i f sqrt(1 - |f|²) / |f|`` (the ``+i`` sign choice).
    """
    mag = np.abs(f.entries)
    if np.any(mag > 1 + 1e-12):
        raise ValueError("complement needs |f_k| <= 1")
    g = np.zeros_like(f.entries)
    zero = mag == 0.0
    full = np.abs(mag - 1.0) <= 1e-12
    mid = ~(zero | full)
    g[zero] = 1.0
    # unit phase via angle; f / |f| overflows for subnormal entries
    g[mid] = 1j * np.exp(1j * np.angle(f.entries[mid])) * np.sqrt(1.0 - mag[mid] ** 2)
    return DiagonalOperator(g)


@dataclass(frozen=True)
class VariableNode:
    id: str
    prior_amps: tuple[complex, complex]

    @property
    def prior_probs(self) -> tuple[float, float]:
        a, b = self.prior_amps
        return abs(a) ** 2, abs(b) ** 2


@dataclass(frozen=True)
class FunctionNode:
    id: str
    scope: tuple[str, ...]
    f_diag: DiagonalOperator
    g_diag: DiagonalOperator = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        object.__setattr__(self, "scope", tuple(self.scope))
        if self.f_diag.arity != len(self.scope):
            raise ValueError(
                f"function {self.id}: diagonal arity {self.f_diag.arity} != scope size {len(self.scope)}"
            )
        if self.g_diag is None:
            object.__setattr__(self, "g_diag", complement_diag(self.f_diag))

    @property
    def weights(self) -> np.ndarray:
        """Classical weights ``|f_k|²``."""
        return np.abs(self.f_diag.entries) ** 2


@dataclass(frozen=True)
class ScheduleSpec:
    kind: str = "free"
    phases: tuple[tuple[str, ...], ...] = ()
    bad_qubit_timeout: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("free", "phased"):
            raise ValueError(f"schedule kind must be 'free' or 'phased', got {self.kind!r}")
        object.__setattr__(self, "phases", tuple(tuple(p) for p in self.phases))
        t = self.bad_qubit_timeout
        if t is not None and (isinstance(t, bool) or not isinstance(t, int) or t < 1):
            raise ValueError(f"bad_qubit_timeout must be a positive integer or null, got {t!r}")


@dataclass(frozen=True)
class FactorGraph:
    variables: tuple[VariableNode, ...]
    functions: tuple[FunctionNode, ...]
    schedule: ScheduleSpec = ScheduleSpec()

    def __post_init__(self) -> None:
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "functions", tuple(self.functions))
        var_ids = [v.id for v in self.variables]
        fn_ids = [f.id for f in self.functions]
        for ids, what in ((var_ids, "variable"), (fn_ids, "function")):
            dup = {i for i in ids if ids.count(i) > 1}
            if dup:
                raise ValueError(f"duplicate {what} ids: {sorted(dup)}")
        known = set(var_ids)
        for f in self.functions:
            for q in f.scope:
                if q not in known:
                    raise ValueError(f"function {f.id} references undeclared variable {q!r}")
            if len(set(f.scope)) != len(f.scope):
                raise ValueError(f"function {f.id} repeats a variable in its scope")
        if self.schedule.kind == "phased":
            listed = [fid for phase in self.schedule.phases for fid in phase]
            if sorted(listed) != sorted(fn_ids):
                raise ValueError("phased schedule must list every function exactly once")

    @property
    def variable_ids(self) -> tuple[str, ...]:
        return tuple(v.id for v in self.variables)

    def variable(self, vid: str) -> VariableNode:
        for v in self.variables:
            if v.id == vid:
                return v
        raise KeyError(vid)

    def function(self, fid: str) -> FunctionNode:
        for f in self.functions:
            if f.id == fid:
                return f
        raise KeyError(fid)

    def activation_order(self) -> list[FunctionNode]:
        """Functions in schedule order (phase order, else declaration order)."""
        if self.schedule.kind == "phased":
            return [self.function(fid) for phase in self.schedule.phases for fid in phase]
        return list(self.functions)

    def with_priors(self, priors: Mapping[str, tuple[float, float]]) -> FactorGraph:
        """Copy with some variables' classical priors replaced."""
        variables = []
        for v in self.variables:
            if v.id in priors:
                p0, p1 = priors[v.id]
                v = VariableNode(v.id, _amps_from_probs(p0, p1, v.id))
            variables.append(v)
        return FactorGraph(tuple(variables), self.functions, self.schedule)


def _amps_from_probs(p0: float, p1: float, where: str) -> tuple[complex, complex]:
    if p0 < 0 or p1 < 0:
        raise GraphParseError(f"variable {where}: negative prior probability")
    if abs(p0 + p1 - 1.0) > 1e-6:
        raise GraphParseError(f"variable {where}: prior sums to {p0 + p1!r}, not 1")
    return _renormalize(complex(math.sqrt(p0)), complex(math.sqrt(p1)))


def _renormalize(a: complex, b: complex) -> tuple[complex, complex]:
    nsq = abs(a) ** 2 + abs(b) ** 2
    if abs(nsq - 1.0) > 1e-12:
        s = math.sqrt(nsq)
        a, b = a / s, b / s
    return a, b


def _complex(value: Any, where: str) -> complex:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if (
        isinstance(value, (list, tuple))
        and len(value) == 2
        and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value)
    ):
        return complex(value[0], value[1])
    raise GraphParseError(f"{where}: expected a number or [re, im] pair, got {value!r}")


def _parse_variable(doc: Any, i: int) -> VariableNode:
    if not isinstance(doc, Mapping) or not isinstance(doc.get("id"), str):
        raise GraphParseError(f"variables[{i}]: expected an object with a string 'id'")
    vid = doc["id"]
    if ("prior" in doc) == ("amplitudes" in doc):
        raise GraphParseError(f"variable {vid}: give exactly one of 'prior' or 'amplitudes'")
    if "prior" in doc:
        prior = doc["prior"]
        if not isinstance(prior, (list, tuple)) or len(prior) != 2:
            raise GraphParseError(f"variable {vid}: 'prior' must be [p0, p1]")
        p0, p1 = (_complex(p, f"variable {vid} prior") for p in prior)
        if p0.imag or p1.imag:
            raise GraphParseError(f"variable {vid}: classical prior must be real")
        return VariableNode(vid, _amps_from_probs(p0.real, p1.real, vid))
    amps = doc["amplitudes"]
    if not isinstance(amps, (list, tuple)) or len(amps) != 2:
        raise GraphParseError(f"variable {vid}: 'amplitudes' must hold two entries")
    a, b = (_complex(x, f"variable {vid} amplitudes") for x in amps)
    if abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) > 1e-6:
        raise GraphParseError(f"variable {vid}: amplitudes are not normalized")
    return VariableNode(vid, _renormalize(a, b))


def _parse_function(doc: Any, i: int, known: set[str]) -> FunctionNode:
    if not isinstance(doc, Mapping) or not isinstance(doc.get("id"), str):
        raise GraphParseError(f"functions[{i}]: expected an object with a string 'id'")
    fid = doc["id"]
    scope = doc.get("scope")
    if not isinstance(scope, (list, tuple)) or not scope or not all(isinstance(s, str) for s in scope):
        raise GraphParseError(f"function {fid}: 'scope' must be a non-empty list of variable ids")
    for q in scope:
        if q not in known:
            raise GraphParseError(f"function {fid}: unknown variable {q!r}")
    if len(set(scope)) != len(scope):
        raise GraphParseError(f"function {fid}: scope repeats a variable")
    kind = doc.get("kind")
    if kind == "xor":
        f = xor_diag(len(scope))
    elif kind == "diag":
        values = doc.get("values")
        if not isinstance(values, (list, tuple)) or len(values) != 1 << len(scope):
            raise GraphParseError(f"function {fid}: 'values' must hold {1 << len(scope)} entries")
        entries = [_complex(x, f"function {fid} values[{k}]") for k, x in enumerate(values)]
        for k, e in enumerate(entries):
            if abs(e) > 1 + 1e-12:
                raise GraphParseError(f"function {fid}: values[{k}] has magnitude {abs(e):.6g} > 1")
        f = DiagonalOperator(entries)
    else:
        raise GraphParseError(f"function {fid}: 'kind' must be 'xor' or 'diag', got {kind!r}")
    return FunctionNode(fid, tuple(scope), f)


def _parse_schedule(doc: Any, fn_ids: list[str]) -> ScheduleSpec:
    if doc is None:
        return ScheduleSpec()
    if not isinstance(doc, Mapping):
        raise GraphParseError("schedule: expected an object")
    kind = doc.get("kind", "free")
    if kind not in ("free", "phased"):
        raise GraphParseError(f"schedule: kind must be 'free' or 'phased', got {kind!r}")
    timeout = doc.get("bad_qubit_timeout")
    if timeout is not None and (isinstance(timeout, bool) or not isinstance(timeout, int) or timeout < 1):
        raise GraphParseError(f"schedule: bad_qubit_timeout must be a positive integer, got {timeout!r}")
    phases: list[tuple[str, ...]] = []
    if kind == "phased":
        raw = doc.get("phases")
        if not isinstance(raw, (list, tuple)) or not all(isinstance(p, (list, tuple)) for p in raw):
            raise GraphParseError("schedule: 'phases' must be a list of lists of function ids")
        seen: list[str] = []
        for phase in raw:
            for fid in phase:
                if fid not in fn_ids:
                    raise GraphParseError(f"schedule: unknown function {fid!r}")
                if fid in seen:
                    raise GraphParseError(f"schedule: function {fid!r} listed twice")
                seen.append(fid)
            phases.append(tuple(phase))
        missing = [f for f in fn_ids if f not in seen]
        if missing:
            raise GraphParseError(f"schedule: functions {missing} are not in any phase")
    return ScheduleSpec(kind, tuple(phases), timeout)


def parse_graph(document: str | bytes | Mapping[str, Any]) -> FactorGraph:
    """Validate a graph document (JSON text or an already-decoded mapping)."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise GraphParseError(f"not valid JSON: {exc}") from None
    if not isinstance(document, Mapping):
        raise GraphParseError("graph document must be a JSON object")
    raw_vars = document.get("variables")
    raw_fns = document.get("functions", [])
    if not isinstance(raw_vars, (list, tuple)) or not raw_vars:
        raise GraphParseError("'variables' must be a non-empty list")
    if not isinstance(raw_fns, (list, tuple)):
        raise GraphParseError("'functions' must be a list")
    variables = [_parse_variable(v, i) for i, v in enumerate(raw_vars)]
    ids = [v.id for v in variables]
    dup = sorted({i for i in ids if ids.count(i) > 1})
    if dup:
        raise GraphParseError(f"duplicate variable ids: {dup}")
    functions = [_parse_function(f, i, set(ids)) for i, f in enumerate(raw_fns)]
    fn_ids = [f.id for f in functions]
    dup = sorted({i for i in fn_ids if fn_ids.count(i) > 1})
    if dup:
        raise GraphParseError(f"duplicate function ids: {dup}")
    schedule = _parse_schedule(document.get("schedule"), fn_ids)
    return FactorGraph(tuple(variables), tuple(functions), schedule)


def _pair(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def graph_to_dict(graph: FactorGraph) -> dict[str, Any]:
    """Inverse of :func:`parse_graph`; amplitudes are written exactly."""
    functions = []
    for f in graph.functions:
        entry: dict[str, Any] = {"id": f.id, "scope": list(f.scope)}
        if f.f_diag == xor_diag(len(f.scope)):
            entry["kind"] = "xor"
        else:
            entry["kind"] = "diag"
            entry["values"] = [_pair(complex(e)) for e in f.f_diag.entries]
        functions.append(entry)
    return {
        "variables": [
            {"id": v.id, "amplitudes": [_pair(v.prior_amps[0]), _pair(v.prior_amps[1])]}
            for v in graph.variables
        ],
        "functions": functions,
        "schedule": {
            "kind": graph.schedule.kind,
            "phases": [list(p) for p in graph.schedule.phases],
            "bad_qubit_timeout": graph.schedule.bad_qubit_timeout,
        },
    }


def serialize_graph(graph: FactorGraph) -> str:
    return json.dumps(graph_to_dict(graph), indent=2)


def load_graph(path: str | Path) -> FactorGraph:
    return parse_graph(Path(path).read_text(encoding="utf-8"))


def load_preset(name: str) -> FactorGraph:
    """Load one of the bundled graphs listed in :data:`PRESETS`."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    text = resources.files("qfg").joinpath("presets", f"{name}.json").read_text(encoding="utf-8")
    return parse_graph(text)
