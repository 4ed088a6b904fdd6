"""QPA execution: per-function activation, failure semantics and schedules.

A function activation merges the entangled blocks holding its scope qubits,
weights the joint amplitudes by the function's diagonal and measures the
ancilla.  The ancilla is never materialised: reading ``z = 0`` happens with
probability ``p_f = ||f · s||²`` and leaves the normalized f-branch; reading
``z = 1`` destroys every qubit of the merged block, which restarts from its
a-priori state, and un-completes every function that touched those qubits.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ContradictoryGraphError, ImpossibleOutcomeError, InvalidStateError
from .factor_graph import FactorGraph, FunctionNode, complement_diag
from .statevector import (
    ZERO_PROB,
    DiagonalOperator,
    StateVector,
    apply_diagonal,
    product_state,
    tensor_product,
)

UNIFORM = (math.sqrt(0.5) + 0j, math.sqrt(0.5) + 0j)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream for one Monte Carlo trial, fixed by ``(seed, trial)``."""
    return np.random.default_rng([seed, trial])


def init_variable(
    target: tuple[complex, complex],
    mode: str = "ideal",
    *,
    rng: np.random.Generator | None = None,
    qubit_id: str = "x",
) -> tuple[StateVector | None, float]:
    """Prepare one qubit in ``target``.

    ``"ideal"`` returns the target with probability 1.  ``"qpa"`` starts from
    the uniform superposition and sieves it with ``diag(alpha, beta)``; the
    ancilla reads 0 with probability 1/2 and then leaves exactly the target.
    Without ``rng`` the success branch is returned; with ``rng`` one attempt
    is sampled and a failed attempt returns ``None`` as the state.
    """
    alpha, beta = complex(target[0]), complex(target[1])
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1.0) > 1e-9:
        raise ValueError(f"target ({alpha}, {beta}) is not normalized")
    if mode == "ideal":
        return StateVector.qubit(qubit_id, alpha, beta), 1.0
    if mode != "qpa":
        raise ValueError(f"mode must be 'ideal' or 'qpa', got {mode!r}")
    f = DiagonalOperator([alpha, beta])
    complement_diag(f)  # validates |f| <= 1; the g-branch itself is discarded
    start = StateVector.qubit(qubit_id, *UNIFORM)
    weighted = apply_diagonal(start, f, [qubit_id])
    p = weighted.norm_squared()
    if rng is not None and rng.random() >= p:
        return None, p
    return weighted.normalized(), p


@dataclass(frozen=True)
class ActivationOutcome:
    function_id: str
    success: bool
    p_success: float
    destroyed_qubits: frozenset[str] = frozenset()


class ActivationCache:
    """Memo of f-branch results shared by registries of one graph.

    States are immutable and the f-branch of an activation is a pure function
    of the input blocks, so results are keyed by the identity of those block
    objects (which the cache keeps alive).  Fresh a-priori states are
    canonical objects for the same reason.
    """

    def __init__(self, max_entries: int = 100_000) -> None:
        self.max_entries = max_entries
        self._priors: dict[tuple[str, complex, complex], StateVector] = {}
        self._results: dict[tuple[int, ...], tuple] = {}

    def prior_state(self, qubit_id: str, amps: tuple[complex, complex]) -> StateVector:
        key = (qubit_id, complex(amps[0]), complex(amps[1]))
        state = self._priors.get(key)
        if state is None:
            state = StateVector._wrap((qubit_id,), np.array(amps, dtype=np.complex128))
            self._priors[key] = state
        return state

    def f_branch(self, node: FunctionNode, blocks: list[StateVector]) -> tuple[float, StateVector, StateVector]:
        """``(p_f, merged input, normalized f-branch or merged input if p_f == 0)``."""
        key = (id(node), *map(id, blocks))
        hit = self._results.get(key)
        if hit is not None:
            return hit[0], hit[1], hit[2]
        merged = blocks[0]
        for b in blocks[1:]:
            merged = tensor_product(merged, b)
        weighted = apply_diagonal(merged, node.f_diag, node.scope)
        p = weighted.norm_squared()
        post = StateVector._wrap(merged.qubit_ids, weighted.amps / math.sqrt(p)) if p > 0 else merged
        if len(self._results) >= self.max_entries:
            self._results.clear()
        self._results[key] = (p, merged, post, node, blocks)
        return p, merged, post


class EntanglementRegistry:
    """Live qubits partitioned into entangled blocks, one state vector each.

    Confined to a single worker; not thread-safe.
    """

    def __init__(
        self,
        graph: FactorGraph,
        *,
        init_mode: str = "ideal",
        rng: np.random.Generator | None = None,
        bad_qubit_timeout: int | None = None,
        cache: ActivationCache | None = None,
    ) -> None:
        if init_mode not in ("ideal", "qpa"):
            raise ValueError(f"init_mode must be 'ideal' or 'qpa', got {init_mode!r}")
        self.graph = graph
        self.init_mode = init_mode
        self.rng = rng
        self.bad_qubit_timeout = bad_qubit_timeout
        self.cache = cache if cache is not None else ActivationCache()
        self.completed: set[str] = set()
        self.attempt_counts: dict[str, int] = {f.id: 0 for f in graph.functions}
        self.failure_counts: dict[str, int] = {v.id: 0 for v in graph.variables}
        self.timed_out: set[str] = set()
        self.init_attempts = 0
        self._priors = {v.id: v.prior_amps for v in graph.variables}
        self._scopes = {f.id: frozenset(f.scope) for f in graph.functions}
        self._fresh: dict[str, StateVector] = {}
        self._blocks: dict[int, StateVector] = {}
        self._block_of: dict[str, int] = {}
        self._next_key = 0
        for v in graph.variables:
            self._reset_qubit(v.id)

    # -- inspection -----------------------------------------------------
    @property
    def blocks(self) -> list[StateVector]:
        return list(self._blocks.values())

    def block_of(self, qubit_id: str) -> StateVector:
        return self._blocks[self._block_of[qubit_id]]

    def prior(self, qubit_id: str) -> tuple[complex, complex]:
        return UNIFORM if qubit_id in self.timed_out else self._priors[qubit_id]

    def is_complete(self) -> bool:
        return len(self.completed) == len(self.graph.functions)

    def mark_pending(self, function_id: str) -> None:
        """Forget that ``function_id`` completed, leaving the state untouched."""
        self.completed.discard(function_id)

    # -- mutation -------------------------------------------------------
    def _store(self, state: StateVector) -> None:
        key = self._next_key
        self._next_key += 1
        self._blocks[key] = state
        for q in state.qubit_ids:
            self._block_of[q] = key

    def _reset_qubit(self, q: str) -> None:
        if self.init_mode == "qpa":
            while True:
                self.init_attempts += 1
                state, _ = init_variable(self.prior(q), "qpa", rng=self.rng, qubit_id=q)
                if state is not None:
                    break
        fresh = self._fresh.get(q)
        if fresh is None:
            fresh = self._fresh[q] = self.cache.prior_state(q, self.prior(q))
        self._store(fresh)

    def _take_blocks(self, scope: Sequence[str]) -> list[StateVector]:
        keys: list[int] = []
        for q in scope:
            key = self._block_of[q]
            if key not in keys:
                keys.append(key)
        return [self._blocks.pop(key) for key in keys]

    def _destroy(self, qubits: Sequence[str]) -> None:
        for q in qubits:
            self._reset_qubit(q)
        if self.completed:
            lost = set(qubits)
            self.completed = {fid for fid in self.completed if not (self._scopes[fid] & lost)}


def activate_function(
    reg: EntanglementRegistry,
    node: FunctionNode,
    *,
    rng: np.random.Generator | None = None,
    force_success: bool = False,
) -> ActivationOutcome:
    """Apply ``U_fg`` for ``node`` and measure its ancilla.

    With ``force_success`` the ancilla is post-selected on 0; otherwise it
    is sampled with ``rng``.
    """
    if node.id in reg.completed:
        raise InvalidStateError(f"function {node.id} already completed")
    if not force_success and rng is None:
        raise ValueError("sampled activation needs an rng")
    blocks = reg._take_blocks(node.scope)
    p, merged, post = reg.cache.f_branch(node, blocks)
    if force_success:
        if p < ZERO_PROB:
            reg._store(merged)
            raise ImpossibleOutcomeError(f"function {node.id} has success probability {p:.3g}")
        success = True
    else:
        success = rng.random() < p
    reg.attempt_counts[node.id] += 1
    if success:
        reg._store(post)
        reg.completed.add(node.id)
        for q in node.scope:
            reg.failure_counts[q] = 0
        return ActivationOutcome(node.id, True, p)
    timeout = reg.bad_qubit_timeout
    for q in node.scope:
        reg.failure_counts[q] += 1
        if timeout is not None and reg.failure_counts[q] >= timeout and q not in reg.timed_out:
            reg.timed_out.add(q)
            reg._fresh.pop(q, None)
    reg._destroy(merged.qubit_ids)
    return ActivationOutcome(node.id, False, p, frozenset(merged.qubit_ids))


@dataclass(frozen=True)
class Event:
    tick: int
    kind: str  # "activate" or "timeout"
    function_id: str | None
    success: bool | None
    p_success: float | None
    qubits: tuple[str, ...] = ()


@dataclass
class RunReport:
    ticks: int
    completed: bool
    seed: int | None = None
    cumulative_success_probability: float | None = None
    events: list[Event] = field(default_factory=list)
    attempts: dict[str, int] = field(default_factory=dict)
    init_attempts: int = 0
    states: tuple[StateVector, ...] = ()

    @property
    def activations(self) -> int:
        return sum(self.attempts.values())


def run_schedule(
    graph: FactorGraph,
    mode: str = "sample",
    *,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
    max_ticks: int = 1000,
    order: Sequence[str] | None = None,
    init_mode: str = "ideal",
    bad_qubit_timeout: int | None = None,
    record_events: bool = True,
    cache: ActivationCache | None = None,
) -> RunReport:
    """Drive a whole graph to completion.

    ``"exact"`` activates each function once (schedule order, or ``order``)
    with forced success and accumulates the product of the success
    probabilities.  ``"sample"`` runs ticks: under a free schedule every
    pending function attempts once per tick in a shuffled order; under a
    phased schedule only the first phase with pending functions runs.
    Exhausting ``max_ticks`` yields ``completed=False``.
    """
    timeout = bad_qubit_timeout if bad_qubit_timeout is not None else graph.schedule.bad_qubit_timeout
    if mode == "exact":
        reg = EntanglementRegistry(graph, init_mode="ideal")
        nodes = [graph.function(fid) for fid in order] if order is not None else graph.activation_order()
        if sorted(f.id for f in nodes) != sorted(f.id for f in graph.functions):
            raise ValueError("order must list every function exactly once")
        cumulative = 1.0
        events = []
        for tick, node in enumerate(nodes, start=1):
            try:
                out = activate_function(reg, node, force_success=True)
            except ImpossibleOutcomeError as exc:
                raise ContradictoryGraphError(str(exc)) from None
            cumulative *= out.p_success
            events.append(Event(tick, "activate", node.id, True, out.p_success, node.scope))
        return RunReport(
            ticks=len(nodes), completed=True, seed=seed,
            cumulative_success_probability=cumulative, events=events,
            attempts=dict(reg.attempt_counts), states=tuple(reg.blocks),
        )
    if mode != "sample":
        raise ValueError(f"mode must be 'sample' or 'exact', got {mode!r}")
    if rng is None:
        rng = np.random.default_rng(seed)
    reg = EntanglementRegistry(graph, init_mode=init_mode, rng=rng, bad_qubit_timeout=timeout, cache=cache)
    events: list[Event] = []
    functions = list(graph.functions)
    phases = [[graph.function(fid) for fid in phase] for phase in graph.schedule.phases]
    phased = graph.schedule.kind == "phased"
    done = reg.is_complete()
    tick = 0
    while not done and tick < max_ticks:
        tick += 1
        if phased:
            for phase in phases:
                batch = [f for f in phase if f.id not in reg.completed]
                if batch:
                    break
        else:
            pending = [f for f in functions if f.id not in reg.completed]
            batch = [pending[i] for i in rng.permutation(len(pending))] if len(pending) > 1 else pending
        for node in batch:
            timed_out = len(reg.timed_out)
            out = activate_function(reg, node, rng=rng)
            if record_events:
                events.append(Event(tick, "activate", node.id, out.success, out.p_success,
                                    tuple(sorted(out.destroyed_qubits))))
                if len(reg.timed_out) > timed_out:
                    events.append(Event(tick, "timeout", node.id, None, None, tuple(sorted(reg.timed_out))))
        done = reg.is_complete()
    return RunReport(
        ticks=tick, completed=done, seed=seed, events=events,
        attempts=dict(reg.attempt_counts), init_attempts=reg.init_attempts,
        states=tuple(reg.blocks),
    )


def exact_posterior(graph: FactorGraph) -> tuple[float, StateVector]:
    """Sieve the prior product state by every function diagonal at once.

    Returns the total success mass and the normalized posterior state over
    the graph's variables in declaration order.
    """
    state = product_state(graph.variable_ids, [v.prior_amps for v in graph.variables])
    for f in graph.functions:
        state = apply_diagonal(state, f.f_diag, f.scope)
    p_total = state.norm_squared()
    if p_total < ZERO_PROB:
        raise ContradictoryGraphError(f"total success mass {p_total:.3g} is zero")
    return p_total, state.normalized()


def _trial_chunk(args) -> list[tuple[bool, int]]:
    graph, seed, start, stop, max_ticks, init_mode = args
    cache = ActivationCache()
    out = []
    for trial in range(start, stop):
        rep = run_schedule(graph, "sample", rng=trial_rng(seed, trial), max_ticks=max_ticks,
                           init_mode=init_mode, record_events=False, cache=cache)
        out.append((rep.completed, rep.ticks))
    return out


def run_trials(
    graph: FactorGraph,
    trials: int,
    seed: int = 0,
    *,
    max_ticks: int = 1000,
    init_mode: str = "ideal",
    workers: int = 1,
) -> list[tuple[bool, int]]:
    """Independent sampled runs; ``(completed, ticks)`` per trial in trial order.

    Each trial draws from :func:`trial_rng`, so results do not depend on
    ``workers``.
    """
    if trials < 0:
        raise ValueError("trials must be nonnegative")
    if workers <= 1 or trials < 2:
        return _trial_chunk((graph, seed, 0, trials, max_ticks, init_mode))
    bounds = np.linspace(0, trials, workers + 1).astype(int)
    jobs = [(graph, seed, int(a), int(b), max_ticks, init_mode) for a, b in zip(bounds[:-1], bounds[1:])]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [r for chunk in pool.map(_trial_chunk, jobs) for r in chunk]
