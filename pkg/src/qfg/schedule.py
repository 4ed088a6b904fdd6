"""Completion-time analysis for two-phase distributed QPA.

Phase one runs independent activations in parallel, each retried every
tick until it succeeds.  One tick after the last of them succeeds, a single
closing activation runs; if it fails, the whole graph restarts.  The
probability of first completing at tick ``t`` is computed two ways:

* ``paper``: closing success preceded by failed cycles whose lengths form an
  *unordered* partition of the elapsed time;
* ``renewal``: the same with *ordered* failure runs, i.e. the renewal
  convolution ``e(t) = g(t) + sum_u f(u) e(t - u)``.

Both are compared against the non-distributed baseline
``P(t) = 1 - (1 - joint)^t`` and against Monte Carlo runs of the engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .engine import run_trials
from .errors import ContradictoryGraphError, ResourceLimitError
from .factor_graph import FactorGraph, ScheduleSpec
from .oracle import brute_force_posterior

MAX_PARTITION_K = 60
MAX_T = 200


def _partitions(k: int, largest: int) -> Iterator[tuple[int, ...]]:
    if k == 0:
        yield ()
        return
    for first in range(min(k, largest), 0, -1):
        for rest in _partitions(k - first, first):
            yield (first,) + rest


def integer_partitions(k: int) -> list[tuple[int, ...]]:
    """All unordered partitions of ``k`` as non-increasing tuples; ``[()]`` for 0."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k > MAX_PARTITION_K:
        raise ResourceLimitError(f"enumerating partitions of {k} > {MAX_PARTITION_K} is too costly")
    return list(_partitions(k, k))


@dataclass(frozen=True)
class TwoPhaseSpec:
    parallel_probs: tuple[float, ...]
    final_conditional: float
    joint_prob: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "parallel_probs", tuple(float(p) for p in self.parallel_probs))
        for p in (*self.parallel_probs, self.final_conditional, self.joint_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p!r} outside [0, 1]")
        expected = self.final_conditional * math.prod(self.parallel_probs)
        if abs(expected - self.joint_prob) > 1e-12:
            raise ValueError(
                f"joint_prob {self.joint_prob!r} != final_conditional * prod(parallel_probs) = {expected!r}"
            )

    @classmethod
    def from_parallel(cls, parallel_probs: Sequence[float], final_conditional: float) -> TwoPhaseSpec:
        return cls(tuple(parallel_probs), final_conditional,
                   final_conditional * math.prod(parallel_probs))


def _probs(spec: TwoPhaseSpec | Sequence[float]) -> tuple[float, ...]:
    return spec.parallel_probs if isinstance(spec, TwoPhaseSpec) else tuple(spec)


def parallel_exact_at(spec: TwoPhaseSpec | Sequence[float], q: int) -> float:
    """Probability that the slowest parallel activation first succeeds at attempt ``q``.

    This is ``prod_i F_i(q) - prod_i F_i(q-1)`` with ``F_i(q) = 1 - (1-p_i)^q``,
    summed in telescoped form so that every term is nonnegative.
    """
    if q <= 0:
        return 0.0
    probs = _probs(spec)
    total = 0.0
    for i, p in enumerate(probs):
        term = p * (1.0 - p) ** (q - 1)
        for j, pj in enumerate(probs):
            if j < i:
                term *= 1.0 - (1.0 - pj) ** (q - 1)
            elif j > i:
                term *= 1.0 - (1.0 - pj) ** q
        total += term
    return total


def _cycle_not_done(probs: Sequence[float], t: int) -> float:
    # P(cycle length > t) = 1 - prod_i F_i(t - 1), without cancellation
    log_cdf = 0.0
    for p in probs:
        miss = (1.0 - p) ** (t - 1)
        if miss >= 1.0:
            return 1.0
        log_cdf += math.log1p(-miss)
    return -math.expm1(log_cdf)


@dataclass(frozen=True)
class CompletionCurve:
    """Per-tick completion probabilities for ``t = 1 .. t_max``.

    ``survival_renewal`` and ``survival_nondist`` are ``1 - p_m_renewal`` and
    ``1 - P_nondist`` computed without cancellation, for comparisons deep in
    the tail where both probabilities round to 1.
    """

    t: np.ndarray
    p_e_paper: np.ndarray
    p_e_renewal: np.ndarray
    p_m_paper: np.ndarray
    p_m_renewal: np.ndarray
    P_nondist: np.ndarray
    survival_renewal: np.ndarray
    survival_nondist: np.ndarray

    def __len__(self) -> int:
        return len(self.t)


def partition_weights(weights: Sequence[float], k_max: int) -> np.ndarray:
    """``W[k] = sum over unordered partitions v of k of prod_{u in v} weights[u]``.

    ``weights[u]`` is the weight of a part of size ``u`` (index 0 unused).
    Computed as the coefficients of ``prod_u 1 / (1 - weights[u] x^u)``.
    """
    w = np.zeros(k_max + 1)
    w[0] = 1.0
    for u in range(1, k_max + 1):
        wu = weights[u]
        if wu == 0.0:
            continue
        for k in range(u, k_max + 1):
            w[k] += wu * w[k - u]
    return w


def completion_curve(spec: TwoPhaseSpec, t_max: int) -> CompletionCurve:
    if not 0 <= t_max <= MAX_T:
        raise ValueError(f"t_max must lie in 0..{MAX_T}, got {t_max}")
    probs, p_final = spec.parallel_probs, spec.final_conditional
    # cycle of length q: parallel phase done at q - 1, closing attempt at q
    arrow = np.zeros(t_max + 1)
    bar = np.zeros(t_max + 1)
    for q in range(1, t_max + 1):
        done = parallel_exact_at(probs, q - 1)
        arrow[q] = done * p_final
        bar[q] = done * (1.0 - p_final)

    weights = partition_weights(bar, t_max)
    e_paper = np.zeros(t_max + 1)
    e_renewal = np.zeros(t_max + 1)
    surv = np.zeros(t_max + 1)
    surv[0] = 1.0
    for t in range(1, t_max + 1):
        e_paper[t] = sum(arrow[q] * weights[t - q] for q in range(2, t + 1))
        e_renewal[t] = arrow[t] + sum(bar[u] * e_renewal[t - u] for u in range(1, t))
        surv[t] = _cycle_not_done(probs, t) + sum(bar[u] * surv[t - u] for u in range(1, t + 1))

    t = np.arange(1, t_max + 1)
    log_miss = math.log1p(-spec.joint_prob) if spec.joint_prob < 1.0 else -math.inf
    survival_nondist = np.exp(t * log_miss) if t_max else np.zeros(0)
    return CompletionCurve(
        t=t,
        p_e_paper=e_paper[1:],
        p_e_renewal=e_renewal[1:],
        p_m_paper=np.cumsum(e_paper[1:]),
        p_m_renewal=np.cumsum(e_renewal[1:]),
        P_nondist=1.0 - (1.0 - spec.joint_prob) ** t,
        survival_renewal=surv[1:],
        survival_nondist=survival_nondist,
    )


def _branch_mass(graph: FactorGraph, fid: str) -> float:
    f = graph.function(fid)
    probs = [graph.variable(q).prior_probs for q in f.scope]
    mass = 0.0
    for k, w in enumerate(f.weights):
        m = float(w)
        for j, (p0, p1) in enumerate(probs):
            m *= p1 if (k >> j) & 1 else p0
        mass += m
    return mass


def spec_from_graph(graph: FactorGraph, phases: Sequence[Sequence[str]] | None = None) -> TwoPhaseSpec:
    """Derive the two-phase parameters of a phased graph from its priors."""
    phases = [tuple(p) for p in (phases if phases is not None else graph.schedule.phases)]
    if len(phases) != 2 or len(phases[1]) != 1:
        raise ValueError("need two phases, the second holding exactly one function")
    scopes = [set(graph.function(fid).scope) for fid in phases[0]]
    for i, a in enumerate(scopes):
        for b in scopes[i + 1:]:
            if a & b:
                raise ValueError("parallel-phase functions must have disjoint scopes")
    probs = tuple(_branch_mass(graph, fid) for fid in phases[0])
    denom = math.prod(probs)
    if denom < 1e-15:
        raise ContradictoryGraphError("a parallel-phase function can never succeed")
    joint = brute_force_posterior(graph).p_total if graph.functions else 1.0
    p_final = float(min(joint / denom, 1.0))
    return TwoPhaseSpec(probs, p_final, p_final * denom)


@dataclass(frozen=True)
class EmpiricalCurve:
    t: np.ndarray
    counts: np.ndarray
    p_e: np.ndarray
    p_m: np.ndarray
    stderr: np.ndarray
    trials: int


def monte_carlo_completion(
    graph: FactorGraph,
    t_max: int,
    trials: int,
    seed: int = 0,
    *,
    schedule: ScheduleSpec | None = None,
    workers: int = 1,
) -> EmpiricalCurve:
    """First-completion tick distribution from sampled engine runs."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if schedule is not None:
        graph = FactorGraph(graph.variables, graph.functions, schedule)
    results = run_trials(graph, trials, seed, max_ticks=t_max, workers=workers)
    counts = np.zeros(t_max + 1, dtype=np.int64)
    for completed, ticks in results:
        if completed:
            counts[ticks] += 1
    counts = counts[1:]
    p_e = counts / trials
    p_m = np.cumsum(counts) / trials
    return EmpiricalCurve(
        t=np.arange(1, t_max + 1),
        counts=counts,
        p_e=p_e,
        p_m=p_m,
        stderr=np.sqrt(p_m * (1.0 - p_m) / trials),
        trials=trials,
    )


def preset_priors(graph: FactorGraph, w2: float, u2: float | None = None,
                  uvars: Sequence[str] = ("x0",)) -> FactorGraph:
    """Every variable at classical prior ``(w2, 1 - w2)``, except ``uvars`` at ``(u2, 1 - u2)``."""
    priors = {vid: (w2, 1.0 - w2) for vid in graph.variable_ids}
    if u2 is not None:
        for vid in uvars:
            if vid not in priors:
                raise ValueError(f"unknown variable {vid!r}")
            priors[vid] = (u2, 1.0 - u2)
    return graph.with_priors(priors)
