"""Classical sum-product message passing on the same factor graphs.

Function weights are the squared magnitudes of the quantum diagonals.  The
schedule is flooding (all variable-to-function messages, then all
function-to-variable messages), starting from uniform messages, with every
message renormalized and recomputed from scratch each iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .factor_graph import FactorGraph

FLOOR = 1e-300


@dataclass
class BeliefState:
    variable_ids: tuple[str, ...]
    beliefs: dict[str, np.ndarray]
    var_to_fn: dict[tuple[str, str], np.ndarray]
    fn_to_var: dict[tuple[str, str], np.ndarray]
    iterations: int
    converged: bool
    residual: float

    def belief(self, vid: str) -> tuple[float, float]:
        p0, p1 = self.beliefs[vid]
        return float(p0), float(p1)


def _normalize(m: np.ndarray) -> np.ndarray:
    m = np.maximum(m, FLOOR)
    return m / m.sum()


def run_spa(graph: FactorGraph, max_iters: int = 200, tol: float = 1e-12) -> BeliefState:
    priors = {v.id: np.array(v.prior_probs) for v in graph.variables}
    tables = {}
    for f in graph.functions:
        # axis j of the table is scope[j]; scope[0] is bit 0 of the diagonal index
        m = len(f.scope)
        tables[f.id] = f.weights.reshape([2] * m).transpose(range(m - 1, -1, -1))
    edges = [(f.id, q) for f in graph.functions for q in f.scope]
    v2f = {e: np.full(2, 0.5) for e in edges}
    f2v = {e: np.full(2, 0.5) for e in edges}
    incoming: dict[str, list[str]] = {v.id: [] for v in graph.variables}
    for f in graph.functions:
        for q in f.scope:
            incoming[q].append(f.id)

    converged = False
    residual = float("inf")
    it = 0
    for it in range(1, max_iters + 1):
        new_v2f = {}
        for fid, q in edges:
            m = priors[q].copy()
            for other in incoming[q]:
                if other != fid:
                    m = m * f2v[(other, q)]
            new_v2f[(fid, q)] = _normalize(m)
        new_f2v = {}
        for f in graph.functions:
            table = tables[f.id]
            for j, q in enumerate(f.scope):
                t = table
                # contract every other scope axis against its incoming message
                for i in reversed(range(len(f.scope))):
                    if i != j:
                        t = np.tensordot(t, new_v2f[(f.id, f.scope[i])], axes=([i], [0]))
                new_f2v[(f.id, q)] = _normalize(np.asarray(t, dtype=float).reshape(2))
        residual = max(
            (float(np.max(np.abs(new_v2f[e] - v2f[e]))) for e in edges), default=0.0
        )
        residual = max(
            [residual] + [float(np.max(np.abs(new_f2v[e] - f2v[e]))) for e in edges]
        )
        v2f, f2v = new_v2f, new_f2v
        if residual < tol:
            converged = True
            break

    beliefs = {}
    for v in graph.variables:
        m = priors[v.id].copy()
        for fid in incoming[v.id]:
            m = m * f2v[(fid, v.id)]
        beliefs[v.id] = _normalize(m)
    return BeliefState(graph.variable_ids, beliefs, v2f, f2v, it, converged, residual)


def hard_decision(state: BeliefState) -> str:
    """Per-variable argmax as a bit string; exact ties resolve to 0."""
    bits = []
    for vid in state.variable_ids:
        p0, p1 = state.beliefs[vid]
        bits.append("1" if p1 - p0 >= 1e-12 else "0")
    return "".join(bits)
