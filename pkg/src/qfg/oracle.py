"""Exhaustive-enumeration ground truth for small factor graphs.

Deliberately independent of the state-vector kernel: each assignment's mass
is computed directly as a product of classical prior probabilities and
squared diagonal entries.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .errors import ContradictoryGraphError, ResourceLimitError
from .factor_graph import FactorGraph

MAX_VARIABLES = 20
ML_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class PosteriorTable:
    """Posterior over assignments, keyed by bit string (first variable first)."""

    variable_ids: tuple[str, ...]
    mass: dict[str, float]
    p_total: float
    distribution: dict[str, float]
    ml_set: frozenset[str]

    def support(self, tol: float = 0.0) -> dict[str, float]:
        return {a: p for a, p in self.distribution.items() if p > tol}

    def marginal(self, vid: str) -> tuple[float, float]:
        i = self.variable_ids.index(vid)
        p1 = sum(p for a, p in self.distribution.items() if a[i] == "1")
        return 1.0 - p1, p1


def brute_force_posterior(graph: FactorGraph) -> PosteriorTable:
    ids = graph.variable_ids
    n = len(ids)
    if n > MAX_VARIABLES:
        raise ResourceLimitError(f"enumeration limited to {MAX_VARIABLES} variables, got {n}")
    priors = [tuple(abs(a) ** 2 for a in v.prior_amps) for v in graph.variables]
    index = {vid: i for i, vid in enumerate(ids)}
    factors = [
        ([index[q] for q in f.scope], [abs(e) ** 2 for e in f.f_diag.entries])
        for f in graph.functions
    ]
    mass: dict[str, float] = {}
    for bits in itertools.product((0, 1), repeat=n):
        m = 1.0
        for i, b in enumerate(bits):
            m *= priors[i][b]
        for scope, weights in factors:
            k = sum(bits[pos] << j for j, pos in enumerate(scope))
            m *= weights[k]
        mass["".join(map(str, bits))] = m
    total = sum(mass.values())
    if total < 1e-300:
        raise ContradictoryGraphError("every assignment has zero mass")
    distribution = {a: m / total for a, m in mass.items()}
    best = max(distribution.values())
    # relative slack so that mathematically tied assignments stay tied
    ml = frozenset(a for a, p in distribution.items() if p >= best * (1 - ML_TIE_RTOL))
    return PosteriorTable(ids, mass, total, distribution, ml)
