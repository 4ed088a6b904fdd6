"""One function node, two qubits: what a single QPA activation does.

The even-parity sieve keeps only the 00 and 11 branches of the prior
product state.  Success leaves the entangled, renormalized f-branch;
failure would reset both qubits to their priors.
"""

from __future__ import annotations

import numpy as np

from qfg.engine import EntanglementRegistry, activate_function
from qfg.factor_graph import load_preset
from qfg.statevector import measure_subset, outcome_distribution, reorder

for name in ("fig1", "fig1-alt"):
    graph = load_preset(name)
    reg = EntanglementRegistry(graph)
    out = activate_function(reg, graph.function("f"), force_success=True)
    state = reorder(reg.block_of("x0"), graph.variable_ids)
    print(f"{name}: priors {[v.prior_probs for v in graph.variables]}")
    print(f"  success probability p_f = {out.p_success:.6f}")
    print(f"  post-state probabilities {dict((k, round(v, 6)) for k, v in outcome_distribution(state, state.qubit_ids).items())}")

    rng = np.random.default_rng(0)
    reads = [measure_subset(state, state.qubit_ids, rng=rng).outcome for _ in range(10_000)]
    values, counts = np.unique(reads, return_counts=True)
    print(f"  10k sampled reads {dict(zip(values.tolist(), (counts / 1e4).tolist()))}")
