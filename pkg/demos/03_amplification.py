"""ML amplification by element-wise squaring, and the analytic gamma curves.

Writes ``gamma_curves.csv`` (alpha^2 from 0.5 to 0.98 in steps of 0.02,
k = 0..10) into the output directory for plotting.
"""

from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np

from qfg.amplify import amplify_step, expected_copies, gamma_profile
from qfg.cli import main
from qfg.statevector import StateVector, outcome_distribution

out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
out_dir.mkdir(parents=True, exist_ok=True)

s0 = StateVector(["x0", "x1"], np.array([1, 0, 0, math.sqrt(2)]) / math.sqrt(3))
state = s0
for k in range(4):
    read = outcome_distribution(state, state.qubit_ids)["11"]
    print(f"level {k}: P(read 11) = {read:.6f}, mean preparations consumed {expected_copies(s0, k):.4f}")
    p, state = amplify_step(state)
    print(f"  next squaring succeeds with probability {p:.6f}")

prof = gamma_profile(0.62, 3)
print(f"alpha^2 = 0.62, k = 3: gamma = {prof[3].gamma_k:.4f}, P_M = {prof[3].p_Mk:.4f}")

target = out_dir / "gamma_curves.csv"
main(["amplify", "--alpha2", "0.5:0.98:0.02", "--k", "10", "--out", str(target), "--force"])
