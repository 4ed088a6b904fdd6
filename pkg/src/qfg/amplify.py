"""Maximum-likelihood amplification by element-wise squaring.

Two copies of a prepared state are permuted so that the diagonal of their
joint amplitude table lands where the second copy reads all zeros; measuring
the second copy as zeros then leaves the first copy in the normalized
element-square of the original state.  Repeating ``k`` times yields the
``2^k``-th element power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ImpossibleOutcomeError
from .statevector import (
    ZERO_PROB,
    PermutationOperator,
    StateVector,
    apply_permutation,
    measure_subset,
    tensor_product,
)

COPY_SUFFIX = "'"


def diag_extraction_perm(dim: int) -> PermutationOperator:
    """Permutation on ``dim²`` joint indices with ``out(j, 0) = in(j, j)``.

    Joint index ``(a, b)`` is ``a + dim * b``, the first register in the low
    bits.  Outputs not of the form ``(j, 0)`` take the unused inputs in
    ascending order.
    """
    if not isinstance(dim, (int, np.integer)) or dim < 2 or dim & (dim - 1):
        raise ValueError(f"dim must be a power of two >= 2, got {dim!r}")
    size = dim * dim
    mapping = np.empty(size, dtype=np.intp)
    diag = np.arange(dim) * (dim + 1)
    mapping[:dim] = diag
    mapping[dim:] = np.setdiff1d(np.arange(size), diag)
    return PermutationOperator(mapping)


def _copy_ids(state: StateVector) -> tuple[str, ...]:
    copy = tuple(q + COPY_SUFFIX for q in state.qubit_ids)
    if set(copy) & set(state.qubit_ids):
        raise ValueError("copy qubit ids collide with the state's ids")
    return copy


def amplify_step(state: StateVector) -> tuple[float, StateVector]:
    """Square ``state`` element-wise with one global permutation.

    Returns the probability that the second copy reads all zeros and the
    post-selected first copy.
    """
    copy_ids = _copy_ids(state)
    copy = StateVector._wrap(copy_ids, state.amps.copy())
    joint = tensor_product(state, copy)
    joint = apply_permutation(joint, diag_extraction_perm(len(state)), state.qubit_ids + copy_ids)
    return _post_select(joint, copy_ids)


def amplify_step_pairwise(state: StateVector) -> tuple[float, StateVector]:
    """Same squaring, built from the 4x4 permutation on each (qubit, copy) pair."""
    copy_ids = _copy_ids(state)
    joint = tensor_product(state, StateVector._wrap(copy_ids, state.amps.copy()))
    q = diag_extraction_perm(2)
    for orig, dup in zip(state.qubit_ids, copy_ids):
        joint = apply_permutation(joint, q, [orig, dup])
    return _post_select(joint, copy_ids)


def _post_select(joint: StateVector, copy_ids: tuple[str, ...]) -> tuple[float, StateVector]:
    zeros = "0" * len(copy_ids)
    try:
        outcome = measure_subset(joint, copy_ids, outcome=zeros)
    except ImpossibleOutcomeError:
        raise ImpossibleOutcomeError("second copy can never read all zeros") from None
    if outcome.probability < ZERO_PROB:
        raise ImpossibleOutcomeError("amplification success probability is zero")
    return outcome.probability, outcome.state


def sample_amplify_step(state: StateVector, rng: np.random.Generator) -> StateVector | None:
    """One operational squaring: the copy register is measured, not post-selected.

    Returns the amplified first copy when the copy reads all zeros, else ``None``.
    """
    copy_ids = _copy_ids(state)
    joint = tensor_product(state, StateVector._wrap(copy_ids, state.amps.copy()))
    joint = apply_permutation(joint, diag_extraction_perm(len(state)), state.qubit_ids + copy_ids)
    outcome = measure_subset(joint, copy_ids, rng=rng)
    if outcome.outcome != "0" * len(copy_ids):
        return None
    return outcome.state


def amplify(state: StateVector, k: int) -> tuple[list[float], StateVector]:
    """``k`` chained squarings; returns per-level success probabilities and the result."""
    probs = []
    for _ in range(k):
        p, state = amplify_step(state)
        probs.append(p)
    return probs, state


def expected_copies(state: StateVector, k: int) -> float:
    """Mean number of independent preparations of ``state`` consumed to reach level ``k``."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    n = 1.0
    for _ in range(k):
        p, state = amplify_step(state)
        n *= 2.0 / p
    return n


@dataclass(frozen=True)
class AmplificationStep:
    k: int
    gamma_k: float
    p_Mk: float
    p_ak: float
    r_k: float
    expected_copies: float


@dataclass(frozen=True)
class AmplificationProfile:
    alpha_sq: float
    steps: tuple[AmplificationStep, ...]

    def __getitem__(self, k: int) -> AmplificationStep:
        return self.steps[k]


def _log_r(log_a2: float, log_b2: float, k: int) -> float:
    # log(alpha^(2^k) + beta^(2^k)) with alpha^2, beta^2 given as logs
    e = 2.0 ** (k - 1)
    return float(np.logaddexp(e * log_a2, e * log_b2))


def gamma_profile(alpha_sq: float, k_max: int) -> AmplificationProfile:
    """Analytic amplification curve for a single real qubit ``(alpha, beta)``.

    ``gamma_k`` follows the recurrence ``gamma_k = gamma_{k-1}^2 r_{k+1} / r_k^2``
    with ``r_k = alpha^(2^k) + beta^(2^k)``, evaluated in log space so that
    deep levels underflow gracefully.  ``p_ak`` is the success probability of
    the step from level ``k`` to ``k + 1``.
    """
    if not 0.0 <= alpha_sq <= 1.0:
        raise ValueError(f"alpha_sq must lie in [0, 1], got {alpha_sq!r}")
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    with np.errstate(divide="ignore"):
        la = float(np.log(alpha_sq))
        # 1 - alpha_sq is exact for alpha_sq >= 0.5, which keeps alpha_sq = 0.5 symmetric
        lb = float(np.log(1.0 - alpha_sq) if alpha_sq >= 0.5 else np.log1p(-alpha_sq))
    log_gamma = 0.0
    log_n = 0.0
    steps = []
    for k in range(k_max + 1):
        if k > 0:
            log_gamma = 2 * log_gamma + _log_r(la, lb, k + 1) - 2 * _log_r(la, lb, k)
        # alpha^(2^(k+1)) / r_{k+1} as a logistic, exact when alpha^2 = beta^2
        log_ml = -float(np.logaddexp(0.0, 2.0**k * (lb - la))) if la != lb else math.log(0.5)
        log_pa = _log_r(la, lb, k + 2) - 2 * _log_r(la, lb, k + 1)
        steps.append(AmplificationStep(
            k=k,
            gamma_k=math.exp(log_gamma),
            p_Mk=math.exp(log_ml),
            p_ak=math.exp(log_pa),
            r_k=math.exp(_log_r(la, lb, k)),
            expected_copies=math.exp(log_n),
        ))
        log_n += math.log(2.0) - log_pa
    return AmplificationProfile(alpha_sq, tuple(steps))
