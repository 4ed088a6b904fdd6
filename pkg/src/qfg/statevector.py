"""Dense state-vector kernel.

Bit order is little-endian throughout: in a state over ``qubit_ids``, basis
index ``v`` holds ``qubit_ids[i]`` in bit ``i``, so the first listed qubit
varies fastest.  Outcomes and assignments are written as bit strings in
qubit order (first qubit first), e.g. index 11 over ``(x0, x1, x2, x3)``
is ``"1101"``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ImpossibleOutcomeError, ResourceLimitError

MAX_QUBITS = 24
NORM_TOL = 1e-9
ZERO_PROB = 1e-15


def bitstring(index: int, n: int) -> str:
    """Render basis index ``index`` of an ``n``-qubit register, first qubit first."""
    return "".join("1" if (index >> i) & 1 else "0" for i in range(n))


def parse_bitstring(bits: str | Sequence[int]) -> int:
    """Inverse of :func:`bitstring`; also accepts a sequence of 0/1 ints."""
    value = 0
    for i, b in enumerate(bits):
        b = int(b)
        if b not in (0, 1):
            raise ValueError(f"not a bit: {b!r}")
        value |= b << i
    return value


@lru_cache(maxsize=4096)
def _scope_index(n: int, positions: tuple[int, ...]) -> np.ndarray:
    # k(v) for every global index v; positions[j] becomes bit j of k
    v = np.arange(1 << n)
    k = np.zeros(1 << n, dtype=np.intp)
    for j, pos in enumerate(positions):
        k |= ((v >> pos) & 1) << j
    k.flags.writeable = False
    return k


@lru_cache(maxsize=4096)
def _deposit(positions: tuple[int, ...]) -> np.ndarray:
    k = np.arange(1 << len(positions))
    out = np.zeros_like(k)
    for j, pos in enumerate(positions):
        out |= ((k >> j) & 1) << pos
    out.flags.writeable = False
    return out


class StateVector:
    """Immutable complex amplitude vector over an ordered list of qubits.

    Operations never mutate a state; they return new instances.  The
    amplitude array is exposed read-only.
    """

    __slots__ = ("qubit_ids", "amps")

    def __init__(self, qubit_ids: Sequence[str], amps) -> None:
        qubit_ids = tuple(qubit_ids)
        if len(set(qubit_ids)) != len(qubit_ids):
            raise ValueError(f"duplicate qubit ids in {qubit_ids}")
        if len(qubit_ids) > MAX_QUBITS:
            raise ResourceLimitError(
                f"{len(qubit_ids)} qubits exceeds the dense cap of {MAX_QUBITS}"
            )
        amps = np.array(amps, dtype=np.complex128).reshape(-1)
        if amps.shape[0] != 1 << len(qubit_ids):
            raise ValueError(
                f"{len(qubit_ids)} qubits need {1 << len(qubit_ids)} amplitudes, "
                f"got {amps.shape[0]}"
            )
        amps.flags.writeable = False
        self.qubit_ids = qubit_ids
        self.amps = amps

    @classmethod
    def _wrap(cls, qubit_ids: tuple[str, ...], amps: np.ndarray) -> StateVector:
        # trusted constructor for internal hot paths
        self = object.__new__(cls)
        amps.flags.writeable = False
        self.qubit_ids = qubit_ids
        self.amps = amps
        return self

    @classmethod
    def empty(cls) -> StateVector:
        return cls((), [1.0])

    @classmethod
    def qubit(cls, qubit_id: str, alpha: complex, beta: complex) -> StateVector:
        return cls((qubit_id,), [alpha, beta])

    @property
    def n_qubits(self) -> int:
        return len(self.qubit_ids)

    def __len__(self) -> int:
        return self.amps.shape[0]

    def __repr__(self) -> str:
        return f"StateVector({list(self.qubit_ids)}, {np.round(self.amps, 6).tolist()})"

    def position(self, qubit_id: str) -> int:
        try:
            return self.qubit_ids.index(qubit_id)
        except ValueError:
            raise ValueError(f"qubit {qubit_id!r} not in state {self.qubit_ids}") from None

    def positions(self, qubit_ids: Sequence[str]) -> tuple[int, ...]:
        pos = tuple(self.position(q) for q in qubit_ids)
        if len(set(pos)) != len(pos):
            raise ValueError(f"repeated qubit in scope {list(qubit_ids)}")
        return pos

    def probabilities(self) -> np.ndarray:
        return self.amps.real**2 + self.amps.imag**2

    def norm_squared(self) -> float:
        return float(self.probabilities().sum())

    def normalized(self) -> StateVector:
        nsq = self.norm_squared()
        if nsq < ZERO_PROB:
            raise ImpossibleOutcomeError("cannot normalize a zero vector")
        return StateVector._wrap(self.qubit_ids, self.amps / np.sqrt(nsq))

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm_squared() - 1.0) <= tol

    def as_dict(self, tol: float = 0.0) -> dict[str, complex]:
        """Nonzero amplitudes keyed by bit string."""
        n = self.n_qubits
        return {
            bitstring(v, n): complex(a)
            for v, a in enumerate(self.amps)
            if abs(a) > tol
        }


@dataclass(frozen=True, eq=False)
class DiagonalOperator:
    """Diagonal of a (sub-)unitary operator; entry ``k`` indexes the scope bits."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=np.complex128).reshape(-1)
        size = entries.shape[0]
        if size < 1 or size & (size - 1):
            raise ValueError(f"diagonal length must be a power of two, got {size}")
        if np.any(np.abs(entries) > 1 + 1e-12):
            bad = int(np.argmax(np.abs(entries)))
            raise ValueError(f"diagonal entry {bad} has magnitude {abs(entries[bad]):.6g} > 1")
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    @property
    def arity(self) -> int:
        return self.entries.shape[0].bit_length() - 1

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DiagonalOperator):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    def __hash__(self) -> int:
        return hash(self.entries.tobytes())

    def __repr__(self) -> str:
        return f"DiagonalOperator({np.round(self.entries, 6).tolist()})"


@dataclass(frozen=True, eq=False)
class PermutationOperator:
    """Permutation matrix stored as ``mapping[out] = in``."""

    mapping: np.ndarray

    def __post_init__(self) -> None:
        mapping = np.array(self.mapping, dtype=np.intp).reshape(-1)
        size = mapping.shape[0]
        if size < 1 or size & (size - 1):
            raise ValueError(f"permutation size must be a power of two, got {size}")
        if not np.array_equal(np.sort(mapping), np.arange(size)):
            raise ValueError("mapping is not a bijection")
        mapping.flags.writeable = False
        object.__setattr__(self, "mapping", mapping)

    @property
    def arity(self) -> int:
        return self.mapping.shape[0].bit_length() - 1

    def matrix(self) -> np.ndarray:
        size = self.mapping.shape[0]
        m = np.zeros((size, size), dtype=int)
        m[np.arange(size), self.mapping] = 1
        return m

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PermutationOperator):
            return NotImplemented
        return np.array_equal(self.mapping, other.mapping)

    def __hash__(self) -> int:
        return hash(self.mapping.tobytes())


class Measurement(NamedTuple):
    outcome: str
    probability: float
    state: StateVector


def tensor_product(a: StateVector, b: StateVector) -> StateVector:
    """``a ⊗ b`` with ``a``'s qubits in the low bits."""
    overlap = set(a.qubit_ids) & set(b.qubit_ids)
    if overlap:
        raise ValueError(f"overlapping qubit ids: {sorted(overlap)}")
    n = a.n_qubits + b.n_qubits
    if n > MAX_QUBITS:
        raise ResourceLimitError(f"{n} qubits exceeds the dense cap of {MAX_QUBITS}")
    return StateVector._wrap(a.qubit_ids + b.qubit_ids, np.outer(b.amps, a.amps).ravel())


def product_state(qubit_ids: Sequence[str], pairs: Sequence[tuple[complex, complex]]) -> StateVector:
    """Tensor product of single-qubit states, first qubit in bit 0."""
    if len(qubit_ids) != len(pairs):
        raise ValueError("need one amplitude pair per qubit")
    state = StateVector.empty()
    for q, (alpha, beta) in zip(qubit_ids, pairs):
        state = tensor_product(state, StateVector.qubit(q, alpha, beta))
    return state


def apply_diagonal(state: StateVector, op: DiagonalOperator, scope: Sequence[str]) -> StateVector:
    """Multiply each amplitude by the diagonal entry selected by its scope bits.

    The result is generally not normalized.
    """
    if op.arity != len(scope):
        raise ValueError(f"operator arity {op.arity} does not match scope of size {len(scope)}")
    k = _scope_index(state.n_qubits, state.positions(scope))
    return StateVector._wrap(state.qubit_ids, state.amps * op.entries[k])


def apply_permutation(state: StateVector, op: PermutationOperator, scope: Sequence[str]) -> StateVector:
    if op.arity != len(scope):
        raise ValueError(f"operator arity {op.arity} does not match scope of size {len(scope)}")
    positions = state.positions(scope)
    k = _scope_index(state.n_qubits, positions)
    deposit = _deposit(positions)
    mask = int(deposit[-1])
    v = np.arange(len(state))
    source = (v & ~mask) | deposit[op.mapping[k]]
    return StateVector._wrap(state.qubit_ids, state.amps[source])


def outcome_distribution(state: StateVector, targets: Sequence[str]) -> dict[str, float]:
    """Born-rule distribution of measuring ``targets``, keyed by bit string."""
    k = _scope_index(state.n_qubits, state.positions(targets))
    dist = np.bincount(k, weights=state.probabilities(), minlength=1 << len(targets))
    return {bitstring(o, len(targets)): float(p) for o, p in enumerate(dist)}


def measure_subset(
    state: StateVector,
    targets: Sequence[str],
    *,
    rng: np.random.Generator | None = None,
    outcome: str | Sequence[int] | None = None,
) -> Measurement:
    """Projectively measure ``targets``, either sampled with ``rng`` or forced to ``outcome``.

    Measured qubits are removed from the returned state, which is the
    renormalized compatible sub-vector.
    """
    positions = state.positions(targets)
    m = len(targets)
    k = _scope_index(state.n_qubits, positions)
    dist = np.bincount(k, weights=state.probabilities(), minlength=1 << m)
    if outcome is not None:
        o = parse_bitstring(outcome)
        if len(outcome) != m:
            raise ValueError(f"outcome {outcome!r} does not cover {m} targets")
        if dist[o] < ZERO_PROB:
            raise ImpossibleOutcomeError(
                f"outcome {bitstring(o, m)} on {list(targets)} has probability {dist[o]:.3g}"
            )
    else:
        if rng is None:
            raise ValueError("sampling needs an rng (or pass outcome= to force)")
        cdf = np.cumsum(dist)
        o = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        o = min(o, (1 << m) - 1)
        while dist[o] == 0.0:  # land on a supported outcome despite float edges
            o -= 1
    p = float(dist[o])
    keep = tuple(q for q in state.qubit_ids if q not in targets)
    collapsed = state.amps[k == o] / np.sqrt(p)
    return Measurement(bitstring(o, m), p, StateVector._wrap(keep, collapsed))


def reorder(state: StateVector, qubit_ids: Sequence[str]) -> StateVector:
    """Same state with its qubits listed in a different order."""
    if sorted(qubit_ids) != sorted(state.qubit_ids):
        raise ValueError(f"{list(qubit_ids)} is not a permutation of {list(state.qubit_ids)}")
    # new bit i holds old qubit at position src[i]
    src = state.positions(qubit_ids)
    v = np.arange(len(state))
    old = np.zeros_like(v)
    for i, pos in enumerate(src):
        old |= ((v >> i) & 1) << pos
    return StateVector._wrap(tuple(qubit_ids), state.amps[old])


def marginal(state: StateVector, target: str) -> tuple[float, float]:
    """Probabilities of ``target`` reading 0 and 1."""
    bit = (np.arange(len(state)) >> state.position(target)) & 1
    probs = state.probabilities()
    return float(probs[bit == 0].sum()), float(probs[bit == 1].sum())
