"""Dense state-vector simulation for small qubit counts.

Index ``i`` of an amplitude vector encodes the bitstring with qubit 0 as the
most significant bit, so ``|q0 q1 ... q_{N-1}>`` maps to
``sum_k q_k 2**(N-1-k)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset, normalize_basis, basis_codes
from .errors import CapacityError, DimensionError
from .pauli import Observable, PauliString, ConnectedTable

log = logging.getLogger(__name__)

MAX_QUBITS = 12

SQRT_HALF = 1.0 / np.sqrt(2.0)
# Rows are <outcome| expressed in the z basis; outcome 0 <-> eigenvalue +1.
ROTATIONS = {
    "Z": np.eye(2, dtype=np.complex128),
    "X": SQRT_HALF * np.array([[1, 1], [1, -1]], dtype=np.complex128),
    "Y": SQRT_HALF * np.array([[1, -1j], [1, 1j]], dtype=np.complex128),
}
# same matrices indexed by basis code (0=Z, 1=X, 2=Y)
ROTATION_STACK = np.stack([ROTATIONS["Z"], ROTATIONS["X"], ROTATIONS["Y"]])


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    n_qubits: int

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (2**self.n_qubits,):
            raise DimensionError(
                f"expected {2**self.n_qubits} amplitudes for {self.n_qubits} qubits, got {amps.shape}"
            )
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_unnormalized(cls, amps) -> "StateVector":
        amps = np.asarray(amps, dtype=np.complex128)
        n = int(round(np.log2(amps.size)))
        return cls(amps / np.linalg.norm(amps), n)

    @classmethod
    def basis_state(cls, bits: Sequence[int]) -> "StateVector":
        amps = np.zeros(2 ** len(bits), dtype=np.complex128)
        amps[bits_to_index(bits)] = 1.0
        return cls(amps, len(bits))

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def bits_to_index(bits: Sequence[int]) -> int:
    idx = 0
    for b in bits:
        idx = (idx << 1) | int(b)
    return idx


def all_bitstrings(n: int) -> np.ndarray:
    """All ``2**n`` bitstrings as a ``(2**n, n)`` uint8 array in index order."""
    idx = np.arange(2**n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8)


def _check_cap(n: int, cap: int):
    if n > cap:
        raise CapacityError(f"{n} qubits exceeds dense simulation cap of {cap}")


def dense_matrix(obs: Observable, cap: int = MAX_QUBITS) -> np.ndarray:
    """Dense ``2**N x 2**N`` matrix of a Pauli-sum observable."""
    n = obs.n_qubits
    _check_cap(n, cap)
    rows = all_bitstrings(n)
    table = ConnectedTable.from_observable(obs)
    elems = table.elements(rows)
    weights = 1 << np.arange(n - 1, -1, -1, dtype=np.int64)
    mat = np.zeros((2**n, 2**n), dtype=np.complex128)
    row_idx = np.arange(2**n)
    for g, mask in enumerate(table.masks):
        cols = (rows ^ mask).astype(np.int64) @ weights
        mat[row_idx, cols] += elems[:, g]
    return mat


def ground_state(obs: Observable, cap: int = MAX_QUBITS) -> tuple[float, StateVector]:
    """Lowest eigenpair; the first non-negligible amplitude is made real positive."""
    h = dense_matrix(obs, cap)
    evals, evecs = np.linalg.eigh(h)
    if len(evals) > 1 and evals[1] - evals[0] < 1e-10:
        log.warning("ground state is degenerate (gap %.3e)", evals[1] - evals[0])
    vec = evecs[:, 0]
    lead = np.flatnonzero(np.abs(vec) > 1e-12)[0]
    vec = vec * (abs(vec[lead]) / vec[lead])
    vec = vec / np.linalg.norm(vec)
    return float(evals[0]), StateVector(vec, obs.n_qubits)


def _check_dims(state: StateVector, n: int):
    if state.n_qubits != n:
        raise DimensionError(f"state has {state.n_qubits} qubits, operator has {n}")


def expectation(state: StateVector, obs: Observable) -> float:
    _check_dims(state, obs.n_qubits)
    psi = state.amplitudes
    val = np.vdot(psi, dense_matrix(obs, cap=max(MAX_QUBITS, obs.n_qubits)) @ psi)
    if abs(val.imag) > 1e-10:
        raise ValueError(f"expectation has imaginary part {val.imag!r}")
    return float(val.real)


def pauli_expectation(state: StateVector, p: PauliString) -> float:
    return expectation(state, Observable(((1.0, p),), len(p)))


def pauli_variance_exact(state: StateVector, p: PauliString) -> float:
    """Single-shot variance ``1 - <P>**2`` of a Pauli string on ``state``."""
    ev = pauli_expectation(state, p)
    return float(min(1.0, max(0.0, 1.0 - ev * ev)))


def rotate_to_basis(state: StateVector, basis: str) -> StateVector:
    """Amplitudes of ``state`` in the product basis named by ``basis`` (e.g. ``"XZY"``)."""
    basis = normalize_basis(basis)
    n = state.n_qubits
    if len(basis) != n:
        raise DimensionError(f"basis {basis!r} has {len(basis)} sites, state has {n} qubits")
    psi = state.amplitudes.reshape((2,) * n)
    for q, b in enumerate(basis):
        if b == "Z":
            continue
        psi = np.moveaxis(np.tensordot(ROTATIONS[b], psi, axes=([1], [q])), 0, q)
    return StateVector(psi.reshape(-1), n)


def _basis_seed(seed, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


def sample_measurements(
    state: StateVector,
    bases: Sequence[str],
    shots_per_basis: int,
    seed: int,
    cap: int = MAX_QUBITS,
) -> Dataset:
    """Draw ``shots_per_basis`` Born-rule outcomes for every basis in ``bases``.

    Basis ``i`` uses its own stream seeded with ``(seed, i)``.
    """
    if shots_per_basis < 1:
        raise ValueError("shots_per_basis must be >= 1")
    _check_cap(state.n_qubits, cap)
    n = state.n_qubits
    strings = all_bitstrings(n)
    all_bases, all_bits = [], []
    for i, b in enumerate(bases):
        b = normalize_basis(b)
        probs = rotate_to_basis(state, b).probabilities
        probs = probs / probs.sum()
        idx = _basis_seed(seed, i).choice(len(probs), size=shots_per_basis, p=probs)
        all_bits.append(strings[idx])
        all_bases.append(np.repeat(basis_codes(b)[None, :], shots_per_basis, axis=0))
    return Dataset(n, np.concatenate(all_bases), np.concatenate(all_bits))


def measurement_basis(p: PauliString) -> str:
    """Basis that measures ``p``; identity sites are read out in z."""
    return "".join("Z" if c == "I" else c for c in p.ops)


def sample_pauli_dataset(state: StateVector, obs: Observable, n_measurements: int, seed: int) -> Dataset:
    """Records whose bases are drawn uniformly from the observable's measured terms.

    Identity terms carry no information and are not measured. Every record
    gets an independent basis choice and outcome.
    """
    measured = [p for p in obs.strings if not p.is_identity]
    if not measured:
        raise ValueError("observable has no non-identity term to measure")
    if n_measurements < 1:
        raise ValueError("number of measurements must be >= 1")
    rng = np.random.default_rng([int(seed), 0x6261736573])
    choice = rng.integers(len(measured), size=n_measurements)
    n = state.n_qubits
    strings = all_bitstrings(n)
    bases = np.empty((n_measurements, n), dtype=np.int8)
    bits = np.empty((n_measurements, n), dtype=np.uint8)
    for k, p in enumerate(measured):
        rows = np.flatnonzero(choice == k)
        if rows.size == 0:
            continue
        b = measurement_basis(p)
        probs = rotate_to_basis(state, b).probabilities
        probs = probs / probs.sum()
        idx = rng.choice(len(probs), size=rows.size, p=probs)
        bases[rows] = basis_codes(b)
        bits[rows] = strings[idx]
    return Dataset(n, bases, bits)


def sample_per_term(state: StateVector, obs: Observable, shots: int, seed: int) -> dict[int, Dataset]:
    """``shots`` records for every measured term, keyed by term index.

    Terms sharing a basis (``ZI`` and ``IZ``) still get their own records, so
    the result is grouped by construction rather than by basis matching.
    """
    measured = [k for k, p in enumerate(obs.strings) if not p.is_identity]
    ds = sample_measurements(state, [measurement_basis(obs.strings[k]) for k in measured], shots, seed)
    groups = {k: ds.take(range(0, 0)) for k in range(len(obs))}
    for j, k in enumerate(measured):
        groups[k] = ds.take(range(j * shots, (j + 1) * shots))
    return groups
