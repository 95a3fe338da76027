"""Pauli strings, weighted Pauli-sum observables and their action on basis states.

Bitstrings are sequences of 0/1 integers in the computational (z) basis, with
letter ``i`` of a Pauli word acting on bit ``i``. Outcome bit 0 corresponds to
eigenvalue +1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, ParseError

PAULI_LETTERS = "IXYZ"


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Pauli operators, e.g. ``PauliString("XIZ")``."""

    ops: str

    def __post_init__(self):
        ops = self.ops.upper()
        if not ops:
            raise ValueError("Pauli string must act on at least one qubit")
        bad = [c for c in ops if c not in PAULI_LETTERS]
        if bad:
            raise ValueError(f"invalid Pauli letter {bad[0]!r} in {self.ops!r}")
        object.__setattr__(self, "ops", ops)

    def __len__(self):
        return len(self.ops)

    def __str__(self):
        return self.ops

    @property
    def n_qubits(self) -> int:
        return len(self.ops)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.ops) if c != "I")

    @property
    def is_identity(self) -> bool:
        return not self.support

    @property
    def flip_mask(self) -> np.ndarray:
        """Positions flipped by the operator (X and Y sites) as a uint8 array."""
        return np.array([c in "XY" for c in self.ops], dtype=np.uint8)


@dataclass(frozen=True)
class Observable:
    """Real-weighted sum of Pauli strings on a fixed number of qubits.

    Use :meth:`from_terms` to build one from possibly repeated strings; the
    constructor expects terms that are already merged.
    """

    terms: tuple[tuple[float, PauliString], ...]
    n_qubits: int

    def __post_init__(self):
        if not self.terms:
            raise ValueError("observable needs at least one term")
        seen = set()
        for c, p in self.terms:
            if len(p) != self.n_qubits:
                raise DimensionError(
                    f"term {p} has {len(p)} qubits, observable has {self.n_qubits}"
                )
            if not math.isfinite(c):
                raise ValueError(f"coefficient of {p} is not finite")
            if p.ops in seen:
                raise ValueError(f"duplicate term {p}")
            seen.add(p.ops)

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[float, str | PauliString]]) -> "Observable":
        """Merge duplicate strings, keeping first-appearance order."""
        merged: dict[str, float] = {}
        for c, p in terms:
            word = p.ops if isinstance(p, PauliString) else PauliString(p).ops
            merged[word] = merged.get(word, 0.0) + float(c)
        if not merged:
            raise ValueError("observable needs at least one term")
        n = len(next(iter(merged)))
        return cls(tuple((c, PauliString(w)) for w, c in merged.items()), n)

    def __len__(self):
        return len(self.terms)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms], dtype=np.float64)

    @property
    def strings(self) -> list[PauliString]:
        return [p for _, p in self.terms]

    def to_text(self) -> str:
        return "".join(f"{c!r} {p.ops}\n" for c, p in self.terms)


def parse_observable(text: str) -> Observable:
    """Parse the ``<coefficient> <pauli-word>`` line format.

    ``#`` starts a comment and blank lines are skipped. Errors name the
    offending (1-based) line.
    """
    terms = []
    n = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected '<coefficient> <pauli-word>' at line {lineno}", lineno)
        coef, word = parts
        try:
            c = float(coef)
        except ValueError:
            raise ParseError(f"malformed coefficient {coef!r} at line {lineno}", lineno) from None
        if not math.isfinite(c):
            raise ParseError(f"non-finite coefficient at line {lineno}", lineno)
        word = word.upper()
        if any(ch not in PAULI_LETTERS for ch in word):
            raise ParseError(f"invalid Pauli letter at line {lineno}", lineno)
        if n is None:
            n = len(word)
        elif len(word) != n:
            raise ParseError(
                f"inconsistent Pauli word length at line {lineno}: expected {n}, got {len(word)}",
                lineno,
            )
        terms.append((c, word))
    if not terms:
        raise ParseError("empty observable file", 0)
    return Observable.from_terms(terms)


def load_observable(path) -> Observable:
    with open(path, encoding="utf-8") as fh:
        return parse_observable(fh.read())


def _check_len(n: int, sigma: Sequence[int]):
    if len(sigma) != n:
        raise DimensionError(f"bitstring has length {len(sigma)}, expected {n}")


def apply_string(p: PauliString, sigma: Sequence[int]) -> tuple[tuple[int, ...], complex]:
    """Return ``(sigma', phase)`` such that ``P|sigma> = phase |sigma'>``."""
    _check_len(len(p), sigma)
    out = []
    phase = 1 + 0j
    for op, s in zip(p.ops, sigma):
        s = int(s)
        if op == "I":
            out.append(s)
        elif op == "X":
            out.append(1 - s)
        elif op == "Y":
            # Y|0> = i|1>, Y|1> = -i|0>
            out.append(1 - s)
            phase *= 1j if s == 0 else -1j
        else:
            out.append(s)
            if s:
                phase = -phase
    return tuple(out), phase


def outcome_eigenvalue(p: PauliString, bits: Sequence[int]) -> int:
    """Eigenvalue of ``p`` for a record measured in its eigenbasis.

    Identity sites contribute +1 whatever bit was recorded there.
    """
    _check_len(len(p), bits)
    parity = sum(int(bits[i]) for i in p.support) & 1
    return -1 if parity else 1


@dataclass(frozen=True)
class ConnectedTable:
    """Observable regrouped by flip mask for vectorised row evaluation.

    For a row bitstring ``s`` and group ``g`` the off-diagonal partner is
    ``s ^ masks[g]`` and the matrix element is
    ``sum_k coef[k] * (-1) ** popcount(s & sign_masks[k])`` over the terms of
    that group, where ``coef`` already carries the ``(-i)**n_Y`` factor.
    """

    masks: np.ndarray  # (G, N) uint8
    group_of_term: np.ndarray  # (K,) int
    coef: np.ndarray  # (K,) complex
    sign_masks: np.ndarray  # (K, N) uint8

    @classmethod
    def from_observable(cls, obs: Observable) -> "ConnectedTable":
        masks: dict[bytes, int] = {}
        mask_rows = []
        group, coef, signs = [], [], []
        for c, p in obs.terms:
            m = p.flip_mask
            key = m.tobytes()
            if key not in masks:
                masks[key] = len(mask_rows)
                mask_rows.append(m)
            group.append(masks[key])
            n_y = p.ops.count("Y")
            # <s|Y|s^1> = -i (-1)^s_i ; <s|Z|s> = (-1)^s_i
            coef.append(c * (-1j) ** n_y)
            signs.append(np.array([ch in "YZ" for ch in p.ops], dtype=np.uint8))
        return cls(
            masks=np.array(mask_rows, dtype=np.uint8),
            group_of_term=np.array(group, dtype=np.intp),
            coef=np.array(coef, dtype=np.complex128),
            sign_masks=np.array(signs, dtype=np.uint8),
        )

    def elements(self, rows: np.ndarray) -> np.ndarray:
        """Matrix elements ``<row|O|row ^ mask_g>`` with shape ``(n_rows, G)``."""
        rows = np.asarray(rows, dtype=np.uint8)
        parity = (rows.astype(np.int64) @ self.sign_masks.T.astype(np.int64)) & 1
        vals = (1 - 2 * parity) * self.coef  # (n, K)
        out = np.zeros((rows.shape[0], len(self.masks)), dtype=np.complex128)
        for k, g in enumerate(self.group_of_term):
            out[:, g] += vals[:, k]
        return out


def connected_elements(obs: Observable, sigma: Sequence[int]) -> list[tuple[tuple[int, ...], complex]]:
    """Nonzero pattern of row ``sigma`` of the observable matrix.

    Each distinct ``sigma'`` appears once, in first-appearance order of its
    flip mask among the terms, paired with ``<sigma|O|sigma'>``.
    """
    _check_len(obs.n_qubits, sigma)
    table = ConnectedTable.from_observable(obs)
    row = np.asarray(sigma, dtype=np.uint8)[None, :]
    amps = table.elements(row)[0]
    return [
        (tuple(int(b) for b in row[0] ^ m), complex(a))
        for m, a in zip(table.masks, amps)
    ]
