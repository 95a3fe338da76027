"""Basis-tagged projective measurement records: storage, file I/O, splitting.

A dataset file is UTF-8 text::

    qubits 3
    ZXZ 010
    YYZ 111

Count tables (one line per observed outcome) use a ``counts`` marker::

    qubits 2
    counts
    ZZ 01 3
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import ParseError
from .pauli import Observable

BASIS_LETTERS = "ZXY"  # index = basis code
_CODE = {c: i for i, c in enumerate(BASIS_LETTERS)}


def normalize_basis(basis: str) -> str:
    b = basis.upper()
    if not b or any(c not in _CODE for c in b):
        raise ValueError(f"invalid basis {basis!r}; letters must be X, Y or Z")
    return b


def basis_codes(basis: str) -> np.ndarray:
    return np.array([_CODE[c] for c in normalize_basis(basis)], dtype=np.int8)


def basis_word(codes) -> str:
    return "".join(BASIS_LETTERS[int(c)] for c in codes)


@dataclass(frozen=True)
class MeasurementRecord:
    basis: str
    bits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "basis", normalize_basis(self.basis))
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
        if len(self.bits) != len(self.basis):
            raise ValueError("basis and bits must have equal length")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("bits must be 0 or 1")

    @property
    def codes(self) -> np.ndarray:
        return basis_codes(self.basis)


class Dataset:
    """Ordered measurement records stored column-wise.

    ``bases`` holds basis codes (0=Z, 1=X, 2=Y) and ``bits`` the outcomes,
    both shaped ``(M, n_qubits)``. Iterating yields :class:`MeasurementRecord`.
    """

    def __init__(self, n_qubits: int, bases, bits):
        bases = np.array(bases, dtype=np.int8).reshape(-1, n_qubits)
        bits = np.array(bits, dtype=np.uint8).reshape(-1, n_qubits)
        if bases.shape != bits.shape:
            raise ValueError("bases and bits must have the same shape")
        if bases.size and (bases.min() < 0 or bases.max() > 2):
            raise ValueError("basis codes must be 0, 1 or 2")
        if bits.size and bits.max() > 1:
            raise ValueError("bits must be 0 or 1")
        bases.setflags(write=False)
        bits.setflags(write=False)
        self.n_qubits = int(n_qubits)
        self.bases = bases
        self.bits = bits

    @classmethod
    def from_records(cls, records, n_qubits: int | None = None) -> "Dataset":
        records = list(records)
        if n_qubits is None:
            if not records:
                raise ValueError("cannot infer qubit count from no records")
            n_qubits = len(records[0].bits)
        for r in records:
            if len(r.bits) != n_qubits:
                raise ValueError(f"record {r} does not have {n_qubits} qubits")
        bases = [r.codes for r in records]
        bits = [r.bits for r in records]
        return cls(n_qubits, np.array(bases).reshape(-1, n_qubits), np.array(bits).reshape(-1, n_qubits))

    def __len__(self):
        return self.bits.shape[0]

    def __iter__(self) -> Iterator[MeasurementRecord]:
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i) -> MeasurementRecord:
        return MeasurementRecord(basis_word(self.bases[i]), tuple(self.bits[i]))

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.n_qubits == other.n_qubits
            and np.array_equal(self.bases, other.bases)
            and np.array_equal(self.bits, other.bits)
        )

    def __repr__(self):
        return f"Dataset(n_qubits={self.n_qubits}, M={len(self)})"

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.intp)
        return Dataset(self.n_qubits, self.bases[idx], self.bits[idx])

    def to_text(self) -> str:
        letters = np.array(list(BASIS_LETTERS))
        words = ["".join(row) for row in letters[self.bases]]
        outs = ["".join(row) for row in np.where(self.bits == 1, "1", "0")]
        body = "".join(f"{w} {o}\n" for w, o in zip(words, outs))
        return f"qubits {self.n_qubits}\n" + body


def _parse_header(lines: list[str]) -> tuple[int, int]:
    for i, line in enumerate(lines):
        if line.strip():
            parts = line.split()
            if len(parts) != 2 or parts[0] != "qubits":
                raise ParseError(f"expected header 'qubits <N>' at line {i + 1}", i + 1)
            try:
                n = int(parts[1])
            except ValueError:
                raise ParseError(f"bad qubit count at line {i + 1}", i + 1) from None
            if n < 1:
                raise ParseError(f"qubit count must be >= 1 at line {i + 1}", i + 1)
            return n, i + 1
    raise ParseError("empty dataset", 0)


def _parse_record(line: str, n: int, lineno: int) -> tuple[str, str]:
    parts = line.split()
    if len(parts) != 2:
        raise ParseError(f"expected '<basis-word> <bitstring>' at line {lineno}", lineno)
    word, bits = parts
    if len(word) != n or len(bits) != n:
        raise ParseError(f"record length mismatch at line {lineno}: expected {n} qubits", lineno)
    if any(c not in _CODE for c in word):
        raise ParseError(f"invalid basis letter at line {lineno}", lineno)
    if any(c not in "01" for c in bits):
        raise ParseError(f"bit not 0/1 at line {lineno}", lineno)
    return word, bits


def parse_dataset(text: str) -> Dataset:
    lines = text.splitlines()
    n, start = _parse_header(lines)
    words, outs = [], []
    for i in range(start, len(lines)):
        line = lines[i]
        if not line.strip():
            continue
        w, b = _parse_record(line, n, i + 1)
        words.append(w)
        outs.append(b)
    if not words:
        raise ParseError("empty dataset", 0)
    table = np.frombuffer("".join(words).encode(), dtype=np.uint8).reshape(-1, n)
    lut = np.zeros(256, dtype=np.int8)
    lut[ord("X")], lut[ord("Y")] = 1, 2
    bits = np.frombuffer("".join(outs).encode(), dtype=np.uint8).reshape(-1, n) - ord("0")
    return Dataset(n, lut[table], bits)


def save(ds: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(ds.to_text())


def load(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        return parse_dataset(fh.read())


def parse_counts(text: str) -> Dataset:
    """Expand a ``<pauli-word> <bitstring> <count>`` table into records.

    Identity letters in the word are read out in z, matching how such terms
    are measured.
    """
    lines = text.splitlines()
    n, start = _parse_header(lines)
    body = [(i + 1, ln) for i, ln in enumerate(lines[start:], start=start) if ln.strip()]
    if not body or body[0][1].strip() != "counts":
        lineno = body[0][0] if body else start + 1
        raise ParseError(f"expected 'counts' marker at line {lineno}", lineno)
    bases, bits = [], []
    for lineno, line in body[1:]:
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(f"expected '<pauli-word> <bitstring> <count>' at line {lineno}", lineno)
        word, outcome, count = parts
        word = word.upper().replace("I", "Z")
        _parse_record(f"{word} {outcome}", n, lineno)
        try:
            c = int(count)
        except ValueError:
            raise ParseError(f"bad count at line {lineno}", lineno) from None
        if c < 0:
            raise ParseError(f"negative count at line {lineno}", lineno)
        bases.extend([basis_codes(word)] * c)
        bits.extend([[int(ch) for ch in outcome]] * c)
    if not bases:
        raise ParseError("empty dataset", 0)
    return Dataset(n, np.array(bases), np.array(bits))


def load_counts(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        return parse_counts(fh.read())


def split(ds: Dataset, train_fraction: float, seed) -> tuple[Dataset, Dataset]:
    """Random disjoint split with ``ceil(f*M)`` training records."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    m = len(ds)
    n_train = math.ceil(train_fraction * m - 1e-9)
    if n_train >= m:
        raise ValueError(f"dataset of {m} records is too small for a nonempty validation split")
    perm = np.random.default_rng(seed).permutation(m)
    return ds.take(perm[:n_train]), ds.take(perm[n_train:])


def subsample(ds: Dataset, m: int, seed) -> Dataset:
    """``m`` records drawn uniformly without replacement."""
    if not 1 <= m <= len(ds):
        raise ValueError(f"cannot draw {m} records from a dataset of {len(ds)}")
    idx = np.random.default_rng(seed).choice(len(ds), size=m, replace=False)
    return ds.take(idx)


def _term_patterns(obs: Observable) -> tuple[np.ndarray, np.ndarray]:
    """Per-term (support mask, required basis code on support)."""
    support = np.array([[c != "I" for c in p.ops] for p in obs.strings], dtype=bool)
    codes = np.array(
        [[_CODE.get(c, 0) for c in p.ops] for p in obs.strings], dtype=np.int8
    )
    return support, codes


def match_terms(ds: Dataset, obs: Observable) -> np.ndarray:
    """Index of the first non-identity term each record measures, or -1."""
    if ds.n_qubits != obs.n_qubits:
        raise ValueError(f"dataset has {ds.n_qubits} qubits, observable has {obs.n_qubits}")
    support, codes = _term_patterns(obs)
    out = np.full(len(ds), -1, dtype=np.intp)
    for k in range(len(obs)):
        if not support[k].any():
            continue
        ok = np.all((ds.bases == codes[k]) | ~support[k], axis=1) & (out < 0)
        out[ok] = k
    return out


def group_by_pauli(ds: Dataset, obs: Observable) -> dict[int, Dataset]:
    """Assign every record to exactly one term it measures.

    A record measures term ``k`` when its basis agrees with the term's letters
    on the term's support; ties go to the lowest index. Identity terms are
    known exactly and receive an empty group.
    """
    owner = match_terms(ds, obs)
    missing = np.flatnonzero(owner < 0)
    if missing.size:
        shown = ", ".join(f"#{i} {ds[i].basis} {''.join(map(str, ds[i].bits))}" for i in missing[:5])
        raise ValueError(f"{missing.size} record(s) match no term of the observable: {shown}")
    return {k: ds.take(np.flatnonzero(owner == k)) for k in range(len(obs))}


def compatible_records(ds: Dataset, obs: Observable) -> dict[int, Dataset]:
    """Every record that measures term ``k``, without the exclusive tie-break.

    Terms whose bases coincide on their supports (``ZI`` and ``IZ`` both read
    from ``ZZ`` records) share records here, so per-term means are correlated.
    Used to estimate terms from a pooled dataset where exclusive assignment
    would starve all but the lowest-indexed term.
    """
    if ds.n_qubits != obs.n_qubits:
        raise ValueError(f"dataset has {ds.n_qubits} qubits, observable has {obs.n_qubits}")
    support, codes = _term_patterns(obs)
    out = {}
    for k in range(len(obs)):
        if not support[k].any():
            out[k] = ds.take([])
            continue
        ok = np.all((ds.bases == codes[k]) | ~support[k], axis=1)
        out[k] = ds.take(np.flatnonzero(ok))
    return out
