import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbmest.errors import DimensionError, ParseError
from rbmest.pauli import (
    Observable,
    PauliString,
    apply_string,
    connected_elements,
    outcome_eigenvalue,
    parse_observable,
)

from conftest import kron_matrix, random_observable

pauli_words = st.integers(1, 5).flatmap(lambda n: st.text("IXYZ", min_size=n, max_size=n))


def test_parse_basic():
    obs = parse_observable("0.5 ZI\n-0.25 XX")
    assert obs.n_qubits == 2 and len(obs) == 2
    assert obs.terms[0] == (0.5, PauliString("ZI"))
    assert obs.terms[1] == (-0.25, PauliString("XX"))


def test_parse_merges_duplicates():
    obs = parse_observable("1.0 II\n2.0 II")
    assert len(obs) == 1
    assert obs.terms[0][0] == 3.0


def test_parse_comments_and_blank_lines():
    obs = parse_observable("# header\n\n-0.4804 ZIZIII  # trailing\n1 XXXXXX\n")
    assert obs.n_qubits == 6
    assert [str(p) for p in obs.strings] == ["ZIZIII", "XXXXXX"]


def test_parse_keeps_first_appearance_order():
    obs = parse_observable("1 ZZ\n2 XX\n3 ZZ\n4 YY")
    assert [str(p) for p in obs.strings] == ["ZZ", "XX", "YY"]
    assert list(obs.coefficients) == [4.0, 2.0, 4.0]


@pytest.mark.parametrize(
    "text, fragment, line",
    [
        ("0.5 ZQ", "invalid Pauli letter at line 1", 1),
        ("0.5 ZZ\nabc XX", "malformed coefficient", 2),
        ("0.5 ZZ\n1.0 XXX", "inconsistent Pauli word length at line 2", 2),
        ("", "empty observable", 0),
        ("# only a comment\n", "empty observable", 0),
        ("1.0", "line 1", 1),
        ("nan ZZ", "non-finite coefficient at line 1", 1),
    ],
)
def test_parse_errors(text, fragment, line):
    with pytest.raises(ParseError, match=fragment) as info:
        parse_observable(text)
    assert info.value.lineno == line


def test_observable_rejects_mixed_lengths():
    with pytest.raises(DimensionError):
        Observable(((1.0, PauliString("ZZ")), (1.0, PauliString("Z"))), 2)


def test_support():
    assert PauliString("IXIZ").support == (1, 3)
    assert PauliString("II").is_identity


@pytest.mark.parametrize(
    "p, sigma, expected",
    [
        ("Z", (0,), ((0,), 1)),
        ("Z", (1,), ((1,), -1)),
        ("X", (1,), ((0,), 1)),
        ("Y", (0,), ((1,), 1j)),
        ("Y", (1,), ((0,), -1j)),
        ("XZ", (0, 1), ((1, 1), -1)),
    ],
)
def test_apply_string(p, sigma, expected):
    assert apply_string(PauliString(p), sigma) == expected


def test_apply_string_length_mismatch():
    with pytest.raises(DimensionError):
        apply_string(PauliString("ZZ"), (0,))


@given(pauli_words, st.data())
def test_apply_string_is_involution(word, data):
    p = PauliString(word)
    sigma = tuple(data.draw(st.lists(st.integers(0, 1), min_size=len(word), max_size=len(word))))
    s1, ph1 = apply_string(p, sigma)
    s2, ph2 = apply_string(p, s1)
    assert s2 == sigma
    assert ph1 * ph2 == 1
    assert ph1 in (1, -1, 1j, -1j)
    flipped = {i for i, (a, b) in enumerate(zip(sigma, s1)) if a != b}
    assert flipped == {i for i, c in enumerate(p.ops) if c in "XY"}


@pytest.mark.parametrize("word", ["X", "Y", "Z", "XY", "YZI", "ZZYX"])
def test_apply_string_matches_matrix_column(word):
    p = PauliString(word)
    mat = kron_matrix(Observable(((1.0, p),), len(word)))
    n = len(word)
    for idx, sigma in enumerate(itertools.product((0, 1), repeat=n)):
        s2, phase = apply_string(p, sigma)
        j = int("".join(map(str, s2)), 2)
        col = mat[:, idx]
        assert col[j] == pytest.approx(phase)
        # unitary: exactly one nonzero per column with unit modulus
        assert np.count_nonzero(np.abs(col) > 1e-12) == 1
        assert np.sum(np.abs(col) ** 2) == pytest.approx(1.0)


def test_connected_diagonal():
    obs = Observable.from_terms([(1.0, "ZZ")])
    assert connected_elements(obs, (0, 1)) == [((0, 1), -1)]


def test_connected_two_flips():
    obs = Observable.from_terms([(1.0, "XI"), (1.0, "IX")])
    assert connected_elements(obs, (0, 0)) == [((1, 0), 1), ((0, 1), 1)]


@pytest.mark.parametrize("n, k", [(1, 3), (2, 6), (3, 5), (4, 20), (4, 11)])
def test_connected_matches_dense_rows(rng, n, k):
    for _ in range(5):
        obs = random_observable(rng, n, k)
        mat = kron_matrix(obs)
        for idx, sigma in enumerate(itertools.product((0, 1), repeat=n)):
            row = np.zeros(2**n, dtype=complex)
            targets = []
            for s2, amp in connected_elements(obs, sigma):
                j = int("".join(map(str, s2)), 2)
                targets.append(j)
                row[j] += amp
            assert len(targets) == len(set(targets))
            np.testing.assert_allclose(row, mat[idx], atol=1e-12)


@pytest.mark.parametrize(
    "p, bits, expected", [("ZZ", (0, 0), 1), ("ZZ", (0, 1), -1), ("ZI", (0, 1), 1), ("XYZ", (1, 1, 0), 1)]
)
def test_outcome_eigenvalue(p, bits, expected):
    assert outcome_eigenvalue(PauliString(p), bits) == expected


@given(pauli_words, st.data())
def test_outcome_eigenvalue_is_sign(word, data):
    bits = data.draw(st.lists(st.integers(0, 1), min_size=len(word), max_size=len(word)))
    assert outcome_eigenvalue(PauliString(word), bits) in (-1, 1)


def test_outcome_eigenvalue_length_mismatch():
    with pytest.raises(DimensionError):
        outcome_eigenvalue(PauliString("ZZ"), (0, 1, 1))


def test_round_trip_text():
    obs = parse_observable("-0.4804 ZIZ\n0.1 XXY\n")
    assert parse_observable(obs.to_text()) == obs
