import numpy as np
import pytest

from rbmest.pauli import Observable, PauliString

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron_matrix(obs: Observable) -> np.ndarray:
    """Dense matrix by explicit Kronecker products (qubit 0 leftmost)."""
    total = np.zeros((2**obs.n_qubits,) * 2, dtype=complex)
    for c, p in obs.terms:
        m = np.array([[1.0 + 0j]])
        for ch in p.ops:
            m = np.kron(m, PAULI[ch])
        total += c * m
    return total


def random_observable(rng: np.random.Generator, n: int, k: int) -> Observable:
    words = ["".join(rng.choice(list("IXYZ"), size=n)) for _ in range(k)]
    coefs = rng.normal(size=k)
    return Observable.from_terms(zip(coefs, words))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tfim2():
    """-(XX + ZI + IZ); ground energy -sqrt(5)."""
    return Observable.from_terms([(-1.0, "XX"), (-1.0, "ZI"), (-1.0, "IZ")])


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
