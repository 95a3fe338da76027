import itertools
import math

import numpy as np
import pytest

from rbmest.dataset import MeasurementRecord
from rbmest.errors import CapacityError, DimensionError, ParseError
from rbmest.exactsim import ROTATIONS, all_bitstrings
from rbmest.rbm import (
    PARAMS_VERSION,
    RBM,
    load_params,
    log_cosh,
    log_derivatives,
    log_psi,
    log_rotated_psi_batch,
    partition_function_exact,
    rotated_grad_average,
    rotated_psi,
    save_params,
)


def random_rbm(rng, n, h, scale=0.5):
    size = n + h + n * h
    flat = scale * (rng.normal(size=size) + 1j * rng.normal(size=size))
    return RBM.from_params(flat, n, h)


def hidden_sum_psi(rbm, sigma):
    """Explicit sum over +-1 hidden units; equals psi * 2**H."""
    s = np.asarray(sigma, dtype=float)
    total = 0j
    for h in itertools.product((-1.0, 1.0), repeat=rbm.n_hidden):
        h = np.array(h)
        total += np.exp(s @ rbm.W @ h + rbm.d @ h + rbm.a @ s)
    return total / 2**rbm.n_hidden


def dense_psi(rbm):
    return np.array([np.exp(log_psi(rbm, s)) for s in all_bitstrings(rbm.n_visible)])


def kron_rotation(basis):
    u = np.array([[1.0 + 0j]])
    for b in basis:
        u = np.kron(u, ROTATIONS[b])
    return u


def test_zero_parameters_uniform():
    rbm = RBM.zeros(3)
    for s in all_bitstrings(3):
        assert log_psi(rbm, s) == 0


def test_product_form():
    rbm = RBM(np.array([math.log(2), 0]), np.zeros(2), np.zeros((2, 2)))
    assert log_psi(rbm, (1, 0)) == pytest.approx(math.log(2))


def test_log_psi_matches_hidden_sum(rng):
    for _ in range(10):
        rbm = random_rbm(rng, 3, 2)
        for s in all_bitstrings(3):
            assert np.exp(log_psi(rbm, s)) == pytest.approx(hidden_sum_psi(rbm, s), rel=1e-12)


def test_log_psi_batch_shape(rng):
    rbm = random_rbm(rng, 4, 3)
    s = all_bitstrings(4)
    batch = log_psi(rbm, s)
    assert batch.shape == (16,)
    assert batch[5] == log_psi(rbm, s[5])
    with pytest.raises(DimensionError):
        log_psi(rbm, (0, 1))


def test_log_cosh_stable():
    z = np.array([1e3 + 0.3j, -1e3 + 2j, 0.5 - 0.2j, -700.0])
    out = log_cosh(z)
    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out[2], np.log(np.cosh(z[2])), rtol=1e-14)
    assert out[0].real == pytest.approx(1e3 - math.log(2))
    rbm = RBM.random(3, 3, scale=1e3, seed=1)
    assert np.all(np.isfinite(log_psi(rbm, all_bitstrings(3))))


def test_log_derivative_examples():
    rbm = RBM.zeros(3, 2)
    g = log_derivatives(rbm, (1, 1, 1))
    np.testing.assert_array_equal(g[:3], 1)
    np.testing.assert_array_equal(g[3:], 0)
    rbm = RBM(np.zeros(2), np.array([0.3 + 0.1j, -0.2j]), np.ones((2, 2)))
    g = log_derivatives(rbm, (0, 0))
    np.testing.assert_array_equal(g[:2], 0)
    np.testing.assert_allclose(g[2:4], np.tanh(rbm.d))
    np.testing.assert_array_equal(g[4:], 0)


@pytest.mark.parametrize("direction", [1.0, 1j])
def test_log_derivatives_finite_differences(rng, direction):
    h = 1e-6
    for _ in range(5):
        rbm = random_rbm(rng, 3, 2)
        flat = rbm.params
        for s in all_bitstrings(3):
            g = log_derivatives(rbm, s)
            fd = np.empty_like(g)
            for k in range(flat.size):
                e = np.zeros_like(flat)
                e[k] = h * direction
                up = log_psi(rbm.with_params(flat + e), s)
                dn = log_psi(rbm.with_params(flat - e), s)
                fd[k] = (up - dn) / (2 * h * direction)
            err = np.abs(fd - g) / np.maximum(1.0, np.abs(g))
            assert err.max() <= 1e-6


def test_rotated_psi_all_z_is_exact(rng):
    rbm = random_rbm(rng, 3, 3)
    for s in all_bitstrings(3):
        rec = MeasurementRecord("ZZZ", s)
        assert rotated_psi(rbm, rec) == np.exp(log_psi(rbm, s))


def test_rotated_psi_single_x():
    rbm = RBM.zeros(1)
    assert rotated_psi(rbm, MeasurementRecord("X", (0,))) == pytest.approx(math.sqrt(2))
    assert rotated_psi(rbm, MeasurementRecord("X", (1,))) == pytest.approx(0, abs=1e-15)


def test_rotated_psi_matches_dense_pipeline(rng):
    for n in (2, 3, 4):
        rbm = random_rbm(rng, n, 2)
        psi = dense_psi(rbm)
        for _ in range(10):
            basis = "".join(rng.choice(list("XYZ"), size=n))
            rot = kron_rotation(basis) @ psi
            for idx, s in enumerate(all_bitstrings(n)):
                got = rotated_psi(rbm, MeasurementRecord(basis, s))
                assert abs(got - rot[idx]) <= 1e-10 * abs(rot[idx]) + 1e-14


def test_rotated_norm_equals_partition_function(rng):
    for n in (1, 2, 3, 4):
        rbm = random_rbm(rng, n, 3)
        log_z = partition_function_exact(rbm)
        for basis in ("".join(b) for b in itertools.product("XYZ", repeat=n)):
            if len(basis) > 2 and rng.random() > 0.3:
                continue
            strings = all_bitstrings(n)
            vals, ok = log_rotated_psi_batch(rbm, np.tile([{"Z": 0, "X": 1, "Y": 2}[c] for c in basis], (2**n, 1)), strings)
            total = np.exp(2 * vals.real).sum()
            assert total == pytest.approx(math.exp(log_z), rel=1e-8)


def enumerate_grad_average(rbm, rec):
    """Quasi-probability average over the full Hilbert space."""
    num = np.zeros(rbm.n_params, dtype=complex)
    den = 0j
    codes = {"Z": 0, "X": 1, "Y": 2}
    for s in all_bitstrings(rbm.n_visible):
        u = 1.0 + 0j
        for b, bit, x in zip(rec.basis, rec.bits, s):
            u *= ROTATIONS[b][bit, x]
        if u == 0:
            continue
        q = u * np.exp(log_psi(rbm, s))
        num += q * log_derivatives(rbm, s)
        den += q
    return np.conj(num / den)


def test_rotated_grad_average_examples(rng):
    rbm = random_rbm(rng, 3, 2)
    rec = MeasurementRecord("ZZZ", (1, 0, 1))
    np.testing.assert_allclose(rotated_grad_average(rbm, rec), np.conj(log_derivatives(rbm, (1, 0, 1))))
    g = rotated_grad_average(RBM.zeros(3, 2), MeasurementRecord("XYZ", (0, 1, 1)))
    np.testing.assert_array_equal(g[3:], 0)


def test_rotated_grad_average_matches_enumeration(rng):
    for _ in range(10):
        rbm = random_rbm(rng, 3, 2)
        basis = "".join(rng.choice(list("XYZ"), size=3))
        bits = tuple(rng.integers(0, 2, 3))
        rec = MeasurementRecord(basis, bits)
        np.testing.assert_allclose(rotated_grad_average(rbm, rec), enumerate_grad_average(rbm, rec), rtol=1e-10, atol=1e-12)


def test_rotated_grad_average_is_conj_log_derivative(rng):
    # finite differences of log of the rotated amplitude
    h = 1e-6
    rbm = random_rbm(rng, 3, 2)
    rec = MeasurementRecord("XYZ", (1, 0, 1))
    g = rotated_grad_average(rbm, rec)
    flat = rbm.params
    for k in range(flat.size):
        e = np.zeros_like(flat)
        e[k] = h
        fd = (np.log(rotated_psi(rbm.with_params(flat + e), rec)) - np.log(rotated_psi(rbm.with_params(flat - e), rec))) / (2 * h)
        assert np.conj(fd) == pytest.approx(g[k], rel=1e-6, abs=1e-8)


def test_rotated_cap():
    import rbmest.rbm as mod

    rbm = RBM.zeros(3)
    old = mod.MAX_ROTATED_SITES
    mod.MAX_ROTATED_SITES = 2
    try:
        with pytest.raises(CapacityError):
            rotated_psi(rbm, MeasurementRecord("XXX", (0, 0, 0)))
    finally:
        mod.MAX_ROTATED_SITES = old


def test_partition_function_examples(rng):
    assert partition_function_exact(RBM.zeros(5)) == pytest.approx(5 * math.log(2))
    a = np.array([0.3, -1.2, 2.0])
    rbm = RBM(a, np.zeros(3), np.zeros((3, 3)))
    assert partition_function_exact(rbm) == pytest.approx(np.log1p(np.exp(2 * a)).sum())
    rbm = random_rbm(rng, 4, 3)
    direct = sum(abs(hidden_sum_psi(rbm, s)) ** 2 for s in all_bitstrings(4))
    assert partition_function_exact(rbm) == pytest.approx(math.log(direct), rel=1e-12)
    with pytest.raises(CapacityError):
        partition_function_exact(RBM.zeros(6), cap=5)


def test_partition_function_no_overflow():
    rbm = RBM(np.full(4, 400.0), np.zeros(2), np.zeros((4, 2)))
    assert partition_function_exact(rbm) == pytest.approx(3200.0)


def test_params_round_trip(tmp_path, rng):
    rbm = random_rbm(rng, 4, 3, scale=3.0)
    p = tmp_path / "rbm.txt"
    save_params(rbm, p)
    back = load_params(p)
    assert back == rbm
    assert np.array_equal(back.params.view(np.float64), rbm.params.view(np.float64))


def test_params_truncated(tmp_path, rng):
    p = tmp_path / "rbm.txt"
    save_params(random_rbm(rng, 2, 2), p)
    lines = p.read_text().splitlines()
    p.write_text("\n".join(lines[:-3]) + "\n")
    with pytest.raises(ParseError, match="truncated"):
        load_params(p)


def test_params_wrong_version(tmp_path, rng):
    p = tmp_path / "rbm.txt"
    save_params(random_rbm(rng, 2, 2), p)
    p.write_text(p.read_text().replace(PARAMS_VERSION, "rbmest-params 0"))
    with pytest.raises(ParseError, match=PARAMS_VERSION):
        load_params(p)


def test_random_init_scale():
    rbm = RBM.random(6, seed=3)
    assert rbm.n_hidden == 6
    flat = rbm.params
    assert np.std(flat.real) == pytest.approx(0.01, rel=0.3)
    assert RBM.random(6, seed=3) == rbm
