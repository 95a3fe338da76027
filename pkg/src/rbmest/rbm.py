"""Complex-valued RBM wavefunction with the hidden layer traced out.

    log psi(s) = sum_i a_i s_i + sum_j log cosh(theta_j),
    theta_j    = sum_i W_ij s_i + d_j,

with visible units ``s_i`` in {0, 1}. Amplitudes are unnormalized. Flat
parameter and gradient vectors are ordered ``(a, d, W)`` with ``W``
row-major, length ``N + H + N*H``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dataset import MeasurementRecord, basis_codes
from .errors import CapacityError, DegenerateAmplitudeError, DimensionError, ParseError
from .exactsim import ROTATION_STACK, StateVector, all_bitstrings

log = logging.getLogger(__name__)

LOG2 = np.log(2.0)
MAX_ROTATED_SITES = 16
MAX_ENUMERATED_QUBITS = 20
DEGENERATE_AMPLITUDE = 1e-300
PARAMS_VERSION = "rbmest-params 1"


def log_cosh(z):
    """``log(cosh(z))`` for complex ``z`` without overflow at large ``|Re z|``."""
    z = np.asarray(z, dtype=np.complex128)
    s = np.where(z.real < 0, -z, z)
    return s + np.log1p(np.exp(-2.0 * s)) - LOG2


@dataclass(frozen=True, eq=False)
class RBM:
    a: np.ndarray  # (N,) visible biases
    d: np.ndarray  # (H,) hidden biases
    W: np.ndarray  # (N, H) weights

    def __post_init__(self):
        a = np.array(self.a, dtype=np.complex128).reshape(-1)
        d = np.array(self.d, dtype=np.complex128).reshape(-1)
        W = np.array(self.W, dtype=np.complex128)
        if W.shape != (a.size, d.size):
            raise DimensionError(f"W has shape {W.shape}, expected {(a.size, d.size)}")
        if a.size < 1 or d.size < 1:
            raise ValueError("need at least one visible and one hidden unit")
        for arr in (a, d, W):
            if not np.all(np.isfinite(arr)):
                raise ValueError("RBM parameters must be finite")
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "W", W)

    @property
    def n_visible(self) -> int:
        return self.a.size

    @property
    def n_hidden(self) -> int:
        return self.d.size

    @property
    def n_params(self) -> int:
        return self.a.size + self.d.size + self.W.size

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([self.a, self.d, self.W.reshape(-1)])

    @classmethod
    def from_params(cls, flat, n_visible: int, n_hidden: int) -> "RBM":
        flat = np.asarray(flat, dtype=np.complex128)
        if flat.size != n_visible + n_hidden + n_visible * n_hidden:
            raise DimensionError(f"parameter vector has length {flat.size}")
        a = flat[:n_visible]
        d = flat[n_visible : n_visible + n_hidden]
        W = flat[n_visible + n_hidden :].reshape(n_visible, n_hidden)
        return cls(a, d, W)

    def with_params(self, flat) -> "RBM":
        return RBM.from_params(flat, self.n_visible, self.n_hidden)

    @classmethod
    def zeros(cls, n_visible: int, n_hidden: int | None = None) -> "RBM":
        n_hidden = n_visible if n_hidden is None else n_hidden
        return cls(np.zeros(n_visible), np.zeros(n_hidden), np.zeros((n_visible, n_hidden)))

    @classmethod
    def random(cls, n_visible: int, n_hidden: int | None = None, scale: float = 0.01, seed=None) -> "RBM":
        """Independent Gaussian real and imaginary parts with std ``scale``."""
        n_hidden = n_visible if n_hidden is None else n_hidden
        rng = np.random.default_rng(seed)
        size = n_visible + n_hidden + n_visible * n_hidden
        flat = scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))
        return cls.from_params(flat, n_visible, n_hidden)

    def __eq__(self, other):
        if not isinstance(other, RBM):
            return NotImplemented
        return (
            self.W.shape == other.W.shape
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.d, other.d)
            and np.array_equal(self.W, other.W)
        )

    def __repr__(self):
        return f"RBM(n_visible={self.n_visible}, n_hidden={self.n_hidden})"


def _as_bits(rbm: RBM, sigma) -> np.ndarray:
    s = np.asarray(sigma)
    if s.shape[-1] != rbm.n_visible:
        raise DimensionError(f"bitstring length {s.shape[-1]} != {rbm.n_visible} visible units")
    return s


def theta(rbm: RBM, sigma) -> np.ndarray:
    s = _as_bits(rbm, sigma)
    return s.astype(np.float64) @ rbm.W + rbm.d


def log_psi(rbm: RBM, sigma):
    """Log amplitude for one bitstring or a ``(..., N)`` batch."""
    s = _as_bits(rbm, sigma)
    out = s.astype(np.float64) @ rbm.a + log_cosh(s.astype(np.float64) @ rbm.W + rbm.d).sum(axis=-1)
    return out if out.ndim else complex(out)


def log_derivatives(rbm: RBM, sigma) -> np.ndarray:
    """``d log psi / d lambda`` in flat ``(a, d, W)`` order; batches give ``(..., P)``."""
    s = _as_bits(rbm, sigma).astype(np.float64)
    t = np.tanh(s @ rbm.W + rbm.d)
    w = s[..., :, None] * t[..., None, :]
    lead = s.shape[:-1]
    return np.concatenate(
        [s.astype(np.complex128), t, w.reshape(lead + (-1,))], axis=-1
    )


def _rotated_support(codes: np.ndarray) -> tuple[int, ...]:
    return tuple(int(i) for i in np.flatnonzero(codes != 0))


def _expand(rbm: RBM, bases: np.ndarray, bits: np.ndarray, tau: tuple[int, ...]):
    """Reference-basis configurations and rotation weights for records sharing ``tau``.

    Returns ``sigma`` with shape ``(B, 2**n_tau, N)`` and weights ``(B, 2**n_tau)``.
    """
    nu = len(tau)
    if nu > MAX_ROTATED_SITES:
        raise CapacityError(f"{nu} rotated sites exceeds cap of {MAX_ROTATED_SITES}")
    fill = all_bitstrings(nu)  # (2**nu, nu)
    b = bases.shape[0]
    sigma = np.repeat(bits[:, None, :], 2**nu, axis=1)
    if nu == 0:
        return sigma, np.ones((b, 1), dtype=np.complex128)
    t = list(tau)
    sigma[:, :, t] = fill[None, :, :]
    rot = ROTATION_STACK[
        bases[:, t][:, None, :].astype(np.intp),
        bits[:, t][:, None, :].astype(np.intp),
        fill[None, :, :].astype(np.intp),
    ]
    return sigma, rot.prod(axis=-1)


def _group_by_support(bases: np.ndarray) -> dict[tuple[int, ...], np.ndarray]:
    rotated = bases != 0
    keys, inverse = np.unique(rotated, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    return {
        tuple(int(i) for i in np.flatnonzero(k)): np.flatnonzero(inverse == g)
        for g, k in enumerate(keys)
    }


def _chunks(idx: np.ndarray, nu: int, budget: int = 1 << 18):
    step = max(1, budget >> nu)
    for lo in range(0, idx.size, step):
        yield idx[lo : lo + step]


def log_rotated_psi_batch(rbm: RBM, bases, bits) -> tuple[np.ndarray, np.ndarray]:
    """Log rotated amplitudes for many records.

    Returns ``(values, ok)``; entries with ``ok == False`` had a vanishing
    rotated amplitude and hold NaN.
    """
    bases = np.asarray(bases, dtype=np.int8)
    bits = np.asarray(bits, dtype=np.uint8)
    _as_bits(rbm, bits)
    out = np.empty(bits.shape[0], dtype=np.complex128)
    for tau, idx in _group_by_support(bases).items():
        for chunk in _chunks(idx, len(tau)):
            sigma, w = _expand(rbm, bases[chunk], bits[chunk], tau)
            lp = log_psi(rbm, sigma)
            shift = lp.real.max(axis=1, keepdims=True)
            total = (w * np.exp(lp - shift)).sum(axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                out[chunk] = shift[:, 0] + np.log(total)
            out[chunk[np.abs(total) < DEGENERATE_AMPLITUDE]] = np.nan
    ok = np.isfinite(out)
    return out, ok


def rotated_grad_batch(rbm: RBM, bases, bits) -> tuple[np.ndarray, np.ndarray]:
    """Conjugated derivatives of the rotated log amplitude, shape ``(B, P)``.

    Row ``r`` equals ``conj(sum_s Q(s) Phi(s) / sum_s Q(s))`` with
    quasi-probability ``Q(s) = U(b, s) psi(s)``. Degenerate rows are NaN and
    flagged in the returned mask.
    """
    bases = np.asarray(bases, dtype=np.int8)
    bits = np.asarray(bits, dtype=np.uint8)
    _as_bits(rbm, bits)
    n, h = rbm.n_visible, rbm.n_hidden
    out = np.empty((bits.shape[0], rbm.n_params), dtype=np.complex128)
    for tau, idx in _group_by_support(bases).items():
        for chunk in _chunks(idx, len(tau)):
            sigma, w = _expand(rbm, bases[chunk], bits[chunk], tau)
            s = sigma.astype(np.float64)
            th = s @ rbm.W + rbm.d
            lp = s @ rbm.a + log_cosh(th).sum(axis=-1)
            q = w * np.exp(lp - lp.real.max(axis=1, keepdims=True))
            norm = q.sum(axis=1)
            bad = np.abs(norm) < DEGENERATE_AMPLITUDE
            with np.errstate(divide="ignore", invalid="ignore"):
                q = q / norm[:, None]
            t = np.tanh(th)
            g_a = np.einsum("bs,bsi->bi", q, s)
            g_d = np.einsum("bs,bsj->bj", q, t)
            g_w = np.einsum("bs,bsi,bsj->bij", q, s, t).reshape(len(chunk), n * h)
            block = np.conj(np.concatenate([g_a, g_d, g_w], axis=1))
            block[bad] = np.nan
            out[chunk] = block
    ok = np.all(np.isfinite(out), axis=1)
    return out, ok


def _record_arrays(rbm: RBM, record: MeasurementRecord):
    codes = basis_codes(record.basis)
    bits = np.asarray(record.bits, dtype=np.uint8)
    if codes.size != rbm.n_visible:
        raise DimensionError(f"record has {codes.size} qubits, RBM has {rbm.n_visible}")
    return codes[None, :], bits[None, :]


def rotated_psi(rbm: RBM, record: MeasurementRecord) -> complex:
    """Amplitude of the record's outcome in the record's measurement basis."""
    codes, bits = _record_arrays(rbm, record)
    if not _rotated_support(codes[0]):
        return complex(np.exp(log_psi(rbm, bits[0])))
    val, ok = log_rotated_psi_batch(rbm, codes, bits)
    if not ok[0]:
        return 0j
    return complex(np.exp(val[0]))


def rotated_grad_average(rbm: RBM, record: MeasurementRecord) -> np.ndarray:
    codes, bits = _record_arrays(rbm, record)
    g, ok = rotated_grad_batch(rbm, codes, bits)
    if not ok[0]:
        raise DegenerateAmplitudeError(f"rotated amplitude of {record} vanishes")
    return g[0]


def _check_enumerable(rbm: RBM, cap: int):
    if rbm.n_visible > cap:
        raise CapacityError(f"{rbm.n_visible} visible units exceeds enumeration cap of {cap}")


def _enumerate(n: int, chunk: int = 1 << 14):
    for lo in range(0, 2**n, chunk):
        idx = np.arange(lo, min(2**n, lo + chunk), dtype=np.int64)
        shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
        yield ((idx[:, None] >> shifts) & 1).astype(np.uint8)


def partition_function_exact(rbm: RBM, cap: int = MAX_ENUMERATED_QUBITS) -> float:
    """``log sum_s |psi(s)|**2`` by streaming enumeration."""
    _check_enumerable(rbm, cap)
    acc = -np.inf
    for block in _enumerate(rbm.n_visible):
        acc = np.logaddexp(acc, np.logaddexp.reduce(2.0 * np.real(log_psi(rbm, block))))
    return float(acc)


def exact_log_psi(rbm: RBM, cap: int = MAX_ENUMERATED_QUBITS) -> np.ndarray:
    """Log amplitudes over the full space in index order."""
    _check_enumerable(rbm, cap)
    return log_psi(rbm, all_bitstrings(rbm.n_visible))


def exact_probabilities(rbm: RBM, cap: int = MAX_ENUMERATED_QUBITS) -> np.ndarray:
    lp = 2.0 * exact_log_psi(rbm, cap).real
    p = np.exp(lp - lp.max())
    return p / p.sum()


def to_state_vector(rbm: RBM, cap: int = 12) -> StateVector:
    lp = exact_log_psi(rbm, cap)
    return StateVector.from_unnormalized(np.exp(lp - lp.real.max()))


def _hex_pair(z: complex) -> str:
    return f"{float(z.real).hex()} {float(z.imag).hex()}"


def save_params(rbm: RBM, path) -> None:
    """Write parameters as hex floats so the round trip is bit exact."""
    lines = [PARAMS_VERSION, f"n_visible {rbm.n_visible} n_hidden {rbm.n_hidden}"]
    lines += [_hex_pair(z) for z in rbm.params]
    lines.append("end")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_params(path) -> RBM:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty parameter file", 0)
    if lines[0] != PARAMS_VERSION:
        raise ParseError(f"unsupported parameter file version {lines[0]!r}; expected {PARAMS_VERSION!r}", 1)
    try:
        _, n, _, h = lines[1].split()
        n, h = int(n), int(h)
    except (IndexError, ValueError):
        raise ParseError("bad dimension line", 2) from None
    size = n + h + n * h
    body = lines[2 : 2 + size]
    if len(body) != size or len(lines) < 3 + size or lines[2 + size] != "end":
        raise ParseError(f"truncated parameter file: expected {size} parameters", len(lines))
    flat = np.empty(size, dtype=np.complex128)
    for i, line in enumerate(body):
        try:
            re, im = line.split()
            flat[i] = complex(float.fromhex(re), float.fromhex(im))
        except ValueError:
            raise ParseError(f"corrupt parameter at line {i + 3}", i + 3) from None
    return RBM.from_params(flat, n, h)
