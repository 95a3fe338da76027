"""Parallel-tempering Metropolis sampling of ``p(s) ~ |psi(s)|**2``.

Each chain at inverse temperature ``beta`` targets ``|psi|**(2*beta)``. A
sweep is ``N`` sequential single-bit-flip proposals, each aimed at a site
drawn uniformly from ``N + 1`` slots, the extra slot being a null move. The
random scan plus the null slot keep the chain aperiodic even when every flip
is accepted (the uniform state), where a fixed scan would only complement the
configuration. After every sweep, adjacent chains attempt a configuration
exchange, lowest pair first. Samples are read from the ``beta = 1`` chain.
All random numbers are drawn up front from one numpy generator, so the
compiled and fallback kernels produce the same stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import get_kernel
from .rbm import RBM, log_psi

_CHUNK_UNIFORMS = 1 << 18


def linear_ladder(n_chains: int, beta_min: float = 0.2) -> tuple[float, ...]:
    if n_chains == 1:
        return (1.0,)
    return tuple(float(b) for b in np.linspace(beta_min, 1.0, n_chains))


@dataclass(frozen=True)
class SamplerConfig:
    n_chains: int = 20
    betas: tuple[float, ...] | None = None
    sweeps_burn_in: int = 100
    sweeps_between_samples: int = 1
    seed: int = 0
    beta_min: float = 0.2
    backend: str | None = field(default=None, compare=False)

    def __post_init__(self):
        betas = linear_ladder(self.n_chains, self.beta_min) if self.betas is None else tuple(float(b) for b in self.betas)
        if len(betas) != self.n_chains:
            raise ValueError(f"{self.n_chains} chains but {len(betas)} inverse temperatures")
        if any(not 0.0 < b <= 1.0 for b in betas):
            raise ValueError("inverse temperatures must lie in (0, 1]")
        if any(b1 >= b2 for b1, b2 in zip(betas, betas[1:])):
            raise ValueError("inverse temperatures must be strictly increasing")
        if betas[-1] != 1.0:
            raise ValueError("the last inverse temperature must be 1.0")
        if self.sweeps_burn_in < 0 or self.sweeps_between_samples < 1:
            raise ValueError("burn-in must be >= 0 and thinning >= 1")
        object.__setattr__(self, "betas", betas)


class ParallelTempering:
    """Persistent tempered chains; call :meth:`set_rbm` after parameter updates."""

    def __init__(self, rbm: RBM, cfg: SamplerConfig, seed=None):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed if seed is None else seed)
        self.kernel = get_kernel(cfg.backend)
        self.betas = np.array(cfg.betas, dtype=np.float64)
        self.sigma = self.rng.integers(0, 2, size=(cfg.n_chains, rbm.n_visible), dtype=np.uint8)
        self.stats = np.zeros(4, dtype=np.int64)
        self.set_rbm(rbm)

    def set_rbm(self, rbm: RBM):
        if rbm.n_visible != self.sigma.shape[1]:
            raise ValueError("RBM size changed under a running sampler")
        self.rbm = rbm
        self._a_re = np.ascontiguousarray(rbm.a.real)
        self._w_re = np.ascontiguousarray(rbm.W.real)
        self._w_im = np.ascontiguousarray(rbm.W.imag)
        th = self.sigma.astype(np.float64) @ rbm.W + rbm.d
        self._th_re = np.ascontiguousarray(th.real)
        self._th_im = np.ascontiguousarray(th.imag)
        self._logp = np.ascontiguousarray(2.0 * np.real(log_psi(rbm, self.sigma)))

    def _run(self, n_sweeps: int, out: np.ndarray, thin: int):
        c, n = self.sigma.shape
        step = max(1, _CHUNK_UNIFORMS // (c * n)) * thin
        row, done = 0, 0
        while done < n_sweeps:
            m = min(step, n_sweeps - done)
            sites = self.rng.integers(0, n + 1, size=(m, c, n), dtype=np.int32)
            flip_u = self.rng.random((m, c, n))
            swap_u = self.rng.random((m, c - 1))
            row = self.kernel(
                self._a_re, self._w_re, self._w_im, self.sigma, self._th_re, self._th_im,
                self._logp, self.betas, sites, flip_u, swap_u, out, row, thin, self.stats,
            )
            done += m
        return row

    def burn_in(self, n_sweeps: int | None = None):
        n_sweeps = self.cfg.sweeps_burn_in if n_sweeps is None else n_sweeps
        self._run(n_sweeps, np.empty((0, self.sigma.shape[1]), dtype=np.uint8), 1)

    def sample(self, n_samples: int) -> np.ndarray:
        if n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        thin = self.cfg.sweeps_between_samples
        out = np.empty((n_samples, self.sigma.shape[1]), dtype=np.uint8)
        self._run(n_samples * thin, out, thin)
        return out

    @property
    def flip_acceptance(self) -> float:
        return self.stats[0] / max(1, self.stats[1])

    @property
    def swap_acceptance(self) -> float:
        return self.stats[2] / max(1, self.stats[3])


def draw_samples(rbm: RBM, cfg: SamplerConfig, n_samples: int) -> np.ndarray:
    """``(n_samples, N)`` uint8 configurations from fresh chains after burn-in."""
    pt = ParallelTempering(rbm, cfg)
    pt.burn_in()
    return pt.sample(n_samples)


def metropolis_sweep(rbm: RBM, sigma, beta: float, rng: np.random.Generator, backend: str | None = None) -> np.ndarray:
    """One sweep of ``N`` random-site flip proposals on a single chain at ``beta``."""
    s = np.array(sigma, dtype=np.uint8).reshape(1, -1)
    n = s.shape[1]
    th = s.astype(np.float64) @ rbm.W + rbm.d
    get_kernel(backend)(
        np.ascontiguousarray(rbm.a.real),
        np.ascontiguousarray(rbm.W.real),
        np.ascontiguousarray(rbm.W.imag),
        s,
        np.ascontiguousarray(th.real),
        np.ascontiguousarray(th.imag),
        np.array([2.0 * np.real(log_psi(rbm, s[0]))]),
        np.array([float(beta)]),
        rng.integers(0, n + 1, size=(1, 1, n), dtype=np.int32),
        rng.random((1, 1, n)),
        np.empty((1, 0)),
        np.empty((0, n), dtype=np.uint8),
        0,
        1,
        np.zeros(4, dtype=np.int64),
    )
    return s[0]


def swap_probability(beta_i: float, beta_j: float, logp_i: float, logp_j: float) -> float:
    """Acceptance of exchanging configurations between two tempered chains.

    ``logp`` is ``log|psi|**2`` of the chain's current configuration.
    """
    arg = (beta_i - beta_j) * (logp_j - logp_i)
    return 1.0 if arg >= 0.0 else math.exp(arg)


def tempering_swap(beta_i: float, beta_j: float, logp_i: float, logp_j: float, rng: np.random.Generator) -> bool:
    return bool(rng.random() < swap_probability(beta_i, beta_j, logp_i, logp_j))
