"""Maximum-likelihood reconstruction of an RBM wavefunction from rotated-basis data.

The cost is the negative log-likelihood (nats per record)

    NLL = log Z - mean_D log |psi(record)|**2,

whose gradient with respect to complex parameters (real part = derivative
w.r.t. the real parts, imaginary part = derivative w.r.t. the imaginary
parts) is

    G = 2 * ( <conj Phi>_model - mean_D conj(<Phi>_Q) ).
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dataset import Dataset, split
from .errors import CapacityError, NumericalError
from .exactsim import all_bitstrings
from .pauli import Observable
from .rbm import (
    MAX_ENUMERATED_QUBITS,
    RBM,
    exact_probabilities,
    log_derivatives,
    log_rotated_psi_batch,
    partition_function_exact,
    rotated_grad_batch,
)
from .sampler import ParallelTempering, SamplerConfig
from .seeding import derive_seed

log = logging.getLogger(__name__)

SELECTION_RULES = ("lowest-energy", "lowest-validation-nll")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    rms_decay: float = 0.9
    rms_epsilon: float = 1e-7
    batch_size: int = 100
    negative_samples: int | None = None  # defaults to batch_size
    epochs: int = 100
    checkpoint_pool: int = 200
    checkpoints_per_epoch: int = 1
    selection_rule: str = "lowest-energy"
    selection_n_mc: int = 10_000
    n_hidden: int | None = None  # defaults to the qubit count
    init_scale: float = 0.01
    train_fraction: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.rms_decay < 1:
            raise ValueError("rms_decay must lie in (0, 1)")
        if not self.rms_epsilon > 0:
            raise ValueError("rms_epsilon must be positive")
        if not 1 <= self.batch_size <= 10_000:
            raise ValueError("batch_size must lie in [1, 10000]")
        if self.negative_samples is not None and self.negative_samples < 1:
            raise ValueError("negative_samples must be >= 1")
        if self.epochs < 0 or self.checkpoint_pool < 1 or self.selection_n_mc < 1:
            raise ValueError("epochs >= 0, checkpoint_pool >= 1 and selection_n_mc >= 1 required")
        if self.checkpoints_per_epoch < 1:
            raise ValueError("checkpoints_per_epoch must be >= 1")
        if self.selection_rule not in SELECTION_RULES:
            raise ValueError(f"selection_rule must be one of {SELECTION_RULES}")

    @property
    def n_negative(self) -> int:
        return self.batch_size if self.negative_samples is None else self.negative_samples


@dataclass
class OptimizerState:
    """Running mean of squared gradients, real parts first then imaginary parts."""

    g: np.ndarray

    @classmethod
    def zeros(cls, n_params: int) -> "OptimizerState":
        return cls(np.zeros(2 * n_params))


@dataclass
class TrainReport:
    val_nll: list[float]  # per epoch
    train_nll: list[float]  # per epoch, on a fixed training subset
    initial_val_nll: float
    selected_id: int  # checkpoint id; 0 is the initial parameters, then sequential
    selected_val_nll: float
    selected_energy: float | None
    pool_ids: list[int]
    rbm: RBM
    skipped_records: int = 0
    energies: dict[int, float] = field(default_factory=dict)


def _log_z(rbm: RBM, cap: int) -> float:
    if rbm.n_visible > cap:
        raise CapacityError(
            f"{rbm.n_visible} qubits exceeds the exact partition-function cap of {cap}; "
            "NLL is not evaluated approximately"
        )
    return partition_function_exact(rbm, cap)


def nll_with_skips(rbm: RBM, ds: Dataset, cap: int = MAX_ENUMERATED_QUBITS) -> tuple[float, int]:
    """NLL and the number of records dropped for a vanishing rotated amplitude."""
    log_amp, ok = log_rotated_psi_batch(rbm, ds.bases, ds.bits)
    skipped = int((~ok).sum())
    if skipped:
        log.warning("skipped %d record(s) with vanishing rotated amplitude", skipped)
    if skipped == len(ds):
        raise NumericalError("every record has a vanishing rotated amplitude")
    return _log_z(rbm, cap) - float(np.mean(2.0 * log_amp[ok].real)), skipped


def nll(rbm: RBM, ds: Dataset, cap: int = MAX_ENUMERATED_QUBITS) -> float:
    return nll_with_skips(rbm, ds, cap)[0]


def positive_phase(rbm: RBM, batch: Dataset) -> tuple[np.ndarray, int]:
    g, ok = rotated_grad_batch(rbm, batch.bases, batch.bits)
    skipped = int((~ok).sum())
    if skipped == len(batch):
        raise NumericalError("every record in the batch has a vanishing rotated amplitude")
    return g[ok].mean(axis=0), skipped


def gradient(rbm: RBM, batch: Dataset, negative) -> np.ndarray:
    """NLL gradient with a Monte Carlo model phase from ``negative`` samples."""
    negative = np.asarray(negative)
    if len(batch) == 0 or negative.shape[0] == 0:
        raise ValueError("batch and negative samples must be nonempty")
    model = np.conj(log_derivatives(rbm, negative)).mean(axis=0)
    data, _ = positive_phase(rbm, batch)
    return 2.0 * (model - data)


def exact_model_phase(rbm: RBM, cap: int = MAX_ENUMERATED_QUBITS) -> np.ndarray:
    """``<conj Phi>`` under ``|psi|**2`` by full enumeration."""
    p = exact_probabilities(rbm, cap)
    return p @ np.conj(log_derivatives(rbm, all_bitstrings(rbm.n_visible)))


def exact_gradient(rbm: RBM, ds: Dataset, cap: int = MAX_ENUMERATED_QUBITS) -> np.ndarray:
    """Gradient of :func:`nll` over all of ``ds`` with the model phase enumerated."""
    data, _ = positive_phase(rbm, ds)
    return 2.0 * (exact_model_phase(rbm, cap) - data)


def rmsprop_step(rbm: RBM, opt: OptimizerState, grad, cfg: TrainConfig) -> tuple[RBM, OptimizerState]:
    """One RMSprop update treating real and imaginary parts as separate parameters."""
    grad = np.asarray(grad, dtype=np.complex128)
    if grad.shape != (rbm.n_params,):
        raise ValueError(f"gradient has shape {grad.shape}, expected ({rbm.n_params},)")
    if not np.all(np.isfinite(grad)):
        raise NumericalError("non-finite gradient; update rejected")
    flat = np.concatenate([grad.real, grad.imag])
    g = cfg.rms_decay * opt.g + (1.0 - cfg.rms_decay) * flat**2
    step = cfg.learning_rate * flat / (np.sqrt(g) + cfg.rms_epsilon)
    n = rbm.n_params
    params = rbm.params - (step[:n] + 1j * step[n:])
    if not np.all(np.isfinite(params)):
        raise NumericalError("update produced non-finite parameters")
    return rbm.with_params(params), OptimizerState(g)


class _Pool:
    """Keeps the ``size`` checkpoints with the lowest validation NLL."""

    def __init__(self, size: int):
        self.size = size
        self._heap: list[tuple[float, int, RBM]] = []  # max-heap on nll via negation

    def offer(self, value: float, ckpt_id: int, rbm: RBM):
        item = (-value, -ckpt_id, rbm)
        if len(self._heap) < self.size:
            heapq.heappush(self._heap, item)
        elif item[:2] > self._heap[0][:2]:
            heapq.heapreplace(self._heap, item)

    def members(self) -> list[tuple[int, float, RBM]]:
        """``(id, nll, rbm)`` sorted by checkpoint id."""
        return sorted(((-i, -v, r) for v, i, r in self._heap), key=lambda t: t[0])


def train(
    ds: Dataset,
    obs: Observable,
    cfg: TrainConfig = TrainConfig(),
    sampler_cfg: SamplerConfig = SamplerConfig(),
    progress: Callable[[str], None] | None = None,
    nll_cap: int = MAX_ENUMERATED_QUBITS,
) -> TrainReport:
    """Fit an RBM to ``ds`` and pick a checkpoint by ``cfg.selection_rule``.

    Negative samples come from persistent tempered chains that are refreshed
    with the current parameters before every update. ``progress`` receives one
    ``epoch <i> nll_val <v> nll_train <t>`` line per epoch.
    """
    if ds.n_qubits != obs.n_qubits:
        raise ValueError(f"dataset has {ds.n_qubits} qubits, observable has {obs.n_qubits}")
    train_ds, val_ds = split(ds, cfg.train_fraction, derive_seed(cfg.seed, "split"))
    rng = np.random.default_rng(derive_seed(cfg.seed, "batches"))
    monitor = train_ds.take(
        rng.choice(len(train_ds), size=min(len(train_ds), len(val_ds)), replace=False)
    )
    rbm = RBM.random(ds.n_qubits, cfg.n_hidden, scale=cfg.init_scale, seed=derive_seed(cfg.seed, "init"))
    opt = OptimizerState.zeros(rbm.n_params)
    chains = ParallelTempering(rbm, sampler_cfg, seed=derive_seed(sampler_cfg.seed, cfg.seed, "negative"))
    chains.burn_in()

    pool = _Pool(cfg.checkpoint_pool)
    initial_val, skipped = nll_with_skips(rbm, val_ds, nll_cap)
    pool.offer(initial_val, 0, rbm)
    val_hist, train_hist = [], []
    n_train = len(train_ds)
    starts = list(range(0, n_train, cfg.batch_size))
    # batch indices after which an intra-epoch checkpoint is taken; the last
    # one always coincides with the end of the epoch
    marks = {len(starts) * (k + 1) // cfg.checkpoints_per_epoch - 1 for k in range(cfg.checkpoints_per_epoch)}
    ckpt = 0

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n_train)
        for b, lo in enumerate(starts):
            batch = train_ds.take(order[lo : lo + cfg.batch_size])
            chains.set_rbm(rbm)
            negative = chains.sample(cfg.n_negative)
            rbm, opt = rmsprop_step(rbm, opt, gradient(rbm, batch, negative), cfg)
            if b in marks:
                v, s = nll_with_skips(rbm, val_ds, nll_cap)
                skipped += s
                ckpt += 1
                pool.offer(v, ckpt, rbm)
        t, _ = nll_with_skips(rbm, monitor, nll_cap)
        val_hist.append(v)
        train_hist.append(t)
        if progress is not None:
            progress(f"epoch {epoch} nll_val {v!r} nll_train {t!r}")

    # never select something worse than where training started
    members = [m for m in pool.members() if m[1] <= initial_val]
    energies: dict[int, float] = {}
    if cfg.selection_rule == "lowest-validation-nll":
        best = min(members, key=lambda m: (m[1], m[0]))
        energy = None
    else:
        from .estimator import nn_estimate

        select_cfg = SamplerConfig(
            n_chains=sampler_cfg.n_chains,
            betas=sampler_cfg.betas,
            sweeps_burn_in=sampler_cfg.sweeps_burn_in,
            sweeps_between_samples=sampler_cfg.sweeps_between_samples,
            seed=derive_seed(sampler_cfg.seed, cfg.seed, "select"),
            backend=sampler_cfg.backend,
        )
        for ckpt_id, _, r in members:
            energies[ckpt_id] = nn_estimate(r, obs, cfg.selection_n_mc, select_cfg).mean
        best = min(members, key=lambda m: (energies[m[0]], m[0]))
        energy = energies[best[0]]
    return TrainReport(
        val_nll=val_hist,
        train_nll=train_hist,
        initial_val_nll=initial_val,
        selected_id=best[0],
        selected_val_nll=best[1],
        selected_energy=energy,
        pool_ids=[m[0] for m in members],
        rbm=best[2],
        skipped_records=skipped,
        energies=energies,
    )
