"""Observable estimators: RBM Monte Carlo, per-Pauli averaging, error budgets, ensembles."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .dataset import Dataset, subsample
from .errors import NumericalError
from .exactsim import StateVector, sample_pauli_dataset
from .pauli import ConnectedTable, Observable
from .rbm import RBM, log_psi
from .sampler import SamplerConfig, draw_samples
from .seeding import derive_seed

log = logging.getLogger(__name__)

DEFAULT_N_MC = 100_000
CHEMICAL_ACCURACY = 1.6e-3


@dataclass(frozen=True)
class EstimateReport:
    mean: float
    variance: float
    std_error: float
    n_samples: int
    method: str  # "nn" or "standard"
    imag_mean: float = 0.0
    imag_std_error: float = 0.0
    term_means: tuple[float, ...] = ()

    @property
    def imag_within_bound(self) -> bool:
        """Imaginary residue of the mean is within 5 of its own standard errors."""
        return abs(self.imag_mean) <= 5.0 * self.imag_std_error + 1e-12


@dataclass(frozen=True)
class ShotBudget:
    M: int
    K: int

    def __post_init__(self):
        if self.K < 1 or self.M < self.K:
            raise ValueError(f"budget of {self.M} measurements cannot cover {self.K} terms")
        if self.M % self.K:
            log.info("discarding %d measurement(s) so every term gets %d shots", self.M % self.K, self.S)

    @property
    def S(self) -> int:
        return self.M // self.K

    @classmethod
    def for_observable(cls, obs: Observable, M: int) -> "ShotBudget":
        """Budget over the measured (non-identity) terms."""
        return cls(M, sum(not p.is_identity for p in obs.strings))


@dataclass(frozen=True)
class AccuracyConfig:
    chemical_accuracy: float = CHEMICAL_ACCURACY

    def __post_init__(self):
        if not self.chemical_accuracy > 0:
            raise ValueError("chemical accuracy must be positive")


def local_values(rbm: RBM, obs: Observable, samples, table: ConnectedTable | None = None) -> np.ndarray:
    """``<s|O|psi> / <s|psi>`` for each sampled configuration ``s``."""
    table = ConnectedTable.from_observable(obs) if table is None else table
    samples = np.asarray(samples, dtype=np.uint8)
    uniq, inverse = np.unique(samples, axis=0, return_inverse=True)
    lp0 = log_psi(rbm, uniq)
    elems = table.elements(uniq)
    out = np.zeros(len(uniq), dtype=np.complex128)
    for g, mask in enumerate(table.masks):
        if not mask.any():
            out += elems[:, g]
        else:
            out += elems[:, g] * np.exp(log_psi(rbm, uniq ^ mask) - lp0)
    return out[inverse.reshape(-1)]


def nn_estimate(
    rbm: RBM,
    obs: Observable,
    n_mc: int = DEFAULT_N_MC,
    sampler_cfg: SamplerConfig | None = None,
) -> EstimateReport:
    """Monte Carlo average of local values over samples of ``|psi|**2``."""
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    if rbm.n_visible != obs.n_qubits:
        raise ValueError(f"RBM has {rbm.n_visible} visible units, observable {obs.n_qubits} qubits")
    samples = draw_samples(rbm, sampler_cfg or SamplerConfig(), n_mc)
    loc = local_values(rbm, obs, samples)
    if not np.all(np.isfinite(loc)):
        raise NumericalError("non-finite local values")
    ddof = 1 if n_mc > 1 else 0
    var = float(loc.real.var(ddof=ddof))
    ivar = float(loc.imag.var(ddof=ddof))
    report = EstimateReport(
        mean=float(loc.real.mean()),
        variance=var,
        std_error=math.sqrt(var / n_mc),
        n_samples=n_mc,
        method="nn",
        imag_mean=float(loc.imag.mean()),
        imag_std_error=math.sqrt(ivar / n_mc),
    )
    if not report.imag_within_bound:
        log.warning(
            "imaginary part of the estimate %.3e exceeds 5 standard errors (%.3e)",
            report.imag_mean,
            report.imag_std_error,
        )
    return report


def pauli_outcomes(ds: Dataset, support) -> np.ndarray:
    """Eigenvalues +-1 of a Pauli string for each record, from its support sites."""
    sup = list(support)
    if not sup:
        return np.ones(len(ds))
    parity = ds.bits[:, sup].sum(axis=1) & 1
    return 1.0 - 2.0 * parity


def standard_estimate(
    groups: Mapping[int, Dataset],
    obs: Observable,
    exact_variances: Sequence[float] | None = None,
) -> EstimateReport:
    """Per-term sample averages combined with the observable's coefficients.

    ``exact_variances`` (one per term) replaces the sample variances, as done
    for synthetic data where the prepared state is known.
    """
    c = obs.coefficients
    means, var_terms, shots = [], [], []
    mean = sigma2 = eps2 = 0.0
    for k, (ck, p) in enumerate(obs.terms):
        if p.is_identity:
            means.append(1.0)
            mean += ck
            continue
        recs = groups.get(k)
        s = 0 if recs is None else len(recs)
        if s < 2:
            raise ValueError(f"term {k} ({p}) has {s} record(s); at least 2 are needed")
        vals = pauli_outcomes(recs, p.support)
        m = float(vals.mean())
        v = float(exact_variances[k]) if exact_variances is not None else float(vals.var(ddof=1))
        means.append(m)
        var_terms.append(v)
        shots.append(s)
        mean += ck * m
        sigma2 += ck**2 * v
        eps2 += ck**2 * v / s
    if not shots:
        n_eff = 1
    elif len(set(shots)) == 1:
        n_eff = shots[0]
    else:
        n_eff = int(round(sigma2 / eps2)) if eps2 > 0 else min(shots)
    return EstimateReport(
        mean=mean,
        variance=sigma2,
        std_error=math.sqrt(eps2),
        n_samples=n_eff,
        method="standard",
        term_means=tuple(means),
    )


def error_upper_bound(obs: Observable, M: int) -> float:
    """``(sum_k |c_k|)**2 / M``, an upper bound on the squared standard error."""
    if M < 1:
        raise ValueError("M must be >= 1")
    return float(np.abs(obs.coefficients).sum() ** 2 / M)


def erf(x: float) -> float:
    return math.erf(x)


def p_chem_accuracy_standard(sigma2_qc: float, S: int, acc: AccuracyConfig = AccuracyConfig()) -> float:
    """Probability that a normal estimate with variance ``sigma2_qc / S`` lands within accuracy."""
    if S < 1 or sigma2_qc < 0:
        raise ValueError("need S >= 1 and a non-negative variance")
    if sigma2_qc == 0:
        return 1.0
    return erf(acc.chemical_accuracy * math.sqrt(S / (2.0 * sigma2_qc)))


def p_chem_accuracy_max(obs: Observable, S: int, acc: AccuracyConfig = AccuracyConfig()) -> float:
    """Worst-case probability, with ``(sum_k |c_k|)**2`` standing in for the variance."""
    return p_chem_accuracy_standard(float(np.abs(obs.coefficients).sum() ** 2), S, acc)


def empirical_p_within(estimates, exact: float, acc: AccuracyConfig = AccuracyConfig()) -> float:
    est = np.asarray(estimates, dtype=np.float64)
    return float(np.mean(np.abs(est - exact) < acc.chemical_accuracy))


@dataclass(frozen=True)
class SyntheticSource:
    """Fresh Pauli-basis measurements of a known state for every replicate."""

    state: StateVector
    n_measurements: int
    exact_energy: float | None = None

    def dataset(self, obs: Observable, seed: int) -> Dataset:
        return sample_pauli_dataset(self.state, obs, self.n_measurements, seed)


@dataclass(frozen=True)
class PoolSource:
    """Random subsamples of an ingested measurement pool."""

    pool: Dataset
    n_measurements: int
    exact_energy: float | None = None

    def dataset(self, obs: Observable, seed: int) -> Dataset:
        return subsample(self.pool, self.n_measurements, seed)


@dataclass
class EnsembleReport:
    requested: int
    estimates: list[float]
    replicate_ids: list[int]
    mean: float
    variance: float
    p_within: float | None
    failures: list[tuple[int, str]] = field(default_factory=list)

    @property
    def partial(self) -> bool:
        return bool(self.failures)


def _replicate(args) -> tuple[int, float | None, str | None]:
    r, seed, obs, source, train_cfg, sampler_cfg, n_mc = args
    from .trainer import train

    try:
        data = source.dataset(obs, derive_seed(seed, "data"))
        tcfg = replace(train_cfg, seed=derive_seed(seed, "train"))
        scfg = replace(sampler_cfg, seed=derive_seed(seed, "sampler"))
        report = train(data, obs, tcfg, scfg)
        est = nn_estimate(report.rbm, obs, n_mc, replace(scfg, seed=derive_seed(seed, "estimate")))
        return r, est.mean, None
    except (ArithmeticError, ValueError) as exc:
        return r, None, f"{type(exc).__name__}: {exc}"


def ensemble_run(
    obs: Observable,
    source: SyntheticSource | PoolSource,
    R: int,
    train_cfg,
    sampler_cfg: SamplerConfig = SamplerConfig(),
    n_mc: int = DEFAULT_N_MC,
    acc: AccuracyConfig = AccuracyConfig(),
    seed: int = 0,
    replicate_seeds: Sequence[int] | None = None,
    workers: int = 1,
) -> EnsembleReport:
    """Train and measure ``R`` independent RBMs; replicate ``r`` uses ``derive_seed(seed, "replicate", r)``."""
    if R < 2:
        raise ValueError("an ensemble needs R >= 2 replicates")
    seeds = list(replicate_seeds) if replicate_seeds is not None else [
        derive_seed(seed, "replicate", r) for r in range(R)
    ]
    if len(seeds) != R:
        raise ValueError("need one seed per replicate")
    jobs = [(r, seeds[r], obs, source, train_cfg, sampler_cfg, n_mc) for r in range(R)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate, jobs))
    else:
        results = [_replicate(j) for j in jobs]
    results.sort(key=lambda t: t[0])
    ok = [(r, v) for r, v, err in results if err is None]
    failures = [(r, err) for r, _, err in results if err is not None]
    for r, err in failures:
        log.error("replicate %d failed: %s", r, err)
    est = [v for _, v in ok]
    p = None
    if source.exact_energy is not None and est:
        p = empirical_p_within(est, source.exact_energy, acc)
    return EnsembleReport(
        requested=R,
        estimates=est,
        replicate_ids=[r for r, _ in ok],
        mean=float(np.mean(est)) if est else math.nan,
        variance=float(np.var(est, ddof=1)) if len(est) > 1 else (0.0 if est else math.nan),
        p_within=p,
        failures=failures,
    )


def write_histogram_csv(path, report: EnsembleReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["estimate"])
        for v in report.estimates:
            w.writerow([repr(v)])
