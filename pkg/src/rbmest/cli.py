"""Command-line driver: ``rbmest <command> --config run.cfg [--set key=value ...]``.

Commands
    gen-data        sample a synthetic dataset from the exact ground state
    train           fit an RBM to a dataset and save the selected checkpoint
    estimate        Monte Carlo estimate of the observable on a checkpoint
    compare         NN ensemble vs standard estimator over a budget list
    convert-counts  expand a counts file into a dataset file

Every random stream is derived from the single ``seed`` key with
:func:`rbmest.seeding.derive_seed` and a fixed task label, so a command run
twice with the same configuration writes byte-identical files.

Exit status is 0 on success, 2 for usage or configuration errors and 3 for
runtime failures (bad input files, capacity limits, numerical trouble).
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from . import dataset as dsmod
from ._backend import KERNELS
from .errors import CapacityError, DegenerateAmplitudeError, NumericalError, ParseError
from .estimator import (
    AccuracyConfig,
    PoolSource,
    ShotBudget,
    SyntheticSource,
    ensemble_run,
    error_upper_bound,
    nn_estimate,
    p_chem_accuracy_standard,
    standard_estimate,
    write_histogram_csv,
)
from .exactsim import ground_state, pauli_variance_exact, sample_pauli_dataset, sample_per_term
from .pauli import load_observable
from .rbm import load_params, save_params
from .sampler import SamplerConfig
from .seeding import derive_seed
from .trainer import SELECTION_RULES, TrainConfig, train

log = logging.getLogger("rbmest")

EXIT_USAGE = 2
EXIT_RUNTIME = 3


class ConfigError(Exception):
    pass


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text: str) -> tuple[int, ...]:
    items = [t for t in text.replace(",", " ").split() if t]
    if not items:
        raise ValueError("empty list")
    return tuple(_int(t) for t in items)


def _int(text: str) -> int:
    # accept 1e4-style integers
    value = float(text) if "e" in text.lower() else int(text)
    if value != int(value):
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


def _optional(parse):
    return lambda text: None if text.lower() in ("", "none", "auto") else parse(text)


# key -> (parser, default)
SCHEMA = {
    "observable": (str, None),
    "dataset": (str, None),
    "checkpoint": (str, None),
    "counts": (str, None),
    "output_dir": (str, "."),
    "seed": (_int, 0),
    "M": (_int, None),
    "budgets": (_int_list, None),
    "replicates": (_int, 20),
    "workers": (_int, 1),
    "n_mc": (_int, 100_000),
    "chemical_accuracy": (float, 1.6e-3),
    "exact_variances": (_bool, True),
    "exact_energy": (_optional(float), None),
    # trainer
    "learning_rate": (float, 0.01),
    "rms_decay": (float, 0.9),
    "rms_epsilon": (float, 1e-7),
    "batch_size": (_int, 100),
    "negative_samples": (_optional(_int), None),
    "epochs": (_int, 100),
    "checkpoint_pool": (_int, 200),
    "checkpoints_per_epoch": (_int, 1),
    "selection_rule": (str, "lowest-energy"),
    "selection_n_mc": (_int, 10_000),
    "n_hidden": (_optional(_int), None),
    "init_scale": (float, 0.01),
    "train_fraction": (float, 0.9),
    # sampler
    "n_chains": (_int, 20),
    "beta_min": (float, 0.2),
    "sweeps_burn_in": (_int, 100),
    "sweeps_between_samples": (_int, 1),
    "backend": (_optional(str), None),
}

PATH_KEYS = ("observable", "dataset", "checkpoint", "counts")
TRAIN_KEYS = (
    "learning_rate", "rms_decay", "rms_epsilon", "batch_size", "negative_samples", "epochs",
    "checkpoint_pool", "checkpoints_per_epoch", "selection_rule", "selection_n_mc", "n_hidden",
    "init_scale", "train_fraction",
)


@dataclass(frozen=True)
class RunConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def require(self, *keys):
        missing = [k for k in keys if self.values[k] is None]
        if missing:
            raise ConfigError(f"missing required key(s): {', '.join(missing)}")

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(seed=seed, **{k: self.values[k] for k in TRAIN_KEYS})

    def sampler_config(self, seed: int) -> SamplerConfig:
        v = self.values
        return SamplerConfig(
            n_chains=v["n_chains"],
            beta_min=v["beta_min"],
            sweeps_burn_in=v["sweeps_burn_in"],
            sweeps_between_samples=v["sweeps_between_samples"],
            seed=seed,
            backend=v["backend"],
        )

    @property
    def out(self) -> Path:
        return Path(self.values["output_dir"])


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        raw[key] = value
    return raw


def build_config(raw: dict[str, str], check_paths: bool = True) -> RunConfig:
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}")
    values = {}
    for key, (parse, default) in SCHEMA.items():
        if key in raw:
            try:
                values[key] = parse(raw[key])
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from None
        else:
            values[key] = default
    if values["selection_rule"] not in SELECTION_RULES:
        raise ConfigError(f"selection_rule must be one of {', '.join(SELECTION_RULES)}")
    if values["backend"] is not None and values["backend"] not in KERNELS:
        raise ConfigError(f"backend {values['backend']!r} is not available; have {', '.join(sorted(KERNELS))}")
    if check_paths:
        for key in PATH_KEYS:
            if values[key] is not None and not Path(values[key]).is_file():
                raise ConfigError(f"{key} file not found: {values[key]}")
    cfg = RunConfig(values)
    try:  # surface invariant violations as configuration errors
        cfg.train_config(0)
        cfg.sampler_config(0)
        AccuracyConfig(values["chemical_accuracy"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path: str | None, overrides: list[str]) -> RunConfig:
    raw: dict[str, str] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        raw.update(parse_config_text(text, path))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        raw[key.strip()] = value.strip()
    return build_config(raw)


def _fmt(x) -> str:
    return repr(float(x)) if x is not None else "nan"


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_gen_data(cfg: RunConfig) -> int:
    cfg.require("observable", "M")
    if cfg["M"] < 1:
        raise ConfigError("M must be >= 1")
    obs = load_observable(cfg["observable"])
    e0, psi = ground_state(obs)
    ds = sample_pauli_dataset(psi, obs, cfg["M"], derive_seed(cfg["seed"], "gen-data"))
    cfg.out.mkdir(parents=True, exist_ok=True)
    dsmod.save(ds, cfg.out / "dataset.txt")
    print(f"E0 {e0!r}")
    for c, p in obs.terms:
        print(f"term {p} coef {c!r} variance {pauli_variance_exact(psi, p)!r}")
    print(f"wrote {len(ds)} records to {cfg.out / 'dataset.txt'}")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    cfg.require("observable", "dataset")
    obs = load_observable(cfg["observable"])
    ds = dsmod.load(cfg["dataset"])
    cfg.out.mkdir(parents=True, exist_ok=True)
    lines: list[str] = []

    def progress(line: str):
        lines.append(line)
        print(line)

    report = train(
        ds,
        obs,
        cfg.train_config(derive_seed(cfg["seed"], "train")),
        cfg.sampler_config(derive_seed(cfg["seed"], "sampler")),
        progress=progress,
    )
    save_params(report.rbm, cfg.out / "checkpoint.rbm")
    lines.append(
        f"selected {report.selected_id} nll_val {report.selected_val_nll!r} energy {_fmt(report.selected_energy)}"
    )
    if report.skipped_records:
        lines.append(f"skipped_records {report.skipped_records}")
    (cfg.out / "train_log.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(lines[-1])
    return 0


def cmd_estimate(cfg: RunConfig) -> int:
    cfg.require("observable", "checkpoint")
    obs = load_observable(cfg["observable"])
    rbm = load_params(cfg["checkpoint"])
    rep = nn_estimate(rbm, obs, cfg["n_mc"], cfg.sampler_config(derive_seed(cfg["seed"], "estimate")))
    cfg.out.mkdir(parents=True, exist_ok=True)
    _write_csv(
        cfg.out / "estimate.csv",
        ["mean", "variance", "std_error", "n_samples", "imag_mean", "imag_std_error"],
        [[_fmt(rep.mean), _fmt(rep.variance), _fmt(rep.std_error), rep.n_samples,
          _fmt(rep.imag_mean), _fmt(rep.imag_std_error)]],
    )
    print(f"{rep.mean:.6f} +- {rep.std_error:.6f}")
    return 0


def cmd_compare(cfg: RunConfig) -> int:
    cfg.require("observable", "budgets")
    obs = load_observable(cfg["observable"])
    acc = AccuracyConfig(cfg["chemical_accuracy"])
    seed = cfg["seed"]
    pool = dsmod.load(cfg["dataset"]) if cfg["dataset"] is not None else None
    if pool is None:
        e0, psi = ground_state(obs)
        exact_energy = e0
        exact_var = [pauli_variance_exact(psi, p) for p in obs.strings]
    else:
        exact_energy = cfg["exact_energy"]
        exact_var = None
        groups = dsmod.compatible_records(pool, obs)
    train_cfg = cfg.train_config(0)  # replicate seeds are substituted per run
    sampler_cfg = cfg.sampler_config(0)
    cfg.out.mkdir(parents=True, exist_ok=True)
    rows, partial = [], False
    for M in sorted(set(cfg["budgets"])):
        budget = ShotBudget.for_observable(obs, M)
        if pool is None:
            source = SyntheticSource(psi, M, exact_energy)
            std_groups = sample_per_term(psi, obs, budget.S, derive_seed(seed, "standard", M))
        else:
            source = PoolSource(pool, M, exact_energy)
            std_groups = dsmod.compatible_records(dsmod.subsample(pool, M, derive_seed(seed, "standard", M)), obs)
        ens = ensemble_run(
            obs, source, cfg["replicates"], train_cfg, sampler_cfg, cfg["n_mc"], acc,
            seed=derive_seed(seed, "compare", M), workers=cfg["workers"],
        )
        partial |= ens.partial
        write_histogram_csv(cfg.out / f"histogram_M{M}.csv", ens)
        use_exact = exact_var is not None and cfg["exact_variances"]
        std = standard_estimate(std_groups, obs, exact_var if use_exact else None)
        if pool is not None and not use_exact:
            # variance of the whole pool is the better estimate of sigma^2[P_k]
            sigma2 = standard_estimate(groups, obs).variance
        else:
            sigma2 = std.variance
        rows.append([
            M,
            _fmt(ens.mean),
            _fmt(ens.variance),
            _fmt(std.mean),
            _fmt(sigma2 / budget.S),
            _fmt(error_upper_bound(obs, M)),
            _fmt(ens.p_within),
            _fmt(p_chem_accuracy_standard(sigma2, budget.S, acc)),
        ])
        print(f"M {M} nn_mean {ens.mean!r} nn_var {ens.variance!r} qc_eps2 {sigma2 / budget.S!r}")
    _write_csv(cfg.out / "compare.csv", ["M", "nn_mean", "nn_var", "qc_mean", "qc_eps2", "eps2_max", "p_nn", "p_qc"], rows)
    if partial:
        print("warning: some replicates failed; the table is partial", file=sys.stderr)
    return 0


def cmd_convert_counts(cfg: RunConfig) -> int:
    cfg.require("counts")
    ds = dsmod.load_counts(cfg["counts"])
    cfg.out.mkdir(parents=True, exist_ok=True)
    dsmod.save(ds, cfg.out / "dataset.txt")
    print(f"wrote {len(ds)} records to {cfg.out / 'dataset.txt'}")
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "estimate": cmd_estimate,
    "compare": cmd_compare,
    "convert-counts": cmd_convert_counts,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rbmest", description="Neural-network estimators for Pauli-sum observables.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", "-c", help="key = value configuration file")
    parser.add_argument("--set", "-s", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    parser.add_argument("--verbose", "-v", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.set)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"rbmest: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, CapacityError, NumericalError, DegenerateAmplitudeError, ValueError, OSError) as exc:
        print(f"rbmest: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
