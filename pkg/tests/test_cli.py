import csv
import math

import numpy as np
import pytest

from rbmest import cli
from rbmest.dataset import load
from rbmest.estimator import nn_estimate
from rbmest.pauli import load_observable
from rbmest.rbm import RBM, load_params, save_params
from rbmest.seeding import derive_seed

TFIM = "-1.0 XX\n-1.0 ZI\n-1.0 IZ\n"

FAST = [
    "epochs=2",
    "selection_n_mc=300",
    "n_mc=500",
    "sweeps_burn_in=20",
    "n_chains=4",
]


@pytest.fixture
def work(tmp_path):
    (tmp_path / "tfim.txt").write_text(TFIM)
    return tmp_path


def run(args, capsys=None):
    code = cli.main(args)
    out = capsys.readouterr() if capsys is not None else None
    return code, out


def sets(*items):
    out = []
    for item in items:
        out += ["--set", item]
    return out


def test_config_file_and_overrides(work):
    cfg = work / "run.cfg"
    cfg.write_text(f"# comment\nobservable = {work / 'tfim.txt'}\nM = 1e3   # trailing\nseed=4\n")
    conf = cli.load_config(str(cfg), ["seed=9"])
    assert conf["M"] == 1000 and conf["seed"] == 9 and conf["epochs"] == 100


@pytest.mark.parametrize(
    "raw, fragment",
    [
        ({"bogus": "1"}, "unknown"),
        ({"epochs": "ten"}, "epochs"),
        ({"observable": "/no/such/file"}, "not found"),
        ({"selection_rule": "best"}, "selection_rule"),
        ({"learning_rate": "-1"}, "learning_rate"),
        ({"backend": "gpu"}, "backend"),
    ],
)
def test_config_errors(raw, fragment):
    with pytest.raises(cli.ConfigError, match=fragment):
        cli.build_config(raw)


def test_config_syntax_error():
    with pytest.raises(cli.ConfigError, match="line|:2"):
        cli.parse_config_text("a = 1\njunk\n")


def test_exit_codes(work, capsys):
    assert run(["gen-data", "--set", "bogus=1"], capsys)[0] == 2
    assert run(["gen-data", *sets(f"observable={work / 'tfim.txt'}", "M=0", f"output_dir={work}")], capsys)[0] == 2
    assert run(["nonsense"], capsys)[0] == 2
    assert run(["estimate", *sets(f"observable={work / 'tfim.txt'}", f"checkpoint={work / 'missing.rbm'}")], capsys)[0] == 2
    bad = work / "bad.txt"
    bad.write_text("0.5 ZQ\n")
    assert run(["gen-data", *sets(f"observable={bad}", "M=10", f"output_dir={work}")], capsys)[0] == 3


def test_gen_data(work, capsys):
    code, out = run(["gen-data", *sets(f"observable={work / 'tfim.txt'}", "M=1000", f"output_dir={work}")], capsys)
    assert code == 0
    text = (work / "dataset.txt").read_text()
    assert text.startswith("qubits 2\n")
    ds = load(work / "dataset.txt")
    assert len(ds) == 1000
    assert f"E0 {-math.sqrt(5)!r}"[:12] in out.out
    words = [r.basis for r in ds]
    for w in ("XX", "ZZ"):
        # ZI and IZ share the ZZ basis, so it carries two thirds of the records
        expected = 1000 * (2 / 3 if w == "ZZ" else 1 / 3)
        assert abs(words.count(w) - expected) <= 3 * math.sqrt(1000 * (1 / 3) * (2 / 3))


def test_estimate_uniform_x(work, capsys):
    (work / "x.txt").write_text("1.0 X\n")
    save_params(RBM.zeros(1), work / "u.rbm")
    code, out = run(["estimate", *sets(f"observable={work / 'x.txt'}", f"checkpoint={work / 'u.rbm'}", "n_mc=1000", f"output_dir={work}")], capsys)
    assert code == 0
    assert out.out.strip() == "1.000000 +- 0.000000"


def test_estimate_matches_library(work, capsys):
    rng = np.random.default_rng(3)
    p = 3 + 2 + 6
    rbm = RBM.from_params(0.5 * (rng.normal(size=p) + 1j * rng.normal(size=p)), 3, 2)
    save_params(rbm, work / "r.rbm")
    (work / "o.txt").write_text("0.5 XZY\n-1.2 ZZI\n0.3 IIX\n")
    code, _ = run(["estimate", *sets(f"observable={work / 'o.txt'}", f"checkpoint={work / 'r.rbm'}", "n_mc=3000", "seed=5", f"output_dir={work}")], capsys)
    assert code == 0
    from rbmest.sampler import SamplerConfig

    lib = nn_estimate(load_params(work / "r.rbm"), load_observable(work / "o.txt"), 3000, SamplerConfig(seed=derive_seed(5, "estimate")))
    rows = list(csv.DictReader((work / "estimate.csv").open()))
    assert float(rows[0]["mean"]) == lib.mean
    assert float(rows[0]["std_error"]) == lib.std_error


def test_convert_counts(work, capsys):
    (work / "c.txt").write_text("qubits 2\ncounts\nXX 01 3\nZI 11 2\n")
    code, _ = run(["convert-counts", *sets(f"counts={work / 'c.txt'}", f"output_dir={work}")], capsys)
    assert code == 0
    assert len(load(work / "dataset.txt")) == 5


def _pipeline(work, tag):
    out = work / tag
    obs = f"observable={work / 'tfim.txt'}"
    assert cli.main(["gen-data", *sets(obs, "M=600", f"output_dir={out}", "seed=2")]) == 0
    assert cli.main(["train", *sets(obs, f"dataset={out / 'dataset.txt'}", f"output_dir={out}", "seed=2", *FAST)]) == 0
    assert cli.main(["estimate", *sets(obs, f"checkpoint={out / 'checkpoint.rbm'}", f"output_dir={out}", "seed=2", *FAST)]) == 0
    assert cli.main(["compare", *sets(obs, "budgets=300,600", "replicates=2", f"output_dir={out}", "seed=2", *FAST)]) == 0
    return out


def test_pipeline_is_byte_deterministic(work, capsys):
    a = _pipeline(work, "a")
    b = _pipeline(work, "b")
    names = ["dataset.txt", "checkpoint.rbm", "train_log.txt", "estimate.csv", "compare.csv", "histogram_M300.csv", "histogram_M600.csv"]
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    log_lines = (a / "train_log.txt").read_text().splitlines()
    assert log_lines[0].startswith("epoch 1 nll_val ")
    assert log_lines[-1].startswith("selected ")
    rows = list(csv.DictReader((a / "compare.csv").open()))
    assert [int(r["M"]) for r in rows] == [300, 600]
    for r in rows:
        assert 0.0 <= float(r["p_nn"]) <= 1.0 and 0.0 <= float(r["p_qc"]) <= 1.0
    assert float(rows[0]["p_qc"]) <= float(rows[1]["p_qc"])
    assert float(rows[0]["eps2_max"]) == pytest.approx(9 / 300)


def test_compare_pool_mode(work, capsys):
    obs = f"observable={work / 'tfim.txt'}"
    assert cli.main(["gen-data", *sets(obs, "M=900", f"output_dir={work}")]) == 0
    code, _ = run(["compare", *sets(obs, f"dataset={work / 'dataset.txt'}", "budgets=300", "replicates=2", f"output_dir={work}", *FAST)], capsys)
    assert code == 0
    row = next(csv.DictReader((work / "compare.csv").open()))
    assert row["p_nn"] == "nan"
    assert 0.0 <= float(row["p_qc"]) <= 1.0
