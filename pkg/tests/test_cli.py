import json

import numpy as np
import pytest

from stsabc import cli
from stsabc.synthetic import write_synthetic
from stsabc.vecspace import CooccurrenceModel, build_hal

SMALL_CONFIG = """\
seed = 3
output_dir = "out"

[datasets.synthetic]
path = "synthetic.tsv"
lemmas = "synthetic_lemmas.tsv"

[split]
train_fraction = 0.8
bins = 3

[abc]
n_sources = 4
iterations = 2
limit = 5
cv_folds = 3
"""


@pytest.fixture
def small_run(tmp_path):
    cfg = write_synthetic(tmp_path, n_pairs=40, seed=11)
    cfg.write_text(SMALL_CONFIG, encoding="utf-8")
    return cfg


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# --- sim --------------------------------------------------------------------


def test_sim_examples(capsys):
    assert run(capsys, "sim", "--algo", "lcsseq", "--a", "abc", "--b", "abc")[:2] == (0, "1.0000\n")
    assert run(capsys, "sim", "--algo", "jaccard-word", "--a", "a b", "--b", "b c")[1] == "0.3333\n"
    assert run(capsys, "sim", "--algo", "jaccard", "--a", "a b", "--b", "b c")[1] == "0.3333\n"


def test_sim_unknown_algo_lists_ids(capsys):
    code, out, err = run(capsys, "sim", "--algo", "soundex", "--a", "x", "--b", "y")
    assert code == 2 and out == ""
    assert "levenshtein" in err and "jaccard-char3" in err


def test_missing_required_argument(capsys):
    assert run(capsys, "sim", "--algo", "jaro")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "--threads", "0", "sim", "--algo", "jaro", "--a", "a", "--b", "b")[0] == 2


# --- hal-build --------------------------------------------------------------


def test_hal_build_round_trip(tmp_path, capsys):
    corpus = tmp_path / "c.txt"
    corpus.write_text("pes beží domov\nmačka beží von\npes a mačka\n", encoding="utf-8")
    out = tmp_path / "hal.npz"
    code, text, _ = run(capsys, "hal-build", "--corpus", str(corpus), "--out", str(out),
                        "--window", "3", "--min-count", "1")
    assert code == 0 and "words" in text
    saved = CooccurrenceModel.load(out)
    fresh = build_hal(corpus, 3, 1)
    assert saved.vocab == fresh.vocab
    assert saved.counts.toarray().tobytes() == fresh.counts.toarray().tobytes()


def test_hal_build_errors(tmp_path, capsys):
    empty = tmp_path / "e.txt"
    empty.write_text("\n", encoding="utf-8")
    code, _, err = run(capsys, "hal-build", "--corpus", str(empty), "--out", str(tmp_path / "m"))
    assert code == 1 and "hal-build" in err
    assert run(capsys, "hal-build", "--corpus", str(empty), "--out", "m", "--window", "0")[0] == 2
    assert run(capsys, "hal-build", "--corpus", str(tmp_path / "none.txt"), "--out", "m")[0] == 2


# --- config -----------------------------------------------------------------


def test_config_requires_seed(tmp_path, capsys, small_run):
    small_run.write_text(SMALL_CONFIG.replace("seed = 3\n", ""), encoding="utf-8")
    code, _, err = run(capsys, "optimize", "--config", str(small_run), "--model", "linear")
    assert code == 2 and "seed" in err


def test_missing_dataset_path_exits_before_work(tmp_path, capsys, small_run):
    (tmp_path / "synthetic.tsv").unlink()
    code, _, err = run(capsys, "optimize", "--config", str(small_run), "--model", "linear")
    assert code == 2 and "synthetic.tsv" in err
    assert not (tmp_path / "out").exists()


@pytest.mark.parametrize("bad", ['seed = "x"', "seed = -1"])
def test_bad_seed_values(tmp_path, capsys, bad, small_run):
    small_run.write_text(SMALL_CONFIG.replace("seed = 3", bad), encoding="utf-8")
    assert run(capsys, "optimize", "--config", str(small_run), "--model", "linear")[0] == 2


def test_config_paths_relative_to_file(tmp_path, small_run):
    cfg = cli.RunConfig.load(small_run)
    assert cfg.datasets["synthetic"].path == tmp_path / "synthetic.tsv"
    assert cfg.output_dir == tmp_path / "out"
    assert (cfg.n_sources, cfg.iterations, cfg.cv_folds, cfg.bins) == (4, 2, 3, 3)


def test_unknown_model_and_dataset(capsys, small_run):
    assert run(capsys, "optimize", "--config", str(small_run), "--model", "svr")[0] == 2
    assert run(capsys, "optimize", "--config", str(small_run), "--model", "linear",
               "--dataset", "sick")[0] == 2


# --- featurize / optimize ---------------------------------------------------


def test_featurize_writes_csv(tmp_path, capsys, small_run):
    out = tmp_path / "f.csv"
    assert run(capsys, "featurize", "--config", str(small_run), "--out", str(out))[0] == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 41
    assert lines[0].split(",")[-1] == "gold" and len(lines[0].split(",")) == 15


def test_optimize_artifacts_byte_identical(tmp_path, capsys, small_run):
    code, out, _ = run(capsys, "optimize", "--config", str(small_run), "--model", "tree")
    assert code == 0
    assert "best fitness:" in out and "holdout pearson:" in out
    runs = tmp_path / "out" / "runs"
    first = (runs / "synthetic-tree.json").read_bytes()
    first_model = (runs / "synthetic-tree.model.json").read_bytes()
    art = json.loads(first)
    split = art["split"]
    assert split["train"] + split["holdout"] == 40 and abs(split["train"] - 32) <= 3
    assert art["optimization"]["evaluations"] == 4 + 2 * 8 + art["optimization"]["scouts"]
    assert len(art["baselines"]) == 14 and art["deterministic"] is True
    assert json.loads((runs / "synthetic-tree.timing.json").read_text())["total"] > 0

    # a second run in a fresh output dir (no memo store) reproduces the bytes
    assert run(capsys, "optimize", "--config", str(small_run), "--model", "tree",
               "--output-dir", str(tmp_path / "again"))[0] == 0
    again = tmp_path / "again" / "runs"
    assert (again / "synthetic-tree.json").read_bytes() == first
    assert (again / "synthetic-tree.model.json").read_bytes() == first_model


def test_optimize_lemmatized(tmp_path, capsys, small_run):
    assert run(capsys, "optimize", "--config", str(small_run), "--model", "linear",
               "--lemmatized")[0] == 0
    art = json.loads((tmp_path / "out" / "runs" / "synthetic-linear-lemma.json").read_text())
    assert art["lemmatized"] is True


def test_stage_failure_exit_code(tmp_path, capsys, small_run, monkeypatch):
    def broken(*args, **kwargs):
        raise np.linalg.LinAlgError("singular")

    monkeypatch.setattr(cli, "optimize", broken)
    code, _, err = run(capsys, "optimize", "--config", str(small_run), "--model", "linear")
    assert code == 1 and "'optimize'" in err


# --- report -----------------------------------------------------------------


def test_report_empty_dir(tmp_path, capsys):
    (tmp_path / "runs").mkdir()
    code, out, _ = run(capsys, "report", "--runs-dir", str(tmp_path / "runs"))
    assert code == 0
    assert out.startswith("| Method |") and "**" not in out


def test_report_two_runs(tmp_path, capsys, small_run):
    for model in ("linear", "ridge"):
        assert run(capsys, "optimize", "--config", str(small_run), "--model", model)[0] == 0
    runs = str(tmp_path / "out" / "runs")
    code, out, _ = run(capsys, "report", "--runs-dir", runs)
    assert code == 0
    rows = [r for r in out.splitlines() if r.startswith("| linear") or r.startswith("| ridge")]
    assert len(rows) == 2
    assert out.count("Custom ML models") == 1
    code, out, _ = run(capsys, "report", "--runs-dir", runs, "--format", "csv", "--with-baselines")
    assert code == 0
    assert len(out.splitlines()) == 1 + 2 + 14


def test_report_errors(tmp_path, capsys):
    assert run(capsys, "report", "--runs-dir", str(tmp_path), "--format", "html")[0] == 2
    assert run(capsys, "report", "--runs-dir", str(tmp_path / "missing"))[0] == 2


def test_make_synthetic(tmp_path, capsys):
    code, out, _ = run(capsys, "make-synthetic", "--out", str(tmp_path), "--n-pairs", "12")
    assert code == 0
    assert len((tmp_path / "synthetic.tsv").read_text(encoding="utf-8").splitlines()) == 12
