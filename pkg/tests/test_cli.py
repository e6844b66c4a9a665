import json
import os

import numpy as np
import pytest

from reflectvec.cli import run
from reflectvec.cooc import PmiMatrix

from .conftest import write_corpus


@pytest.fixture
def corpus(tmp_path):
    rng = np.random.default_rng(0)
    tokens = [f"w{int(x) % 60}" for x in rng.zipf(1.3, 6000)]
    return str(write_corpus(tmp_path / "corpus.txt", tokens))


@pytest.fixture
def out(tmp_path, monkeypatch):
    d = tmp_path / "out"
    d.mkdir()
    monkeypatch.setenv("REFLECTVEC_OUT_DIR", str(d))
    return d


def manifests(d):
    return sorted(p for p in os.listdir(d) if p.startswith("manifest-"))


def test_vocab_pmi_spectrum_chain(corpus, out):
    assert run(["vocab", "--input", corpus, "--min-count", "3"]) == 0
    assert (out / "vocab.tsv").read_text().startswith("#total_tokens=6000\n")
    assert run(["pmi", "--vocab", str(out / "vocab.tsv"), "--input", corpus, "--window", "2",
                "--shift-k", "5", "--cooc-out", str(out / "cooc.bin")]) == 0
    pmi = PmiMatrix.load(out / "pmi.f64")
    assert np.array_equal(pmi.values, pmi.values.T)
    assert (out / "cooc.bin").read_bytes()[:8] == b"RVCOOC\x00\x01"
    assert run(["spectrum", "--pmi", str(out / "pmi.f64"), "--bins", "21"]) == 0
    rep = json.loads((out / "spectrum.json").read_text())
    assert rep["n"] == pmi.n and sum(rep["counts"]) == pmi.n
    assert len((out / "spectrum.hist.csv").read_text().splitlines()) == 22
    for m in manifests(out):
        raw = json.loads((out / m).read_text())
        assert set(raw) >= {"argv", "params", "seed", "inputs"}
        assert all(len(h) == 64 for h in raw["inputs"].values())


def test_shift_below_one_fails(corpus, out, capsys):
    run(["vocab", "--input", corpus, "--min-count", "3"])
    code = run(["pmi", "--vocab", str(out / "vocab.tsv"), "--input", corpus, "--shift-k", "0.5"])
    assert code != 0
    assert "k must be >= 1" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["vocab", "--input", "/nonexistent", "--min-count", "3"],
    ["vocab", "--bogus"],
    ["frobnicate"],
    [],
])
def test_bad_invocations_exit_nonzero(argv, out, capsys):
    assert run(argv) != 0
    assert capsys.readouterr().err.strip()


def test_config_violation_is_one_line(corpus, out, capsys):
    run(["vocab", "--input", corpus, "--min-count", "3"])
    code = run(["train", "--input", corpus, "--vocab", str(out / "vocab.tsv"), "--tied", "--dim", "5"])
    err = capsys.readouterr().err
    assert code == 1 and "even" in err and len(err.strip().splitlines()) == 1


def test_no_silent_overwrite(corpus, out, capsys):
    assert run(["vocab", "--input", corpus, "--min-count", "3"]) == 0
    # identical bytes may be rewritten
    assert run(["vocab", "--input", corpus, "--min-count", "3"]) == 0
    before = (out / "vocab.tsv").read_text()
    assert run(["vocab", "--input", corpus, "--min-count", "40"]) == 1
    assert "overwrite" in capsys.readouterr().err
    assert (out / "vocab.tsv").read_text() == before
    assert run(["--overwrite", "vocab", "--input", corpus, "--min-count", "40"]) == 0
    assert (out / "vocab.tsv").read_text() != before


def test_train_eval_and_replay_is_byte_identical(corpus, out, tmp_path):
    vocab = str(out / "vocab.tsv")
    run(["vocab", "--input", corpus, "--min-count", "3"])
    argv = ["train", "--input", corpus, "--vocab", vocab, "--dim", "8", "--epochs", "2", "--seed", "3",
            "--out", str(out / "vec.txt")]
    assert run(argv) == 0
    first = (out / "vec.txt").read_bytes()
    manifest = [m for m in manifests(out) if json.loads((out / m).read_text())["argv"][0] == "train"][0]
    os.remove(out / "vec.txt")
    assert run(["--replay", str(out / manifest)]) == 0
    assert (out / "vec.txt").read_bytes() == first

    sim = tmp_path / "sim.txt"
    sim.write_text("w0 w1 3\nw1 w2 2\nw2 w3 1\nw0 w9 5\n")
    an = tmp_path / "an.txt"
    an.write_text(": s\nw0 w1 w2 w3\nw1 w2 w3 w4\n")
    assert run(["eval", "--embeddings", str(out / "vec.txt"), "--similarity", str(sim),
                "--analogy", str(an)]) == 0
    results = json.loads((out / "eval.json").read_text())
    assert [r["metric"] for r in results] == ["spearman_rho", "accuracy"]
    assert "Model" in (out / "eval.txt").read_text()


def test_tied_train_writes_mask(corpus, out):
    run(["vocab", "--input", corpus, "--min-count", "3"])
    assert run(["train", "--input", corpus, "--vocab", str(out / "vocab.tsv"), "--dim", "8",
                "--epochs", "1", "--tied", "--out", str(out / "t.txt")]) == 0
    assert set((out / "t.txt.mask").read_text().split()) <= {"+1", "-1"}
    log = json.loads((out / "t.txt.log.json").read_text())
    assert log["config"]["lr_decay_multiplier"] == 0.8


def test_verify_claim_writes_report(out):
    assert run(["verify", "--claim", "reflection", "--d", "20", "--seed", "1"]) == 0
    raw = json.loads((out / "verify" / "reflection.json").read_text())
    assert raw["claim"] == "reflection" and raw["pass"] is True
    assert manifests(out / "verify")


def test_verify_all(out):
    assert run(["verify", "--all", "--d", "100", "--seed", "1"]) == 0
    files = sorted(os.listdir(out / "verify"))
    for claim in ("lemma1", "corollary1", "lemma2", "pmi-ensemble", "dependence", "reflection"):
        assert f"{claim}.json" in files


def test_repro_spectrum_small(corpus, out):
    assert run(["repro", "fig2", "--input", corpus, "--min-count", "3", "--window", "2",
                "--control-n", "200"]) == 0
    summary = json.loads((out / "fig2" / "summary.json").read_text())
    assert summary["n"] > 10 and "skewness" in summary
    assert (out / "fig2" / "spectrum.hist.csv").exists()


def test_repro_tying_small(corpus, out, tmp_path):
    sim = tmp_path / "sim.txt"
    sim.write_text("w0 w1 3\nw1 w2 2\nw2 w3 1\n")
    assert run(["repro", "table2", "--input", corpus, "--min-count", "3", "--dim", "8", "--epochs", "1",
                "--similarity", str(sim)]) == 0
    summary = json.loads((out / "table2" / "summary.json").read_text())
    assert summary["criteria"]["half_size"] is True
    assert (out / "table2" / "sgns_wt.txt.mask").exists()
