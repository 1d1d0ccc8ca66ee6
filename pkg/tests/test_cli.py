import json
import hashlib
from pathlib import Path

import pytest

from affordance.cli import main


def digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def mined(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus"
    assert main(["synth", "--out", str(corpus), "--seed", "0",
                 "--shows", "alpha,beta", "--scenes-per-show", "3"]) == 0
    dataset = root / "data.jsonl"
    assert main(["mine", "--corpus", str(corpus), "--out", str(dataset),
                 "--feat-dim", "32", "--auto-accept"]) == 0
    return root, corpus, dataset


def test_cluster_deterministic_checksum(mined):
    root, _, dataset = mined
    v1 = root / "v1.txt"
    v2 = root / "v2.txt"
    assert main(["cluster", "--dataset", str(dataset), "--vocab", str(v1),
                 "--k", "5", "--seed", "7"]) == 0
    assert main(["cluster", "--dataset", str(dataset), "--vocab", str(v2),
                 "--k", "5", "--seed", "7"]) == 0
    assert digest(v1) == digest(v2)


def test_cluster_writes_manifest_with_checksums(mined):
    root, _, dataset = mined
    vocab = root / "vm.txt"
    assert main(["cluster", "--dataset", str(dataset), "--vocab", str(vocab),
                 "--k", "4", "--seed", "1"]) == 0
    manifest = json.loads((root / "vm.txt.manifest.json").read_text())
    assert manifest["command"] == "cluster"
    assert manifest["params"]["k"] == 4
    assert manifest["artifact_checksum"] == digest(vocab)
    assert str(dataset) in manifest["inputs"]
    assert manifest["inputs"][str(dataset)] == digest(dataset)


@pytest.fixture(scope="module")
def trained(mined):
    root, corpus, dataset = mined
    vocab = root / "vocab.txt"
    assert main(["cluster", "--dataset", str(dataset), "--vocab", str(vocab),
                 "--k", "5", "--seed", "0"]) == 0
    clf = root / "clf.ckpt"
    assert main(["train-classifier", "--dataset", str(dataset), "--vocab", str(vocab),
                 "--out", str(clf), "--seed", "1", "--hidden", "24", "--lr", "5e-3",
                 "--epochs", "20", "--batch-size", "32"]) == 0
    vae = root / "vae.ckpt"
    assert main(["train-vae", "--dataset", str(dataset), "--vocab", str(vocab),
                 "--out", str(vae), "--seed", "2", "--hidden", "32",
                 "--latent-dim", "4", "--lr", "3e-3", "--lr-decay", "0.99",
                 "--epochs", "80", "--batch-size", "128"]) == 0
    return root, corpus, dataset, vocab, clf, vae


def test_generate_contract(trained, capsys):
    root, corpus, dataset, vocab, clf, vae = trained
    scene = json.loads(Path(dataset).read_text().splitlines()[1])["scene"]
    out = root / "gen.json"
    assert main(["generate", "--dataset", str(dataset), "--images", str(corpus),
                 "--vocab", str(vocab), "--classifier", str(clf), "--vae", str(vae),
                 "--scene", scene, "--point", "64,48", "--samples", "5",
                 "--seed", "3", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["samples"]) == 5
    for sample in doc["samples"]:
        assert len(sample["joints"]) == 17
        assert sample["s_h"] > 0 and sample["s_w"] > 0


def test_generate_deterministic(trained):
    root, corpus, dataset, vocab, clf, vae = trained
    scene = json.loads(Path(dataset).read_text().splitlines()[1])["scene"]
    a = root / "gen_a.json"
    b = root / "gen_b.json"
    for out in (a, b):
        assert main(["generate", "--dataset", str(dataset), "--images", str(corpus),
                     "--vocab", str(vocab), "--classifier", str(clf), "--vae", str(vae),
                     "--scene", scene, "--point", "40,40", "--samples", "3",
                     "--seed", "9", "--out", str(out)]) == 0
    assert digest(a) == digest(b)


def test_score_command(trained):
    root, corpus, dataset, vocab, clf, vae = trained
    scene = json.loads(Path(dataset).read_text().splitlines()[1])["scene"]
    gen = root / "gen.json"
    joints = json.loads(gen.read_text())["samples"][0]["joints"]
    cand = root / "cand.json"
    cand.write_text(json.dumps({"joints": joints}))
    assert main(["score", "--dataset", str(dataset), "--images", str(corpus),
                 "--vocab", str(vocab), "--classifier", str(clf), "--vae", str(vae),
                 "--scene", scene, "--candidate", str(cand), "--m", "5",
                 "--delta", "25", "--seed", "4"]) == 0


def test_exit_code_usage_error():
    assert main(["cluster"]) == 1  # missing required options
    assert main(["no-such-command"]) == 1


def test_exit_code_missing_artifact(tmp_path):
    assert main(["train-vae", "--dataset", str(tmp_path / "none.jsonl"),
                 "--vocab", str(tmp_path / "none.vocab"),
                 "--out", str(tmp_path / "x.ckpt")]) == 2


def test_exit_code_data_error(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("this is not a dataset\n")
    assert main(["cluster", "--dataset", str(bad),
                 "--vocab", str(tmp_path / "v.txt")]) == 2


def test_exit_code_numeric_divergence(mined, tmp_path):
    root, _, dataset = mined
    vocab = root / "vocab_div.txt"
    assert main(["cluster", "--dataset", str(dataset), "--vocab", str(vocab),
                 "--k", "3", "--seed", "0"]) == 0
    rc = main(["train-classifier", "--dataset", str(dataset), "--vocab", str(vocab),
               "--out", str(tmp_path / "c.ckpt"), "--lr", "1e30",
               "--hidden", "8", "--epochs", "2", "--batch-size", "16"])
    assert rc == 3


def test_config_file_default_map(mined, tmp_path):
    root, _, dataset = mined
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"cluster": {"k": 4, "seed": 5}}))
    vocab = tmp_path / "v.txt"
    assert main(["--config", str(cfg), "cluster", "--dataset", str(dataset),
                 "--vocab", str(vocab)]) == 0
    manifest = json.loads((tmp_path / "v.txt.manifest.json").read_text())
    assert manifest["params"]["k"] == 4
    assert manifest["params"]["seed"] == 5


def test_env_var_override(mined, tmp_path, monkeypatch):
    root, _, dataset = mined
    monkeypatch.setenv("AFFORDANCE_CLUSTER_K", "3")
    vocab = tmp_path / "v.txt"
    assert main(["cluster", "--dataset", str(dataset), "--vocab", str(vocab)]) == 0
    manifest = json.loads((tmp_path / "v.txt.manifest.json").read_text())
    assert manifest["params"]["k"] == 3
