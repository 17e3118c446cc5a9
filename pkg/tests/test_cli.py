import json
from pathlib import Path

import pytest

from acrec.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from acrec.domain import Split
from acrec.ingest import read_jsonl
from acrec.pipeline import load_prepared
from acrec.synthetic import SyntheticConfig, write_synthetic_corpus

from conftest import SMALL_SYNTH
from fixtures import write_handtraced_corpus


@pytest.fixture(scope="module")
def cli_corpus(tmp_path_factory):
    """ingest + embed run once; train/eval/recommend tests share the
    artifacts."""
    root = tmp_path_factory.mktemp("cli")
    raw = root / "raw"
    raw.mkdir()
    write_synthetic_corpus(SMALL_SYNTH, raw)
    corpus = root / "corpus"
    cache = root / "cache"
    assert main([
        "--seed", "0", "ingest",
        "--books", str(raw / "books.jsonl"),
        "--interactions", str(raw / "interactions.jsonl"),
        "--out", str(corpus),
        "--per-band", "100",
    ]) == EXIT_OK
    assert main([
        "--seed", "0", "embed",
        "--corpus", str(corpus),
        "--provider", "hash",
        "--dim", "64",
        "--out", str(cache),
    ]) == EXIT_OK
    return root


def test_usage_error_exit_code():
    assert main(["not-a-command"]) == EXIT_USAGE
    assert main(["ingest", "--unknown-flag", "x"]) == EXIT_USAGE
    assert main(["train"]) == EXIT_USAGE  # missing required flags


def test_data_error_exit_code(tmp_path):
    (tmp_path / "b.jsonl").write_text("not json\n")
    (tmp_path / "i.jsonl").write_text("")
    code = main([
        "ingest", "--books", str(tmp_path / "b.jsonl"),
        "--interactions", str(tmp_path / "i.jsonl"),
        "--out", str(tmp_path / "out"),
    ])
    assert code == EXIT_DATA


def test_ingest_handtraced_matches_expected_splits(tmp_path):
    books_path, inter_path, expected = write_handtraced_corpus(tmp_path)
    out = tmp_path / "out"
    assert main([
        "ingest", "--books", str(books_path), "--interactions", str(inter_path),
        "--out", str(out),
    ]) == EXIT_OK
    records, _ = read_jsonl(out / "splits.jsonl")
    by_user = {}
    for r in records:
        by_user.setdefault(r["user_id"], []).append(r)
    for user, exp in expected.items():
        rows = sorted(by_user[user], key=lambda r: r["step_index"])
        assert [r["step_index"] for r in rows] == exp["useful"]
        assert [r["step_index"] for r in rows if r["split"] == "train"] == exp["train"]
        test_rows = [r["step_index"] for r in rows if r["split"] == "test"]
        assert test_rows == [exp["test"]]
    stats = json.loads((out / "stats.json").read_text())
    assert "config_digest" in stats
    # every jsonl artifact embeds the digest in its meta record
    for name in ("books.jsonl", "splits.jsonl", "interactions.jsonl", "ac_texts.jsonl"):
        _, meta = read_jsonl(out / name)
        assert meta.get("config_digest") == stats["config_digest"]


def test_extract_lexicon_writes_store(tmp_path):
    books_path, inter_path, _ = write_handtraced_corpus(tmp_path)
    corpus = tmp_path / "corpus"
    main(["ingest", "--books", str(books_path), "--interactions", str(inter_path),
          "--out", str(corpus)])
    store = tmp_path / "statements.jsonl"
    assert main([
        "extract", "--reviews", str(corpus), "--mode", "lexicon",
        "--out", str(store), "--update-corpus",
    ]) == EXIT_OK
    assert store.exists()
    prepared = load_prepared(corpus)
    assert prepared.ac_texts  # rewritten, still non-empty


def test_train_eval_recommend_dataflow(cli_corpus, capsys):
    corpus = cli_corpus / "corpus"
    cache = cli_corpus / "cache"
    ckpt = cli_corpus / "ckpt"
    assert main([
        "--seed", "1", "train",
        "--corpus", str(corpus), "--cache", str(cache),
        "--model", "acrec", "--out", str(ckpt),
        "--lr", "0.001", "--epochs", "1", "--patience", "1",
    ]) == EXIT_OK
    assert (ckpt / "best" / "manifest.json").exists()
    assert (ckpt / "train_log.jsonl").exists()

    report_path = cli_corpus / "report.json"
    assert main([
        "--seed", "1", "eval",
        "--ckpt", str(ckpt / "best"), "--corpus", str(corpus), "--cache", str(cache),
        "--protocol", "top1of20", "--split", "test", "--out", str(report_path),
    ]) == EXIT_OK
    report = json.loads(report_path.read_text())
    assert report["protocol"] == "top1of20"
    assert set(report["metrics"]["hr"]) == {"1", "5", "10", "50", "100"}
    assert report["n_queries"] == 8

    capsys.readouterr()
    prepared = load_prepared(corpus)
    user = sorted(prepared.histories)[0]
    assert main([
        "recommend", "--ckpt", str(ckpt / "best"), "--corpus", str(corpus),
        "--user", user, "--ac", "a tense gripping mystery", "-k", "5",
    ]) == EXIT_OK
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 5
    assert out[0].split()[0] == "1"


def test_train_determinism_same_seed(cli_corpus, tmp_path):
    corpus = cli_corpus / "corpus"
    cache = cli_corpus / "cache"

    def train_to(path):
        assert main([
            "--seed", "7", "train",
            "--corpus", str(corpus), "--cache", str(cache),
            "--model", "fcn", "--fcn-hidden-layers", "0",
            "--out", str(path), "--epochs", "1", "--patience", "1",
        ]) == EXIT_OK
        return (path / "best" / "params.bin").read_bytes()

    assert train_to(tmp_path / "a") == train_to(tmp_path / "b")


def test_config_file_supplies_defaults_flags_win(cli_corpus, tmp_path):
    corpus = cli_corpus / "corpus"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"per_band": 100, "ac_mode": "verbatim"}))
    raw = cli_corpus / "raw"
    out = tmp_path / "out"
    assert main([
        "--config", str(cfg), "ingest",
        "--books", str(raw / "books.jsonl"),
        "--interactions", str(raw / "interactions.jsonl"),
        "--out", str(out),
    ]) == EXIT_OK
    prepared = load_prepared(out)
    assert prepared.stats["n_users"] == SMALL_SYNTH.n_users  # band sampling applied


def test_recommend_unknown_user_is_data_error(cli_corpus):
    corpus = cli_corpus / "corpus"
    ckpt = cli_corpus / "ckpt"
    code = main([
        "recommend", "--ckpt", str(ckpt / "best"), "--corpus", str(corpus),
        "--user", "nobody", "--ac", "anything wonderful",
    ])
    assert code == EXIT_DATA
