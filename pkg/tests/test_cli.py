import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from orange.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def _global_args(corpus, **extra):
    args = ["--db-dir", corpus["db_dir"], "--log", corpus["log"], "--mode", "mock", "--seed", "0"]
    for key, value in extra.items():
        args += [f"--{key.replace('_', '-')}", str(value)]
    return args


def test_make_fixtures_command(runner, tmp_path):
    result = runner.invoke(main, ["make-fixtures", "--out", str(tmp_path), "--no-cassettes"])
    assert result.exit_code == 0, result.output
    manifest = json.loads(result.output)
    assert set(manifest["dbs"]) == {"toxicology", "retail", "concerts"}
    assert Path(manifest["log"]).is_file()


def test_evaluate_command(runner, corpus, tmp_path):
    args = _global_args(corpus) + ["evaluate", "--run-dir", str(tmp_path / "run")]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    assert "EX:" in result.output
    report = json.loads((tmp_path / "run" / "report.json").read_text())
    assert report["aggregate"]["n_scored"] == len(report["tasks"])


def test_evaluate_missing_log_is_config_error(runner, corpus, tmp_path):
    args = ["--db-dir", corpus["db_dir"], "--log", str(tmp_path / "absent.jsonl"), "evaluate",
            "--run-dir", str(tmp_path / "run")]
    result = runner.invoke(main, args)
    assert result.exit_code == 1


def test_translate_command(runner, corpus, tmp_path):
    args = _global_args(corpus) + [
        "translate",
        "--db", "toxicology",
        "--question", "How many molecules are there?",
        "--run-dir", str(tmp_path / "run"),
    ]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    assert "SELECT" in result.output.upper()


def test_sweep_command(runner, corpus, tmp_path):
    args = _global_args(corpus) + [
        "sweep", "--param", "tau", "--values", "0,1.0", "--run-dir", str(tmp_path / "sweep"),
    ]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    lines = [l for l in result.output.splitlines() if l and not l.startswith("tau")]
    assert len(lines) == 2


def test_ablate_command(runner, corpus, tmp_path):
    args = _global_args(corpus) + [
        "ablate", "--which", "all", "--run-dir", str(tmp_path / "ablate"),
    ]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    assert "ablate=all EX:" in result.output


def test_ingest_command(runner, corpus, tmp_path):
    out = tmp_path / "ingested.jsonl"
    args = _global_args(corpus) + [
        "ingest", "--tasks", corpus["tasks"], "--out", str(out), "--n", "2",
    ]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    from orange.logstore import load_log

    entries = load_log(out)
    assert len(entries) == 5
    assert all(len(cands.candidates) == 2 for _, cands in entries)
    assert all(
        c.generator_tag == "builtin-zeroshot" for _, cands in entries for c in cands.candidates
    )


def test_build_kb_command(runner, corpus, tmp_path):
    args = _global_args(corpus) + ["build-kb", "--run-dir", str(tmp_path / "kb")]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    assert "inserted" in result.output
    assert (tmp_path / "kb" / "memory" / "toxicology.jsonl").is_file()


def test_replay_command_verifies_reproduction(runner, corpus, tmp_path):
    cassette = tmp_path / "cassette.jsonl"
    run_dir = tmp_path / "original"
    record_args = [
        "--db-dir", corpus["db_dir"], "--log", corpus["log"], "--mode", "mock",
        "--cassette", str(cassette), "evaluate", "--run-dir", str(run_dir),
    ]
    assert runner.invoke(main, record_args).exit_code == 0
    replay_args = [
        "--db-dir", corpus["db_dir"], "--log", corpus["log"],
        "replay", "--run-dir", str(run_dir), "--cassette", str(cassette),
    ]
    result = runner.invoke(main, replay_args)
    assert result.exit_code == 0, result.output
    assert "byte-for-byte" in result.output


def test_version(runner):
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
    assert "orange" in result.output
