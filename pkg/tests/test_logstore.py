import json

import pytest

from orange.catalog import load_catalog
from orange.execution import ExecLimits, execute, results_equal
from orange.gateway import GatewayConfig, ModelGateway
from orange.logstore import (
    Candidate,
    CandidateSet,
    LogFormatError,
    TranslationTask,
    cluster_candidates,
    extract_sql_from_completion,
    generate_candidates,
    load_log,
)


def _cands(*sqls, task_id="t"):
    return CandidateSet(task_id=task_id, candidates=tuple(Candidate(sql=s) for s in sqls))


def brute_force_partition(cands, db_path):
    """Independent oracle: pairwise results_equal over executed candidates."""
    results = [execute(db_path, c.sql, ExecLimits()) for c in cands.candidates]
    groups: list[list[int]] = []
    for i, result in enumerate(results):
        for group in groups:
            if results_equal(results[group[0]], result):
                group.append(i)
                break
        else:
            groups.append([i])
    groups.sort(key=lambda g: (-len(g), g[0]))
    return [tuple(g) for g in groups]


def test_cluster_example_two_vs_one(tiny_db):
    cands = _cands(
        "SELECT COUNT(*) FROM t",          # 3
        "SELECT MAX(a) FROM t",            # 3 (same value!)
        "SELECT MIN(a) FROM t",            # 1
    )
    partition = cluster_candidates(cands, tiny_db)
    assert [c.member_indices for c in partition.clusters] == [(0, 1), (2,)]
    assert [c.representative_index for c in partition.clusters] == [0, 2]


def test_cluster_matches_brute_force(tiny_db):
    cands = _cands(
        "SELECT a FROM t",
        "SELECT a FROM t ORDER BY a DESC",  # same multiset
        "SELECT a + 0 FROM t",              # same values
        "SELECT a FROM t WHERE a > 1",
        "SELECT broken FROM",
    )
    partition = cluster_candidates(cands, tiny_db)
    assert [c.member_indices for c in partition.clusters] == brute_force_partition(cands, tiny_db)


def test_singleton_cluster(tiny_db):
    partition = cluster_candidates(_cands("SELECT 1"), tiny_db)
    assert len(partition.clusters) == 1
    assert partition.clusters[0].representative_index == 0


def test_error_candidates_group_by_class(tiny_db):
    partition = cluster_candidates(_cands("SELEC 1", "SELEC 2"), tiny_db)
    assert len(partition.clusters) == 1
    assert partition.clusters[0].size == 2
    assert not partition.clusters[0].decomposable


def test_representative_is_earliest(tiny_db):
    partition = cluster_candidates(
        _cands("SELECT MIN(a) FROM t", "SELECT COUNT(*) FROM t", "SELECT 1"), tiny_db
    )
    # 1, 3, 1 -> two clusters of sizes [2, 1]; the size-2 cluster groups 0 and 2
    assert partition.clusters[0].member_indices == (0, 2)
    assert partition.clusters[0].representative_index == 0


def test_cluster_size_ordering_with_tie(tiny_db):
    partition = cluster_candidates(
        _cands("SELECT 7", "SELECT 8", "SELECT 8", "SELECT 7"), tiny_db
    )
    assert [c.size for c in partition.clusters] == [2, 2]
    assert [c.representative_index for c in partition.clusters] == [0, 1]


# --- log files ---------------------------------------------------------------


def test_load_log_empty_file(tmp_path):
    path = tmp_path / "log.jsonl"
    path.write_text("")
    assert load_log(path) == []


def test_load_log_single_record(tmp_path):
    path = tmp_path / "log.jsonl"
    record = {
        "task_id": "t1",
        "db_id": "tiny",
        "question": "how many rows?",
        "candidates": [{"sql": "SELECT COUNT(*) FROM t", "generator_tag": "g"}],
    }
    path.write_text(json.dumps(record) + "\n")
    entries = load_log(path)
    assert len(entries) == 1
    task, cands = entries[0]
    assert task.sequence_index == 0
    assert task.gold_sql is None
    assert cands.candidates[0].generator_tag == "g"


def test_load_log_missing_candidates(tmp_path):
    path = tmp_path / "log.jsonl"
    path.write_text(json.dumps({"task_id": "t", "db_id": "d", "question": "q"}) + "\n")
    with pytest.raises(LogFormatError) as err:
        load_log(path)
    assert err.value.line_number == 1


def test_load_log_bad_json_line_number(tmp_path):
    path = tmp_path / "log.jsonl"
    good = json.dumps(
        {"task_id": "t", "db_id": "d", "question": "q", "candidates": [{"sql": "SELECT 1"}]}
    )
    path.write_text(good + "\n{not json\n")
    with pytest.raises(LogFormatError) as err:
        load_log(path)
    assert err.value.line_number == 2


def test_sequence_index_follows_file_order(corpus):
    entries = load_log(corpus["log"])
    assert [task.sequence_index for task, _ in entries] == list(range(len(entries)))


def test_candidate_set_must_be_non_empty():
    with pytest.raises(ValueError):
        CandidateSet(task_id="t", candidates=())


# --- builtin zero-shot generation ---------------------------------------------


def test_generate_candidates_mock(tiny_db):
    catalog = load_catalog(tiny_db)
    gateway = ModelGateway(GatewayConfig(mode="mock", seed=0))
    task = TranslationTask(task_id="t1", db_id="tiny", question="how many rows are in t?")
    cands = generate_candidates(task, catalog, gateway, n=1)
    assert len(cands.candidates) == 1
    assert cands.candidates[0].generator_tag == "builtin-zeroshot"
    assert cands.candidates[0].sql.upper().startswith("SELECT")


def test_generate_candidates_replay_round_trip(tiny_db, tmp_path):
    catalog = load_catalog(tiny_db)
    cassette = tmp_path / "gen.jsonl"
    task = TranslationTask(task_id="t1", db_id="tiny", question="how many rows are in t?")
    recorder = ModelGateway(GatewayConfig(mode="mock", seed=0, cassette_path=str(cassette)))
    recorded = generate_candidates(task, catalog, recorder, n=5)
    replayer = ModelGateway(GatewayConfig(mode="replay", cassette_path=str(cassette)))
    replayed = generate_candidates(task, catalog, replayer, n=5)
    assert [c.sql for c in replayed.candidates] == [c.sql for c in recorded.candidates]


def test_generate_candidates_rejects_zero(tiny_db, mock_gateway):
    catalog = load_catalog(tiny_db)
    task = TranslationTask(task_id="t1", db_id="tiny", question="?")
    with pytest.raises(ValueError):
        generate_candidates(task, catalog, mock_gateway, n=0)


# --- completion extraction ------------------------------------------------------


def test_extract_prefers_last_fence():
    text = "first\n```sql\nSELECT 1\n```\nthen\n```sql\nSELECT 2\n```\n"
    assert extract_sql_from_completion(text) == "SELECT 2"


def test_extract_bare_statement():
    text = "The answer is SELECT a FROM t WHERE a > 1; hope that helps"
    assert extract_sql_from_completion(text) == "SELECT a FROM t WHERE a > 1"


def test_extract_nothing():
    assert extract_sql_from_completion("no sql here at all") is None
