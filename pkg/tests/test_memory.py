import math
import random
from dataclasses import replace

import numpy as np
import pytest

from orange.execution import ResultFingerprint
from orange.gateway import mock_embedding
from orange.logstore import TranslationTask
from orange.memory import (
    DemoSet,
    KnowledgeUnit,
    Memory,
    MemoryStoreError,
    Provenance,
    top_k,
)


def _unit(i, task_id="t0", seq=0, sql=None, embedding=None, dim=8):
    if embedding is None:
        embedding = mock_embedding(f"question {i}", dim, 0)
    return KnowledgeUnit(
        unit_id=f"u{i}",
        db_id="db",
        question=f"question {i}",
        sql=sql or f"SELECT {i}",
        reasoning="r",
        exec_preview=((i,),),
        exec_fingerprint=ResultFingerprint(digest=f"d{i}"),
        provenance=Provenance(task_id, seq, 0, i),
        probability=0.5,
        embedding=tuple(embedding),
    )


@pytest.fixture()
def memory(tmp_path):
    return Memory.create("db", embed_model="hash-8", dim=8, tau=0.3, path=tmp_path / "db.jsonl")


def test_insert_assigns_monotone_counters(memory):
    assert memory.insert([_unit(0), _unit(1)]) == 2
    assert [u.inserted_at for u in memory.units] == [0, 1]
    assert memory.insert([_unit(2)]) == 1
    assert memory.units[-1].inserted_at == 2


def test_insert_idempotent(memory):
    unit = _unit(0)
    assert memory.insert([unit]) == 1
    assert memory.insert([unit]) == 0
    assert len(memory.units) == 1


def test_same_sql_different_fingerprint_both_kept(memory):
    a = _unit(0, sql="SELECT x FROM t")
    b = _unit(1, sql="SELECT x FROM t")
    assert memory.insert([a, b]) == 2


def test_whitespace_variants_collide(memory):
    a = _unit(0, sql="SELECT x FROM t")
    b = _unit(1, sql="SELECT   x\nFROM t;")
    b = replace(b, exec_fingerprint=a.exec_fingerprint, unit_id="u1")
    assert memory.insert([a]) == 1
    assert memory.insert([b]) == 0


def test_dimension_mismatch_rejected(memory):
    bad = _unit(0, embedding=[1.0, 0.0])
    with pytest.raises(MemoryStoreError):
        memory.insert([bad])


def test_norm_violation_rejected(memory):
    vec = [0.5] * 8  # norm sqrt(2)
    with pytest.raises(MemoryStoreError):
        memory.insert([_unit(0, embedding=vec)])


def test_wrong_db_rejected(memory):
    unit = _unit(0)
    unit = replace(unit, db_id="other")
    with pytest.raises(MemoryStoreError):
        memory.insert([unit])


def test_round_trip(memory):
    units = [_unit(i, task_id=f"t{i % 2}", seq=i % 2) for i in range(5)]
    memory.insert(units)
    loaded = Memory.load(memory.path)
    assert loaded.header == memory.header
    assert loaded.units == memory.units


def test_file_grows_by_batch(memory):
    memory.insert([_unit(i) for i in range(3)])
    lines = memory.path.read_text().splitlines()
    assert len(lines) == 1 + 3  # header + units


def test_bytes_preview_round_trip(memory):
    unit = _unit(0)
    unit = replace(unit, exec_preview=((b"\x01\x02", None, 1.5),))
    memory.insert([unit])
    loaded = Memory.load(memory.path)
    assert loaded.units[0].exec_preview == ((b"\x01\x02", None, 1.5),)


# --- snapshots -----------------------------------------------------------------


@pytest.fixture()
def staged(memory):
    memory.insert(
        [
            _unit(0, task_id="t0", seq=0),
            _unit(1, task_id="t0", seq=0),
            _unit(2, task_id="t1", seq=1),
            _unit(3, task_id="t2", seq=2),
        ]
    )
    return memory


def test_snapshot_self_only(staged):
    current = TranslationTask(task_id="t1", db_id="db", question="?", sequence_index=1)
    view = staged.snapshot("self_only", current)
    assert [u.unit_id for u in view] == ["u2"]


def test_snapshot_accumulated_includes_own(staged):
    current = TranslationTask(task_id="t1", db_id="db", question="?", sequence_index=1)
    view = staged.snapshot("accumulated", current)
    assert [u.unit_id for u in view] == ["u0", "u1", "u2"]


def test_snapshot_accumulated_at_zero_equals_self(staged):
    current = TranslationTask(task_id="t0", db_id="db", question="?", sequence_index=0)
    self_view = staged.snapshot("self_only", current)
    accumulated = staged.snapshot("accumulated", current)
    assert self_view == accumulated


def test_snapshot_inclusion_chain(staged):
    for task_id, seq in [("t0", 0), ("t1", 1), ("t2", 2), ("t9", 3)]:
        current = TranslationTask(task_id=task_id, db_id="db", question="?", sequence_index=seq)
        self_ids = {u.unit_id for u in staged.snapshot("self_only", current)}
        acc_ids = {u.unit_id for u in staged.snapshot("accumulated", current)}
        all_ids = {u.unit_id for u in staged.snapshot("all")}
        assert self_ids <= acc_ids <= all_ids


def test_snapshot_unknown_mode(staged):
    with pytest.raises(ValueError):
        staged.snapshot("everything")


# --- retrieval ------------------------------------------------------------------


def brute_force_top_k(view, query, k):
    scored = []
    for unit in view:
        score = sum(a * b for a, b in zip(query, unit.embedding))
        scored.append((score, unit))
    scored.sort(key=lambda pair: (-pair[0], pair[1].inserted_at))
    return [unit for _, unit in scored[:k]]


def test_identical_embedding_ranks_first(memory):
    units = [_unit(i) for i in range(10)]
    memory.insert(units)
    query = memory.units[4].embedding
    result = top_k(memory.units, query, 3)
    assert result.demos[0].unit_id == "u4"
    assert result.similarities[0] == pytest.approx(1.0, abs=1e-9)


def test_k_larger_than_memory(memory):
    memory.insert([_unit(i) for i in range(4)])
    result = top_k(memory.units, memory.units[0].embedding, 30)
    assert len(result) == 4
    assert list(result.similarities) == sorted(result.similarities, reverse=True)


def test_k_zero(memory):
    memory.insert([_unit(0)])
    assert len(top_k(memory.units, memory.units[0].embedding, 0)) == 0


def test_negative_k_rejected(memory):
    memory.insert([_unit(0)])
    with pytest.raises(ValueError):
        top_k(memory.units, memory.units[0].embedding, -1)


def test_tie_breaks_toward_earlier_insertion(memory):
    shared = mock_embedding("tied question", 8, 0)
    a = _unit(0, embedding=shared)
    b = _unit(1, embedding=shared)
    memory.insert([a, b])
    result = top_k(memory.units, shared, 2)
    assert [u.unit_id for u in result.demos] == ["u0", "u1"]


def test_top_k_matches_brute_force(memory):
    rng = random.Random(7)
    units = []
    for i in range(200):
        vec = np.array([rng.gauss(0, 1) for _ in range(8)])
        vec /= np.linalg.norm(vec)
        units.append(_unit(i, embedding=[float(v) for v in vec]))
    memory.insert(units)
    for k in (1, 5, 30):
        query = np.array([rng.gauss(0, 1) for _ in range(8)])
        query /= np.linalg.norm(query)
        expected = brute_force_top_k(memory.units, query, k)
        actual = top_k(memory.units, query, k)
        assert [u.unit_id for u in actual.demos] == [u.unit_id for u in expected]


def test_dimension_mismatch_in_view(memory):
    memory.insert([_unit(0)])
    with pytest.raises(MemoryStoreError):
        top_k(memory.units, [1.0, 0.0], 1)


def test_demo_set_invariants():
    with pytest.raises(ValueError):
        DemoSet(demos=(), similarities=(0.4,))
    with pytest.raises(ValueError):
        DemoSet(demos=(_unit(0), _unit(1)), similarities=(0.1, 0.9))


def test_stored_norms_within_tolerance(memory):
    memory.insert([_unit(i) for i in range(20)])
    for unit in memory.units:
        assert abs(math.sqrt(sum(v * v for v in unit.embedding)) - 1.0) <= 1e-6
