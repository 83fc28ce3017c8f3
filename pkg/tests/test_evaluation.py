from orange.evaluation import execution_accuracy, score_prediction
from orange.execution import ExecLimits


def test_gold_vs_gold(tox_db, corpus):
    from orange.logstore import load_log

    for task, _ in load_log(corpus["log"]):
        db_path = corpus["dbs"][task.db_id]
        assert execution_accuracy(task.gold_sql, task.gold_sql, db_path) == 1


def test_distinct_results_score_zero(tiny_db):
    assert execution_accuracy("SELECT 17", "SELECT 18", tiny_db) == 0


def test_prediction_error_scores_zero(tiny_db):
    assert execution_accuracy("SELEC broken", "SELECT 1", tiny_db) == 0
    score = score_prediction("SELEC broken", "SELECT 1", tiny_db)
    assert score.ex == 0
    assert score.pred_error_class == "syntax"
    assert not score.invalid_gold


def test_row_order_insensitive_scoring(tiny_db):
    assert execution_accuracy("SELECT a FROM t ORDER BY a DESC", "SELECT a FROM t", tiny_db) == 1


def test_invalid_gold_flagged(tiny_db):
    score = score_prediction("SELECT 1", "SELECT * FROM missing", tiny_db)
    assert score.invalid_gold
    assert score.ex == 0


def test_limits_apply(tiny_db):
    limits = ExecLimits(timeout=5, max_rows=2)
    # both truncate at 2 rows identically
    assert execution_accuracy("SELECT a FROM t", "SELECT a FROM t", tiny_db, limits) == 1
