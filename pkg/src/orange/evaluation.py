"""Execution accuracy: score a prediction by comparing execution results."""

from __future__ import annotations

from dataclasses import dataclass

from .execution import ExecError, ExecLimits, execute, fingerprint


@dataclass(frozen=True)
class PredictionScore:
    ex: int
    invalid_gold: bool = False
    pred_error_class: str | None = None


def execution_accuracy(pred_sql: str, gold_sql: str, db_path, limits: ExecLimits = ExecLimits()) -> int:
    """1 iff the prediction's canonicalized result equals the gold query's.

    The gold query is assumed valid (callers exclude invalid-gold tasks
    first); a prediction that fails execution scores 0.
    """
    pred_result = execute(db_path, pred_sql, limits)
    if isinstance(pred_result, ExecError):
        return 0
    gold_result = execute(db_path, gold_sql, limits)
    return int(fingerprint(pred_result) == fingerprint(gold_result))


def score_prediction(pred_sql: str, gold_sql: str, db_path, limits: ExecLimits = ExecLimits()) -> PredictionScore:
    """EX plus the bookkeeping flags a report needs.

    Tasks whose gold query itself fails are flagged invalid and excluded
    from the metric instead of polluting it.
    """
    gold_result = execute(db_path, gold_sql, limits)
    if isinstance(gold_result, ExecError):
        return PredictionScore(ex=0, invalid_gold=True)
    pred_result = execute(db_path, pred_sql, limits)
    if isinstance(pred_result, ExecError):
        return PredictionScore(ex=0, pred_error_class=pred_result.error_class)
    return PredictionScore(ex=int(fingerprint(pred_result) == fingerprint(gold_result)))
