"""Per-task orchestration and whole-log runs.

Every task flows through the same three stages: candidate clustering plus
decomposition of cluster representatives, probability filtering into the
per-database memory, then knowledge-enhanced translation against a history
snapshot. Under ``all`` history a knowledge pass over the entire log runs
before any translation; the other modes interleave.

Reports and memory files contain no timestamps or machine paths, so a rerun
with the same inputs reproduces them byte for byte.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import evaluation
from .catalog import SchemaCatalog, load_catalog
from .coder import CoderConfig, NoValidResult, TranslateError, translate, vote
from .execution import ExecLimits
from .gateway import CassetteMiss, GatewayConfig, GatewayError, ModelGateway
from .logstore import CandidateSet, ClusterPartition, TranslationTask, cluster_candidates, load_log
from .memory import Memory, MemoryStoreError
from .parsing import ParseError, ParserConfig, decompose, dedup, units_from_trace
from .validation import ValidatorConfig, score_and_filter

logger = logging.getLogger(__name__)

ABLATIONS = ("history", "validator", "ranking", "schema_linking", "all")


class ConfigError(Exception):
    """Run configuration references missing paths or invalid modes."""


@dataclass
class RunConfig:
    log_path: str
    db_dir: str
    run_dir: str
    memory_dir: str | None = None  # default: <run_dir>/memory
    history: str = "all"
    tau: float = 0.3
    shots: int = 30
    paths: int = 5
    temperature: float = 0.8
    timeout: float = 30.0
    max_rows: int = 10_000
    gateway_mode: str = "mock"
    cassette_path: str | None = None
    seed: int = 0
    embed_dim: int = 64
    ablation: str | None = None
    parser_max_steps: int = 8

    def validate(self) -> None:
        if not Path(self.log_path).is_file():
            raise ConfigError(f"log file not found: {self.log_path}")
        if not Path(self.db_dir).is_dir():
            raise ConfigError(f"database directory not found: {self.db_dir}")
        if self.history not in ("self_only", "accumulated", "all"):
            raise ConfigError(f"unknown history mode {self.history!r}")
        if self.ablation is not None and self.ablation not in ABLATIONS:
            raise ConfigError(f"unknown ablation {self.ablation!r}")
        if self.gateway_mode == "replay":
            if not self.cassette_path:
                raise ConfigError("replay mode requires a cassette path")
            if not Path(self.cassette_path).is_file():
                raise ConfigError(f"cassette not found: {self.cassette_path}")

    def effective_history(self) -> str:
        return "self_only" if self.ablation == "history" else self.history

    def effective_tau(self) -> float:
        return 0.0 if self.ablation == "validator" else self.tau

    def coder_config(self) -> CoderConfig:
        return CoderConfig(
            shots=self.shots,
            paths=self.paths,
            sampling_temperature=self.temperature,
            schema_linking=self.ablation != "schema_linking",
            random_demo_seed=self.seed if self.ablation == "ranking" else None,
        )

    def limits(self) -> ExecLimits:
        return ExecLimits(timeout=self.timeout, max_rows=self.max_rows)

    def summary(self) -> dict:
        """Semantic knobs only: no filesystem paths and no gateway transport,
        so a faithful replay produces a byte-identical report."""
        return {
            "history": self.history,
            "tau": self.tau,
            "shots": self.shots,
            "paths": self.paths,
            "temperature": self.temperature,
            "timeout": self.timeout,
            "max_rows": self.max_rows,
            "seed": self.seed,
            "embed_dim": self.embed_dim,
            "ablation": self.ablation,
        }


class PipelineState:
    """Shared per-run resources: catalogs, memories, the gateway.

    The service reuses the same stage functions across requests by injecting
    its own long-lived gateway and caches.
    """

    def __init__(self, config: RunConfig, *, gateway=None, catalogs=None, memories=None,
                 validate=True):
        if validate:
            config.validate()
        self.config = config
        self.run_dir = Path(config.run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.memory_dir = Path(config.memory_dir or self.run_dir / "memory")
        self.memory_dir.mkdir(parents=True, exist_ok=True)
        if config.gateway_mode == "record" and not config.cassette_path:
            config.cassette_path = str(self.run_dir / "cassettes" / "run.jsonl")
        self.gateway = gateway or ModelGateway(
            GatewayConfig(
                mode=config.gateway_mode,
                cassette_path=config.cassette_path,
                seed=config.seed,
                embed_dim=config.embed_dim,
                transcript_dir=str(self.run_dir / "transcripts"),
            )
        )
        self._catalogs: dict[str, SchemaCatalog] = catalogs if catalogs is not None else {}
        self._memories: dict[str, Memory] = memories if memories is not None else {}

    def db_path(self, db_id: str) -> Path:
        path = Path(self.config.db_dir) / f"{db_id}.sqlite"
        if not path.is_file():
            raise ConfigError(f"database {db_id!r} not found under {self.config.db_dir}")
        return path

    def catalog(self, db_id: str) -> SchemaCatalog:
        if db_id not in self._catalogs:
            sidecar = Path(self.config.db_dir) / f"{db_id}.columns.json"
            self._catalogs[db_id] = load_catalog(
                self.db_path(db_id), sidecar if sidecar.is_file() else None
            )
        return self._catalogs[db_id]

    def memory(self, db_id: str) -> Memory:
        if db_id not in self._memories:
            path = self.memory_dir / f"{db_id}.jsonl"
            if path.is_file():
                self._memories[db_id] = Memory.load(path)
            else:
                self._memories[db_id] = Memory.create(
                    db_id=db_id,
                    embed_model=self.gateway.config.embed_model,
                    dim=self.config.embed_dim,
                    tau=self.config.effective_tau(),
                    path=path,
                )
        return self._memories[db_id]


@dataclass
class TaskOutcome:
    task: TranslationTask
    predicted_sql: str = ""
    new_units: int = 0
    snapshot_size: int = 0
    partition: ClusterPartition | None = None
    task_error: str | None = None


_TASK_ERRORS = (ParseError, TranslateError, GatewayError, CassetteMiss, MemoryStoreError)


def build_knowledge(task: TranslationTask, cands: CandidateSet, state: PipelineState) -> TaskOutcome:
    """Stages one and two: mine, filter, and store this task's knowledge."""
    outcome = TaskOutcome(task=task)
    db_path = state.db_path(task.db_id)
    catalog = state.catalog(task.db_id)
    limits = state.config.limits()
    partition = cluster_candidates(cands, db_path, limits)
    outcome.partition = partition

    parser_config = ParserConfig(max_steps=state.config.parser_max_steps)
    pooled = []
    for cluster in partition.clusters:
        if not cluster.decomposable:
            continue
        candidate_sql = cands.candidates[cluster.representative_index].sql
        try:
            trace = decompose(
                candidate_sql,
                catalog,
                task.evidence,
                state.gateway,
                db_path=db_path,
                limits=limits,
                config=parser_config,
            )
        except ParseError as exc:
            logger.warning("task %s: %s", task.task_id, exc)
            continue
        pooled.extend(units_from_trace(trace, task, cluster.representative_index, task.db_id))

    unified = dedup(pooled)
    survivors = score_and_filter(unified, partition, ValidatorConfig(tau=state.config.effective_tau()))
    if survivors:
        embeddings = state.gateway.embed_batch([u.question for u in survivors])
        survivors = [replace(u, embedding=tuple(vec)) for u, vec in zip(survivors, embeddings)]
        outcome.new_units = state.memory(task.db_id).insert(survivors)
    return outcome


def translate_task(task: TranslationTask, state: PipelineState, outcome: TaskOutcome) -> TaskOutcome:
    """Stage three: translate against the configured history snapshot."""
    view = state.memory(task.db_id).snapshot(state.config.effective_history(), task)
    outcome.snapshot_size = len(view)
    result = translate(
        task,
        view,
        state.catalog(task.db_id),
        state.config.coder_config(),
        state.gateway,
        state.db_path(task.db_id),
        state.config.limits(),
    )
    outcome.predicted_sql = result.sql
    return outcome


def process_task(task: TranslationTask, cands: CandidateSet, state: PipelineState) -> TaskOutcome:
    """All three stages for one task; per-candidate failures never abort it."""
    if state.config.ablation == "all":
        return majority_only(task, cands, state)
    try:
        outcome = build_knowledge(task, cands, state)
        return translate_task(task, state, outcome)
    except _TASK_ERRORS as exc:
        logger.error("task %s failed: %s", task.task_id, exc)
        return TaskOutcome(task=task, task_error=f"{type(exc).__name__}: {exc}")


def majority_only(task: TranslationTask, cands: CandidateSet, state: PipelineState) -> TaskOutcome:
    """The everything-removed baseline: majority vote over the logged candidates."""
    partition = cluster_candidates(cands, state.db_path(task.db_id), state.config.limits())
    try:
        chosen = vote(partition, [c.sql for c in cands.candidates])
        predicted = cands.candidates[chosen].sql
    except NoValidResult:
        predicted = cands.candidates[0].sql
    return TaskOutcome(task=task, predicted_sql=predicted, partition=partition)


# ---------------------------------------------------------------------------
# Whole-log runs
# ---------------------------------------------------------------------------


@dataclass
class RunReport:
    config: dict
    tasks: list[dict] = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)
    knowledge_units: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "tasks": self.tasks,
            "aggregate": self.aggregate,
            "knowledge_units": self.knowledge_units,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=True)


def run(config: RunConfig) -> RunReport:
    """Process a whole log in sequence order and score the predictions.

    ``all`` history first builds knowledge for every task, then translates;
    the other modes build and translate task by task. Per-task failures are
    recorded in the report and the run continues.
    """
    config.validate()
    state = PipelineState(config)
    entries = load_log(config.log_path)

    outcomes: list[TaskOutcome] = []
    if config.ablation == "all":
        for task, cands in entries:
            outcomes.append(process_task(task, cands, state))
    elif config.effective_history() == "all":
        built: dict[str, TaskOutcome] = {}
        for task, cands in entries:
            try:
                built[task.task_id] = build_knowledge(task, cands, state)
            except _TASK_ERRORS as exc:
                logger.error("task %s failed during knowledge pass: %s", task.task_id, exc)
                built[task.task_id] = TaskOutcome(task=task, task_error=f"{type(exc).__name__}: {exc}")
        for task, _ in entries:
            outcome = built[task.task_id]
            if outcome.task_error is not None:
                outcomes.append(outcome)
                continue
            try:
                outcomes.append(translate_task(task, state, outcome))
            except _TASK_ERRORS as exc:
                outcome.task_error = f"{type(exc).__name__}: {exc}"
                outcomes.append(outcome)
    else:
        for task, cands in entries:
            outcomes.append(process_task(task, cands, state))

    _write_predictions(state.run_dir / "predictions.jsonl", outcomes)
    report = _build_report(config, state, outcomes)
    (state.run_dir / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    return report


def _write_predictions(path: Path, outcomes: list[TaskOutcome]) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for outcome in outcomes:
            record = {
                "task_id": outcome.task.task_id,
                "db_id": outcome.task.db_id,
                "sequence_index": outcome.task.sequence_index,
                "predicted_sql": outcome.predicted_sql,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def _build_report(config: RunConfig, state: PipelineState, outcomes: list[TaskOutcome]) -> RunReport:
    report = RunReport(config=config.summary())
    scored: list[int] = []
    by_difficulty: dict[str, list[int]] = {}
    invalid_gold = 0
    for outcome in outcomes:
        task = outcome.task
        entry = {
            "task_id": task.task_id,
            "db_id": task.db_id,
            "sequence_index": task.sequence_index,
            "difficulty": task.difficulty,
            "predicted_sql": outcome.predicted_sql,
            "gold_sql": task.gold_sql,
            "new_units": outcome.new_units,
            "snapshot_size": outcome.snapshot_size,
            "task_error": outcome.task_error,
            "ex": None,
            "invalid_gold": False,
            "pred_error_class": None,
        }
        if task.gold_sql is not None:
            score = evaluation.score_prediction(
                outcome.predicted_sql, task.gold_sql, state.db_path(task.db_id), config.limits()
            )
            entry["invalid_gold"] = score.invalid_gold
            entry["pred_error_class"] = score.pred_error_class
            if score.invalid_gold:
                invalid_gold += 1
            else:
                entry["ex"] = score.ex
                scored.append(score.ex)
                if task.difficulty:
                    by_difficulty.setdefault(task.difficulty, []).append(score.ex)
        report.tasks.append(entry)

    report.aggregate = {
        "ex": (sum(scored) / len(scored)) if scored else None,
        "n_scored": len(scored),
        "n_invalid_gold": invalid_gold,
        "ex_by_difficulty": {
            tag: sum(values) / len(values) for tag, values in sorted(by_difficulty.items())
        },
        "units_inserted_total": sum(o.new_units for o in outcomes),
    }
    report.knowledge_units = _ku_stats(outcomes)
    return report


def _ku_stats(outcomes: list[TaskOutcome]) -> dict:
    per_db: dict[str, list[int]] = {}
    for outcome in outcomes:
        per_db.setdefault(outcome.task.db_id, []).append(outcome.snapshot_size)
    stats = {}
    for db_id, sizes in sorted(per_db.items()):
        stats[db_id] = {
            "average": sum(sizes) / len(sizes),
            "min": min(sizes),
            "max": max(sizes),
        }
    every = [s for sizes in per_db.values() for s in sizes]
    if every:
        stats["__overall__"] = {
            "average": sum(every) / len(every),
            "min": min(every),
            "max": max(every),
        }
    return stats
