"""Translation logs: tasks, candidate SQL sets, and result clustering.

The log is the integration boundary with whatever system produced the
candidate SQL: an append-only JSONL file, one record per task. Candidates
are grouped by execution-result fingerprint; cluster size is the empirical
consistency signal everything downstream builds on.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .catalog import SchemaCatalog, render_schema
from .execution import ExecLimits, ResultFingerprint, execute, fingerprint
from .gateway import ChatMessage, ChatRequest, ModelGateway
from .prompts import load_prompt
from .sqltext import normalize_sql

BUILTIN_GENERATOR_TAG = "builtin-zeroshot"


class LogFormatError(Exception):
    def __init__(self, line_number: int, reason: str):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number


@dataclass(frozen=True)
class TranslationTask:
    task_id: str
    db_id: str
    question: str
    evidence: str = ""
    gold_sql: str | None = None
    sequence_index: int = 0
    difficulty: str = ""


@dataclass(frozen=True)
class Candidate:
    sql: str
    generator_tag: str = ""


@dataclass(frozen=True)
class CandidateSet:
    task_id: str
    candidates: tuple[Candidate, ...]

    def __post_init__(self) -> None:
        if not self.candidates:
            raise ValueError(f"candidate set for {self.task_id!r} is empty")


@dataclass(frozen=True)
class Cluster:
    fingerprint: ResultFingerprint
    member_indices: tuple[int, ...]
    representative_index: int

    @property
    def size(self) -> int:
        return len(self.member_indices)

    @property
    def decomposable(self) -> bool:
        return not self.fingerprint.is_error


@dataclass(frozen=True)
class ClusterPartition:
    clusters: tuple[Cluster, ...]
    total_candidates: int

    def __post_init__(self) -> None:
        covered = sorted(i for c in self.clusters for i in c.member_indices)
        if covered != list(range(self.total_candidates)):
            raise ValueError("clusters do not partition the candidate indices")
        for cluster in self.clusters:
            if list(cluster.member_indices) != sorted(cluster.member_indices):
                raise ValueError("cluster member indices must be ascending")
            if cluster.representative_index != cluster.member_indices[0]:
                raise ValueError("representative must be the earliest member")
        keys = [(-c.size, c.representative_index) for c in self.clusters]
        if keys != sorted(keys):
            raise ValueError("clusters must be ordered by size, ties by representative")

    def cluster_index_of(self, candidate_index: int) -> int:
        for i, cluster in enumerate(self.clusters):
            if candidate_index in cluster.member_indices:
                return i
        raise IndexError(candidate_index)


def cluster_candidates(
    cands: CandidateSet, db_path, limits: ExecLimits = ExecLimits()
) -> ClusterPartition:
    """Execute every candidate once and group them by result fingerprint.

    Clusters come back sorted by size (largest first), ties broken by the
    smallest member index; the representative of a cluster is its earliest
    generated member. Failed executions form clusters too (one per error
    class), flagged non-decomposable.
    """
    groups: dict[str, list[int]] = {}
    fingerprints: dict[str, ResultFingerprint] = {}
    for index, candidate in enumerate(cands.candidates):
        fp = fingerprint(execute(db_path, candidate.sql, limits))
        groups.setdefault(fp.digest, []).append(index)
        fingerprints[fp.digest] = fp
    clusters = [
        Cluster(
            fingerprint=fingerprints[digest],
            member_indices=tuple(members),
            representative_index=members[0],
        )
        for digest, members in groups.items()
    ]
    clusters.sort(key=lambda c: (-c.size, c.representative_index))
    return ClusterPartition(clusters=tuple(clusters), total_candidates=len(cands.candidates))


# ---------------------------------------------------------------------------
# Log files (JSONL, one task per line)
# ---------------------------------------------------------------------------

_REQUIRED_FIELDS = ("task_id", "db_id", "question", "candidates")


def load_log(path) -> list[tuple[TranslationTask, CandidateSet]]:
    """Read a translation log; tasks keep file order via ``sequence_index``."""
    entries: list[tuple[TranslationTask, CandidateSet]] = []
    seen_ids: set[str] = set()
    text = Path(path).read_text(encoding="utf-8")
    sequence_index = 0
    for line_number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogFormatError(line_number, f"invalid JSON: {exc}") from exc
        if not isinstance(record, dict):
            raise LogFormatError(line_number, "record is not an object")
        for name in _REQUIRED_FIELDS:
            if name not in record:
                raise LogFormatError(line_number, f"missing field {name!r}")
        if str(record["task_id"]) in seen_ids:
            raise LogFormatError(line_number, f"duplicate task_id {record['task_id']!r}")
        seen_ids.add(str(record["task_id"]))
        raw_candidates = record["candidates"]
        if not isinstance(raw_candidates, list) or not raw_candidates:
            raise LogFormatError(line_number, "candidates must be a non-empty list")
        try:
            candidates = tuple(
                Candidate(sql=c["sql"], generator_tag=c.get("generator_tag", ""))
                for c in raw_candidates
            )
        except (TypeError, KeyError) as exc:
            raise LogFormatError(line_number, f"bad candidate entry: {exc}") from exc
        task = TranslationTask(
            task_id=str(record["task_id"]),
            db_id=str(record["db_id"]),
            question=str(record["question"]),
            evidence=str(record.get("evidence") or ""),
            gold_sql=record.get("gold_sql"),
            sequence_index=sequence_index,
            difficulty=str(record.get("difficulty") or ""),
        )
        entries.append((task, CandidateSet(task_id=task.task_id, candidates=candidates)))
        sequence_index += 1
    return entries


def log_record(task: TranslationTask, cands: CandidateSet) -> dict:
    record = {
        "task_id": task.task_id,
        "db_id": task.db_id,
        "question": task.question,
        "evidence": task.evidence,
        "candidates": [{"sql": c.sql, "generator_tag": c.generator_tag} for c in cands.candidates],
    }
    if task.gold_sql is not None:
        record["gold_sql"] = task.gold_sql
    if task.difficulty:
        record["difficulty"] = task.difficulty
    return record


def append_log(path, task: TranslationTask, cands: CandidateSet) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(log_record(task, cands), ensure_ascii=False) + "\n")


def load_tasks(path) -> list[TranslationTask]:
    """Read a bare task file (same record shape, candidates not required)."""
    tasks: list[TranslationTask] = []
    for line_number, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogFormatError(line_number, f"invalid JSON: {exc}") from exc
        for name in ("task_id", "db_id", "question"):
            if name not in record:
                raise LogFormatError(line_number, f"missing field {name!r}")
        tasks.append(
            TranslationTask(
                task_id=str(record["task_id"]),
                db_id=str(record["db_id"]),
                question=str(record["question"]),
                evidence=str(record.get("evidence") or ""),
                gold_sql=record.get("gold_sql"),
                sequence_index=len(tasks),
                difficulty=str(record.get("difficulty") or ""),
            )
        )
    return tasks


def generate_candidates(
    task: TranslationTask,
    catalog: SchemaCatalog,
    gateway: ModelGateway,
    n: int,
    temperature: float = 0.8,
) -> CandidateSet:
    """Cold-start candidate generation: n zero-shot samples over the full schema."""
    if n < 1:
        raise ValueError(f"need at least one sample, got n={n}")
    template = load_prompt("zeroshot")
    evidence_section = f"Evidence:\n{task.evidence}\n\n" if task.evidence else ""
    prompt = template.format(
        schema=render_schema(catalog),
        evidence_section=evidence_section,
        question=task.question,
    )
    candidates = []
    for sample in range(n):
        response = gateway.chat(
            ChatRequest(
                messages=(ChatMessage("user", prompt),),
                temperature=temperature,
                seed=sample,
                conversation_id=f"gen-{task.task_id}-{sample}",
                agent="generator",
            )
        )
        sql = extract_sql_from_completion(response.content)
        candidates.append(Candidate(sql=sql or "", generator_tag=BUILTIN_GENERATOR_TAG))
    return CandidateSet(task_id=task.task_id, candidates=tuple(candidates))


def extract_sql_from_completion(text: str) -> str | None:
    """Pull one SQL statement out of a chat completion.

    Prefers the last fenced code block; otherwise falls back to the longest
    trailing statement that starts with SELECT or WITH.
    """
    fences = re.findall(r"```(?:sql)?\s*\n(.*?)```", text, re.DOTALL | re.IGNORECASE)
    if fences:
        candidate = fences[-1].strip()
        return candidate or None
    best = ""
    for match in re.finditer(r"\b(SELECT|WITH)\b", text, re.IGNORECASE):
        segment = text[match.start() :]
        if match.group(1).upper() == "WITH" and not re.match(
            r"WITH\s+(RECURSIVE\s+)?[\w\"]+\s+AS\s*\(", segment, re.IGNORECASE
        ):
            continue  # English "with", not a CTE
        cut = segment.find(";")
        statement = (segment[: cut + 1] if cut >= 0 else segment).strip()
        if len(statement) > len(best):
            best = statement
    return normalize_sql(best) if best else None
