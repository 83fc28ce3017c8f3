"""The per-database knowledge base: durable storage and exact retrieval.

Each memory file holds one header line (hash algorithm, embedding model,
dimensionality, filter threshold) followed by one validated knowledge unit
per line. Units are append-only, deduplicated across tasks on the pair
(normalized SQL, result fingerprint), and carry a unit-norm embedding of
their question for cosine retrieval. Search is an exact scan; per-database
memories are small enough that correctness beats an index.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .execution import HASH_ALGORITHM, ResultFingerprint, render_rows
from .logstore import TranslationTask
from .sqltext import normalize_sql

HISTORY_MODES = ("self_only", "accumulated", "all")

_NORM_TOLERANCE = 1e-6
_PREVIEW_ROWS = 3


class MemoryStoreError(Exception):
    """Inconsistent memory contents (dimensionality, norms, db mismatch)."""


@dataclass(frozen=True)
class Provenance:
    task_id: str
    task_sequence_index: int
    candidate_index: int
    step_index: int


@dataclass(frozen=True)
class KnowledgeUnit:
    """A verified question/SQL pair with its reasoning chain and result."""

    unit_id: str
    db_id: str
    question: str
    sql: str
    reasoning: str
    exec_preview: tuple[tuple, ...]
    exec_fingerprint: ResultFingerprint
    provenance: Provenance
    probability: float = 0.0
    embedding: tuple[float, ...] | None = None
    inserted_at: int = -1
    null_like: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability out of range: {self.probability}")
        if len(self.exec_preview) > _PREVIEW_ROWS:
            object.__setattr__(self, "exec_preview", self.exec_preview[:_PREVIEW_ROWS])

    @property
    def dedup_key(self) -> tuple[str, str]:
        return (normalize_sql(self.sql), self.exec_fingerprint.digest)

    def preview_display(self) -> str:
        return render_rows(self.exec_preview)


def make_unit_id(db_id: str, sql: str, fp_digest: str, provenance: Provenance) -> str:
    blob = "|".join(
        [
            db_id,
            normalize_sql(sql),
            fp_digest,
            provenance.task_id,
            str(provenance.candidate_index),
            str(provenance.step_index),
        ]
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class MemoryHeader:
    db_id: str
    hash_alg: str = HASH_ALGORITHM
    embed_model: str = "hash-64"
    dim: int = 64
    tau: float = 0.3


@dataclass(frozen=True)
class DemoSet:
    """Retrieved demonstrations, most similar first."""

    demos: tuple[KnowledgeUnit, ...]
    similarities: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.demos) != len(self.similarities):
            raise ValueError("demos and similarities lengths differ")
        for earlier, later in zip(self.similarities, self.similarities[1:]):
            if later > earlier + 1e-12:
                raise ValueError("similarities must be non-increasing")

    def __len__(self) -> int:
        return len(self.demos)


class Memory:
    """Single-writer knowledge store bound to an optional JSONL file."""

    def __init__(self, header: MemoryHeader, units: list[KnowledgeUnit] | None = None, path=None):
        self.header = header
        self.units: list[KnowledgeUnit] = list(units or [])
        self.path = Path(path) if path is not None else None
        self._keys = {u.dedup_key for u in self.units}
        self._lock = threading.Lock()

    # -- construction / persistence -----------------------------------------

    @classmethod
    def create(cls, db_id: str, embed_model: str, dim: int, tau: float, path=None) -> "Memory":
        return cls(MemoryHeader(db_id=db_id, embed_model=embed_model, dim=dim, tau=tau), path=path)

    @classmethod
    def load(cls, path) -> "Memory":
        path = Path(path)
        lines = path.read_text(encoding="utf-8").splitlines()
        if not lines:
            raise MemoryStoreError(f"memory file {path} is empty")
        raw_header = json.loads(lines[0])
        header = MemoryHeader(
            db_id=raw_header["db_id"],
            hash_alg=raw_header.get("hash_alg", HASH_ALGORITHM),
            embed_model=raw_header.get("embed_model", ""),
            dim=int(raw_header["dim"]),
            tau=float(raw_header.get("tau", 0.3)),
        )
        units = [_unit_from_dict(json.loads(line)) for line in lines[1:] if line.strip()]
        return cls(header, units, path=path)

    def save(self, path=None) -> None:
        """Atomic write: temp file in the same directory, then rename."""
        target = Path(path) if path is not None else self.path
        if target is None:
            raise MemoryStoreError("memory has no backing path")
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_suffix(target.suffix + ".tmp")
        with tmp.open("w", encoding="utf-8") as fh:
            fh.write(json.dumps(self.header.__dict__, ensure_ascii=False) + "\n")
            for unit in self.units:
                fh.write(json.dumps(_unit_to_dict(unit), ensure_ascii=False) + "\n")
        os.replace(tmp, target)

    # -- mutation -------------------------------------------------------------

    def insert(self, units: list[KnowledgeUnit]) -> int:
        """Append novel, embedded units; returns how many were kept.

        Units whose (normalized SQL, fingerprint) pair is already stored are
        skipped. Embeddings must match the header dimensionality and be unit
        norm; violations raise rather than store junk.
        """
        with self._lock:
            inserted = 0
            next_counter = (
                max((u.inserted_at for u in self.units), default=-1) + 1
            )
            for unit in units:
                if unit.db_id != self.header.db_id:
                    raise MemoryStoreError(
                        f"unit for {unit.db_id!r} cannot enter memory of {self.header.db_id!r}"
                    )
                if unit.embedding is None or len(unit.embedding) != self.header.dim:
                    got = None if unit.embedding is None else len(unit.embedding)
                    raise MemoryStoreError(
                        f"embedding dimensionality {got} does not match header dim {self.header.dim}"
                    )
                norm = float(np.linalg.norm(unit.embedding))
                if abs(norm - 1.0) > _NORM_TOLERANCE:
                    raise MemoryStoreError(f"embedding norm {norm} is not unit length")
                if unit.dedup_key in self._keys:
                    continue
                stored = replace(unit, inserted_at=next_counter)
                next_counter += 1
                self.units.append(stored)
                self._keys.add(stored.dedup_key)
                inserted += 1
            if inserted and self.path is not None:
                self.save()
            return inserted

    # -- views ----------------------------------------------------------------

    def snapshot(self, mode: str, current_task: TranslationTask | None = None) -> list[KnowledgeUnit]:
        """Readable view of the units a translation may use.

        ``self_only``    - units mined from the current task's own candidates;
        ``accumulated``  - units from earlier tasks plus the current task's own;
        ``all``          - everything in memory.
        """
        if mode not in HISTORY_MODES:
            raise ValueError(f"history mode must be one of {HISTORY_MODES}, got {mode!r}")
        if mode == "all":
            return list(self.units)
        if current_task is None:
            raise ValueError(f"{mode} snapshot needs the current task")
        if mode == "self_only":
            return [u for u in self.units if u.provenance.task_id == current_task.task_id]
        return [
            u
            for u in self.units
            if u.provenance.task_sequence_index < current_task.sequence_index
            or u.provenance.task_id == current_task.task_id
        ]


def top_k(view: list[KnowledgeUnit], query_embedding, k: int) -> DemoSet:
    """Exact nearest-neighbor scan by cosine similarity.

    Ties break toward the earlier-inserted unit; when the view holds fewer
    than ``k`` units, all of them come back, still similarity-ordered.
    """
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    if k == 0 or not view:
        return DemoSet(demos=(), similarities=())
    query = np.asarray(query_embedding, dtype=np.float64)
    for unit in view:
        if unit.embedding is None or len(unit.embedding) != query.shape[0]:
            raise MemoryStoreError("view contains units with mismatched embeddings")
    matrix = np.asarray([u.embedding for u in view], dtype=np.float64)
    scores = matrix @ query
    order = sorted(range(len(view)), key=lambda i: (-scores[i], view[i].inserted_at))[:k]
    return DemoSet(
        demos=tuple(view[i] for i in order),
        similarities=tuple(float(scores[i]) for i in order),
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _encode_cell(value):
    if isinstance(value, bytes):
        return {"__bytes__": value.hex()}
    return value


def _decode_cell(value):
    if isinstance(value, dict) and "__bytes__" in value:
        return bytes.fromhex(value["__bytes__"])
    return value


def _unit_to_dict(unit: KnowledgeUnit) -> dict:
    return {
        "unit_id": unit.unit_id,
        "db_id": unit.db_id,
        "question": unit.question,
        "sql": unit.sql,
        "reasoning": unit.reasoning,
        "exec_preview": [[_encode_cell(v) for v in row] for row in unit.exec_preview],
        "exec_fingerprint": {
            "digest": unit.exec_fingerprint.digest,
            "is_error": unit.exec_fingerprint.is_error,
            "error_class": unit.exec_fingerprint.error_class,
        },
        "probability": unit.probability,
        "embedding": list(unit.embedding) if unit.embedding is not None else None,
        "provenance": {
            "task_id": unit.provenance.task_id,
            "task_sequence_index": unit.provenance.task_sequence_index,
            "candidate_index": unit.provenance.candidate_index,
            "step_index": unit.provenance.step_index,
        },
        "inserted_at": unit.inserted_at,
        "null_like": unit.null_like,
    }


def _unit_from_dict(raw: dict) -> KnowledgeUnit:
    fp = raw["exec_fingerprint"]
    prov = raw["provenance"]
    embedding = raw.get("embedding")
    return KnowledgeUnit(
        unit_id=raw["unit_id"],
        db_id=raw["db_id"],
        question=raw["question"],
        sql=raw["sql"],
        reasoning=raw["reasoning"],
        exec_preview=tuple(tuple(_decode_cell(v) for v in row) for row in raw["exec_preview"]),
        exec_fingerprint=ResultFingerprint(
            digest=fp["digest"], is_error=fp["is_error"], error_class=fp["error_class"]
        ),
        probability=float(raw["probability"]),
        embedding=tuple(float(v) for v in embedding) if embedding is not None else None,
        provenance=Provenance(
            task_id=prov["task_id"],
            task_sequence_index=int(prov["task_sequence_index"]),
            candidate_index=int(prov["candidate_index"]),
            step_index=int(prov["step_index"]),
        ),
        inserted_at=int(raw["inserted_at"]),
        null_like=bool(raw.get("null_like", False)),
    )
