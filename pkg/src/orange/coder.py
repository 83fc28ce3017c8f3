"""Knowledge-enhanced translation: link schema, prompt, sample, vote.

The prompt's schema section is restricted to items appearing in some
retrieved demonstration's SQL (union rule), falling back to the full schema
when linking yields nothing. Several completions are sampled, executed, and
clustered; the representative of the largest non-error cluster wins.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .catalog import SchemaCatalog, render_schema
from .execution import ExecLimits
from .gateway import ChatMessage, ChatRequest, ModelGateway
from .logstore import (
    Candidate,
    CandidateSet,
    ClusterPartition,
    TranslationTask,
    cluster_candidates,
    extract_sql_from_completion,
)
from .memory import DemoSet, KnowledgeUnit, top_k
from .prompts import load_prompt
from .sqltext import ExtractError, extract_schema_items, normalize_sql

__all__ = [
    "CoderConfig",
    "DemoSet",
    "ExtractError",
    "NoValidResult",
    "TranslateError",
    "TranslateOutcome",
    "build_prompt",
    "extract_schema_items",
    "link_schema",
    "translate",
    "vote",
]


class TranslateError(Exception):
    """No generation path yielded any extractable SQL."""


class NoValidResult(Exception):
    """Every candidate cluster is an error cluster."""


@dataclass(frozen=True)
class CoderConfig:
    shots: int = 30
    paths: int = 5
    sampling_temperature: float = 0.8
    fallback_full_schema: bool = True
    # ablation switches
    schema_linking: bool = True
    random_demo_seed: int | None = None

    def __post_init__(self) -> None:
        if self.shots < 0:
            raise ValueError(f"shots must be non-negative, got {self.shots}")
        if self.paths < 1:
            raise ValueError(f"paths must be at least 1, got {self.paths}")


def link_schema(demos: DemoSet, catalog: SchemaCatalog) -> set[str] | None:
    """Union of schema items used by the demonstrations' SQL.

    Returns ``None`` (meaning: render the whole catalog) when there are no
    demonstrations or the union is empty and the caller wants the fallback;
    otherwise the item id set. Demonstration SQL that cannot be analyzed is
    skipped, matching the permissive extraction contract.
    """
    linked: set[str] = set()
    for unit in demos.demos:
        try:
            linked |= extract_schema_items(unit.sql, catalog)
        except ExtractError:
            continue
    return linked or None


def format_demos(demos: DemoSet) -> str:
    """Demonstration section, weakest match first so the best sits last."""
    blocks = []
    for unit in reversed(demos.demos):
        blocks.append(
            f"Question: {unit.question}\n"
            f"SQL: {normalize_sql(unit.sql)}\n"
            f"Exec_result: {unit.preview_display()}"
        )
    return "\n\n".join(blocks)


def build_prompt(
    task: TranslationTask,
    linked_items: set[str] | None,
    demos: DemoSet,
    catalog: SchemaCatalog,
) -> str:
    evidence_section = f"Evidence:\n{task.evidence}\n\n" if task.evidence else ""
    return load_prompt("coder").format(
        schema=render_schema(catalog, linked_items),
        demos=format_demos(demos),
        evidence_section=evidence_section,
        question=task.question,
    )


def select_demos(
    view: list[KnowledgeUnit],
    query_embedding,
    cfg: CoderConfig,
    task: TranslationTask,
) -> DemoSet:
    """Ranked retrieval, or seeded uniform sampling under the ranking ablation."""
    if cfg.random_demo_seed is None:
        return top_k(view, query_embedding, cfg.shots)
    rng = random.Random(f"{cfg.random_demo_seed}:{task.task_id}")
    chosen = rng.sample(view, min(cfg.shots, len(view)))
    return DemoSet(demos=tuple(chosen), similarities=tuple(0.0 for _ in chosen))


def vote(partition: ClusterPartition, candidates: list[str]) -> int:
    """Pick the self-consistency winner: representative of the biggest
    non-error cluster, earliest representative on ties."""
    for cluster in partition.clusters:  # already size-desc, earliest-rep on ties
        if cluster.decomposable:
            return cluster.representative_index
    raise NoValidResult("all clusters are error clusters")


@dataclass(frozen=True)
class TranslateOutcome:
    sql: str
    all_paths: CandidateSet
    partition: ClusterPartition
    demos: DemoSet
    linked_items: set[str] | None
    prompt: str


def translate(
    task: TranslationTask,
    mem_view: list[KnowledgeUnit],
    catalog: SchemaCatalog,
    cfg: CoderConfig,
    gateway: ModelGateway,
    db_path,
    limits: ExecLimits = ExecLimits(),
) -> TranslateOutcome:
    """Full knowledge-enhanced translation of one task.

    Embeds the question, retrieves demonstrations, links the schema, samples
    ``cfg.paths`` completions (one request per path, distinct sampling
    seeds), executes and clusters the extracted SQL, and returns the majority
    choice. If every path fails execution the first extracted SQL is returned
    verbatim rather than nothing.
    """
    if mem_view:
        query_embedding = gateway.embed_batch([task.question])[0]
        demos = select_demos(mem_view, query_embedding, cfg, task)
    else:
        demos = DemoSet(demos=(), similarities=())

    linked: set[str] | None = None
    if cfg.schema_linking:
        linked = link_schema(demos, catalog)
        if linked is None and not cfg.fallback_full_schema:
            linked = set()
    prompt = build_prompt(task, linked, demos, catalog)

    extracted: list[str] = []
    for path in range(cfg.paths):
        response = gateway.chat(
            ChatRequest(
                messages=(ChatMessage("user", prompt),),
                temperature=cfg.sampling_temperature,
                seed=path,
                conversation_id=f"code-{task.task_id}-{path}",
                agent="coder",
            )
        )
        sql = extract_sql_from_completion(response.content)
        if sql:
            extracted.append(sql)
    if not extracted:
        raise TranslateError(f"no extractable SQL across {cfg.paths} paths for {task.task_id}")

    all_paths = CandidateSet(
        task_id=task.task_id,
        candidates=tuple(Candidate(sql=s, generator_tag=f"coder-path-{i}") for i, s in enumerate(extracted)),
    )
    partition = cluster_candidates(all_paths, db_path, limits)
    try:
        chosen = extracted[vote(partition, extracted)]
    except NoValidResult:
        chosen = extracted[0]
    return TranslateOutcome(
        sql=chosen,
        all_paths=all_paths,
        partition=partition,
        demos=demos,
        linked_items=linked,
        prompt=prompt,
    )
