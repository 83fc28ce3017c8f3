"""Backward SQL-to-text decomposition: mine knowledge units from one candidate.

One multi-turn conversation per candidate drives two nested loops: the
opening turn elicits an ordered plan of sub-queries (simplest first, full
query last), then one follow-up turn per sub-query elicits tuple-semantic
reasoning followed by the natural-language question it answers. Prior steps
stay in the conversation, so each annotation sees everything before it.

The prompts carry the schema, the candidate SQL, and the task's evidence
only; the original question never leaves the process.
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass

from .catalog import SchemaCatalog, render_schema
from .execution import ExecError, ExecLimits, ResultFingerprint, execute, fingerprint, is_null_like
from .gateway import ChatMessage, ChatRequest, ModelGateway
from .logstore import TranslationTask
from .memory import KnowledgeUnit, Provenance, make_unit_id
from .prompts import load_prompt
from .sqltext import normalize_sql

logger = logging.getLogger(__name__)


class ParseError(Exception):
    """A candidate's conversation kept producing unusable output."""


class ParseFormatError(Exception):
    """Model output held no extractable structured block."""


@dataclass(frozen=True)
class ParserConfig:
    max_steps: int = 8
    retries: int = 2  # extra attempts per malformed turn


@dataclass(frozen=True)
class PlanEntry:
    sub_sql: str
    reasoning: str | None = None
    question: str | None = None


@dataclass(frozen=True)
class ParseStep:
    step_index: int
    sub_sql: str
    reasoning: str
    question: str
    exec_fingerprint: ResultFingerprint
    exec_preview: tuple[tuple, ...]
    result_null_like: bool

    def __post_init__(self) -> None:
        if not self.reasoning.strip():
            raise ValueError("step reasoning must be non-empty")
        if not self.question.strip():
            raise ValueError("step question must be non-empty")


@dataclass(frozen=True)
class ParseTrace:
    candidate_sql: str
    steps: tuple[ParseStep, ...]
    conversation_id: str


_BLOCK_RE = re.compile(r"```[a-zA-Z0-9_-]*\s*\n(.*?)```", re.DOTALL)
_FIELD_NAMES = ("SUB_SQL", "REASONING", "QUESTION")
_FIELD_RE = re.compile(r"^(SUB_SQL|REASONING|QUESTION)\s*:\s*", re.MULTILINE)


def _parse_fields(block: str) -> dict[str, str]:
    fields: dict[str, str] = {}
    matches = list(_FIELD_RE.finditer(block))
    for i, match in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(block)
        fields[match.group(1)] = block[match.end() : end].strip()
    return fields


def parse_model_plan(text: str) -> list[PlanEntry]:
    """Extract ordered SUB_SQL/REASONING/QUESTION blocks from model output.

    Prose around the fenced blocks is ignored; a block must at least name a
    sub-query. No extractable block at all means the turn was malformed.
    """
    entries: list[PlanEntry] = []
    for block in _BLOCK_RE.findall(text):
        fields = _parse_fields(block)
        sub_sql = fields.get("SUB_SQL", "").strip()
        if not sub_sql:
            continue
        entries.append(
            PlanEntry(
                sub_sql=sub_sql,
                reasoning=fields.get("REASONING") or None,
                question=fields.get("QUESTION") or None,
            )
        )
    if not entries:
        raise ParseFormatError("no SUB_SQL blocks in model output")
    return entries


def _parse_annotation(text: str) -> tuple[str, str]:
    for block in _BLOCK_RE.findall(text):
        fields = _parse_fields(block)
        reasoning = (fields.get("REASONING") or "").strip()
        question = (fields.get("QUESTION") or "").strip()
        if reasoning and question:
            return reasoning, question
    raise ParseFormatError("no block with both REASONING and QUESTION")


_RETRY_NOTE = (
    "Your previous reply could not be parsed. Answer again using exactly the "
    "fenced block format that was requested, with no other fenced blocks."
)


def decompose(
    candidate: str,
    catalog: SchemaCatalog,
    evidence: str,
    gateway: ModelGateway,
    *,
    db_path,
    limits: ExecLimits = ExecLimits(),
    config: ParserConfig = ParserConfig(),
) -> ParseTrace:
    """Run the full decomposition conversation for one executed candidate.

    Planned sub-queries are executed as they are annotated; a sub-query that
    fails execution is dropped with a warning and contributes no step. If the
    plan never reaches the full candidate, the candidate itself is appended
    as a final step so full-query knowledge is always producible.
    """
    conversation_id = hashlib.sha256(
        f"{catalog.db_id}|{normalize_sql(candidate)}|{evidence}".encode()
    ).hexdigest()[:16]
    evidence_section = f"Evidence:\n{evidence}\n\n" if evidence else ""
    plan_prompt = load_prompt("parser_plan").format(
        schema=render_schema(catalog),
        evidence_section=evidence_section,
        candidate_sql=candidate,
    )
    messages: list[ChatMessage] = [
        ChatMessage("system", load_prompt("parser_system")),
        ChatMessage("user", plan_prompt),
    ]

    def _chat() -> str:
        response = gateway.chat(
            ChatRequest(
                messages=tuple(messages),
                conversation_id=conversation_id,
                agent="parser",
            )
        )
        messages.append(ChatMessage("assistant", response.content))
        return response.content

    plan = _with_retries(_chat, parse_model_plan, messages, config.retries, candidate)

    sub_sqls = [entry.sub_sql for entry in plan[: config.max_steps]]
    normalized_candidate = normalize_sql(candidate)
    if all(normalize_sql(s) != normalized_candidate for s in sub_sqls):
        sub_sqls.append(candidate)

    steps: list[ParseStep] = []
    step_template = load_prompt("parser_step")
    for sub_sql in sub_sqls:
        result = execute(db_path, sub_sql, limits)
        if isinstance(result, ExecError):
            logger.warning(
                "dropping sub-query that fails execution (%s): %s",
                result.error_class,
                normalize_sql(sub_sql)[:120],
            )
            continue
        messages.append(
            ChatMessage(
                "user",
                step_template.format(step_number=len(steps) + 1, sub_sql=sub_sql),
            )
        )
        reasoning, question = _with_retries(
            _chat, _parse_annotation, messages, config.retries, candidate
        )
        steps.append(
            ParseStep(
                step_index=len(steps),
                sub_sql=sub_sql,
                reasoning=reasoning,
                question=question,
                exec_fingerprint=fingerprint(result),
                exec_preview=result.rows[:3],
                result_null_like=is_null_like(result),
            )
        )
    return ParseTrace(candidate_sql=candidate, steps=tuple(steps), conversation_id=conversation_id)


def _with_retries(chat, parse, messages, retries: int, candidate: str):
    attempts = retries + 1
    for attempt in range(attempts):
        reply = chat()
        try:
            return parse(reply)
        except ParseFormatError as exc:
            if attempt == attempts - 1:
                raise ParseError(
                    f"candidate produced unparseable output after {attempts} attempts: "
                    f"{normalize_sql(candidate)[:120]}"
                ) from exc
            messages.append(ChatMessage("user", _RETRY_NOTE))
    raise AssertionError("unreachable")


def units_from_trace(
    trace: ParseTrace,
    task: TranslationTask,
    candidate_index: int,
    db_id: str,
) -> list[KnowledgeUnit]:
    """Turn an annotated trace into raw knowledge units (not yet scored)."""
    units: list[KnowledgeUnit] = []
    for step in trace.steps:
        provenance = Provenance(
            task_id=task.task_id,
            task_sequence_index=task.sequence_index,
            candidate_index=candidate_index,
            step_index=step.step_index,
        )
        units.append(
            KnowledgeUnit(
                unit_id=make_unit_id(db_id, step.sub_sql, step.exec_fingerprint.digest, provenance),
                db_id=db_id,
                question=step.question,
                sql=step.sub_sql,
                reasoning=step.reasoning,
                exec_preview=step.exec_preview,
                exec_fingerprint=step.exec_fingerprint,
                provenance=provenance,
                null_like=step.result_null_like,
            )
        )
    return units


def dedup(units: list[KnowledgeUnit]) -> list[KnowledgeUnit]:
    """Drop units whose result repeats an earlier unit's, or says nothing.

    A unit is removed when its execution fingerprint matches any earlier
    retained unit, or when its result is NULL-like (an empty row set, all
    values NULL, or an execution error). Relative order is preserved and the
    operation is idempotent.
    """
    seen: set[str] = set()
    kept: list[KnowledgeUnit] = []
    for unit in units:
        if unit.null_like or unit.exec_fingerprint.is_error:
            continue
        if unit.exec_fingerprint.digest in seen:
            continue
        seen.add(unit.exec_fingerprint.digest)
        kept.append(unit)
    return kept
