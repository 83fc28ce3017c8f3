"""Uniform client for chat-completion and embedding endpoints.

Four modes share one interface:

- ``live``   — real HTTP calls with exponential-backoff retries,
- ``record`` — live calls, every exchange appended to a cassette file,
- ``replay`` — answers looked up in a cassette by request digest; never
  touches the network (no HTTP client is even constructed),
- ``mock``   — a seeded scripted responder plus a hash-projection embedder,
  so the whole pipeline runs deterministically offline.

In mock mode a cassette path may also be supplied, in which case the mock
traffic is recorded; that is how replayable cassettes are produced in an
environment with no live endpoint.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sqltext import salient_terms

MODES = ("live", "record", "replay", "mock")

DEFAULT_EMBED_DIM = 64
_RETRY_ATTEMPTS = 3
_RETRY_BASE_DELAY = 0.5


class GatewayError(Exception):
    """Live endpoint unreachable or persistently failing."""


class CassetteMiss(Exception):
    """Replay mode saw a request with no recorded response."""

    def __init__(self, digest: str):
        super().__init__(f"no cassette entry for request digest {digest}")
        self.digest = digest


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[ChatMessage, ...]
    model: str = ""
    temperature: float = 0.0
    seed: int = 0
    # metadata below is excluded from the request digest
    conversation_id: str = ""
    agent: str = ""

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("chat request needs at least one message")
        for i, msg in enumerate(self.messages):
            if msg.role not in ("system", "user", "assistant"):
                raise ValueError(f"unknown role {msg.role!r}")
            if msg.role == "system" and i != 0:
                raise ValueError("system message must come first")


@dataclass(frozen=True)
class ChatResponse:
    content: str
    prompt_tokens: int = 0
    completion_tokens: int = 0


def _normalize_text(text: str) -> str:
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    return "\n".join(line.rstrip() for line in text.split("\n")).rstrip("\n")


def request_digest(req: ChatRequest) -> str:
    """Content digest of a chat request, invariant to trailing whitespace."""
    payload = {
        "model": req.model,
        "temperature": round(req.temperature, 6),
        "seed": req.seed,
        "messages": [[m.role, _normalize_text(m.content)] for m in req.messages],
    }
    blob = json.dumps(payload, ensure_ascii=False, separators=(",", ":"), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def embed_digest(text: str, model: str, dim: int) -> str:
    blob = json.dumps([model, dim, _normalize_text(text)], ensure_ascii=False)
    return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------------------
# Cassettes
# ---------------------------------------------------------------------------


class Cassette:
    """Digest-keyed store of recorded exchanges, persisted as JSON lines.

    Lookups are FIFO per digest, so a conversation that repeats an identical
    request replays the responses in their recorded order.
    """

    def __init__(self, path):
        self.path = Path(path)
        self._by_digest: dict[str, deque] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                entry = json.loads(line)
                self._by_digest.setdefault(entry["digest"], deque()).append(entry["response"])

    def lookup(self, digest: str):
        with self._lock:
            queue = self._by_digest.get(digest)
            if not queue:
                raise CassetteMiss(digest)
            return queue.popleft()

    def record(self, kind: str, digest: str, response, request=None) -> None:
        entry = {"kind": kind, "digest": digest, "response": response}
        if request is not None:
            entry["request"] = request
        line = json.dumps(entry, ensure_ascii=False)
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
            self._by_digest.setdefault(digest, deque()).append(response)


# ---------------------------------------------------------------------------
# Deterministic mock backend
# ---------------------------------------------------------------------------


_AGG_QUESTION_TEMPLATES = {
    "count": "How many {terms}?",
    "sum": "What is the total {terms}?",
    "avg": "What is the average {terms}?",
    "max": "What is the highest {terms}?",
    "min": "What is the lowest {terms}?",
}
_LEAD_AGG_RE = re.compile(r"^\s*SELECT\s+(?:DISTINCT\s+)?(COUNT|SUM|AVG|MIN|MAX)\s*\(", re.IGNORECASE)
_ANY_AGG_RE = re.compile(r"\b(COUNT|SUM|AVG|MIN|MAX)\s*\(", re.IGNORECASE)
_GROUP_BY_RE = re.compile(r"\bGROUP\s+BY\s+([A-Za-z_.\"]+)", re.IGNORECASE)
_SUPERLATIVE_RE = re.compile(r"\bORDER\s+BY\s+.+?\b(DESC|ASC)?\s+LIMIT\s+1\b", re.IGNORECASE | re.DOTALL)
_ALIAS_TERM_RE = re.compile(r"[A-Za-z]\d?$")

_SQL_FENCE_RE = re.compile(r"```sql\s*\n(.*?)```", re.DOTALL)
_DEMO_PAIR_RE = re.compile(r"^Question: (.+)\nSQL: (.+)$", re.MULTILINE)
_TARGET_QUESTION_RE = re.compile(r"^Question:\n(.+)$", re.MULTILINE)
_EVIDENCE_RE = re.compile(r"^Evidence:\n(.+)$", re.MULTILINE)
_CREATE_TABLE_RE = re.compile(r"^CREATE TABLE (\S+) \(", re.MULTILINE)
_SIMPLE_AGG_RE = re.compile(
    r"^\s*SELECT\s+(?:COUNT|SUM|AVG|MIN|MAX)\s*\(.*?\)\s+FROM\s+(.*)$",
    re.IGNORECASE | re.DOTALL,
)


class MockResponder:
    """Scripted stand-in for a chat model, keyed off prompt task markers."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def _entropy(self, req: ChatRequest) -> int:
        blob = f"{self.seed}|{request_digest(req)}"
        return int.from_bytes(hashlib.sha256(blob.encode()).digest()[:4], "big")

    def respond(self, req: ChatRequest) -> str:
        prompt = req.messages[-1].content
        if "### TASK: DECOMPOSE" in prompt:
            return self._plan(prompt)
        if "### TASK: ANNOTATE" in prompt:
            return self._annotation(prompt, self._entropy(req))
        if "### TASK: TRANSLATE" in prompt:
            return self._translation(prompt, req.seed)
        if "### TASK: GENERATE" in prompt:
            return self._zero_shot(prompt, self._entropy(req), req.seed)
        return "OK."

    def _plan(self, prompt: str) -> str:
        candidate = _last_sql_fence(prompt) or "SELECT 1"
        steps = [candidate]
        match = _SIMPLE_AGG_RE.match(candidate.strip().rstrip(";"))
        if match:
            tail = match.group(1).strip()
            if not re.search(r"\b(GROUP|ORDER|LIMIT|UNION|EXCEPT|INTERSECT)\b", tail, re.I):
                steps = [f"SELECT * FROM {tail}", candidate]
        blocks = "\n\n".join(f"```step\nSUB_SQL:\n{s}\n```" for s in steps)
        return f"The query builds up in {len(steps)} step(s).\n\n{blocks}\n"

    def _annotation(self, prompt: str, entropy: int) -> str:
        sub_sql = _last_sql_fence(prompt) or "SELECT 1"
        raw_terms = salient_terms(sub_sql, 10) or ["the result"]
        terms = [t.replace("_", " ") for t in raw_terms if not _ALIAS_TERM_RE.fullmatch(t)]
        terms = terms or ["the result"]
        subject = " ".join(terms[:5])
        reasoning = (
            f"One tuple of this result stands for a row of {terms[0]} after the "
            f"stated operations; references to {', '.join(terms[1:4]) or 'its columns'} "
            "narrow that set without changing what a tuple means, and any "
            "aggregate collapses the surviving tuples into a single value."
        )
        question = self._question_for(sub_sql, terms, subject)
        return f"```step\nREASONING:\n{reasoning}\nQUESTION:\n{question}\n```\n"

    @staticmethod
    def _question_for(sub_sql: str, terms: list[str], subject: str) -> str:
        superlative = _SUPERLATIVE_RE.search(sub_sql)
        if superlative:
            direction = "lowest" if (superlative.group(1) or "ASC").upper() == "ASC" else "highest"
            rest = " ".join(terms[1:4]) or "value"
            return f"Which {terms[0]} has the {direction} {rest}?"
        lead_agg = _LEAD_AGG_RE.match(sub_sql)
        group = _GROUP_BY_RE.search(sub_sql)
        inner_agg = _ANY_AGG_RE.search(sub_sql)
        if group and inner_agg:
            agg_kind = (lead_agg or inner_agg).group(1).lower()
            grouped = group.group(1).split(".")[-1].replace("_", " ")
            template = _AGG_QUESTION_TEMPLATES[agg_kind]
            return template.format(terms=subject)[:-1] + f" per {grouped}?"
        if lead_agg:
            return _AGG_QUESTION_TEMPLATES[lead_agg.group(1).lower()].format(terms=subject)
        return f"Which {subject} rows are these?"

    def _translation(self, prompt: str, sample_seed: int) -> str:
        demos = _DEMO_PAIR_RE.findall(prompt)
        if not demos:
            return self._zero_shot(prompt, sample_seed, sample_seed)
        target_match = _TARGET_QUESTION_RE.findall(prompt)
        target = _stems(target_match[-1]) if target_match else set()
        evidence_match = _EVIDENCE_RE.findall(prompt)
        if evidence_match:  # evidence carries the question-to-schema vocabulary
            target |= _stems(evidence_match[-1])
        # rank demonstrations by lexical overlap with the target question;
        # ties go to the later (more similar per retrieval) demonstration
        ranked = sorted(
            range(len(demos)),
            key=lambda i: (_overlap(target, _stems(demos[i][0])), i),
            reverse=True,
        )
        # the first paths agree on the best match, later paths drift
        offset = 0 if sample_seed <= 2 else (sample_seed - 2) % min(3, len(demos))
        sql = demos[ranked[offset]][1]
        return f"The closest demonstration applies directly.\n\n```sql\n{sql}\n```\n"

    def _zero_shot(self, prompt: str, entropy: int, sample_seed: int) -> str:
        tables = _CREATE_TABLE_RE.findall(prompt)
        if not tables:
            return "```sql\nSELECT 1\n```\n"
        table = tables[(entropy + sample_seed) % len(tables)]
        return f"Without demonstrations I fall back to a schema scan.\n\n```sql\nSELECT COUNT(*) FROM {table}\n```\n"


def _last_sql_fence(text: str):
    matches = _SQL_FENCE_RE.findall(text)
    return matches[-1].strip() if matches else None


_STOPWORDS = frozenset(
    """a an and are at been by did do doe each for from ha had have how i in
    is it many much never of on or per that the there these thi those to wa
    were what which who whose""".split()
)
_SYNONYMS = {
    "most": "highest", "largest": "highest", "top": "highest", "maximum": "highest",
    "smallest": "lowest", "minimum": "lowest", "fewest": "lowest",
}


def _stems(text: str) -> set[str]:
    stems = set()
    for word in re.findall(r"[a-z0-9_]+", text.lower()):
        stem = word.rstrip("s") or word
        stem = _SYNONYMS.get(stem, stem)
        if stem not in _STOPWORDS:
            stems.add(stem)
    return stems


def _overlap(a: set[str], b: set[str]) -> float:
    """Dice/F1 word overlap; rewards demos whose terms all hit the target."""
    if not a or not b:
        return 0.0
    return 2.0 * len(a & b) / (len(a) + len(b))


def mock_embedding(text: str, dim: int, seed: int) -> list[float]:
    """Feature-hashed bag-of-words vector; deterministic, unit L2 norm.

    Words are crudely stemmed (trailing ``s`` dropped) so that surface
    variation between questions still yields useful cosine geometry.
    """
    vec = np.zeros(dim, dtype=np.float64)
    for word in re.findall(r"[a-z0-9_]+", text.lower()):
        stem = word.rstrip("s") or word
        h = hashlib.blake2b(f"{seed}|{stem}".encode(), digest_size=8).digest()
        idx = int.from_bytes(h[:4], "big") % dim
        sign = 1.0 if h[4] & 1 else -1.0
        vec[idx] += sign
    if not vec.any():
        h = hashlib.blake2b(f"{seed}|<empty>|{text}".encode(), digest_size=8).digest()
        vec[int.from_bytes(h[:4], "big") % dim] = 1.0
    vec /= np.linalg.norm(vec)
    return [float(v) for v in vec]


# ---------------------------------------------------------------------------
# Gateway
# ---------------------------------------------------------------------------


@dataclass
class GatewayConfig:
    mode: str = "mock"
    cassette_path: str | None = None
    seed: int = 0
    chat_model: str = "chat-default"
    embed_model: str = "hash-64"
    embed_dim: int = DEFAULT_EMBED_DIM
    chat_base: str | None = None
    chat_key: str | None = None
    embed_base: str | None = None
    embed_key: str | None = None
    timeout: float = 60.0
    max_in_flight: int = 4
    transcript_dir: str | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"gateway mode must be one of {MODES}, got {self.mode!r}")
        self.chat_base = self.chat_base or os.environ.get("ORANGE_CHAT_BASE")
        self.chat_key = self.chat_key or os.environ.get("ORANGE_CHAT_KEY")
        self.embed_base = self.embed_base or os.environ.get("ORANGE_EMBED_BASE")
        self.embed_key = self.embed_key or os.environ.get("ORANGE_EMBED_KEY")


class ModelGateway:
    def __init__(self, config: GatewayConfig | None = None, **overrides):
        self.config = config or GatewayConfig(**overrides)
        mode = self.config.mode
        self.cassette: Cassette | None = None
        if self.config.cassette_path and mode in ("record", "replay", "mock"):
            self.cassette = Cassette(self.config.cassette_path)
        if mode == "replay" and self.cassette is None:
            raise ValueError("replay mode requires a cassette_path")
        self._responder = MockResponder(self.config.seed)
        self._inflight = threading.Semaphore(max(1, self.config.max_in_flight))
        self._transcript_lock = threading.Lock()

    # -- chat ---------------------------------------------------------------

    def chat(self, req: ChatRequest) -> ChatResponse:
        digest = request_digest(req)
        mode = self.config.mode
        if mode == "replay":
            payload = self.cassette.lookup(digest)
            response = ChatResponse(**payload)
        elif mode == "mock":
            content = self._responder.respond(req)
            response = ChatResponse(
                content=content,
                prompt_tokens=sum(len(m.content.split()) for m in req.messages),
                completion_tokens=len(content.split()),
            )
            if self.cassette is not None:
                self.cassette.record("chat", digest, response.__dict__)
        else:  # live / record
            response = self._chat_live(req)
            if mode == "record" and self.cassette is not None:
                self.cassette.record(
                    "chat",
                    digest,
                    response.__dict__,
                    request={"messages": [[m.role, m.content] for m in req.messages]},
                )
        self._write_transcript(req, digest, response)
        return response

    def _chat_live(self, req: ChatRequest) -> ChatResponse:
        import httpx

        if not self.config.chat_base:
            raise GatewayError("no chat endpoint configured (ORANGE_CHAT_BASE)")
        body = {
            "model": req.model or self.config.chat_model,
            "messages": [{"role": m.role, "content": m.content} for m in req.messages],
            "temperature": req.temperature,
            "seed": req.seed,
        }
        headers = {}
        if self.config.chat_key:
            headers["Authorization"] = f"Bearer {self.config.chat_key}"
        url = self.config.chat_base.rstrip("/") + "/chat/completions"
        last_error: Exception | None = None
        for attempt in range(_RETRY_ATTEMPTS):
            try:
                with self._inflight:
                    reply = httpx.post(url, json=body, headers=headers, timeout=self.config.timeout)
                if reply.status_code >= 500:
                    raise GatewayError(f"server error {reply.status_code}")
                reply.raise_for_status()
                data = reply.json()
                usage = data.get("usage", {})
                return ChatResponse(
                    content=data["choices"][0]["message"]["content"],
                    prompt_tokens=usage.get("prompt_tokens", 0),
                    completion_tokens=usage.get("completion_tokens", 0),
                )
            except Exception as exc:  # noqa: BLE001 - retried, then surfaced
                last_error = exc
                if attempt < _RETRY_ATTEMPTS - 1:
                    time.sleep(_RETRY_BASE_DELAY * 2**attempt)
        raise GatewayError(f"chat endpoint failed after {_RETRY_ATTEMPTS} attempts: {last_error}")

    # -- embeddings ----------------------------------------------------------

    def embed_batch(self, texts: list[str]) -> list[list[float]]:
        """One unit-norm vector per input text."""
        if not texts:
            raise ValueError("embed_batch needs at least one text")
        mode = self.config.mode
        if mode == "replay":
            return [
                self.cassette.lookup(embed_digest(t, self.config.embed_model, self.config.embed_dim))
                for t in texts
            ]
        if mode == "mock":
            vectors = [mock_embedding(t, self.config.embed_dim, self.config.seed) for t in texts]
            if self.cassette is not None:
                for text, vec in zip(texts, vectors):
                    digest = embed_digest(text, self.config.embed_model, self.config.embed_dim)
                    self.cassette.record("embed", digest, vec)
            return vectors
        vectors = self._embed_live(texts)
        if mode == "record" and self.cassette is not None:
            for text, vec in zip(texts, vectors):
                digest = embed_digest(text, self.config.embed_model, self.config.embed_dim)
                self.cassette.record("embed", digest, vec)
        return vectors

    def _embed_live(self, texts: list[str]) -> list[list[float]]:
        import httpx

        if not self.config.embed_base:
            raise GatewayError("no embedding endpoint configured (ORANGE_EMBED_BASE)")
        headers = {}
        if self.config.embed_key:
            headers["Authorization"] = f"Bearer {self.config.embed_key}"
        url = self.config.embed_base.rstrip("/") + "/embeddings"
        body = {"model": self.config.embed_model, "input": texts}
        last_error: Exception | None = None
        for attempt in range(_RETRY_ATTEMPTS):
            try:
                with self._inflight:
                    reply = httpx.post(url, json=body, headers=headers, timeout=self.config.timeout)
                if reply.status_code >= 500:
                    raise GatewayError(f"server error {reply.status_code}")
                reply.raise_for_status()
                rows = reply.json()["data"]
                vectors = []
                for row in rows:
                    arr = np.asarray(row["embedding"], dtype=np.float64)
                    arr /= np.linalg.norm(arr)
                    vectors.append([float(v) for v in arr])
                return vectors
            except Exception as exc:  # noqa: BLE001
                last_error = exc
                if attempt < _RETRY_ATTEMPTS - 1:
                    time.sleep(_RETRY_BASE_DELAY * 2**attempt)
        raise GatewayError(f"embedding endpoint failed after {_RETRY_ATTEMPTS} attempts: {last_error}")

    # -- transcripts ----------------------------------------------------------

    def _write_transcript(self, req: ChatRequest, digest: str, response: ChatResponse) -> None:
        if not self.config.transcript_dir:
            return
        directory = Path(self.config.transcript_dir)
        name = f"{req.agent or 'chat'}-{req.conversation_id or digest[:12]}.jsonl"
        entry = {
            "agent": req.agent,
            "conversation_id": req.conversation_id,
            "digest": digest,
            "messages": [[m.role, m.content] for m in req.messages],
            "response": response.content,
        }
        with self._transcript_lock:
            directory.mkdir(parents=True, exist_ok=True)
            with (directory / name).open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
