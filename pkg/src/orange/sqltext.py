"""SQL text utilities: tokenizer, normalizer, and schema-item extraction.

The extractor resolves every table referenced in FROM/JOIN (aliases included)
and every column referenced anywhere in the statement to qualified catalog
ids. It is a scanner, not a full parser: good enough for SQLite SELECTs of
benchmark complexity, and names it cannot resolve are skipped with a warning
rather than failing the caller.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .catalog import SchemaCatalog

logger = logging.getLogger(__name__)


class ExtractError(Exception):
    """SQL text could not be tokenized into an analyzable statement."""


WORD = "word"
QIDENT = "qident"
STRING = "string"
NUMBER = "number"
PUNCT = "punct"

_KEYWORDS = frozenset(
    """
    abort action add after all alter analyze and as asc attach autoincrement
    before begin between by cascade case cast check collate column commit
    conflict constraint create cross current current_date current_time
    current_timestamp database default deferrable deferred delete desc detach
    distinct do drop each else end escape except exclude exclusive exists
    explain fail filter first following for foreign from full generated glob
    group groups having if ignore immediate in index indexed initially inner
    insert instead intersect into is isnull join key last left like limit
    match materialized natural no not nothing notnull null nulls of offset on
    or order others outer over partition plan pragma preceding primary query
    raise range recursive references regexp reindex release rename replace
    restrict returning right rollback row rows savepoint select set table
    temp temporary then ties to transaction trigger unbounded union unique
    update using vacuum values view virtual when where window with without
    true false
    """.split()
)


@dataclass(frozen=True)
class Token:
    kind: str
    value: str  # original spelling (strings/quoted idents: unquoted content)
    pos: int

    @property
    def key(self) -> str:
        return self.value.casefold()

    def is_kw(self, *names: str) -> bool:
        return self.kind == WORD and self.key in names


_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_$]*")
_NUMBER_RE = re.compile(r"(?:0[xX][0-9a-fA-F]+|\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)")


def tokenize(sql: str) -> list[Token]:
    """Split SQL into tokens, raising ExtractError on malformed literals."""
    tokens: list[Token] = []
    i, n = 0, len(sql)
    while i < n:
        ch = sql[i]
        if ch.isspace():
            i += 1
            continue
        if sql.startswith("--", i):
            nl = sql.find("\n", i)
            i = n if nl < 0 else nl + 1
            continue
        if sql.startswith("/*", i):
            end = sql.find("*/", i + 2)
            if end < 0:
                raise ExtractError("unterminated block comment")
            i = end + 2
            continue
        if ch == "'":
            value, i = _scan_quoted(sql, i, "'")
            tokens.append(Token(STRING, value, i))
            continue
        if ch == '"':
            value, i = _scan_quoted(sql, i, '"')
            tokens.append(Token(QIDENT, value, i))
            continue
        if ch == "`":
            value, i = _scan_quoted(sql, i, "`")
            tokens.append(Token(QIDENT, value, i))
            continue
        if ch == "[":
            end = sql.find("]", i + 1)
            if end < 0:
                raise ExtractError("unterminated bracketed identifier")
            tokens.append(Token(QIDENT, sql[i + 1 : end], i))
            i = end + 1
            continue
        m = _NUMBER_RE.match(sql, i)
        if m and (ch.isdigit() or (ch == "." and i + 1 < n and sql[i + 1].isdigit())):
            tokens.append(Token(NUMBER, m.group(), i))
            i = m.end()
            continue
        m = _WORD_RE.match(sql, i)
        if m:
            tokens.append(Token(WORD, m.group(), i))
            i = m.end()
            continue
        tokens.append(Token(PUNCT, ch, i))
        i += 1
    return tokens


def _scan_quoted(sql: str, start: int, quote: str) -> tuple[str, int]:
    i = start + 1
    parts: list[str] = []
    while i < len(sql):
        if sql[i] == quote:
            if i + 1 < len(sql) and sql[i + 1] == quote:  # doubled quote escape
                parts.append(quote)
                i += 2
                continue
            return "".join(parts), i + 1
        parts.append(sql[i])
        i += 1
    raise ExtractError(f"unterminated {quote!r}-quoted literal")


_NO_SPACE_BEFORE = {",", ")", ".", ";"}
_NO_SPACE_AFTER = {"(", "."}


def normalize_sql(sql: str) -> str:
    """One-line form used for de-duplication keys and demo rendering.

    Token-aware: whitespace and comments collapse, string literals and quoted
    identifiers survive byte-for-byte, case is preserved. Unparseable text
    falls back to a plain whitespace collapse.
    """
    try:
        tokens = tokenize(sql)
    except ExtractError:
        return re.sub(r"\s+", " ", sql).strip().rstrip(";").strip()
    while tokens and tokens[-1].kind == PUNCT and tokens[-1].value == ";":
        tokens.pop()
    parts: list[str] = []
    previous: Token | None = None
    for tok in tokens:
        if tok.kind == STRING:
            spelling = "'" + tok.value.replace("'", "''") + "'"
        elif tok.kind == QIDENT:
            spelling = '"' + tok.value.replace('"', '""') + '"'
        else:
            spelling = tok.value
        if previous is not None and not (
            (tok.kind == PUNCT and tok.value in _NO_SPACE_BEFORE)
            or (previous.kind == PUNCT and previous.value in _NO_SPACE_AFTER)
            # function calls hug their parenthesis: COUNT(x), not COUNT (x)
            or (
                tok.kind == PUNCT
                and tok.value == "("
                and previous.kind == WORD
                and previous.key not in _KEYWORDS
            )
        ):
            parts.append(" ")
        parts.append(spelling)
        previous = tok
    return "".join(parts)


def salient_terms(sql: str, limit: int = 10) -> list[str]:
    """Identifiers and literals of a statement, deduplicated in order.

    Keywords and function-call names are skipped, so what remains is the
    statement's own vocabulary: table/column names, strings, numbers.
    """
    seen: set[str] = set()
    terms: list[str] = []
    try:
        tokens = tokenize(sql)
    except ExtractError:
        return []
    for i, tok in enumerate(tokens):
        if tok.kind == WORD and tok.key in _KEYWORDS:
            continue
        nxt = tokens[i + 1] if i + 1 < len(tokens) else None
        if (
            tok.kind == WORD
            and nxt is not None
            and nxt.kind == PUNCT
            and nxt.value == "("
        ):
            continue  # function call
        if tok.kind in (WORD, QIDENT, STRING, NUMBER) and tok.value and tok.key not in seen:
            seen.add(tok.key)
            terms.append(tok.value)
        if len(terms) >= limit:
            break
    return terms


def extract_schema_items(sql: str, catalog: SchemaCatalog) -> set[str]:
    """Resolve all schema items referenced by a statement against a catalog.

    Tables come from FROM/JOIN clauses with aliases resolved; columns come
    from every clause, qualified or bare (bare names resolve against the
    referenced tables in reference order). Unresolvable names are logged and
    skipped. Raises ExtractError when the text cannot be tokenized or holds
    no statement at all.
    """
    tokens = tokenize(sql)
    if not tokens:
        raise ExtractError("empty statement")

    cte_names = _collect_cte_names(tokens)
    items: set[str] = set()
    # alias key -> original table id in catalog (None = opaque: CTE/derived/unknown)
    aliases: dict[str, str | None] = {}
    referenced_tables: list[str] = []
    consumed: set[int] = set()

    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.is_kw("from", "join"):
            i = _consume_table_refs(
                tokens, i + 1, catalog, cte_names, items, aliases, referenced_tables, consumed
            )
            continue
        i += 1

    _resolve_columns(tokens, catalog, aliases, referenced_tables, items, consumed)
    return items


def _collect_cte_names(tokens: list[Token]) -> set[str]:
    names: set[str] = set()
    for i, tok in enumerate(tokens):
        if not tok.is_kw("with"):
            continue
        j = i + 1
        while j < len(tokens):
            if tokens[j].is_kw("recursive"):
                j += 1
                continue
            if tokens[j].kind not in (WORD, QIDENT):
                break
            name = tokens[j].key
            j += 1
            if j < len(tokens) and tokens[j].kind == PUNCT and tokens[j].value == "(":
                j = _skip_parens(tokens, j)  # optional column list
            if j >= len(tokens) or not tokens[j].is_kw("as"):
                break
            j += 1
            if j < len(tokens) and tokens[j].is_kw("not", "materialized"):
                j += 1
                if j < len(tokens) and tokens[j].is_kw("materialized"):
                    j += 1
            if j >= len(tokens) or tokens[j].value != "(":
                break
            names.add(name)
            j = _skip_parens(tokens, j)
            if j < len(tokens) and tokens[j].kind == PUNCT and tokens[j].value == ",":
                j += 1
                continue
            break
    return names


def _skip_parens(tokens: list[Token], i: int) -> int:
    depth = 0
    while i < len(tokens):
        if tokens[i].kind == PUNCT:
            if tokens[i].value == "(":
                depth += 1
            elif tokens[i].value == ")":
                depth -= 1
                if depth == 0:
                    return i + 1
        i += 1
    return i


def _consume_table_refs(tokens, i, catalog, cte_names, items, aliases, referenced, consumed) -> int:
    """Parse comma-separated table references starting at ``i``; returns next index."""
    while True:
        if i >= len(tokens):
            return i
        tok = tokens[i]
        if tok.kind == PUNCT and tok.value == "(":
            # derived table or parenthesized join; its innards are scanned by
            # the main loop, here we only bind the trailing alias as opaque
            i = _skip_parens(tokens, i)
            i = _bind_alias(tokens, i, None, aliases, consumed)
        elif tok.kind in (WORD, QIDENT):
            name_tok = tok
            consumed.add(id(tok))
            i += 1
            # schema-qualified reference: keep the last path component
            while (
                i + 1 < len(tokens)
                and tokens[i].kind == PUNCT
                and tokens[i].value == "."
                and tokens[i + 1].kind in (WORD, QIDENT)
            ):
                consumed.add(id(tokens[i + 1]))
                name_tok = tokens[i + 1]
                i += 2
            resolved = catalog.resolve(name_tok.value)
            if resolved is not None and resolved.kind == "table":
                items.add(resolved.id)
                aliases.setdefault(name_tok.key, resolved.id)
                if resolved.id not in referenced:
                    referenced.append(resolved.id)
                i = _bind_alias(tokens, i, resolved.id, aliases, consumed)
            else:
                if name_tok.key not in cte_names:
                    logger.warning("unknown table %r skipped", name_tok.value)
                aliases.setdefault(name_tok.key, None)
                i = _bind_alias(tokens, i, None, aliases, consumed)
        else:
            return i
        if i < len(tokens) and tokens[i].kind == PUNCT and tokens[i].value == ",":
            i += 1
            continue
        return i


def _bind_alias(tokens, i, table_id, aliases, consumed) -> int:
    if i < len(tokens) and tokens[i].is_kw("as"):
        i += 1
    if i < len(tokens) and tokens[i].kind in (WORD, QIDENT) and tokens[i].key not in _KEYWORDS:
        aliases[tokens[i].key] = table_id
        consumed.add(id(tokens[i]))
        i += 1
    return i


def _resolve_columns(tokens, catalog, aliases, referenced, items, consumed) -> None:
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.kind not in (WORD, QIDENT):
            i += 1
            continue
        nxt = tokens[i + 1] if i + 1 < len(tokens) else None
        if nxt is not None and nxt.kind == PUNCT and nxt.value == ".":
            qual = tok
            col = tokens[i + 2] if i + 2 < len(tokens) else None
            if col is not None and col.kind in (WORD, QIDENT):
                _resolve_qualified(qual, col, catalog, aliases, items)
                i += 3
                continue
            i += 2
            continue
        if id(tok) in consumed or (tok.kind == WORD and tok.key in _KEYWORDS):
            i += 1
            continue
        if nxt is not None and nxt.kind == PUNCT and nxt.value == "(":
            i += 1  # function call
            continue
        prev = tokens[i - 1] if i > 0 else None
        if prev is not None and (prev.is_kw("as") or (prev.kind == PUNCT and prev.value == ".")):
            i += 1
            continue
        _resolve_bare(tok, catalog, referenced, items)
        i += 1


def _resolve_qualified(qual: Token, col: Token, catalog, aliases, items) -> None:
    table_id = aliases.get(qual.key)
    if table_id is None and qual.key not in aliases:
        resolved = catalog.resolve(qual.value)
        if resolved is not None and resolved.kind == "table":
            table_id = resolved.id
    if table_id is None:
        if qual.key not in aliases:  # aliased derived tables stay silent
            logger.warning("unresolvable qualifier %r.%r skipped", qual.value, col.value)
        return
    if col.value == "*":
        return
    item = catalog.resolve(f"{table_id}.{col.value}")
    if item is None:
        logger.warning("unknown column %r on table %r skipped", col.value, table_id)
        return
    items.add(item.id)


def _resolve_bare(tok: Token, catalog, referenced, items) -> None:
    for table_id in referenced:
        item = catalog.resolve(f"{table_id}.{tok.value}")
        if item is not None:
            items.add(item.id)
            return
    logger.debug("bare name %r matches no referenced table", tok.value)
