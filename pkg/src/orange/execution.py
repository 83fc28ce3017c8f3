"""Read-only SQL execution and result canonicalization.

Execution results are reduced to fingerprints so that candidate clustering,
knowledge de-duplication, self-consistency voting, and execution-accuracy
scoring all share one notion of "same answer": row order is ignored, column
order matters, floats are compared at 6 decimal places, and failures compare
equal only within the same error class.
"""

from __future__ import annotations

import hashlib
import json
import sqlite3
import time
from dataclasses import dataclass
from pathlib import Path

HASH_ALGORITHM = "sha256"

ERROR_TIMEOUT = "timeout"
ERROR_SYNTAX = "syntax"
ERROR_RUNTIME = "runtime"
ERROR_NONE = "none"

# sqlite ops between deadline checks; small enough to honor sub-second timeouts
_PROGRESS_INTERVAL = 2000
_FETCH_CHUNK = 512

_FLOAT_DECIMALS = 6
_NULL_TOKEN = "\x00null"


@dataclass(frozen=True)
class ExecLimits:
    """Bounds on a single query execution."""

    timeout: float = 30.0
    max_rows: int = 10_000

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError(f"timeout must be positive, got {self.timeout}")
        if self.max_rows <= 0:
            raise ValueError(f"max_rows must be positive, got {self.max_rows}")


DEFAULT_LIMITS = ExecLimits()


def readonly_uri(db_path) -> str:
    """SQLite URI opening a file strictly read-only, safe for odd path characters."""
    return Path(db_path).resolve().as_uri() + "?mode=ro"


@dataclass(frozen=True)
class ResultTable:
    """Materialized query output, possibly truncated at ``max_rows``."""

    column_names: tuple[str, ...]
    rows: tuple[tuple, ...]
    truncated: bool = False
    row_count_before_truncation: int = -1

    def __post_init__(self) -> None:
        if self.row_count_before_truncation < 0:
            object.__setattr__(self, "row_count_before_truncation", len(self.rows))
        for row in self.rows:
            if len(row) != len(self.column_names):
                raise ValueError(
                    f"row width {len(row)} does not match {len(self.column_names)} columns"
                )
        if self.truncated and self.row_count_before_truncation < len(self.rows):
            raise ValueError("truncated table cannot have fewer total rows than kept rows")


@dataclass(frozen=True)
class ExecError:
    """Failed execution; ``error_class`` is one of timeout | syntax | runtime."""

    error_class: str
    message: str = ""


@dataclass(frozen=True)
class ResultFingerprint:
    digest: str
    is_error: bool = False
    error_class: str = ERROR_NONE

    def __post_init__(self) -> None:
        if not self.is_error and self.error_class != ERROR_NONE:
            raise ValueError("non-error fingerprint must carry error_class 'none'")


def execute(db_path, sql: str, limits: ExecLimits = DEFAULT_LIMITS) -> ResultTable | ExecError:
    """Run one read-only statement against a SQLite file.

    Writes of any kind fail (the connection is opened read-only and forced
    query-only), long queries are interrupted at ``limits.timeout`` seconds,
    and at most ``limits.max_rows`` rows are retained; the total row count is
    still tallied so truncation is visible.
    """
    if not sql.strip():
        return ExecError(ERROR_SYNTAX, "empty statement")
    deadline = time.monotonic() + limits.timeout
    timed_out = False

    def _tick() -> int:
        nonlocal timed_out
        if time.monotonic() > deadline:
            timed_out = True
            return 1
        return 0

    try:
        conn = sqlite3.connect(readonly_uri(db_path), uri=True, timeout=limits.timeout)
    except sqlite3.Error as exc:
        return ExecError(ERROR_RUNTIME, f"cannot open database: {exc}")
    try:
        conn.set_progress_handler(_tick, _PROGRESS_INTERVAL)
        conn.set_authorizer(_deny_attach)
        conn.execute("PRAGMA query_only = ON")
        cursor = conn.execute(sql)
        columns = tuple(d[0] for d in cursor.description) if cursor.description else ()
        kept: list[tuple] = []
        total = 0
        while True:
            chunk = cursor.fetchmany(_FETCH_CHUNK)
            if not chunk:
                break
            total += len(chunk)
            if len(kept) < limits.max_rows:
                kept.extend(chunk[: limits.max_rows - len(kept)])
        return ResultTable(
            column_names=columns,
            rows=tuple(tuple(r) for r in kept),
            truncated=total > len(kept),
            row_count_before_truncation=total,
        )
    except (sqlite3.Error, sqlite3.Warning) as exc:
        return ExecError(_classify_error(exc, timed_out), str(exc))
    finally:
        conn.close()


def _deny_attach(action, arg1, arg2, db_name, trigger) -> int:
    # ATTACH can create files on disk even on a read-only connection
    if action in (sqlite3.SQLITE_ATTACH, getattr(sqlite3, "SQLITE_DETACH", 25)):
        return sqlite3.SQLITE_DENY
    return sqlite3.SQLITE_OK


def _classify_error(exc: Exception, timed_out: bool) -> str:
    if timed_out:
        return ERROR_TIMEOUT
    message = str(exc).lower()
    if isinstance(exc, (sqlite3.ProgrammingError, sqlite3.Warning)):
        return ERROR_SYNTAX
    if "syntax error" in message or "unrecognized token" in message or "incomplete input" in message:
        return ERROR_SYNTAX
    return ERROR_RUNTIME


def canonical_value(value) -> str:
    """Stable text encoding of one cell; floats rounded to 6 decimals."""
    if value is None:
        return _NULL_TOKEN
    if isinstance(value, bool):  # sqlite never yields bool, but be safe
        return f"i:{int(value)}"
    if isinstance(value, int):
        return f"i:{value}"
    if isinstance(value, float):
        rounded = round(value, _FLOAT_DECIMALS)
        if rounded == 0.0:
            rounded = 0.0  # collapse -0.0
        return f"f:{rounded!r}"
    if isinstance(value, bytes):
        return "b:" + value.hex()
    return "t:" + str(value)


def _canonical_payload(result: ResultTable) -> str:
    encoded_rows = sorted(tuple(canonical_value(v) for v in row) for row in result.rows)
    payload: dict = {"rows": [list(r) for r in encoded_rows]}
    if result.truncated:
        payload["truncated_at"] = len(result.rows)
    return json.dumps(payload, ensure_ascii=False, separators=(",", ":"))


def fingerprint(result: ResultTable | ExecError) -> ResultFingerprint:
    """Collapse a result to a comparable digest.

    Row order is discarded (rows sorted over their canonical encodings),
    column order is preserved, column names are excluded. Errors hash by
    class only, so e.g. all timeouts compare equal regardless of message.
    """
    if isinstance(result, ExecError):
        digest = hashlib.sha256(f"error:{result.error_class}".encode()).hexdigest()
        return ResultFingerprint(digest=digest, is_error=True, error_class=result.error_class)
    digest = hashlib.sha256(_canonical_payload(result).encode()).hexdigest()
    return ResultFingerprint(digest=digest)


def results_equal(a: ResultTable | ExecError, b: ResultTable | ExecError) -> bool:
    return fingerprint(a) == fingerprint(b)


def is_null_like(result: ResultTable | ExecError) -> bool:
    """True for results carrying no information: errors, zero rows, or all-NULL cells."""
    if isinstance(result, ExecError):
        return True
    if not result.rows:
        return True
    return all(value is None for row in result.rows for value in row)


def render_rows(rows, limit: int | None = None) -> str:
    """Bracketed list-of-lists display of result rows, e.g. ``[[17]]``."""
    shown = rows if limit is None else rows[:limit]
    return "[" + ", ".join("[" + ", ".join(repr(v) for v in row) + "]" for row in shown) + "]"
