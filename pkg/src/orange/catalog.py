"""Database schema catalog: loading, case-insensitive lookup, prompt rendering.

A catalog is the immutable inventory of addressable schema items (base tables
and their columns) for one SQLite database, plus foreign keys. Identifiers
compare case-insensitively but render with their original spelling. Views,
indexes, and triggers never enter the catalog.
"""

from __future__ import annotations

import json
import sqlite3
from dataclasses import dataclass, field
from pathlib import Path

from .execution import readonly_uri


class CatalogError(Exception):
    """Database file unreadable, corrupt, or without user tables."""


class SubsetError(Exception):
    """A requested schema item id does not exist in the catalog."""


@dataclass(frozen=True)
class SchemaItem:
    """One addressable schema element: a table (``atom``) or a column (``atom.element``)."""

    id: str
    kind: str  # "table" | "column"
    column_type: str = ""
    description: str = ""

    @property
    def table(self) -> str:
        return self.id.split(".", 1)[0]

    @property
    def column(self) -> str | None:
        parts = self.id.split(".", 1)
        return parts[1] if len(parts) == 2 else None


@dataclass(frozen=True)
class SchemaCatalog:
    db_id: str
    items: tuple[SchemaItem, ...]
    foreign_keys: tuple[tuple[str, str], ...] = ()
    _by_key: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        by_key: dict[str, SchemaItem] = {}
        for item in self.items:
            key = item.id.casefold()
            if key in by_key:
                raise CatalogError(f"duplicate schema item id {item.id!r}")
            by_key[key] = item
        object.__setattr__(self, "_by_key", by_key)
        tables = {i.id.casefold() for i in self.items if i.kind == "table"}
        if not tables:
            raise CatalogError(f"catalog for {self.db_id!r} has no tables")
        for item in self.items:
            if item.kind == "column" and item.table.casefold() not in tables:
                raise CatalogError(f"column {item.id!r} references unknown table")
        for src, dst in self.foreign_keys:
            for endpoint in (src, dst):
                found = by_key.get(endpoint.casefold())
                if found is None or found.kind != "column":
                    raise CatalogError(f"foreign key endpoint {endpoint!r} is not a column")

    def resolve(self, item_id: str) -> SchemaItem | None:
        return self._by_key.get(item_id.casefold())

    def tables(self) -> list[SchemaItem]:
        return [i for i in self.items if i.kind == "table"]

    def columns_of(self, table_id: str) -> list[SchemaItem]:
        key = table_id.casefold()
        return [i for i in self.items if i.kind == "column" and i.table.casefold() == key]

    def all_ids(self) -> set[str]:
        return {i.id for i in self.items}


def load_catalog(db_path, metadata_path=None) -> SchemaCatalog:
    """Introspect a SQLite file into a catalog.

    Item order is the database's own catalog order (sqlite_master order for
    tables, column order within each table), so two loads of the same file
    are identical. ``metadata_path`` may point at a JSON sidecar mapping
    "table.column" to a free-text description.
    """
    db_path = Path(db_path)
    if not db_path.is_file():
        raise CatalogError(f"not a readable database file: {db_path}")
    descriptions = _load_descriptions(metadata_path)
    try:
        conn = sqlite3.connect(readonly_uri(db_path), uri=True)
    except sqlite3.Error as exc:
        raise CatalogError(f"cannot open {db_path}: {exc}") from exc
    try:
        try:
            table_rows = conn.execute(
                "SELECT name FROM sqlite_master"
                " WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY rowid"
            ).fetchall()
        except sqlite3.Error as exc:
            raise CatalogError(f"cannot read schema of {db_path}: {exc}") from exc
        if not table_rows:
            raise CatalogError(f"database {db_path} has no user tables")

        items: list[SchemaItem] = []
        foreign_keys: list[tuple[str, str]] = []
        for (table_name,) in table_rows:
            items.append(SchemaItem(id=table_name, kind="table"))
            quoted = table_name.replace('"', '""')
            for row in conn.execute(f'PRAGMA table_info("{quoted}")'):
                column_id = f"{table_name}.{row[1]}"
                items.append(
                    SchemaItem(
                        id=column_id,
                        kind="column",
                        column_type=row[2] or "",
                        description=descriptions.get(column_id.casefold(), ""),
                    )
                )
            for fk in conn.execute(f'PRAGMA foreign_key_list("{quoted}")'):
                # fk: (id, seq, ref_table, from_col, to_col, ...)
                ref_table, from_col, to_col = fk[2], fk[3], fk[4]
                if to_col is None:
                    continue  # implicit PK reference; skip rather than guess
                foreign_keys.append((f"{table_name}.{from_col}", f"{ref_table}.{to_col}"))
    finally:
        conn.close()
    return SchemaCatalog(
        db_id=db_path.stem,
        items=tuple(items),
        foreign_keys=tuple(_original_spelling(fk, items) for fk in foreign_keys),
    )


def _load_descriptions(metadata_path) -> dict[str, str]:
    if metadata_path is None:
        return {}
    path = Path(metadata_path)
    if not path.is_file():
        return {}
    raw = json.loads(path.read_text(encoding="utf-8"))
    return {str(k).casefold(): str(v) for k, v in raw.items()}


def _original_spelling(fk: tuple[str, str], items: list[SchemaItem]) -> tuple[str, str]:
    by_key = {i.id.casefold(): i.id for i in items}
    return (by_key.get(fk[0].casefold(), fk[0]), by_key.get(fk[1].casefold(), fk[1]))


def subset_closure(catalog: SchemaCatalog, subset) -> tuple[list[str], set[str]]:
    """Resolve a subset of item ids to (ordered table ids, column id set).

    A selected table id implies all of its columns; a selected column implies
    its table appears with (at least) that column. ``subset=None`` means the
    whole catalog.
    """
    if subset is None:
        tables = [t.id for t in catalog.tables()]
        columns = {c.id for c in catalog.items if c.kind == "column"}
        return tables, columns

    selected_tables: set[str] = set()
    selected_columns: set[str] = set()
    for item_id in subset:
        item = catalog.resolve(item_id)
        if item is None:
            raise SubsetError(f"unknown schema item id {item_id!r}")
        if item.kind == "table":
            selected_tables.add(item.id)
            selected_columns.update(c.id for c in catalog.columns_of(item.id))
        else:
            selected_columns.add(item.id)
    table_keys = {t.casefold() for t in selected_tables}
    table_keys.update(catalog.resolve(c).table.casefold() for c in selected_columns)
    tables = [t.id for t in catalog.tables() if t.id.casefold() in table_keys]
    return tables, selected_columns


def render_schema(catalog: SchemaCatalog, subset=None) -> str:
    """Render a DDL-like prompt section for a subset of the catalog.

    Emits exactly the tables having at least one selected item, each with
    exactly its selected columns, followed by the foreign keys whose both
    endpoints are rendered. ``subset=None`` renders everything; an empty
    subset renders the empty string (callers fall back to the full schema).
    """
    if subset is not None and len(subset) == 0:
        return ""
    tables, columns = subset_closure(catalog, subset)
    rendered_columns: set[str] = set()
    lines: list[str] = []
    for table_id in tables:
        cols = [c for c in catalog.columns_of(table_id) if c.id in columns]
        if not cols:
            continue
        lines.append(f"CREATE TABLE {table_id} (")
        for i, col in enumerate(cols):
            rendered_columns.add(col.id.casefold())
            sep = "," if i < len(cols) - 1 else ""
            comment = f" -- {col.description}" if col.description else ""
            decl = f"    {col.column} {col.column_type}".rstrip()
            lines.append(f"{decl}{sep}{comment}")
        lines.append(");")
    fk_lines = [
        f"-- {src} references {dst}"
        for src, dst in catalog.foreign_keys
        if src.casefold() in rendered_columns and dst.casefold() in rendered_columns
    ]
    if fk_lines:
        lines.append("")
        lines.extend(fk_lines)
    return "\n".join(lines)
