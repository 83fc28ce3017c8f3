import sqlite3

import pytest

from orange.catalog import (
    CatalogError,
    SchemaCatalog,
    SchemaItem,
    SubsetError,
    load_catalog,
    render_schema,
)


@pytest.fixture()
def two_table_db(tmp_path):
    path = tmp_path / "mini.sqlite"
    conn = sqlite3.connect(path)
    conn.executescript(
        """
        CREATE TABLE molecule (molecule_id TEXT PRIMARY KEY, label TEXT);
        CREATE TABLE atom (
            atom_id TEXT PRIMARY KEY,
            molecule_id TEXT REFERENCES molecule(molecule_id),
            element TEXT
        );
        CREATE VIEW only_na AS SELECT * FROM atom WHERE element = 'na';
        CREATE INDEX idx_elem ON atom(element);
        """
    )
    conn.commit()
    conn.close()
    return path


def test_load_catalog_shape(two_table_db):
    catalog = load_catalog(two_table_db)
    tables = [i.id for i in catalog.items if i.kind == "table"]
    columns = [i.id for i in catalog.items if i.kind == "column"]
    assert tables == ["molecule", "atom"]
    assert len(columns) == 5
    assert catalog.foreign_keys == (("atom.molecule_id", "molecule.molecule_id"),)


def test_views_and_indexes_ignored(two_table_db):
    catalog = load_catalog(two_table_db)
    assert catalog.resolve("only_na") is None
    assert all(i.kind in ("table", "column") for i in catalog.items)


def test_load_is_deterministic(two_table_db):
    assert load_catalog(two_table_db) == load_catalog(two_table_db)


def test_missing_file_raises(tmp_path):
    with pytest.raises(CatalogError):
        load_catalog(tmp_path / "nope.sqlite")


def test_empty_database_raises(tmp_path):
    path = tmp_path / "empty.sqlite"
    sqlite3.connect(path).close()
    with pytest.raises(CatalogError):
        load_catalog(path)


def test_corrupt_file_raises(tmp_path):
    path = tmp_path / "garbage.sqlite"
    path.write_bytes(b"this is not a database" * 100)
    with pytest.raises(CatalogError):
        load_catalog(path)


def test_single_table_single_column(tiny_db):
    catalog = load_catalog(tiny_db)
    assert [i.id for i in catalog.items] == ["t", "t.a"]


def test_case_insensitive_resolution(two_table_db):
    catalog = load_catalog(two_table_db)
    assert catalog.resolve("ATOM").id == "atom"
    assert catalog.resolve("Atom.Element").id == "atom.element"


def test_sidecar_descriptions(two_table_db, tmp_path):
    sidecar = tmp_path / "cols.json"
    sidecar.write_text('{"ATOM.element": "symbol text"}')
    catalog = load_catalog(two_table_db, sidecar)
    assert catalog.resolve("atom.element").description == "symbol text"
    assert "symbol text" in render_schema(catalog)


# --- rendering ----------------------------------------------------------------


def _definitions(text):
    """(tables, columns) actually defined in a rendered schema."""
    tables, columns = [], []
    current = None
    for line in text.splitlines():
        if line.startswith("CREATE TABLE "):
            current = line[len("CREATE TABLE ") : -2].strip()
            tables.append(current)
        elif line.startswith("    ") and current:
            columns.append(f"{current}.{line.strip().split()[0].rstrip(',')}")
    return tables, columns


def test_render_all_mentions_every_item_once(catalogs):
    for catalog in catalogs.values():
        tables, columns = _definitions(render_schema(catalog))
        assert sorted(tables) == sorted(t.id for t in catalog.tables())
        expected = [i.id for i in catalog.items if i.kind == "column"]
        assert sorted(columns) == sorted(expected)


def test_render_subset_closure(catalogs):
    catalog = catalogs["toxicology"]
    text = render_schema(catalog, {"atom", "molecule.label"})
    tables, columns = _definitions(text)
    assert tables == ["molecule", "atom"]
    assert set(columns) == {"atom.atom_id", "atom.molecule_id", "atom.element", "molecule.label"}
    # molecule.molecule_id not rendered, so the foreign key must be absent
    assert "references" not in text


def test_render_fk_needs_both_endpoints(catalogs):
    catalog = catalogs["toxicology"]
    text = render_schema(catalog, {"atom", "molecule"})
    assert "-- atom.molecule_id references molecule.molecule_id" in text


def test_render_empty_subset(catalogs):
    assert render_schema(catalogs["toxicology"], set()) == ""


def test_render_unknown_id(catalogs):
    with pytest.raises(SubsetError):
        render_schema(catalogs["toxicology"], {"unicorn"})


def test_render_deterministic(catalogs):
    catalog = catalogs["retail"]
    subset = {"orders.total", "customers"}
    assert render_schema(catalog, subset) == render_schema(catalog, set(subset))


def test_catalog_invariants_enforced():
    with pytest.raises(CatalogError):
        SchemaCatalog(db_id="x", items=(SchemaItem(id="t.a", kind="column"),))
    with pytest.raises(CatalogError):
        SchemaCatalog(
            db_id="x",
            items=(SchemaItem(id="t", kind="table"), SchemaItem(id="T", kind="table")),
        )
    with pytest.raises(CatalogError):
        SchemaCatalog(
            db_id="x",
            items=(SchemaItem(id="t", kind="table"),),
            foreign_keys=(("t.a", "t.b"),),
        )
