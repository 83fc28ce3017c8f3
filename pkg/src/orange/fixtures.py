"""Desk-scale fixture corpus: three small databases, a 30-task log, cassettes.

The toxicology-style database is seeded so that the canonical sodium-atom
count over non-carcinogenic molecules is exactly 17. Every task carries gold
SQL that executes cleanly, and candidate lists are crafted to exercise the
cluster shapes the pipeline cares about: clear majorities, 2-2 ties, error
clusters, empty and all-NULL results, and a single-candidate task.
"""

from __future__ import annotations

import json
import sqlite3
from pathlib import Path

from .execution import ExecLimits, execute
from .logstore import Candidate, CandidateSet, TranslationTask, append_log

SODIUM_COUNT_SQL = (
    "SELECT COUNT(T1.atom_id) FROM atom AS T1 "
    "INNER JOIN molecule AS T2 ON T1.molecule_id = T2.molecule_id "
    "WHERE T1.element = 'na' AND T2.label = '-'"
)
SODIUM_COUNT_EXPECTED = 17

FIXTURE_DB_IDS = ("toxicology", "retail", "concerts")

_GENERATOR_TAG = "fixture-gen"


# ---------------------------------------------------------------------------
# Databases
# ---------------------------------------------------------------------------

_MOLECULES = [
    ("TR000", "-"), ("TR001", "-"), ("TR002", "-"), ("TR003", "-"),
    ("TR004", "-"), ("TR005", "-"), ("TR006", "+"), ("TR007", "+"),
    ("TR008", "+"), ("TR009", "+"),
]

# element layout per molecule; sodium counts in '-' molecules sum to 17
_ATOM_LAYOUT = {
    "TR000": ["na"] * 3 + ["c"] * 2 + ["o"],
    "TR001": ["na"] * 4 + ["c"] + ["h"] * 2,
    "TR002": ["na"] * 2 + ["c"] * 3,
    "TR003": ["na"] * 5 + ["c"] * 2 + ["o"] * 2 + ["h"],
    "TR004": ["na"] + ["c"] * 4,
    "TR005": ["na"] * 2 + ["o"] * 3,
    "TR006": ["na"] * 2 + ["c"] * 3 + ["cl"],
    "TR007": ["na"] + ["c"] * 2,
    "TR008": ["c"] * 4 + ["cl"] * 2,
    "TR009": ["c"] + ["o"] * 2,
}

_BONDS = {
    "TR000": ["-", "="], "TR001": ["-", "-"], "TR002": ["="],
    "TR003": ["-", "=", "#"], "TR004": ["-"], "TR005": ["="],
    "TR006": ["-", "="], "TR007": ["-"], "TR008": ["#", "="], "TR009": ["-"],
}

_TOXICOLOGY_DESCRIPTIONS = {
    "atom.element": "chemical element symbol of the atom, lowercase (e.g. 'na' for sodium)",
    "atom.molecule_id": "the molecule this atom belongs to",
    "molecule.label": "'+' for carcinogenic molecules, '-' for non-carcinogenic ones",
    "bond.bond_type": "bond kind: '-' single, '=' double, '#' triple",
}


def _build_toxicology(path: Path) -> None:
    conn = sqlite3.connect(path)
    try:
        conn.executescript(
            """
            CREATE TABLE molecule (
                molecule_id TEXT PRIMARY KEY,
                label TEXT
            );
            CREATE TABLE atom (
                atom_id TEXT PRIMARY KEY,
                molecule_id TEXT REFERENCES molecule(molecule_id),
                element TEXT
            );
            CREATE TABLE bond (
                bond_id TEXT PRIMARY KEY,
                molecule_id TEXT REFERENCES molecule(molecule_id),
                bond_type TEXT
            );
            """
        )
        conn.executemany("INSERT INTO molecule VALUES (?, ?)", _MOLECULES)
        atoms = []
        for molecule_id, elements in _ATOM_LAYOUT.items():
            for i, element in enumerate(elements, start=1):
                atoms.append((f"{molecule_id}_{i}", molecule_id, element))
        conn.executemany("INSERT INTO atom VALUES (?, ?, ?)", atoms)
        bonds = []
        for molecule_id, types in _BONDS.items():
            for i, bond_type in enumerate(types, start=1):
                bonds.append((f"{molecule_id}_b{i}", molecule_id, bond_type))
        conn.executemany("INSERT INTO bond VALUES (?, ?, ?)", bonds)
        conn.commit()
    finally:
        conn.close()


_CUSTOMERS = [
    (1, "Alice Martin", "Lyon"), (2, "Bruno Keller", "Paris"),
    (3, "Chloe Dupont", "Lyon"), (4, "David Rossi", "Nantes"),
    (5, "Emma Laurent", "Paris"), (6, "Felix Moreau", "Lyon"),
    (7, "Gina Petit", "Nantes"), (8, "Hugo Blanc", "Lyon"),
]

_ORDERS = [
    (101, 1, 120.50, "2024-01-05"), (102, 1, 35.00, "2024-02-11"),
    (103, 2, 89.90, "2024-01-20"), (104, 3, 210.00, "2024-03-02"),
    (105, 3, 15.25, "2024-03-09"), (106, 4, 99.99, "2024-01-28"),
    (107, 5, 150.00, "2024-02-14"), (108, 5, 60.10, "2024-04-01"),
    (109, 6, 300.75, "2024-02-22"), (110, 8, 45.00, "2024-03-30"),
    (111, 2, 75.50, "2024-04-12"), (112, 1, 22.40, "2024-04-18"),
]

_ORDER_ITEMS = [
    (1, 101, "lamp", 2, 30.00), (2, 101, "rug", 1, 60.50),
    (3, 102, "mug", 4, 8.75), (4, 103, "chair", 1, 89.90),
    (5, 104, "desk", 1, 180.00), (6, 104, "lamp", 1, 30.00),
    (7, 105, "mug", 1, 15.25), (8, 106, "shelf", 1, 99.99),
    (9, 107, "sofa", 1, 150.00), (10, 108, "rug", 1, 60.10),
    (11, 109, "desk", 1, 180.00), (12, 109, "chair", 1, 89.90),
    (13, 109, "lamp", 1, 30.85), (14, 110, "mug", 3, 15.00),
    (15, 111, "shelf", 1, 75.50), (16, 112, "mug", 2, 11.20),
]


def _build_retail(path: Path) -> None:
    conn = sqlite3.connect(path)
    try:
        conn.executescript(
            """
            CREATE TABLE customers (
                customer_id INTEGER PRIMARY KEY,
                name TEXT,
                city TEXT
            );
            CREATE TABLE orders (
                order_id INTEGER PRIMARY KEY,
                customer_id INTEGER REFERENCES customers(customer_id),
                total REAL,
                placed_on TEXT
            );
            CREATE TABLE order_items (
                item_id INTEGER PRIMARY KEY,
                order_id INTEGER REFERENCES orders(order_id),
                product TEXT,
                quantity INTEGER,
                unit_price REAL
            );
            """
        )
        conn.executemany("INSERT INTO customers VALUES (?, ?, ?)", _CUSTOMERS)
        conn.executemany("INSERT INTO orders VALUES (?, ?, ?, ?)", _ORDERS)
        conn.executemany("INSERT INTO order_items VALUES (?, ?, ?, ?, ?)", _ORDER_ITEMS)
        conn.commit()
    finally:
        conn.close()


_ARTISTS = [
    (1, "The Owls", "France"), (2, "Nova Sky", "Spain"),
    (3, "Iron Petals", "France"), (4, "Mellow Tide", "Italy"),
    (5, "Glass Parade", "France"), (6, "Red Meridian", "Spain"),
]

_CONCERTS = [
    (1, 1, "Zenith", 2023, 1200), (2, 1, "Arena Sud", 2023, 2500),
    (3, 1, "Zenith", 2024, 1800), (4, 2, "Luna Hall", 2023, 900),
    (5, 2, "Arena Sud", 2024, 2100), (6, 3, "Zenith", 2023, 1500),
    (7, 3, "Luna Hall", 2024, 1100), (8, 4, "Opera House", 2024, 700),
    (9, 5, "Zenith", 2023, 1600), (10, 5, "Luna Hall", 2023, 950),
    (11, 6, "Arena Sud", 2024, 2200), (12, 6, "Opera House", 2024, 800),
]


def _build_concerts(path: Path) -> None:
    conn = sqlite3.connect(path)
    try:
        conn.executescript(
            """
            CREATE TABLE artists (
                artist_id INTEGER PRIMARY KEY,
                name TEXT,
                country TEXT
            );
            CREATE TABLE concerts (
                concert_id INTEGER PRIMARY KEY,
                artist_id INTEGER REFERENCES artists(artist_id),
                venue TEXT,
                year INTEGER,
                attendance INTEGER
            );
            """
        )
        conn.executemany("INSERT INTO artists VALUES (?, ?, ?)", _ARTISTS)
        conn.executemany("INSERT INTO concerts VALUES (?, ?, ?, ?, ?)", _CONCERTS)
        conn.commit()
    finally:
        conn.close()


# ---------------------------------------------------------------------------
# Tasks
# ---------------------------------------------------------------------------

# (task_id, db_id, question, evidence, gold_sql, difficulty, candidates)
_TASKS: list[tuple[str, str, str, str, str, str, list[str]]] = [
    (
        "tox-001", "toxicology",
        "How many sodium atoms are found in non-carcinogenic molecules?",
        "sodium is element 'na'; non-carcinogenic molecules carry label '-'",
        SODIUM_COUNT_SQL,
        "moderate",
        [
            SODIUM_COUNT_SQL,
            "SELECT count(*) FROM atom a JOIN molecule m ON a.molecule_id = m.molecule_id "
            "WHERE a.element = 'na' AND m.label = '-'",
            "SELECT COUNT(DISTINCT T1.molecule_id) FROM atom AS T1 "
            "INNER JOIN molecule AS T2 ON T1.molecule_id = T2.molecule_id "
            "WHERE T1.element = 'na' AND T2.label = '-'",
            "SELEC COUNT(*) FROM atom",
        ],
    ),
    (
        "tox-002", "toxicology",
        "How many molecules are labeled carcinogenic?",
        "",
        "SELECT COUNT(*) FROM molecule WHERE label = '+'",
        "simple",
        [
            "SELECT COUNT(*) FROM molecule WHERE label = '+'",
            "SELECT COUNT(molecule_id) FROM molecule WHERE label = '+'",
            "SELECT COUNT(*) FROM molecule WHERE label = '-'",
        ],
    ),
    (
        "tox-003", "toxicology",
        "How many distinct non-carcinogenic molecules contain at least one sodium atom?",
        "count molecules, not atoms; the join makes each row an atom with its molecule",
        "SELECT COUNT(DISTINCT m.molecule_id) FROM molecule m "
        "JOIN atom a ON a.molecule_id = m.molecule_id "
        "WHERE m.label = '-' AND a.element = 'na'",
        "challenging",
        [
            "SELECT COUNT(DISTINCT m.molecule_id) FROM molecule m "
            "JOIN atom a ON a.molecule_id = m.molecule_id "
            "WHERE m.label = '-' AND a.element = 'na'",
            "SELECT COUNT(DISTINCT a.molecule_id) FROM atom a "
            "JOIN molecule m ON a.molecule_id = m.molecule_id "
            "WHERE m.label = '-' AND a.element = 'na'",
            "SELECT COUNT(a.atom_id) FROM molecule m "
            "JOIN atom a ON a.molecule_id = m.molecule_id "
            "WHERE m.label = '-' AND a.element = 'na'",
        ],
    ),
    (
        "tox-004", "toxicology",
        "Which elements appear in molecule TR000?",
        "",
        "SELECT DISTINCT element FROM atom WHERE molecule_id = 'TR000' ORDER BY element",
        "simple",
        [
            "SELECT DISTINCT element FROM atom WHERE molecule_id = 'TR000' ORDER BY element",
            "SELECT DISTINCT element FROM atom WHERE molecule_id = 'TR000'",
            "SELECT atom_id FROM atom WHERE element = 'xx'",
        ],
    ),
    (
        "tox-005", "toxicology",
        "How many atoms does each molecule have?",
        "",
        "SELECT molecule_id, COUNT(*) FROM atom GROUP BY molecule_id",
        "moderate",
        [
            "SELECT molecule_id, COUNT(*) FROM atom GROUP BY molecule_id",
            "SELECT molecule_id, COUNT(atom_id) FROM atom GROUP BY molecule_id",
            "SELECT molecule_id, COUNT(DISTINCT element) FROM atom GROUP BY molecule_id",
        ],
    ),
    (
        "tox-006", "toxicology",
        "How many double bonds are recorded?",
        "a double bond has bond_type '='",
        "SELECT COUNT(*) FROM bond WHERE bond_type = '='",
        "simple",
        [
            "SELECT COUNT(*) FROM bond WHERE bond_type = '='",
            "SELECT COUNT(bond_id) FROM bond WHERE bond_type = '='",
            "SELECT COUNT(*) FROM bond WHERE bond_type = '#'",
            "SELECT COUNT(*) FROM bond",
        ],
    ),
    (
        "tox-007", "toxicology",
        "Which molecule contains the most atoms?",
        "",
        "SELECT molecule_id FROM atom GROUP BY molecule_id ORDER BY COUNT(*) DESC LIMIT 1",
        "moderate",
        [
            "SELECT molecule_id FROM atom GROUP BY molecule_id ORDER BY COUNT(*) DESC LIMIT 1",
            "SELECT molecule_id FROM atom GROUP BY molecule_id ORDER BY COUNT(atom_id) DESC LIMIT 1",
            "SELECT molecule_id FROM atom GROUP BY molecule_id ORDER BY COUNT(*) ASC LIMIT 1",
        ],
    ),
    (
        "tox-008", "toxicology",
        "How many carbon atoms sit inside carcinogenic molecules?",
        "carbon is element 'c'; carcinogenic label is '+'",
        "SELECT COUNT(a.atom_id) FROM atom a JOIN molecule m "
        "ON a.molecule_id = m.molecule_id WHERE a.element = 'c' AND m.label = '+'",
        "moderate",
        [
            "SELECT COUNT(a.atom_id) FROM atom a JOIN molecule m "
            "ON a.molecule_id = m.molecule_id WHERE a.element = 'c' AND m.label = '+'",
            "SELECT COUNT(*) FROM atom a JOIN molecule m "
            "ON a.molecule_id = m.molecule_id WHERE a.element = 'c' AND m.label = '+'",
            "SELECT COUNT(*) FROM atom WHERE element = 'c'",
            "SELECT COUNT(*) FROM atom a JOIN molecule m "
            "ON a.molecule_id = m.molecule_id WHERE a.element = 'c' AND m.label = '-'",
        ],
    ),
    (
        "tox-009", "toxicology",
        "How many atoms are there in total?",
        "",
        "SELECT COUNT(*) FROM atom",
        "simple",
        ["SELECT COUNT(*) FROM atom"],
    ),
    (
        "tox-010", "toxicology",
        "What fraction of molecules are carcinogenic?",
        "",
        "SELECT CAST(SUM(label = '+') AS REAL) / COUNT(*) FROM molecule",
        "challenging",
        [
            "SELEC COUNT(*) FROM molecule",
            "SELECT FROM molecule WHERE",
        ],
    ),
    (
        "ret-001", "retail",
        "How many customers are based in Lyon?",
        "city names are stored verbatim, e.g. 'Lyon'",
        "SELECT COUNT(*) FROM customers WHERE city = 'Lyon'",
        "simple",
        [
            "SELECT COUNT(*) FROM customers WHERE city = 'Lyon'",
            "SELECT COUNT(customer_id) FROM customers WHERE city = 'Lyon'",
            "SELECT COUNT(*) FROM customers WHERE city = 'Paris'",
        ],
    ),
    (
        "ret-002", "retail",
        "What is the total amount across all orders?",
        "",
        "SELECT SUM(total) FROM orders",
        "simple",
        [
            "SELECT SUM(total) FROM orders",
            "SELECT SUM(orders.total) FROM orders",
            "SELECT AVG(total) FROM orders",
        ],
    ),
    (
        "ret-003", "retail",
        "How many orders did Alice Martin place?",
        "",
        "SELECT COUNT(*) FROM orders o JOIN customers c "
        "ON o.customer_id = c.customer_id WHERE c.name = 'Alice Martin'",
        "moderate",
        [
            "SELECT COUNT(*) FROM orders o JOIN customers c "
            "ON o.customer_id = c.customer_id WHERE c.name = 'Alice Martin'",
            "SELECT COUNT(o.order_id) FROM orders o JOIN customers c "
            "ON o.customer_id = c.customer_id WHERE c.name = 'Alice Martin'",
            "SELECT COUNT(*) FROM orders WHERE customer_id = 2",
        ],
    ),
    (
        "ret-004", "retail",
        "Which city has the most customers?",
        "",
        "SELECT city FROM customers GROUP BY city ORDER BY COUNT(*) DESC LIMIT 1",
        "moderate",
        [
            "SELECT city FROM customers GROUP BY city ORDER BY COUNT(*) DESC LIMIT 1",
            "SELECT city FROM customers GROUP BY city ORDER BY COUNT(customer_id) DESC LIMIT 1",
            "SELECT city FROM customers GROUP BY city ORDER BY COUNT(*) LIMIT 1",
        ],
    ),
    (
        "ret-005", "retail",
        "What is the average order total for customers living in Paris?",
        "",
        "SELECT AVG(o.total) FROM orders o JOIN customers c "
        "ON o.customer_id = c.customer_id WHERE c.city = 'Paris'",
        "moderate",
        [
            "SELECT AVG(o.total) FROM orders o JOIN customers c "
            "ON o.customer_id = c.customer_id WHERE c.city = 'Paris'",
            "SELECT AVG(total) FROM orders WHERE customer_id IN "
            "(SELECT customer_id FROM customers WHERE city = 'Paris')",
            "SELECT AVG(total) FROM orders",
        ],
    ),
    (
        "ret-006", "retail",
        "How many distinct products have been ordered?",
        "",
        "SELECT COUNT(DISTINCT product) FROM order_items",
        "simple",
        [
            "SELECT COUNT(DISTINCT product) FROM order_items",
            "SELECT COUNT(DISTINCT order_items.product) FROM order_items",
            "SELECT COUNT(product) FROM order_items",
        ],
    ),
    (
        "ret-007", "retail",
        "How many individual items were sold in total?",
        "sum the quantity column",
        "SELECT SUM(quantity) FROM order_items",
        "simple",
        [
            "SELECT SUM(quantity) FROM order_items",
            "SELECT COUNT(*) FROM order_items",
        ],
    ),
    (
        "ret-008", "retail",
        "How many orders total more than 100?",
        "amounts live in the orders.total column",
        "SELECT COUNT(*) FROM orders WHERE total > 100",
        "simple",
        [
            "SELECT COUNT(*) FROM orders WHERE total > 100",
            "SELECT COUNT(*) FROM orders WHERE total > 50",
            "SELECT COUNT(*) FROM orders WHERE orders.total > 50",
            "SELECT COUNT(order_id) FROM orders WHERE total > 100",
        ],
    ),
    (
        "ret-009", "retail",
        "Which customers have never placed an order?",
        "",
        "SELECT c.name FROM customers c LEFT JOIN orders o "
        "ON o.customer_id = c.customer_id WHERE o.order_id IS NULL",
        "challenging",
        [
            "SELECT c.name FROM customers c LEFT JOIN orders o "
            "ON o.customer_id = c.customer_id WHERE o.order_id IS NULL",
            "SELECT name FROM customers WHERE customer_id NOT IN "
            "(SELECT customer_id FROM orders)",
            "SELECT c.name FROM customers c JOIN orders o ON o.customer_id = c.customer_id",
        ],
    ),
    (
        "ret-010", "retail",
        "What is the highest single order total?",
        "",
        "SELECT MAX(total) FROM orders",
        "simple",
        [
            "SELECT MAX(total) FROM orders",
            "SELECT MAX(orders.total) FROM orders",
            "SELECT MIN(total) FROM orders",
        ],
    ),
    (
        "con-001", "concerts",
        "How many concerts happened in 2023?",
        "",
        "SELECT COUNT(*) FROM concerts WHERE year = 2023",
        "simple",
        [
            "SELECT COUNT(*) FROM concerts WHERE year = 2023",
            "SELECT COUNT(concert_id) FROM concerts WHERE year = 2023",
            "SELECT COUNT(*) FROM concerts WHERE year = 2024",
        ],
    ),
    (
        "con-002", "concerts",
        "Which artist has performed the most concerts?",
        "",
        "SELECT a.name FROM artists a JOIN concerts c ON c.artist_id = a.artist_id "
        "GROUP BY a.artist_id ORDER BY COUNT(*) DESC LIMIT 1",
        "challenging",
        [
            "SELECT a.name FROM artists a JOIN concerts c ON c.artist_id = a.artist_id "
            "GROUP BY a.artist_id ORDER BY COUNT(*) DESC LIMIT 1",
            "SELECT a.name FROM artists a JOIN concerts c ON c.artist_id = a.artist_id "
            "GROUP BY a.name ORDER BY COUNT(c.concert_id) DESC LIMIT 1",
            "SELECT name FROM artists ORDER BY artist_id LIMIT 1",
        ],
    ),
    (
        "con-003", "concerts",
        "What is the total attendance across all concerts?",
        "",
        "SELECT SUM(attendance) FROM concerts",
        "simple",
        [
            "SELECT SUM(attendance) FROM concerts",
            "SELECT SUM(concerts.attendance) FROM concerts",
            "SELECT AVG(attendance) FROM concerts",
        ],
    ),
    (
        "con-004", "concerts",
        "How many artists come from France?",
        "country value for French artists is 'France'",
        "SELECT COUNT(*) FROM artists WHERE country = 'France'",
        "simple",
        [
            "SELECT COUNT(*) FROM artists WHERE country = 'France'",
            "SELECT COUNT(artist_id) FROM artists WHERE country = 'France'",
            "SELECT COUNT(*) FROM artists WHERE country = 'Spain'",
        ],
    ),
    (
        "con-005", "concerts",
        "What was the average attendance of concerts in 2024?",
        "",
        "SELECT AVG(attendance) FROM concerts WHERE year = 2024",
        "moderate",
        [
            "SELECT AVG(attendance) FROM concerts WHERE year = 2024",
            "SELECT AVG(concerts.attendance) FROM concerts WHERE year = 2024",
            "SELECT AVG(attendance) FROM concerts",
        ],
    ),
    (
        "con-006", "concerts",
        "Which venues hosted a concert in 2023?",
        "",
        "SELECT DISTINCT venue FROM concerts WHERE year = 2023",
        "simple",
        [
            "SELECT DISTINCT venue FROM concerts WHERE year = 2023",
            "SELECT DISTINCT venue FROM concerts WHERE year = 2023 ORDER BY venue",
            "SELECT MAX(attendance) FROM concerts WHERE year = 1999",
        ],
    ),
    (
        "con-007", "concerts",
        "How many concerts did The Owls play?",
        "",
        "SELECT COUNT(*) FROM concerts c JOIN artists a "
        "ON c.artist_id = a.artist_id WHERE a.name = 'The Owls'",
        "moderate",
        [
            "SELECT COUNT(*) FROM concerts c JOIN artists a "
            "ON c.artist_id = a.artist_id WHERE a.name = 'The Owls'",
            "SELECT COUNT(c.concert_id) FROM concerts c JOIN artists a "
            "ON c.artist_id = a.artist_id WHERE a.name = 'The Owls'",
            "SELECT COUNT(*) FROM concerts WHERE artist_id = 2",
        ],
    ),
    (
        "con-008", "concerts",
        "Which year had the highest total attendance?",
        "attendance is per concert; compare yearly sums",
        "SELECT year FROM concerts GROUP BY year ORDER BY SUM(attendance) DESC LIMIT 1",
        "challenging",
        [
            "SELECT year FROM concerts GROUP BY year ORDER BY SUM(attendance) DESC LIMIT 1",
            "SELECT year FROM concerts GROUP BY year "
            "ORDER BY SUM(concerts.attendance) DESC LIMIT 1",
            "SELECT year FROM concerts GROUP BY year ORDER BY COUNT(*) DESC LIMIT 1",
        ],
    ),
    (
        "con-009", "concerts",
        "How many venues hosted more than one concert?",
        "",
        "SELECT COUNT(*) FROM (SELECT venue FROM concerts GROUP BY venue HAVING COUNT(*) > 1)",
        "challenging",
        [
            "SELECT COUNT(*) FROM (SELECT venue FROM concerts GROUP BY venue HAVING COUNT(*) > 1)",
            "SELECT COUNT(*) FROM (SELECT venue FROM concerts GROUP BY venue HAVING COUNT(concert_id) > 1)",
            "SELECT COUNT(DISTINCT venue) FROM concerts",
        ],
    ),
    (
        "con-010", "concerts",
        "How many artists are listed?",
        "",
        "SELECT COUNT(*) FROM artists",
        "simple",
        ["SELECT COUNT(*) FROM artists"],
    ),
    # repeat questions seen earlier in the log, paired with misfired
    # candidates: only accumulated knowledge can answer these correctly
    (
        "tox-011", "toxicology",
        "Count the molecules that carry the carcinogenic label.",
        "",
        "SELECT COUNT(*) FROM molecule WHERE label = '+'",
        "simple",
        [
            "SELECT COUNT(*) FROM bond",
            "SELECT COUNT(*) FROM bond WHERE bond_type = '-'",
        ],
    ),
    (
        "ret-011", "retail",
        "Count the customers whose city is Lyon.",
        "",
        "SELECT COUNT(*) FROM customers WHERE city = 'Lyon'",
        "simple",
        [
            "SELECT COUNT(*) FROM order_items",
            "SELECT COUNT(*) FROM order_items WHERE quantity > 1",
        ],
    ),
    (
        "con-011", "concerts",
        "Count the concerts held during year 2023.",
        "",
        "SELECT COUNT(*) FROM concerts WHERE year = 2023",
        "simple",
        [
            "SELECT COUNT(*) FROM artists WHERE country = 'Italy'",
            "SELECT COUNT(*) FROM artists",
        ],
    ),
]


def fixture_entries() -> list[tuple[TranslationTask, CandidateSet]]:
    entries = []
    for index, (task_id, db_id, question, evidence, gold, difficulty, cand_sqls) in enumerate(_TASKS):
        task = TranslationTask(
            task_id=task_id,
            db_id=db_id,
            question=question,
            evidence=evidence,
            gold_sql=gold,
            sequence_index=index,
            difficulty=difficulty,
        )
        cands = CandidateSet(
            task_id=task_id,
            candidates=tuple(Candidate(sql=sql, generator_tag=_GENERATOR_TAG) for sql in cand_sqls),
        )
        entries.append((task, cands))
    return entries


def cmd_make_fixtures(out_dir, with_cassettes: bool = True, seed: int = 0) -> dict:
    """Build the fixture corpus; returns a manifest of the written paths.

    Databases and the task log always get written; when ``with_cassettes`` is
    set, one deterministic offline pass per history mode is recorded into a
    shared cassette so later runs can replay without any model at all.
    """
    out = Path(out_dir)
    try:
        (out / "dbs").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create fixture directory {out}: {exc}") from exc

    dbs = {}
    for db_id, builder in (
        ("toxicology", _build_toxicology),
        ("retail", _build_retail),
        ("concerts", _build_concerts),
    ):
        path = out / "dbs" / f"{db_id}.sqlite"
        if path.exists():
            path.unlink()
        builder(path)
        dbs[db_id] = str(path)

    sidecar = out / "dbs" / "toxicology.columns.json"
    sidecar.write_text(json.dumps(_TOXICOLOGY_DESCRIPTIONS, indent=2) + "\n", encoding="utf-8")

    # seeded-by-construction invariant: the canonical sodium count is 17
    result = execute(dbs["toxicology"], SODIUM_COUNT_SQL, ExecLimits())
    if getattr(result, "rows", None) != ((SODIUM_COUNT_EXPECTED,),):
        raise AssertionError(f"toxicology fixture is mis-seeded: {result}")

    log_path = out / "log.jsonl"
    if log_path.exists():
        log_path.unlink()
    for task, cands in fixture_entries():
        append_log(log_path, task, cands)

    tasks_path = out / "tasks.jsonl"
    with tasks_path.open("w", encoding="utf-8") as fh:
        for task, _ in fixture_entries()[:5]:
            fh.write(
                json.dumps(
                    {
                        "task_id": f"ingest-{task.task_id}",
                        "db_id": task.db_id,
                        "question": task.question,
                        "evidence": task.evidence,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )

    manifest = {
        "dbs": dbs,
        "db_dir": str(out / "dbs"),
        "log": str(log_path),
        "tasks": str(tasks_path),
        "cassette": None,
    }
    if with_cassettes:
        manifest["cassette"] = str(record_fixture_cassette(out, seed=seed))
    return manifest


def record_fixture_cassette(out_dir, seed: int = 0) -> Path:
    """Record the mock traffic of one run per history mode into one cassette."""
    from .pipeline import RunConfig, run

    out = Path(out_dir)
    cassette = out / "cassettes" / "fixture.jsonl"
    if cassette.exists():
        cassette.unlink()
    cassette.parent.mkdir(parents=True, exist_ok=True)
    for mode in ("self_only", "accumulated", "all"):
        config = RunConfig(
            log_path=str(out / "log.jsonl"),
            db_dir=str(out / "dbs"),
            run_dir=str(out / ".cassette-build" / mode),
            history=mode,
            gateway_mode="mock",
            cassette_path=str(cassette),
            seed=seed,
        )
        run(config)
    return cassette
