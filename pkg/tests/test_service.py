import pytest
from fastapi.testclient import TestClient

from orange.service import ServiceSettings, create_app


@pytest.fixture()
def client(corpus, tmp_path):
    settings = ServiceSettings(
        db_dir=corpus["db_dir"],
        memory_dir=str(tmp_path / "memory"),
        run_dir=str(tmp_path / "service"),
        gateway_mode="mock",
        seed=0,
    )
    return TestClient(create_app(settings))


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"


def test_databases_listed(client):
    assert client.get("/databases").json() == ["concerts", "retail", "toxicology"]


def test_catalog_endpoint(client):
    body = client.get("/catalog/toxicology").json()
    ids = [item["id"] for item in body["items"]]
    assert "atom" in ids and "molecule.label" in ids
    assert ["atom.molecule_id", "molecule.molecule_id"] in body["foreign_keys"]


def test_catalog_unknown_db(client):
    assert client.get("/catalog/nope").status_code == 404


def test_execute_endpoint(client):
    body = client.post(
        "/execute", json={"db_id": "toxicology", "sql": "SELECT COUNT(*) FROM molecule"}
    ).json()
    assert body["ok"] and body["rows"] == [[10]]


def test_execute_endpoint_error(client):
    body = client.post("/execute", json={"db_id": "toxicology", "sql": "SELEC 1"}).json()
    assert not body["ok"]
    assert body["error_class"] == "syntax"


def test_execute_rejects_writes(client):
    body = client.post(
        "/execute", json={"db_id": "toxicology", "sql": "DELETE FROM molecule"}
    ).json()
    assert not body["ok"]
    assert body["error_class"] == "runtime"


def test_process_task_then_translate_and_memory(client):
    reply = client.post(
        "/process-task",
        json={
            "task_id": "svc-1",
            "db_id": "toxicology",
            "question": "How many molecules are in the database?",
            "candidates": [
                {"sql": "SELECT COUNT(*) FROM molecule"},
                {"sql": "SELECT COUNT(molecule_id) FROM molecule"},
                {"sql": "SELECT COUNT(*) FROM atom"},
            ],
        },
    )
    assert reply.status_code == 200
    body = reply.json()
    assert body["new_units"] >= 1
    assert body["predicted_sql"]

    memory = client.get("/memory/toxicology", params={"include_units": True}).json()
    assert memory["unit_count"] == body["new_units"]
    assert all(unit["task_id"] == "svc-1" for unit in memory["units"])

    translated = client.post(
        "/translate",
        json={"db_id": "toxicology", "question": "How many molecules are in the database?"},
    ).json()
    assert translated["sql"] == "SELECT COUNT(*) FROM molecule"
    assert translated["demos_used"] >= 1


def test_translate_unknown_db(client):
    reply = client.post("/translate", json={"db_id": "ghost", "question": "?"})
    assert reply.status_code == 404


def test_process_task_needs_candidates(client):
    reply = client.post(
        "/process-task",
        json={"task_id": "x", "db_id": "toxicology", "question": "?", "candidates": []},
    )
    assert reply.status_code == 422


def test_translate_schema_linking_toggle(client):
    # seed one unit so linking has something to work from
    client.post(
        "/process-task",
        json={
            "task_id": "svc-link",
            "db_id": "retail",
            "question": "How many customers are there?",
            "candidates": [{"sql": "SELECT COUNT(*) FROM customers"}],
        },
    )
    linked = client.post(
        "/translate", json={"db_id": "retail", "question": "How many customers are there?"}
    ).json()
    assert linked["linked_items"] is not None
    full = client.post(
        "/translate",
        json={
            "db_id": "retail",
            "question": "How many customers are there?",
            "schema_linking": False,
        },
    ).json()
    assert full["linked_items"] is None
