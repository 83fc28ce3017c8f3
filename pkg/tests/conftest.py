from __future__ import annotations

import sqlite3

import pytest

from orange.catalog import load_catalog
from orange.fixtures import cmd_make_fixtures
from orange.gateway import ChatResponse, GatewayConfig, ModelGateway, mock_embedding


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """The fixture databases and task log, built once per session."""
    out = tmp_path_factory.mktemp("corpus")
    return cmd_make_fixtures(out, with_cassettes=False)


@pytest.fixture(scope="session")
def tox_db(corpus):
    return corpus["dbs"]["toxicology"]


@pytest.fixture(scope="session")
def catalogs(corpus):
    return {
        db_id: load_catalog(path, f"{corpus['db_dir']}/{db_id}.columns.json")
        for db_id, path in corpus["dbs"].items()
    }


@pytest.fixture()
def mock_gateway():
    return ModelGateway(GatewayConfig(mode="mock", seed=0))


@pytest.fixture()
def tiny_db(tmp_path):
    """One-table database t(a) with three rows."""
    path = tmp_path / "tiny.sqlite"
    conn = sqlite3.connect(path)
    conn.execute("CREATE TABLE t (a INTEGER)")
    conn.executemany("INSERT INTO t VALUES (?)", [(1,), (2,), (3,)])
    conn.commit()
    conn.close()
    return path


class ScriptedGateway:
    """Duck-typed gateway whose chat responses are consumed from a queue."""

    def __init__(self, responses, embed_dim=64, seed=0):
        self.responses = list(responses)
        self.requests = []
        self.embed_dim = embed_dim
        self.seed = seed

    def chat(self, req):
        self.requests.append(req)
        if not self.responses:
            raise AssertionError("scripted gateway ran out of responses")
        return ChatResponse(content=self.responses.pop(0))

    def embed_batch(self, texts):
        return [mock_embedding(t, self.embed_dim, self.seed) for t in texts]


@pytest.fixture()
def scripted_gateway():
    return ScriptedGateway
