import socket
import threading
import time

import httpx
import pytest
import uvicorn
from click.testing import CliRunner

from orange.cli import main
from orange.service import ServiceSettings, create_app


def _free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture()
def live_server(corpus, tmp_path):
    settings = ServiceSettings(
        db_dir=corpus["db_dir"],
        memory_dir=str(tmp_path / "memory"),
        run_dir=str(tmp_path / "service"),
        gateway_mode="mock",
    )
    port = _free_port()
    config = uvicorn.Config(create_app(settings), host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{port}"
    for _ in range(100):
        try:
            if httpx.get(base + "/health", timeout=1.0).status_code == 200:
                break
        except httpx.HTTPError:
            time.sleep(0.05)
    else:
        raise RuntimeError("service did not come up")
    yield base
    server.should_exit = True
    thread.join(timeout=5)


def test_translate_through_running_service(live_server):
    runner = CliRunner()
    result = runner.invoke(
        main,
        [
            "translate",
            "--server", live_server,
            "--db", "toxicology",
            "--question", "How many molecules are there?",
        ],
    )
    assert result.exit_code == 0, result.output
    assert "SELECT" in result.output.upper()


def test_client_reports_service_errors(live_server):
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["translate", "--server", live_server, "--db", "ghost", "--question", "?"],
    )
    assert result.exit_code == 2
