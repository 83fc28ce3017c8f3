"""Command-line surface: a thin client over the core package and the service.

Exit codes: 0 success, 1 configuration error, 2 run error (a partial report
is still written when possible).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .catalog import load_catalog
from .coder import CoderConfig, translate
from .execution import ExecLimits
from .experiments import cmd_ablate, cmd_sweep
from .fixtures import cmd_make_fixtures
from .gateway import GatewayConfig, ModelGateway
from .logstore import append_log, generate_candidates, load_tasks
from .memory import Memory
from .pipeline import ABLATIONS, ConfigError, RunConfig, run

_MODE = click.Choice(["live", "record", "replay", "mock"])
_HISTORY = click.Choice(["self", "self_only", "accumulated", "all"])


def _history_name(value: str) -> str:
    return "self_only" if value == "self" else value


@click.group()
@click.version_option(version=__version__, prog_name="orange")
@click.option("--db-dir", type=click.Path(), default="dbs", show_default=True, help="Directory of <db_id>.sqlite files.")
@click.option("--log", "log_path", type=click.Path(), default="log.jsonl", show_default=True, help="Translation log (JSONL).")
@click.option("--memory-dir", type=click.Path(), default=None, help="Knowledge-base directory (default: <run-dir>/memory).")
@click.option("--mode", type=_MODE, default="mock", show_default=True, help="Model gateway mode.")
@click.option("--cassette", type=click.Path(), default=None, help="Cassette file for record/replay (and mock recording).")
@click.option("--history", type=_HISTORY, default="all", show_default=True, help="Knowledge history visible to translations.")
@click.option("--tau", type=float, default=0.3, show_default=True, help="Probability filter threshold.")
@click.option("--shots", type=int, default=30, show_default=True, help="Demonstrations per prompt.")
@click.option("--paths", type=int, default=5, show_default=True, help="Generation paths for self-consistency.")
@click.option("--temperature", type=float, default=0.8, show_default=True, help="Sampling temperature.")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for the mock responder and ablations.")
@click.option("--timeout", type=float, default=30.0, show_default=True, help="Per-query execution timeout (seconds).")
@click.option("--max-rows", type=int, default=10_000, show_default=True, help="Row cap per query execution.")
@click.pass_context
def main(ctx, **options):
    """Self-evolving text-to-SQL: mine knowledge from translation logs and
    reuse it as demonstrations."""
    ctx.ensure_object(dict)
    ctx.obj.update(options)


def _run_config(obj: dict, run_dir: str, **overrides) -> RunConfig:
    config = RunConfig(
        log_path=obj["log_path"],
        db_dir=obj["db_dir"],
        run_dir=run_dir,
        memory_dir=obj["memory_dir"],
        history=_history_name(obj["history"]),
        tau=obj["tau"],
        shots=obj["shots"],
        paths=obj["paths"],
        temperature=obj["temperature"],
        timeout=obj["timeout"],
        max_rows=obj["max_rows"],
        gateway_mode=obj["mode"],
        cassette_path=obj["cassette"],
        seed=obj["seed"],
    )
    for name, value in overrides.items():
        setattr(config, name, value)
    return config


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@main.command()
@click.option("--tasks", "tasks_path", type=click.Path(exists=True), required=True, help="Bare task file (JSONL).")
@click.option("--out", "out_path", type=click.Path(), required=True, help="Log file to append to.")
@click.option("--n", type=int, default=5, show_default=True, help="Candidates per task.")
@click.pass_obj
def ingest(obj, tasks_path, out_path, n):
    """Generate zero-shot candidates for bare tasks and append them to a log."""
    gateway = ModelGateway(GatewayConfig(mode=obj["mode"], cassette_path=obj["cassette"], seed=obj["seed"]))
    try:
        tasks = load_tasks(tasks_path)
        for task in tasks:
            db_path = Path(obj["db_dir"]) / f"{task.db_id}.sqlite"
            catalog = load_catalog(db_path)
            cands = generate_candidates(task, catalog, gateway, n)
            append_log(out_path, task, cands)
            click.echo(f"{task.task_id}: {len(cands.candidates)} candidates")
    except (OSError, ValueError, ConfigError) as exc:
        _fail(str(exc), 1)


@main.command("build-kb")
@click.option("--run-dir", type=click.Path(), default="runs/build-kb", show_default=True)
@click.pass_obj
def build_kb(obj, run_dir):
    """Mine, validate, and store knowledge for every task; no translation."""
    from .pipeline import PipelineState, build_knowledge
    from .logstore import load_log

    try:
        config = _run_config(obj, run_dir)
        config.validate()
        state = PipelineState(config)
        total = 0
        for task, cands in load_log(config.log_path):
            outcome = build_knowledge(task, cands, state)
            total += outcome.new_units
            click.echo(f"{task.task_id}: +{outcome.new_units} units")
        click.echo(f"inserted {total} units into {state.memory_dir}")
    except ConfigError as exc:
        _fail(str(exc), 1)
    except Exception as exc:  # noqa: BLE001
        _fail(f"run error: {exc}", 2)


@main.command("translate")
@click.option("--db", "db_id", required=True, help="Target database id.")
@click.option("--question", required=True)
@click.option("--evidence", default="")
@click.option("--server", default=None, help="Base URL of a running service; translate remotely instead of in-process.")
@click.option("--run-dir", type=click.Path(), default="runs/translate", show_default=True)
@click.option("--no-schema-linking", is_flag=True, help="Always prompt with the full schema.")
@click.pass_obj
def translate_command(obj, db_id, question, evidence, server, run_dir, no_schema_linking):
    """Translate one question using the accumulated knowledge base."""
    if server:
        import httpx

        try:
            reply = httpx.post(
                server.rstrip("/") + "/translate",
                json={"db_id": db_id, "question": question, "evidence": evidence},
                timeout=300.0,
            )
            reply.raise_for_status()
        except httpx.HTTPError as exc:
            _fail(f"service request failed: {exc}", 2)
        click.echo(reply.json()["sql"])
        return
    from .logstore import TranslationTask

    try:
        db_path = Path(obj["db_dir"]) / f"{db_id}.sqlite"
        sidecar = Path(obj["db_dir"]) / f"{db_id}.columns.json"
        catalog = load_catalog(db_path, sidecar if sidecar.is_file() else None)
        memory_dir = Path(obj["memory_dir"] or Path(run_dir) / "memory")
        memory_path = memory_dir / f"{db_id}.jsonl"
        gateway = ModelGateway(
            GatewayConfig(
                mode=obj["mode"],
                cassette_path=obj["cassette"],
                seed=obj["seed"],
                transcript_dir=str(Path(run_dir) / "transcripts"),
            )
        )
        memory = Memory.load(memory_path) if memory_path.is_file() else Memory.create(
            db_id, gateway.config.embed_model, gateway.config.embed_dim, obj["tau"]
        )
        task = TranslationTask(task_id="adhoc", db_id=db_id, question=question, evidence=evidence)
        outcome = translate(
            task,
            memory.snapshot("all"),
            catalog,
            CoderConfig(
                shots=obj["shots"],
                paths=obj["paths"],
                sampling_temperature=obj["temperature"],
                schema_linking=not no_schema_linking,
            ),
            gateway,
            db_path,
            ExecLimits(timeout=obj["timeout"], max_rows=obj["max_rows"]),
        )
        click.echo(outcome.sql)
    except (ConfigError, OSError) as exc:
        _fail(str(exc), 1)
    except Exception as exc:  # noqa: BLE001
        _fail(f"run error: {exc}", 2)


@main.command()
@click.option("--run-dir", type=click.Path(), default="runs/evaluate", show_default=True)
@click.pass_obj
def evaluate(obj, run_dir):
    """Full pipeline over the log plus execution-accuracy scoring."""
    try:
        report = run(_run_config(obj, run_dir))
    except ConfigError as exc:
        _fail(str(exc), 1)
    except Exception as exc:  # noqa: BLE001
        _fail(f"run error: {exc} (partial report may exist in {run_dir})", 2)
    agg = report.aggregate
    ex = agg["ex"]
    click.echo(f"EX: {ex:.4f} over {agg['n_scored']} tasks" if ex is not None else "EX: n/a")
    if agg["n_invalid_gold"]:
        click.echo(f"invalid-gold tasks excluded: {agg['n_invalid_gold']}")
    for tag, value in agg["ex_by_difficulty"].items():
        click.echo(f"  {tag}: {value:.4f}")
    click.echo(f"report: {Path(run_dir) / 'report.json'}")


@main.command()
@click.option("--param", type=click.Choice(["shots", "tau"]), required=True)
@click.option("--values", required=True, help="Comma-separated values, e.g. '0,0.3,1.0'.")
@click.option("--run-dir", type=click.Path(), default="runs/sweep", show_default=True)
@click.pass_obj
def sweep(obj, param, values, run_dir):
    """One full run per parameter value; prints a plot-ready table."""
    try:
        parsed = [float(v) for v in values.split(",") if v.strip() != ""]
        rows = cmd_sweep(param, parsed, _run_config(obj, run_dir))
    except (ConfigError, ValueError) as exc:
        _fail(str(exc), 1)
    except Exception as exc:  # noqa: BLE001
        _fail(f"run error: {exc}", 2)
    click.echo(f"{param}\tEX\tunits_retained")
    for row in rows:
        ex = "n/a" if row.ex is None else f"{row.ex:.4f}"
        click.echo(f"{row.value:g}\t{ex}\t{row.units_retained}")


@main.command()
@click.option("--which", type=click.Choice(list(ABLATIONS)), required=True)
@click.option("--run-dir", type=click.Path(), default="runs/ablate", show_default=True)
@click.pass_obj
def ablate(obj, which, run_dir):
    """Re-run with one mechanism removed."""
    try:
        report = cmd_ablate(which, _run_config(obj, run_dir))
    except ConfigError as exc:
        _fail(str(exc), 1)
    except Exception as exc:  # noqa: BLE001
        _fail(f"run error: {exc}", 2)
    ex = report.aggregate["ex"]
    click.echo(f"ablate={which} EX: {ex:.4f}" if ex is not None else f"ablate={which} EX: n/a")


@main.command("make-fixtures")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--no-cassettes", is_flag=True, help="Skip recording replay cassettes.")
@click.pass_obj
def make_fixtures(obj, out_dir, no_cassettes):
    """Build the desk-scale fixture corpus (databases, log, cassettes)."""
    try:
        manifest = cmd_make_fixtures(out_dir, with_cassettes=not no_cassettes, seed=obj["seed"])
    except OSError as exc:
        _fail(str(exc), 1)
    click.echo(json.dumps(manifest, indent=2))


@main.command()
@click.option("--run-dir", type=click.Path(exists=True), required=True, help="A finished run directory to reproduce.")
@click.option("--cassette", "cassette_override", type=click.Path(exists=True), default=None)
@click.pass_obj
def replay(obj, run_dir, cassette_override):
    """Re-run from recorded cassettes and verify byte-identical outputs."""
    import filecmp
    import tempfile

    cassette = cassette_override or obj["cassette"]
    if not cassette:
        _fail("replay needs a cassette (--cassette)", 1)
    source = Path(run_dir)
    with tempfile.TemporaryDirectory() as tmp:
        try:
            config = _run_config(obj, str(Path(tmp) / "rerun"), gateway_mode="replay", cassette_path=cassette)
            run(config)
        except ConfigError as exc:
            _fail(str(exc), 1)
        except Exception as exc:  # noqa: BLE001
            _fail(f"run error: {exc}", 2)
        mismatches = []
        for name in ("predictions.jsonl", "report.json"):
            if not filecmp.cmp(source / name, Path(tmp) / "rerun" / name, shallow=False):
                mismatches.append(name)
        for mem in sorted((source / "memory").glob("*.jsonl")):
            twin = Path(tmp) / "rerun" / "memory" / mem.name
            if not twin.is_file() or not filecmp.cmp(mem, twin, shallow=False):
                mismatches.append(f"memory/{mem.name}")
        if mismatches:
            _fail(f"replay diverged on: {', '.join(mismatches)}", 2)
    click.echo("replay reproduced the run byte-for-byte")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--run-dir", type=click.Path(), default="runs/service", show_default=True)
@click.pass_obj
def serve(obj, host, port, run_dir):
    """Start the HTTP service wrapping the translation pipeline."""
    import uvicorn

    from .service import ServiceSettings, create_app

    settings = ServiceSettings(
        db_dir=obj["db_dir"],
        memory_dir=obj["memory_dir"] or str(Path(run_dir) / "memory"),
        run_dir=run_dir,
        gateway_mode=obj["mode"],
        cassette_path=obj["cassette"],
        seed=obj["seed"],
        tau=obj["tau"],
        shots=obj["shots"],
        paths=obj["paths"],
        temperature=obj["temperature"],
        timeout=obj["timeout"],
        max_rows=obj["max_rows"],
    )
    uvicorn.run(create_app(settings), host=host, port=port)


if __name__ == "__main__":
    main()
