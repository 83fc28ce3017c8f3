"""HTTP service exposing the translation pipeline for long-running use.

One process serves many databases: clients either ask for a plain
translation against the accumulated knowledge base, or post a task together
with its candidate SQL so the knowledge stages run online and the memory
grows. Memories are written through the same per-database single-writer
discipline the batch pipeline uses.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..catalog import CatalogError, load_catalog
from ..coder import CoderConfig, TranslateError, translate
from ..execution import ExecError, ExecLimits, execute
from ..gateway import CassetteMiss, GatewayConfig, GatewayError, ModelGateway
from ..logstore import Candidate, CandidateSet, TranslationTask
from ..memory import Memory
from ..pipeline import PipelineState, RunConfig, TaskOutcome, build_knowledge
from .models import (
    CatalogItemModel,
    CatalogResponse,
    ExecuteRequest,
    ExecuteResponse,
    HealthResponse,
    MemoryResponse,
    MemoryUnitModel,
    ProcessTaskRequest,
    ProcessTaskResponse,
    TranslateRequest,
    TranslateResponse,
)


@dataclass
class ServiceSettings:
    db_dir: str
    memory_dir: str
    run_dir: str = "runs/service"
    gateway_mode: str = "mock"
    cassette_path: str | None = None
    seed: int = 0
    tau: float = 0.3
    shots: int = 30
    paths: int = 5
    temperature: float = 0.8
    timeout: float = 30.0
    max_rows: int = 10_000
    embed_dim: int = 64


class ServiceState:
    """Catalog/memory caches plus one gateway, shared across requests."""

    def __init__(self, settings: ServiceSettings):
        self.settings = settings
        self.gateway = ModelGateway(
            GatewayConfig(
                mode=settings.gateway_mode,
                cassette_path=settings.cassette_path,
                seed=settings.seed,
                embed_dim=settings.embed_dim,
                transcript_dir=str(Path(settings.run_dir) / "transcripts"),
            )
        )
        self._catalogs = {}
        self._memories: dict[str, Memory] = {}
        self._memory_locks: dict[str, threading.Lock] = {}
        self._lock = threading.Lock()

    def db_path(self, db_id: str) -> Path:
        path = Path(self.settings.db_dir) / f"{db_id}.sqlite"
        if not path.is_file():
            raise HTTPException(status_code=404, detail=f"unknown database {db_id!r}")
        return path

    def catalog(self, db_id: str):
        if db_id not in self._catalogs:
            sidecar = Path(self.settings.db_dir) / f"{db_id}.columns.json"
            try:
                self._catalogs[db_id] = load_catalog(
                    self.db_path(db_id), sidecar if sidecar.is_file() else None
                )
            except CatalogError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
        return self._catalogs[db_id]

    def memory(self, db_id: str) -> Memory:
        with self._lock:
            if db_id not in self._memories:
                path = Path(self.settings.memory_dir) / f"{db_id}.jsonl"
                if path.is_file():
                    self._memories[db_id] = Memory.load(path)
                else:
                    self._memories[db_id] = Memory.create(
                        db_id,
                        self.gateway.config.embed_model,
                        self.settings.embed_dim,
                        self.settings.tau,
                        path=path,
                    )
                self._memory_locks[db_id] = threading.Lock()
            return self._memories[db_id]

    def memory_lock(self, db_id: str) -> threading.Lock:
        self.memory(db_id)
        return self._memory_locks[db_id]

    def limits(self) -> ExecLimits:
        return ExecLimits(timeout=self.settings.timeout, max_rows=self.settings.max_rows)

    def coder_config(self, shots=None, paths=None, schema_linking=True) -> CoderConfig:
        return CoderConfig(
            shots=self.settings.shots if shots is None else shots,
            paths=self.settings.paths if paths is None else paths,
            sampling_temperature=self.settings.temperature,
            schema_linking=schema_linking,
        )

    def pipeline_state(self) -> PipelineState:
        """Adapter so the batch-pipeline stages run inside the service."""
        config = RunConfig(
            log_path="", db_dir=self.settings.db_dir, run_dir=self.settings.run_dir,
            memory_dir=self.settings.memory_dir, tau=self.settings.tau,
            shots=self.settings.shots, paths=self.settings.paths,
            temperature=self.settings.temperature, timeout=self.settings.timeout,
            max_rows=self.settings.max_rows, gateway_mode=self.settings.gateway_mode,
            seed=self.settings.seed, embed_dim=self.settings.embed_dim,
        )
        return PipelineState(
            config,
            gateway=self.gateway,
            catalogs=self._catalogs,
            memories=self._memories,
            validate=False,
        )


def create_app(settings: ServiceSettings) -> FastAPI:
    app = FastAPI(title="orange", version=__version__)
    state = ServiceState(settings)
    app.state.orange = state

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.get("/databases", response_model=list[str])
    def databases() -> list[str]:
        return sorted(p.stem for p in Path(settings.db_dir).glob("*.sqlite"))

    @app.get("/catalog/{db_id}", response_model=CatalogResponse)
    def catalog(db_id: str) -> CatalogResponse:
        cat = state.catalog(db_id)
        return CatalogResponse(
            db_id=cat.db_id,
            items=[
                CatalogItemModel(
                    id=i.id, kind=i.kind, column_type=i.column_type, description=i.description
                )
                for i in cat.items
            ],
            foreign_keys=list(cat.foreign_keys),
        )

    @app.get("/memory/{db_id}", response_model=MemoryResponse)
    def memory_info(db_id: str, include_units: bool = False) -> MemoryResponse:
        state.db_path(db_id)
        mem = state.memory(db_id)
        units = None
        if include_units:
            units = [
                MemoryUnitModel(
                    unit_id=u.unit_id,
                    question=u.question,
                    sql=u.sql,
                    probability=u.probability,
                    exec_preview=u.preview_display(),
                    task_id=u.provenance.task_id,
                )
                for u in mem.units
            ]
        return MemoryResponse(
            db_id=db_id,
            unit_count=len(mem.units),
            dim=mem.header.dim,
            embed_model=mem.header.embed_model,
            hash_alg=mem.header.hash_alg,
            tau=mem.header.tau,
            units=units,
        )

    @app.post("/translate", response_model=TranslateResponse)
    def translate_endpoint(request: TranslateRequest) -> TranslateResponse:
        db_path = state.db_path(request.db_id)
        task = TranslationTask(
            task_id="adhoc",
            db_id=request.db_id,
            question=request.question,
            evidence=request.evidence,
        )
        view = state.memory(request.db_id).snapshot("all")
        try:
            outcome = translate(
                task,
                view,
                state.catalog(request.db_id),
                state.coder_config(request.shots, request.paths, request.schema_linking),
                state.gateway,
                db_path,
                state.limits(),
            )
        except (TranslateError, GatewayError, CassetteMiss) as exc:
            raise HTTPException(status_code=502, detail=str(exc)) from exc
        return TranslateResponse(
            sql=outcome.sql,
            paths=[c.sql for c in outcome.all_paths.candidates],
            demos_used=len(outcome.demos),
            linked_items=sorted(outcome.linked_items) if outcome.linked_items is not None else None,
        )

    @app.post("/process-task", response_model=ProcessTaskResponse)
    def process_task_endpoint(request: ProcessTaskRequest) -> ProcessTaskResponse:
        state.db_path(request.db_id)
        mem = state.memory(request.db_id)
        with state.memory_lock(request.db_id):
            sequence_index = request.sequence_index
            if sequence_index is None:
                sequence_index = 1 + max(
                    (u.provenance.task_sequence_index for u in mem.units), default=-1
                )
            task = TranslationTask(
                task_id=request.task_id,
                db_id=request.db_id,
                question=request.question,
                evidence=request.evidence,
                sequence_index=sequence_index,
            )
            cands = CandidateSet(
                task_id=request.task_id,
                candidates=tuple(
                    Candidate(sql=c.sql, generator_tag=c.generator_tag)
                    for c in request.candidates
                ),
            )
            pipeline_state = state.pipeline_state()
            try:
                outcome: TaskOutcome = build_knowledge(task, cands, pipeline_state)
            except (GatewayError, CassetteMiss) as exc:
                raise HTTPException(status_code=502, detail=str(exc)) from exc
        view = mem.snapshot("accumulated", task)
        try:
            result = translate(
                task,
                view,
                state.catalog(request.db_id),
                state.coder_config(),
                state.gateway,
                state.db_path(request.db_id),
                state.limits(),
            )
            predicted = result.sql
        except (TranslateError, GatewayError, CassetteMiss) as exc:
            raise HTTPException(status_code=502, detail=str(exc)) from exc
        return ProcessTaskResponse(
            task_id=request.task_id,
            predicted_sql=predicted,
            new_units=outcome.new_units,
            snapshot_size=len(view),
        )

    @app.post("/execute", response_model=ExecuteResponse)
    def execute_endpoint(request: ExecuteRequest) -> ExecuteResponse:
        db_path = state.db_path(request.db_id)
        limits = ExecLimits(timeout=state.settings.timeout, max_rows=request.max_rows)
        result = execute(db_path, request.sql, limits)
        if isinstance(result, ExecError):
            return ExecuteResponse(ok=False, error_class=result.error_class, message=result.message)
        return ExecuteResponse(
            ok=True,
            columns=list(result.column_names),
            rows=[["0x" + v.hex() if isinstance(v, bytes) else v for v in row] for row in result.rows],
            truncated=result.truncated,
        )

    return app
