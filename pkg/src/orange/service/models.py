"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class CatalogItemModel(BaseModel):
    id: str
    kind: str
    column_type: str = ""
    description: str = ""


class CatalogResponse(BaseModel):
    db_id: str
    items: list[CatalogItemModel]
    foreign_keys: list[tuple[str, str]]


class TranslateRequest(BaseModel):
    db_id: str
    question: str
    evidence: str = ""
    shots: int | None = Field(default=None, ge=0)
    paths: int | None = Field(default=None, ge=1)
    schema_linking: bool = True


class TranslateResponse(BaseModel):
    sql: str
    paths: list[str]
    demos_used: int
    linked_items: list[str] | None = None


class CandidateModel(BaseModel):
    sql: str
    generator_tag: str = ""


class ProcessTaskRequest(BaseModel):
    task_id: str
    db_id: str
    question: str
    evidence: str = ""
    candidates: list[CandidateModel] = Field(min_length=1)
    sequence_index: int | None = Field(default=None, ge=0)


class ProcessTaskResponse(BaseModel):
    task_id: str
    predicted_sql: str
    new_units: int
    snapshot_size: int


class MemoryUnitModel(BaseModel):
    unit_id: str
    question: str
    sql: str
    probability: float
    exec_preview: str
    task_id: str


class MemoryResponse(BaseModel):
    db_id: str
    unit_count: int
    dim: int
    embed_model: str
    hash_alg: str
    tau: float
    units: list[MemoryUnitModel] | None = None


class ExecuteRequest(BaseModel):
    db_id: str
    sql: str
    max_rows: int = Field(default=100, ge=1, le=10_000)


class ExecuteResponse(BaseModel):
    ok: bool
    columns: list[str] | None = None
    rows: list[list] | None = None
    truncated: bool = False
    error_class: str | None = None
    message: str | None = None
