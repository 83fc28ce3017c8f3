"""Self-evolving text-to-SQL: mine verified knowledge from translation logs,
store it per database, and reuse it as in-context demonstrations."""

__version__ = "0.1.0"

from .catalog import CatalogError, SchemaCatalog, SchemaItem, SubsetError, load_catalog, render_schema
from .execution import (
    ExecError,
    ExecLimits,
    ResultFingerprint,
    ResultTable,
    execute,
    fingerprint,
    results_equal,
)
from .gateway import CassetteMiss, ChatMessage, ChatRequest, ChatResponse, GatewayError, ModelGateway
from .logstore import (
    Candidate,
    CandidateSet,
    ClusterPartition,
    LogFormatError,
    TranslationTask,
    cluster_candidates,
    generate_candidates,
    load_log,
)
from .memory import DemoSet, KnowledgeUnit, Memory, MemoryStoreError, Provenance, top_k
from .parsing import ParseError, ParseFormatError, ParseTrace, decompose, dedup, parse_model_plan
from .validation import ValidatorConfig, candidate_probability, score_and_filter
from .coder import CoderConfig, NoValidResult, TranslateError, build_prompt, link_schema, translate, vote
from .sqltext import ExtractError, extract_schema_items
from .pipeline import RunConfig, RunReport, process_task, run
from .evaluation import execution_accuracy
