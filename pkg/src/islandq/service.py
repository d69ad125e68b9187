"""HTTP service exposing the pipeline stages.

Every endpoint is stateless: resource files are loaded per request, so one
server can answer for any grammar/KB combination the client points it at.
Domain and file errors come back as 400 with a single error field.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .errors import IslandqError
from .parser import ParseConfig
from .pipeline import load_resources, run_chunk, run_eval, run_parse, run_query


class ParseRequest(BaseModel):
    grammar: str
    text: str
    threshold: float = Field(default=0.0, ge=0.0, le=1.0)
    max_gap: int = Field(default=3, ge=0)
    show_chart: bool = False


class ChunkRequest(BaseModel):
    grammar: str
    text: str
    threshold: float = Field(default=0.0, ge=0.0, le=1.0)
    max_gap: int = Field(default=3, ge=0)
    top_k: int = Field(default=5, ge=1)
    show_lattice: bool = False
    wide_segments: bool = False


class QueryRequest(BaseModel):
    # schema_file, not schema: the latter name is reserved by pydantic.
    grammar: str
    schema_file: str
    kb: str
    table: str
    text: str
    context: str | None = None
    threshold: float = Field(default=0.0, ge=0.0, le=1.0)
    max_gap: int = Field(default=3, ge=0)
    top_k: int = Field(default=5, ge=1)
    wide_segments: bool = False


class EvalRequest(BaseModel):
    grammar: str
    schema_file: str
    kb: str
    table: str
    gold: str
    context: str | None = None
    threshold: float = Field(default=0.0, ge=0.0, le=1.0)
    max_gap: int = Field(default=3, ge=0)
    top_k: int = Field(default=5, ge=1)
    wide_segments: bool = False
    score_defaults: bool = False


class EdgeOut(BaseModel):
    id: int
    cat: str
    start: int
    end: int
    covered: list[int]
    weight: float
    rule: int
    children: list[int]


class ChartOut(BaseModel):
    input: list[str]
    edges: list[EdgeOut]


class ParseResponse(BaseModel):
    input: list[str]
    analyses: list[EdgeOut]
    chart: ChartOut | None = None


class MarkerOut(BaseModel):
    marker: str
    role: str
    start: int
    end: int
    weight: float


class SegmentOut(BaseModel):
    kind: str
    start: int
    end: int


class ChunkOut(BaseModel):
    cat: str
    start: int
    end: int
    text: str
    weight: float


class HypothesisOut(BaseModel):
    weight: float
    chunks: list[ChunkOut]


class ArcOut(BaseModel):
    kind: str
    start: int
    end: int
    label: str | None = None


class LatticeOut(BaseModel):
    nodes: int
    arcs: list[ArcOut]


class ChunkResponse(BaseModel):
    input: list[str]
    markers: list[MarkerOut]
    segments: list[SegmentOut]
    chunks: list[ChunkOut]
    hypotheses: list[HypothesisOut]
    lattice: LatticeOut | None = None


class SlotOut(BaseModel):
    value: str
    confidence: float
    origin: str


class FrameOut(BaseModel):
    slots: dict[str, SlotOut]
    weight: float
    consistent: bool
    violations: list[str]


class PredicateOut(BaseModel):
    attribute: str
    value: str


class QueryOut(BaseModel):
    predicates: list[PredicateOut]
    rendered: str


class QueryResponse(BaseModel):
    input: list[str]
    frames: list[FrameOut]
    best: FrameOut | None = None
    query: QueryOut | None = None
    records: list[dict[str, str]] | None = None


class MetricsOut(BaseModel):
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float


class WorstOut(BaseModel):
    utterance: str
    errors: int


class EvalResponse(BaseModel):
    per_slot: dict[str, MetricsOut]
    micro: MetricsOut
    examples: int
    worst: list[WorstOut]


def create_app() -> FastAPI:
    app = FastAPI(title="islandq", version="0.1.0")

    @app.exception_handler(IslandqError)
    async def domain_error(request: Request, exc: IslandqError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(OSError)
    async def file_error(request: Request, exc: OSError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/parse", response_model=ParseResponse, response_model_exclude_none=True)
    def parse_endpoint(req: ParseRequest):
        res = load_resources(req.grammar)
        cfg = ParseConfig(max_gap=req.max_gap, threshold=req.threshold)
        return run_parse(res, req.text, cfg, show_chart=req.show_chart)

    @app.post("/chunk", response_model=ChunkResponse, response_model_exclude_none=True)
    def chunk_endpoint(req: ChunkRequest):
        res = load_resources(req.grammar)
        cfg = ParseConfig(max_gap=req.max_gap, threshold=req.threshold)
        return run_chunk(
            res,
            req.text,
            cfg,
            top_k=req.top_k,
            show_lattice=req.show_lattice,
            wide_segments=req.wide_segments,
        )

    @app.post("/query", response_model=QueryResponse, response_model_exclude_none=True)
    def query_endpoint(req: QueryRequest):
        res = load_resources(
            req.grammar,
            schema_path=req.schema_file,
            kb_path=req.kb,
            table_path=req.table,
            context=req.context,
        )
        cfg = ParseConfig(max_gap=req.max_gap, threshold=req.threshold)
        return run_query(res, req.text, cfg, top_k=req.top_k, wide_segments=req.wide_segments)

    @app.post("/eval", response_model=EvalResponse)
    def eval_endpoint(req: EvalRequest):
        res = load_resources(
            req.grammar,
            schema_path=req.schema_file,
            kb_path=req.kb,
            table_path=req.table,
            context=req.context,
        )
        cfg = ParseConfig(max_gap=req.max_gap, threshold=req.threshold)
        gold_text = Path(req.gold).read_text(encoding="utf-8")
        return run_eval(
            res,
            gold_text,
            cfg,
            top_k=req.top_k,
            wide_segments=req.wide_segments,
            score_defaults=req.score_defaults,
        )

    return app
