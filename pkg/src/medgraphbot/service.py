"""HTTP service: chat, patient profiles, predictions and graph queries."""

import logging
from contextlib import asynccontextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, List, Optional

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import __version__
from .config import ServiceConfig
from .dialogue import DialogueEngine
from .errors import (
    GraphParseError,
    GraphVersionError,
    StoreUnavailableError,
    UnknownDrugError,
    UnknownNodeError,
)
from .kg import KnowledgeGraph, import_graph
from .ner import EntityCategory
from .patient import (
    PatientStore,
    predict_next_symptoms,
    profile_to_dict,
    trajectory_of,
    utcnow,
)

logger = logging.getLogger(__name__)


class ChatRequest(BaseModel):
    patient_id: str = Field(min_length=1)
    message: str
    client_timestamp: Optional[datetime] = None


class RecordedItem(BaseModel):
    kind: str
    lemma_key: str


class ChatReply(BaseModel):
    patient_id: str
    reply: str
    intent: str
    confidence: float
    recorded: List[RecordedItem] = []
    session_id: int
    follow_up_pending: bool = False
    guideline_link: Optional[str] = None
    evidence_sentences: List[str] = []


class NeighborItem(BaseModel):
    lemma_key: str
    probability: float
    count: int


class NeighborsReply(BaseModel):
    node: str
    k: int
    neighbors: List[NeighborItem]


class EvidenceItem(BaseModel):
    doc_id: str
    sentence_index: int


class AttributeValueItem(BaseModel):
    value: str
    count: int
    evidence: List[EvidenceItem]


class AttributeReply(BaseModel):
    drug: str
    category: str
    values: List[AttributeValueItem]


class PredictionItem(BaseModel):
    lemma_key: str
    score: float
    source: str


class PredictionsReply(BaseModel):
    patient_id: str
    k: int
    predictions: List[PredictionItem]
    alert: bool


class ReloadRequest(BaseModel):
    graph_path: Optional[str] = None


class GraphCounts(BaseModel):
    nodes: int
    cooccurrence_edges: int
    semantic_edges: int
    attribute_edges: int
    total_sentences: int


def _graph_counts(graph: KnowledgeGraph) -> GraphCounts:
    return GraphCounts(
        nodes=len(graph.nodes),
        cooccurrence_edges=len(graph._cooc),
        semantic_edges=len(graph._semantic),
        attribute_edges=len(graph._attributes),
        total_sentences=graph.total_sentences,
    )


def _utc(ts: datetime) -> datetime:
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def create_app(
    config: Optional[ServiceConfig] = None,
    store: Optional[PatientStore] = None,
    graph: Optional[KnowledgeGraph] = None,
    engine: Optional[DialogueEngine] = None,
    clock: Optional[Callable[[], datetime]] = None,
) -> FastAPI:
    """Build the application; store/graph/engine/clock are injectable."""
    config = config or ServiceConfig()
    clock = clock or utcnow

    if graph is None:
        if config.graph_path and Path(config.graph_path).is_file():
            graph = import_graph(config.graph_path)
        else:
            if config.graph_path:
                logger.warning(
                    "graph file %s not found; starting empty", config.graph_path
                )
            graph = KnowledgeGraph()
    if store is None:
        store = PatientStore(
            data_dir=config.data_dir,
            session_gap=config.session_gap_seconds,
            clock=clock,
        )
    if engine is None:
        engine = DialogueEngine(
            guideline_url=config.guideline_url,
            intent_threshold=config.intent_threshold,
            session_gap=config.session_gap_seconds,
        )

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        if not app.state.store.closed:
            app.state.store.close()

    app = FastAPI(title="medgraphbot", version=__version__, lifespan=lifespan)
    app.state.config = config
    app.state.store = store
    app.state.graph = graph
    app.state.engine = engine
    app.state.clock = clock

    app.add_middleware(
        CORSMiddleware,
        allow_origins=config.cors_origins,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.exception_handler(StoreUnavailableError)
    async def store_unavailable(request: Request, exc: StoreUnavailableError):
        return JSONResponse(status_code=503, content={"detail": str(exc)})

    def _open_store() -> PatientStore:
        s: PatientStore = app.state.store
        if s is None or s.closed:
            raise StoreUnavailableError("patient store is unavailable")
        return s

    @app.get("/api/health")
    async def health():
        return {
            "status": "ok",
            "version": __version__,
            "graph_nodes": len(app.state.graph.nodes),
        }

    @app.post("/api/chat", response_model=ChatReply)
    async def chat(body: ChatRequest) -> ChatReply:
        s = _open_store()
        if not body.message.strip():
            raise HTTPException(status_code=422, detail="message must not be empty")
        ts = _utc(body.client_timestamp) if body.client_timestamp else app.state.clock()
        engine_: DialogueEngine = app.state.engine
        profile_before = s.get(body.patient_id)
        follow_up = engine_.follow_up_question(profile_before, now=ts)
        parsed = engine_.parse_message(body.message)
        response = engine_.respond(
            parsed, body.patient_id, s, app.state.graph, timestamp=ts
        )
        profile = s.touch(body.patient_id, ts)
        reply_text = response.text
        if follow_up:
            reply_text = f"{reply_text} {follow_up}"
        return ChatReply(
            patient_id=body.patient_id,
            reply=reply_text,
            intent=parsed.intent.tag.value,
            confidence=round(parsed.intent.confidence, 6),
            recorded=[
                RecordedItem(kind=kind.value, lemma_key=key)
                for kind, key in response.recorded
            ],
            session_id=profile.sessions[-1].session_id,
            follow_up_pending=follow_up is not None,
            guideline_link=response.guideline_link,
            evidence_sentences=list(response.evidence_sentences),
        )

    @app.get("/api/patients/{patient_id}")
    async def get_patient(patient_id: str):
        s = _open_store()
        profile = s.get(patient_id)
        if profile is None:
            raise HTTPException(
                status_code=404, detail=f"unknown patient {patient_id!r}"
            )
        return profile_to_dict(profile)

    @app.get(
        "/api/patients/{patient_id}/predictions", response_model=PredictionsReply
    )
    async def patient_predictions(
        patient_id: str, k: Optional[int] = Query(default=None)
    ) -> PredictionsReply:
        s = _open_store()
        cfg: ServiceConfig = app.state.config
        if k is None:
            k = cfg.prediction_k
        if k < 1:
            raise HTTPException(status_code=400, detail="k must be >= 1")
        profile = s.get(patient_id)
        if profile is None:
            raise HTTPException(
                status_code=404, detail=f"unknown patient {patient_id!r}"
            )
        graph_: KnowledgeGraph = app.state.graph
        target = trajectory_of(profile, graph_, cfg.fringe_k)
        predictions = []
        if target.steps:
            others = (s.get(pid) for pid in s.patient_ids() if pid != patient_id)
            cohort = [
                trajectory_of(other)
                for other in others
                if other is not None and other.sessions
            ]
            predictions = predict_next_symptoms(
                target,
                cohort,
                graph_,
                k=k,
                similarity_threshold=cfg.similarity_threshold,
            )
        return PredictionsReply(
            patient_id=patient_id,
            k=k,
            predictions=[
                PredictionItem(
                    lemma_key=p.lemma_key,
                    score=round(p.score, 6),
                    source=p.source.value,
                )
                for p in predictions
            ],
            alert=any(p.score >= cfg.alert_threshold for p in predictions),
        )

    @app.get("/api/graph/neighbors", response_model=NeighborsReply)
    async def graph_neighbors(
        node: str, k: int = 5, category: Optional[str] = None
    ) -> NeighborsReply:
        if k < 1:
            raise HTTPException(status_code=400, detail="k must be >= 1")
        category_filter = None
        if category is not None:
            try:
                category_filter = EntityCategory(category.upper())
            except ValueError:
                raise HTTPException(
                    status_code=400, detail=f"unknown category {category!r}"
                ) from None
        graph_: KnowledgeGraph = app.state.graph
        try:
            ranked = graph_.neighbors(node, k=k, category_filter=category_filter)
        except UnknownNodeError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        return NeighborsReply(
            node=node,
            k=k,
            neighbors=[
                NeighborItem(
                    lemma_key=key,
                    probability=float(prob),
                    count=graph_.edge_weight(node, key),
                )
                for key, prob in ranked
            ],
        )

    @app.get("/api/graph/attribute", response_model=AttributeReply)
    async def graph_attribute(drug: str, category: str) -> AttributeReply:
        try:
            category_value = EntityCategory(category.upper())
        except ValueError:
            raise HTTPException(
                status_code=400, detail=f"unknown category {category!r}"
            ) from None
        graph_: KnowledgeGraph = app.state.graph
        try:
            rows = graph_.query_attribute(drug, category_value)
        except UnknownDrugError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        return AttributeReply(
            drug=drug,
            category=category_value.value,
            values=[
                AttributeValueItem(
                    value=value,
                    count=count,
                    evidence=[
                        EvidenceItem(doc_id=doc, sentence_index=idx)
                        for doc, idx in evidence
                    ],
                )
                for value, count, evidence in rows
            ],
        )

    @app.post("/api/admin/reload-graph", response_model=GraphCounts)
    async def reload_graph(body: ReloadRequest) -> GraphCounts:
        path = body.graph_path or app.state.config.graph_path
        if not path:
            raise HTTPException(status_code=400, detail="no graph path configured")
        if not Path(path).is_file():
            raise HTTPException(
                status_code=404, detail=f"graph file not found: {path}"
            )
        try:
            new_graph = import_graph(path)
        except (GraphParseError, GraphVersionError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        app.state.graph = new_graph
        logger.info("graph reloaded from %s (%d nodes)", path, len(new_graph.nodes))
        return _graph_counts(new_graph)

    if config.ui_dir and Path(config.ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app
