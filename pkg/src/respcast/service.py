"""HTTP service: forecast jobs, ingestion, evaluation, and schemas.

Forecasts run as background jobs (LLM-bound latency) tracked in an
append-only journal; clients poll GET /jobs/{id} and fetch the report from
GET /forecasts/{id} once done.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .config import EngineConfig
from .engine import ForecastEngine, ForecastRequest
from .gateways import EmbeddingRequest
from .knowledge import KnowledgeError, KnowledgeStore, NewsArticle
from .metrics import MetricError, evaluate_responses
from .sparse_index import SparseIndexError, encode_sparse

TERMINAL_STATUSES = ("done", "failed")


class ForecastBody(BaseModel):
    post_text: str = Field(min_length=1)
    m_total: int = Field(default=30, ge=1)
    topic_hint: str | None = None
    as_of: float | None = None


class IngestPostsBody(BaseModel):
    records: list[dict]


class IngestNewsBody(BaseModel):
    articles: list[dict]


class EvaluateBody(BaseModel):
    predicted: list[str] = Field(min_length=1)
    real: list[str] = Field(min_length=1)
    popularity: list[int] | None = None


class JobModel(BaseModel):
    job_id: str
    kind: str
    status: str
    created_at: float
    updated_at: float
    result_ref: str | None = None
    error: str | None = None


class CommunityModel(BaseModel):
    id: str
    kind: str
    size: int
    medoid: str
    side_label: str | None
    members: list[str]
    representatives: list[str]


class ResponseModel(BaseModel):
    text: str
    community_id: str
    seed: int | None
    prompt_fingerprint: str
    ordinal: int
    degraded: bool


class ProvenanceModel(BaseModel):
    similar_post_ids: list[str]
    news_snippet_ids: list[str]
    kg_chunk_ids: list[str]


class QuotaEntryModel(BaseModel):
    community_id: str
    m_k: int


class RequestEchoModel(BaseModel):
    post_text: str
    m_total: int
    topic_hint: str | None
    as_of: float | None


class ForecastReportModel(BaseModel):
    schema_version: int
    request: RequestEchoModel
    status: str
    communities: list[CommunityModel]
    responses: list[ResponseModel]
    provenance: ProvenanceModel
    quota: list[QuotaEntryModel]
    degraded_flags: list[str]
    elapsed_seconds: float


class EvalReportModel(BaseModel):
    emotion_jsd: float | None
    discrimination_mean: float | None
    discrimination_failures: int
    cluster_matching_pct: float | None
    cluster_matching_upper_bound_pct: float | None
    cluster_coverage_pct: float | None


class HealthModel(BaseModel):
    status: str
    posts: int
    dense_docs: int
    news_docs: int
    kg_docs: int
    jobs: int


class JobStore:
    """In-memory job table backed by an append-only JSON-lines journal.

    On startup the journal is replayed; jobs left non-terminal by a crash
    are marked failed so every job reaches a terminal state.
    """

    def __init__(self, journal_path: str | None = None) -> None:
        self._journal_path = journal_path
        self._jobs: dict[str, dict] = {}
        self._lock = threading.Lock()
        if journal_path and os.path.exists(journal_path):
            self._replay()

    def _replay(self) -> None:
        with open(self._journal_path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                row = json.loads(line)
                self._jobs[row["job_id"]] = row
        for job in self._jobs.values():
            if job["status"] not in TERMINAL_STATUSES:
                job["status"] = "failed"
                job["error"] = "interrupted by restart"
                job["updated_at"] = time.time()
                self._append(job)

    def _append(self, job: dict) -> None:
        if not self._journal_path:
            return
        os.makedirs(os.path.dirname(self._journal_path) or ".", exist_ok=True)
        with open(self._journal_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(job, sort_keys=True) + "\n")

    def create(self, kind: str) -> dict:
        job = {
            "job_id": uuid.uuid4().hex[:12],
            "kind": kind,
            "status": "queued",
            "created_at": time.time(),
            "updated_at": time.time(),
            "result_ref": None,
            "error": None,
        }
        with self._lock:
            self._jobs[job["job_id"]] = job
            self._append(job)
        return dict(job)

    def transition(self, job_id: str, status: str, result_ref: str | None = None, error: str | None = None) -> None:
        with self._lock:
            job = self._jobs[job_id]
            job["status"] = status
            job["updated_at"] = time.time()
            if result_ref is not None:
                job["result_ref"] = result_ref
            if error is not None:
                job["error"] = error
            self._append(job)

    def get(self, job_id: str) -> dict | None:
        with self._lock:
            job = self._jobs.get(job_id)
            return dict(job) if job else None

    def __len__(self) -> int:
        return len(self._jobs)


def create_app(config: EngineConfig, engine: ForecastEngine | None = None) -> FastAPI:
    if engine is None:
        from .runtime import build_engine

        engine = build_engine(config)
    app = FastAPI(title="respcast", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=config.service.cors_origins,
        allow_methods=["*"],
        allow_headers=["*"],
    )
    jobs = JobStore(config.storage.jobs)
    reports: dict[str, dict] = {}
    executor = ThreadPoolExecutor(max_workers=2)
    app.state.engine = engine
    app.state.jobs = jobs
    app.state.reports = reports
    knowledge = KnowledgeStore()

    def run_forecast(job_id: str, body: ForecastBody) -> None:
        jobs.transition(job_id, "running")
        try:
            report = engine.forecast(
                ForecastRequest(
                    post_text=body.post_text,
                    m_total=body.m_total,
                    topic_hint=body.topic_hint,
                    as_of=body.as_of,
                )
            )
            payload = ForecastReportModel.model_validate(report.to_dict()).model_dump()
            reports[job_id] = payload
            if config.storage.reports_dir:
                os.makedirs(config.storage.reports_dir, exist_ok=True)
                with open(
                    os.path.join(config.storage.reports_dir, f"{job_id}.json"),
                    "w",
                    encoding="utf-8",
                ) as fh:
                    json.dump(payload, fh, sort_keys=True)
            jobs.transition(job_id, "done", result_ref=f"/forecasts/{job_id}")
        except Exception as exc:  # any pipeline failure must land the job in a terminal state
            jobs.transition(job_id, "failed", error=str(exc))

    @app.get("/health", response_model=HealthModel)
    def health() -> HealthModel:
        return HealthModel(
            status="ok",
            posts=len(engine.corpus),
            dense_docs=len(engine.dense_index),
            news_docs=len(engine.news_index) if engine.news_index else 0,
            kg_docs=len(engine.kg_index) if engine.kg_index else 0,
            jobs=len(jobs),
        )

    @app.get("/config")
    def get_config() -> dict:
        return config.redacted_dict()

    @app.get("/schemas")
    def schemas() -> dict:
        return {
            "version": 1,
            "forecast_report": ForecastReportModel.model_json_schema(),
            "eval_report": EvalReportModel.model_json_schema(),
            "job": JobModel.model_json_schema(),
        }

    @app.post("/forecast", status_code=202)
    def forecast(body: ForecastBody) -> dict:
        job = jobs.create("forecast")
        executor.submit(run_forecast, job["job_id"], body)
        return {"job_id": job["job_id"], "status": job["status"]}

    @app.get("/jobs/{job_id}", response_model=JobModel)
    def get_job(job_id: str) -> JobModel:
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown job")
        return JobModel(**job)

    @app.get("/forecasts/{job_id}", response_model=ForecastReportModel)
    def get_forecast(job_id: str) -> dict:
        if job_id not in reports:
            raise HTTPException(status_code=404, detail="no report for this id")
        return reports[job_id]

    @app.get("/communities")
    def communities(forecast: str) -> list[dict]:
        if forecast not in reports:
            raise HTTPException(status_code=404, detail="no report for this id")
        return reports[forecast]["communities"]

    @app.post("/ingest/posts")
    def ingest_posts(body: IngestPostsBody) -> dict:
        stats = engine.corpus.ingest_posts(body.records)
        indexed = 0
        for record in body.records:
            post_id = record.get("id") if isinstance(record, dict) else None
            if not post_id or post_id not in engine.corpus or post_id in engine.dense_index:
                continue
            doc = engine.corpus.augment(post_id)
            vector = engine.embed_gateway.embed_dense(EmbeddingRequest(text=doc.rendered))
            engine.dense_index.insert(
                post_id, vector, topic=doc.topic, timestamp=doc.timestamp
            )
            indexed += 1
        return {
            "accepted": stats.docs,
            "rejected": len(stats.rejected),
            "indexed": indexed,
        }

    @app.post("/ingest/news")
    def ingest_news(body: IngestNewsBody) -> dict:
        added = 0
        errors: list[str] = []
        for row in body.articles:
            try:
                article = NewsArticle(
                    url=str(row["url"]),
                    source=str(row.get("source", "")),
                    published_at=float(row["published_at"]),
                    title=str(row.get("title", "")),
                    body=str(row["body"]),
                )
                snippets = knowledge.ingest_article(article)
            except (KeyError, TypeError, ValueError, KnowledgeError) as exc:
                errors.append(str(exc))
                continue
            for snippet in snippets:
                try:
                    engine.news_index.insert(
                        snippet.id,
                        encode_sparse(snippet.text, engine.sparse_profile),
                        timestamp=snippet.published_at,
                    )
                except SparseIndexError:
                    continue
                engine._doc_text_store[snippet.id] = snippet.text
                added += 1
        return {"snippets_indexed": added, "errors": errors}

    @app.post("/evaluate", response_model=EvalReportModel)
    def evaluate(body: EvaluateBody) -> EvalReportModel:
        try:
            report = evaluate_responses(
                body.predicted,
                body.real,
                engine.embed_gateway,
                engine.chat_gateway,
                real_popularity=body.popularity,
                reduced_dim=engine.settings.reduced_dim,
                seed=engine.settings.seed,
                min_cluster_size=engine.settings.min_cluster_size,
                min_samples=engine.settings.min_samples,
            )
        except MetricError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return EvalReportModel(**report.to_dict())

    return app


def serve(config: EngineConfig) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=config.service.host, port=config.service.port)
