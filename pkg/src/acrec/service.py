"""HTTP API for interactive recommendation.

Endpoints:
  POST /recommend                 rank books for a user + AC description
  GET  /wheel                     the 27 emotion categories
  GET  /statements                repository page, filterable
  GET  /users/{user_id}/history   chronological interactions
  GET  /health                    {status, model_digest}

All loaded artifacts (model, corpus index, statement repository) are
immutable; a model hot-swap replaces one reference atomically, so every
request sees a single consistent model, echoed through its digest.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .domain import ACDescription, DomainError
from .features import FeatureBank, candidate_features, history_features
from .model import SampleFeatures
from .pipeline import PreparedCorpus
from .taxonomy import StatementRepository, wheel_payload
from .taxonomy.statements import StatementError

__all__ = ["LoadedModel", "ServiceState", "create_app"]


class AcPayload(BaseModel):
    free_text: Optional[str] = None
    statement_ids: Optional[list[str]] = None


class RecommendRequest(BaseModel):
    user_id: str
    ac: AcPayload
    k: int = Field(default=10, ge=1)
    protocol: str = Field(default="sampled", pattern="^(all_items|sampled)$")


@dataclass
class LoadedModel:
    scorer: object
    digest: str
    use_cosine: bool
    m: int
    # candidate representations are user-independent, so they are baked
    # once per load (rows aligned with bank.book_ids); None for scorers
    # without a separate candidate encoder
    candidate_rows: Optional[np.ndarray] = None

    @classmethod
    def build(cls, scorer, digest: str, bank: FeatureBank) -> "LoadedModel":
        rows = None
        if hasattr(scorer, "encode_candidates"):
            cand = candidate_features(bank, bank.book_ids)
            rows = scorer.encode_candidates(cand).data
        return cls(
            scorer=scorer,
            digest=digest,
            use_cosine=getattr(scorer.config, "use_cosine", False),
            m=getattr(scorer.config, "m", 1),
            candidate_rows=rows,
        )


@dataclass
class ServiceState:
    prepared: PreparedCorpus
    bank: FeatureBank
    provider: object  # embeds per-request AC text
    repository: StatementRepository = field(default_factory=StatementRepository)
    model: Optional[LoadedModel] = None
    sampled_pool_size: int = 100

    def swap_model(self, model: LoadedModel) -> None:
        # single reference assignment: concurrent requests see old or new
        self.model = model

    def user_features(self, user_id: str, ac_raw: np.ndarray) -> SampleFeatures:
        """Query-side features from the user's full stored history."""
        hist = self.prepared.histories[user_id]
        return history_features(self.bank, hist, len(hist.interactions), self.model.m, ac_raw)


def _render_ac(state: ServiceState, payload: AcPayload) -> ACDescription:
    texts = None
    if payload.statement_ids:
        texts = {sid: state.repository.get(sid).text for sid in payload.statement_ids}
    return ACDescription.from_parts(free_text=payload.free_text, statement_texts_by_id=texts)


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="acrec", version="0.1.0")
    app.state.acrec = state

    @app.get("/health")
    def health():
        if state.model is None:
            return {"status": "degraded", "model_digest": None}
        return {"status": "ok", "model_digest": state.model.digest}

    @app.get("/wheel")
    def get_wheel():
        return wheel_payload()

    @app.get("/statements")
    def get_statements(
        category: Optional[str] = None,
        intensity: Optional[str] = None,
        offset: int = 0,
        limit: int = 50,
    ):
        try:
            if category is not None:
                matches = state.repository.by_category(category, intensity)
            else:
                matches = list(state.repository)
        except StatementError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        page = matches[offset : offset + limit]
        return {
            "total": len(matches),
            "offset": offset,
            "statements": [s.to_record() for s in page],
        }

    @app.get("/users/{user_id}/history")
    def get_history(user_id: str):
        hist = state.prepared.histories.get(user_id)
        if hist is None:
            raise HTTPException(status_code=404, detail=f"unknown user {user_id!r}")
        return {
            "user_id": user_id,
            "interactions": [
                {
                    "book_id": i.book,
                    "title": state.prepared.books[i.book].title,
                    "rating": i.rating,
                    "timestamp": i.timestamp,
                    "index": i.index,
                }
                for i in hist.interactions
            ],
        }

    @app.post("/recommend")
    def recommend(req: RecommendRequest):
        started = time.perf_counter()
        if state.model is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        if req.user_id not in state.prepared.histories:
            raise HTTPException(status_code=404, detail=f"unknown user {req.user_id!r}")
        try:
            ac = _render_ac(state, req.ac)
        except (DomainError, StatementError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

        ac_raw = state.bank.scale_query(state.provider.embed_text(ac.rendered).values)
        feats = state.user_features(req.user_id, ac_raw)
        consumed = state.prepared.histories[req.user_id].book_ids
        pool = [b for b in state.bank.scorable_ids if b not in consumed]
        if req.protocol == "sampled" and len(pool) > state.sampled_pool_size:
            rng = _pool_rng(req.user_id)
            pool = sorted(rng.choice(pool, size=state.sampled_pool_size, replace=False).tolist())

        scores = _score_pool(state, feats, ac_raw, pool)
        order = sorted(range(len(pool)), key=lambda i: (-scores[i], pool[i]))[: req.k]
        items = []
        for i in order:
            book = state.prepared.books[pool[i]]
            items.append(
                {
                    "book_id": pool[i],
                    "title": book.title,
                    "score": float(scores[i]),
                    "description": book.original_description,
                    "extended_description": book.extended_description,
                }
            )
        return {
            "items": items,
            "model_digest": state.model.digest,
            "latency_ms": (time.perf_counter() - started) * 1000.0,
        }

    return app


def _score_pool(state: ServiceState, feats: SampleFeatures, ac_raw: np.ndarray,
                pool: list[str]) -> np.ndarray:
    model = state.model
    scorer = model.scorer
    if model.candidate_rows is not None:
        from .numerics import tensor as T

        rows = np.array([state.bank.book_row(b) for b in pool], dtype=np.intp)
        cand_const = T.constant(model.candidate_rows[rows])
        cos = state.bank.cosines(ac_raw, rows) if model.use_cosine else None
        scores = scorer.score(
            scorer.long_term(feats),
            scorer.short_term(feats),
            cand_const,
            scorer.encode_ac(feats.ac_raw),
            cos,
        )
        return scores.data
    cand = candidate_features(state.bank, pool, ac_raw, model.use_cosine)
    return scorer.score_sample(feats, cand, training=False).data


def _pool_rng(user_id: str) -> np.random.Generator:
    import hashlib

    h = hashlib.blake2b(f"sampled\x00{user_id}".encode("utf-8"), digest_size=8)
    return np.random.default_rng(int.from_bytes(h.digest(), "little"))
