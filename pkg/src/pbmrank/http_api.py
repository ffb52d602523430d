"""JSON-over-HTTP facade for :class:`pbmrank.serving.RankingService`.

Endpoints:

* ``POST /rank``     — body ``{request_id, context, candidate_ids?, slate_size?}``;
  returns the served slate in display order plus the echoed request id.
* ``POST /feedback`` — body ``{request_id, clicks, ts?}``; applies the
  feedback exactly once.
* ``GET /health``    — liveness plus serving counters.
* ``GET /bias``      — the bias estimate currently in force.
"""

from __future__ import annotations

import json
import os

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .core import ActionVector, ContextVector
from .estimators import make_estimator
from .policies import make_policy
from .serving import (
    DuplicateFeedbackError,
    ExpiredRequestError,
    FeedbackEvent,
    RankingService,
    RankRequest,
    UnknownRequestError,
)
from .core import contextualized_dim

__all__ = ["create_app", "load_serving_config", "build_service", "load_catalog"]


class RankBody(BaseModel):
    request_id: str
    context: list[float]
    candidate_ids: list[str] | None = None
    slate_size: int | None = None


class FeedbackBody(BaseModel):
    request_id: str
    clicks: list[int]
    ts: int | None = None


def create_app(service: RankingService) -> FastAPI:
    app = FastAPI(title="pbmrank serving", version="1")

    @app.post("/rank")
    def rank(body: RankBody):
        try:
            result = service.rank(
                RankRequest(
                    request_id=body.request_id,
                    context=ContextVector(np.asarray(body.context, dtype=float)),
                    candidate_ids=(
                        tuple(body.candidate_ids) if body.candidate_ids else None
                    ),
                    slate_size=body.slate_size,
                )
            )
        except DuplicateFeedbackError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except (KeyError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {
            "request_id": result.request_id,
            "slate": list(result.action_ids),
            "scores": list(result.scores),
        }

    @app.post("/feedback")
    def feedback(body: FeedbackBody):
        try:
            ack = service.feedback(
                FeedbackEvent(
                    request_id=body.request_id,
                    clicks=tuple(body.clicks),
                    timestamp_ms=body.ts,
                )
            )
        except DuplicateFeedbackError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except UnknownRequestError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except ExpiredRequestError as exc:
            raise HTTPException(status_code=410, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"status": "ok", **ack}

    @app.get("/health")
    def health():
        return {"status": "ok", **service.stats()}

    @app.get("/bias")
    def bias():
        ready = service.estimator is not None and service.estimator.ready()
        return {"q": [float(v) for v in service.current_bias()], "ready": bool(ready)}

    return app


_ENV_OVERRIDES = {
    "PBMRANK_PORT": ("port", int),
    "PBMRANK_HOST": ("host", str),
    "PBMRANK_MODEL_PATH": ("model_path", str),
    "PBMRANK_LOG_PATH": ("log_path", str),
    "PBMRANK_POLICY": ("policy_name", str),
    "PBMRANK_ESTIMATOR": ("estimator_name", str),
}


def load_serving_config(path: str, environ=None) -> dict:
    """Read the serving config file and apply environment overrides."""
    with open(path) as fp:
        cfg = json.load(fp)
    environ = os.environ if environ is None else environ
    for var, (key, cast) in _ENV_OVERRIDES.items():
        if var in environ:
            if key == "policy_name":
                cfg.setdefault("policy", {})["name"] = environ[var]
            elif key == "estimator_name":
                cfg.setdefault("estimator", {})["name"] = environ[var]
            else:
                cfg[key] = cast(environ[var])
    return cfg


def load_catalog(path: str) -> list[ActionVector]:
    with open(path) as fp:
        obj = json.load(fp)
    return [
        ActionVector(id=str(a["id"]), features=np.asarray(a["features"], dtype=float))
        for a in obj["actions"]
    ]


def build_service(cfg: dict) -> RankingService:
    """Construct (or restore) a service from a parsed serving config."""
    catalog = load_catalog(cfg["catalog_path"])
    slate_size = int(cfg["slate_size"])
    context_dim = int(cfg["context_dim"])
    log_path = cfg.get("log_path", "clicks.jsonl")
    model_path = cfg.get("model_path")
    ttl = float(cfg.get("pending_ttl", 3600.0))

    if model_path and os.path.exists(model_path):
        return RankingService.restore(
            model_path, catalog=catalog, log_path=log_path, pending_ttl=ttl
        )

    d = contextualized_dim(catalog[0].dim, context_dim)
    seed = int(cfg.get("seed", 0))
    pol_cfg = dict(cfg.get("policy", {"name": "linucb_pbm"}))
    pol_name = pol_cfg.pop("name")
    policy = make_policy(
        pol_name, d, rng=np.random.default_rng(seed), **pol_cfg
    )
    est_cfg = dict(cfg.get("estimator", {"name": "em"}))
    est_name = est_cfg.pop("name")
    if est_name == "real":
        raise ValueError("the oracle estimator is only available in simulation")
    estimator = make_estimator(
        est_name, slate_size, dim=d,
        rng=np.random.default_rng(seed + 1), **est_cfg
    )
    return RankingService(
        catalog=catalog,
        slate_size=slate_size,
        policy=policy,
        estimator=estimator,
        log_path=log_path,
        context_dim=context_dim,
        pending_ttl=ttl,
    )
