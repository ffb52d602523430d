"""Online serving: rank requests, feedback ingestion, durable state.

A :class:`RankingService` wraps one policy/estimator pair around a fixed
action catalog.  Ranking contextualizes the catalog against the request's
context and fills a slate with the current bias estimate; the served slate
is remembered under its request id until matching feedback arrives.  Each
feedback event is applied exactly once: click records are appended to a
durable JSON-lines log *before* the model update, so a crash can always be
recovered by restoring the last snapshot and replaying the log suffix.

Concurrency contract: rank calls only read model state; feedback calls are
the single writer.  The service serializes both through one lock, which is
all a single-process deployment needs.
"""

from __future__ import annotations

import itertools
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (
    ActionVector,
    ClickLogEntry,
    ContextVector,
    contextualized_dim,
    entry_to_json,
    entry_from_json,
)
from .env import contextualize_batch
from .estimators import fallback_schedule, estimator_from_snapshot
from .policies import policy_from_snapshot
from .snapshot import SnapshotError, read_snapshot, write_snapshot

__all__ = [
    "RankRequest",
    "FeedbackEvent",
    "RankResult",
    "UnknownRequestError",
    "DuplicateFeedbackError",
    "ExpiredRequestError",
    "RankingService",
]


class UnknownRequestError(KeyError):
    """Feedback referenced a request id that was never served (or was lost)."""


class DuplicateFeedbackError(RuntimeError):
    """Feedback for this request id was already applied."""


class ExpiredRequestError(RuntimeError):
    """The pending slate outlived its TTL; feedback is logged and dropped."""


@dataclass(frozen=True, eq=False)
class RankRequest:
    """One ranking call: a context, optionally a candidate subset and size."""

    request_id: str
    context: ContextVector
    candidate_ids: tuple[str, ...] | None = None
    slate_size: int | None = None


@dataclass(frozen=True, eq=False)
class FeedbackEvent:
    """Per-position click indicators joining back to a served slate."""

    request_id: str
    clicks: tuple[int, ...]
    timestamp_ms: int | None = None


@dataclass(frozen=True, eq=False)
class RankResult:
    request_id: str
    action_ids: tuple[str, ...]
    scores: tuple[float, ...]


@dataclass
class _Pending:
    served_at: float
    context: ContextVector
    actions: tuple[ActionVector, ...]
    features: np.ndarray  # (L, d) contextualized


class RankingService:
    """Single-process serving loop around a policy and a bias estimator."""

    def __init__(
        self,
        catalog: Sequence[ActionVector],
        slate_size: int,
        policy,
        estimator,
        log_path: str,
        context_dim: int,
        pending_ttl: float = 3600.0,
        clock: Callable[[], float] = time.time,
    ):
        if not catalog:
            raise ValueError("catalog must not be empty")
        if slate_size > len(catalog):
            raise ValueError(
                f"slate size {slate_size} exceeds catalog size {len(catalog)}"
            )
        dims = {a.dim for a in catalog}
        if len(dims) != 1:
            raise ValueError(f"catalog has inconsistent action dims: {dims}")
        ids = [a.id for a in catalog]
        if len(set(ids)) != len(ids):
            raise ValueError("catalog contains duplicate action ids")

        self.catalog = list(catalog)
        self._by_id = {a.id: a for a in self.catalog}
        self._action_matrix = np.stack([a.features for a in self.catalog])
        self.context_dim = context_dim
        expected_d = contextualized_dim(self.catalog[0].dim, context_dim)
        policy_d = getattr(policy, "d", None)
        if policy_d is not None and policy_d != expected_d:
            raise SnapshotError(
                f"model dimension mismatch: policy d={policy_d}, "
                f"catalog+context implies d={expected_d}"
            )
        self.slate_size = slate_size
        self.policy = policy
        self.estimator = estimator
        self.log_path = log_path
        self.pending_ttl = pending_ttl
        self.clock = clock
        self.rounds_applied = 0
        self._log_lines = 0
        self._pending: dict[str, _Pending] = {}
        self._consumed: set[str] = set()
        self._dropped_expired = 0
        self._lock = threading.Lock()
        os.makedirs(os.path.dirname(os.path.abspath(log_path)), exist_ok=True)
        self._log_fp = open(log_path, "a")

    # -- bias -----------------------------------------------------------------

    def current_bias(self) -> np.ndarray:
        if self.estimator is not None and self.estimator.ready():
            q = np.asarray(self.estimator.bias(), dtype=float)
        else:
            q = fallback_schedule(self.slate_size)
        return q[: self.slate_size]

    # -- rank -----------------------------------------------------------------

    def _candidates(self, req: RankRequest) -> tuple[list[ActionVector], np.ndarray]:
        if req.candidate_ids is None:
            return self.catalog, self._action_matrix
        unknown = [i for i in req.candidate_ids if i not in self._by_id]
        if unknown:
            raise KeyError(f"unknown action ids: {unknown}")
        actions = [self._by_id[i] for i in req.candidate_ids]
        return actions, np.stack([a.features for a in actions])

    def rank(self, req: RankRequest) -> RankResult:
        with self._lock:
            self._evict_expired()
            if req.request_id in self._pending or req.request_id in self._consumed:
                raise DuplicateFeedbackError(
                    f"request id {req.request_id!r} was already used"
                )
            if req.context.dim != self.context_dim:
                raise ValueError(
                    f"context dim {req.context.dim} != configured {self.context_dim}"
                )
            actions, A = self._candidates(req)
            L = req.slate_size if req.slate_size is not None else self.slate_size
            if L > len(actions):
                raise ValueError(
                    f"requested slate of {L} from {len(actions)} candidates"
                )
            if L > self.slate_size:
                raise ValueError(
                    f"slate size {L} exceeds configured maximum {self.slate_size}"
                )
            X = contextualize_batch(A, req.context.features)
            q = self.current_bias()[:L]
            ids = [a.id for a in actions]
            sel = self.policy.rank_indices(X, q, ids)
            chosen = tuple(actions[i] for i in sel)
            scores = self.policy.mean_scores(X[sel])
            self._pending[req.request_id] = _Pending(
                served_at=self.clock(),
                context=req.context,
                actions=chosen,
                features=X[sel],
            )
            return RankResult(
                request_id=req.request_id,
                action_ids=tuple(a.id for a in chosen),
                scores=tuple(float(s) for s in scores),
            )

    def _evict_expired(self) -> None:
        if self.pending_ttl <= 0:
            return
        now = self.clock()
        expired = [
            rid for rid, p in self._pending.items()
            if now - p.served_at > self.pending_ttl
        ]
        for rid in expired:
            del self._pending[rid]
            self._dropped_expired += 1

    # -- feedback ---------------------------------------------------------------

    def feedback(self, event: FeedbackEvent) -> dict:
        with self._lock:
            if event.request_id in self._consumed:
                raise DuplicateFeedbackError(
                    f"feedback for {event.request_id!r} was already applied"
                )
            pending = self._pending.get(event.request_id)
            if pending is None:
                raise UnknownRequestError(event.request_id)
            if (
                self.pending_ttl > 0
                and self.clock() - pending.served_at > self.pending_ttl
            ):
                del self._pending[event.request_id]
                self._dropped_expired += 1
                raise ExpiredRequestError(
                    f"slate for {event.request_id!r} expired; feedback dropped"
                )
            L = len(pending.actions)
            clicks = np.asarray(event.clicks, dtype=float)
            if clicks.shape[0] != L:
                raise ValueError(
                    f"feedback carries {clicks.shape[0]} positions, slate had {L}"
                )
            if not np.all(np.isin(clicks, (0.0, 1.0))):
                raise ValueError("clicks must be 0/1 indicators")

            ts = (
                event.timestamp_ms
                if event.timestamp_ms is not None
                else int(self.clock() * 1000)
            )
            entries = [
                ClickLogEntry(
                    click=int(clicks[l]),
                    context=pending.context,
                    action=pending.actions[l],
                    position=l + 1,
                    timestamp_ms=ts,
                )
                for l in range(L)
            ]
            # Write-ahead: persist the records before touching model state.
            for entry in entries:
                self._log_fp.write(entry_to_json(entry))
                self._log_fp.write("\n")
            self._log_fp.flush()
            self._log_lines += L

            self._apply_round(clicks, pending.features)
            del self._pending[event.request_id]
            self._consumed.add(event.request_id)
            return {
                "request_id": event.request_id,
                "applied_positions": L,
                "round": self.rounds_applied,
            }

    def _apply_round(self, clicks: np.ndarray, X: np.ndarray) -> None:
        q = self.current_bias()[: X.shape[0]]
        scores = None
        if self.estimator is not None and self.estimator.needs_scores:
            scores = self.policy.mean_scores(X)
        self.policy.update_arrays(q, X, clicks)
        if self.estimator is not None:
            self.estimator.observe(clicks, X, scores=scores)
        self.rounds_applied += 1

    # -- persistence --------------------------------------------------------------

    def snapshot(self, path: str) -> None:
        """Persist policy, estimator, bookkeeping and the log offset."""
        with self._lock:
            payload = {
                "policy": self.policy.to_snapshot(),
                "estimator": None if self.estimator is None else self.estimator.to_snapshot(),
                "L": self.slate_size,
                "context_dim": self.context_dim,
                "q": [float(v) for v in self.current_bias()],
                "rounds_applied": self.rounds_applied,
                "log_lines": self._log_lines,
                "consumed": sorted(self._consumed),
            }
            write_snapshot(path, payload)

    @classmethod
    def restore(
        cls,
        path: str,
        catalog: Sequence[ActionVector],
        log_path: str,
        pending_ttl: float = 3600.0,
        clock: Callable[[], float] = time.time,
        replay_log: bool = True,
    ) -> "RankingService":
        """Rebuild a service from a snapshot, replaying any newer log suffix.

        Entries appended after the snapshot was taken are regrouped into
        rounds (positions restart at 1) and re-applied in order, which
        reproduces the pre-crash model state exactly because updates are
        deterministic given the restored state.
        """
        payload = read_snapshot(path)
        policy = policy_from_snapshot(payload["policy"])
        estimator = (
            estimator_from_snapshot(payload["estimator"])
            if payload.get("estimator")
            else None
        )
        service = cls(
            catalog=catalog,
            slate_size=int(payload["L"]),
            policy=policy,
            estimator=estimator,
            log_path=log_path,
            context_dim=int(payload["context_dim"]),
            pending_ttl=pending_ttl,
            clock=clock,
        )
        service.rounds_applied = int(payload["rounds_applied"])
        service._consumed = set(payload.get("consumed", []))
        offset = int(payload["log_lines"])
        service._log_lines = offset
        if replay_log and os.path.exists(log_path):
            service._replay_suffix(log_path, offset)
        return service

    def _replay_suffix(self, log_path: str, offset: int) -> None:
        with open(log_path) as fp:
            lines = [ln for ln in (l.strip() for l in fp) if ln]
        tail = lines[offset:]
        self._log_lines = len(lines)
        for group in _group_rounds(entry_from_json(ln) for ln in tail):
            clicks = np.array([e.click for e in group], dtype=float)
            A = np.stack([e.action.features for e in group])
            X = contextualize_batch(A, group[0].context.features)
            self._apply_round(clicks, X)

    def close(self) -> None:
        self._log_fp.close()

    def stats(self) -> dict:
        return {
            "rounds_applied": self.rounds_applied,
            "pending": len(self._pending),
            "consumed": len(self._consumed),
            "dropped_expired": self._dropped_expired,
            "log_lines": self._log_lines,
        }


def _group_rounds(entries) -> list[list[ClickLogEntry]]:
    """Split a log stream into rounds; a position-1 record opens a round."""
    groups: list[list[ClickLogEntry]] = []
    for entry in entries:
        if entry.position == 1 or not groups:
            groups.append([])
        groups[-1].append(entry)
    return groups
