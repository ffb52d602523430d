"""Shared domain types for ranking under the position-based click model (PBM).

Under PBM, the probability of observing a click on an item shown at slate
position ``l`` factorizes into an examination term that depends only on the
position and a relevance term that depends only on the (context, action) pair:

    P(click | x, a, l) = P(examined | l) * P(relevant | x, a)

The per-position examination probabilities form the *position bias* vector
``q``.  The learner never observes examination and relevance separately; it
only sees their censored product per position.

This module holds the value types shared by the policies, bias estimators,
simulator, harness and serving layers, plus the feature transform that joins
an action vector with a context vector into a single scoring vector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence, TextIO

import numpy as np

__all__ = [
    "ActionVector",
    "ContextVector",
    "ContextualizedAction",
    "PositionBias",
    "Slate",
    "SlateFeedback",
    "ClickLogEntry",
    "DimensionMismatchError",
    "contextualize",
    "contextualize_batch",
    "contextualized_dim",
    "expected_click_probability",
    "entry_to_json",
    "entry_from_json",
    "write_click_log",
    "read_click_log",
]


class DimensionMismatchError(ValueError):
    """A vector's length does not match the configured dimensions."""


def _as_readonly(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


def _check_unit_interval(arr: np.ndarray, name: str) -> None:
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError(f"{name} entries must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class ActionVector:
    """A candidate action with its raw feature vector (entries in [0, 1])."""

    id: str
    features: np.ndarray

    def __post_init__(self):
        arr = _as_readonly(self.features, "action features")
        _check_unit_interval(arr, "action features")
        object.__setattr__(self, "features", arr)

    @property
    def dim(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True, eq=False)
class ContextVector:
    """Per-round side information (entries in [0, 1])."""

    features: np.ndarray

    def __post_init__(self):
        arr = _as_readonly(self.features, "context features")
        _check_unit_interval(arr, "context features")
        object.__setattr__(self, "features", arr)

    @property
    def dim(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True, eq=False)
class ContextualizedAction:
    """An action joined with a context, ready for linear scoring.

    The feature layout is ``[action | context | outer product]`` with the
    outer product flattened row-major (action index in the outer loop).
    """

    id: str
    features: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "features", _as_readonly(self.features, "features"))

    @property
    def dim(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True, eq=False)
class PositionBias:
    """Examination probabilities per slate position, each in [0, 1]."""

    q: np.ndarray

    def __post_init__(self):
        arr = _as_readonly(self.q, "position bias")
        _check_unit_interval(arr, "position bias")
        object.__setattr__(self, "q", arr)

    def __len__(self) -> int:
        return self.q.shape[0]

    def __getitem__(self, position: int) -> float:
        return float(self.q[position])


@dataclass(frozen=True, eq=False)
class Slate:
    """An ordered list of distinct actions, position 1 first."""

    entries: tuple[ContextualizedAction, ...]

    def __post_init__(self):
        entries = tuple(self.entries)
        if not entries:
            raise ValueError("slate must contain at least one action")
        ids = [e.id for e in entries]
        if len(set(ids)) != len(ids):
            raise ValueError(f"slate contains duplicate action ids: {ids}")
        object.__setattr__(self, "entries", entries)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(e.id for e in self.entries)

    def feature_matrix(self) -> np.ndarray:
        """Stack entry features into an (L, d) matrix."""
        return np.stack([e.features for e in self.entries])


@dataclass(frozen=True, eq=False)
class SlateFeedback:
    """Observed censored feedback per position.

    Each entry is the product of the latent examination indicator and the
    latent reward of the item shown there; neither factor is observable on
    its own.
    """

    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "z", _as_readonly(self.z, "feedback"))

    def __len__(self) -> int:
        return self.z.shape[0]


@dataclass(frozen=True, eq=False)
class ClickLogEntry:
    """One click-log record: (click, context, action, 1-based position).

    This is the wire format between the serving layer and the position-bias
    estimators; see :func:`entry_to_json` for the line encoding.
    """

    click: int
    context: ContextVector
    action: ActionVector
    position: int
    timestamp_ms: int = 0
    # Cache slot for the contextualized features; avoids recomputing the
    # outer-product transform when one entry flows through several estimators.
    _contextualized: np.ndarray | None = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self):
        if self.click not in (0, 1):
            raise ValueError(f"click must be 0 or 1, got {self.click!r}")
        if self.position < 1:
            raise ValueError(f"position is 1-based, got {self.position}")

    def contextualized(self) -> np.ndarray:
        feats = self._contextualized
        if feats is None:
            feats = contextualize(self.action, self.context).features
            object.__setattr__(self, "_contextualized", feats)
        return feats


def contextualized_dim(d_a: int, d_c: int) -> int:
    """Length of the joined feature vector: d_a + d_c + d_a*d_c."""
    return d_a + d_c + d_a * d_c


def contextualize(
    action: ActionVector,
    context: ContextVector,
    d_a: int | None = None,
    d_c: int | None = None,
) -> ContextualizedAction:
    """Join an action and a context into a single scoring vector.

    The result concatenates the action vector, the context vector and their
    flattened outer product (row-major: entry ``i*d_c + j`` holds
    ``action[i] * context[j]``), then divides by the squared Euclidean norm
    of the concatenation.  A zero concatenation is returned unchanged rather
    than raising, because sparsified inputs can legitimately be all zero.

    Args:
        action: the candidate action.
        context: the round's context.
        d_a, d_c: optional expected dimensions; a mismatch raises
            :class:`DimensionMismatchError`.

    Returns:
        The contextualized action, carrying the action's id.
    """
    a, c = action.features, context.features
    if d_a is not None and a.shape[0] != d_a:
        raise DimensionMismatchError(f"expected action dim {d_a}, got {a.shape[0]}")
    if d_c is not None and c.shape[0] != d_c:
        raise DimensionMismatchError(f"expected context dim {d_c}, got {c.shape[0]}")
    features = contextualize_features(a, c)
    return ContextualizedAction(id=action.id, features=features)


def contextualize_batch(actions: np.ndarray, context: np.ndarray) -> np.ndarray:
    """Vectorized join of K action vectors with one shared context vector.

    Single-vector and batch callers share this code path so both produce
    bit-identical features (log replay depends on that).
    """
    actions = np.asarray(actions, dtype=np.float64)
    context = np.asarray(context, dtype=np.float64)
    K, d_a = actions.shape
    d_c = context.shape[0]
    out = np.empty((K, d_a + d_c + d_a * d_c))
    out[:, :d_a] = actions
    out[:, d_a:d_a + d_c] = context
    out[:, d_a + d_c:] = (actions[:, :, None] * context[None, None, :]).reshape(K, -1)
    sq_norms = np.einsum("ij,ij->i", out, out)
    nonzero = sq_norms > 0.0
    out[nonzero] /= sq_norms[nonzero, None]
    return out


def contextualize_features(a: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Array-level core of :func:`contextualize` (no type wrapping)."""
    return contextualize_batch(np.asarray(a, dtype=np.float64)[None, :], c)[0]


def expected_click_probability(q_l: float, relevance: float) -> float:
    """PBM click probability: examination times relevance.

    Both factors must lie in [0, 1]; the product then does too.
    """
    if not (0.0 <= q_l <= 1.0):
        raise ValueError(f"examination probability out of [0, 1]: {q_l}")
    if not (0.0 <= relevance <= 1.0):
        raise ValueError(f"relevance out of [0, 1]: {relevance}")
    return q_l * relevance


# --- click-log line format -------------------------------------------------
#
# One JSON object per line with keys: click, context, action_id, action,
# position (1-based), ts.  This is the on-disk contract between serving and
# the bias estimators.


def entry_to_json(entry: ClickLogEntry) -> str:
    return json.dumps(
        {
            "click": int(entry.click),
            "context": entry.context.features.tolist(),
            "action_id": entry.action.id,
            "action": entry.action.features.tolist(),
            "position": int(entry.position),
            "ts": int(entry.timestamp_ms),
        },
        separators=(",", ":"),
    )


def entry_from_json(line: str) -> ClickLogEntry:
    obj = json.loads(line)
    return ClickLogEntry(
        click=int(obj["click"]),
        context=ContextVector(np.asarray(obj["context"], dtype=np.float64)),
        action=ActionVector(
            id=str(obj["action_id"]),
            features=np.asarray(obj["action"], dtype=np.float64),
        ),
        position=int(obj["position"]),
        timestamp_ms=int(obj["ts"]),
    )


def write_click_log(entries: Iterable[ClickLogEntry], fp: TextIO) -> int:
    """Append entries to an open text stream, one JSON object per line."""
    n = 0
    for entry in entries:
        fp.write(entry_to_json(entry))
        fp.write("\n")
        n += 1
    return n


def read_click_log(fp: TextIO) -> Iterator[ClickLogEntry]:
    for line in fp:
        line = line.strip()
        if line:
            yield entry_from_json(line)
