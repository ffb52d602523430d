"""Versioned on-disk model snapshots.

A snapshot is a JSON envelope carrying a format tag, a version number, a
SHA-256 checksum of the canonical payload encoding, and the payload itself.
Floats survive the JSON round trip bit-exactly (``repr`` encoding), so a
restored model reproduces scores exactly.
"""

from __future__ import annotations

import hashlib
import json
import os
from typing import Any

FORMAT_TAG = "pbmrank-model"
FORMAT_VERSION = 1

__all__ = ["SnapshotError", "write_snapshot", "read_snapshot", "save_model", "load_model"]


class SnapshotError(RuntimeError):
    """Unreadable, corrupt, or incompatible snapshot file."""


def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def write_snapshot(path: str, payload: dict) -> None:
    """Write a payload with format/version/checksum envelope, atomically."""
    body = _canonical(payload)
    envelope = {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "checksum": hashlib.sha256(body.encode()).hexdigest(),
        "payload": payload,
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fp:
        json.dump(envelope, fp, sort_keys=True)
    os.replace(tmp, path)


def read_snapshot(path: str) -> dict:
    """Read and validate a snapshot, returning its payload."""
    try:
        with open(path) as fp:
            envelope = json.load(fp)
    except (OSError, json.JSONDecodeError) as exc:
        raise SnapshotError(f"cannot read snapshot {path}: {exc}") from exc
    if envelope.get("format") != FORMAT_TAG:
        raise SnapshotError(f"not a {FORMAT_TAG} file: {path}")
    if envelope.get("version") != FORMAT_VERSION:
        raise SnapshotError(
            f"snapshot version {envelope.get('version')} unsupported "
            f"(expected {FORMAT_VERSION})"
        )
    payload = envelope.get("payload")
    if not isinstance(payload, dict):
        raise SnapshotError(f"snapshot {path} has no payload")
    digest = hashlib.sha256(_canonical(payload).encode()).hexdigest()
    if digest != envelope.get("checksum"):
        raise SnapshotError(f"snapshot {path} is corrupt (checksum mismatch)")
    return payload


def save_model(
    path: str,
    policy,
    bias=None,
    slate_size: int | None = None,
    extra: dict[str, Any] | None = None,
) -> None:
    """Persist a policy together with the bias vector it is being run with."""
    q = None
    if bias is not None:
        q = list(getattr(bias, "q", bias))
    payload: dict[str, Any] = {
        "policy": policy.to_snapshot(),
        "q": q,
        "L": slate_size if slate_size is not None else (len(q) if q else None),
    }
    if extra:
        payload.update(extra)
    write_snapshot(path, payload)


def load_model(path: str, expect_d: int | None = None, expect_l: int | None = None):
    """Load a policy snapshot, validating dimensions when given.

    Returns ``(policy, payload)``.
    """
    from .policies import policy_from_snapshot

    payload = read_snapshot(path)
    snap = payload.get("policy")
    if not isinstance(snap, dict):
        raise SnapshotError(f"snapshot {path} carries no policy section")
    if expect_d is not None and "d" in snap and int(snap["d"]) != expect_d:
        raise SnapshotError(
            f"model dimension mismatch: snapshot d={snap['d']}, expected {expect_d}"
        )
    if expect_l is not None and payload.get("L") is not None and int(payload["L"]) != expect_l:
        raise SnapshotError(
            f"slate size mismatch: snapshot L={payload['L']}, expected {expect_l}"
        )
    return policy_from_snapshot(snap), payload
