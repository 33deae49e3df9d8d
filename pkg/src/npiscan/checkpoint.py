"""Single-file model container shared by all trained detectors.

Layout: one line of JSON (format version, model kind, config, label order,
optional feature vocabulary, tensor directory with name/shape/offset) followed
by the raw little-endian float32 tensor payload. The header carries a sha256
digest over the payload, so truncation and corruption are detected at load.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

FORMAT_VERSION = 1
TENSOR_DTYPE = np.dtype("<f4")


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    kind: str
    config: dict
    tensors: dict[str, np.ndarray]
    label_order: list[str]
    vocabulary: list[str] | None = None
    extra: dict = field(default_factory=dict)


def save_checkpoint(path, ckpt: Checkpoint) -> str:
    """Write the container; returns the payload digest."""
    directory = []
    blobs = []
    offset = 0
    for name in sorted(ckpt.tensors):
        arr = np.ascontiguousarray(ckpt.tensors[name], dtype=TENSOR_DTYPE)
        blob = arr.tobytes()
        directory.append(
            {"name": name, "shape": list(arr.shape), "offset": offset,
             "nbytes": len(blob)}
        )
        blobs.append(blob)
        offset += len(blob)
    payload = b"".join(blobs)
    digest = hashlib.sha256(payload).hexdigest()
    header = {
        "format_version": FORMAT_VERSION,
        "kind": ckpt.kind,
        "config": ckpt.config,
        "label_order": list(ckpt.label_order),
        "vocabulary": ckpt.vocabulary,
        "extra": ckpt.extra,
        "tensors": directory,
        "payload_nbytes": len(payload),
        "payload_sha256": digest,
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        f.write(b"\n")
        f.write(payload)
    return digest


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        header_line = f.readline()
        payload = f.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from exc
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format version {version!r} "
            f"(expected {FORMAT_VERSION})"
        )
    if len(payload) != header["payload_nbytes"]:
        raise CheckpointError(
            f"truncated checkpoint: payload {len(payload)} bytes, "
            f"header declares {header['payload_nbytes']}"
        )
    digest = hashlib.sha256(payload).hexdigest()
    if digest != header["payload_sha256"]:
        raise CheckpointError("checkpoint payload digest mismatch")
    tensors = {}
    for entry in header["tensors"]:
        blob = payload[entry["offset"]:entry["offset"] + entry["nbytes"]]
        arr = np.frombuffer(blob, dtype=TENSOR_DTYPE).reshape(entry["shape"])
        tensors[entry["name"]] = arr.copy()
    return Checkpoint(
        kind=header["kind"],
        config=header["config"],
        tensors=tensors,
        label_order=list(header["label_order"]),
        vocabulary=header.get("vocabulary"),
        extra=header.get("extra", {}),
    )


def checkpoint_digest(path) -> str:
    """Digest over the saved payload, for determinism checks."""
    with open(path, "rb") as f:
        f.readline()
        return hashlib.sha256(f.read()).hexdigest()
