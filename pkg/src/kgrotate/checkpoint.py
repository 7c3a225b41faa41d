"""Binary checkpoint format.

Layout::

    b"KGRT" | version u16 | header length u32 | header (UTF-8 JSON)
    | raw little-endian arrays in header order | checksum u64

The checksum is an 8-byte BLAKE2b digest of every preceding byte.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from .exceptions import ChecksumMismatch, CheckpointError, VersionMismatch
from .optim import OptimizerState
from .scoring import EmbeddingTable
from .training import Checkpoint, TrainConfig

MAGIC = b"KGRT"
VERSION = 1
CHECKSUM_ALGORITHM = "blake2b-64"


def _digest(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=8).digest()


def _table_arrays(prefix: str, table: EmbeddingTable) -> dict[str, np.ndarray]:
    return {f"{prefix}.{k}": v for k, v in table.parameters().items()}


def _table_from(prefix: str, arrays: dict[str, np.ndarray], kind, modulus) -> EmbeddingTable:
    entity, relation = {}, {}
    for name, arr in arrays.items():
        if not name.startswith(prefix + "."):
            continue
        group, part = name[len(prefix) + 1:].split(".", 1)
        (entity if group == "entity" else relation)[part] = arr
    return EmbeddingTable(kind, entity, relation, modulus)


def save_checkpoint(cp: Checkpoint, path: str | os.PathLike) -> Path:
    arrays = _table_arrays("table", cp.table)
    arrays.update({f"adam_m.{k}": v for k, v in cp.optimizer.m.items()})
    arrays.update({f"adam_v.{k}": v for k, v in cp.optimizer.v.items()})
    if cp.best is not None:
        arrays.update(_table_arrays("best", cp.best))
    header = {
        "config": cp.config.to_dict(),
        "model": cp.table.kind.value,
        "modulus": cp.table.modulus,
        "step": cp.step,
        "best_step": cp.best_step,
        "optimizer": {
            "step": cp.optimizer.step,
            "beta1": cp.optimizer.beta1,
            "beta2": cp.optimizer.beta2,
            "eps": cp.optimizer.eps,
        },
        "rng_state": cp.rng_state,
        "history": cp.history,
        "checksum": CHECKSUM_ALGORITHM,
        "arrays": [
            {"name": k, "dtype": np.dtype(v.dtype).newbyteorder("<").str, "shape": list(v.shape)}
            for k, v in arrays.items()
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    chunks = [MAGIC, struct.pack("<HI", VERSION, len(header_bytes)), header_bytes]
    for entry, arr in zip(header["arrays"], arrays.values()):
        chunks.append(np.ascontiguousarray(arr, dtype=entry["dtype"]).tobytes())
    body = b"".join(chunks)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(body + _digest(body))
    return path


def load_checkpoint(path: str | os.PathLike, expect: TrainConfig | None = None) -> Checkpoint:
    """Read a checkpoint; with ``expect`` the model kind and dimension must match."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read {path}: {exc}") from exc
    if len(data) < len(MAGIC) + 6 + 8 or _digest(data[:-8]) != data[-8:]:
        raise ChecksumMismatch(f"{path}: checksum does not match contents")
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    version, header_len = struct.unpack_from("<HI", data, 4)
    if version != VERSION:
        raise VersionMismatch(f"{path}: format version {version}, expected {VERSION}")
    offset = 10
    header = json.loads(data[offset:offset + header_len].decode("utf-8"))
    offset += header_len
    arrays = {}
    for entry in header["arrays"]:
        dtype = np.dtype(entry["dtype"])
        count = int(np.prod(entry["shape"], dtype=np.int64))
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=offset).reshape(entry["shape"])
        arrays[entry["name"]] = arr.astype(dtype.newbyteorder("="))
        offset += count * dtype.itemsize
    if offset != len(data) - 8:
        raise ChecksumMismatch(f"{path}: payload length disagrees with header")

    config = TrainConfig.from_dict(header["config"])
    if expect is not None and (expect.model != config.model or expect.dim != config.dim):
        raise VersionMismatch(
            f"{path}: checkpoint holds {config.model} k={config.dim}, expected {expect.model} k={expect.dim}"
        )
    table = _table_from("table", arrays, header["model"], header["modulus"])
    best = _table_from("best", arrays, header["model"], header["modulus"]) if header["best_step"] is not None else None
    opt = header["optimizer"]
    state = OptimizerState(
        m={k[len("adam_m."):]: v for k, v in arrays.items() if k.startswith("adam_m.")},
        v={k[len("adam_v."):]: v for k, v in arrays.items() if k.startswith("adam_v.")},
        step=opt["step"],
        beta1=opt["beta1"],
        beta2=opt["beta2"],
        eps=opt["eps"],
    )
    return Checkpoint(
        config=config,
        table=table,
        optimizer=state,
        step=header["step"],
        rng_state=header["rng_state"],
        history=header["history"],
        best=best,
        best_step=header["best_step"],
    )


def checkpoint_digest(cp: Checkpoint) -> str:
    """Hex digest over parameters, optimizer state and step; equal runs hash equal."""
    h = hashlib.sha256()
    h.update(json.dumps(cp.config.to_dict(), sort_keys=True).encode())
    h.update(str(cp.step).encode())
    for arrays in (cp.table.parameters(), cp.optimizer.m, cp.optimizer.v):
        for k in sorted(arrays):
            h.update(k.encode())
            h.update(np.ascontiguousarray(arrays[k]).tobytes())
    return h.hexdigest()
