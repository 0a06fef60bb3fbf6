"""Binary checkpoint container with an integrity hash.

Layout (integers little-endian)::

    magic        8 bytes   b"JGCKPT\\0\\0"
    version      uint32    1
    header_len   uint64    byte length of the JSON header
    header       UTF-8 JSON, keys sorted:
                   model_config, step, vocab_fingerprint, meta,
                   arrays: [{name, dtype, shape, offset, nbytes}, ...]
    payload      raw little-endian array bytes at the listed offsets
    digest       32 bytes  sha256 of every preceding byte

Array names are prefixed ``param/``, ``adam_m/`` or ``adam_v/``.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import struct
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from javagen.model import ModelConfig

MAGIC = b"JGCKPT\x00\x00"
VERSION = 1
_DIGEST_LEN = 32


class CorruptCheckpoint(ValueError):
    pass


@dataclass
class Checkpoint:
    model_config: ModelConfig
    params: Dict[str, np.ndarray]
    adam_m: Dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    vocab_fingerprint: str = ""
    meta: dict = field(default_factory=dict)

    def _named_arrays(self):
        for prefix, group in (("param", self.params), ("adam_m", self.adam_m), ("adam_v", self.adam_v)):
            for name in sorted(group):
                yield f"{prefix}/{name}", group[name]

    def identical_to(self, other: "Checkpoint") -> bool:
        """Bit-level equality of every array plus the scalar fields."""
        if (self.model_config, self.step, self.vocab_fingerprint) != (
            other.model_config,
            other.step,
            other.vocab_fingerprint,
        ):
            return False
        mine = dict(self._named_arrays())
        theirs = dict(other._named_arrays())
        if mine.keys() != theirs.keys():
            return False
        return all(
            a.dtype == theirs[k].dtype and a.shape == theirs[k].shape and a.tobytes() == theirs[k].tobytes()
            for k, a in mine.items()
        )


def dumps(ckpt: Checkpoint) -> bytes:
    index = []
    payload = io.BytesIO()
    for name, arr in ckpt._named_arrays():
        a = np.ascontiguousarray(arr)
        a = a.astype(a.dtype.newbyteorder("<"), copy=False)
        data = a.tobytes()
        index.append(
            {"name": name, "dtype": a.dtype.str, "shape": list(a.shape), "offset": payload.tell(), "nbytes": len(data)}
        )
        payload.write(data)
    header = json.dumps(
        {
            "model_config": ckpt.model_config.to_dict(),
            "step": ckpt.step,
            "vocab_fingerprint": ckpt.vocab_fingerprint,
            "meta": ckpt.meta,
            "arrays": index,
        },
        sort_keys=True,
    ).encode("utf-8")
    body = MAGIC + struct.pack("<IQ", VERSION, len(header)) + header + payload.getvalue()
    return body + hashlib.sha256(body).digest()


def loads(blob: bytes) -> Checkpoint:
    if len(blob) < len(MAGIC) + 12 + _DIGEST_LEN:
        raise CorruptCheckpoint("file too short to be a checkpoint")
    body, digest = blob[:-_DIGEST_LEN], blob[-_DIGEST_LEN:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptCheckpoint("integrity hash mismatch")
    if body[:8] != MAGIC:
        raise CorruptCheckpoint("bad magic")
    version, header_len = struct.unpack("<IQ", body[8:20])
    if version != VERSION:
        raise CorruptCheckpoint(f"unsupported checkpoint version {version}")
    header = json.loads(body[20:20 + header_len].decode("utf-8"))
    payload = memoryview(body)[20 + header_len:]
    groups: Dict[str, Dict[str, np.ndarray]] = {"param": {}, "adam_m": {}, "adam_v": {}}
    for entry in header["arrays"]:
        prefix, name = entry["name"].split("/", 1)
        raw = payload[entry["offset"]:entry["offset"] + entry["nbytes"]]
        arr = np.frombuffer(raw, dtype=np.dtype(entry["dtype"])).reshape(entry["shape"]).copy()
        groups[prefix][name] = arr
    return Checkpoint(
        model_config=ModelConfig.from_dict(header["model_config"]),
        params=groups["param"],
        adam_m=groups["adam_m"],
        adam_v=groups["adam_v"],
        step=int(header["step"]),
        vocab_fingerprint=header["vocab_fingerprint"],
        meta=header["meta"],
    )


def save(ckpt: Checkpoint, path) -> None:
    """Write atomically: a crash never leaves a half-written file at ``path``."""
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(dumps(ckpt))
    os.replace(tmp, path)


def load(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return loads(fh.read())
