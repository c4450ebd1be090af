"""WXC1 on-disk checkpoint container.

Same envelope discipline as WXD1: magic, length-prefixed canonical-JSON
manifest, raw little-endian float32 tensor payloads in manifest order, and
a trailing u64 checksum over every preceding byte. The manifest records the
ParamSet fingerprint so a load can prove the payload is the advertised one,
and enough training state (Adam moments, step counters) that a resumed run
reproduces the uninterrupted run bit-exactly.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ioutil import (BadMagicError, FormatError, canonical_json, read_exact,
                     verify_trailing_checksum)
from .nn.models import ModelConfig
from .nn.params import ParamSet
from .optim import AdamState, TrainConfig

MAGIC = b"WXC1"


class ManifestError(FormatError):
    """Manifest and payload disagree (shapes, fingerprints)."""


@dataclass
class Checkpoint:
    params: ParamSet
    model_config: ModelConfig
    train_config: TrainConfig | None = None
    opt: AdamState | None = None
    epoch: int = 0
    step: int = 0
    extra: dict = field(default_factory=dict)


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    tensors = []
    payloads = []

    def add(section: str, name: str, arr: np.ndarray):
        if arr.dtype != np.float32:
            raise FormatError(f"checkpoint tensors must be float32, got {arr.dtype} for {name!r}")
        tensors.append({"section": section, "name": name, "shape": list(arr.shape), "dtype": "f4"})
        payloads.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())

    for n, a in ckpt.params.items():
        add("param", n, a)
    if ckpt.opt is not None:
        for n, a in ckpt.opt.m.items():
            add("adam_m", n, a)
        for n, a in ckpt.opt.v.items():
            add("adam_v", n, a)

    manifest = canonical_json({
        "format_version": 1,
        "role": ckpt.params.role,
        "model_config": ckpt.model_config.to_json_obj(),
        "train_config": ckpt.train_config.to_json_obj() if ckpt.train_config else None,
        "epoch": ckpt.epoch,
        "step": ckpt.step,
        "adam_t": ckpt.opt.t if ckpt.opt else None,
        "extra": ckpt.extra,
        "tensors": tensors,
        "fingerprints": {"params": f"{ckpt.params.fingerprint():016x}"},
    })
    hasher = hashlib.blake2b(digest_size=8)
    with open(path, "wb") as f:
        def put(b: bytes):
            hasher.update(b)
            f.write(b)

        put(MAGIC)
        put(struct.pack("<I", len(manifest)))
        put(manifest)
        for b in payloads:
            put(b)
        f.write(hasher.digest())


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    with open(path, "rb") as f:
        magic = read_exact(f, 4, "magic")
        if magic != MAGIC:
            raise BadMagicError(f"not a WXC1 file: magic {magic!r}")
        (mlen,) = struct.unpack("<I", read_exact(f, 4, "manifest length"))
        try:
            manifest = json.loads(read_exact(f, mlen, "manifest"))
        except (ValueError, UnicodeDecodeError) as e:
            raise FormatError(f"bad manifest JSON: {e}") from None

        body_len = 8 + mlen + sum(
            int(np.prod(t["shape"])) * 4 for t in manifest["tensors"])
        f.seek(0, 2)
        actual = f.tell()
        if actual < body_len + 8:
            raise FormatError(f"file is {actual} bytes, expected {body_len + 8}")
        if actual > body_len + 8:
            raise FormatError(f"{actual - body_len - 8} unexpected trailing bytes")
        verify_trailing_checksum(f, body_len)

        f.seek(8 + mlen)
        sections: dict[str, dict[str, np.ndarray]] = {"param": {}, "adam_m": {}, "adam_v": {}}
        for t in manifest["tensors"]:
            if t["dtype"] != "f4":
                raise ManifestError(f"unsupported tensor dtype {t['dtype']!r}")
            n_el = int(np.prod(t["shape"]))
            buf = read_exact(f, n_el * 4, f"tensor {t['name']!r}")
            arr = np.frombuffer(buf, dtype="<f4").reshape(t["shape"]).copy()
            sections[t["section"]][t["name"]] = arr

    params = ParamSet(manifest["role"], sections["param"])
    want = manifest["fingerprints"]["params"]
    got = f"{params.fingerprint():016x}"
    if want != got:
        raise ManifestError(f"parameter fingerprint mismatch: manifest {want}, payload {got}")

    opt = None
    if manifest.get("adam_t") is not None:
        if sections["adam_m"].keys() != sections["param"].keys():
            raise ManifestError("Adam moment tensors do not mirror the parameters")
        opt = AdamState(m=sections["adam_m"], v=sections["adam_v"], t=int(manifest["adam_t"]))

    return Checkpoint(
        params=params,
        model_config=ModelConfig.from_json_obj(manifest["model_config"]),
        train_config=TrainConfig.from_json_obj(manifest["train_config"]) if manifest["train_config"] else None,
        opt=opt,
        epoch=int(manifest["epoch"]),
        step=int(manifest["step"]),
        extra=manifest.get("extra", {}),
    )
