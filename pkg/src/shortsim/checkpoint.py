"""Checkpoint container: JSON header line + raw little-endian float32.

Layout on disk:

    {"format": "shortsim-checkpoint", "version": 1, "dtype": "<f4",
     "tensors": [{"name": ..., "shape": [...], "offset": ...}, ...],
     "payload_bytes": N}\n
    <N bytes of concatenated tensor data, canonical order>

plus a sidecar ``<path>.config.json`` holding the architecture settings.
Offsets are bytes from the start of the payload.  Saving the same
parameters twice yields byte-identical files.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .encoder import EncoderConfig, EncoderParams, param_shapes
from .errors import CheckpointWriteFailed, ConfigMismatch, CorruptCheckpoint

_FORMAT = "shortsim-checkpoint"
_DTYPE = "<f4"


def config_sidecar_path(path: str) -> str:
    return path + ".config.json"


def save_checkpoint(params: EncoderParams, cfg: EncoderConfig,
                    path: str) -> None:
    params.validate_shapes(cfg)
    entries = []
    chunks = []
    offset = 0
    for name in param_shapes(cfg):
        data = np.ascontiguousarray(params[name], dtype=_DTYPE).tobytes()
        entries.append({"name": name,
                        "shape": list(params[name].shape),
                        "offset": offset})
        chunks.append(data)
        offset += len(data)
    header = json.dumps(
        {"format": _FORMAT, "version": 1, "dtype": _DTYPE,
         "tensors": entries, "payload_bytes": offset},
        sort_keys=True, ensure_ascii=True)
    try:
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii") + b"\n")
            for chunk in chunks:
                fh.write(chunk)
        with open(config_sidecar_path(path), "w", encoding="utf-8",
                  newline="\n") as fh:
            json.dump(cfg.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise CheckpointWriteFailed(f"cannot write checkpoint {path}: {exc}") \
            from exc


def load_checkpoint(path: str) -> tuple[EncoderParams, EncoderConfig]:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line.decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpoint(f"{path}: unreadable header") from exc
    if header.get("format") != _FORMAT or header.get("dtype") != _DTYPE:
        raise CorruptCheckpoint(f"{path}: unknown container format")
    if header.get("payload_bytes") != len(payload):
        raise CorruptCheckpoint(
            f"{path}: payload is {len(payload)} bytes, header promises "
            f"{header.get('payload_bytes')}")

    itemsize = np.dtype(_DTYPE).itemsize
    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        name, shape, offset = entry["name"], tuple(entry["shape"]), entry["offset"]
        nbytes = int(np.prod(shape)) * itemsize if shape else itemsize
        if offset + nbytes > len(payload):
            raise CorruptCheckpoint(f"{path}: tensor {name!r} overruns payload")
        flat = np.frombuffer(payload, dtype=_DTYPE, count=int(np.prod(shape)),
                             offset=offset)
        tensors[name] = flat.reshape(shape).copy()

    cfg_path = config_sidecar_path(path)
    if not os.path.exists(cfg_path):
        raise CorruptCheckpoint(f"missing config sidecar {cfg_path}")
    with open(cfg_path, encoding="utf-8") as fh:
        cfg = EncoderConfig.from_dict(json.load(fh))

    expected = param_shapes(cfg)
    got = {k: v.shape for k, v in tensors.items()}
    if got != expected:
        raise ConfigMismatch(
            f"{path}: tensor shapes do not match the sidecar configuration")
    return EncoderParams(tensors), cfg


def checkpoint_roundtrip(params: EncoderParams, cfg: EncoderConfig,
                         path: str) -> tuple[EncoderParams, EncoderConfig]:
    """Save then reload; the reloaded tensors are bit-identical."""
    save_checkpoint(params, cfg, path)
    return load_checkpoint(path)
