"""Binary checkpoint format.

Layout (all integers little-endian):

    magic "SWFT" | version u32 | config_len u32 | config utf-8 text
    | tensor_count u32
    | per tensor: name_len u32, name utf-8, rank u32, dims u64 each,
                  payload float64 little-endian
    | checksum u64 = FNV-1a over every preceding byte

The config block is canonical key=value text (sorted keys, one per line),
so identical state always produces identical bytes.  Tensors are written
in sorted-name order for the same reason.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .model import ModelConfig, SwiftModel, param_shapes

MAGIC = b"SWFT"
VERSION = 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK
    return h


def save_checkpoint(path, config_text: str, tensors: dict) -> None:
    """Serialize the config block and named float64 tensors."""
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", VERSION)
    cfg_bytes = config_text.encode("utf-8")
    blob += struct.pack("<I", len(cfg_bytes))
    blob += cfg_bytes
    blob += struct.pack("<I", len(tensors))
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f8")
        name_bytes = name.encode("utf-8")
        blob += struct.pack("<I", len(name_bytes))
        blob += name_bytes
        blob += struct.pack("<I", arr.ndim)
        blob += struct.pack(f"<{arr.ndim}Q", *arr.shape)
        blob += arr.tobytes()
    blob += struct.pack("<Q", fnv1a64(bytes(blob)))
    Path(path).write_bytes(bytes(blob))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError("checkpoint truncated")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]


def load_checkpoint(path):
    """Validate and parse; returns (config_text, tensors dict)."""
    buf = Path(path).read_bytes()
    if len(buf) < len(MAGIC) + 4 + 8:
        raise CheckpointError(f"'{path}' too short to be a checkpoint")
    body, stored = buf[:-8], struct.unpack("<Q", buf[-8:])[0]
    if fnv1a64(body) != stored:
        raise CheckpointError(f"'{path}' failed the checksum; file is corrupt")
    rd = _Reader(body)
    if rd.take(4) != MAGIC:
        raise CheckpointError(f"'{path}' has wrong magic bytes")
    version = rd.u32()
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    config_text = rd.take(rd.u32()).decode("utf-8")
    tensors = {}
    for _ in range(rd.u32()):
        name = rd.take(rd.u32()).decode("utf-8")
        if name in tensors:
            raise CheckpointError(f"duplicate tensor '{name}'")
        rank = rd.u32()
        dims = tuple(rd.u64() for _ in range(rank))
        count = 1
        for d in dims:
            count *= d
        payload = rd.take(8 * count)
        tensors[name] = np.frombuffer(payload, dtype="<f8").reshape(dims).copy()
    if rd.pos != len(body):
        raise CheckpointError(f"{len(body) - rd.pos} trailing bytes after tensor table")
    return config_text, tensors


# -- model-level wrappers ----------------------------------------------------

_MODEL_KEYS = (
    "lookback",
    "horizon",
    "kernel_size",
    "head",
    "head_mode",
    "norm",
    "wavelet",
    "channels",
    "mlp_hidden",
    "per_channel_head",
    "dwt_bypass",
)


def _config_lines(cfg: ModelConfig) -> dict:
    out = {}
    for key in _MODEL_KEYS:
        val = getattr(cfg, key)
        if val is None:
            continue
        out[f"model.{key}"] = str(val).lower() if isinstance(val, bool) else str(val)
    return out


def _parse_model_lines(entries: dict) -> ModelConfig:
    def want(key, cast, default=None):
        raw = entries.get(f"model.{key}")
        if raw is None:
            if default is not None or key == "mlp_hidden":
                return default
            raise CheckpointError(f"checkpoint config lacks model.{key}")
        if cast is bool:
            return raw == "true"
        return cast(raw)

    return ModelConfig(
        lookback=want("lookback", int),
        horizon=want("horizon", int),
        kernel_size=want("kernel_size", int),
        head=want("head", str),
        head_mode=want("head_mode", str),
        norm=want("norm", str),
        wavelet=want("wavelet", str),
        channels=want("channels", int),
        mlp_hidden=want("mlp_hidden", int),
        per_channel_head=want("per_channel_head", bool, False),
        dwt_bypass=want("dwt_bypass", bool, False),
    )


def save_model(path, model: SwiftModel, scaler=None, meta: dict | None = None) -> None:
    """Persist a model (plus optional scaler tensors and string metadata)."""
    entries = _config_lines(model.config)
    for key, val in (meta or {}).items():
        if key.split(".", 1)[0] == "model":
            raise CheckpointError(f"meta key '{key}' collides with the model section")
        entries[key] = str(val)
    config_text = "".join(f"{k}={entries[k]}\n" for k in sorted(entries))
    tensors = dict(model.params)
    if scaler is not None:
        tensors["scaler_mean"] = scaler.mean
        tensors["scaler_std"] = scaler.std
    save_checkpoint(path, config_text, tensors)


def load_model(path):
    """Returns (model, scaler or None, meta dict)."""
    from .data import Scaler  # local import to avoid a cycle

    config_text, tensors = load_checkpoint(path)
    entries = {}
    for line in config_text.splitlines():
        if line.strip():
            key, _, val = line.partition("=")
            entries[key] = val
    cfg = _parse_model_lines(entries)
    expected = param_shapes(cfg)
    params = {}
    for name, shape in expected.items():
        if name not in tensors:
            raise CheckpointError(f"tensor '{name}' required by the architecture is missing")
        if tensors[name].shape != shape:
            raise CheckpointError(
                f"tensor '{name}' has shape {tensors[name].shape}, architecture wants {shape}"
            )
        params[name] = tensors.pop(name)
    scaler = None
    if "scaler_mean" in tensors or "scaler_std" in tensors:
        try:
            scaler = Scaler(mean=tensors.pop("scaler_mean"), std=tensors.pop("scaler_std"))
        except KeyError:
            raise CheckpointError("scaler tensors must come in a mean/std pair") from None
    if tensors:
        raise CheckpointError(f"unexpected tensors in checkpoint: {sorted(tensors)}")
    meta = {k: v for k, v in entries.items() if not k.startswith("model.")}
    return SwiftModel(config=cfg, params=params), scaler, meta
