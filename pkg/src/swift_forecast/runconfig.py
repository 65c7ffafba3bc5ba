"""Line-oriented key=value experiment configs.

Sections are key prefixes: ``data.``, ``model.``, ``train.``, ``out.``.
Unknown keys are rejected, parsing is order-insensitive, and
serialize(parse(text)) reproduces the canonical form exactly (sections in
data/model/train/out order, keys sorted inside each section, every value
explicit).  Lines starting with '#' and blank lines are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import ConfigError
from .model import ModelConfig
from .training import TrainConfig


def _parse_bool(key: str, raw: str) -> bool:
    if raw == "true":
        return True
    if raw == "false":
        return False
    raise ConfigError(f"{key} must be true or false, got '{raw}'")


def _fmt(val) -> str:
    if isinstance(val, bool):
        return "true" if val else "false"
    return repr(val) if isinstance(val, float) else str(val)


# key -> (cast, required)
_SCHEMA = {
    "data.path": (str, True),
    "data.split_scheme": (str, True),
    "model.lookback": (int, True),
    "model.horizon": (int, True),
    "model.kernel_size": (int, True),
    "model.head": (str, True),
    "model.head_mode": (str, True),
    "model.norm": (str, True),
    "model.wavelet": (str, True),
    "model.channels": (int, True),
    "model.mlp_hidden": (int, False),
    "model.per_channel_head": (_parse_bool, False),
    "model.dwt_bypass": (_parse_bool, False),
    "train.epochs": (int, False),
    "train.batch_size": (int, False),
    "train.max_lr": (float, False),
    "train.adam_beta1": (float, False),
    "train.adam_beta2": (float, False),
    "train.adam_eps": (float, False),
    "train.pct_start": (float, False),
    "train.div_factor": (float, False),
    "train.final_div_factor": (float, False),
    "train.seed": (int, False),
    "train.patience": (int, False),
    "out.dir": (str, True),
}

_SECTION_ORDER = ("data", "model", "train", "out")


@dataclass
class RunConfig:
    data_path: Optional[str]
    split_scheme: Optional[str]
    model: ModelConfig
    train: TrainConfig
    out_dir: Optional[str]


def parse_entries(text: str) -> dict:
    """Split config text into a validated key -> raw-string map."""
    entries: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, val = stripped.partition("=")
        key, val = key.strip(), val.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected key=value, got '{stripped}'")
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        entries[key] = val
    return entries


def _build(entries: dict, sections) -> RunConfig:
    def get(key):
        cast, required = _SCHEMA[key]
        raw = entries.get(key)
        if raw is None:
            if required and key.split(".", 1)[0] in sections:
                raise ConfigError(f"missing required key '{key}'")
            return None
        try:
            return cast(key, raw) if cast is _parse_bool else cast(raw)
        except ValueError:
            raise ConfigError(f"bad value for '{key}': '{raw}'") from None

    model_kwargs = {}
    for key in _SCHEMA:
        section, _, name = key.partition(".")
        if section != "model":
            continue
        val = get(key)
        if val is not None:
            model_kwargs[name] = val
    model = ModelConfig(**model_kwargs)

    train_kwargs = {}
    for key in _SCHEMA:
        section, _, name = key.partition(".")
        if section != "train":
            continue
        val = get(key)
        if val is not None:
            train_kwargs[name] = val
    train = TrainConfig(**train_kwargs)

    return RunConfig(
        data_path=get("data.path"),
        split_scheme=get("data.split_scheme"),
        model=model,
        train=train,
        out_dir=get("out.dir"),
    )


def parse_runconfig(text: str, sections=_SECTION_ORDER) -> RunConfig:
    """Parse config text; ``sections`` limits which required keys are
    enforced (the count command needs only the model section)."""
    return _build(parse_entries(text), sections)


def serialize_runconfig(rc: RunConfig) -> str:
    entries = {}
    if rc.data_path is not None:
        entries["data.path"] = rc.data_path
        entries["data.split_scheme"] = rc.split_scheme
    for key in _SCHEMA:
        section, _, name = key.partition(".")
        if section == "model":
            val = getattr(rc.model, name)
        elif section == "train":
            val = getattr(rc.train, name)
        else:
            continue
        if val is not None:
            entries[key] = _fmt(val)
    if rc.out_dir is not None:
        entries["out.dir"] = rc.out_dir
    lines = []
    for section in _SECTION_ORDER:
        for key in sorted(k for k in entries if k.startswith(section + ".")):
            lines.append(f"{key}={entries[key]}")
    return "\n".join(lines) + "\n"
