"""Run configuration and the flat key=value config-file format.

Config files carry one ``key=value`` pair per line with ``#`` comments.
Keys mirror :class:`TrainConfig` fields; a handful of extra keys name
input/output artifacts so a whole run can live in one file. Every key is
overridable on the command line.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .errors import TrainingError

ABLATION_FLAGS = frozenset({"no_gating", "no_alignment", "no_scene_caption"})
MODALITIES = ("multimodal", "caption_only", "visual_only")
BACKENDS = ("toy", "pretrained")

# Non-TrainConfig keys a config file may carry (data and artifact paths).
PATH_KEYS = (
    "train_examples",
    "valid_examples",
    "eval_examples",
    "descriptions",
    "captions",
    "valid_descriptions",
    "valid_captions",
    "eval_descriptions",
    "eval_captions",
    "images_root",
    "checkpoint_out",
    "metrics_out",
    "format",
)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 2e-5
    batch_size: int = 32
    dropout: float = 0.4
    epochs: int = 15
    alpha: float = 0.5
    t: float = 4.6
    max_len: int = 128
    seed: int = 0
    ablation: frozenset[str] = frozenset()
    modality: str = "multimodal"
    backend: str = "toy"
    # Extras beyond the core hyperparameters:
    text_dim: int = 768
    align_dim: int = 512
    weight_decay: float = 0.01
    gate_complement: bool = False
    shared_encoder: bool = False

    def __post_init__(self) -> None:
        if not (0.0 <= self.dropout < 1.0):
            raise TrainingError(f"dropout must be in [0, 1): {self.dropout}")
        if self.epochs < 1:
            raise TrainingError(f"epochs must be >= 1: {self.epochs}")
        if self.batch_size < 1:
            raise TrainingError(f"batch_size must be >= 1: {self.batch_size}")
        if not (0.0 <= self.alpha <= 1.0):
            raise TrainingError(f"alpha must be in [0, 1]: {self.alpha}")
        if self.max_len < 5:
            raise TrainingError(f"max_len must leave room for the markers: {self.max_len}")
        unknown = set(self.ablation) - ABLATION_FLAGS
        if unknown:
            raise TrainingError(f"unknown ablation flags: {sorted(unknown)}")
        if self.modality not in MODALITIES:
            raise TrainingError(f"unknown modality: {self.modality!r}")
        if self.backend not in BACKENDS:
            raise TrainingError(f"unknown backend: {self.backend!r}")

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["ablation"] = sorted(self.ablation)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        kwargs = dict(d)
        if "ablation" in kwargs:
            kwargs["ablation"] = frozenset(kwargs["ablation"])
        return cls(**kwargs)


_BOOL_TOKENS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _coerce(name: str, raw: str):
    f = {fld.name: fld for fld in dataclasses.fields(TrainConfig)}.get(name)
    if f is None:
        raise TrainingError(f"unknown config key: {name!r}")
    if f.type in ("float", float):
        return float(raw)
    if f.type in ("int", int):
        return int(raw)
    if f.type in ("bool", bool):
        try:
            return _BOOL_TOKENS[raw.strip().lower()]
        except KeyError:
            raise TrainingError(f"bad boolean for {name!r}: {raw!r}") from None
    if name == "ablation":
        return frozenset(tok.strip() for tok in raw.split(",") if tok.strip())
    return raw


def parse_config_text(text: str) -> tuple[dict, dict]:
    """Parse key=value lines into (TrainConfig kwargs, path entries)."""
    config_kwargs: dict = {}
    paths: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise TrainingError(f"config line {lineno}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key in PATH_KEYS:
            paths[key] = raw
        else:
            config_kwargs[key] = _coerce(key, raw)
    return config_kwargs, paths


def load_config_file(path: str | Path) -> tuple[dict, dict]:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))
