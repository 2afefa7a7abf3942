"""Versioned binary checkpoint container.

Layout (all little-endian, fully deterministic byte-for-byte):

* magic ``b"VECTN001\\n"``
* uint32 header length, then that many bytes of UTF-8 JSON with sorted
  keys: ``{"arrays": [{"name", "shape", "dtype"}...], "backend": str,
  "config": {...}, "projection_t": float, "version": 1}``
* the arrays' raw C-order bytes, concatenated in the header's order.

The array list holds the model parameters (names from the model's
``arrays()`` mapping, sorted) followed by the alignment projection
matrices ``proj_v_desc`` and ``proj_v_image``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .alignment import ProjectionParams
from .config import TrainConfig
from .errors import CheckpointError
from .fusion import ConcatLinearModel, FusionModel, GatedFusionModel, GateParams, SingleLinearModel

MAGIC = b"VECTN001\n"
VERSION = 1


@dataclass
class Checkpoint:
    config: TrainConfig
    backend: str
    model: FusionModel
    projection: ProjectionParams


def _model_from_arrays(config: TrainConfig, arrays: dict[str, np.ndarray]) -> FusionModel:
    if config.modality == "caption_only":
        return SingleLinearModel(v=arrays["v"], b=arrays["b"])
    if "no_gating" in config.ablation:
        return ConcatLinearModel(w=arrays["w"], b=arrays["b"])
    return GatedFusionModel(
        GateParams(
            v_dt=arrays["v_dt"], v_ic=arrays["v_ic"], b_j=arrays["b_j"],
            v=arrays["v"], b=arrays["b"],
        ),
        complement=config.gate_complement,
    )


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    arrays: dict[str, np.ndarray] = {}
    for name, arr in sorted(ckpt.model.arrays().items()):
        arrays[f"model_{name}"] = arr
    arrays["proj_v_desc"] = ckpt.projection.v_desc
    arrays["proj_v_image"] = ckpt.projection.v_image

    header = {
        "arrays": [
            {"name": name, "shape": list(arr.shape), "dtype": "<f8"} for name, arr in arrays.items()
        ],
        "backend": ckpt.backend,
        "config": ckpt.config.to_dict(),
        "projection_t": ckpt.projection.t,
        "version": VERSION,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for arr in arrays.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> Checkpoint:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not blob.startswith(MAGIC):
        raise CheckpointError(f"{path} is not a checkpoint (bad magic)")
    offset = len(MAGIC)
    (header_len,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    try:
        header = json.loads(blob[offset : offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from exc
    offset += header_len
    if header.get("version") != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {header.get('version')}")

    arrays: dict[str, np.ndarray] = {}
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(blob):
            raise CheckpointError(f"{path}: truncated array data for {spec['name']!r}")
        arrays[spec["name"]] = np.frombuffer(
            blob, dtype="<f8", count=count, offset=offset
        ).reshape(shape).copy()
        offset += nbytes

    config = TrainConfig.from_dict(header["config"])
    model_arrays = {
        name.removeprefix("model_"): arr for name, arr in arrays.items() if name.startswith("model_")
    }
    try:
        model = _model_from_arrays(config, model_arrays)
        projection = ProjectionParams(
            v_desc=arrays["proj_v_desc"],
            v_image=arrays["proj_v_image"],
            t=float(header["projection_t"]),
        )
    except KeyError as exc:
        raise CheckpointError(f"{path}: missing array {exc}") from exc
    return Checkpoint(config=config, backend=header["backend"], model=model, projection=projection)
