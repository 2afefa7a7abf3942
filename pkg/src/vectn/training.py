"""Training and evaluation harness: mini-batch training of the fusion
head with a decoupled-weight-decay Adam optimizer, accuracy/macro-F1
evaluation, multi-seed averaging, and the four-variant ablation table.

A run is deterministic given its config (seed included): parameter init,
shuffling, and dropout all draw from one seeded generator in a fixed
order, and evaluation consumes no randomness.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .alignment import ProjectionParams
from .backends import BackendBundle, resolve_backend
from .checkpoint import Checkpoint
from .config import TrainConfig
from .dataset import Example
from .errors import TrainingError
from .fusion import FusionModel, _dropout_mask
from .metrics import Metrics, compute_metrics
from .pipeline import FeatureMatrix, make_model, pipeline_structure, pool_split, prepare_split

logger = logging.getLogger(__name__)

ABLATION_VARIANTS = ("full", "no_gating", "no_alignment", "no_scene_caption")


class AdamW:
    """Adam with decoupled weight decay over a dict of parameter arrays."""

    def __init__(
        self,
        params: dict[str, np.ndarray],
        lr: float,
        weight_decay: float = 0.01,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.params = params
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self._m = {k: np.zeros_like(v) for k, v in params.items()}
        self._v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.step_count += 1
        bc1 = 1.0 - self.beta1**self.step_count
        bc2 = 1.0 - self.beta2**self.step_count
        for name, p in self.params.items():
            g = grads[name]
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            # Decoupled decay: both terms scale with lr, so lr=0 is a no-op.
            p -= self.lr * (update + self.weight_decay * p)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    valid_accuracy: float
    valid_macro_f1: float

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "valid_accuracy": self.valid_accuracy,
            "valid_macro_f1": self.valid_macro_f1,
        }


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    epochs: list[EpochRecord]
    best_epoch: int
    valid_metrics: Metrics
    variant: str = "full"

    def metrics_dict(self) -> dict:
        return {
            "variant": self.variant,
            "seed": self.checkpoint.config.seed,
            **self.valid_metrics.to_dict(),
            "epochs": [rec.to_dict() for rec in self.epochs],
        }


def _predict_matrix(model: FusionModel, features: FeatureMatrix) -> np.ndarray:
    probs = model.forward(features.primary, features.secondary)
    return probs


def _evaluate_features(model: FusionModel, features: FeatureMatrix) -> Metrics:
    if features.primary.shape[0] == 0:
        raise TrainingError("cannot evaluate an empty split")
    probs = _predict_matrix(model, features)
    predicted = np.argmax(probs, axis=1)
    return compute_metrics(features.labels, predicted)


def _features(
    examples: list[Example],
    bundle: BackendBundle,
    config: TrainConfig,
    proj: ProjectionParams,
    images_root: Path | None,
    refined_by_id: dict[str, str] | None = None,
    scene_by_id: dict[str, str] | None = None,
) -> FeatureMatrix:
    prepared = prepare_split(
        examples, bundle, config, proj=proj, images_root=images_root,
        refined_by_id=refined_by_id, scene_by_id=scene_by_id,
    )
    return pool_split(prepared, bundle, config)


def train(
    config: TrainConfig,
    train_split: list[Example],
    valid_split: list[Example],
    backends: BackendBundle | None = None,
    images_root: Path | None = None,
    refined_by_id: dict[str, str] | None = None,
    scene_by_id: dict[str, str] | None = None,
    variant: str = "full",
) -> TrainResult:
    """Mini-batch training of the fusion head on precomputed pooled
    features; retains the checkpoint of the best validation macro-F1."""
    if not train_split or not valid_split:
        raise TrainingError("train and valid splits must be non-empty")
    bundle = backends or resolve_backend(config.backend, config=config)
    proj = ProjectionParams.identity(config.align_dim, config.align_dim, config.t)

    train_features = _features(
        train_split, bundle, config, proj, images_root, refined_by_id, scene_by_id
    )
    valid_features = _features(
        valid_split, bundle, config, proj, images_root, refined_by_id, scene_by_id
    )

    rng = np.random.default_rng(config.seed)
    model = make_model(config, rng)
    optimizer = AdamW(model.arrays(), lr=config.learning_rate, weight_decay=config.weight_decay)

    n = train_features.primary.shape[0]
    d = train_features.primary.shape[1]
    dropout_width = 2 * d if model.kind == "concat" else d
    best_macro_f1 = -1.0
    best_epoch = -1
    best_arrays: dict[str, np.ndarray] = {k: v.copy() for k, v in model.arrays().items()}
    records: list[EpochRecord] = []

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        losses: list[float] = []
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            if idx.size == 0:
                raise TrainingError("empty batch")
            o1 = train_features.primary[idx]
            o2 = train_features.secondary[idx] if train_features.secondary is not None else None
            mask = (
                _dropout_mask((idx.size, dropout_width), config.dropout, rng)
                if config.dropout > 0.0
                else None
            )
            loss, grads = model.loss_and_grads(o1, o2, train_features.labels[idx], dropout=mask)
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}"
                )
            optimizer.step(grads)
            losses.append(loss)
        valid_metrics = _evaluate_features(model, valid_features)
        records.append(
            EpochRecord(
                epoch=epoch,
                train_loss=float(np.mean(losses)),
                valid_accuracy=valid_metrics.accuracy,
                valid_macro_f1=valid_metrics.macro_f1,
            )
        )
        if valid_metrics.macro_f1 > best_macro_f1:
            best_macro_f1 = valid_metrics.macro_f1
            best_epoch = epoch
            best_arrays = {k: v.copy() for k, v in model.arrays().items()}

    # Restore the best-validation parameters in place.
    for name, arr in model.arrays().items():
        arr[...] = best_arrays[name]
    final_metrics = _evaluate_features(model, valid_features)
    ckpt = Checkpoint(config=config, backend=bundle.name, model=model, projection=proj)
    return TrainResult(
        checkpoint=ckpt,
        epochs=records,
        best_epoch=best_epoch,
        valid_metrics=final_metrics,
        variant=variant,
    )


def evaluate(
    checkpoint: Checkpoint,
    split: list[Example],
    backends: BackendBundle | None = None,
    images_root: Path | None = None,
    refined_by_id: dict[str, str] | None = None,
    scene_by_id: dict[str, str] | None = None,
) -> Metrics:
    """Accuracy and macro-F1 of a trained checkpoint over a split,
    preprocessing with the checkpoint's own config."""
    if not split:
        raise TrainingError("cannot evaluate an empty split")
    config = checkpoint.config
    bundle = backends or resolve_backend(checkpoint.backend, config=config)
    features = _features(
        split, bundle, config, checkpoint.projection, images_root, refined_by_id, scene_by_id
    )
    return _evaluate_features(checkpoint.model, features)


@dataclass
class MultiSeedResult:
    runs: list[dict]  # per-seed metrics dicts; failures carry an "error" key
    mean: dict

    def to_dict(self) -> dict:
        return {"runs": self.runs, "mean": self.mean}


def run_multi_seed(
    config: TrainConfig,
    train_split: list[Example],
    valid_split: list[Example],
    eval_split: list[Example] | None = None,
    backends: BackendBundle | None = None,
    n_runs: int = 5,
    images_root: Path | None = None,
) -> MultiSeedResult:
    """Train with seeds seed, seed+1, ... and average the metrics."""
    if n_runs < 1:
        raise TrainingError(f"n_runs must be >= 1: {n_runs}")
    runs: list[dict] = []
    for i in range(n_runs):
        run_config = config.replace(seed=config.seed + i)
        try:
            result = train(run_config, train_split, valid_split, backends, images_root=images_root)
            metrics = (
                evaluate(result.checkpoint, eval_split, backends, images_root=images_root)
                if eval_split
                else result.valid_metrics
            )
            runs.append({"variant": result.variant, "seed": run_config.seed, **metrics.to_dict()})
        except Exception as exc:  # noqa: BLE001 - partial reports flag failures
            logger.warning("seed %d run failed: %s", run_config.seed, exc)
            runs.append({"seed": run_config.seed, "error": str(exc)})
    ok = [r for r in runs if "error" not in r]
    if ok:
        mean = {
            "accuracy": float(np.mean([r["accuracy"] for r in ok])),
            "macro_f1": float(np.mean([r["macro_f1"] for r in ok])),
            "per_class_f1": [
                float(np.mean([r["per_class_f1"][k] for r in ok])) for k in range(3)
            ],
            "n_runs": len(ok),
        }
    else:
        mean = {"n_runs": 0}
    return MultiSeedResult(runs=runs, mean=mean)


def variant_config(base_config: TrainConfig, variant: str) -> TrainConfig:
    if variant == "full":
        return base_config.replace(ablation=frozenset())
    if variant not in ABLATION_VARIANTS:
        raise TrainingError(f"unknown ablation variant: {variant!r}")
    return base_config.replace(ablation=frozenset({variant}))


def run_ablation(
    base_config: TrainConfig,
    train_split: list[Example],
    valid_split: list[Example],
    eval_split: list[Example] | None = None,
    backends: BackendBundle | None = None,
    images_root: Path | None = None,
) -> list[dict]:
    """Train and evaluate the full model plus the three single-component
    ablations; exactly four rows, each carrying its structural flags."""
    rows: list[dict] = []
    for variant in ABLATION_VARIANTS:
        config = variant_config(base_config, variant)
        result = train(
            config, train_split, valid_split, backends, images_root=images_root, variant=variant
        )
        metrics = (
            evaluate(result.checkpoint, eval_split, backends, images_root=images_root)
            if eval_split
            else result.valid_metrics
        )
        rows.append(
            {
                "variant": variant,
                "seed": config.seed,
                **metrics.to_dict(),
                "structure": pipeline_structure(config),
                "epochs": [rec.to_dict() for rec in result.epochs],
            }
        )
    return rows
