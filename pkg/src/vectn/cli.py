"""Command-line pipeline.

Stages write line-oriented JSON artifacts so every intermediate value can
be inspected and re-run: ``ingest -> faces -> caption -> align ->
train -> eval`` composes end-to-end, ``predict`` scores prepared records,
``ablate``/``multiseed`` build experiment tables, and ``report`` renders
figures plus a CSV summary from any metrics file.

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .alignment import ProjectionParams, align_example
from .backends import resolve_backend
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import PATH_KEYS, TrainConfig, load_config_file
from .contracts import ImageRef
from .dataset import (
    Example,
    Label,
    load_split,
    resolve_image_path,
    save_split,
)
from .errors import VectnError
from .faces import (
    FaceAttributes,
    analyze_attributes,
    detect_faces,
    filter_attributes,
    render_description,
)
from .fusion import Prediction
from .pipeline import PreparedExample, pool_split, prepare_split
from .report import render_report
from .training import evaluate, run_ablation, run_multi_seed, train

logger = logging.getLogger("vectn")


def _read_jsonl(path: Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise VectnError(f"{path}: line {lineno}: {exc}") from exc
    return records


def _write_jsonl(records: list[dict], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def _write_json(payload, path: Path) -> None:
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def _attributes_from_record(entry: dict) -> FaceAttributes:
    attrs = entry.get("attributes", {})
    sentiment = attrs.get("sentiment")
    return FaceAttributes(
        age=attrs.get("age"),
        gender=attrs.get("gender"),
        race=attrs.get("race"),
        sentiment=Label(sentiment) if sentiment is not None else None,
        confidence=entry.get("confidence", {}),
    )


def _images_root(args, examples_path: Path) -> Path:
    # Relative image refs resolve against the examples file's directory
    # unless overridden.
    return Path(args.images_root) if args.images_root else examples_path.parent


# ---------------------------------------------------------------------------
# Stage commands
# ---------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    examples = load_split(args.infile, format=args.format)
    save_split(examples, args.out)
    logger.info("wrote %d examples to %s", len(examples), args.out)
    return 0


def cmd_faces(args) -> int:
    config = _build_config(args)
    bundle = resolve_backend(config.backend, config=config)
    examples = load_split(args.infile, format="jsonl")
    root = _images_root(args, Path(args.infile))
    records = []
    for ex in examples:
        image = ImageRef(resolve_image_path(ex.image_ref, root), id=ex.id)
        faces = []
        try:
            regions = detect_faces(image, bundle.face_detector)
        except VectnError as exc:
            logger.warning("no faces for %s: %s", ex.id, exc)
            regions = []
        for region in regions:
            attrs = filter_attributes(
                analyze_attributes(region, bundle.face_analyzer), config.alpha
            )
            attributes = {
                name: (value.value if isinstance(value, Label) else value)
                for name in ("age", "gender", "race", "sentiment")
                if (value := getattr(attrs, name)) is not None
            }
            faces.append(
                {
                    "bbox": list(region.bbox),
                    "attributes": attributes,
                    "confidence": dict(attrs.confidence),
                }
            )
        records.append({"id": ex.id, "faces": faces})
    _write_jsonl(records, args.out)
    logger.info("wrote %d face records to %s", len(records), args.out)
    return 0


def cmd_caption(args) -> int:
    config = _build_config(args)
    bundle = resolve_backend(config.backend, config=config)
    examples = load_split(args.infile, format="jsonl")
    root = _images_root(args, Path(args.infile))
    records = []
    for ex in examples:
        image = ImageRef(resolve_image_path(ex.image_ref, root), id=ex.id)
        records.append({"id": ex.id, "scene_caption": bundle.captioner.caption(image)})
    _write_jsonl(records, args.out)
    logger.info("wrote %d captions to %s", len(records), args.out)
    return 0


def cmd_align(args) -> int:
    config = _build_config(args)
    bundle = resolve_backend(config.backend, config=config)
    examples = load_split(args.examples, format="jsonl")
    faces_by_id = {rec["id"]: rec for rec in _read_jsonl(Path(args.faces))}
    root = _images_root(args, Path(args.examples))
    proj = ProjectionParams.identity(config.align_dim, config.align_dim, config.t)

    records = []
    prepared_rows = []
    captions_by_id = (
        {rec["id"]: rec.get("scene_caption", "") for rec in _read_jsonl(Path(args.captions))}
        if args.captions
        else {}
    )
    for ex in examples:
        face_entries = faces_by_id.get(ex.id, {}).get("faces", [])
        descriptions = []
        for index, entry in enumerate(face_entries):
            desc = render_description(_attributes_from_record(entry), index)
            if desc is not None:
                descriptions.append(desc)
        result = align_example(ex, descriptions, bundle.alignment_encoders, proj, images_root=root)
        records.append(
            {
                "id": ex.id,
                "candidates": list(result.candidates),
                "scores": list(result.scores) if result.scores is not None else None,
                "refined": result.refined.text,
                "face_index": result.refined.source_face_index,
            }
        )
        if args.prepared_out:
            prepared_rows.append(
                {
                    "id": ex.id,
                    "caption": ex.caption,
                    "target": ex.target,
                    "label": ex.label.value,
                    "refined": result.refined.text,
                    "scene_caption": captions_by_id.get(ex.id, ""),
                }
            )
    _write_jsonl(records, args.out)
    logger.info("wrote %d alignments to %s", len(records), args.out)
    if args.prepared_out:
        _write_jsonl(prepared_rows, args.prepared_out)
        logger.info("wrote %d prepared records to %s", len(prepared_rows), args.prepared_out)
    return 0


def _load_overrides(path: str | None, field: str) -> dict[str, str] | None:
    if not path:
        return None
    return {rec["id"]: rec.get(field, "") or "" for rec in _read_jsonl(Path(path))}


def _holdout(examples: list[Example]) -> tuple[list[Example], list[Example]]:
    """Every 10th example becomes validation when no valid split is given."""
    valid = [ex for i, ex in enumerate(examples) if i % 10 == 9]
    train_part = [ex for i, ex in enumerate(examples) if i % 10 != 9]
    if not valid and examples:
        train_part, valid = examples[:-1], examples[-1:]
    return train_part, valid


def _train_inputs(args, paths: dict):
    train_path = args.train_examples or paths.get("train_examples")
    if not train_path:
        raise VectnError("no training examples given (--train-examples or config file)")
    train_path = Path(train_path)
    fmt = args.format or paths.get("format", "jsonl")
    train_examples = load_split(train_path, format=fmt)
    valid_path = args.valid_examples or paths.get("valid_examples")
    if valid_path:
        valid_examples = load_split(Path(valid_path), format=fmt)
    else:
        train_examples, valid_examples = _holdout(train_examples)
        logger.info(
            "no validation split given; holding out every 10th example (%d train / %d valid)",
            len(train_examples), len(valid_examples),
        )
    root = Path(args.images_root or paths.get("images_root") or train_path.parent)
    refined = _load_overrides(args.descriptions or paths.get("descriptions"), "refined")
    scenes = _load_overrides(args.captions or paths.get("captions"), "scene_caption")
    return train_examples, valid_examples, root, refined, scenes


def cmd_train(args) -> int:
    config, paths = _build_config_and_paths(args)
    train_examples, valid_examples, root, refined, scenes = _train_inputs(args, paths)
    result = train(
        config, train_examples, valid_examples,
        images_root=root, refined_by_id=refined, scene_by_id=scenes,
    )
    checkpoint_out = Path(args.checkpoint_out or paths.get("checkpoint_out", "checkpoint.vectn"))
    metrics_out = Path(args.metrics_out or paths.get("metrics_out", "metrics.json"))
    save_checkpoint(result.checkpoint, checkpoint_out)
    _write_json(result.metrics_dict(), metrics_out)
    logger.info(
        "trained %d epochs (best %d): valid accuracy %.4f macro-F1 %.4f",
        config.epochs, result.best_epoch,
        result.valid_metrics.accuracy, result.valid_metrics.macro_f1,
    )
    return 0


def cmd_eval(args) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    examples_path = Path(args.examples)
    examples = load_split(examples_path, format=args.format or "jsonl")
    root = _images_root(args, examples_path)
    refined = _load_overrides(args.descriptions, "refined")
    scenes = _load_overrides(args.captions, "scene_caption")
    metrics = evaluate(
        checkpoint, examples, images_root=root, refined_by_id=refined, scene_by_id=scenes
    )
    payload = {
        "variant": "eval",
        "seed": checkpoint.config.seed,
        **metrics.to_dict(),
        "epochs": [],
    }
    if args.metrics_out:
        _write_json(payload, Path(args.metrics_out))
    print(json.dumps({"accuracy": metrics.accuracy, "macro_f1": metrics.macro_f1}))
    return 0


def cmd_ablate(args) -> int:
    config, paths = _build_config_and_paths(args)
    train_examples, valid_examples, root, refined, scenes = _train_inputs(args, paths)
    eval_path = args.eval_examples or paths.get("eval_examples")
    eval_examples = (
        load_split(Path(eval_path), format=args.format or paths.get("format", "jsonl"))
        if eval_path
        else None
    )
    rows = run_ablation(
        config, train_examples, valid_examples, eval_split=eval_examples, images_root=root
    )
    metrics_out = Path(args.metrics_out or paths.get("metrics_out", "ablation.json"))
    _write_json(rows, metrics_out)
    for row in rows:
        logger.info(
            "%-18s accuracy %.4f macro-F1 %.4f", row["variant"], row["accuracy"], row["macro_f1"]
        )
    return 0


def cmd_multiseed(args) -> int:
    config, paths = _build_config_and_paths(args)
    train_examples, valid_examples, root, refined, scenes = _train_inputs(args, paths)
    eval_path = args.eval_examples or paths.get("eval_examples")
    eval_examples = (
        load_split(Path(eval_path), format=args.format or paths.get("format", "jsonl"))
        if eval_path
        else None
    )
    result = run_multi_seed(
        config, train_examples, valid_examples, eval_split=eval_examples,
        n_runs=args.runs, images_root=root,
    )
    metrics_out = Path(args.metrics_out or paths.get("metrics_out", "multiseed.json"))
    _write_json(result.to_dict(), metrics_out)
    if result.mean.get("n_runs"):
        logger.info(
            "mean over %d runs: accuracy %.4f macro-F1 %.4f",
            result.mean["n_runs"], result.mean["accuracy"], result.mean["macro_f1"],
        )
    return 0


def cmd_predict(args) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    config = checkpoint.config
    bundle = resolve_backend(checkpoint.backend, config=config)
    rows = _read_jsonl(Path(args.infile))
    prepared = [
        PreparedExample(
            id=str(row["id"]),
            caption=str(row["caption"]),
            target=str(row["target"]),
            label=None,
            refined=str(row.get("refined", "")),
            scene=str(row.get("scene_caption", "")),
        )
        for row in rows
    ]
    features = pool_split(prepared, bundle, config)
    probs = checkpoint.model.forward(features.primary, features.secondary)
    records = []
    for prep, p in zip(prepared, probs):
        prediction = Prediction.from_probabilities(p)
        records.append(
            {
                "id": prep.id,
                "probabilities": [float(x) for x in prediction.probabilities],
                "label": prediction.predicted.value,
            }
        )
    _write_jsonl(records, args.out)
    logger.info("wrote %d predictions to %s", len(records), args.out)
    return 0


def cmd_report(args) -> int:
    written = render_report(args.metrics, args.out_dir)
    for path in written:
        logger.info("wrote %s", path)
    return 0


# ---------------------------------------------------------------------------
# Configuration assembly: defaults < config file < VECTN_BACKEND < flags.
# ---------------------------------------------------------------------------

_CONFIG_FLAGS = (
    ("learning_rate", float),
    ("batch_size", int),
    ("dropout", float),
    ("epochs", int),
    ("alpha", float),
    ("t", float),
    ("max_len", int),
    ("seed", int),
    ("text_dim", int),
    ("align_dim", int),
    ("weight_decay", float),
)


def _build_config_and_paths(args) -> tuple[TrainConfig, dict]:
    kwargs: dict = {}
    paths: dict = {}
    if getattr(args, "config", None):
        kwargs, paths = load_config_file(args.config)
    env_backend = os.environ.get("VECTN_BACKEND")
    if env_backend:
        kwargs["backend"] = env_backend
    for name, _ in _CONFIG_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            kwargs[name] = value
    if getattr(args, "backend", None):
        kwargs["backend"] = args.backend
    if getattr(args, "modality", None):
        kwargs["modality"] = args.modality
    if getattr(args, "ablation", None):
        kwargs["ablation"] = frozenset(tok for tok in args.ablation.split(",") if tok)
    if getattr(args, "gate_complement", False):
        kwargs["gate_complement"] = True
    if getattr(args, "shared_encoder", False):
        kwargs["shared_encoder"] = True
    return TrainConfig(**kwargs), paths


def _build_config(args) -> TrainConfig:
    return _build_config_and_paths(args)[0]


def _add_config_flags(parser: argparse.ArgumentParser, training: bool = False) -> None:
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--backend", choices=("toy", "pretrained"), default=None)
    parser.add_argument("--alpha", type=float, default=None, help="attribute confidence threshold")
    if training:
        parser.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
        parser.add_argument("--batch-size", dest="batch_size", type=int, default=None)
        parser.add_argument("--dropout", type=float, default=None)
        parser.add_argument("--epochs", type=int, default=None)
        parser.add_argument("--max-len", dest="max_len", type=int, default=None)
        parser.add_argument("--seed", type=int, default=None)
        parser.add_argument("--weight-decay", dest="weight_decay", type=float, default=None)
        parser.add_argument("--modality", choices=("multimodal", "caption_only", "visual_only"), default=None)
        parser.add_argument("--ablation", default=None, help="comma-separated ablation flags")
        parser.add_argument("--gate-complement", action="store_true")
        parser.add_argument("--shared-encoder", action="store_true")
    parser.add_argument("--t", type=float, default=None, help="similarity scaling exponent")
    parser.add_argument("--d-align", dest="align_dim", type=int, default=None)
    parser.add_argument("--text-dim", dest="text_dim", type=int, default=None)


def _add_train_io_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--train-examples", help="training split (jsonl)")
    parser.add_argument("--valid-examples", help="validation split (jsonl)")
    parser.add_argument("--descriptions", help="precomputed descriptions.jsonl")
    parser.add_argument("--captions", help="precomputed captions.jsonl")
    parser.add_argument("--images-root", help="directory image refs resolve against")
    parser.add_argument("--format", choices=("jsonl", "fourline"), default=None)
    parser.add_argument("--metrics-out", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vectn",
        description="target-dependent multimodal sentiment pipeline",
    )
    parser.add_argument("--version", action="version", version=f"vectn {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="suppress progress logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize a dataset into the canonical jsonl schema")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--format", choices=("jsonl", "fourline"), default="jsonl")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("faces", help="detect faces and analyze filtered attributes")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--images-root", default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_faces)

    p = sub.add_parser("caption", help="generate scene captions")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--images-root", default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_caption)

    p = sub.add_parser("align", help="align face descriptions with targets")
    p.add_argument("--examples", required=True)
    p.add_argument("--faces", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--captions", default=None, help="captions.jsonl (for --prepared-out)")
    p.add_argument("--prepared-out", default=None, help="also write joined prepared.jsonl")
    p.add_argument("--images-root", default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("train", help="train the fusion head")
    _add_config_flags(p, training=True)
    _add_train_io_flags(p)
    p.add_argument("--checkpoint-out", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--examples", required=True)
    p.add_argument("--descriptions", default=None)
    p.add_argument("--captions", default=None)
    p.add_argument("--images-root", default=None)
    p.add_argument("--format", choices=("jsonl", "fourline"), default=None)
    p.add_argument("--metrics-out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run the four-variant ablation table")
    _add_config_flags(p, training=True)
    _add_train_io_flags(p)
    p.add_argument("--eval-examples", default=None)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("multiseed", help="average metrics over consecutive seeds")
    _add_config_flags(p, training=True)
    _add_train_io_flags(p)
    p.add_argument("--eval-examples", default=None)
    p.add_argument("--runs", type=int, default=5)
    p.set_defaults(func=cmd_multiseed)

    p = sub.add_parser("predict", help="score prepared records with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--in", dest="infile", required=True, help="prepared.jsonl")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("report", help="render figures and a CSV summary from metrics files")
    p.add_argument("--metrics", nargs="+", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def run_command(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except VectnError as exc:
        logger.error("%s", exc)
        return 1
    except OSError as exc:
        logger.error("%s", exc)
        return 1


def main() -> None:
    raise SystemExit(run_command())
