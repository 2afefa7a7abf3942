"""Glue between perception, alignment, and the fusion head: turn raw
examples into refined descriptions, scene captions, phrases, and pooled
feature matrices for whichever model configuration a run asks for.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .alignment import (
    AlignmentResult,
    ProjectionParams,
    RefinedDescription,
    SceneCaption,
    align_example,
    refine_description,
    scene_caption,
)
from .backends import BackendBundle
from .config import TrainConfig
from .contracts import ImageRef, TextEncoder
from .dataset import Example, encode_label, resolve_image_path
from .faces import describe_image
from .fusion import (
    ConcatLinearModel,
    FusionModel,
    GatedFusionModel,
    GateParams,
    Prediction,
    SingleLinearModel,
    build_phrase,
    pool_phrase,
)


@dataclass(frozen=True)
class PreparedExample:
    """An example joined with its pipeline artifacts, ready for fusion."""

    id: str
    caption: str
    target: str
    label: int | None
    refined: str
    scene: str
    candidates: tuple[str, ...] = ()
    scores: tuple[float, ...] | None = None
    face_index: int | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "caption": self.caption,
            "target": self.target,
            "label": self.label,
            "refined": self.refined,
            "scene_caption": self.scene,
        }


def pipeline_structure(config: TrainConfig) -> dict:
    """Structural flags of the effective computation graph for a config."""
    modality = config.modality
    return {
        "modality": modality,
        "gating": modality != "caption_only" and "no_gating" not in config.ablation,
        "alignment": modality != "caption_only" and "no_alignment" not in config.ablation,
        "scene_caption": modality != "caption_only" and "no_scene_caption" not in config.ablation,
        "classifier": "single"
        if modality == "caption_only"
        else ("concat" if "no_gating" in config.ablation else "gated"),
        "phrase_count": 1 if modality == "caption_only" else 2,
    }


def prepare_example(
    example: Example,
    bundle: BackendBundle,
    config: TrainConfig,
    proj: ProjectionParams | None = None,
    images_root: Path | None = None,
    refined_override: str | None = None,
    scene_override: str | None = None,
) -> PreparedExample:
    """Run perception + alignment for one example.

    ``refined_override``/``scene_override`` reuse previously materialized
    stage outputs instead of re-running the backends. The caption-only
    modality skips perception entirely.
    """
    structure = pipeline_structure(config)
    label = encode_label(example.label)

    if config.modality == "caption_only":
        return PreparedExample(
            id=example.id, caption=example.caption, target=example.target,
            label=label, refined="", scene="",
        )

    candidates: tuple[str, ...] = ()
    scores: tuple[float, ...] | None = None
    face_index: int | None = None

    if refined_override is not None:
        refined_text = refined_override
    else:
        image = ImageRef(resolve_image_path(example.image_ref, images_root), id=example.id)
        descriptions = describe_image(
            image, bundle.face_detector, bundle.face_analyzer, config.alpha
        )
        if not structure["alignment"]:
            # Alignment ablated: the first face description wins outright.
            refined = (
                refine_description(descriptions[0], example.target)
                if descriptions
                else RefinedDescription(text="")
            )
            result = AlignmentResult(refined, [d.text for d in descriptions], None)
        else:
            result = align_example(
                example,
                descriptions,
                bundle.alignment_encoders,
                proj or ProjectionParams.identity(bundle.alignment_encoders.dim, config.align_dim, config.t),
                images_root=images_root,
            )
        refined_text = result.refined.text
        candidates = tuple(result.candidates)
        scores = tuple(result.scores) if result.scores is not None else None
        face_index = result.refined.source_face_index

    if not structure["scene_caption"]:
        scene_text = ""
    elif scene_override is not None:
        scene_text = scene_override
    else:
        image = ImageRef(resolve_image_path(example.image_ref, images_root), id=example.id)
        scene_text = scene_caption(image, bundle.captioner).text

    return PreparedExample(
        id=example.id,
        caption=example.caption,
        target=example.target,
        label=label,
        refined=refined_text,
        scene=scene_text,
        candidates=candidates,
        scores=scores,
        face_index=face_index,
    )


def prepare_split(
    examples: list[Example],
    bundle: BackendBundle,
    config: TrainConfig,
    proj: ProjectionParams | None = None,
    images_root: Path | None = None,
    refined_by_id: dict[str, str] | None = None,
    scene_by_id: dict[str, str] | None = None,
) -> list[PreparedExample]:
    return [
        prepare_example(
            ex,
            bundle,
            config,
            proj=proj,
            images_root=images_root,
            refined_override=(refined_by_id or {}).get(ex.id),
            scene_override=(scene_by_id or {}).get(ex.id),
        )
        for ex in examples
    ]


def phrases_for(prepared: PreparedExample, config: TrainConfig):
    """The phrase or phrase pair the configured model consumes."""
    if config.modality == "caption_only":
        return (build_phrase(prepared.caption, prepared.target, "", config.max_len),)
    caption = "" if config.modality == "visual_only" else prepared.caption
    scene = "" if "no_scene_caption" in config.ablation else prepared.scene
    return (
        build_phrase(caption, prepared.target, prepared.refined, config.max_len),
        build_phrase(caption, prepared.target, scene, config.max_len),
    )


@dataclass
class FeatureMatrix:
    """Pooled phrase vectors for a split; ``secondary`` is None for
    single-phrase configurations."""

    primary: np.ndarray  # (n, d)
    secondary: np.ndarray | None
    labels: np.ndarray  # (n,) int; -1 marks unlabeled rows
    ids: tuple[str, ...]


def pool_split(
    prepared: list[PreparedExample], bundle: BackendBundle, config: TrainConfig
) -> FeatureMatrix:
    primary_rows: list[np.ndarray] = []
    secondary_rows: list[np.ndarray] = []
    labels: list[int] = []
    ids: list[str] = []
    single = config.modality == "caption_only"
    for prep in prepared:
        phrases = phrases_for(prep, config)
        primary_rows.append(pool_phrase(phrases[0], bundle.text_encoder_dt))
        if not single:
            secondary_rows.append(pool_phrase(phrases[1], bundle.text_encoder_ic))
        labels.append(prep.label if prep.label is not None else -1)
        ids.append(prep.id)
    d = bundle.text_encoder_dt.dim
    return FeatureMatrix(
        primary=np.asarray(primary_rows).reshape(len(prepared), d),
        secondary=None if single else np.asarray(secondary_rows).reshape(len(prepared), d),
        labels=np.asarray(labels, dtype=int),
        ids=tuple(ids),
    )


def make_model(config: TrainConfig, rng: np.random.Generator) -> FusionModel:
    d = config.text_dim
    if config.modality == "caption_only":
        return SingleLinearModel.init(d, rng)
    if "no_gating" in config.ablation:
        return ConcatLinearModel.init(d, rng)
    return GatedFusionModel.init(d, rng, complement=config.gate_complement)


def forward(
    example: Example,
    refined: RefinedDescription | str,
    scene: SceneCaption | str,
    encoders: TextEncoder | tuple[TextEncoder, TextEncoder],
    params: GateParams | FusionModel,
    config: TrainConfig,
) -> Prediction:
    """Single-example inference: phrases -> pooled vectors -> fused
    prediction, honoring the config's modality and ablation flags."""
    refined_text = refined.text if isinstance(refined, RefinedDescription) else refined
    scene_text = scene.text if isinstance(scene, SceneCaption) else scene
    prep = PreparedExample(
        id=example.id,
        caption=example.caption,
        target=example.target,
        label=None,
        refined=refined_text,
        scene=scene_text,
    )
    enc_dt, enc_ic = encoders if isinstance(encoders, tuple) else (encoders, encoders)
    model = params if not isinstance(params, GateParams) else GatedFusionModel(
        params, complement=config.gate_complement
    )
    phrases = phrases_for(prep, config)
    o1 = pool_phrase(phrases[0], enc_dt).reshape(1, -1)
    o2 = pool_phrase(phrases[1], enc_ic).reshape(1, -1) if len(phrases) == 2 else None
    probs = model.forward(o1, o2)[0]
    return Prediction.from_probabilities(probs)
