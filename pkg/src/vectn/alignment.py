"""Target alignment: rank candidate face descriptions against the image
with projected, L2-normalized, exponentially-scaled similarity, refine
the winner down to "<target> exhibits a[n] <sentiment> expression", and
generate a scene caption for the whole image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contracts import AlignmentEncoders, Captioner, ImageRef
from .dataset import Example, Label
from .errors import EncoderError
from .faces import FaceDescription, indefinite_article


@dataclass
class ProjectionParams:
    """Projection matrices into the shared alignment space plus the
    exponential scaling factor applied to cosine scores.

    Kept frozen during training: the description selection is a discrete
    argmax, so the classification loss provides no usable gradient here.
    They are still persisted in checkpoints.
    """

    v_desc: np.ndarray  # (d_e, d_a), projects description embeddings
    v_image: np.ndarray  # (d_e, d_a), projects image embeddings
    t: float = 4.6

    @classmethod
    def identity(cls, d_e: int = 512, d_a: int = 512, t: float = 4.6) -> "ProjectionParams":
        """Identity-padded default: eye(d_e, d_a)."""
        return cls(v_desc=np.eye(d_e, d_a), v_image=np.eye(d_e, d_a), t=t)

    def __post_init__(self) -> None:
        if self.v_desc.shape != self.v_image.shape or self.v_desc.ndim != 2:
            raise EncoderError(
                f"projection shapes disagree: {self.v_desc.shape} vs {self.v_image.shape}"
            )
        if self.v_desc.shape[1] < 1:
            raise EncoderError("alignment dimension must be >= 1")
        if not (np.isfinite(self.v_desc).all() and np.isfinite(self.v_image).all()):
            raise EncoderError("projection matrices must be finite")


@dataclass(frozen=True)
class RefinedDescription:
    """The target-aligned emotional description fed into fusion.

    Degenerate inputs (no sentiment-bearing face) yield empty text with
    both optional fields None.
    """

    text: str
    source_face_index: int | None = None
    sentiment: Label | None = None


@dataclass(frozen=True)
class SceneCaption:
    text: str


def encode_description_with_target(
    description: FaceDescription, target: str, enc: AlignmentEncoders
) -> np.ndarray:
    """Encode the space-joined concatenation "<description> <target>"."""
    if not description.text or not target:
        raise EncoderError("description text and target must be non-empty")
    return enc.encode_text(f"{description.text} {target}")


def project_normalize(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Project ``v`` through ``w`` and L2-normalize the result.

    Exactly invariant to positive scaling of ``v``.
    """
    projected = np.asarray(v) @ np.asarray(w)
    norm = float(np.linalg.norm(projected))
    if norm == 0.0:
        raise EncoderError("projected embedding is the zero vector")
    return projected / norm


def score_descriptions(
    image_unit: np.ndarray, desc_units: list[np.ndarray], t: float
) -> list[float]:
    """Scaled cosine scores: dot(image, desc_k) * e^t for unit vectors."""
    scale = float(np.exp(t))
    scores: list[float] = []
    for k, d in enumerate(desc_units):
        if d.shape != image_unit.shape:
            raise EncoderError(
                f"description vector {k} has shape {d.shape}, expected {image_unit.shape}"
            )
        scores.append(float(np.dot(image_unit, d)) * scale)
    return scores


def select_description(scores: list[float]) -> int:
    """Argmax index; ties break toward the lowest index."""
    if not scores:
        raise EncoderError("cannot select from an empty score list")
    best = 0
    for k, s in enumerate(scores):
        if s > scores[best]:
            best = k
    return best


def refine_description(description: FaceDescription, target: str) -> RefinedDescription:
    """Rewrite a face description to contain only the target and its
    expression."""
    if not target:
        raise EncoderError("target must be non-empty")
    word = description.sentiment.value
    return RefinedDescription(
        text=f"{target} exhibits {indefinite_article(word)} {word} expression",
        source_face_index=description.face_index,
        sentiment=description.sentiment,
    )


def scene_caption(image: ImageRef, captioner: Captioner) -> SceneCaption:
    """Backend caption for the whole image; empty captions flow through."""
    try:
        text = captioner.caption(image)
    except EncoderError:
        raise
    except Exception as exc:
        raise EncoderError(f"caption backend failed for image {image.id!r}: {exc}") from exc
    return SceneCaption(text=text)


@dataclass(frozen=True)
class AlignmentResult:
    refined: RefinedDescription
    candidates: list[str]
    scores: list[float] | None  # None when fewer than two candidates


def align_example(
    example: Example,
    descriptions: list[FaceDescription],
    enc: AlignmentEncoders,
    proj: ProjectionParams,
    images_root=None,
) -> AlignmentResult:
    """Pick and refine the description that best matches the image.

    Zero candidates yield the degenerate empty description; a single
    candidate is refined directly without touching the encoders (scoring
    exists only to disambiguate multi-face images); two or more are
    ranked by projected, normalized, scaled image-text similarity.
    """
    from .dataset import resolve_image_path

    candidates = [d.text for d in descriptions]
    if not descriptions:
        return AlignmentResult(RefinedDescription(text=""), candidates, None)
    if len(descriptions) == 1:
        return AlignmentResult(refine_description(descriptions[0], example.target), candidates, None)

    image = ImageRef(resolve_image_path(example.image_ref, images_root), id=example.id)
    desc_units = [
        project_normalize(encode_description_with_target(d, example.target, enc), proj.v_desc)
        for d in descriptions
    ]
    image_unit = project_normalize(enc.encode_image(image), proj.v_image)
    scores = score_descriptions(image_unit, desc_units, proj.t)
    chosen = select_description(scores)
    return AlignmentResult(refine_description(descriptions[chosen], example.target), candidates, scores)
