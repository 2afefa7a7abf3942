"""Face detection, attribute analysis, confidence filtering, and the
template that turns surviving attributes into a fluent emotional face
description.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Mapping

import numpy as np

from .contracts import FaceAnalyzer, FaceDetector, ImageRef
from .dataset import Label
from .errors import FaceBackendError

GENDERS = ("man", "woman")
RACES = ("Indian", "Black", "Asian", "White", "Latino", "Middle Eastern")

# Collapse of common 7-way emotion taxonomies onto the sentiment labels.
EMOTION_TO_SENTIMENT = {
    "happy": Label.POSITIVE,
    "surprise": Label.POSITIVE,
    "angry": Label.NEGATIVE,
    "disgust": Label.NEGATIVE,
    "fear": Label.NEGATIVE,
    "sad": Label.NEGATIVE,
    "neutral": Label.NEUTRAL,
}

_VOWELS = "aeiou"


@dataclass(frozen=True)
class FaceRegion:
    """One detected face: pixel bbox plus crop.

    ``annotation`` is an opaque payload a detector may attach for its
    paired analyzer (the toy backends pass sidecar ground truth through
    it); real backends leave it None.
    """

    bbox: tuple[int, int, int, int]  # x, y, width, height
    crop: np.ndarray
    annotation: Mapping[str, Any] | None = None

    def __post_init__(self) -> None:
        x, y, w, h = self.bbox
        if w < 1 or h < 1:
            raise FaceBackendError(f"degenerate face bbox: {self.bbox}")


@dataclass(frozen=True)
class FaceAttributes:
    """Predicted attributes with per-attribute confidence in [0, 1].

    Regression-style heads (age, gender) carry confidence 1.0 by
    convention. Absent attributes have no confidence entry.
    """

    age: int | None = None
    gender: str | None = None
    race: str | None = None
    sentiment: Label | None = None
    confidence: Mapping[str, float] = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        conf = dict(self.confidence or {})
        object.__setattr__(self, "confidence", conf)
        for name in ("age", "gender", "race", "sentiment"):
            if getattr(self, name) is not None:
                c = conf.get(name)
                if c is None or not (0.0 <= c <= 1.0):
                    raise FaceBackendError(
                        f"attribute {name!r} present without confidence in [0, 1]: {c!r}"
                    )


@dataclass(frozen=True)
class FaceDescription:
    text: str
    face_index: int
    sentiment: Label


def detect_faces(image: ImageRef, detector: FaceDetector) -> list[FaceRegion]:
    """Run the detector and return faces in raster order (top-to-bottom,
    then left-to-right), a deterministic total order over any detector
    output set."""
    try:
        faces = detector.detect(image)
    except FaceBackendError:
        raise
    except Exception as exc:
        raise FaceBackendError(f"face detection failed for image {image.id!r}: {exc}") from exc
    return sorted(faces, key=lambda f: (f.bbox[1], f.bbox[0], f.bbox[2], f.bbox[3]))


def analyze_attributes(face: FaceRegion, analyzer: FaceAnalyzer) -> FaceAttributes:
    h, w = face.crop.shape[:2]
    if min(h, w) < analyzer.min_crop_size:
        raise FaceBackendError(
            f"face crop {w}x{h} below analyzer minimum {analyzer.min_crop_size}"
        )
    return analyzer.analyze(face)


def filter_attributes(attrs: FaceAttributes, alpha: float) -> FaceAttributes:
    """Drop every attribute whose confidence is strictly below ``alpha``.

    Idempotent; raising alpha never adds attributes back.
    """
    kept: dict[str, Any] = {}
    conf: dict[str, float] = {}
    for name in ("age", "gender", "race", "sentiment"):
        value = getattr(attrs, name)
        if value is None:
            kept[name] = None
            continue
        c = attrs.confidence[name]
        if c < alpha:
            kept[name] = None
        else:
            kept[name] = value
            conf[name] = c
    return FaceAttributes(confidence=conf, **kept)


def indefinite_article(word: str) -> str:
    return "an" if word and word[0].lower() in _VOWELS else "a"


def render_description(attrs: FaceAttributes, face_index: int) -> FaceDescription | None:
    """Instantiate the face-description template with surviving attributes.

    Full form: ``"A <race> <gender> with <age> years of age exhibits
    a[n] <sentiment> expression"``. A filtered race drops the race word, a
    filtered age drops the years-of-age clause, a filtered gender falls
    back to "person". Sentiment is mandatory: a description without
    emotion is pure noise, so the result is None.
    """
    if attrs.sentiment is None:
        return None
    subject_words = []
    if attrs.race is not None:
        subject_words.append(attrs.race)
    subject_words.append(attrs.gender if attrs.gender is not None else "person")
    subject = " ".join(subject_words)
    parts = [f"{indefinite_article(subject).capitalize()} {subject}"]
    if attrs.age is not None:
        parts.append(f"with {attrs.age} years of age")
    sentiment_word = attrs.sentiment.value
    parts.append(f"exhibits {indefinite_article(sentiment_word)} {sentiment_word} expression")
    return FaceDescription(text=" ".join(parts), face_index=face_index, sentiment=attrs.sentiment)


def describe_image(
    image: ImageRef,
    detector: FaceDetector,
    analyzer: FaceAnalyzer,
    alpha: float,
) -> list[FaceDescription]:
    """detect -> analyze -> filter -> render for every face in one image.

    Faces whose sentiment did not survive filtering yield no description;
    ``face_index`` always refers to the detector's raster ordering.
    """
    descriptions: list[FaceDescription] = []
    for index, face in enumerate(detect_faces(image, detector)):
        attrs = filter_attributes(analyze_attributes(face, analyzer), alpha)
        desc = render_description(attrs, index)
        if desc is not None:
            descriptions.append(desc)
    return descriptions
