"""Deterministic toy backends.

Every perception value is read from a sidecar annotation file sitting
next to the image at ``<image path>.json`` with the same face schema the
``faces`` stage emits, plus scene-caption fields::

    {"id": str,
     "faces": [{"bbox": [x, y, w, h],
                "attributes": {"age": int?, "gender": str?, "race": str?,
                               "sentiment": str?, "emotion": str?},
                "confidence": {"age": float, ...}}],
     "scene_caption": str,           # optional, default ""
     "embed_text": str,              # optional, defaults to scene_caption
     "size": [height, width]}        # optional, default [256, 256]

The image file itself never needs to exist: crops are synthesized zero
arrays of the bbox shape. An ``emotion`` key holding a 7-way emotion word
is collapsed onto the three sentiment labels via
:data:`vectn.faces.EMOTION_TO_SENTIMENT`.

Toy text embedding rule (bit-exact):

1. split the input on whitespace;
2. for each token, seed = the little-endian uint64 of
   ``blake2b(token_utf8, digest_size=8, key=rule_seed_le8)``;
3. token vector = ``np.random.default_rng(seed).standard_normal(dim)``;
4. output = arithmetic mean of the token vectors, or the zero vector for
   empty input.

The same rule serves as the alignment caption encoder, the alignment
visual encoder (applied to the sidecar ``embed_text`` string), and the
fusion text encoders (applied to the serialized phrase).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..contracts import ImageRef
from ..dataset import Label
from ..errors import FaceBackendError
from ..faces import EMOTION_TO_SENTIMENT, FaceAttributes, FaceRegion
from ..fusion import FusionPhrase


def _token_seed(token: str, rule_seed: int) -> int:
    key = int(rule_seed).to_bytes(8, "little", signed=False)
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=key).digest()
    return int.from_bytes(digest, "little")


@dataclass
class ToyEncoderRule:
    """Seeded token-hash embedding; see the module docstring for the
    bit-exact definition."""

    dim: int
    seed: int = 0
    _memo: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def embed(self, text: str) -> np.ndarray:
        tokens = text.split()
        if not tokens:
            return np.zeros(self.dim)
        total = np.zeros(self.dim)
        for tok in tokens:
            vec = self._memo.get(tok)
            if vec is None:
                rng = np.random.default_rng(_token_seed(tok, self.seed))
                vec = rng.standard_normal(self.dim)
                self._memo[tok] = vec
            total += vec
        return total / len(tokens)


def toy_embed(text: str, rule: ToyEncoderRule) -> np.ndarray:
    return rule.embed(text)


def load_sidecar(image: ImageRef) -> dict:
    sidecar = Path(str(image.path) + ".json")
    if not sidecar.exists():
        raise FaceBackendError(f"no sidecar annotation for image {image.path}")
    try:
        return json.loads(sidecar.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FaceBackendError(f"unreadable sidecar {sidecar}: {exc}") from exc


class ToyFaceDetector:
    """Reports exactly the faces annotated in the sidecar."""

    def detect(self, image: ImageRef) -> list[FaceRegion]:
        record = load_sidecar(image)
        height, width = record.get("size", [256, 256])
        regions: list[FaceRegion] = []
        for entry in record.get("faces", []):
            x, y, w, h = (int(v) for v in entry["bbox"])
            if x < 0 or y < 0 or x + w > width or y + h > height:
                raise FaceBackendError(
                    f"annotated bbox {entry['bbox']} outside {width}x{height} image {image.path}"
                )
            regions.append(
                FaceRegion(bbox=(x, y, w, h), crop=np.zeros((h, w, 3), dtype=np.uint8), annotation=entry)
            )
        return regions


class ToyFaceAnalyzer:
    """Copies attributes from the annotation the detector attached."""

    min_crop_size = 1

    def analyze(self, face: FaceRegion) -> FaceAttributes:
        if face.annotation is None:
            raise FaceBackendError("toy analyzer needs a sidecar-annotated face region")
        attrs = dict(face.annotation.get("attributes", {}))
        confidence = dict(face.annotation.get("confidence", {}))
        sentiment: Label | None = None
        if "sentiment" in attrs and attrs["sentiment"] is not None:
            sentiment = Label(attrs["sentiment"])
        elif "emotion" in attrs and attrs["emotion"] is not None:
            emotion = str(attrs["emotion"]).lower()
            if emotion not in EMOTION_TO_SENTIMENT:
                raise FaceBackendError(f"unknown emotion word: {emotion!r}")
            sentiment = EMOTION_TO_SENTIMENT[emotion]
            confidence.setdefault("sentiment", confidence.pop("emotion", 1.0))
        # Regression-style heads default to full confidence.
        for name in ("age", "gender"):
            if attrs.get(name) is not None:
                confidence.setdefault(name, 1.0)
        return FaceAttributes(
            age=attrs.get("age"),
            gender=attrs.get("gender"),
            race=attrs.get("race"),
            sentiment=sentiment,
            confidence={k: v for k, v in confidence.items() if k in ("age", "gender", "race", "sentiment")},
        )


class ToyCaptioner:
    """Returns the sidecar ``scene_caption`` string (default empty)."""

    def caption(self, image: ImageRef) -> str:
        return str(load_sidecar(image).get("scene_caption", ""))


class ToyAlignmentEncoders:
    """Contrastive-encoder stand-in: the hash rule over raw text, and over
    the sidecar ``embed_text`` (falling back to ``scene_caption``) for
    images."""

    def __init__(self, dim: int = 512, seed: int = 0):
        self.dim = dim
        self._rule = ToyEncoderRule(dim=dim, seed=seed)

    def encode_text(self, text: str) -> np.ndarray:
        return self._rule.embed(text)

    def encode_image(self, image: ImageRef) -> np.ndarray:
        record = load_sidecar(image)
        text = str(record.get("embed_text", record.get("scene_caption", "")))
        return self._rule.embed(text)


class ToyTextEncoder:
    """Pools a fusion phrase by hashing its serialized form."""

    def __init__(self, dim: int = 768, seed: int = 0):
        self.dim = dim
        self._rule = ToyEncoderRule(dim=dim, seed=seed)

    def pool(self, phrase: FusionPhrase) -> np.ndarray:
        return self._rule.embed(phrase.serialized)
