"""Backend registry: names map to factories producing a full bundle of
perception and language model contracts.

``"toy"`` is always registered. Resolving an unknown name is an error
listing what is registered, never a silent fallback.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from ..config import TrainConfig
from ..contracts import (
    AlignmentEncoders,
    Captioner,
    FaceAnalyzer,
    FaceDetector,
    TextEncoder,
)
from ..errors import BackendError
from .toy import (
    ToyAlignmentEncoders,
    ToyCaptioner,
    ToyEncoderRule,
    ToyFaceAnalyzer,
    ToyFaceDetector,
    ToyTextEncoder,
    toy_embed,
)

__all__ = [
    "BackendBundle",
    "BackendRegistry",
    "DEFAULT_REGISTRY",
    "resolve_backend",
    "ToyEncoderRule",
    "toy_embed",
]


@dataclass
class BackendBundle:
    """Fully constructed backends for one run.

    ``text_encoder_dt`` pools the face-description phrase and
    ``text_encoder_ic`` the scene-caption phrase; with a shared encoder
    they are the same object.
    """

    name: str
    face_detector: FaceDetector
    face_analyzer: FaceAnalyzer
    alignment_encoders: AlignmentEncoders
    captioner: Captioner
    text_encoder_dt: TextEncoder
    text_encoder_ic: TextEncoder


BundleFactory = Callable[[TrainConfig], BackendBundle]


def _toy_factory(config: TrainConfig) -> BackendBundle:
    # Rule seeds are fixed constants so stage outputs are reproducible
    # across runs; the two fusion encoders get distinct seeds unless the
    # run asks for a shared encoder.
    encoder_dt = ToyTextEncoder(dim=config.text_dim, seed=0)
    encoder_ic = encoder_dt if config.shared_encoder else ToyTextEncoder(dim=config.text_dim, seed=1)
    return BackendBundle(
        name="toy",
        face_detector=ToyFaceDetector(),
        face_analyzer=ToyFaceAnalyzer(),
        alignment_encoders=ToyAlignmentEncoders(dim=config.align_dim, seed=0),
        captioner=ToyCaptioner(),
        text_encoder_dt=encoder_dt,
        text_encoder_ic=encoder_ic,
    )


def _pretrained_factory(config: TrainConfig) -> BackendBundle:
    from . import pretrained

    encoder_dt = pretrained.RobertaTextEncoder()
    encoder_ic = encoder_dt if config.shared_encoder else pretrained.RobertaTextEncoder()
    return BackendBundle(
        name="pretrained",
        face_detector=pretrained.HaarFaceDetector(),
        face_analyzer=pretrained.VitEmotionAnalyzer(),
        alignment_encoders=pretrained.ClipAlignmentEncoders(),
        captioner=pretrained.GitCaptioner(),
        text_encoder_dt=encoder_dt,
        text_encoder_ic=encoder_ic,
    )


class BackendRegistry:
    def __init__(self) -> None:
        self._factories: dict[str, BundleFactory] = {}

    def register(self, name: str, factory: BundleFactory) -> None:
        self._factories[name] = factory

    def names(self) -> list[str]:
        return sorted(self._factories)

    def resolve(self, name: str, config: TrainConfig | None = None) -> BackendBundle:
        if name not in self._factories:
            raise BackendError(
                f"unknown backend {name!r}; registered backends: {', '.join(self.names())}"
            )
        return self._factories[name](config or TrainConfig())


DEFAULT_REGISTRY = BackendRegistry()
DEFAULT_REGISTRY.register("toy", _toy_factory)
DEFAULT_REGISTRY.register("pretrained", _pretrained_factory)


def resolve_backend(
    name: str, registry: BackendRegistry | None = None, config: TrainConfig | None = None
) -> BackendBundle:
    return (registry or DEFAULT_REGISTRY).resolve(name, config)
