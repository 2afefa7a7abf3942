"""Backend contracts: the pluggable perception and language models.

Everything heavy (face detection, attribute analysis, contrastive
encoders, caption generation, sentence pooling) sits behind these
protocols so the pipeline can run against deterministic toy backends or
real pretrained models interchangeably. All implementations must be
deterministic and safe for concurrent read-only use.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Protocol, runtime_checkable

import numpy as np

if TYPE_CHECKING:
    from .faces import FaceAttributes, FaceRegion
    from .fusion import FusionPhrase


@dataclass(frozen=True)
class ImageRef:
    """Reference to an image on disk plus the owning record id.

    Pixel data is loaded lazily by backends that need it; toy backends
    only consult the sidecar annotation next to ``path``.
    """

    path: Path
    id: str | None = None

    def load_pixels(self) -> np.ndarray:
        """Decode the image to an HxWx3 uint8 array (requires Pillow)."""
        from PIL import Image

        with Image.open(self.path) as im:
            return np.asarray(im.convert("RGB"))


@runtime_checkable
class FaceDetector(Protocol):
    def detect(self, image: ImageRef) -> list["FaceRegion"]: ...


@runtime_checkable
class FaceAnalyzer(Protocol):
    # Crops smaller than this on either side are rejected by analyze_attributes.
    min_crop_size: int

    def analyze(self, face: "FaceRegion") -> "FaceAttributes": ...


@runtime_checkable
class AlignmentEncoders(Protocol):
    """Contrastive image/text encoder pair sharing one embedding space."""

    dim: int

    def encode_text(self, text: str) -> np.ndarray: ...

    def encode_image(self, image: ImageRef) -> np.ndarray: ...


@runtime_checkable
class Captioner(Protocol):
    def caption(self, image: ImageRef) -> str: ...


@runtime_checkable
class TextEncoder(Protocol):
    """Pools a fusion phrase into a single fixed-dimension sentence vector."""

    dim: int

    def pool(self, phrase: "FusionPhrase") -> np.ndarray: ...
