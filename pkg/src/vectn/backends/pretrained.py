"""Adapters around real pretrained models.

These exist behind the same contracts as the toy backends and are never
required by the test suite. Construction fails loudly when the libraries
or model weights are unavailable; there is no silent fallback. Weights
are only fetched from the network when ``VECTN_ALLOW_DOWNLOAD=1`` is set,
otherwise the Hugging Face cache must already hold them.
"""

from __future__ import annotations

import os

import numpy as np

from ..contracts import ImageRef
from ..dataset import Label
from ..errors import BackendError
from ..faces import EMOTION_TO_SENTIMENT, FaceAttributes, FaceRegion
from ..fusion import FusionPhrase

CLIP_MODEL = "openai/clip-vit-base-patch32"
CAPTION_MODEL = "microsoft/git-base"
TEXT_MODEL = "roberta-base"
EMOTION_MODEL = "trpakov/vit-face-expression"


def _local_only() -> bool:
    return os.environ.get("VECTN_ALLOW_DOWNLOAD") != "1"


def _load(factory, name: str):
    try:
        return factory(name, local_files_only=_local_only())
    except Exception as exc:
        raise BackendError(
            f"pretrained backend unavailable: could not load {name!r} "
            f"(set VECTN_ALLOW_DOWNLOAD=1 to fetch weights): {exc}"
        ) from exc


class HaarFaceDetector:
    """OpenCV Haar-cascade frontal face detector (ships with opencv)."""

    def __init__(self):
        try:
            import cv2
        except ImportError as exc:
            raise BackendError(f"pretrained backend unavailable: {exc}") from exc
        self._cv2 = cv2
        path = cv2.data.haarcascades + "haarcascade_frontalface_default.xml"
        self._cascade = cv2.CascadeClassifier(path)
        if self._cascade.empty():
            raise BackendError(f"could not load Haar cascade from {path}")

    def detect(self, image: ImageRef) -> list[FaceRegion]:
        pixels = image.load_pixels()
        gray = self._cv2.cvtColor(pixels, self._cv2.COLOR_RGB2GRAY)
        boxes = self._cascade.detectMultiScale(gray, scaleFactor=1.1, minNeighbors=5)
        return [
            FaceRegion(bbox=(int(x), int(y), int(w), int(h)), crop=pixels[y : y + h, x : x + w])
            for (x, y, w, h) in boxes
        ]


class VitEmotionAnalyzer:
    """Facial expression classifier; age/gender/race heads are not wired
    up offline, so only sentiment is populated."""

    min_crop_size = 8

    def __init__(self):
        try:
            from transformers import AutoImageProcessor, AutoModelForImageClassification
        except ImportError as exc:
            raise BackendError(f"pretrained backend unavailable: {exc}") from exc
        self._processor = _load(AutoImageProcessor.from_pretrained, EMOTION_MODEL)
        self._model = _load(AutoModelForImageClassification.from_pretrained, EMOTION_MODEL)
        self._model.eval()

    def analyze(self, face: FaceRegion) -> FaceAttributes:
        import torch

        inputs = self._processor(images=face.crop, return_tensors="pt")
        with torch.no_grad():
            logits = self._model(**inputs).logits[0]
        probs = torch.softmax(logits, dim=-1)
        idx = int(torch.argmax(probs))
        emotion = self._model.config.id2label[idx].lower()
        sentiment: Label = EMOTION_TO_SENTIMENT.get(emotion, Label.NEUTRAL)
        return FaceAttributes(
            sentiment=sentiment, confidence={"sentiment": float(probs[idx])}
        )


class ClipAlignmentEncoders:
    dim = 512

    def __init__(self):
        try:
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise BackendError(f"pretrained backend unavailable: {exc}") from exc
        self._model = _load(CLIPModel.from_pretrained, CLIP_MODEL)
        self._processor = _load(CLIPProcessor.from_pretrained, CLIP_MODEL)
        self._model.eval()

    def encode_text(self, text: str) -> np.ndarray:
        import torch

        inputs = self._processor(text=[text], return_tensors="pt", truncation=True)
        with torch.no_grad():
            features = self._model.get_text_features(**inputs)
        return features[0].numpy().astype(float)

    def encode_image(self, image: ImageRef) -> np.ndarray:
        import torch

        inputs = self._processor(images=image.load_pixels(), return_tensors="pt")
        with torch.no_grad():
            features = self._model.get_image_features(**inputs)
        return features[0].numpy().astype(float)


class GitCaptioner:
    def __init__(self):
        try:
            from transformers import AutoModelForCausalLM, AutoProcessor
        except ImportError as exc:
            raise BackendError(f"pretrained backend unavailable: {exc}") from exc
        self._processor = _load(AutoProcessor.from_pretrained, CAPTION_MODEL)
        self._model = _load(AutoModelForCausalLM.from_pretrained, CAPTION_MODEL)
        self._model.eval()

    def caption(self, image: ImageRef) -> str:
        import torch

        inputs = self._processor(images=image.load_pixels(), return_tensors="pt")
        with torch.no_grad():
            ids = self._model.generate(pixel_values=inputs.pixel_values, max_length=32)
        return self._processor.batch_decode(ids, skip_special_tokens=True)[0]


class RobertaTextEncoder:
    dim = 768

    def __init__(self):
        try:
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise BackendError(f"pretrained backend unavailable: {exc}") from exc
        self._tokenizer = _load(AutoTokenizer.from_pretrained, TEXT_MODEL)
        self._model = _load(AutoModel.from_pretrained, TEXT_MODEL)
        self._model.eval()

    def pool(self, phrase: FusionPhrase) -> np.ndarray:
        import torch

        # Markers map onto the tokenizer's native special tokens.
        text = " ".join(phrase.caption_tokens)
        pair = " ".join(phrase.target_tokens) + " " + " ".join(phrase.auxiliary_tokens)
        inputs = self._tokenizer(text, pair, return_tensors="pt", truncation=True)
        with torch.no_grad():
            out = self._model(**inputs)
        return out.pooler_output[0].numpy().astype(float)
