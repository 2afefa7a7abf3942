"""Dataset loading, validation, and characterization.

Two on-disk formats are supported:

* ``jsonl`` -- the canonical schema, one object per line:
  ``{"id": str, "image": str, "caption": str, "target": str,
  "label": "negative"|"neutral"|"positive"}``
* ``fourline`` -- the common 4-physical-lines-per-record distribution:
  sentence with a ``$T$`` placeholder / target string / label token
  (``-1``/``0``/``1`` or a label word) / image filename. The placeholder
  is substituted with the target at load time so downstream code only
  ever sees plain captions.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .contracts import FaceDetector, ImageRef
from .errors import DatasetError, FaceBackendError

logger = logging.getLogger(__name__)

PLACEHOLDER = "$T$"


class Label(enum.Enum):
    NEGATIVE = "negative"
    NEUTRAL = "neutral"
    POSITIVE = "positive"


# Fixed enumeration; checkpoints depend on this order.
_LABEL_TO_INDEX = {Label.NEGATIVE: 0, Label.NEUTRAL: 1, Label.POSITIVE: 2}
_INDEX_TO_LABEL = {i: lab for lab, i in _LABEL_TO_INDEX.items()}

# Accepted spellings in input files. The -1/0/1 tokens follow the common
# fourline distribution of the Twitter corpora.
_LABEL_TOKENS = {
    "-1": Label.NEGATIVE,
    "0": Label.NEUTRAL,
    "1": Label.POSITIVE,
    "negative": Label.NEGATIVE,
    "neutral": Label.NEUTRAL,
    "positive": Label.POSITIVE,
}


def encode_label(label: Label) -> int:
    """Map a label to its fixed index: negative=0, neutral=1, positive=2."""
    try:
        return _LABEL_TO_INDEX[label]
    except KeyError:
        raise DatasetError(f"unknown label: {label!r}") from None


def decode_label(index: int) -> Label:
    """Inverse of :func:`encode_label`."""
    try:
        return _INDEX_TO_LABEL[index]
    except KeyError:
        raise DatasetError(f"unknown label index: {index!r}") from None


def parse_label_token(token: str) -> Label:
    try:
        return _LABEL_TOKENS[token.strip().lower()]
    except KeyError:
        raise DatasetError(f"unknown label token: {token!r}") from None


@dataclass(frozen=True)
class Example:
    """One multimodal sample: image reference, caption, target span, label."""

    id: str
    image_ref: str
    caption: str
    target: str
    label: Label

    def __post_init__(self) -> None:
        if not self.caption:
            raise DatasetError(f"example {self.id!r}: empty caption")
        if not self.target:
            raise DatasetError(f"example {self.id!r}: empty target")
        if self.target not in self.caption:
            raise DatasetError(
                f"example {self.id!r}: target {self.target!r} does not occur in caption"
            )
        if not isinstance(self.label, Label):
            raise DatasetError(f"example {self.id!r}: bad label {self.label!r}")


@dataclass(frozen=True)
class SplitStats:
    positive_count: int
    negative_count: int
    neutral_count: int
    avg_targets_per_caption: float

    @property
    def total(self) -> int:
        return self.positive_count + self.negative_count + self.neutral_count


def load_split(path: str | Path, format: str = "jsonl") -> list[Example]:
    """Load one dataset split. ``format`` is ``"jsonl"`` or ``"fourline"``.

    Image references are kept as written; they are resolved lazily when a
    backend actually needs the image.
    """
    path = Path(path)
    if format == "jsonl":
        return _load_jsonl(path)
    if format == "fourline":
        return _load_fourline(path)
    raise DatasetError(f"unknown dataset format: {format!r}")


def _load_jsonl(path: Path) -> list[Example]:
    examples: list[Example] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                examples.append(
                    Example(
                        id=str(obj["id"]),
                        image_ref=str(obj["image"]),
                        caption=str(obj["caption"]),
                        target=str(obj["target"]),
                        label=parse_label_token(str(obj["label"])),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, DatasetError) as exc:
                raise DatasetError(f"{path}: line {lineno}: {exc}") from exc
    return examples


def _load_fourline(path: Path) -> list[Example]:
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    # Tolerate a trailing newline-only tail.
    while lines and not lines[-1].strip():
        lines.pop()
    if len(lines) % 4 != 0:
        raise DatasetError(
            f"{path}: {len(lines)} lines is not a multiple of 4 (truncated record?)"
        )
    examples: list[Example] = []
    for rec, off in enumerate(range(0, len(lines), 4)):
        sentence, target, label_token, image = (lines[off + i].strip() for i in range(4))
        try:
            caption = sentence.replace(PLACEHOLDER, target)
            examples.append(
                Example(
                    id=f"{path.stem}-{rec:06d}",
                    image_ref=image,
                    caption=caption,
                    target=target,
                    label=parse_label_token(label_token),
                )
            )
        except DatasetError as exc:
            raise DatasetError(f"{path}: record {rec} (line {off + 1}): {exc}") from exc
    return examples


def save_split(examples: list[Example], path: str | Path) -> None:
    """Write examples in the canonical jsonl schema."""
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(
                json.dumps(
                    {
                        "id": ex.id,
                        "image": ex.image_ref,
                        "caption": ex.caption,
                        "target": ex.target,
                        "label": ex.label.value,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def split_stats(examples: list[Example]) -> SplitStats:
    """Per-label counts plus the average number of targets per post.

    Examples sharing one post (same image reference and same substituted
    caption) count as multiple targets of that post.
    """
    counts = {Label.POSITIVE: 0, Label.NEGATIVE: 0, Label.NEUTRAL: 0}
    posts: set[tuple[str, str]] = set()
    for ex in examples:
        counts[ex.label] += 1
        posts.add((ex.image_ref, ex.caption))
    avg = len(examples) / len(posts) if posts else 0.0
    return SplitStats(
        positive_count=counts[Label.POSITIVE],
        negative_count=counts[Label.NEGATIVE],
        neutral_count=counts[Label.NEUTRAL],
        avg_targets_per_caption=avg,
    )


def build_face_subset(
    examples: list[Example],
    detector: FaceDetector,
    images_root: str | Path | None = None,
) -> list[Example]:
    """Retain exactly the examples whose image yields at least one face.

    Order is preserved. Unreadable images are skipped with a logged
    warning rather than aborting the corpus job.
    """
    root = Path(images_root) if images_root is not None else None
    kept: list[Example] = []
    for ex in examples:
        image = ImageRef(resolve_image_path(ex.image_ref, root), id=ex.id)
        try:
            faces = detector.detect(image)
        except (FaceBackendError, OSError) as exc:
            logger.warning("skipping %s (unreadable image %s): %s", ex.id, ex.image_ref, exc)
            continue
        if faces:
            kept.append(ex)
    return kept


def resolve_image_path(image_ref: str, images_root: Path | None) -> Path:
    ref = Path(image_ref)
    if images_root is not None and not ref.is_absolute():
        return images_root / ref
    return ref
