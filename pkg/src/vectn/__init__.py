"""vectn: target-dependent multimodal sentiment classification.

Facial emotion cues are translated into text, aligned to the target
entity by contrastive image-text similarity, and fused with the caption
and a generated scene caption through a gated classifier.
"""

__version__ = "0.1.0"

from .config import TrainConfig
from .dataset import Example, Label, decode_label, encode_label, load_split, split_stats

__all__ = [
    "__version__",
    "TrainConfig",
    "Example",
    "Label",
    "encode_label",
    "decode_label",
    "load_split",
    "split_stats",
]
