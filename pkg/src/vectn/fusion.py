"""Fusion phrases, pooled sentence vectors, the tanh gate, the linear
classifier, cross-entropy loss, and analytic gradients for everything
trainable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contracts import TextEncoder
from .dataset import Label, decode_label
from .errors import EncoderError, TrainingError

CLS = "[CLS]"
SEP = "[SEP]"
_MARKERS = {CLS, SEP}

# Floor inside log(); keeps a zero true-class probability finite.
LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class FusionPhrase:
    """Caption / target / auxiliary token segments with their serialized
    ``[CLS] ... [SEP] ... [SEP] ... [SEP]`` form.

    Tokens are whitespace words; tokens spelled exactly like a marker are
    dropped from segments so the serialized form always carries exactly
    one ``[CLS]`` and three ``[SEP]``.
    """

    caption_tokens: tuple[str, ...]
    target_tokens: tuple[str, ...]
    auxiliary_tokens: tuple[str, ...]

    @property
    def serialized(self) -> str:
        return " ".join(
            [CLS, *self.caption_tokens, SEP, *self.target_tokens, SEP, *self.auxiliary_tokens, SEP]
        )

    def __len__(self) -> int:
        # Marker tokens count toward the length budget.
        return 4 + len(self.caption_tokens) + len(self.target_tokens) + len(self.auxiliary_tokens)


def _segment_tokens(text: str) -> list[str]:
    return [tok for tok in text.split() if tok not in _MARKERS]


def build_phrase(caption: str, target: str, auxiliary: str, max_len: int = 128) -> FusionPhrase:
    """Assemble ``[CLS] caption [SEP] target [SEP] auxiliary [SEP]``.

    Over-length phrases lose caption tokens first, then auxiliary tokens;
    the target segment is never truncated. The caption may be empty (the
    visual-only configuration); the target must not be.
    """
    target_tokens = _segment_tokens(target)
    if not target_tokens:
        raise EncoderError("target segment must be non-empty")
    caption_tokens = _segment_tokens(caption)
    auxiliary_tokens = _segment_tokens(auxiliary)

    budget = max_len - 4 - len(target_tokens)
    if budget < 0:
        raise EncoderError(
            f"target alone ({len(target_tokens)} tokens) exceeds max_len={max_len}"
        )
    excess = len(caption_tokens) + len(auxiliary_tokens) - budget
    if excess > 0:
        cut = min(len(caption_tokens), excess)
        caption_tokens = caption_tokens[: len(caption_tokens) - cut]
        excess -= cut
    if excess > 0:
        auxiliary_tokens = auxiliary_tokens[: len(auxiliary_tokens) - excess]
    return FusionPhrase(
        caption_tokens=tuple(caption_tokens),
        target_tokens=tuple(target_tokens),
        auxiliary_tokens=tuple(auxiliary_tokens),
    )


def pool_phrase(phrase: FusionPhrase, encoder: TextEncoder) -> np.ndarray:
    """The encoder's pooled sentence vector for a phrase."""
    vec = np.asarray(encoder.pool(phrase), dtype=float)
    if vec.shape != (encoder.dim,):
        raise EncoderError(f"encoder produced shape {vec.shape}, expected ({encoder.dim},)")
    return vec


@dataclass
class GateParams:
    """Trainable weights of the gated fusion head.

    ``v_dt``/``v_ic`` (d, d) and ``b_j`` (d,) form the tanh gate;
    ``v`` (d, 3) and ``b`` (3,) are the linear classifier.
    """

    v_dt: np.ndarray
    v_ic: np.ndarray
    b_j: np.ndarray
    v: np.ndarray
    b: np.ndarray

    @classmethod
    def init(cls, d: int, rng: np.random.Generator, scale: float = 0.02) -> "GateParams":
        # Matrices get small random init; an all-zero start is a saddle
        # where neither the gate nor the classifier can receive gradient.
        return cls(
            v_dt=rng.normal(0.0, scale, (d, d)),
            v_ic=rng.normal(0.0, scale, (d, d)),
            b_j=np.zeros(d),
            v=rng.normal(0.0, scale, (d, 3)),
            b=np.zeros(3),
        )

    def arrays(self) -> dict[str, np.ndarray]:
        return {"v_dt": self.v_dt, "v_ic": self.v_ic, "b_j": self.b_j, "v": self.v, "b": self.b}


@dataclass(frozen=True)
class Prediction:
    probabilities: np.ndarray  # (3,), non-negative, sums to 1
    predicted: Label

    @classmethod
    def from_probabilities(cls, probs: np.ndarray) -> "Prediction":
        return cls(probabilities=probs, predicted=decode_label(int(np.argmax(probs))))


def softmax(logits: np.ndarray) -> np.ndarray:
    """Shift-invariant softmax along the last axis."""
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def gate_fuse(
    o_dt: np.ndarray, o_ic: np.ndarray, params: GateParams, complement: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """tanh gate over both pooled vectors.

    Default is the shared gate ``fused = jt * o_dt + jt * o_ic``, i.e.
    jt elementwise on the sum of both inputs. ``complement=True`` is a
    deliberately non-default experimental variant weighting the second
    term by (1 - jt) instead.
    """
    if o_dt.shape != o_ic.shape or o_dt.shape != params.b_j.shape:
        raise EncoderError(
            f"gate dimension mismatch: {o_dt.shape} vs {o_ic.shape} vs {params.b_j.shape}"
        )
    jt = np.tanh(params.v_dt @ o_dt + params.v_ic @ o_ic + params.b_j)
    if complement:
        fused = jt * o_dt + (1.0 - jt) * o_ic
    else:
        fused = jt * (o_dt + o_ic)
    return jt, fused


def classify(
    fused: np.ndarray,
    v: np.ndarray,
    b: np.ndarray,
    dropout_rate: float = 0.0,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Prediction:
    """Softmax over the three logits of the linear classifier.

    Inverted dropout is applied to ``fused`` only while training.
    """
    if fused.shape[0] != v.shape[0] or v.shape[1] != b.shape[0]:
        raise EncoderError(f"classifier dimension mismatch: {fused.shape} vs {v.shape}")
    x = fused
    if training and dropout_rate > 0.0:
        if rng is None:
            raise TrainingError("dropout during training requires an RNG")
        mask = rng.random(x.shape) >= dropout_rate
        x = x * mask / (1.0 - dropout_rate)
    logits = x @ v + b
    if not np.all(np.isfinite(logits)):
        raise TrainingError(f"non-finite logits: {logits}")
    return Prediction.from_probabilities(softmax(logits))


def batch_loss(probabilities: list[np.ndarray] | np.ndarray, labels: list[int] | np.ndarray) -> float:
    """Mean negative log-probability of the true labels (cross-entropy)."""
    probs = np.asarray(probabilities, dtype=float)
    idx = np.asarray(labels, dtype=int)
    if probs.ndim != 2 or probs.shape[0] != idx.shape[0] or probs.shape[0] < 1:
        raise TrainingError(
            f"need equal, non-zero numbers of probability rows and labels: "
            f"{probs.shape} vs {idx.shape}"
        )
    true_p = probs[np.arange(len(idx)), idx]
    return float(-np.mean(np.log(np.maximum(true_p, LOG_FLOOR))))


# ---------------------------------------------------------------------------
# Batched forward/backward for the trainable heads. Each model flavour is
# one structural configuration of the classifier; training and ablation
# pick between them.
# ---------------------------------------------------------------------------


def _dropout_mask(shape: tuple[int, ...], rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout multiplier: 0 or 1/(1-rate) per element."""
    return (rng.random(shape) >= rate) / (1.0 - rate)


class GatedFusionModel:
    """Eq-for-eq gated head: tanh gate, shared-gate fusion, linear softmax."""

    kind = "gated"

    def __init__(self, params: GateParams, complement: bool = False):
        self.params = params
        self.complement = complement

    @classmethod
    def init(cls, d: int, rng: np.random.Generator, complement: bool = False) -> "GatedFusionModel":
        return cls(GateParams.init(d, rng), complement=complement)

    def arrays(self) -> dict[str, np.ndarray]:
        return self.params.arrays()

    def forward(self, o_dt: np.ndarray, o_ic: np.ndarray, dropout: np.ndarray | None = None) -> np.ndarray:
        """Batched probabilities; rows of ``o_dt``/``o_ic`` are examples."""
        p = self.params
        jt = np.tanh(o_dt @ p.v_dt.T + o_ic @ p.v_ic.T + p.b_j)
        if self.complement:
            fused = jt * o_dt + (1.0 - jt) * o_ic
        else:
            fused = jt * (o_dt + o_ic)
        if dropout is not None:
            fused = fused * dropout
        return softmax(fused @ p.v + p.b)

    def loss_and_grads(
        self,
        o_dt: np.ndarray,
        o_ic: np.ndarray,
        labels: np.ndarray,
        dropout: np.ndarray | None = None,
    ) -> tuple[float, dict[str, np.ndarray]]:
        """Mean cross-entropy and its analytic gradients w.r.t. all
        gate/classifier parameters (batch-mean normalized)."""
        p = self.params
        n = o_dt.shape[0]
        if n == 0:
            raise TrainingError("empty batch")
        a = o_dt @ p.v_dt.T + o_ic @ p.v_ic.T + p.b_j
        jt = np.tanh(a)
        fused = jt * o_dt + (1.0 - jt) * o_ic if self.complement else jt * (o_dt + o_ic)
        dropped = fused if dropout is None else fused * dropout
        probs = softmax(dropped @ p.v + p.b)
        loss = batch_loss(probs, labels)

        dlogits = probs.copy()
        dlogits[np.arange(n), labels] -= 1.0
        dlogits /= n
        grad_v = dropped.T @ dlogits
        grad_b = dlogits.sum(axis=0)
        dfused = dlogits @ p.v.T
        if dropout is not None:
            dfused = dfused * dropout
        djt = dfused * (o_dt - o_ic) if self.complement else dfused * (o_dt + o_ic)
        da = djt * (1.0 - jt**2)
        grads = {
            "v_dt": da.T @ o_dt,
            "v_ic": da.T @ o_ic,
            "b_j": da.sum(axis=0),
            "v": grad_v,
            "b": grad_b,
        }
        if any(not np.all(np.isfinite(g)) for g in grads.values()):
            raise TrainingError("non-finite gradients")
        return loss, grads

    def describe(self) -> dict:
        return {
            "classifier": "gated",
            "gating": True,
            "gate_complement": self.complement,
            "inputs": 2,
        }


class ConcatLinearModel:
    """Gate removed: both pooled vectors concatenated into a widened
    linear classifier."""

    kind = "concat"

    def __init__(self, w: np.ndarray, b: np.ndarray):
        self.w = w  # (2d, 3)
        self.b = b

    @classmethod
    def init(cls, d: int, rng: np.random.Generator, scale: float = 0.02) -> "ConcatLinearModel":
        return cls(w=rng.normal(0.0, scale, (2 * d, 3)), b=np.zeros(3))

    def arrays(self) -> dict[str, np.ndarray]:
        return {"w": self.w, "b": self.b}

    def forward(self, o_dt: np.ndarray, o_ic: np.ndarray, dropout: np.ndarray | None = None) -> np.ndarray:
        x = np.concatenate([o_dt, o_ic], axis=1)
        if dropout is not None:
            x = x * dropout
        return softmax(x @ self.w + self.b)

    def loss_and_grads(self, o_dt, o_ic, labels, dropout=None):
        n = o_dt.shape[0]
        if n == 0:
            raise TrainingError("empty batch")
        x = np.concatenate([o_dt, o_ic], axis=1)
        if dropout is not None:
            x = x * dropout
        probs = softmax(x @ self.w + self.b)
        loss = batch_loss(probs, labels)
        dlogits = probs.copy()
        dlogits[np.arange(n), labels] -= 1.0
        dlogits /= n
        return loss, {"w": x.T @ dlogits, "b": dlogits.sum(axis=0)}

    def describe(self) -> dict:
        return {"classifier": "concat", "gating": False, "inputs": 2}


class SingleLinearModel:
    """Caption-only configuration: one pooled vector, plain linear softmax."""

    kind = "single"

    def __init__(self, v: np.ndarray, b: np.ndarray):
        self.v = v
        self.b = b

    @classmethod
    def init(cls, d: int, rng: np.random.Generator, scale: float = 0.02) -> "SingleLinearModel":
        return cls(v=rng.normal(0.0, scale, (d, 3)), b=np.zeros(3))

    def arrays(self) -> dict[str, np.ndarray]:
        return {"v": self.v, "b": self.b}

    def forward(self, o: np.ndarray, o_unused=None, dropout: np.ndarray | None = None) -> np.ndarray:
        x = o if dropout is None else o * dropout
        return softmax(x @ self.v + self.b)

    def loss_and_grads(self, o, o_unused, labels, dropout=None):
        n = o.shape[0]
        if n == 0:
            raise TrainingError("empty batch")
        x = o if dropout is None else o * dropout
        probs = softmax(x @ self.v + self.b)
        loss = batch_loss(probs, labels)
        dlogits = probs.copy()
        dlogits[np.arange(n), labels] -= 1.0
        dlogits /= n
        return loss, {"v": x.T @ dlogits, "b": dlogits.sum(axis=0)}

    def describe(self) -> dict:
        return {"classifier": "single", "gating": False, "inputs": 1}


FusionModel = GatedFusionModel | ConcatLinearModel | SingleLinearModel


def gradients(
    o_dt: np.ndarray,
    o_ic: np.ndarray,
    labels: np.ndarray,
    params: GateParams,
    dropout: np.ndarray | None = None,
    complement: bool = False,
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and analytic gradients of the gated head on one batch.

    Convenience wrapper over :class:`GatedFusionModel` matching the
    finite-difference test surface.
    """
    return GatedFusionModel(params, complement=complement).loss_and_grads(
        o_dt, o_ic, labels, dropout=dropout
    )
