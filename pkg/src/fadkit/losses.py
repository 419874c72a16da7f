"""Classification losses: intent cross-entropy, masked sequence NLL, and
their linear interpolation.

The raw-array forms (`cross_entropy_from_probs`, `masked_nll_from_arrays`)
carry the arithmetic; the dataclass wrappers add the structural validation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateInputError, ShapeError

LOG_PROB_FLOOR = 1e-12


@dataclass
class IntentPrediction:
    """Softmax output over intent classes plus its one-hot label."""

    probs: np.ndarray
    onehot_label: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        self.onehot_label = np.asarray(self.onehot_label)
        if self.probs.ndim != 1 or self.probs.shape != self.onehot_label.shape:
            raise ShapeError("probs and onehot_label must be equal-length vectors")
        if abs(float(self.probs.sum()) - 1.0) > 1e-9:
            raise ValueError("probs must sum to 1")
        ones = np.count_nonzero(self.onehot_label == 1)
        if ones != 1 or np.count_nonzero(self.onehot_label) != 1:
            raise ValueError("onehot_label must contain exactly one 1")

    @property
    def class_count(self) -> int:
        return self.probs.shape[0]

    @property
    def label_index(self) -> int:
        return int(np.argmax(self.onehot_label))


@dataclass
class SequencePrediction:
    """Per-token log-probabilities over tag classes, targets, and a mask.

    Masked positions (mask False) are padding: their content never reaches
    the loss, so only unmasked rows must be normalized log-distributions.
    """

    token_log_probs: np.ndarray
    token_labels: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.token_log_probs = np.asarray(self.token_log_probs, dtype=float)
        self.token_labels = np.asarray(self.token_labels, dtype=int)
        self.mask = np.asarray(self.mask, dtype=bool)
        t = self.token_log_probs.shape[0]
        if self.token_log_probs.ndim != 2:
            raise ShapeError("token_log_probs must be (tokens, classes)")
        if self.token_labels.shape != (t,) or self.mask.shape != (t,):
            raise ShapeError("labels and mask must match the token count")
        live = self.token_log_probs[self.mask]
        if live.size:
            lse = np.log(np.sum(np.exp(live), axis=1))
            if np.any(np.abs(lse) > 1e-6):
                raise ValueError("unmasked log-prob rows must have logsumexp 0")
            if np.any(self.token_labels[self.mask] < 0) or np.any(
                self.token_labels[self.mask] >= self.token_log_probs.shape[1]
            ):
                raise ValueError("unmasked token label out of range")

    @property
    def effective_token_count(self) -> int:
        return int(np.count_nonzero(self.mask))


def cross_entropy_from_probs(probs, label_index: int) -> float:
    """-log of the probability at the true class; floors at 1e-12 with a warning."""
    probs = np.asarray(probs, dtype=float)
    if not 0 <= label_index < probs.shape[0]:
        raise IndexError(f"label index {label_index} out of range")
    p = float(probs[label_index])
    if p < LOG_PROB_FLOOR:
        warnings.warn(
            "probability at the true class clamped to 1e-12 before the log",
            RuntimeWarning,
            stacklevel=2,
        )
        p = LOG_PROB_FLOOR
    return -math.log(p)


def intent_ce_loss(pred: IntentPrediction) -> float:
    """Cross-entropy of a softmax intent prediction against its one-hot label."""
    return cross_entropy_from_probs(pred.probs, pred.label_index)


def intent_ce_grad(pred: IntentPrediction) -> np.ndarray:
    """d loss / d probs: -1/p at the true class, zero elsewhere."""
    g = np.zeros_like(pred.probs)
    p = max(float(pred.probs[pred.label_index]), LOG_PROB_FLOOR)
    g[pred.label_index] = -1.0 / p
    return g


def masked_nll_from_arrays(token_log_probs, token_labels, mask) -> float:
    """Average negative target log-probability over unmasked tokens only.

    Masked positions contribute to neither the numerator nor the
    denominator, so their content cannot affect the result.
    """
    log_probs = np.asarray(token_log_probs, dtype=float)
    labels = np.asarray(token_labels, dtype=int)
    keep = np.asarray(mask, dtype=bool)
    live = np.nonzero(keep)[0]
    if live.size == 0:
        raise DegenerateInputError("every token is masked")
    picked = log_probs[live, labels[live]]
    return -float(np.sum(picked)) / live.size


def masked_ner_nll(pred: SequencePrediction) -> float:
    """Masked average NLL of a sequence-tagging prediction."""
    return masked_nll_from_arrays(pred.token_log_probs, pred.token_labels,
                                  pred.mask)


def masked_ner_nll_grad(pred: SequencePrediction) -> np.ndarray:
    """d loss / d token_log_probs: -1/M at each unmasked target entry."""
    g = np.zeros_like(pred.token_log_probs)
    live = np.nonzero(pred.mask)[0]
    if live.size == 0:
        raise DegenerateInputError("every token is masked")
    g[live, pred.token_labels[live]] = -1.0 / live.size
    return g


def joint_loss(l1: float, l2: float, alpha: float = 0.5) -> float:
    """alpha * l1 + (1 - alpha) * l2, with alpha in [0, 1]."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha * l1 + (1.0 - alpha) * l2
