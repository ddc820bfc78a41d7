"""Masked weighted cross-entropy and per-class precision."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .gfilter import MaskVolume
from .volume import BeliefField, GridDims, LabelVolume

LOG_CLAMP = 1e-12


class WeightVolume:
    def __init__(self, data: np.ndarray):
        data = np.array(data, dtype=np.float64)
        if data.ndim != 3:
            raise ValueError(f"weights must be 3D, got shape {data.shape}")
        if not np.all(np.isfinite(data)) or np.any(data < 0):
            raise ValueError("weights must be finite and >= 0")
        data.setflags(write=False)
        self.data = data
        self.dims = GridDims(*data.shape)

    @classmethod
    def ones(cls, dims) -> "WeightVolume":
        return cls(np.ones(GridDims.of(dims).shape))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def _require_binary(label: LabelVolume, what: str) -> None:
    if label.data.size and label.data.max() > 1:
        raise ValueError(f"{what} must be binary {{0, 1}}")


def weighted_label_image(label: LabelVolume, beta: float) -> WeightVolume:
    """``beta`` on labelled voxels, 1 elsewhere."""
    _require_binary(label, "label volume")
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta!r}")
    return WeightVolume(np.where(label.data == 1, float(beta), 1.0))


def masked_cross_entropy(beliefs: BeliefField, mask: MaskVolume,
                         weights: Optional[WeightVolume] = None) -> float:
    """Weighted mean of -m log Q(1) - (1 - m) log Q(0).

    Probabilities are clamped from below at ``LOG_CLAMP`` before the log.
    The mean is taken over total weight.
    """
    if beliefs.num_labels != 2:
        raise ValueError(f"cross-entropy needs 2 labels, got {beliefs.num_labels}")
    if mask.dims != beliefs.dims:
        raise ValueError(f"mask dims {mask.dims.shape} != beliefs dims {beliefs.dims.shape}")
    if weights is None:
        weights = WeightVolume.ones(beliefs.dims)
    if weights.dims != beliefs.dims:
        raise ValueError(f"weight dims {weights.dims.shape} != beliefs dims {beliefs.dims.shape}")
    m = mask.data
    logq = np.log(np.maximum(beliefs.data, LOG_CLAMP))
    per_voxel = -m * logq[..., 1] - (1.0 - m) * logq[..., 0]
    total = weights.data.sum()
    if total <= 0:
        raise ValueError("total weight must be positive")
    return float(np.sum(weights.data * per_voxel) / total)


def binary_cross_entropy(beliefs: BeliefField, label: LabelVolume) -> float:
    """Unweighted cross-entropy against a hard binary label."""
    _require_binary(label, "label volume")
    q = np.maximum(beliefs.data, LOG_CLAMP)
    picked = np.where(label.data == 1, q[..., 1], q[..., 0])
    return float(np.mean(-np.log(picked)))


def precision_metrics(pred: LabelVolume, truth: LabelVolume
                      ) -> tuple[ConfusionCounts, Optional[float], Optional[float]]:
    """Confusion counts plus positive and negative precision in percent.

    A precision whose denominator is zero is returned as ``None``.
    """
    if pred.dims != truth.dims:
        raise ValueError(f"pred dims {pred.dims.shape} != truth dims {truth.dims.shape}")
    _require_binary(pred, "prediction")
    _require_binary(truth, "truth")
    p = pred.data == 1
    t = truth.data == 1
    counts = ConfusionCounts(
        tp=int(np.sum(p & t)), fp=int(np.sum(p & ~t)),
        tn=int(np.sum(~p & ~t)), fn=int(np.sum(~p & t)),
    )
    pos = 100.0 * counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else None
    neg = 100.0 * counts.tn / (counts.tn + counts.fn) if counts.tn + counts.fn else None
    return counts, pos, neg


def combined_loss(fcn_beliefs: BeliefField, crf_beliefs: BeliefField, mask: MaskVolume,
                  weights: Optional[WeightVolume] = None, lam: float = 0.5) -> float:
    if not 0 <= lam <= 1:
        raise ValueError(f"lambda must lie in [0, 1], got {lam!r}")
    a = masked_cross_entropy(fcn_beliefs, mask, weights)
    b = masked_cross_entropy(crf_beliefs, mask, weights)
    if lam == 0:
        return a
    if lam == 1:
        return b
    return (1 - lam) * a + lam * b


def metrics_dict(loss: Optional[float], counts: ConfusionCounts,
                 pos: Optional[float], neg: Optional[float]) -> dict:
    return {"loss": loss, "pos_prec": pos, "neg_prec": neg,
            "tp": counts.tp, "fp": counts.fp, "tn": counts.tn, "fn": counts.fn}
