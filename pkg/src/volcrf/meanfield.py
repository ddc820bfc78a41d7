"""Mean-field inference for the grid CRF.

One iteration maps beliefs Q to new beliefs through

    message_pass -> weighted_filter -> compatibility_transform
    -> add_unary -> softmax_normalize

with all voxels updated synchronously from the previous Q.  Messages are
accumulated over offsets in :func:`~volcrf.kernel.neighborhood_offsets`
order, and labels are contracted by a fixed matrix product, so the result is
reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .kernel import KernelSpec, KernelTable, _shift
from .volume import BeliefField, LabelVolume, UnaryField


class CompatibilityMatrix:
    """Symmetric L x L label compatibility mu(l, l')."""

    def __init__(self, matrix):
        m = np.array(matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
            raise ValueError(f"compatibility must be a square L x L matrix (L >= 2), got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("compatibility has non-finite entries")
        if not np.array_equal(m, m.T):
            raise ValueError("compatibility must be symmetric")
        m.setflags(write=False)
        self.matrix = m

    @property
    def num_labels(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def potts(cls, num_labels: int, scale: float = 1.0) -> "CompatibilityMatrix":
        """scale * [l != l']; positive scale penalises disagreeing neighbours."""
        return cls(scale * (1.0 - np.eye(num_labels)))

    @classmethod
    def zeros(cls, num_labels: int) -> "CompatibilityMatrix":
        return cls(np.zeros((num_labels, num_labels)))


@dataclass(frozen=True)
class InferenceConfig:
    max_iters: int = 10
    tol: float = 1e-5

    def __post_init__(self):
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError(f"max_iters must be a positive integer, got {self.max_iters!r}")
        if not (self.tol >= 0 and math.isfinite(self.tol)):
            raise ValueError(f"tol must be finite and >= 0, got {self.tol!r}")


@dataclass
class ConvergenceReport:
    iterations: int = 0
    max_delta: list[float] = field(default_factory=list)
    converged: bool = False

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "max_delta": list(self.max_delta),
            "converged": self.converged,
        }


def _softmax(a: np.ndarray) -> np.ndarray:
    e = np.exp(a - a.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def softmax_normalize(activation) -> BeliefField:
    data = activation.data if hasattr(activation, "data") else activation
    return BeliefField(_softmax(np.asarray(data, dtype=np.float64)))


def init_beliefs(unary: UnaryField) -> BeliefField:
    """Q_i(l) proportional to exp(U_i(l)), per voxel."""
    return softmax_normalize(unary.data)


def message_pass(beliefs: BeliefField, table: KernelTable) -> tuple[np.ndarray, np.ndarray]:
    """Sum neighbour beliefs under each kernel component.

    Returns two arrays shaped like ``beliefs.data``: the appearance and the
    smoothness messages.
    """
    if beliefs.dims != table.dims:
        raise ValueError(f"beliefs dims {beliefs.dims.shape} != table dims {table.dims.shape}")
    q = beliefs.data
    m1 = np.zeros_like(q)
    m2 = np.zeros_like(q)
    for o_idx, off in enumerate(table.offsets):
        neighbour, _ = _shift(q, off.delta)
        m1 += table.k1[..., o_idx, None] * neighbour
        m2 += table.k2[..., o_idx, None] * neighbour
    return m1, m2


def weighted_filter(messages, spec: KernelSpec) -> np.ndarray:
    m1, m2 = messages
    return spec.w1 * np.asarray(m1) + spec.w2 * np.asarray(m2)


def compatibility_transform(field, mu: CompatibilityMatrix) -> np.ndarray:
    """Per-voxel product mu @ field_i."""
    f = np.asarray(field, dtype=np.float64)
    if f.shape[-1] != mu.num_labels:
        raise ValueError(f"field has {f.shape[-1]} labels, compatibility has {mu.num_labels}")
    return f @ mu.matrix.T


def add_unary(unary: UnaryField, hat_field) -> np.ndarray:
    h = np.asarray(hat_field, dtype=np.float64)
    if h.shape != unary.data.shape:
        raise ValueError(f"shape mismatch: unary {unary.data.shape} vs field {h.shape}")
    return unary.data - h


def meanfield_step(beliefs: BeliefField, unary: UnaryField, table: KernelTable,
                   mu: CompatibilityMatrix) -> BeliefField:
    """One synchronous update, steps (2)-(6)."""
    messages = message_pass(beliefs, table)
    combined = weighted_filter(messages, table.spec)
    penalty = compatibility_transform(combined, mu)
    return softmax_normalize(add_unary(unary, penalty))


def run_inference(
    unary: UnaryField,
    table: KernelTable,
    mu: CompatibilityMatrix,
    config: InferenceConfig = InferenceConfig(),
    callback: Optional[Callable[[int, BeliefField], None]] = None,
) -> tuple[BeliefField, ConvergenceReport]:
    """Iterate mean-field updates from softmax(U) until the beliefs settle.

    Stops once ``max |Q_new - Q_old| <= config.tol`` or after
    ``config.max_iters`` updates.  ``callback(iteration, beliefs)`` is invoked
    after every update (iterations count from 1).
    """
    if unary.dims != table.dims:
        raise ValueError(f"unary dims {unary.dims.shape} != table dims {table.dims.shape}")
    if unary.num_labels != mu.num_labels:
        raise ValueError(f"unary has {unary.num_labels} labels, compatibility has {mu.num_labels}")
    q = init_beliefs(unary)
    report = ConvergenceReport()
    for it in range(1, config.max_iters + 1):
        q_new = meanfield_step(q, unary, table, mu)
        delta = float(np.max(np.abs(q_new.data - q.data))) if q.data.size else 0.0
        q = q_new
        report.iterations = it
        report.max_delta.append(delta)
        if callback is not None:
            callback(it, q)
        if delta <= config.tol:
            report.converged = True
            break
    return q, report


def argmax_labels(beliefs: BeliefField) -> LabelVolume:
    """MAP readout; ties go to the smallest label index."""
    return LabelVolume(np.argmax(beliefs.data, axis=-1), beliefs.num_labels)
