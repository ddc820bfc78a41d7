"""Separable Gaussian smoothing of volumes and Gaussian label masks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .volume import GridDims, LabelVolume, ScalarVolume


@dataclass(frozen=True)
class Gaussian1D:
    sigma: float
    radius: int
    weights: np.ndarray  # taps -radius..radius

    @property
    def center(self) -> float:
        return float(self.weights[self.radius])


def default_radius(sigma: float) -> int:
    return max(1, math.ceil(3 * sigma))


def gaussian_kernel_1d(sigma: float, radius: Optional[int] = None) -> Gaussian1D:
    """Normalised taps proportional to exp(-k^2 / 2 sigma^2), k = -radius..radius."""
    if not (sigma > 0 and math.isfinite(sigma)):
        raise ValueError(f"sigma must be > 0, got {sigma!r}")
    if radius is None:
        radius = default_radius(sigma)
    if int(radius) != radius or radius < 1:
        raise ValueError(f"radius must be an integer >= 1, got {radius!r}")
    radius = int(radius)
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-(k * k) / (2 * sigma * sigma))
    w /= w.sum()
    # force exact symmetry against rounding in the normalisation
    w = 0.5 * (w + w[::-1])
    w.setflags(write=False)
    return Gaussian1D(float(sigma), radius, w)


def filter_array(data: np.ndarray, sigma: float, radius: Optional[int] = None) -> np.ndarray:
    """Float64 separable Gaussian filter along x, then y, then z.

    At the borders the kernel is renormalised over the taps that fall
    inside the grid, so constants pass through unchanged.
    """
    g = gaussian_kernel_1d(sigma, radius)
    out = np.asarray(data, dtype=np.float64)
    for axis in range(3):
        n = out.shape[axis]
        num = ndimage.correlate1d(out, g.weights, axis=axis, mode="constant", cval=0.0)
        norm = ndimage.correlate1d(np.ones(n), g.weights, mode="constant", cval=0.0)
        shape = [1, 1, 1]
        shape[axis] = n
        out = num / norm.reshape(shape)
    return out


def filter_volume(volume: ScalarVolume, sigma: float, radius: Optional[int] = None) -> ScalarVolume:
    return ScalarVolume(filter_array(volume.data, sigma, radius))


class MaskVolume:
    """Soft label mask with values in [0, 1]."""

    def __init__(self, data: np.ndarray):
        data = np.array(data, dtype=np.float64)
        if data.ndim != 3:
            raise ValueError(f"mask must be 3D, got shape {data.shape}")
        if not np.all(np.isfinite(data)) or np.any(data < 0) or np.any(data > 1):
            raise ValueError("mask values must lie in [0, 1]")
        data.setflags(write=False)
        self.data = data
        self.dims = GridDims(*data.shape)

    @classmethod
    def from_labels(cls, label: LabelVolume) -> "MaskVolume":
        return cls(label.data.astype(np.float64))

    def to_volume(self) -> ScalarVolume:
        return ScalarVolume(self.data)


def _require_binary(label: LabelVolume) -> None:
    if label.data.size and label.data.max() > 1:
        raise ValueError("label volume must be binary {0, 1}")


def make_label_mask(label: LabelVolume, sigma: float = 1.0, floor: float = 0.01,
                    radius: Optional[int] = None) -> MaskVolume:
    """Blur a binary label, pin labelled voxels to 1 and zero values below ``floor``."""
    _require_binary(label)
    if not 0 <= floor < 1:
        raise ValueError(f"floor must lie in [0, 1), got {floor!r}")
    lab = label.data == 1
    blurred = np.clip(filter_array(lab.astype(np.float64), sigma, radius), 0.0, 1.0)
    mask = np.where(blurred >= floor, blurred, 0.0)
    mask[lab] = 1.0
    return MaskVolume(mask)
