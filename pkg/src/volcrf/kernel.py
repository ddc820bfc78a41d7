"""Neighbourhood systems and precomputed Gaussian edge-kernel tables."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .volume import GridDims, ScalarVolume


class NeighborhoodMode(enum.Enum):
    SIX = 6
    EIGHTEEN = 18
    TWENTY_SIX = 26

    @classmethod
    def parse(cls, value) -> "NeighborhoodMode":
        if isinstance(value, cls):
            return value
        names = {"six": cls.SIX, "6": cls.SIX, "eighteen": cls.EIGHTEEN, "18": cls.EIGHTEEN,
                 "twenty_six": cls.TWENTY_SIX, "twenty-six": cls.TWENTY_SIX, "26": cls.TWENTY_SIX}
        key = str(value).strip().lower()
        if key not in names:
            raise ValueError(f"unknown neighbourhood mode {value!r}")
        return names[key]

    @property
    def max_ring(self) -> int:
        return {6: 1, 18: 2, 26: 3}[self.value]


@dataclass(frozen=True)
class NeighborOffset:
    dx: int
    dy: int
    dz: int
    ring: int
    ring_scale: float = 1.0

    @property
    def delta(self) -> tuple[int, int, int]:
        return (self.dx, self.dy, self.dz)


@dataclass(frozen=True)
class KernelSpec:
    """Parameters of the two-component Gaussian edge kernel.

    ``g_sigma=None`` switches the truncation weight off.  ``alpha`` scales
    every non-face neighbour (rings 2 and 3).
    """

    w1: float = 1.0
    w2: float = 1.0
    theta_alpha: float = 1.0
    theta_beta: float = 1.0
    theta_gamma: float = 1.0
    mode: NeighborhoodMode = NeighborhoodMode.SIX
    alpha: float = 1.0
    g_sigma: Optional[float] = None
    g_radius: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "mode", NeighborhoodMode.parse(self.mode))
        for name in ("theta_alpha", "theta_beta", "theta_gamma"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")
        for name in ("w1", "w2", "alpha"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
        if self.g_sigma is not None:
            if not (self.g_sigma > 0 and math.isfinite(self.g_sigma)):
                raise ValueError(f"g_sigma must be > 0, got {self.g_sigma!r}")
            if not self.g_radius >= 1:
                raise ValueError(f"g_radius must be >= 1, got {self.g_radius!r}")


def neighborhood_offsets(mode, alpha: float = 1.0) -> list[NeighborOffset]:
    """Offsets of the 6/18/26 neighbourhood.

    Ordered by ring, then lexicographically by ``(dx, dy, dz)``; every mode
    therefore starts with the same face offsets in the same order, which
    keeps message sums bit-identical when the extra rings carry zero weight.
    """
    mode = NeighborhoodMode.parse(mode)
    out = []
    for d in itertools.product((-1, 0, 1), repeat=3):
        ring = d[0] ** 2 + d[1] ** 2 + d[2] ** 2
        if 1 <= ring <= mode.max_ring:
            out.append(NeighborOffset(*d, ring=ring, ring_scale=1.0 if ring == 1 else float(alpha)))
    out.sort(key=lambda o: (o.ring, o.delta))
    return out


def _sqnorm(delta_p) -> float:
    return float(sum(float(c) * float(c) for c in delta_p))


def kernel_components(spec: KernelSpec, delta_p, I_i: float, I_j: float) -> tuple[float, float]:
    """Unit-coefficient appearance and smoothness kernels for one edge.

    Returns ``(k1, k2)`` with
    ``k1 = exp(-|dp|^2 / 2 theta_alpha^2 - (I_i - I_j)^2 / 2 theta_beta^2)`` and
    ``k2 = exp(-|dp|^2 / 2 theta_gamma^2)``.  The weights w1, w2 are applied
    later by the mean-field weighted filter step.
    """
    d2 = _sqnorm(delta_p)
    if d2 == 0:
        raise ValueError("kernel is undefined for a zero offset")
    di = float(I_i) - float(I_j)
    k1 = math.exp(-d2 / (2 * spec.theta_alpha**2) - di * di / (2 * spec.theta_beta**2))
    k2 = math.exp(-d2 / (2 * spec.theta_gamma**2))
    return k1, k2


def truncation_weight(spec: KernelSpec, delta_p) -> float:
    d2 = _sqnorm(delta_p)
    if d2 == 0:
        raise ValueError("truncation weight is undefined for a zero offset")
    if spec.g_sigma is None:
        return 1.0
    if math.sqrt(d2) > spec.g_radius:
        return 0.0
    return math.exp(-d2 / (2 * spec.g_sigma**2))


@dataclass(frozen=True)
class KernelTable:
    """Per-voxel, per-offset kernel values.

    ``k1`` and ``k2`` have shape ``(nx, ny, nz, n_offsets)``; ``valid`` marks
    in-bounds neighbours.  Out-of-bounds entries are stored as 0 and never
    read as edges.
    """

    dims: GridDims
    spec: KernelSpec
    offsets: tuple[NeighborOffset, ...]
    k1: np.ndarray
    k2: np.ndarray
    valid: np.ndarray

    @property
    def weighted(self) -> np.ndarray:
        """w1 * k1 + w2 * k2, the total coupling per directed edge."""
        return self.spec.w1 * self.k1 + self.spec.w2 * self.k2

    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Unordered edges as ``(i, j, offset_index)`` linear-index arrays.

        Keeps only offsets with lexicographically positive ``(dx, dy, dz)``
        so each unordered pair appears once.
        """
        nx, ny, _ = self.dims.shape
        ii, jj, oo = [], [], []
        for o_idx, off in enumerate(self.offsets):
            if off.delta <= (0, 0, 0):
                continue
            xs, ys, zs = np.nonzero(self.valid[..., o_idx])
            i = xs + nx * (ys + ny * zs)
            j = (xs + off.dx) + nx * ((ys + off.dy) + ny * (zs + off.dz))
            ii.append(i)
            jj.append(j)
            oo.append(np.full(i.shape, o_idx))
        if not ii:
            empty = np.zeros(0, dtype=np.intp)
            return empty, empty, empty
        i, j, o = (np.concatenate(a) for a in (ii, jj, oo))
        order = np.lexsort((j, i))
        return i[order], j[order], o[order]


def _shift(arr: np.ndarray, delta) -> tuple[np.ndarray, np.ndarray]:
    """Return (neighbour values at i + delta, in-bounds mask) for a 3D array."""
    out = np.zeros_like(arr)
    valid = np.zeros(arr.shape[:3], dtype=bool)
    src, dst = [], []
    for d, n in zip(delta, arr.shape[:3]):
        if d >= 0:
            dst.append(slice(0, n - d))
            src.append(slice(d, n))
        else:
            dst.append(slice(-d, n))
            src.append(slice(0, n + d))
    out[tuple(dst)] = arr[tuple(src)]
    valid[tuple(dst)] = True
    return out, valid


def build_kernel_table(volume: ScalarVolume, spec: KernelSpec) -> KernelTable:
    """Evaluate both kernel components on every in-bounds edge of the grid.

    Each entry is ``ring_scale * truncation_weight * k_m``.  Intensities are
    promoted to float64 before differencing; the expressions are symmetric
    in (i, j) so the table is exactly symmetric.
    """
    intensity = np.asarray(volume.data, dtype=np.float64)
    offsets = tuple(neighborhood_offsets(spec.mode, spec.alpha))
    shape = volume.dims.shape + (len(offsets),)
    k1 = np.zeros(shape)
    k2 = np.zeros(shape)
    valid = np.zeros(shape, dtype=bool)
    for o_idx, off in enumerate(offsets):
        neighbour, ok = _shift(intensity, off.delta)
        d2 = _sqnorm(off.delta)
        scale = off.ring_scale * truncation_weight(spec, off.delta)
        di = intensity - neighbour
        a = np.exp(-d2 / (2 * spec.theta_alpha**2) - di * di / (2 * spec.theta_beta**2))
        s = math.exp(-d2 / (2 * spec.theta_gamma**2))
        k1[..., o_idx] = np.where(ok, scale * a, 0.0)
        k2[..., o_idx] = np.where(ok, scale * s, 0.0)
        valid[..., o_idx] = ok
    return KernelTable(volume.dims, spec, offsets, k1, k2, valid)
