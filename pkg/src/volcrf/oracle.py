"""Brute-force Gibbs distribution over all labelings of a tiny grid.

The energy matches the mean-field update used in :mod:`volcrf.meanfield`:

    E(x) = -sum_i U_i(x_i) + sum_{i<j} mu(x_i, x_j) * (w1 K1_ij + w2 K2_ij)

so that Q_i(l) ~ exp(U_i(l) - sum_j K_ij sum_l' mu(l, l') Q_j(l')) is the
mean-field fixed point of P(x) ~ exp(-E(x)).  Only for sanity checking;
cost is L ** n_voxels.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .kernel import KernelSpec, KernelTable, build_kernel_table
from .meanfield import CompatibilityMatrix
from .volume import GridDims, LabelVolume, ScalarVolume, UnaryField

MAX_CONFIGS = 2**20


class EnumerationRefused(ValueError):
    """The grid has too many labelings to enumerate."""


@dataclass(frozen=True)
class ExactMarginals:
    marginals: np.ndarray  # (nx, ny, nz, L)
    log_z: float


def _flat_unary(unary: UnaryField) -> np.ndarray:
    return unary.data.transpose(2, 1, 0, 3).reshape(-1, unary.num_labels)


def _edge_list(table: KernelTable) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    i, j, o = table.edges()
    w = table.weighted.transpose(2, 1, 0, 3).reshape(-1, len(table.offsets))
    return i, j, w[i, o]


def _check(unary: UnaryField, table: KernelTable, mu: CompatibilityMatrix) -> None:
    if unary.dims != table.dims:
        raise ValueError(f"unary dims {unary.dims.shape} != table dims {table.dims.shape}")
    if unary.num_labels != mu.num_labels:
        raise ValueError(f"unary has {unary.num_labels} labels, compatibility has {mu.num_labels}")


def _energies(configs: np.ndarray, unary: UnaryField, table: KernelTable,
              mu: CompatibilityMatrix) -> np.ndarray:
    u = _flat_unary(unary)
    n = u.shape[0]
    e = -u[np.arange(n), configs].sum(axis=-1)
    for i, j, k in zip(*_edge_list(table)):
        e = e + mu.matrix[configs[..., i], configs[..., j]] * k
    return e


def config_energy(config: LabelVolume, unary: UnaryField, table: KernelTable,
                  mu: CompatibilityMatrix) -> float:
    """Gibbs energy of one labeling."""
    _check(unary, table, mu)
    if config.dims != unary.dims:
        raise ValueError(f"config dims {config.dims.shape} != unary dims {unary.dims.shape}")
    flat = np.ravel(config.data, order="F").astype(np.intp)
    if flat.max(initial=0) >= unary.num_labels:
        raise ValueError("configuration label out of range")
    return float(_energies(flat, unary, table, mu))


def _all_configs(dims: GridDims, num_labels: int) -> np.ndarray:
    if num_labels ** dims.size > MAX_CONFIGS:
        raise EnumerationRefused(
            f"{num_labels}^{dims.size} labelings exceeds the limit of {MAX_CONFIGS}"
        )
    # lexicographic, voxel 0 (x-fastest order) most significant
    return np.array(list(itertools.product(range(num_labels), repeat=dims.size)), dtype=np.intp)


def exact_marginals(unary: UnaryField, table: KernelTable, mu: CompatibilityMatrix) -> ExactMarginals:
    _check(unary, table, mu)
    configs = _all_configs(unary.dims, unary.num_labels)
    neg_e = -_energies(configs, unary, table, mu)
    log_z = float(logsumexp(neg_e))
    p = np.exp(neg_e - log_z)
    n, L = unary.dims.size, unary.num_labels
    flat = np.zeros((n, L))
    for l in range(L):
        flat[:, l] = ((configs == l) * p[:, None]).sum(axis=0)
    flat /= flat.sum(axis=-1, keepdims=True)
    nx, ny, nz = unary.dims.shape
    marg = flat.reshape(nz, ny, nx, L).transpose(2, 1, 0, 3)
    return ExactMarginals(np.ascontiguousarray(marg), log_z)


def map_config(unary: UnaryField, table: KernelTable, mu: CompatibilityMatrix) -> LabelVolume:
    """Minimum-energy labeling; ties go to the lexicographically smallest."""
    _check(unary, table, mu)
    configs = _all_configs(unary.dims, unary.num_labels)
    best = configs[int(np.argmin(_energies(configs, unary, table, mu)))]
    return LabelVolume(best.reshape(unary.dims.shape, order="F"), unary.num_labels)


def max_pairwise_field(table: KernelTable, mu: CompatibilityMatrix) -> float:
    """Largest total coupling any voxel can receive: max_i sum_j K_ij * max|mu|."""
    if table.dims.size == 0 or not len(table.offsets):
        return 0.0
    return float(table.weighted.sum(axis=-1).max() * np.abs(mu.matrix).max())


def random_instance(rng: np.random.Generator, dims=(2, 2, 2), num_labels: int = 2,
                    mode="six", strength: float | None = 3.0, coupled: bool = True,
                    potts_scale: float | None = None):
    """Random (image, unary, table, mu) for oracle comparisons.

    With ``strength`` set, each voxel's unaries have magnitude at least
    ``strength`` times :func:`max_pairwise_field`; with ``strength=None`` they
    are standard normal.  ``coupled=False`` uses mu = 0; otherwise mu is Potts
    with ``potts_scale`` (drawn from [0.5, 2] when None).
    """
    dims = GridDims.of(dims)
    image = ScalarVolume(rng.uniform(0.0, 1.0, dims.shape))
    spec = KernelSpec(
        w1=float(rng.uniform(0.2, 1.0)), w2=float(rng.uniform(0.2, 1.0)),
        theta_alpha=float(rng.uniform(0.5, 2.0)), theta_beta=float(rng.uniform(0.2, 1.0)),
        theta_gamma=float(rng.uniform(0.5, 2.0)), mode=mode, alpha=float(rng.uniform(0.0, 1.0)),
    )
    table = build_kernel_table(image, spec)
    if coupled:
        scale = float(rng.uniform(0.5, 2.0)) if potts_scale is None else potts_scale
        mu = CompatibilityMatrix.potts(num_labels, scale)
    else:
        mu = CompatibilityMatrix.zeros(num_labels)
    shape = dims.shape + (num_labels,)
    if strength is None:
        u = rng.standard_normal(shape)
    else:
        p = max(max_pairwise_field(table, mu), 1e-3)
        mag = rng.uniform(strength * p, 2 * strength * p, dims.shape)
        winner = rng.integers(0, num_labels, dims.shape)
        sign = np.where(np.arange(num_labels) == winner[..., None], 1.0, -1.0)
        u = mag[..., None] * sign
    return image, UnaryField(u), table, mu
