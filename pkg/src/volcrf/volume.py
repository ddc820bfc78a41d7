"""Grid types, voxel indexing, file I/O and synthetic nodule volumes.

Arrays are held with shape ``(nx, ny, nz)`` (plus a trailing label axis for
per-label fields).  The linear storage order is x-fastest, i.e. Fortran order
over the three spatial axes: ``index = x + nx * (y + ny * z)``.

On disk a volume is a pair ``<name>.json`` (header) + ``<name>.raw``
(payload, no padding).  Scalars are 32-bit little-endian floats, labels are
unsigned bytes.  Per-label fields (unaries, beliefs) use the same scalar
encoding with an extra ``"channels"`` header key; the payload is the channel
volumes concatenated, channel 0 first.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np


class VolumeError(ValueError):
    """Raised for malformed volume files or payloads."""


SCALAR_DTYPE = np.dtype("<f4")
LABEL_DTYPE = np.dtype("u1")
ORDER = "x-fastest"


@dataclass(frozen=True)
class GridDims:
    nx: int
    ny: int
    nz: int

    def __post_init__(self):
        for name in ("nx", "ny", "nz"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def size(self) -> int:
        return self.nx * self.ny * self.nz

    @classmethod
    def of(cls, dims) -> "GridDims":
        if isinstance(dims, GridDims):
            return dims
        nx, ny, nz = dims
        return cls(nx, ny, nz)


def voxel_index(dims: GridDims, x: int, y: int, z: int) -> int:
    """Linear x-fastest index of voxel ``(x, y, z)``."""
    dims = GridDims.of(dims)
    for c, n, name in ((x, dims.nx, "x"), (y, dims.ny, "y"), (z, dims.nz, "z")):
        if not 0 <= c < n:
            raise IndexError(f"{name}={c} outside [0, {n})")
    return x + dims.nx * (y + dims.ny * z)


def _check_shape(data: np.ndarray, dims: GridDims, extra: tuple = ()) -> None:
    if data.shape != dims.shape + extra:
        raise ValueError(f"data shape {data.shape} != {dims.shape + extra}")


class ScalarVolume:
    """Real-valued sample per voxel, stored as float32."""

    def __init__(self, data: np.ndarray):
        data = np.array(data, dtype=np.float32)
        if data.ndim != 3:
            raise ValueError(f"scalar volume must be 3D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("scalar volume contains non-finite samples")
        data.setflags(write=False)
        self.data = data
        self.dims = GridDims(*data.shape)

    def __eq__(self, other):
        return isinstance(other, ScalarVolume) and np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"ScalarVolume(dims={self.dims.shape})"


class LabelVolume:
    """Integer label per voxel in ``[0, num_labels)``."""

    def __init__(self, data: np.ndarray, num_labels: int = 2):
        arr = np.asarray(data)
        if arr.ndim != 3:
            raise ValueError(f"label volume must be 3D, got shape {arr.shape}")
        if num_labels < 1 or num_labels > 256:
            raise ValueError(f"num_labels must be in [1, 256], got {num_labels}")
        if arr.size and (arr.min() < 0 or arr.max() >= num_labels):
            raise ValueError(f"label values must lie in [0, {num_labels})")
        arr = arr.astype(LABEL_DTYPE)
        arr.setflags(write=False)
        self.data = arr
        self.num_labels = int(num_labels)
        self.dims = GridDims(*arr.shape)

    def __eq__(self, other):
        return (
            isinstance(other, LabelVolume)
            and self.num_labels == other.num_labels
            and np.array_equal(self.data, other.data)
        )

    def __repr__(self):
        return f"LabelVolume(dims={self.dims.shape}, num_labels={self.num_labels})"


class _LabelField:
    """Per-voxel, per-label float64 field of shape ``(nx, ny, nz, L)``."""

    def __init__(self, data: np.ndarray):
        data = np.array(data, dtype=np.float64)
        if data.ndim != 4:
            raise ValueError(f"label field must be 4D, got shape {data.shape}")
        if data.shape[-1] < 2:
            raise ValueError("label field needs at least 2 labels")
        if not np.all(np.isfinite(data)):
            raise ValueError("label field contains non-finite values")
        data.setflags(write=False)
        self.data = data
        self.dims = GridDims(*data.shape[:3])
        self.num_labels = data.shape[-1]

    def __repr__(self):
        return f"{type(self).__name__}(dims={self.dims.shape}, num_labels={self.num_labels})"


class UnaryField(_LabelField):
    """Unary potentials U_i(l); larger means more likely."""


class BeliefField(_LabelField):
    """Per-voxel label distributions Q_i(l)."""

    def __init__(self, data: np.ndarray, atol: float = 1e-6):
        super().__init__(data)
        if np.any(self.data < 0) or np.any(self.data > 1):
            raise ValueError("beliefs must lie in [0, 1]")
        dev = np.abs(self.data.sum(axis=-1) - 1.0)
        if dev.size and dev.max() > atol:
            raise ValueError(f"beliefs not normalized (max deviation {dev.max():.3g})")


Volume = Union[ScalarVolume, LabelVolume]


# -- file I/O ---------------------------------------------------------------


def _paths(path) -> tuple[Path, Path]:
    p = Path(path)
    if p.suffix in (".json", ".raw"):
        p = p.with_suffix("")
    return p.with_name(p.name + ".json"), p.with_name(p.name + ".raw")


def _flat(data: np.ndarray) -> np.ndarray:
    return np.ravel(data, order="F")


def _write(path, header: dict, payload: bytes) -> None:
    hpath, rpath = _paths(path)
    hpath.parent.mkdir(parents=True, exist_ok=True)
    hpath.write_text(json.dumps(header, sort_keys=True) + "\n")
    rpath.write_bytes(payload)


def save_volume(volume: Volume, path) -> None:
    """Write ``volume`` as ``<path>.json`` + ``<path>.raw``."""
    if isinstance(volume, ScalarVolume):
        header = {"dims": list(volume.dims.shape), "dtype": "f32le", "order": ORDER}
        payload = _flat(volume.data).astype(SCALAR_DTYPE).tobytes()
    elif isinstance(volume, LabelVolume):
        header = {
            "dims": list(volume.dims.shape),
            "dtype": "u8",
            "order": ORDER,
            "num_labels": volume.num_labels,
        }
        payload = _flat(volume.data).astype(LABEL_DTYPE).tobytes()
    else:
        raise TypeError(f"cannot save {type(volume).__name__}; use save_field")
    _write(path, header, payload)


def save_field(field: _LabelField, path) -> None:
    """Write a per-label field as float32 channels (lossy for float64 input)."""
    header = {
        "dims": list(field.dims.shape),
        "dtype": "f32le",
        "order": ORDER,
        "channels": field.num_labels,
        "kind": "belief" if isinstance(field, BeliefField) else "unary",
    }
    chans = [_flat(field.data[..., c]) for c in range(field.num_labels)]
    payload = np.concatenate(chans).astype(SCALAR_DTYPE).tobytes()
    _write(path, header, payload)


def _read_header(path) -> tuple[dict, bytes]:
    hpath, rpath = _paths(path)
    try:
        header = json.loads(hpath.read_text())
    except FileNotFoundError as e:
        raise VolumeError(f"missing header {hpath}") from e
    except json.JSONDecodeError as e:
        raise VolumeError(f"ill-formed header {hpath}: {e}") from e
    if not isinstance(header, dict):
        raise VolumeError(f"ill-formed header {hpath}: not an object")
    dims = header.get("dims")
    if (
        not isinstance(dims, list)
        or len(dims) != 3
        or not all(isinstance(n, int) and not isinstance(n, bool) and n >= 1 for n in dims)
    ):
        raise VolumeError(f"ill-formed dims in {hpath}: {dims!r}")
    if header.get("order") != ORDER:
        raise VolumeError(f"unsupported order {header.get('order')!r} in {hpath}")
    if header.get("dtype") not in ("f32le", "u8"):
        raise VolumeError(f"unsupported dtype {header.get('dtype')!r} in {hpath}")
    try:
        payload = rpath.read_bytes()
    except FileNotFoundError as e:
        raise VolumeError(f"missing payload {rpath}") from e
    return header, payload


def _decode(payload: bytes, dtype: np.dtype, count: int, where) -> np.ndarray:
    expected = count * dtype.itemsize
    if len(payload) != expected:
        raise VolumeError(
            f"payload length mismatch in {where}: {len(payload)} bytes, expected {expected}"
        )
    return np.frombuffer(payload, dtype=dtype)


def load_volume(path) -> Volume:
    """Read a scalar or label volume written by :func:`save_volume`."""
    header, payload = _read_header(path)
    if "channels" in header:
        raise VolumeError(f"{path} holds a per-label field; use load_field")
    dims = GridDims(*header["dims"])
    if header["dtype"] == "f32le":
        flat = _decode(payload, SCALAR_DTYPE, dims.size, path)
        if not np.all(np.isfinite(flat)):
            raise VolumeError(f"non-finite samples in {path}")
        return ScalarVolume(flat.reshape(dims.shape, order="F"))
    num_labels = header.get("num_labels")
    if not isinstance(num_labels, int) or isinstance(num_labels, bool) or not 1 <= num_labels <= 256:
        raise VolumeError(f"label volume {path} needs integer num_labels in [1, 256]")
    flat = _decode(payload, LABEL_DTYPE, dims.size, path)
    if flat.size and flat.max() >= num_labels:
        raise VolumeError(f"label value {int(flat.max())} >= num_labels={num_labels} in {path}")
    return LabelVolume(flat.reshape(dims.shape, order="F"), num_labels)


def load_field(path, kind: str | None = None) -> _LabelField:
    """Read a per-label field written by :func:`save_field`."""
    header, payload = _read_header(path)
    channels = header.get("channels")
    if header["dtype"] != "f32le" or not isinstance(channels, int) or channels < 2:
        raise VolumeError(f"{path} is not a per-label field")
    kind = kind or header.get("kind", "unary")
    dims = GridDims(*header["dims"])
    flat = _decode(payload, SCALAR_DTYPE, dims.size * channels, path)
    if not np.all(np.isfinite(flat)):
        raise VolumeError(f"non-finite samples in {path}")
    data = np.stack(
        [c.reshape(dims.shape, order="F") for c in np.split(flat, channels)], axis=-1
    ).astype(np.float64)
    if kind == "belief":
        # float32 storage perturbs the per-voxel sums slightly
        data = data / data.sum(axis=-1, keepdims=True)
        return BeliefField(data)
    return UnaryField(data)


# -- synthetic data -----------------------------------------------------------


@dataclass(frozen=True)
class Sphere:
    center: tuple[float, float, float]
    radius: float
    intensity: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"sphere radius must be > 0, got {self.radius}")


def make_rng(seed: int) -> np.random.Generator:
    """The package's single random source: Philox-4x64 (counter based)."""
    return np.random.Generator(np.random.Philox(int(seed)))


def make_synthetic_nodule(
    dims,
    spheres: Sequence[Sphere] = (),
    background_level: float = 0.0,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> tuple[ScalarVolume, LabelVolume]:
    """Noisy spheres on a constant background.

    A voxel is labelled 1 when its centre (integer coordinates) lies within
    distance ``radius`` of any sphere centre.  Overlapping spheres take the
    intensity of the later sphere.  Noise is ``noise_sigma`` times standard
    normal draws from :func:`make_rng`, taken in x-fastest voxel order.
    """
    dims = GridDims.of(dims)
    if not noise_sigma >= 0 or not math.isfinite(noise_sigma):
        raise ValueError(f"noise_sigma must be finite and >= 0, got {noise_sigma}")
    spheres = [s if isinstance(s, Sphere) else Sphere(*s) for s in spheres]
    x, y, z = np.indices(dims.shape, dtype=np.float64)
    intensity = np.full(dims.shape, float(background_level))
    label = np.zeros(dims.shape, dtype=LABEL_DTYPE)
    for s in spheres:
        cx, cy, cz = s.center
        if not (0 <= cx <= dims.nx - 1 and 0 <= cy <= dims.ny - 1 and 0 <= cz <= dims.nz - 1):
            raise ValueError(f"sphere centre {s.center} outside grid {dims.shape}")
        inside = (x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2 <= s.radius**2
        intensity[inside] = s.intensity
        label[inside] = 1
    if noise_sigma > 0:
        noise = make_rng(seed).standard_normal(dims.size)
        intensity += noise_sigma * noise.reshape(dims.shape, order="F")
    return ScalarVolume(intensity), LabelVolume(label, 2)


def unary_from_intensity(volume: ScalarVolume, threshold: float, sharpness: float) -> UnaryField:
    """Two-label logistic unaries: U(1) = sharpness * (I - threshold), U(0) = -U(1)."""
    if not sharpness > 0:
        raise ValueError(f"sharpness must be > 0, got {sharpness}")
    data = np.asarray(volume.data, dtype=np.float64)
    if not np.all(np.isfinite(data)):
        raise ValueError("non-finite intensity")
    u1 = sharpness * (data - threshold)
    return UnaryField(np.stack([-u1, u1], axis=-1))
