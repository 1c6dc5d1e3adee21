"""Deterministic synthetic regression tasks.

Every sample is generated from its own counter-based stream
``default_rng([seed, split, index])`` (split 0 = train, 1 = test), so any
subset of samples can be produced independently and in any order.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from .binning import Interval
from .encoding import Sample
from .errors import ConfigError

TRAIN, TEST = 0, 1


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (N, p)
    targets: np.ndarray   # (N,)

    def __len__(self) -> int:
        return self.targets.shape[0]

    def __iter__(self) -> Iterator[Sample]:
        for x, t in zip(self.features, self.targets):
            yield Sample(x, float(t))

    def subset(self, n: int) -> "Dataset":
        return Dataset(self.features[:n], self.targets[:n])


@dataclass(frozen=True)
class RotatedPatternTask:
    """A bar with an off-center dot, rotated by integer angles, plus pixel noise."""

    image_size: int = 16
    angle_lo: int = -45
    angle_hi: int = 45
    n_train: int = 5000
    n_test: int = 5000
    seed: int = 0
    noise_sd: float = 0.3
    jitter: float = 1.0  # max center offset in pixels

    def __post_init__(self):
        if self.image_size < 8:
            raise ConfigError(f"image_size must be >= 8, got {self.image_size}")
        if self.angle_lo > self.angle_hi:
            raise ConfigError("empty angle range")
        if self.n_train < 0 or self.n_test < 0:
            raise ConfigError("sample counts must be >= 0")
        if self.noise_sd < 0 or self.jitter < 0:
            raise ConfigError("noise_sd and jitter must be >= 0")

    @property
    def support(self) -> Interval:
        """Half-integer padded range, so unit bins are centered on integer angles."""
        return Interval(self.angle_lo - 0.5, self.angle_hi + 0.5)

    @property
    def n_features(self) -> int:
        return self.image_size ** 2


def _ramp(s):
    # one-pixel linear coverage ramp around the shape boundary
    return np.clip(0.5 - s, 0.0, 1.0)


def pixel_grid(size: int) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-center coordinates, x to the right and y up, origin at the image center."""
    c = np.arange(size, dtype=np.float64) + 0.5 - 0.5 * size
    return np.meshgrid(c, -c)


def render_pattern(angle_deg: float, size: int, half_length: float | None = None,
                   half_thickness: float | None = None, dot_offset: float | None = None,
                   dot_radius: float | None = None, center=(0.0, 0.0)) -> np.ndarray:
    """Noise-free ``size x size`` image, values in [0, 1], rotated counter-clockwise.

    At angle 0 the bar is vertical and the dot sits on its upper half; the
    pattern is mirror-symmetric about the vertical axis.
    """
    a = 0.32 * size if half_length is None else half_length
    w = 0.06 * size if half_thickness is None else half_thickness
    b = 0.6 * a if dot_offset is None else dot_offset
    r = 2.2 * w if dot_radius is None else dot_radius
    x, y = pixel_grid(size)
    x = x - center[0]
    y = y - center[1]
    th = math.radians(angle_deg)
    c, s = math.cos(th), math.sin(th)
    u = x * c + y * s
    v = -(x * s) + y * c
    u2 = u * u
    along = np.maximum(np.abs(v) - a, 0.0)
    bar = _ramp(np.sqrt(u2 + along * along) - w)
    dv = v - b
    dot = _ramp(np.sqrt(u2 + dv * dv) - r)
    return np.maximum(bar, dot)


def _rotated_sample(task: RotatedPatternTask, split: int, i: int):
    rng = np.random.default_rng([task.seed, split, i])
    angle = int(rng.integers(task.angle_lo, task.angle_hi + 1))
    S = task.image_size
    img = render_pattern(
        angle, S,
        half_length=S * rng.uniform(0.26, 0.38),
        half_thickness=S * rng.uniform(0.045, 0.075),
        dot_offset=None,
        center=tuple(rng.uniform(-task.jitter, task.jitter, size=2)),
    )
    if task.noise_sd:
        img = img + rng.normal(0.0, task.noise_sd, size=img.shape)
    return np.clip(img, 0.0, 1.0).ravel(), float(angle)


def _build(n: int, p: int, make) -> Dataset:
    X = np.empty((n, p))
    y = np.empty(n)
    for i in range(n):
        X[i], y[i] = make(i)
    return Dataset(X, y)


def generate_rotated(task: RotatedPatternTask) -> tuple[Dataset, Dataset]:
    p = task.n_features
    train = _build(task.n_train, p, lambda i: _rotated_sample(task, TRAIN, i))
    test = _build(task.n_test, p, lambda i: _rotated_sample(task, TEST, i))
    return train, test


@dataclass(frozen=True)
class ScalarFunction:
    fn: Callable[[np.ndarray], np.ndarray]
    domain: tuple[float, float]
    support: Interval


SCALAR_FUNCTIONS = {
    "sine": ScalarFunction(np.sin, (-math.pi, math.pi), Interval(-1.5, 1.5)),
    "cubic": ScalarFunction(lambda x: x ** 3, (-1.0, 1.0), Interval(-1.5, 1.5)),
    "bump": ScalarFunction(lambda x: np.exp(-x * x), (-2.0, 2.0), Interval(-0.5, 1.5)),
}


@dataclass(frozen=True)
class ScalarTask:
    fn_id: str = "sine"
    noise_sd: float = 0.05
    n_train: int = 1000
    n_test: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.fn_id not in SCALAR_FUNCTIONS:
            raise ConfigError(f"fn_id must be one of {sorted(SCALAR_FUNCTIONS)}, got {self.fn_id!r}")
        if self.n_train < 0 or self.n_test < 0:
            raise ConfigError("sample counts must be >= 0")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be >= 0")

    @property
    def support(self) -> Interval:
        return SCALAR_FUNCTIONS[self.fn_id].support

    @property
    def n_features(self) -> int:
        return 1


def _scalar_sample(task: ScalarTask, split: int, i: int):
    f = SCALAR_FUNCTIONS[task.fn_id]
    rng = np.random.default_rng([task.seed, split, i])
    x = rng.uniform(*f.domain)
    y = float(f.fn(np.float64(x)))
    if task.noise_sd:
        y += rng.normal(0.0, task.noise_sd)
    y = min(max(y, f.support.lo), f.support.hi)
    return np.array([x]), y


def generate_scalar(task: ScalarTask) -> tuple[Dataset, Dataset]:
    train = _build(task.n_train, 1, lambda i: _scalar_sample(task, TRAIN, i))
    test = _build(task.n_test, 1, lambda i: _scalar_sample(task, TEST, i))
    return train, test


# Flat binary dataset format, all fields little-endian:
#   magic   4 bytes  b"LDDS"
#   version uint32   1
#   n       uint64   number of samples
#   p       uint64   features per sample
#   d       uint64   target dimensions (1)
#   body    float64  n*p features (row-major), then n*d targets
MAGIC = b"LDDS"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQQQ")


def dump_dataset(ds: Dataset, path: str | Path) -> None:
    X = np.ascontiguousarray(ds.features, dtype="<f8")
    t = np.ascontiguousarray(ds.targets, dtype="<f8").reshape(len(ds), -1)
    n, p = X.shape if X.ndim == 2 else (len(ds), 0)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, n, p, t.shape[1]))
        fh.write(X.tobytes())
        fh.write(t.tobytes())


def load_dataset(path: str | Path) -> Dataset:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ConfigError(f"{path}: truncated header")
    magic, version, n, p, d = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ConfigError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ConfigError(f"{path}: unsupported format version {version}")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != n * p + n * d:
        raise ConfigError(f"{path}: expected {n * p + n * d} values, found {body.size}")
    X = body[: n * p].reshape(n, p).astype(np.float64)
    t = body[n * p:].reshape(n, d).astype(np.float64)
    return Dataset(X, t[:, 0] if d == 1 else t)
