"""Fuse numeric attributes and TF-IDF features into an H x W grayscale image.

The composite vector ``[standardized(gas, len), tfidf]`` is linearly resampled
to ``H' * W`` points, reshaped row-major into ``H'`` rows, and a final row
holding the log-scaled transaction value is appended.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .container import ContainerError, read_container, write_container

NUM_NUMERIC = 2  # gas, input length
WEI_DECIMALS = 18
_SCALER_VERSION = 1
_IMAGES_VERSION = 1


@dataclass(frozen=True)
class ImageSpec:
    """Image geometry. ``height`` includes the appended value row."""

    height: int = 24
    width: int = 24

    def __post_init__(self):
        if self.height % 4 or self.width % 4 or self.height < 4 or self.width < 4:
            raise ValueError(
                f"image dims must be positive multiples of 4, got {self.height}x{self.width}"
            )

    @property
    def body_rows(self) -> int:
        return self.height - 1

    @property
    def body_size(self) -> int:
        return self.body_rows * self.width


@dataclass(frozen=True)
class ScalerParams:
    mean: np.ndarray
    std: np.ndarray
    degenerate: tuple[int, ...] = field(default=())

    @property
    def dim(self) -> int:
        return len(self.mean)

    def save(self, path: str | os.PathLike) -> None:
        write_container(
            path,
            "scaler",
            _SCALER_VERSION,
            {"dim": self.dim, "degenerate": list(self.degenerate), "ddof": 0},
            {"mean": self.mean.astype("<f8"), "std": self.std.astype("<f8")},
        )

    @classmethod
    def load(cls, path: str | os.PathLike) -> ScalerParams:
        meta, blobs = read_container(path, "scaler", _SCALER_VERSION)
        try:
            return cls(blobs["mean"], blobs["std"], tuple(meta["degenerate"]))
        except KeyError as exc:
            raise ContainerError(f"{path}: missing field {exc}") from exc


def fit_scaler(rows: Sequence[Sequence[float]]) -> ScalerParams:
    """Per-column mean and population std; zero-variance columns get std 1."""
    m = np.asarray(rows, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 2:
        raise ValueError("fit_scaler needs at least 2 rows")
    mean = m.mean(axis=0)
    std = m.std(axis=0)
    degenerate = tuple(int(j) for j in np.flatnonzero(std == 0))
    if degenerate:
        warnings.warn(f"zero-variance numeric columns {degenerate}; using std=1", stacklevel=2)
        std = std.copy()
        std[list(degenerate)] = 1.0
    return ScalerParams(mean, std, degenerate)


def standardize(params: ScalerParams, m: Sequence[float]) -> np.ndarray:
    return (np.asarray(m, dtype=np.float64) - params.mean) / params.std


def assemble(u: np.ndarray, u_op: np.ndarray) -> np.ndarray:
    """Concatenate numeric features (first) with the opcode features."""
    u = np.asarray(u, dtype=np.float64)
    u_op = np.asarray(u_op, dtype=np.float64)
    if u.shape != (NUM_NUMERIC,):
        raise ValueError(f"numeric feature vector must have length {NUM_NUMERIC}, got {u.shape}")
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(u_op))):
        raise ValueError("features must be finite")
    return np.concatenate([u, u_op])


def resample(x: np.ndarray, n: int) -> np.ndarray:
    """Linearly resample ``x`` onto ``n`` evenly spaced points (endpoints kept)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or len(x) < 2:
        raise ValueError("resample needs a 1-D vector of length >= 2")
    if n == len(x):
        return x.copy()
    src = np.linspace(0.0, 1.0, len(x))
    dst = np.linspace(0.0, 1.0, n)
    # clip absorbs last-ulp overshoot from the slope form used by np.interp
    return np.clip(np.interp(dst, src, x), x.min(), x.max())


def interpolate_reshape(x: np.ndarray, spec: ImageSpec) -> np.ndarray:
    return resample(x, spec.body_size).reshape(spec.body_rows, spec.width)


def encode_value(v: int) -> float:
    """Map a wei amount to ``255 * log10(v) / 18``, clamped to [0, 255]."""
    v = int(v)
    if v < 0:
        raise ValueError("transaction value must be non-negative")
    if v == 0:
        return 0.0
    return min(255.0, max(0.0, 255.0 * math.log10(v) / WEI_DECIMALS))


def build_image(x: np.ndarray, v: int, spec: ImageSpec) -> np.ndarray:
    body = interpolate_reshape(x, spec)
    value_row = np.full((1, spec.width), encode_value(v))
    return np.vstack([body, value_row])


def save_images(
    path: str | os.PathLike, images: np.ndarray, labels: Sequence[int] | None = None
) -> None:
    """Write an ``(count, H, W)`` float32 batch plus optional uint8 labels."""
    images = np.asarray(images, dtype=np.float32)
    if images.ndim != 3:
        raise ValueError("images must be (count, H, W)")
    count, h, w = images.shape
    blobs = {"pixels": images.astype("<f4")}
    if labels is not None:
        labels = np.asarray(labels, dtype=np.uint8)
        if labels.shape != (count,):
            raise ValueError("one label per image required")
        blobs["labels"] = labels
    meta = {"count": count, "height": h, "width": w, "has_labels": labels is not None}
    write_container(path, "images", _IMAGES_VERSION, meta, blobs)


def load_images(path: str | os.PathLike) -> tuple[np.ndarray, np.ndarray | None]:
    meta, blobs = read_container(path, "images", _IMAGES_VERSION)
    pixels = blobs.get("pixels")
    if pixels is None or pixels.shape != (meta["count"], meta["height"], meta["width"]):
        raise ContainerError(f"{path}: pixel payload does not match header")
    labels = blobs.get("labels") if meta["has_labels"] else None
    if meta["has_labels"] and (labels is None or len(labels) != meta["count"]):
        raise ContainerError(f"{path}: label payload does not match header")
    return pixels, labels
