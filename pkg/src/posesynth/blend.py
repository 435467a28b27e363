"""Pose-aware seam blending.

Each pixel averages the aligned images over a square window whose side grows
with the pixel's distance to the rasterized skeleton, weighting every image by
how often the index map names it inside the window. Body pixels get small
windows (detail preserved); background pixels get large ones (seams erased).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.ndimage import distance_transform_edt

from .matcher import AlignedMatch
from .mosaic import IndexMap, MosaicImage
from .pose import FRAME_SIZE, Pose2D
from .skeleton import SkeletonModel, default_skeleton


@dataclass(frozen=True)
class BlendConfig:
    alpha: float = 6.0
    beta: float = 0.25

    def __post_init__(self):
        if self.alpha < 1:
            raise ValueError("alpha must be >= 1")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")


@dataclass(frozen=True, eq=False)
class DistanceField:
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class BlendWeights:
    """Window histograms: ``counts[k]`` pixels of match ``k`` out of ``totals`` scanned."""

    counts: np.ndarray
    totals: np.ndarray
    index: IndexMap

    @property
    def values(self) -> np.ndarray:
        return self.counts / self.totals


def rasterize_segment(p0, p1) -> np.ndarray:
    """Integer (row, col) pixels of a 1-px line from ``p0`` to ``p1`` (x, y)."""
    (x0, y0), (x1, y1) = p0, p1
    steps = int(np.ceil(max(abs(x1 - x0), abs(y1 - y0)))) + 1
    t = np.linspace(0.0, 1.0, steps)
    xs = np.floor(x0 + t * (x1 - x0) + 0.5).astype(int)
    ys = np.floor(y0 + t * (y1 - y0) + 0.5).astype(int)
    return np.unique(np.stack([ys, xs], axis=1), axis=0)


def skeleton_mask(pose: Pose2D, skeleton: SkeletonModel | None = None, shape=(FRAME_SIZE, FRAME_SIZE)) -> np.ndarray:
    """Rasterized bones between visible joints, clipped to the frame."""
    skeleton = skeleton or default_skeleton()
    h, w = shape
    mask = np.zeros(shape, dtype=bool)
    for a, b in skeleton.edges:
        if not (pose.visible[a] and pose.visible[b]):
            continue
        px = rasterize_segment(pose.coords[a], pose.coords[b])
        keep = (px[:, 0] >= 0) & (px[:, 0] < h) & (px[:, 1] >= 0) & (px[:, 1] < w)
        mask[px[keep, 0], px[keep, 1]] = True
    return mask


def skeleton_distance_field(pose: Pose2D, skeleton: SkeletonModel | None = None,
                            shape=(FRAME_SIZE, FRAME_SIZE)) -> DistanceField:
    """Exact Euclidean distance of every pixel to the rasterized skeleton."""
    mask = skeleton_mask(pose, skeleton, shape)
    if not mask.any():
        return DistanceField(np.full(shape, float(np.hypot(*shape))))
    return DistanceField(distance_transform_edt(~mask))


def region_size(d, cfg: BlendConfig = BlendConfig()):
    return cfg.alpha + cfg.beta * d


def window_sides(field: DistanceField, cfg: BlendConfig = BlendConfig()) -> np.ndarray:
    """Odd or even integer window side per pixel: round half-up, at least 1."""
    return np.maximum(1, np.floor(region_size(field.values, cfg) + 0.5)).astype(np.int64)


def _window_bounds(sides, shape):
    h, w = shape
    lo = (sides - 1) // 2
    hi = sides // 2
    rows, cols = np.indices(shape)
    r0 = np.clip(rows - lo, 0, h - 1)
    r1 = np.clip(rows + hi, 0, h - 1)
    c0 = np.clip(cols - lo, 0, w - 1)
    c1 = np.clip(cols + hi, 0, w - 1)
    return r0, r1, c0, c1


def blend_weights(index: IndexMap, field: DistanceField, cfg: BlendConfig = BlendConfig()) -> BlendWeights:
    """Histogram of index values inside each pixel's window, border-clipped.

    A window of side ``s`` spans ``(s - 1) // 2`` pixels before the center and
    ``s // 2`` after it along each axis.
    """
    labels = index.values
    if labels.shape != field.values.shape:
        raise ValueError("index map and distance field differ in shape")
    r0, r1, c0, c1 = _window_bounds(window_sides(field, cfg), labels.shape)
    totals = (r1 - r0 + 1) * (c1 - c0 + 1)
    counts = np.empty((index.n_matches,) + labels.shape, dtype=np.int64)
    for k in range(index.n_matches):
        sat = np.zeros((labels.shape[0] + 1, labels.shape[1] + 1), dtype=np.int64)
        sat[1:, 1:] = np.cumsum(np.cumsum(labels == k + 1, axis=0), axis=1)
        counts[k] = sat[r1 + 1, c1 + 1] - sat[r0, c1 + 1] - sat[r1 + 1, c0] + sat[r0, c0]
    return BlendWeights(counts, totals, index)


def blend(matches: Sequence[AlignedMatch] | np.ndarray, weights: BlendWeights | np.ndarray) -> MosaicImage | np.ndarray:
    """Weighted per-channel sum of the aligned images, rounded half-up.

    With :class:`BlendWeights` the sum is computed in exact integer arithmetic
    and a :class:`MosaicImage` is returned. A raw ``(m, H, W)`` float weight
    array is also accepted, returning bare pixels.
    """
    images = np.stack([m.aligned_image for m in matches]) if not isinstance(matches, np.ndarray) else matches
    if isinstance(weights, BlendWeights):
        acc = np.einsum("khw,khwc->hwc", weights.counts, images.astype(np.int64))
        tot = weights.totals[..., None]
        pixels = ((2 * acc + tot) // (2 * tot)).astype(np.uint8)
        return MosaicImage(pixels, weights.index)
    acc = np.einsum("khw,khwc->hwc", np.asarray(weights, dtype=float), images.astype(float))
    return np.clip(np.floor(acc + 0.5), 0, 255).astype(np.uint8)
