"""Probability maps, index map and raw copy-paste mosaic from a set of matches."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import Delaunay

from .exceptions import DegenerateGeometryError
from .matcher import AlignedMatch
from .pose import FRAME_SIZE

DEFAULT_SIGMA = 10.0


@dataclass(frozen=True, eq=False)
class ProbabilityMap:
    values: np.ndarray
    match_joint: int
    sigma: float


@dataclass(frozen=True, eq=False)
class IndexMap:
    """Per-pixel 1-based index into the match list."""

    values: np.ndarray
    n_matches: int


@dataclass(frozen=True, eq=False)
class MosaicImage:
    pixels: np.ndarray
    provenance: IndexMap


def vertex_probabilities(match: AlignedMatch, sigma: float = DEFAULT_SIGMA) -> np.ndarray:
    """``exp(-residual^2 / sigma^2)`` per joint; 0 for joints the match does not show."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    prob = np.exp(-(match.residuals**2) / sigma**2)
    return np.where(match.aligned_pose.visible, prob, 0.0)


def frame_anchors(shape) -> np.ndarray:
    """Corners and edge midpoints of the pixel grid, as (x, y)."""
    h, w = shape
    xs = (0.0, (w - 1) / 2, w - 1.0)
    ys = (0.0, (h - 1) / 2, h - 1.0)
    return np.array([(x, y) for y in ys for x in xs if not (x == xs[1] and y == ys[1])])


def rasterize_barycentric(points: np.ndarray, values: np.ndarray, simplices: np.ndarray, shape) -> np.ndarray:
    """Piecewise-linear interpolation of vertex values at every pixel center.

    Triangles are visited in order and each pixel keeps the value from the
    first triangle containing it (edges inclusive), so shared edges and
    vertices belong to the lowest-index triangle. Values are clipped to the
    owning triangle's vertex range.
    """
    h, w = shape
    out = np.zeros((h, w))
    owned = np.zeros((h, w), dtype=bool)
    tol = 1e-10
    for tri in simplices:
        (xa, ya), (xb, yb), (xc, yc) = points[tri]
        va, vb, vc = values[tri]
        denom = (yb - yc) * (xa - xc) + (xc - xb) * (ya - yc)
        if denom == 0:
            continue
        x0 = max(int(np.floor(min(xa, xb, xc))), 0)
        x1 = min(int(np.ceil(max(xa, xb, xc))), w - 1)
        y0 = max(int(np.floor(min(ya, yb, yc))), 0)
        y1 = min(int(np.ceil(max(ya, yb, yc))), h - 1)
        if x0 > x1 or y0 > y1:
            continue
        ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1].astype(float)
        la = ((yb - yc) * (xs - xc) + (xc - xb) * (ys - yc)) / denom
        lb = ((yc - ya) * (xs - xc) + (xa - xc) * (ys - yc)) / denom
        lc = 1.0 - la - lb
        take = (la >= -tol) & (lb >= -tol) & (lc >= -tol) & ~owned[y0 : y1 + 1, x0 : x1 + 1]
        if not take.any():
            continue
        val = la * va + lb * vb + lc * vc
        val = np.clip(val, min(va, vb, vc), max(va, vb, vc))
        region = out[y0 : y1 + 1, x0 : x1 + 1]
        region[take] = val[take]
        owned[y0 : y1 + 1, x0 : x1 + 1] |= take
    if not owned.all():
        raise DegenerateGeometryError("triangulation does not cover the frame")
    return out


def triangulate(match: AlignedMatch, sigma: float = DEFAULT_SIGMA, shape=(FRAME_SIZE, FRAME_SIZE)):
    """Vertices, vertex values and Delaunay simplices for one match.

    The aligned joints are augmented with eight frame anchors, each carrying
    the probability of its nearest joint (lowest index on ties).
    """
    joints = match.aligned_pose.coords
    centered = joints - joints.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if len(joints) < 3 or sv[1] <= 1e-9 * max(sv[0], 1.0):
        raise DegenerateGeometryError("aligned joints are collinear")
    vprob = vertex_probabilities(match, sigma)
    anchors = frame_anchors(shape)
    nearest = np.argmin(np.linalg.norm(anchors[:, None, :] - joints[None], axis=2), axis=1)
    points = np.vstack([joints, anchors])
    values = np.concatenate([vprob, vprob[nearest]])
    tri = Delaunay(points)
    return points, values, tri.simplices


def probability_map(match: AlignedMatch, sigma: float = DEFAULT_SIGMA, shape=(FRAME_SIZE, FRAME_SIZE)) -> ProbabilityMap:
    points, values, simplices = triangulate(match, sigma, shape)
    return ProbabilityMap(rasterize_barycentric(points, values, simplices, shape), match.joint, float(sigma))


def index_map(maps: Sequence[ProbabilityMap]) -> IndexMap:
    """Per-pixel argmax over the maps (1-based, lowest index on ties)."""
    if len(maps) == 0:
        raise ValueError("need at least one probability map")
    stack = np.stack([m.values for m in maps])
    return IndexMap(np.argmax(stack, axis=0).astype(np.int32) + 1, len(maps))


def raw_mosaic(index: IndexMap, matches: Sequence[AlignedMatch]) -> MosaicImage:
    """Copy each pixel from the aligned image named by the index map."""
    images = np.stack([m.aligned_image for m in matches])
    k = index.values - 1
    rows, cols = np.indices(k.shape)
    return MosaicImage(images[k, rows, cols], index)
