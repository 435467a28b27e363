"""Per-joint retrieval of the best-matching annotated image for a query pose."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.ndimage import map_coordinates

from .dataset import AnnotatedImage
from .exceptions import DegenerateLimbError, NoCandidateError, SkeletonError
from .pose import COINCIDENT_EPS, Pose2D, SimilarityTransform2D, anchor_joint
from .skeleton import SkeletonModel, default_skeleton


@dataclass(frozen=True, eq=False)
class AlignedMatch:
    joint: int
    image_ref: str
    corpus_index: int
    transform: SimilarityTransform2D
    aligned_pose: Pose2D
    aligned_image: np.ndarray
    residuals: np.ndarray
    score: float


@dataclass(frozen=True, eq=False)
class MatchSet:
    query: Pose2D
    matches: tuple[AlignedMatch, ...]
    skipped: frozenset[int]

    @property
    def image_refs(self) -> list[str]:
        return [m.image_ref for m in self.matches]


def _rotation_scale(src: np.ndarray, dst: complex) -> np.ndarray:
    """Complex factor ``a`` with ``a * src = dst``; 1 where ``src`` is zero.

    Computed from the real and imaginary parts of ``dst * conj(src) / |src|^2``
    so that ``src == dst`` gives exactly 1 (complex division can be off by an ulp).
    """
    sr, si = src.real, src.imag
    dr, di = np.real(dst), np.imag(dst)
    norm2 = sr * sr + si * si
    degenerate = norm2 == 0
    norm2 = np.where(degenerate, 1.0, norm2)
    a = (dr * sr + di * si) / norm2 + 1j * ((di * sr - dr * si) / norm2)
    return np.where(degenerate, 1.0 + 0j, a)


class CorpusIndex:
    """Immutable array view of an annotated corpus for vectorized scoring."""

    def __init__(self, corpus: Sequence[AnnotatedImage], skeleton: SkeletonModel | None = None):
        if len(corpus) == 0:
            raise NoCandidateError("empty corpus")
        self.skeleton = skeleton or default_skeleton()
        self.items = tuple(corpus)
        coords = np.stack([it.pose.coords for it in self.items])
        self.z = coords[..., 0] + 1j * coords[..., 1]
        self.visible = np.stack([it.pose.visible for it in self.items])
        self.z.setflags(write=False)
        self.visible.setflags(write=False)

    def __len__(self):
        return len(self.items)

    def scores(self, query: Pose2D, j: int, i: int | None = None):
        """Distance of every corpus entry to ``query`` at joint ``j``.

        Returns ``(scores, i)``; entries lacking visibility at ``j`` or ``i``
        score ``inf``. Alignment maps each candidate by the complex affine map
        ``z -> a z + b`` pinning joints ``j`` and ``i``; a zero-length candidate
        limb falls back to translation only.
        """
        if i is None:
            i = anchor_joint(self.skeleton, query, j)
        p = query.coords[:, 0] + 1j * query.coords[:, 1]
        dst = p[i] - p[j]
        if dst == 0:
            raise DegenerateLimbError(f"limb ({j}, {i}) has zero length in the query pose")
        valid = self.visible[:, j] & self.visible[:, i]
        out = np.full(len(self), np.inf)
        if not valid.any():
            return out, i
        q = self.z[valid]
        mask = self.visible[valid].copy()
        mask[:, j] = False
        src = q[:, i] - q[:, j]
        a = _rotation_scale(src, dst)
        b = p[j] - a * q[:, j]
        resid = np.abs(p - (a[:, None] * q + b[:, None]))

        dp = np.abs(p - p[j])
        dp = np.where(dp == 0, COINCIDENT_EPS, dp)
        wp = mask / dp
        dq = np.abs(q - q[:, j : j + 1])
        dq = np.where(dq == 0, COINCIDENT_EPS, dq)
        wq = mask / dq
        with np.errstate(invalid="ignore", divide="ignore"):
            wp = np.nan_to_num(wp / wp.sum(axis=1, keepdims=True))
            wq = np.nan_to_num(wq / wq.sum(axis=1, keepdims=True))
        out[valid] = ((wp + wq) * resid).sum(axis=1)
        return out, i

    def transform_for(self, query: Pose2D, k: int, j: int, i: int) -> SimilarityTransform2D:
        p = query.coords[:, 0] + 1j * query.coords[:, 1]
        q = self.z[k]
        a = complex(_rotation_scale(np.array([q[i] - q[j]]), p[i] - p[j])[0])
        b = p[j] - a * q[j]
        c, s = a.real / abs(a), a.imag / abs(a)
        return SimilarityTransform2D(np.array([[c, -s], [s, c]]), float(abs(a)), np.array([b.real, b.imag]))


def warp_image(pixels: np.ndarray, transform: SimilarityTransform2D, shape=None) -> np.ndarray:
    """Resample ``pixels`` into the frame reached by ``transform``.

    Bilinear interpolation, edge-clamped outside the source, rounded half-up.
    """
    h, w = shape or pixels.shape[:2]
    rows, cols = np.mgrid[0:h, 0:w].astype(float)
    inv = transform.inverse()
    pts = inv.apply(np.stack([cols.ravel(), rows.ravel()], axis=1))
    coords = [pts[:, 1], pts[:, 0]]
    out = np.empty((h, w, pixels.shape[2]), dtype=np.uint8)
    for ch in range(pixels.shape[2]):
        v = map_coordinates(pixels[..., ch].astype(float), coords, order=1, mode="nearest")
        out[..., ch] = np.clip(np.floor(v + 0.5), 0, 255).reshape(h, w)
    return out


def _as_index(corpus, skeleton) -> CorpusIndex:
    if isinstance(corpus, CorpusIndex):
        return corpus
    return CorpusIndex(corpus, skeleton)


def best_match(query: Pose2D, j: int, corpus, skeleton: SkeletonModel | None = None) -> AlignedMatch:
    """Corpus entry minimizing the joint-``j`` pose distance; lowest index on ties."""
    index = _as_index(corpus, skeleton)
    scores, i = index.scores(query, j)
    if not np.isfinite(scores).any():
        raise NoCandidateError(f"no corpus entry has joints {j} and {i} visible")
    k = int(np.argmin(scores))
    item = index.items[k]
    T = index.transform_for(query, k, j, i)
    aligned = Pose2D(T.apply(item.pose.coords), item.pose.visible)
    return AlignedMatch(
        joint=j,
        image_ref=item.image_id,
        corpus_index=k,
        transform=T,
        aligned_pose=aligned,
        aligned_image=warp_image(item.pixels, T),
        residuals=np.hypot(*(query.coords - aligned.coords).T),
        score=float(scores[k]),
    )


def match_all(query: Pose2D, corpus, skeleton: SkeletonModel | None = None) -> MatchSet:
    """One :func:`best_match` per visible query joint.

    Occluded joints, and joints without a visible neighbor to anchor the
    alignment, are listed in ``skipped``.
    """
    index = _as_index(corpus, skeleton)
    matches, skipped = [], set()
    for j in range(query.n_joints):
        if not query.visible[j]:
            skipped.add(j)
            continue
        try:
            anchor_joint(index.skeleton, query, j)
        except SkeletonError:
            skipped.add(j)
            continue
        matches.append(best_match(query, j, index))
    return MatchSet(query, tuple(matches), frozenset(skipped))


def trace_records(matchset: MatchSet, query_id) -> list[dict]:
    """Audit rows ``{query_id, joint, image_id, score}``."""
    return [
        {"query_id": query_id, "joint": m.joint, "image_id": m.image_ref, "score": m.score}
        for m in matchset.matches
    ]
