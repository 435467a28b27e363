"""2D/3D pose containers and the per-joint pose geometry used for retrieval."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    CoincidentJointError,
    DegenerateGeometryError,
    DegenerateLimbError,
    SkeletonError,
)
from .skeleton import SkeletonModel

FRAME_SIZE = 220
COINCIDENT_EPS = 1e-3


def _frozen(a, dtype, shape_tail):
    arr = np.array(a, dtype=dtype, copy=True)
    if arr.ndim != 1 + len(shape_tail) or arr.shape[1:] != shape_tail:
        raise SkeletonError(f"expected array of shape (n, {', '.join(map(str, shape_tail))}), got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Pose2D:
    """Joint pixel coordinates (x = column, y = row) with per-joint visibility."""

    coords: np.ndarray
    visible: np.ndarray | None = None

    def __post_init__(self):
        coords = _frozen(self.coords, np.float64, (2,))
        if self.visible is None:
            vis = np.ones(len(coords), dtype=bool)
        else:
            vis = np.array(self.visible, dtype=bool, copy=True)
        if vis.shape != (len(coords),):
            raise SkeletonError("visibility flags must cover every joint")
        vis.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "visible", vis)

    @property
    def n_joints(self) -> int:
        return len(self.coords)

    def check(self, skeleton: SkeletonModel) -> "Pose2D":
        if self.n_joints != skeleton.joint_count:
            raise SkeletonError(f"pose has {self.n_joints} joints, skeleton has {skeleton.joint_count}")
        return self

    def __eq__(self, other):
        if not isinstance(other, Pose2D):
            return NotImplemented
        return np.array_equal(self.coords, other.coords) and np.array_equal(self.visible, other.visible)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Pose3D:
    """Joint coordinates in millimeters."""

    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", _frozen(self.coords, np.float64, (3,)))

    @property
    def n_joints(self) -> int:
        return len(self.coords)

    def torso_center(self, skeleton: SkeletonModel) -> np.ndarray:
        return self.coords[list(skeleton.torso_joints)].mean(axis=0)

    def centered(self, skeleton: SkeletonModel) -> "Pose3D":
        """Translate so the mean of shoulders and hips is the origin."""
        return Pose3D(self.coords - self.torso_center(skeleton))

    def __eq__(self, other):
        if not isinstance(other, Pose3D):
            return NotImplemented
        return np.array_equal(self.coords, other.coords)

    __hash__ = None


@dataclass(frozen=True)
class SimilarityTransform2D:
    """x -> scale * rotation @ x + translation."""

    rotation: np.ndarray
    scale: float
    translation: np.ndarray

    @classmethod
    def identity(cls) -> "SimilarityTransform2D":
        return cls(np.eye(2), 1.0, np.zeros(2))

    @classmethod
    def from_angle(cls, theta: float, scale: float = 1.0, translation=(0.0, 0.0)) -> "SimilarityTransform2D":
        c, s = np.cos(theta), np.sin(theta)
        return cls(np.array([[c, -s], [s, c]]), float(scale), np.asarray(translation, dtype=float))

    @property
    def angle(self) -> float:
        return float(np.arctan2(self.rotation[1, 0], self.rotation[0, 0]))

    @property
    def matrix(self) -> np.ndarray:
        """2x3 affine matrix."""
        return np.hstack([self.scale * self.rotation, self.translation[:, None]])

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return self.scale * pts @ self.rotation.T + self.translation

    def inverse(self) -> "SimilarityTransform2D":
        rt = self.rotation.T
        return SimilarityTransform2D(rt, 1.0 / self.scale, -(rt @ self.translation) / self.scale)

    def to_dict(self) -> dict:
        return {"angle": self.angle, "scale": self.scale, "translation": self.translation.tolist()}


def farthest_connected_joint(skeleton: SkeletonModel, p: Pose2D, j: int, candidates=None) -> int:
    """Neighbor of ``j`` farthest from it in ``p``; lowest index on ties.

    ``candidates`` optionally restricts the neighbors considered (e.g. to
    joints annotated as visible).
    """
    nbrs = skeleton.neighbors(j)
    if candidates is not None:
        allowed = set(candidates)
        nbrs = tuple(k for k in nbrs if k in allowed)
    if not nbrs:
        raise SkeletonError(f"joint {j} has no connected neighbor")
    d = np.linalg.norm(p.coords[list(nbrs)] - p.coords[j], axis=1)
    return nbrs[int(np.argmax(d))]


def anchor_joint(skeleton: SkeletonModel, p: Pose2D, j: int) -> int:
    """Farthest neighbor of ``j`` among the joints visible in ``p``."""
    visible = [k for k in skeleton.neighbors(j) if p.visible[k]]
    if not visible:
        raise SkeletonError(f"joint {j} has no visible connected neighbor")
    return farthest_connected_joint(skeleton, p, j, visible)


def align_pose(q: Pose2D, p: Pose2D, j: int, i: int) -> tuple[SimilarityTransform2D, Pose2D]:
    """Similarity transform pinning ``q_j`` onto ``p_j`` and ``q_i`` onto ``p_i``.

    A pure rotation+translation cannot meet both constraints when the limb
    lengths differ, so a uniform scale is included.
    """
    src = q.coords[i] - q.coords[j]
    dst = p.coords[i] - p.coords[j]
    src_len = float(np.hypot(*src))
    dst_len = float(np.hypot(*dst))
    if src_len == 0.0:
        raise DegenerateLimbError(f"limb ({j}, {i}) has zero length in the candidate pose")
    if dst_len == 0.0:
        raise DegenerateLimbError(f"limb ({j}, {i}) has zero length in the query pose")
    theta = np.arctan2(src[0] * dst[1] - src[1] * dst[0], src @ dst)
    c, s = np.cos(theta), np.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    scale = dst_len / src_len
    t = p.coords[j] - scale * rot @ q.coords[j]
    T = SimilarityTransform2D(rot, scale, t)
    return T, Pose2D(T.apply(q.coords), q.visible)


def translate_pose(q: Pose2D, p: Pose2D, j: int) -> tuple[SimilarityTransform2D, Pose2D]:
    """Translation-only fallback used when the anchoring limb is degenerate."""
    T = SimilarityTransform2D(np.eye(2), 1.0, p.coords[j] - q.coords[j])
    return T, Pose2D(T.apply(q.coords), q.visible)


def joint_weights(p: Pose2D | np.ndarray, j: int, mask=None, eps: float | None = None) -> np.ndarray:
    """Inverse-distance weights of every joint relative to joint ``j``.

    The weight of ``j`` itself is 0. When ``mask`` is given, only masked joints
    receive weight and the normalization runs over them. A joint coinciding
    with ``j`` raises :class:`CoincidentJointError` unless ``eps`` is set, in
    which case ``eps`` stands in for the zero distance.
    """
    coords = p.coords if isinstance(p, Pose2D) else np.asarray(p, dtype=float)
    n = len(coords)
    use = np.ones(n, dtype=bool) if mask is None else np.array(mask, dtype=bool)
    use[j] = False
    d = np.hypot(*(coords - coords[j]).T)
    if np.any(use & (d == 0)):
        if eps is None:
            raise CoincidentJointError(f"a joint coincides with joint {j}")
        d = np.where(d == 0, eps, d)
    w = np.zeros(n)
    w[use] = 1.0 / d[use]
    total = w.sum()
    return w / total if total > 0 else w


def pose_distance(p: Pose2D, q: Pose2D, j: int, skeleton: SkeletonModel, i: int | None = None) -> float:
    """Alignment-conditioned weighted distance between query ``p`` and candidate ``q`` at joint ``j``.

    ``q`` is aligned onto ``p`` at the limb (j, i), where ``i`` defaults to the
    farthest visible neighbor of ``j`` in ``p``; residuals are then summed with the
    inverse-distance weights of both poses. Joints invisible in ``q`` do not
    contribute.
    """
    if i is None:
        i = anchor_joint(skeleton, p, j)
    _, q_aligned = align_pose(q, p, j, i)
    mask = q.visible
    w = joint_weights(p, j, mask, eps=COINCIDENT_EPS) + joint_weights(q, j, mask, eps=COINCIDENT_EPS)
    residual = np.hypot(*(p.coords - q_aligned.coords).T)
    return float(w @ residual)


def mirror(pose: Pose2D, skeleton: SkeletonModel, width: int = FRAME_SIZE) -> Pose2D:
    """Horizontal flip of the frame, with left/right joint labels swapped."""
    perm = skeleton.swap_permutation()
    coords = pose.coords[perm].copy()
    coords[:, 0] = (width - 1) - coords[:, 0]
    return Pose2D(coords, pose.visible[perm])


# -- rigid 3D alignment ------------------------------------------------------


def _weighted_kabsch(a, b, w):
    wsum = w.sum()
    ca = w @ a / wsum
    cb = w @ b / wsum
    h = ((a - ca) * w[:, None]).T @ (b - cb)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    if d == 0:
        d = 1.0
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return rot, cb - rot @ ca


def _mean_residual(a, b, rot, t):
    return float(np.linalg.norm(a @ rot.T + t - b, axis=1).mean())


def procrustes_rigid(a: Pose3D | np.ndarray, b: Pose3D | np.ndarray, max_iter: int = 200, tol: float = 1e-12):
    """Rotation and translation taking ``a`` onto ``b`` with minimal mean joint distance.

    Returns ``(rotation, translation, error)`` where ``error`` is the mean
    per-joint distance after alignment, in the units of the inputs. The
    least-squares (Kabsch) solution seeds an iteratively reweighted refinement
    that minimizes the mean distance itself; a second run seeded at the
    identity guarantees the error never exceeds the unaligned one. Reflections
    are excluded.
    """
    a = np.asarray(getattr(a, "coords", a), dtype=float)
    b = np.asarray(getattr(b, "coords", b), dtype=float)
    if a.shape != b.shape or a.ndim != 2 or a.shape[1] != 3:
        raise DegenerateGeometryError("point sets must both be (n, 3)")
    if len(a) < 3:
        raise DegenerateGeometryError("need at least three points")
    for pts in (a, b):
        sv = np.linalg.svd(pts - pts.mean(axis=0), compute_uv=False)
        if sv[1] <= 1e-9 * max(sv[0], 1.0):
            raise DegenerateGeometryError("collinear point configuration")

    n = len(a)
    starts = [_weighted_kabsch(a, b, np.ones(n)), (np.eye(3), np.zeros(3))]
    best = None
    for rot, t in starts:
        err = _mean_residual(a, b, rot, t)
        for _ in range(max_iter):
            r = np.linalg.norm(a @ rot.T + t - b, axis=1)
            w = 1.0 / np.maximum(r, 1e-12)
            rot_new, t_new = _weighted_kabsch(a, b, w)
            err_new = _mean_residual(a, b, rot_new, t_new)
            if err_new > err:
                break
            done = err - err_new <= tol * max(err, 1.0)
            rot, t, err = rot_new, t_new, err_new
            if done:
                break
        if best is None or err < best[2]:
            best = (rot, t, err)
    return best
