"""Virtual cameras around a torso-centered 3D pose: orientation, projection, occlusion."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import ProjectionError
from .pose import FRAME_SIZE, Pose2D, Pose3D
from .skeleton import SkeletonModel, default_skeleton

DEFAULT_FOCAL = 1100.0
DEFAULT_DISTANCE = 5000.0
DEFAULT_MARGIN = 10.0
OCCLUSION_RADIUS = 6.0


@dataclass(frozen=True)
class Camera:
    """Pinhole camera on a sphere around the torso center, looking at it.

    World frame: x lateral, y up, z toward the viewer at azimuth 0. Azimuth
    rotates about y; positive elevation looks down from above.
    """

    azimuth: float
    elevation: float
    focal: float = DEFAULT_FOCAL
    subject_distance: float = DEFAULT_DISTANCE

    def __post_init__(self):
        if not -45.0 <= self.elevation <= 45.0:
            raise ValueError(f"elevation {self.elevation} outside [-45, 45]")
        if not 0.0 <= self.azimuth < 360.0:
            raise ValueError(f"azimuth {self.azimuth} outside [0, 360)")
        if self.focal <= 0 or self.subject_distance <= 0:
            raise ValueError("focal and subject_distance must be positive")

    def rotation(self) -> np.ndarray:
        """World-to-camera rotation; rows are image-right, image-down, viewing direction."""
        az, el = np.radians(self.azimuth), np.radians(self.elevation)
        position = np.array([np.sin(az) * np.cos(el), np.sin(el), np.cos(az) * np.cos(el)])
        forward = -position
        right = np.cross(forward, [0.0, 1.0, 0.0])
        right /= np.linalg.norm(right)
        up = np.cross(right, forward)
        return np.stack([right, -up, forward])

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Camera":
        return cls(**{k: float(d[k]) for k in ("azimuth", "elevation", "focal", "subject_distance") if k in d})


def orient(pose: Pose3D, cam: Camera, skeleton: SkeletonModel | None = None) -> Pose3D:
    """Torso-centered pose expressed in the camera frame (x right, y down, z depth)."""
    skeleton = skeleton or default_skeleton()
    centered = pose.coords - pose.torso_center(skeleton)
    return Pose3D(centered @ cam.rotation().T)


def _image_coords(oriented: np.ndarray, cam: Camera, skeleton: SkeletonModel, margin: float, size: int):
    depth = oriented[:, 2] + cam.subject_distance
    if np.any(depth <= 0):
        raise ProjectionError("joint on or behind the camera plane")
    uv = cam.focal * oriented[:, :2] / depth[:, None]
    center = uv[list(skeleton.torso_joints)].mean(axis=0)
    offset = uv - center
    extent = np.abs(offset).max()
    half = size / 2.0
    scale = (half - margin) / extent if extent > 0 else 1.0
    return half + scale * offset, depth


def occluded_mask(uv: np.ndarray, depth: np.ndarray, skeleton: SkeletonModel, radius: float = OCCLUSION_RADIUS):
    """Joints covered by a non-incident bone lying in front of them.

    A bone covers a joint when its 2D segment passes within ``radius`` px of
    the joint's projection and the bone's depth at the closest point (linear
    along the bone) is strictly smaller than the joint's depth.
    """
    n = len(uv)
    occluded = np.zeros(n, dtype=bool)
    for a, b in skeleton.edges:
        seg = uv[b] - uv[a]
        seg_len2 = seg @ seg
        rel = uv - uv[a]
        t = np.clip(rel @ seg / seg_len2, 0.0, 1.0) if seg_len2 > 0 else np.zeros(n)
        closest = uv[a] + t[:, None] * seg
        dist = np.hypot(*(uv - closest).T)
        bone_depth = depth[a] + t * (depth[b] - depth[a])
        hit = (dist <= radius) & (bone_depth < depth)
        hit[[a, b]] = False
        occluded |= hit
    return occluded


def visible_joints(pose: Pose3D, cam: Camera, skeleton: SkeletonModel | None = None,
                   radius: float = OCCLUSION_RADIUS, margin: float = DEFAULT_MARGIN,
                   size: int = FRAME_SIZE) -> np.ndarray:
    skeleton = skeleton or default_skeleton()
    uv, depth = _image_coords(orient(pose, cam, skeleton).coords, cam, skeleton, margin, size)
    return ~occluded_mask(uv, depth, skeleton, radius)


def project(pose: Pose3D, cam: Camera, skeleton: SkeletonModel | None = None,
            margin: float = DEFAULT_MARGIN, size: int = FRAME_SIZE,
            radius: float = OCCLUSION_RADIUS) -> Pose2D:
    """Perspective projection normalized into the ``size`` x ``size`` frame.

    The 2D torso center (mean of projected shoulders and hips) lands on the
    frame center and the pose is uniformly scaled so its farthest joint sits
    ``margin`` px from the border along its dominant axis. Visibility flags
    come from :func:`occluded_mask`.
    """
    skeleton = skeleton or default_skeleton()
    uv, depth = _image_coords(orient(pose, cam, skeleton).coords, cam, skeleton, margin, size)
    return Pose2D(uv, ~occluded_mask(uv, depth, skeleton, radius))


def project_with_depth(pose: Pose3D, cam: Camera, skeleton: SkeletonModel | None = None,
                       margin: float = DEFAULT_MARGIN, size: int = FRAME_SIZE):
    """Normalized image coordinates and per-joint camera depth (mm)."""
    skeleton = skeleton or default_skeleton()
    return _image_coords(orient(pose, cam, skeleton).coords, cam, skeleton, margin, size)
