"""Annotated-image and mocap corpora: file formats and data protocols.

On disk a corpus root holds ``annotations.jsonl`` (one record per image,
rasters as 8-bit RGB PNG referenced relative to the root) and optionally
``mocap.jsonl`` with millimeter joint coordinates.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from .camera import Camera, orient, project
from .exceptions import CorpusFormatError, SkeletonError
from .pose import FRAME_SIZE, Pose2D, Pose3D, mirror
from .skeleton import SkeletonModel, default_skeleton

log = logging.getLogger(__name__)

ANNOTATIONS_FILE = "annotations.jsonl"
MOCAP_FILE = "mocap.jsonl"


@dataclass(frozen=True, eq=False)
class AnnotatedImage:
    image_id: str
    pixels: np.ndarray
    pose: Pose2D
    source: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.shape != (FRAME_SIZE, FRAME_SIZE, 3) or px.dtype != np.uint8:
            raise CorpusFormatError(f"{self.image_id}: raster must be {FRAME_SIZE}x{FRAME_SIZE} RGB uint8, got {px.shape} {px.dtype}")
        c = self.pose.coords
        if np.any(c < -0.5) or np.any(c >= FRAME_SIZE - 0.5) or not np.all(np.isfinite(c)):
            raise CorpusFormatError(f"{self.image_id}: joint outside the raster")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)


@dataclass(frozen=True, eq=False)
class MocapPose:
    pose_id: str
    pose: Pose3D
    sequence_id: str = ""


@dataclass(frozen=True, eq=False)
class OrientedSample:
    """Camera-oriented, torso-centered 3D pose with its projected 2D pose."""

    pose3d: Pose3D
    camera: Camera
    pose2d: Pose2D
    pose_id: str = ""


class AnnotationSet(list):
    """List of loaded :class:`AnnotatedImage` that also records skipped records.

    ``skipped`` holds ``(line_number, reason)`` pairs.
    """

    def __init__(self, items=(), skipped=()):
        super().__init__(items)
        self.skipped = list(skipped)


# -- annotations ---------------------------------------------------------------


def _parse_annotation(line: str, root: Path, skeleton: SkeletonModel) -> AnnotatedImage:
    try:
        rec = json.loads(line)
        image_id = str(rec["image_id"])
        joints = np.asarray(rec["joints"], dtype=float)
        visible = rec.get("visible")
        fname = rec["file"]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CorpusFormatError(f"malformed record: {exc}") from None
    if joints.ndim != 2 or joints.shape != (skeleton.joint_count, 2):
        raise CorpusFormatError(f"{image_id}: expected {skeleton.joint_count} joints, got shape {joints.shape}")
    if visible is not None and len(visible) != skeleton.joint_count:
        raise CorpusFormatError(f"{image_id}: visibility length mismatch")
    path = root / fname
    if not path.is_file():
        raise CorpusFormatError(f"{image_id}: missing image file {fname}")
    with Image.open(path) as im:
        pixels = np.asarray(im.convert("RGB"))
    meta = {k: rec[k] for k in ("camera", "pose_id") if k in rec}
    return AnnotatedImage(image_id, pixels, Pose2D(joints, visible), str(rec.get("source", "")), meta)


def load_annotations(path, skeleton: SkeletonModel | None = None, workers: int = 1) -> AnnotationSet:
    """Load an ``annotations.jsonl`` manifest (or a corpus directory containing one).

    Invalid records are logged and skipped; see ``AnnotationSet.skipped``.
    """
    skeleton = skeleton or default_skeleton()
    path = Path(path)
    if path.is_dir():
        path = path / ANNOTATIONS_FILE
    root = path.parent
    lines = [(n, ln) for n, ln in enumerate(path.read_text().splitlines(), 1) if ln.strip()]

    def parse(item):
        n, ln = item
        try:
            return n, _parse_annotation(ln, root, skeleton), None
        except (CorpusFormatError, SkeletonError, OSError) as exc:
            return n, None, str(exc)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(parse, lines))
    else:
        results = [parse(item) for item in lines]
    out = AnnotationSet()
    for n, rec, err in results:
        if err is not None:
            log.warning("%s:%d skipped: %s", path.name, n, err)
            out.skipped.append((n, err))
        else:
            out.append(rec)
    if out.skipped:
        log.warning("%s: %d record(s) skipped", path.name, len(out.skipped))
    return out


def save_annotations(corpus: Iterable[AnnotatedImage], root, image_dir: str = "images") -> Path:
    """Write PNG rasters and an ``annotations.jsonl`` manifest under ``root``."""
    root = Path(root)
    (root / image_dir).mkdir(parents=True, exist_ok=True)
    manifest = root / ANNOTATIONS_FILE
    with manifest.open("w") as fh:
        for item in corpus:
            fname = f"{image_dir}/{item.image_id}.png"
            Image.fromarray(item.pixels).save(root / fname)
            rec = {
                "image_id": item.image_id,
                "file": fname,
                "joints": item.pose.coords.tolist(),
                "visible": item.pose.visible.tolist(),
                "source": item.source,
            }
            rec.update(item.meta)
            fh.write(json.dumps(rec) + "\n")
    return manifest


# -- mocap ---------------------------------------------------------------------


def load_mocap(path, skeleton: SkeletonModel | None = None) -> list[MocapPose]:
    """Read ``mocap.jsonl``; poses are torso-centered on load."""
    skeleton = skeleton or default_skeleton()
    path = Path(path)
    if path.is_dir():
        path = path / MOCAP_FILE
    poses = []
    for n, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            coords = np.asarray(rec["joints_mm"], dtype=float)
            pose_id = str(rec["pose_id"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise CorpusFormatError(f"{path.name}:{n}: malformed record: {exc}") from None
        if coords.shape != (skeleton.joint_count, 3):
            raise CorpusFormatError(f"{path.name}:{n}: expected {skeleton.joint_count} joints, got shape {coords.shape}")
        poses.append(MocapPose(pose_id, Pose3D(coords).centered(skeleton), str(rec.get("sequence_id", ""))))
    return poses


def save_mocap(poses: Iterable[MocapPose], path) -> Path:
    path = Path(path)
    if path.is_dir():
        path = path / MOCAP_FILE
    with path.open("w") as fh:
        for mp in poses:
            fh.write(json.dumps({
                "pose_id": mp.pose_id,
                "sequence_id": mp.sequence_id,
                "joints_mm": mp.pose.coords.tolist(),
            }) + "\n")
    return path


# -- protocols -----------------------------------------------------------------


def subsample_poses(poses: Sequence[MocapPose], threshold: float, criterion: str = "max") -> list[MocapPose]:
    """Greedy streaming de-duplication of a pose corpus.

    A pose is kept iff, against every pose kept so far, its per-joint 3D
    distance exceeds ``threshold`` mm for at least one joint (``criterion="max"``).
    ``criterion="mean"`` uses the mean joint distance instead. Input order is
    preserved.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if criterion not in ("max", "mean"):
        raise ValueError(f"unknown criterion {criterion!r}")
    reduce = np.max if criterion == "max" else np.mean
    kept: list[MocapPose] = []
    if not poses:
        return kept
    n_joints = poses[0].pose.n_joints
    bank = np.empty((len(poses), n_joints, 3))
    for mp in poses:
        c = mp.pose.coords
        if kept:
            d = reduce(np.linalg.norm(bank[: len(kept)] - c, axis=2), axis=1)
            if not np.all(d > threshold):
                continue
        bank[len(kept)] = c
        kept.append(mp)
    return kept


def sample_views(pose: MocapPose, count: int, seed, skeleton: SkeletonModel | None = None,
                 focal: float | None = None, subject_distance: float | None = None) -> list[OrientedSample]:
    """``count`` random cameras: azimuth uniform on [0, 360), elevation uniform on [-45, 45]."""
    if count < 1:
        raise ValueError("count must be >= 1")
    skeleton = skeleton or default_skeleton()
    rng = np.random.default_rng(seed)
    azimuths = rng.uniform(0.0, 360.0, count)
    elevations = rng.uniform(-45.0, 45.0, count)
    extra = {}
    if focal is not None:
        extra["focal"] = focal
    if subject_distance is not None:
        extra["subject_distance"] = subject_distance
    out = []
    for az, el in zip(azimuths, elevations):
        cam = Camera(float(az), float(el), **extra)
        out.append(OrientedSample(orient(pose.pose, cam, skeleton), cam, project(pose.pose, cam, skeleton), pose.pose_id))
    return out


def mirror_augment(corpus: Sequence[AnnotatedImage], skeleton: SkeletonModel | None = None) -> list[AnnotatedImage]:
    """Originals followed by their horizontally flipped copies (left/right labels swapped)."""
    skeleton = skeleton or default_skeleton()
    mirrored = []
    for item in corpus:
        meta = {"mirror_of": item.image_id}
        mirrored.append(AnnotatedImage(
            f"{item.image_id}_mirror",
            np.ascontiguousarray(item.pixels[:, ::-1]),
            mirror(item.pose, skeleton, item.pixels.shape[1]),
            item.source,
            meta,
        ))
    return list(corpus) + mirrored
