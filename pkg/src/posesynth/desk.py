"""Procedural stand-in corpus: random articulated 3D poses and rendered figures.

Every image is a textured stick figure drawn from the exact projection of a
generated 3D pose, so its 2D annotation is exact by construction. This lets
the whole pipeline run without any licensed dataset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image, ImageDraw
from scipy.ndimage import gaussian_filter, zoom

from .camera import Camera, project, project_with_depth
from .dataset import AnnotatedImage, MocapPose
from .pose import FRAME_SIZE, Pose3D
from .skeleton import SkeletonModel, default_skeleton

# body-frame rest positions, mm; x = subject's left, y = up, z = facing direction
_TORSO = {
    "head": (0.0, 720.0, 30.0),
    "l_shoulder": (175.0, 520.0, 0.0),
    "r_shoulder": (-175.0, 520.0, 0.0),
    "l_hip": (100.0, 0.0, 0.0),
    "r_hip": (-100.0, 0.0, 0.0),
}
_LIMBS = {
    # joint: (parent, nominal length mm, kind)
    "l_elbow": ("l_shoulder", 300.0, "upper_arm"),
    "r_elbow": ("r_shoulder", 300.0, "upper_arm"),
    "l_wrist": ("l_elbow", 265.0, "forearm"),
    "r_wrist": ("r_elbow", 265.0, "forearm"),
    "l_knee": ("l_hip", 440.0, "thigh"),
    "r_knee": ("r_hip", 440.0, "thigh"),
    "l_ankle": ("l_knee", 420.0, "shin"),
    "r_ankle": ("r_knee", 420.0, "shin"),
}


@dataclass(frozen=True)
class DeskCorpusSpec:
    """Sizes of a generated corpus.

    ``size`` images are rendered, image ``k`` from mocap pose ``k``;
    ``mocap_size`` (default ``size``) poses are returned as the mocap set.
    """

    size: int
    mocap_size: int | None = None
    max_elevation: float = 45.0

    def __post_init__(self):
        if self.size < 1 or (self.mocap_size is not None and self.mocap_size < 1):
            raise ValueError("corpus sizes must be >= 1")


def _unit(v):
    return v / np.linalg.norm(v)


def _rotation(yaw, pitch, roll):
    cy, sy = np.cos(yaw), np.sin(yaw)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cr, sr = np.cos(roll), np.sin(roll)
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rx = np.array([[1, 0, 0], [0, cp, -sp], [0, sp, cp]])
    rz = np.array([[cr, -sr, 0], [sr, cr, 0], [0, 0, 1]])
    return ry @ rx @ rz


def _bend(direction, angle, rng):
    """Rotate ``direction`` by ``angle`` about a random perpendicular axis."""
    axis = _unit(np.cross(direction, rng.normal(size=3)))
    return direction * np.cos(angle) + np.cross(axis, direction) * np.sin(angle)


def random_pose(rng: np.random.Generator, skeleton: SkeletonModel | None = None) -> Pose3D:
    """One random, anatomically loose 13-joint pose, torso-centered, in mm."""
    skeleton = skeleton or default_skeleton()
    scale = rng.uniform(0.85, 1.15)
    pts = {k: np.array(v) * scale for k, v in _TORSO.items()}
    down = np.array([0.0, -1.0, 0.0])
    for name, (parent, length, kind) in _LIMBS.items():
        length *= scale * rng.uniform(0.95, 1.05)
        if kind == "upper_arm":
            d = _bend(down, np.radians(rng.uniform(0, 160)), rng)
        elif kind == "thigh":
            d = _bend(down, np.radians(rng.uniform(0, 70)), rng)
            if d[2] < -0.5:  # keep hips from hyperextending backward
                d = _unit(d * np.array([1.0, 1.0, -1.0]))
        else:
            prox = _unit(pts[parent] - pts[_LIMBS[parent][0]])
            d = _bend(prox, np.radians(rng.uniform(0, 130 if kind == "forearm" else 110)), rng)
        pts[name] = pts[parent] + length * d
    rot = _rotation(np.radians(rng.uniform(-180, 180)), np.radians(rng.normal(0, 12)), np.radians(rng.normal(0, 6)))
    coords = np.stack([pts[n] for n in skeleton.names]) @ rot.T
    return Pose3D(coords).centered(skeleton)


def _background(rng):
    base = rng.uniform(0, 255, 3)
    other = rng.uniform(0, 255, 3)
    yy, xx = np.mgrid[0:FRAME_SIZE, 0:FRAME_SIZE] / (FRAME_SIZE - 1)
    theta = rng.uniform(0, 2 * np.pi)
    ramp = np.cos(theta) * xx + np.sin(theta) * yy
    ramp = (ramp - ramp.min()) / max(np.ptp(ramp), 1e-9)
    img = base + ramp[..., None] * (other - base)
    blobs = zoom(rng.normal(0, 1, (11, 11, 3)), (20, 20, 1), order=1)
    img += 25 * blobs
    im = Image.fromarray(np.clip(img, 0, 255).astype(np.uint8))
    draw = ImageDraw.Draw(im)
    for _ in range(rng.integers(2, 7)):
        x0, y0 = rng.uniform(-40, FRAME_SIZE, 2)
        w, h = rng.uniform(15, 90, 2)
        color = tuple(int(c) for c in rng.integers(0, 256, 3))
        if rng.random() < 0.5:
            draw.rectangle([x0, y0, x0 + w, y0 + h], fill=color)
        else:
            draw.ellipse([x0, y0, x0 + w, y0 + h], fill=color)
    return np.asarray(im, dtype=np.float64)


def render_figure(uv: np.ndarray, depth: np.ndarray, skeleton: SkeletonModel, rng: np.random.Generator):
    """Render a textured stick figure over a random background.

    Body parts are painted far-to-near so nearer limbs hide farther ones.
    Returns ``(pixels uint8, figure_mask bool)``.
    """
    img = _background(rng)
    names = skeleton.names
    idx = {n: k for k, n in enumerate(names)}
    skin = np.array([rng.uniform(120, 240), rng.uniform(80, 200), rng.uniform(60, 170)])
    shirt = rng.uniform(0, 255, 3)
    pants = rng.uniform(0, 255, 3)
    span = np.ptp(uv, axis=0).max()
    limb_w = max(4.0, 0.05 * span)
    parts = []  # (mean depth, kind, payload, color)
    torso = [idx[n] for n in ("l_shoulder", "r_shoulder", "r_hip", "l_hip")]
    parts.append((depth[torso].mean(), "poly", torso, shirt))
    for a, b in skeleton.edges:
        pair = names[a] + names[b]
        if "head" in pair or "wrist" in pair:
            color = skin
        elif "knee" in pair or "ankle" in pair:
            color = pants
        else:
            color = shirt
        parts.append(((depth[a] + depth[b]) / 2, "bone", (a, b), color))
    parts.append((depth[idx["head"]], "head", idx["head"], skin))
    parts.sort(key=lambda p: -p[0])

    canvas = Image.new("L", (FRAME_SIZE, FRAME_SIZE), 0)
    label = Image.new("L", (FRAME_SIZE, FRAME_SIZE), 0)
    draw_c = ImageDraw.Draw(canvas)
    draw_l = ImageDraw.Draw(label)
    colors = []
    for k, (_, kind, payload, color) in enumerate(parts, start=1):
        colors.append(color)
        for d in (draw_c, draw_l):
            fill = k if d is draw_l else 255
            if kind == "poly":
                d.polygon([tuple(uv[t]) for t in payload], fill=fill)
            elif kind == "bone":
                a, b = payload
                r = limb_w / 2
                d.line([tuple(uv[a]), tuple(uv[b])], fill=fill, width=int(round(limb_w)))
                for t in (a, b):
                    d.ellipse([uv[t][0] - r, uv[t][1] - r, uv[t][0] + r, uv[t][1] + r], fill=fill)
            else:
                r = max(6.0, 0.07 * span)
                x, y = uv[payload]
                d.ellipse([x - r, y - r, x + r, y + r], fill=fill)
    mask = np.asarray(canvas) > 0
    lab = np.asarray(label)
    palette = np.vstack([np.zeros(3), np.array(colors)])
    texture = gaussian_filter(rng.normal(0, 18, (FRAME_SIZE, FRAME_SIZE, 3)), (1.2, 1.2, 0))
    fig = palette[lab] + texture
    img = np.where(mask[..., None], fig, img)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8), mask


def _render_one(pose: Pose3D, cam: Camera, skeleton, rng):
    uv, depth = project_with_depth(pose, cam, skeleton)
    pixels, mask = render_figure(uv, depth, skeleton, rng)
    return project(pose, cam, skeleton), pixels, mask


def generate_desk_corpus(spec: DeskCorpusSpec | int, seed: int, skeleton: SkeletonModel | None = None,
                         return_masks: bool = False):
    """Deterministic synthetic corpus ``(annotations, mocap)``.

    Each annotation's ``meta`` records the generating ``pose_id`` and camera.
    With ``return_masks=True`` a third element holds the figure masks.
    """
    if isinstance(spec, int):
        spec = DeskCorpusSpec(spec)
    skeleton = skeleton or default_skeleton()
    n_mocap = spec.mocap_size if spec.mocap_size is not None else spec.size
    n_poses = max(spec.size, n_mocap)
    root = np.random.SeedSequence(seed)
    pose_seq, image_seq = root.spawn(2)
    pose_rngs = [np.random.default_rng(s) for s in pose_seq.spawn(n_poses)]
    poses = [random_pose(r, skeleton) for r in pose_rngs]
    mocap = [MocapPose(f"mocap_{k:06d}", poses[k], f"seq_{k // 50:04d}") for k in range(n_mocap)]

    annotations, masks = [], []
    for k, s in enumerate(image_seq.spawn(spec.size)):
        rng = np.random.default_rng(s)
        cam = Camera(float(rng.uniform(0, 360)), float(rng.uniform(-spec.max_elevation, spec.max_elevation)))
        pose2d, pixels, mask = _render_one(poses[k], cam, skeleton, rng)
        annotations.append(AnnotatedImage(
            f"desk_{k:06d}", pixels, pose2d, "desk",
            {"pose_id": f"mocap_{k:06d}", "camera": cam.to_dict()},
        ))
        masks.append(mask)
    if return_masks:
        return annotations, mocap, masks
    return annotations, mocap
