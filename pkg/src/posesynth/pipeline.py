"""Run orchestration: configuration, generation runs, evaluation runs, previews.

A generation run writes, under ``out``::

    images/<sample_id>.png      synthesized 220x220 RGB image
    images/<sample_id>.json     sidecar (3D/2D pose, camera, class, provenance)
    manifest.json               written last
    match_trace.jsonl           optional per-joint match audit
    debug/<sample_id>_*.png     optional index map / distance field renders

Everything except the manifest's ``runtime`` block and per-record
``timing_ms`` depends only on the config and seed.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .classes import EvalReport, assign_many, cluster, evaluate
from .dataset import (
    MocapPose,
    OrientedSample,
    load_annotations,
    load_mocap,
    mirror_augment,
    sample_views,
    save_annotations,
    save_mocap,
    subsample_poses,
)
from .desk import DeskCorpusSpec, generate_desk_corpus
from .estimators import MosaicSynthesizer, SynthesisResult
from .exceptions import ConfigError, PoseSynthError
from .matcher import trace_records
from .pose import Pose2D
from .skeleton import SkeletonModel, load_skeleton

log = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
TRACE_FILE = "match_trace.jsonl"
TIMING_KEYS = ("runtime", "timing_ms")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2

_PATH_FIELDS = ("annotations", "mocap", "test_mocap", "queries", "skeleton", "out")


@dataclass(frozen=True)
class RunConfig:
    """Settings shared by ``generate`` and ``evaluate``.

    Paths in a config file are resolved relative to that file. ``seed`` has
    no default. ``subsample_mm=None`` keeps every mocap pose. ``queries``
    names an annotation corpus whose 2D poses are synthesized verbatim instead
    of projecting mocap poses.
    """

    seed: int
    annotations: Path | None = None
    mocap: Path | None = None
    test_mocap: Path | None = None
    queries: Path | None = None
    skeleton: Path | None = None
    out: Path = Path("out")
    sigma: float = 10.0
    alpha: float = 6.0
    beta: float = 0.25
    views: int = 1
    subsample_mm: float | None = 50.0
    subsample_criterion: str = "max"
    max_poses: int | None = None
    K: int = 10
    workers: int = 1
    mirror: bool = False
    trace: bool = False
    debug_maps: bool = False
    test_fraction: float = 0.2
    k_values: tuple[int, ...] = (10, 50, 250, 1000)
    n_values: tuple[int, ...] = (1, 5, 10)

    def __post_init__(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")
        for name in _PATH_FIELDS:
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, Path(val))
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        checks = [
            (self.sigma > 0, "sigma must be positive"),
            (self.alpha >= 1, "alpha must be >= 1"),
            (self.beta >= 0, "beta must be >= 0"),
            (self.views >= 1, "views must be >= 1"),
            (self.subsample_mm is None or self.subsample_mm > 0, "subsample_mm must be positive"),
            (self.subsample_criterion in ("max", "mean"), "subsample_criterion must be 'max' or 'mean'"),
            (self.max_poses is None or self.max_poses >= 1, "max_poses must be >= 1"),
            (self.K >= 1, "K must be >= 1"),
            (self.workers >= 1, "workers must be >= 1"),
            (0 <= self.test_fraction < 1, "test_fraction must be in [0, 1)"),
            (all(k >= 1 for k in self.k_values), "k_values must be >= 1"),
            (all(n >= 1 for n in self.n_values), "n_values must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "seed" not in d:
            raise ConfigError("config must set 'seed'")
        d = dict(d)
        if base_dir is not None:
            for name in _PATH_FIELDS:
                if d.get(name) is not None:
                    d[name] = Path(base_dir) / d[name]
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path, **overrides) -> "RunConfig":
        """Read a JSON config; non-``None`` ``overrides`` win over file values."""
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        cfg = cls.from_dict(d, path.parent)
        overrides = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(cfg, **overrides) if overrides else cfg

    def echo(self) -> dict:
        """Config as written into manifests, minus execution-only fields."""
        d = {}
        for f in dataclasses.fields(self):
            if f.name in ("workers", "out"):
                continue
            val = getattr(self, f.name)
            d[f.name] = str(val) if isinstance(val, Path) else (list(val) if isinstance(val, tuple) else val)
        return d


@dataclass
class SampleRecord:
    sample_id: str
    pose_id: str
    camera: dict | None
    class_id: int | None
    file: str
    sidecar: str
    image_ids: list[str]
    timing_ms: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class RunManifest:
    """One record per emitted image; ``runtime`` holds non-deterministic fields."""

    config: dict
    records: list[SampleRecord] = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    skipped: list[dict] = field(default_factory=list)
    runtime: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "records": [r.to_dict() for r in self.records],
            "stats": self.stats,
            "skipped": self.skipped,
            "runtime": self.runtime,
        }

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "RunManifest":
        d = json.loads(Path(path).read_text())
        return cls(
            config=d["config"],
            records=[SampleRecord(**r) for r in d["records"]],
            stats=d.get("stats", {}),
            skipped=d.get("skipped", []),
            runtime=d.get("runtime", {}),
        )


def strip_timing(obj):
    """Drop every ``runtime`` / ``timing_ms`` entry, recursively."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


# -- generation ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _Query:
    sample_id: str
    pose_id: str
    pose2d: Pose2D
    sample: OrientedSample | None
    class_id: int | None


def _skeleton(cfg: RunConfig) -> SkeletonModel:
    return load_skeleton(cfg.skeleton)


def _require(path: Path | None, what: str) -> Path:
    if path is None:
        raise ConfigError(f"config must set '{what}'")
    if not path.exists():
        raise ConfigError(f"{what} not found: {path}")
    return path


def _mocap_poses(cfg: RunConfig, skeleton: SkeletonModel, path: Path | None = None) -> list[MocapPose]:
    poses = load_mocap(_require(path or cfg.mocap, "mocap"), skeleton)
    if cfg.subsample_mm is not None:
        before = len(poses)
        poses = subsample_poses(poses, cfg.subsample_mm, cfg.subsample_criterion)
        log.info("subsampled %d -> %d poses at %g mm", before, len(poses), cfg.subsample_mm)
    if cfg.max_poses is not None:
        poses = poses[: cfg.max_poses]
    return poses


def oriented_samples(poses, cfg: RunConfig, skeleton: SkeletonModel) -> list[OrientedSample]:
    """``cfg.views`` cameras per pose; pose ``n`` draws from the stream ``(seed, n)``."""
    out = []
    for n, mp in enumerate(poses):
        out.extend(sample_views(mp, cfg.views, [cfg.seed, n], skeleton))
    return out


def _queries(cfg: RunConfig, skeleton: SkeletonModel) -> list[_Query]:
    if cfg.queries is not None:
        items = load_annotations(_require(cfg.queries, "queries"), skeleton)
        return [_Query(f"{n:06d}", it.image_id, it.pose, None, None) for n, it in enumerate(items)]
    samples = oriented_samples(_mocap_poses(cfg, skeleton), cfg, skeleton)
    if not samples:
        return []
    if cfg.K > len(samples):
        raise ConfigError(f"K={cfg.K} exceeds the number of oriented samples ({len(samples)})")
    classes = cluster(samples, cfg.K, cfg.seed)
    ids = assign_many(np.stack([s.pose3d.coords for s in samples]), classes)
    return [
        _Query(f"{n:06d}", s.pose_id, s.pose2d, s, int(ids[n]))
        for n, s in enumerate(samples)
    ]


def _run_one(synth: MosaicSynthesizer, q: _Query):
    t0 = time.perf_counter()
    try:
        res = synth.synthesize(q.pose2d)
    except (PoseSynthError, ValueError) as exc:
        return q, None, f"{type(exc).__name__}: {exc}", 0.0
    return q, res, None, (time.perf_counter() - t0) * 1000.0


def _index_png(res: SynthesisResult) -> np.ndarray:
    palette = np.random.default_rng(0).integers(40, 256, size=(res.index.n_matches + 1, 3), dtype=np.uint8)
    return palette[res.index.values]


def _field_png(res: SynthesisResult) -> np.ndarray:
    d = res.field.values
    return np.clip(255.0 * d / max(float(d.max()), 1.0), 0, 255).astype(np.uint8)


def _write_sample(out: Path, q: _Query, res: SynthesisResult, debug: bool) -> tuple[str, str, list[str]]:
    image_ids = list(dict.fromkeys(res.matchset.image_refs))
    png = f"images/{q.sample_id}.png"
    side = f"images/{q.sample_id}.json"
    Image.fromarray(res.image.pixels).save(out / png)
    s = q.sample
    sidecar = {
        "sample_id": q.sample_id,
        "pose_id": q.pose_id,
        "pose3d_mm": s.pose3d.coords.tolist() if s else None,
        "pose2d_px": q.pose2d.coords.tolist(),
        "visible": q.pose2d.visible.tolist(),
        "camera": s.camera.to_dict() if s else None,
        "class_id": q.class_id,
        "provenance": {
            "image_ids": image_ids,
            "matches": [
                {"joint": m.joint, "image_id": m.image_ref, "score": m.score}
                for m in res.matchset.matches
            ],
            "skipped_joints": sorted(res.matchset.skipped),
        },
    }
    (out / side).write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    if debug:
        Image.fromarray(_index_png(res)).save(out / "debug" / f"{q.sample_id}_index.png")
        Image.fromarray(_field_png(res)).save(out / "debug" / f"{q.sample_id}_field.png")
    return png, side, image_ids


def cmd_generate(cfg: RunConfig) -> tuple[RunManifest, int]:
    """Synthesize one image per (pose, view) and write outputs plus a manifest.

    Samples are farmed out to ``cfg.workers`` threads, but results are
    consumed and written in sample order, so output bytes do not depend on
    the worker count. A failing sample is logged and skipped. Returns the
    manifest and the exit code.
    """
    t_start = time.perf_counter()
    skeleton = _skeleton(cfg)
    corpus = load_annotations(_require(cfg.annotations, "annotations"), skeleton, cfg.workers)
    if not corpus:
        raise ConfigError(f"annotation corpus {cfg.annotations} is empty")
    if cfg.mirror:
        corpus = mirror_augment(corpus, skeleton)
    synth = MosaicSynthesizer(cfg.sigma, cfg.alpha, cfg.beta, skeleton).fit(corpus)
    queries = _queries(cfg, skeleton)

    out = Path(cfg.out)
    (out / "images").mkdir(parents=True, exist_ok=True)
    if cfg.debug_maps:
        (out / "debug").mkdir(exist_ok=True)
    manifest = RunManifest(config=cfg.echo())
    trace = (out / TRACE_FILE).open("w") if cfg.trace else None
    try:
        with ThreadPoolExecutor(cfg.workers) as pool:
            for q, res, err, ms in pool.map(lambda q: _run_one(synth, q), queries):
                if err is not None:
                    log.warning("sample %s (pose %s) skipped: %s", q.sample_id, q.pose_id, err)
                    manifest.skipped.append({"sample_id": q.sample_id, "pose_id": q.pose_id, "reason": err})
                    continue
                png, side, image_ids = _write_sample(out, q, res, cfg.debug_maps)
                manifest.records.append(SampleRecord(
                    q.sample_id, q.pose_id, q.sample.camera.to_dict() if q.sample else None,
                    q.class_id, png, side, image_ids, round(ms, 3),
                ))
                if trace:
                    for row in trace_records(res.matchset, q.sample_id):
                        trace.write(json.dumps(row, sort_keys=True) + "\n")
    finally:
        if trace:
            trace.close()

    n_img = [len(r.image_ids) for r in manifest.records]
    manifest.stats = {
        "n_queries": len(queries),
        "n_emitted": len(manifest.records),
        "n_skipped": len(manifest.skipped),
        "corpus_size": len(corpus),
        "mean_source_images": float(np.mean(n_img)) if n_img else 0.0,
    }
    manifest.runtime = {
        "workers": cfg.workers,
        "out": str(out),
        "total_ms": round((time.perf_counter() - t_start) * 1000.0, 3),
    }
    manifest.write(out / MANIFEST_FILE)
    if not manifest.records:
        code = EXIT_FATAL
    elif manifest.skipped:
        code = EXIT_PARTIAL
    else:
        code = EXIT_OK
    log.info("emitted %d image(s), skipped %d", len(manifest.records), len(manifest.skipped))
    return manifest, code


# -- evaluation ----------------------------------------------------------------


def split_by_sequence(poses: list[MocapPose], test_fraction: float) -> tuple[list[MocapPose], list[MocapPose]]:
    """Hold out the last ``ceil(fraction * n_sequences)`` sequences; 0 means test on train.

    At least one sequence always stays in the training split.
    """
    if test_fraction == 0:
        return poses, poses
    seqs = sorted({p.sequence_id for p in poses})
    if len(seqs) < 2:
        raise ConfigError("a held-out split needs at least two mocap sequences; "
                          "set test_fraction to 0 or provide test_mocap")
    n_held = min(math.ceil(test_fraction * len(seqs)), len(seqs) - 1)
    held = set(seqs[len(seqs) - n_held:])
    return [p for p in poses if p.sequence_id not in held], [p for p in poses if p.sequence_id in held]


def cmd_evaluate(cfg: RunConfig) -> EvalReport:
    """Cluster oriented training poses and score the nearest-class baseline on test poses.

    Writes ``eval_report.json``, ``lower_bound.csv`` and ``rerank.csv`` into
    ``cfg.out``.
    """
    skeleton = _skeleton(cfg)
    poses = _mocap_poses(cfg, skeleton)
    if cfg.test_mocap is not None:
        train_p, test_p = poses, _mocap_poses(cfg, skeleton, _require(cfg.test_mocap, "test_mocap"))
    else:
        train_p, test_p = split_by_sequence(poses, cfg.test_fraction)
    train = oriented_samples(train_p, cfg, skeleton)
    test = oriented_samples(test_p, cfg, skeleton)
    if not test:
        raise ConfigError("empty test set")
    if cfg.K > len(train):
        raise ConfigError(f"K={cfg.K} exceeds the number of training samples ({len(train)})")
    report = evaluate(train, test, cfg.K, cfg.seed, cfg.k_values, cfg.n_values, skeleton)
    report.write(cfg.out)
    return report


# -- preview -------------------------------------------------------------------

JOINT_COLOR = (255, 0, 0)
HIDDEN_COLOR = (255, 255, 0)
BONE_COLOR = (0, 255, 0)


def draw_skeleton(pixels: np.ndarray, pose: Pose2D, skeleton: SkeletonModel) -> np.ndarray:
    """Copy of ``pixels`` with bones as lines and each joint as a 3x3 cross.

    The cross center is the joint coordinate rounded half-up, drawn last so it
    is never covered by a bone.
    """
    img = Image.fromarray(np.ascontiguousarray(pixels))
    draw = ImageDraw.Draw(img)
    xy = np.floor(pose.coords + 0.5).astype(int)
    for a, b in skeleton.edges:
        draw.line([tuple(xy[a]), tuple(xy[b])], fill=BONE_COLOR, width=1)
    arr = np.array(img)
    h, w = arr.shape[:2]
    for (x, y), vis in zip(xy, pose.visible):
        color = JOINT_COLOR if vis else HIDDEN_COLOR
        for dx, dy in ((0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)):
            if 0 <= x + dx < w and 0 <= y + dy < h:
                arr[y + dy, x + dx] = color
    return arr


def cmd_preview(manifest_path, count: int, out=None, skeleton: SkeletonModel | None = None,
                columns: int = 5) -> Path:
    """Contact sheet of the first ``count`` outputs with their 2D skeletons."""
    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    manifest = RunManifest.load(manifest_path)
    if not manifest.records:
        raise ConfigError("manifest has no records")
    if count < 1:
        raise ConfigError("count must be >= 1")
    if skeleton is None:
        skel_path = manifest.config.get("skeleton")
        skeleton = load_skeleton(skel_path if skel_path not in (None, "None") else None)
    records = manifest.records[:count]
    tiles = []
    for rec in records:
        pixels = np.asarray(Image.open(root / rec.file).convert("RGB"))
        side = json.loads((root / rec.sidecar).read_text())
        pose = Pose2D(side["pose2d_px"], side["visible"])
        tiles.append(draw_skeleton(pixels, pose, skeleton))
    cols = min(columns, len(tiles))
    rows = math.ceil(len(tiles) / cols)
    th, tw = tiles[0].shape[:2]
    sheet = np.zeros((rows * th, cols * tw, 3), dtype=np.uint8)
    for n, tile in enumerate(tiles):
        r, c = divmod(n, cols)
        sheet[r * th:(r + 1) * th, c * tw:(c + 1) * tw] = tile
    out = Path(out) if out is not None else root / "contact_sheet.png"
    Image.fromarray(sheet).save(out)
    return out


# -- desk corpus ---------------------------------------------------------------


def cmd_make_desk_corpus(size: int, seed: int, out, mocap_size: int | None = None) -> Path:
    """Write a procedurally generated annotated corpus plus its mocap poses."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    annotations, mocap = generate_desk_corpus(DeskCorpusSpec(size, mocap_size), seed)
    save_annotations(annotations, out)
    save_mocap(mocap, out)
    return out
