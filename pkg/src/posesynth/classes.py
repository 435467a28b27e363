"""Pose classes over oriented 3D poses and the evaluation metrics built on them."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import OrientedSample
from .estimators import NearestPoseClassifier, PoseKMeans
from .pose import Pose2D, Pose3D, procrustes_rigid
from .skeleton import SkeletonModel, default_skeleton


@dataclass(frozen=True, eq=False)
class PoseClassSet:
    """K pose classes. Arrays are ``(K, n_joints, 3)`` / ``(K, n_joints, 2)``."""

    K: int
    centroids: np.ndarray
    avg_pose3d: np.ndarray
    avg_pose2d: np.ndarray
    member_counts: np.ndarray
    seed: int | None
    labels: np.ndarray | None = None


@dataclass(frozen=True)
class ScoreDistribution:
    scores: np.ndarray

    def ranking(self) -> np.ndarray:
        """Class ids from best to worst score; lowest id first among equals."""
        return np.argsort(-self.scores, kind="stable")


def cluster(samples: Sequence[OrientedSample], K: int, seed: int | None = 0,
            max_iter: int = 100, tol: float = 1e-6) -> PoseClassSet:
    """K-means on flattened oriented 3D poses, plus class-average 2D/3D poses."""
    if K > len(samples):
        raise ValueError(f"K={K} exceeds the number of samples ({len(samples)})")
    X3 = np.stack([s.pose3d.coords for s in samples])
    X2 = np.stack([s.pose2d.coords for s in samples])
    km = PoseKMeans(K, max_iter=max_iter, tol=tol, random_state=seed).fit(X3)
    labels = km.labels_
    avg3 = np.stack([X3[labels == c].mean(axis=0) for c in range(K)])
    avg2 = np.stack([X2[labels == c].mean(axis=0) for c in range(K)])
    return PoseClassSet(
        K=K,
        centroids=km.cluster_centers_.reshape(K, -1, 3),
        avg_pose3d=avg3,
        avg_pose2d=avg2,
        member_counts=np.bincount(labels, minlength=K),
        seed=seed,
        labels=labels,
    )


def assign(pose: Pose3D | np.ndarray, classes: PoseClassSet) -> int:
    """Nearest centroid in flattened coordinates; lowest id on ties."""
    x = np.asarray(getattr(pose, "coords", pose), dtype=float)
    d = ((classes.centroids - x) ** 2).sum(axis=(1, 2))
    return int(np.argmin(d))


def assign_many(poses, classes: PoseClassSet) -> np.ndarray:
    """Vectorized :func:`assign` over a stack of poses."""
    X = np.asarray(poses, dtype=float).reshape(len(poses), -1)
    return np.argmin(cdist(X, classes.centroids.reshape(classes.K, -1), "sqeuclidean"), axis=1)


def baseline_classify(query: Pose2D | np.ndarray, classes: PoseClassSet) -> ScoreDistribution:
    x = np.asarray(getattr(query, "coords", query), dtype=float)
    clf = NearestPoseClassifier.from_class_poses(classes.avg_pose2d)
    return ScoreDistribution(clf.decision_function(x[None])[0])


def eval_2d(pred, gt) -> float:
    """Mean Euclidean joint distance in pixels."""
    p = np.asarray(getattr(pred, "coords", pred), dtype=float)
    g = np.asarray(getattr(gt, "coords", gt), dtype=float)
    return float(np.linalg.norm(p - g, axis=1).mean())


def eval_3d(pred, gt, skeleton: SkeletonModel | None = None) -> tuple[float, float]:
    """``(absolute, aligned)`` mean joint errors in mm of torso-centered poses."""
    skeleton = skeleton or default_skeleton()
    p = Pose3D(getattr(pred, "coords", pred)).centered(skeleton).coords
    g = Pose3D(getattr(gt, "coords", gt)).centered(skeleton).coords
    absolute = float(np.linalg.norm(p - g, axis=1).mean())
    _, _, aligned = procrustes_rigid(p, g)
    return absolute, aligned


def lower_bound_curve(train: Sequence[OrientedSample], k_values: Sequence[int], seed: int | None = 0,
                      test: Sequence[OrientedSample] | None = None) -> list[tuple[int, float]]:
    """Best achievable 2D error per K: each test pose scored against its own class.

    For every K the training samples are clustered, each test ground truth is
    assigned to its nearest class in 3D, and the mean 2D error against that
    class's average 2D pose is reported.
    """
    test = train if test is None else test
    T3 = np.stack([s.pose3d.coords for s in test])
    T2 = np.stack([s.pose2d.coords for s in test])
    curve = []
    for K in k_values:
        classes = cluster(train, K, seed)
        ids = assign_many(T3, classes)
        err = np.linalg.norm(classes.avg_pose2d[ids] - T2, axis=2).mean(axis=1)
        curve.append((int(K), float(err.mean())))
    return curve


@dataclass
class RerankCurve:
    n_values: list[int]
    accuracy: list[float]
    best_error_2d: list[float]


def rerank_curve(distributions: Sequence[ScoreDistribution], gt_class_ids, gt_poses, classes: PoseClassSet,
                 n_values: Sequence[int]) -> RerankCurve:
    """Accuracy and best-of-N 2D error when an oracle may pick among the N top classes."""
    gt_ids = np.asarray(gt_class_ids)
    gt2 = np.stack([np.asarray(getattr(g, "coords", g), dtype=float) for g in gt_poses])
    ranks = np.stack([d.ranking() for d in distributions])
    # error of every class hypothesis, in ranked order
    errs = np.stack([
        np.linalg.norm(classes.avg_pose2d[r] - g, axis=2).mean(axis=1) for r, g in zip(ranks, gt2)
    ])
    position = np.argmax(ranks == gt_ids[:, None], axis=1)
    prefix_min = np.minimum.accumulate(errs, axis=1)
    acc, best = [], []
    for N in n_values:
        N = int(min(N, classes.K))
        acc.append(float(np.mean(position < N)))
        best.append(float(prefix_min[:, N - 1].mean()))
    return RerankCurve([int(n) for n in n_values], acc, best)


@dataclass
class EvalReport:
    abs_3d_mm: float
    aligned_3d_mm: float
    err_2d_px: float
    top1_accuracy: float
    K: int
    n_test: int
    samples: list[dict] = field(default_factory=list)
    lower_bound: list[tuple[int, float]] = field(default_factory=list)
    rerank: RerankCurve | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lower_bound"] = [{"K": k, "err_2d_px": e} for k, e in self.lower_bound]
        return d

    def write(self, out_dir) -> dict[str, Path]:
        """``eval_report.json`` plus ``lower_bound.csv`` and ``rerank.csv``."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {"report": out_dir / "eval_report.json"}
        paths["report"].write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        paths["lower_bound"] = out_dir / "lower_bound.csv"
        with paths["lower_bound"].open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["K", "err_2d_px"])
            w.writerows(self.lower_bound)
        if self.rerank is not None:
            paths["rerank"] = out_dir / "rerank.csv"
            with paths["rerank"].open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["N", "accuracy", "best_err_2d_px"])
                w.writerows(zip(self.rerank.n_values, self.rerank.accuracy, self.rerank.best_error_2d))
        return paths


def evaluate(train: Sequence[OrientedSample], test: Sequence[OrientedSample], K: int, seed: int | None = 0,
             k_values: Sequence[int] = (), n_values: Sequence[int] = (1, 5, 10),
             skeleton: SkeletonModel | None = None) -> EvalReport:
    """Cluster ``train``, classify ``test`` with the baseline scorer and collect all metrics."""
    if len(test) == 0:
        raise ValueError("empty test set")
    classes = cluster(train, K, seed)
    records = []
    dists = []
    gt_ids = assign_many(np.stack([s.pose3d.coords for s in test]), classes)
    for n, s in enumerate(test):
        dist = baseline_classify(s.pose2d, classes)
        dists.append(dist)
        c = int(dist.ranking()[0])
        abs3, al3 = eval_3d(classes.avg_pose3d[c], s.pose3d, skeleton)
        e2 = eval_2d(classes.avg_pose2d[c], s.pose2d)
        records.append({
            "index": n, "pose_id": s.pose_id, "pred_class": c, "gt_class": int(gt_ids[n]),
            "abs_3d_mm": abs3, "aligned_3d_mm": al3, "err_2d_px": e2,
        })
    n_values = [n for n in n_values if n <= K] + ([K] if K not in n_values else [])
    report = EvalReport(
        abs_3d_mm=float(np.mean([r["abs_3d_mm"] for r in records])),
        aligned_3d_mm=float(np.mean([r["aligned_3d_mm"] for r in records])),
        err_2d_px=float(np.mean([r["err_2d_px"] for r in records])),
        top1_accuracy=float(np.mean([r["pred_class"] == r["gt_class"] for r in records])),
        K=K,
        n_test=len(test),
        samples=records,
        lower_bound=lower_bound_curve(train, [k for k in k_values if k <= len(train)], seed, test) if k_values else [],
        rerank=rerank_curve(dists, gt_ids, [s.pose2d for s in test], classes, sorted(set(n_values))),
    )
    return report
