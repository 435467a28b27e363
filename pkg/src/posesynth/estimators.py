"""scikit-learn compatible wrappers: pose clustering, nearest-class scoring, synthesis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, ClassifierMixin, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .blend import BlendConfig, BlendWeights, DistanceField, blend, blend_weights, skeleton_distance_field
from .kmeans import kmeans_plusplus, lloyd
from .matcher import CorpusIndex, MatchSet, match_all
from .mosaic import DEFAULT_SIGMA, IndexMap, MosaicImage, ProbabilityMap, index_map, probability_map, raw_mosaic
from .pose import Pose2D
from .skeleton import default_skeleton
from .validation import check_pose_array, check_positive


class PoseKMeans(ClusterMixin, BaseEstimator):
    """K-means over flattened pose coordinates.

    Parameters
    ----------
    n_clusters : int
        Number of pose classes.
    max_iter : int
        Lloyd iteration cap.
    tol : float
        Stop once the relative inertia change drops below this.
    random_state : int or None
        Seed for k-means++ initialization; fixed seeds give bit-identical fits.
    """

    def __init__(self, n_clusters=8, max_iter=100, tol=1e-6, random_state=None):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_pose_array(X, dim=3, flatten=True)
        if not 1 <= self.n_clusters <= len(X):
            raise ValueError(f"n_clusters={self.n_clusters} must be in [1, n_samples={len(X)}]")
        rng = np.random.default_rng(self.random_state)
        seeds = kmeans_plusplus(X, self.n_clusters, rng)
        centers, labels, inertia, n_iter = lloyd(X, X[seeds].copy(), self.max_iter, self.tol)
        self.init_indices_ = seeds
        self.cluster_centers_ = centers
        self.labels_ = labels
        self.inertia_ = inertia
        self.n_iter_ = n_iter
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        X = check_pose_array(X, dim=3, flatten=True)
        return np.argmin(cdist(X, self.cluster_centers_, "sqeuclidean"), axis=1)


class NearestPoseClassifier(ClassifierMixin, BaseEstimator):
    """Scores each class by the negative mean joint distance to its average 2D pose.

    A transparent stand-in for a learned image classifier: it exercises the
    same ranking and evaluation path.
    """

    def fit(self, X, y):
        X = check_pose_array(X, dim=2)
        y = np.asarray(y)
        if len(y) != len(X):
            raise ValueError("X and y differ in length")
        self.classes_ = np.unique(y)
        self.class_poses_ = np.stack([X[y == c].mean(axis=0) for c in self.classes_])
        self.n_features_in_ = X.shape[1] * 2
        return self

    @classmethod
    def from_class_poses(cls, class_poses):
        clf = cls()
        clf.class_poses_ = np.asarray(class_poses, dtype=float)
        clf.classes_ = np.arange(len(clf.class_poses_))
        clf.n_features_in_ = clf.class_poses_.shape[1] * 2
        return clf

    def decision_function(self, X):
        check_is_fitted(self, "class_poses_")
        X = check_pose_array(X, dim=2, n_joints=self.class_poses_.shape[1])
        d = np.linalg.norm(X[:, None] - self.class_poses_[None], axis=3).mean(axis=2)
        return -d

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]


@dataclass(frozen=True, eq=False)
class SynthesisResult:
    matchset: MatchSet
    maps: tuple[ProbabilityMap, ...]
    index: IndexMap
    raw: MosaicImage
    field: DistanceField
    weights: BlendWeights
    image: MosaicImage


class MosaicSynthesizer(TransformerMixin, BaseEstimator):
    """Synthesizes an image for each query 2D pose from an annotated corpus.

    ``fit`` indexes the corpus; ``transform`` maps query poses to
    ``(n, 220, 220, 3)`` uint8 images.

    Parameters
    ----------
    sigma : float
        Width (px) of the residual kernel feeding the probability maps.
    alpha, beta : float
        Blend window side is ``alpha + beta * d`` for skeleton distance ``d``.
    skeleton : SkeletonModel or None
        Defaults to the bundled 13-joint skeleton.
    """

    def __init__(self, sigma=DEFAULT_SIGMA, alpha=6.0, beta=0.25, skeleton=None):
        self.sigma = sigma
        self.alpha = alpha
        self.beta = beta
        self.skeleton = skeleton

    def fit(self, X, y=None):
        check_positive("sigma", self.sigma)
        self.blend_config_ = BlendConfig(self.alpha, self.beta)
        self.skeleton_ = self.skeleton or default_skeleton()
        self.index_ = X if isinstance(X, CorpusIndex) else CorpusIndex(X, self.skeleton_)
        return self

    def synthesize(self, query: Pose2D) -> SynthesisResult:
        check_is_fitted(self, "index_")
        ms = match_all(query, self.index_, self.skeleton_)
        if not ms.matches:
            raise ValueError("query has no visible joint to match")
        maps = tuple(probability_map(m, self.sigma) for m in ms.matches)
        idx = index_map(maps)
        raw = raw_mosaic(idx, ms.matches)
        field = skeleton_distance_field(query, self.skeleton_)
        weights = blend_weights(idx, field, self.blend_config_)
        return SynthesisResult(ms, maps, idx, raw, field, weights, blend(ms.matches, weights))

    def transform(self, X):
        check_is_fitted(self, "index_")
        if isinstance(X, Pose2D):
            X = [X]
        if not (isinstance(X, (list, tuple)) and X and isinstance(X[0], Pose2D)):
            X = [Pose2D(p) for p in check_pose_array(X, dim=2, n_joints=self.skeleton_.joint_count)]
        return np.stack([self.synthesize(p).image.pixels for p in X])
