"""Synthesize training images for human pose estimation by mosaicking annotated photos.

For a target 2D pose, every joint retrieves the corpus image whose pose best
matches locally. The aligned images are stitched through per-joint
probability maps and blended with windows that grow away from the skeleton.
"""

from .blend import BlendConfig, blend, blend_weights, region_size, skeleton_distance_field
from .camera import Camera, orient, project
from .classes import (
    EvalReport,
    PoseClassSet,
    ScoreDistribution,
    assign,
    baseline_classify,
    cluster,
    eval_2d,
    eval_3d,
    evaluate,
    lower_bound_curve,
    rerank_curve,
)
from .dataset import (
    AnnotatedImage,
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
from .desk import generate_desk_corpus
from .estimators import MosaicSynthesizer, NearestPoseClassifier, PoseKMeans
from .exceptions import PoseSynthError
from .matcher import AlignedMatch, CorpusIndex, MatchSet, best_match, match_all, warp_image
from .mosaic import IndexMap, MosaicImage, ProbabilityMap, index_map, probability_map, raw_mosaic
from .pipeline import RunConfig, RunManifest, cmd_evaluate, cmd_generate, cmd_preview
from .pose import (
    Pose2D,
    Pose3D,
    SimilarityTransform2D,
    align_pose,
    farthest_connected_joint,
    joint_weights,
    mirror,
    pose_distance,
    procrustes_rigid,
)
from .skeleton import SkeletonModel, default_skeleton, load_skeleton

__version__ = "0.1.0"
