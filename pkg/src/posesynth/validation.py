"""Input checking shared by the estimators."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array


def check_pose_array(X, dim: int, n_joints: int | None = None, flatten: bool = False) -> np.ndarray:
    """Coerce ``X`` to a float array of shape ``(n_samples, n_joints, dim)``.

    Accepts pose objects (anything with ``.coords``), samples carrying
    ``pose2d``/``pose3d``, nested lists, or already-flattened
    ``(n_samples, n_joints * dim)`` arrays. With ``flatten=True`` the result
    is returned as ``(n_samples, n_joints * dim)``.
    """
    if isinstance(X, (list, tuple)) and X and not isinstance(X[0], (list, tuple, np.ndarray)):
        attr = "pose3d" if dim == 3 else "pose2d"
        X = [getattr(x, attr, x) for x in X]
        X = np.stack([np.asarray(x.coords) for x in X])
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 2:
        arr = check_array(arr, dtype=np.float64)
        if arr.shape[1] % dim:
            raise ValueError(f"feature count {arr.shape[1]} is not a multiple of {dim}")
        arr = arr.reshape(len(arr), -1, dim)
    elif arr.ndim == 3:
        if arr.shape[2] != dim:
            raise ValueError(f"expected {dim}D coordinates, got trailing dimension {arr.shape[2]}")
        check_array(arr.reshape(len(arr), -1), dtype=np.float64)
    else:
        raise ValueError(f"expected a 2D or 3D array of poses, got ndim={arr.ndim}")
    if n_joints is not None and arr.shape[1] != n_joints:
        raise ValueError(f"expected {n_joints} joints, got {arr.shape[1]}")
    return arr.reshape(len(arr), -1) if flatten else arr


def check_positive(name: str, value, strict: bool = True):
    if (value <= 0) if strict else (value < 0):
        raise ValueError(f"{name} must be {'positive' if strict else 'non-negative'}, got {value}")
    return value
