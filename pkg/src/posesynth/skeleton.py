"""Skeleton topology: joint names, bones, left/right symmetry and the torso."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .exceptions import SkeletonError


@dataclass(frozen=True)
class SkeletonModel:
    """Kinematic tree over ``joint_count`` joints.

    ``edges`` must form a spanning tree, ``lr_pairs`` lists (left, right)
    joint pairs swapped under mirroring and ``torso_joints`` holds the joints
    whose mean defines the torso center (shoulders and hips for a body).
    """

    names: tuple[str, ...]
    edges: tuple[tuple[int, int], ...]
    lr_pairs: tuple[tuple[int, int], ...] = ()
    torso_joints: tuple[int, ...] = ()
    _neighbors: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "edges", tuple((int(a), int(b)) for a, b in self.edges))
        object.__setattr__(self, "lr_pairs", tuple((int(a), int(b)) for a, b in self.lr_pairs))
        object.__setattr__(self, "torso_joints", tuple(int(t) for t in self.torso_joints))
        self._validate()
        adj: list[list[int]] = [[] for _ in range(self.joint_count)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        object.__setattr__(self, "_neighbors", tuple(tuple(sorted(n)) for n in adj))

    @property
    def joint_count(self) -> int:
        return len(self.names)

    def neighbors(self, j: int) -> tuple[int, ...]:
        """Joints sharing a bone with ``j``, ascending."""
        return self._neighbors[j]

    def swap_permutation(self) -> np.ndarray:
        """Index array mapping each joint to its mirror counterpart."""
        perm = np.arange(self.joint_count)
        for a, b in self.lr_pairs:
            perm[a], perm[b] = b, a
        return perm

    def _validate(self):
        n = self.joint_count
        if n < 2:
            raise SkeletonError("skeleton needs at least two joints")
        if len(set(self.names)) != n:
            raise SkeletonError("joint names must be unique")
        for a, b in self.edges:
            if not (0 <= a < n and 0 <= b < n) or a == b:
                raise SkeletonError(f"invalid bone ({a}, {b})")
        if len(self.edges) != n - 1:
            raise SkeletonError(f"a tree over {n} joints needs {n - 1} bones, got {len(self.edges)}")
        # union-find connectivity; with n-1 edges this also rules out cycles
        parent = list(range(n))

        def root(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in self.edges:
            ra, rb = root(a), root(b)
            if ra == rb:
                raise SkeletonError(f"bone ({a}, {b}) closes a cycle")
            parent[ra] = rb
        seen: set[int] = set()
        for a, b in self.lr_pairs:
            if not (0 <= a < n and 0 <= b < n) or a == b:
                raise SkeletonError(f"invalid left/right pair ({a}, {b})")
            if a in seen or b in seen:
                raise SkeletonError(f"joint appears in more than one left/right pair: ({a}, {b})")
            seen.update((a, b))
        if not self.torso_joints or any(not 0 <= t < n for t in self.torso_joints):
            raise SkeletonError("torso_joints must list valid joint indices")

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "edges": [list(e) for e in self.edges],
            "lr_pairs": [list(p) for p in self.lr_pairs],
            "torso_joints": list(self.torso_joints),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SkeletonModel":
        try:
            return cls(
                names=d["names"],
                edges=d["edges"],
                lr_pairs=d.get("lr_pairs", ()),
                torso_joints=d["torso_joints"],
            )
        except KeyError as exc:
            raise SkeletonError(f"skeleton definition missing field {exc}") from None

    @classmethod
    def from_json(cls, path) -> "SkeletonModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


@lru_cache(maxsize=1)
def default_skeleton() -> SkeletonModel:
    """The bundled 13-joint skeleton (head, arms, legs; no neck or pelvis joint)."""
    text = resources.files("posesynth").joinpath("data/skeleton13.json").read_text()
    return SkeletonModel.from_dict(json.loads(text))


def load_skeleton(path=None) -> SkeletonModel:
    if path is None:
        return default_skeleton()
    return SkeletonModel.from_json(path)
