import numpy as np
import pytest

from posesynth.desk import generate_desk_corpus
from posesynth.skeleton import SkeletonModel, default_skeleton


@pytest.fixture(scope="session")
def skel():
    return default_skeleton()


@pytest.fixture(scope="session")
def chain3():
    """Three joints in a line, 0-1-2."""
    return SkeletonModel(names=("a", "b", "c"), edges=((0, 1), (1, 2)), torso_joints=(0, 1, 2))


@pytest.fixture(scope="session")
def desk_small():
    """(annotations, mocap) with 40 images; shared read-only."""
    return generate_desk_corpus(40, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)



@pytest.fixture(scope="session")
def oriented(desk_small, skel):
    """Three camera views of every desk mocap pose (120 samples)."""
    from posesynth.dataset import sample_views

    out = []
    for n, mp in enumerate(desk_small[1]):
        out.extend(sample_views(mp, 3, seed=[5, n], skeleton=skel))
    return out
