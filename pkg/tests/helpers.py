import numpy as np


def random_pose2d(rng, n=13, lo=20.0, hi=200.0):
    return rng.uniform(lo, hi, size=(n, 2))


def random_similarity(rng):
    theta = rng.uniform(-np.pi, np.pi)
    scale = rng.uniform(0.5, 2.0)
    t = rng.uniform(-50, 50, size=2)
    c, s = np.cos(theta), np.sin(theta)
    return lambda pts: scale * pts @ np.array([[c, -s], [s, c]]).T + t
