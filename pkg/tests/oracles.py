"""Independent brute-force reference implementations used by the tests.

They deliberately share no code with the package beyond its public data
types, and favor obvious loops over speed (except the rotation grid, which is
jitted to stay within test time budgets).
"""

import math

import numba
import numpy as np
from scipy.optimize import minimize

from posesynth.pose import Pose2D, align_pose, anchor_joint, pose_distance


# -- retrieval ----------------------------------------------------------------


def scan_best_match(query: Pose2D, j: int, corpus, skeleton):
    """Return ``(index, score)`` of the lowest scoring entry by scalar evaluation."""
    i = anchor_joint(skeleton, query, j)
    best_k, best = None, math.inf
    for k, item in enumerate(corpus):
        q = item.pose
        if not (q.visible[j] and q.visible[i]):
            continue
        s = pose_distance(query, q, j, skeleton, i)
        if s < best:
            best_k, best = k, s
    return best_k, best


def hand_pose_distance(p, q, j, i, q_visible):
    """Weighted residual sum written out joint by joint."""
    _, qa = align_pose(Pose2D(q), Pose2D(p), j, i)
    n = len(p)
    mask = [bool(v) and k != j for k, v in enumerate(q_visible)]

    def weights(x):
        inv = []
        for k in range(n):
            d = math.dist(x[k], x[j]) if mask[k] else 0.0
            inv.append((1.0 / (d if d > 0 else 1e-3)) if mask[k] else 0.0)
        s = sum(inv)
        return [w / s for w in inv] if s else inv

    wp, wq = weights(p), weights(q)
    return sum((wp[k] + wq[k]) * math.dist(p[k], qa.coords[k]) for k in range(n))


# -- rasters -------------------------------------------------------------------


def barycentric_value(px, py, tri_pts, tri_vals):
    """Solve the 2x2 barycentric system for one pixel; ``None`` if outside."""
    (xa, ya), (xb, yb), (xc, yc) = tri_pts
    m = np.array([[xa - xc, xb - xc], [ya - yc, yb - yc]])
    la, lb = np.linalg.solve(m, [px - xc, py - yc])
    lc = 1 - la - lb
    if min(la, lb, lc) < -1e-9:
        return None
    return la * tri_vals[0] + lb * tri_vals[1] + lc * tri_vals[2]


def argmax_scan(stack):
    """1-based per-pixel argmax, first maximum wins."""
    m, h, w = stack.shape
    out = np.zeros((h, w), dtype=int)
    for r in range(h):
        for c in range(w):
            best, arg = -math.inf, 0
            for k in range(m):
                if stack[k, r, c] > best:
                    best, arg = stack[k, r, c], k
            out[r, c] = arg + 1
    return out


def segment_distance_field(segments, shape):
    """Distance of every pixel center to the nearest rasterized segment pixel."""
    pts = np.concatenate(segments)
    rows, cols = np.indices(shape)
    best = np.full(shape, np.inf)
    for r, c in pts:
        best = np.minimum(best, np.hypot(rows - r, cols - c))
    return best


def window_weights_scan(labels, sides, m):
    """Per-pixel window histogram computed by slicing each window."""
    h, w = labels.shape
    out = np.zeros((m, h, w))
    for r in range(h):
        for c in range(w):
            s = sides[r, c]
            r0, r1 = max(r - (s - 1) // 2, 0), min(r + s // 2, h - 1)
            c0, c1 = max(c - (s - 1) // 2, 0), min(c + s // 2, w - 1)
            win = labels[r0 : r1 + 1, c0 : c1 + 1]
            for k in range(m):
                out[k, r, c] = np.count_nonzero(win == k + 1) / win.size
    return out


# -- occlusion -----------------------------------------------------------------


def zbuffer_occlusion(uv, depth, edges, radius, shape=(220, 220), tile=10):
    """Render each joint's non-incident bones as depth capsules and test its pixel.

    Only a ``2 * tile + 1`` square of pixels around the joint is rendered.
    Returns ``(occluded, ambiguous)``; ``ambiguous`` marks joints whose
    decision can flip from pixel discretization (a bone within 1 px of the
    capsule boundary, or at nearly the joint's depth).
    """
    n = len(uv)
    occluded = np.zeros(n, dtype=bool)
    ambiguous = np.zeros(n, dtype=bool)
    for k in range(n):
        x, y = np.floor(uv[k] + 0.5).astype(int)
        rows, cols = np.mgrid[y - tile : y + tile + 1, x - tile : x + tile + 1]
        centers = np.stack([cols.ravel(), rows.ravel()], axis=1).astype(float)
        zbuf = np.full(len(centers), np.inf)
        for a, b in edges:
            if k in (a, b):
                continue
            seg = uv[b] - uv[a]
            L2 = float(seg @ seg)
            t = np.clip((centers - uv[a]) @ seg / L2, 0, 1) if L2 > 0 else np.zeros(len(centers))
            d = np.hypot(*(centers - (uv[a] + t[:, None] * seg)).T)
            z = depth[a] + t * (depth[b] - depth[a])
            cover = d <= radius
            zbuf[cover] = np.minimum(zbuf[cover], z[cover])
            # exact distance from the joint itself, to flag borderline cases
            tk = np.clip((uv[k] - uv[a]) @ seg / L2, 0, 1) if L2 > 0 else 0.0
            dk = np.hypot(*(uv[k] - (uv[a] + tk * seg)))
            zk = depth[a] + tk * (depth[b] - depth[a])
            if abs(dk - radius) < 1.0 or (dk <= radius + 1.0 and abs(zk - depth[k]) < 60.0):
                ambiguous[k] = True
        centre = tile * (2 * tile + 1) + tile
        occluded[k] = zbuf[centre] < depth[k]
    return occluded, ambiguous


# -- clustering ----------------------------------------------------------------


def lloyd_reference(X, k, seed, max_iter=100, tol=1e-6):
    """Plain-loop k-means++ and Lloyd consuming the generator in the same order."""
    rng = np.random.default_rng(seed)
    X = [list(map(float, row)) for row in X]
    n = len(X)

    def sq(a, b):
        return sum((x - y) ** 2 for x, y in zip(a, b))

    chosen = [int(rng.integers(n))]
    d2 = [sq(x, X[chosen[0]]) for x in X]
    for _ in range(1, k):
        total = float(np.sum(d2))
        if total > 0:
            r = rng.random() * total
            nxt = n - 1
            cum = np.cumsum(d2)
            for idx in range(n):
                if cum[idx] > r:
                    nxt = idx
                    break
        else:
            nxt = int(rng.integers(n))
        chosen.append(nxt)
        d2 = [min(d2[m], sq(X[m], X[nxt])) for m in range(n)]

    centers = [list(X[c]) for c in chosen]
    prev = None
    for _ in range(max_iter):
        labels, dmin = [], []
        for x in X:
            ds = [sq(x, c) for c in centers]
            best = min(range(k), key=lambda c: (ds[c], c))
            labels.append(best)
            dmin.append(ds[best])
        counts = [labels.count(c) for c in range(k)]
        for e in [c for c in range(k) if counts[c] == 0]:
            order = sorted(range(n), key=lambda m: (-dmin[m], m))
            for m in order:
                if counts[labels[m]] > 1:
                    counts[labels[m]] -= 1
                    labels[m] = e
                    counts[e] = 1
                    dmin[m] = -1.0
                    break
        centers = []
        for c in range(k):
            members = [X[m] for m in range(n) if labels[m] == c]
            centers.append([sum(col) / len(members) for col in zip(*members)])
        inertia = sum(sq(X[m], centers[labels[m]]) for m in range(n))
        if prev is not None and abs(prev - inertia) <= tol * prev:
            break
        if inertia == 0:
            break
        prev = inertia
    return np.array(labels), inertia


# -- pose sets -----------------------------------------------------------------


def pairwise_min_distance(coords, reduce=np.max):
    """Smallest pairwise (max or mean) joint distance over all pairs."""
    best = math.inf
    for a in range(len(coords)):
        for b in range(a + 1, len(coords)):
            best = min(best, float(reduce(np.linalg.norm(coords[a] - coords[b], axis=1))))
    return best


# -- rigid alignment grid ------------------------------------------------------


@numba.njit(cache=True)
def _grid_search(a, b, cos_t, sin_t, pitch_lo, pitch_hi):
    n = a.shape[0]
    best = np.inf
    best_idx = (0, 0, 0)
    for ia in range(360):
        ca, sa = cos_t[ia], sin_t[ia]
        for ib in range(pitch_lo, pitch_hi + 1):
            cb, sb = cos_t[ib % 360], sin_t[ib % 360]
            for ic in range(360):
                cc, sc = cos_t[ic], sin_t[ic]
                r00 = ca * cb
                r01 = ca * sb * sc - sa * cc
                r02 = ca * sb * cc + sa * sc
                r10 = sa * cb
                r11 = sa * sb * sc + ca * cc
                r12 = sa * sb * cc - ca * sc
                r20 = -sb
                r21 = cb * sc
                r22 = cb * cc
                total = 0.0
                limit = best * n
                for k in range(n):
                    x, y, z = a[k, 0], a[k, 1], a[k, 2]
                    dx = r00 * x + r01 * y + r02 * z - b[k, 0]
                    dy = r10 * x + r11 * y + r12 * z - b[k, 1]
                    dz = r20 * x + r21 * y + r22 * z - b[k, 2]
                    total += math.sqrt(dx * dx + dy * dy + dz * dz)
                    if total >= limit:
                        break
                if total < limit:
                    best = total / n
                    best_idx = (ia, ib, ic)
    return best, best_idx


def euler_matrix(yaw, pitch, roll):
    ca, sa = math.cos(yaw), math.sin(yaw)
    cb, sb = math.cos(pitch), math.sin(pitch)
    cc, sc = math.cos(roll), math.sin(roll)
    rz = np.array([[ca, -sa, 0], [sa, ca, 0], [0, 0, 1]])
    ry = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    rx = np.array([[1, 0, 0], [0, cc, -sc], [0, sc, cc]])
    return rz @ ry @ rx


def grid_rigid_min(a, b, refine=True):
    """Minimum mean joint distance over a 1 degree Euler grid, translation by centroid.

    Yaw and roll span [0, 360), pitch [-90, 90]. With ``refine`` the best
    cell is polished by pattern search over the three angles and the
    translation, then by simplex searches with the translation pinning each
    joint onto its partner. Refinement can only lower the returned value.
    """
    a = np.asarray(a, dtype=float) - np.mean(a, axis=0)
    b = np.asarray(b, dtype=float) - np.mean(b, axis=0)
    deg = np.radians(np.arange(360))
    best, (ia, ib, ic) = _grid_search(a, b, np.cos(deg), np.sin(deg), -90, 90)
    if not refine:
        return best
    params = np.concatenate([np.radians([ia, ib, ic]), np.zeros(3)])

    def cost(x):
        r = euler_matrix(*x[:3])
        return float(np.linalg.norm(a @ r.T + x[3:] - b, axis=1).mean())

    # angle step in radians, translation step in input units
    steps = np.array([np.radians(1.0)] * 3 + [10.0] * 3)
    while steps[0] > np.radians(1e-6):
        improved = True
        while improved:
            improved = False
            for dim in range(6):
                for sgn in (-1, 1):
                    trial = params.copy()
                    trial[dim] += sgn * steps[dim]
                    c = cost(trial)
                    if c < best:
                        best, params, improved = c, trial, True
        steps /= 4
    # the optimum may put one residual at exactly zero, a kink that smooth
    # local search cannot settle on; search those configurations directly
    opts = {"xatol": 1e-11, "fatol": 1e-12, "maxiter": 5000}
    for k in range(len(a)):

        def pinned(ang, k=k):
            r = euler_matrix(*ang)
            return float(np.linalg.norm((a - a[k]) @ r.T - (b - b[k]), axis=1).mean())

        best = min(best, float(minimize(pinned, params[:3], method="Nelder-Mead", options=opts).fun))
    return best
