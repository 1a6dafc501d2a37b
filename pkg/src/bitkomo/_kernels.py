"""Scalar geometry kernels: signed distances, clearances, and edge-point checks.

Every function here is written as plain scalar numpy code so it can run
either JIT-compiled by numba (default) or as ordinary Python. Set
``BITKOMO_NUMBA=0`` in the environment before import to select the pure
Python/numpy fallback; ``benchmarks/kernel_bench.py`` compares the two.

Obstacle sets are flattened into three arrays so the kernels stay
nopython-compatible:

    obs_types : int64[n]    0 = disc, 1 = axis-aligned box, 2 = convex polygon
    obs_ptr   : int64[n+1]  start offsets into obs_data per obstacle
    obs_data  : float64[:]  disc: cx, cy, r
                            box:  lox, loy, hix, hiy
                            poly: x0, y0, x1, y1, ... (counter-clockwise)

Robots are encoded as (kind, params):

    kind 0 (disc):        params = [radius]
    kind 1 (planar arm):  params = [base_x, base_y, link_radius, len_1, ...]
"""

import math
import os

import numpy as np

NUMBA_ENABLED = os.environ.get("BITKOMO_NUMBA", "1") != "0"

if NUMBA_ENABLED:
    from numba import njit as _njit

    def _maybe_njit(func):
        return _njit(cache=True)(func)
else:

    def _maybe_njit(func):
        return func


ROBOT_DISC = 0
ROBOT_ARM = 1

OBS_DISC = 0
OBS_BOX = 1
OBS_POLY = 2

# iterations of ternary search for the segment/obstacle minimum; the
# clearance along a segment is convex, (2/3)^48 ~ 3e-9 localizes t* and
# the value error at the minimum is second order in that
_TERNARY_ITERS = 48


@_maybe_njit
def _sd_disc(px, py, cx, cy, r):
    dx = px - cx
    dy = py - cy
    d = math.sqrt(dx * dx + dy * dy)
    if d > 1e-300:
        return d - r, dx / d, dy / d
    return -r, 1.0, 0.0


@_maybe_njit
def _sd_box(px, py, lox, loy, hix, hiy):
    qx = min(max(px, lox), hix)
    qy = min(max(py, loy), hiy)
    if px != qx or py != qy:
        dx = px - qx
        dy = py - qy
        d = math.sqrt(dx * dx + dy * dy)
        return d, dx / d, dy / d
    # inside: nearest face, ties resolved left/right/bottom/top
    dl = px - lox
    dr = hix - px
    db = py - loy
    dt = hiy - py
    m = dl
    gx, gy = -1.0, 0.0
    if dr < m:
        m = dr
        gx, gy = 1.0, 0.0
    if db < m:
        m = db
        gx, gy = 0.0, -1.0
    if dt < m:
        m = dt
        gx, gy = 0.0, 1.0
    return -m, gx, gy


@_maybe_njit
def _pt_seg_sq(px, py, ax, ay, bx, by):
    """Squared distance from point to segment plus the nearest point."""
    ex = bx - ax
    ey = by - ay
    ee = ex * ex + ey * ey
    if ee > 1e-300:
        t = ((px - ax) * ex + (py - ay) * ey) / ee
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    else:
        t = 0.0
    nx = ax + t * ex
    ny = ay + t * ey
    dx = px - nx
    dy = py - ny
    return dx * dx + dy * dy, nx, ny


@_maybe_njit
def _sd_poly(px, py, data, lo, hi):
    """Signed distance to a convex CCW polygon stored flat in data[lo:hi]."""
    nv = (hi - lo) // 2
    best = 1e300
    bnx = 0.0
    bny = 0.0
    benx = 0.0
    beny = 0.0
    inside = True
    for i in range(nv):
        ax = data[lo + 2 * i]
        ay = data[lo + 2 * i + 1]
        j = (i + 1) % nv
        bx = data[lo + 2 * j]
        by = data[lo + 2 * j + 1]
        cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        if cross < 0.0:
            inside = False
        d2, nx, ny = _pt_seg_sq(px, py, ax, ay, bx, by)
        if d2 < best:
            best = d2
            bnx = nx
            bny = ny
            # outward normal of this edge (CCW winding)
            el = math.sqrt((bx - ax) ** 2 + (by - ay) ** 2)
            if el > 1e-300:
                benx = (by - ay) / el
                beny = -(bx - ax) / el
            else:
                benx, beny = 1.0, 0.0
    d = math.sqrt(best)
    if d < 1e-12:
        # on the boundary: fall back to the outward edge normal
        return 0.0, benx, beny
    gx = (px - bnx) / d
    gy = (py - bny) / d
    if inside:
        return -d, -gx, -gy
    return d, gx, gy


@_maybe_njit
def _sd_obstacle(px, py, obs_types, obs_ptr, obs_data, k):
    lo = obs_ptr[k]
    t = obs_types[k]
    if t == 0:
        return _sd_disc(px, py, obs_data[lo], obs_data[lo + 1], obs_data[lo + 2])
    if t == 1:
        return _sd_box(
            px, py, obs_data[lo], obs_data[lo + 1], obs_data[lo + 2], obs_data[lo + 3]
        )
    return _sd_poly(px, py, obs_data, lo, obs_ptr[k + 1])


@_maybe_njit
def _seg_obstacle_min(ax, ay, bx, by, obs_types, obs_ptr, obs_data, k):
    """Minimum signed distance from a segment to one obstacle.

    Returns (sd, t*). sd along the segment is a convex function of the
    interpolation parameter (signed distance to a convex set is convex),
    so a ternary search finds the minimizer.
    """
    t = obs_types[k]
    lo = obs_ptr[k]
    if t == 0:
        # closed form: project the disc center onto the segment
        cx = obs_data[lo]
        cy = obs_data[lo + 1]
        r = obs_data[lo + 2]
        ex = bx - ax
        ey = by - ay
        ee = ex * ex + ey * ey
        if ee > 1e-300:
            tt = ((cx - ax) * ex + (cy - ay) * ey) / ee
            if tt < 0.0:
                tt = 0.0
            elif tt > 1.0:
                tt = 1.0
        else:
            tt = 0.0
        dx = ax + tt * ex - cx
        dy = ay + tt * ey - cy
        return math.sqrt(dx * dx + dy * dy) - r, tt
    left = 0.0
    right = 1.0
    for _ in range(_TERNARY_ITERS):
        m1 = left + (right - left) / 3.0
        m2 = right - (right - left) / 3.0
        f1, _gx, _gy = _sd_obstacle(ax + m1 * (bx - ax), ay + m1 * (by - ay),
                                    obs_types, obs_ptr, obs_data, k)
        f2, _gx, _gy = _sd_obstacle(ax + m2 * (bx - ax), ay + m2 * (by - ay),
                                    obs_types, obs_ptr, obs_data, k)
        if f1 <= f2:
            right = m2
        else:
            left = m1
    tt = 0.5 * (left + right)
    f, _gx, _gy = _sd_obstacle(ax + tt * (bx - ax), ay + tt * (by - ay),
                               obs_types, obs_ptr, obs_data, k)
    return f, tt


@_maybe_njit
def _arm_joints(q, params, joints):
    """Fill joints[(n_links+1), 2] with the planar chain joint positions."""
    n = q.shape[0]
    joints[0, 0] = params[0]
    joints[0, 1] = params[1]
    theta = 0.0
    for i in range(n):
        theta += q[i]
        ln = params[3 + i]
        joints[i + 1, 0] = joints[i, 0] + ln * math.cos(theta)
        joints[i + 1, 1] = joints[i, 1] + ln * math.sin(theta)


@_maybe_njit
def clearance_and_grad(q, robot_kind, robot_params, obs_types, obs_ptr, obs_data, grad):
    """Signed clearance of the robot at q and its gradient (written into grad).

    Returns the clearance; grad has the same length as q. Ties between
    obstacles keep the first minimizer (strict < comparison), matching the
    documented deterministic subgradient choice.
    """
    n_obs = obs_types.shape[0]
    for i in range(grad.shape[0]):
        grad[i] = 0.0
    if n_obs == 0:
        return 1e300
    if robot_kind == 0:
        best = 1e300
        r = robot_params[0]
        for k in range(n_obs):
            sd, gx, gy = _sd_obstacle(q[0], q[1], obs_types, obs_ptr, obs_data, k)
            if sd - r < best:
                best = sd - r
                grad[0] = gx
                grad[1] = gy
        return best
    # planar arm: capsule links
    nl = q.shape[0]
    joints = np.empty((nl + 1, 2))
    _arm_joints(q, robot_params, joints)
    lr = robot_params[2]
    best = 1e300
    bi = 0
    bt = 0.0
    bgx = 0.0
    bgy = 0.0
    for i in range(nl):
        ax = joints[i, 0]
        ay = joints[i, 1]
        bx = joints[i + 1, 0]
        by = joints[i + 1, 1]
        for k in range(n_obs):
            sd, tt = _seg_obstacle_min(ax, ay, bx, by, obs_types, obs_ptr, obs_data, k)
            if sd - lr < best:
                best = sd - lr
                bi = i
                bt = tt
                px = ax + tt * (bx - ax)
                py = ay + tt * (by - ay)
                _sd, bgx, bgy = _sd_obstacle(px, py, obs_types, obs_ptr, obs_data, k)
    # chain rule through the winning contact point on link bi
    px = joints[bi, 0] + bt * (joints[bi + 1, 0] - joints[bi, 0])
    py = joints[bi, 1] + bt * (joints[bi + 1, 1] - joints[bi, 1])
    for j in range(bi + 1):
        # revolute joint j rotates the contact point about joints[j]
        vx = px - joints[j, 0]
        vy = py - joints[j, 1]
        grad[j] = bgx * (-vy) + bgy * vx
    return best


@_maybe_njit
def clearance_rows_batch(W, robot_kind, robot_params, obs_types, obs_ptr, obs_data,
                         d_out, g_out):
    """Per-pair clearances for a batch of configurations.

    W is (T, n); d_out is (T, P) and g_out is (T, P, n) where P is the
    number of robot-body/obstacle pairs: n_obs for a disc robot,
    n_links * n_obs for the arm (row index i * n_obs + k). Unlike the
    min-clearance used for validity checks, each row is a smooth function
    almost everywhere, which the trajectory optimizer needs.
    """
    n_obs = obs_types.shape[0]
    T = W.shape[0]
    n = W.shape[1]
    if robot_kind == 0:
        r = robot_params[0]
        for t in range(T):
            for k in range(n_obs):
                sd, gx, gy = _sd_obstacle(W[t, 0], W[t, 1],
                                          obs_types, obs_ptr, obs_data, k)
                d_out[t, k] = sd - r
                g_out[t, k, 0] = gx
                g_out[t, k, 1] = gy
        return
    nl = n
    lr = robot_params[2]
    joints = np.empty((nl + 1, 2))
    for t in range(T):
        _arm_joints(W[t], robot_params, joints)
        for i in range(nl):
            ax = joints[i, 0]
            ay = joints[i, 1]
            bx = joints[i + 1, 0]
            by = joints[i + 1, 1]
            for k in range(n_obs):
                sd, tt = _seg_obstacle_min(ax, ay, bx, by,
                                           obs_types, obs_ptr, obs_data, k)
                p = i * n_obs + k
                d_out[t, p] = sd - lr
                px = ax + tt * (bx - ax)
                py = ay + tt * (by - ay)
                _sd, gx, gy = _sd_obstacle(px, py, obs_types, obs_ptr, obs_data, k)
                # chain rule through the contact point on link i
                for j in range(nl):
                    if j <= i:
                        vx = px - joints[j, 0]
                        vy = py - joints[j, 1]
                        g_out[t, p, j] = gx * (-vy) + gy * vx
                    else:
                        g_out[t, p, j] = 0.0


@_maybe_njit
def clearance_only(q, robot_kind, robot_params, obs_types, obs_ptr, obs_data):
    """Signed clearance without the gradient (early exits are not taken so
    the value matches clearance_and_grad exactly)."""
    n_obs = obs_types.shape[0]
    if n_obs == 0:
        return 1e300
    if robot_kind == 0:
        best = 1e300
        r = robot_params[0]
        for k in range(n_obs):
            sd, gx, gy = _sd_obstacle(q[0], q[1], obs_types, obs_ptr, obs_data, k)
            if sd - r < best:
                best = sd - r
        return best
    nl = q.shape[0]
    joints = np.empty((nl + 1, 2))
    _arm_joints(q, robot_params, joints)
    lr = robot_params[2]
    best = 1e300
    for i in range(nl):
        for k in range(n_obs):
            sd, tt = _seg_obstacle_min(
                joints[i, 0], joints[i, 1], joints[i + 1, 0], joints[i + 1, 1],
                obs_types, obs_ptr, obs_data, k)
            if sd - lr < best:
                best = sd - lr
    return best


@_maybe_njit
def config_free(q, robot_kind, robot_params, obs_types, obs_ptr, obs_data):
    """True iff the robot at q does not penetrate any obstacle (clearance >= 0).

    Early-exits on the first penetrating obstacle.
    """
    n_obs = obs_types.shape[0]
    if n_obs == 0:
        return True
    if robot_kind == 0:
        r = robot_params[0]
        for k in range(n_obs):
            sd, gx, gy = _sd_obstacle(q[0], q[1], obs_types, obs_ptr, obs_data, k)
            if sd - r < 0.0:
                return False
        return True
    nl = q.shape[0]
    joints = np.empty((nl + 1, 2))
    _arm_joints(q, robot_params, joints)
    lr = robot_params[2]
    for i in range(nl):
        for k in range(n_obs):
            sd, tt = _seg_obstacle_min(
                joints[i, 0], joints[i, 1], joints[i + 1, 0], joints[i + 1, 1],
                obs_types, obs_ptr, obs_data, k)
            if sd - lr < 0.0:
                return False
    return True


@_maybe_njit
def first_invalid_on_edge(qa, qb, svals, robot_kind, robot_params,
                          obs_types, obs_ptr, obs_data):
    """Check interpolated configurations (1-s)qa + s qb in the given order.

    Returns the index into svals of the first invalid point, or -1 if all
    are free. Bounds are not re-checked: both endpoints are in-bounds and
    the bounds box is convex.
    """
    n = qa.shape[0]
    q = np.empty(n)
    for idx in range(svals.shape[0]):
        s = svals[idx]
        for j in range(n):
            q[j] = (1.0 - s) * qa[j] + s * qb[j]
        if not config_free(q, robot_kind, robot_params, obs_types, obs_ptr, obs_data):
            return idx
    return -1
