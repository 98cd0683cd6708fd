"""Compiled ray/boundary kernels.

Scenes are passed to the kernels as a flat tuple of arrays built by
:func:`retrobilliard.geometry.pack_scene`.  Layout (index: content):

    0  kind     int64[P]      piece kind (SEGMENT, ELLIPSE, PARABOLA, HALFLINE)
    1  prm      float64[P,8]  kind-specific parameters
    2  ends     float64[P,4]  endpoint coordinates (inf where unbounded)
    3  plen     float64[P]    length scale used for the corner tolerance
    4  reuse    int64[P]      1 if the piece can be hit twice in a row
    5  watch    int64[P]      1 if a hit on the piece should be reported
    6  opening  float64[6]    x0, y0, x1, y1, outward normal (nx, ny)
    7  has_open int64         1 for hollows, 0 for unbounded scenes
    8  gmeta    float64[4]    grid origin (x, y) and cell size (w, h)
    9  gdims    int64[2]      grid cells along x and y
    10 cstart   int64[C+1]    CSR offsets into citems
    11 citems   int64[K]      piece ids per cell
    12 use_grid int64
    13 scale    float64       scene diameter
"""

import math

import numpy as np
from numba import njit

SEGMENT = 0
ELLIPSE = 1
PARABOLA = 2
HALFLINE = 3

OK = 0
MAX_REFLECTIONS = 1
SINGULAR_HIT = 2
TANGENT_HIT = 3
ESCAPED = 4
NO_INTERACTION = 5

# unbounded scenes: hits farther than this many scene scales count as escapes
_HORIZON = 1e9

STATUS_NAMES = {
    OK: "ok",
    MAX_REFLECTIONS: "max_reflections",
    SINGULAR_HIT: "singular_hit",
    TANGENT_HIT: "tangent_hit",
    ESCAPED: "escaped",
    NO_INTERACTION: "no_interaction",
}

# parametric slack on segment/arc ranges; keeps rays from leaking through joints
_SLACK = 1e-12
_TWO_PI = 2.0 * math.pi


@njit(cache=True, nogil=True)
def stable_roots(a, b, c):
    """Real roots of a*t^2 + b*t + c = 0, computed without cancellation.

    Returns (r1, r2); missing roots are inf.
    """
    inf = np.inf
    if a == 0.0:
        if b == 0.0:
            return inf, inf
        return -c / b, inf
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return inf, inf
    sq = math.sqrt(disc)
    q = -0.5 * (b + sq) if b >= 0.0 else -0.5 * (b - sq)
    r1 = q / a
    r2 = c / q if q != 0.0 else inf
    return r1, r2


@njit(cache=True, nogil=True)
def _hit_segment(ox, oy, dx, dy, x0, y0, x1, y1, t_min):
    ex = x1 - x0
    ey = y1 - y0
    den = dx * ey - dy * ex
    if den == 0.0:
        return np.inf, 0.0, 0.0
    wx = x0 - ox
    wy = y0 - oy
    t = (wx * ey - wy * ex) / den
    if t <= t_min:
        return np.inf, 0.0, 0.0
    s = (wx * dy - wy * dx) / den
    if s < -_SLACK or s > 1.0 + _SLACK:
        return np.inf, 0.0, 0.0
    ln = math.hypot(ex, ey)
    return t, -ey / ln, ex / ln


@njit(cache=True, nogil=True)
def _hit_halfline(ox, oy, dx, dy, x0, y0, ex, ey, t_min, scale):
    den = dx * ey - dy * ex
    if den == 0.0:
        return np.inf, 0.0, 0.0
    wx = x0 - ox
    wy = y0 - oy
    t = (wx * ey - wy * ex) / den
    if t <= t_min:
        return np.inf, 0.0, 0.0
    s = (wx * dy - wy * dx) / den
    if s < -_SLACK * scale:
        return np.inf, 0.0, 0.0
    return t, -ey, ex


@njit(cache=True, nogil=True)
def _in_arc(theta, t0, t1):
    d = (theta - t0) % _TWO_PI
    span = t1 - t0
    return d <= span + _SLACK or d >= _TWO_PI - _SLACK


@njit(cache=True, nogil=True)
def _hit_ellipse(ox, oy, dx, dy, cx, cy, a, b, t0, t1, t_min):
    X = (ox - cx) / a
    Y = (oy - cy) / b
    DX = dx / a
    DY = dy / b
    r1, r2 = stable_roots(DX * DX + DY * DY, 2.0 * (X * DX + Y * DY), X * X + Y * Y - 1.0)
    best = np.inf
    if r1 > t_min and _in_arc(math.atan2(Y + r1 * DY, X + r1 * DX), t0, t1):
        best = r1
    if r2 > t_min and r2 < best and _in_arc(math.atan2(Y + r2 * DY, X + r2 * DX), t0, t1):
        best = r2
    if best == np.inf:
        return np.inf, 0.0, 0.0
    gx = (X + best * DX) / a
    gy = (Y + best * DY) / b
    g = math.hypot(gx, gy)
    return best, gx / g, gy / g


@njit(cache=True, nogil=True)
def _hit_parabola(ox, oy, dx, dy, vx, vy, ax, ay, p, s0, s1, t_min):
    rx = ox - vx
    ry = oy - vy
    u0 = rx * ax + ry * ay
    w0 = -rx * ay + ry * ax
    du = dx * ax + dy * ay
    dw = -dx * ay + dy * ax
    r1, r2 = stable_roots(dw * dw, 2.0 * w0 * dw - 4.0 * p * du, w0 * w0 - 4.0 * p * u0)
    span = s1 - s0
    if not math.isfinite(span):
        span = 1.0
    lo = s0 - _SLACK * span
    hi = s1 + _SLACK * span
    best = np.inf
    if r1 > t_min:
        w = w0 + r1 * dw
        if lo <= w <= hi:
            best = r1
    if r2 > t_min and r2 < best:
        w = w0 + r2 * dw
        if lo <= w <= hi:
            best = r2
    if best == np.inf:
        return np.inf, 0.0, 0.0
    w = w0 + best * dw
    gx = -4.0 * p * ax - 2.0 * w * ay
    gy = -4.0 * p * ay + 2.0 * w * ax
    g = math.hypot(gx, gy)
    return best, gx / g, gy / g


@njit(cache=True, nogil=True)
def hit_piece(scene, i, ox, oy, dx, dy, t_min):
    """Smallest t > t_min where the ray meets piece i, with a unit normal."""
    kind = scene[0][i]
    q = scene[1][i]
    if kind == SEGMENT:
        return _hit_segment(ox, oy, dx, dy, q[0], q[1], q[2], q[3], t_min)
    if kind == ELLIPSE:
        return _hit_ellipse(ox, oy, dx, dy, q[0], q[1], q[2], q[3], q[4], q[5], t_min)
    if kind == PARABOLA:
        return _hit_parabola(ox, oy, dx, dy, q[0], q[1], q[2], q[3], q[4], q[5], q[6], t_min)
    return _hit_halfline(ox, oy, dx, dy, q[0], q[1], q[2], q[3], t_min, scene[13])


@njit(cache=True, nogil=True)
def _scan_all(scene, ox, oy, dx, dy, t_min, skip):
    kinds = scene[0]
    best_t = np.inf
    best_i = -1
    bnx = 0.0
    bny = 0.0
    for i in range(kinds.shape[0]):
        if i == skip:
            continue
        t, nx, ny = hit_piece(scene, i, ox, oy, dx, dy, t_min)
        if t < best_t:
            best_t = t
            best_i = i
            bnx = nx
            bny = ny
    return best_t, best_i, bnx, bny


@njit(cache=True, nogil=True)
def _scan_grid(scene, ox, oy, dx, dy, t_min, skip):
    gmeta = scene[8]
    nxc = scene[9][0]
    nyc = scene[9][1]
    cstart = scene[10]
    citems = scene[11]
    gx0 = gmeta[0]
    gy0 = gmeta[1]
    cw = gmeta[2]
    ch = gmeta[3]

    ix = int(math.floor((ox - gx0) / cw))
    iy = int(math.floor((oy - gy0) / ch))
    ix = min(max(ix, 0), nxc - 1)
    iy = min(max(iy, 0), nyc - 1)

    if dx > 0.0:
        stepx = 1
        tmx = (gx0 + (ix + 1) * cw - ox) / dx
        tdx = cw / dx
    elif dx < 0.0:
        stepx = -1
        tmx = (gx0 + ix * cw - ox) / dx
        tdx = -cw / dx
    else:
        stepx = 0
        tmx = np.inf
        tdx = np.inf
    if dy > 0.0:
        stepy = 1
        tmy = (gy0 + (iy + 1) * ch - oy) / dy
        tdy = ch / dy
    elif dy < 0.0:
        stepy = -1
        tmy = (gy0 + iy * ch - oy) / dy
        tdy = -ch / dy
    else:
        stepy = 0
        tmy = np.inf
        tdy = np.inf

    best_t = np.inf
    best_i = -1
    bnx = 0.0
    bny = 0.0
    while True:
        cell = iy * nxc + ix
        for k in range(cstart[cell], cstart[cell + 1]):
            i = citems[k]
            if i == skip:
                continue
            t, nx, ny = hit_piece(scene, i, ox, oy, dx, dy, t_min)
            if t < best_t:
                best_t = t
                best_i = i
                bnx = nx
                bny = ny
        t_exit = min(tmx, tmy)
        if best_t <= t_exit:
            break
        if tmx < tmy:
            ix += stepx
            tmx += tdx
            if ix < 0 or ix >= nxc:
                break
        else:
            iy += stepy
            tmy += tdy
            if iy < 0 or iy >= nyc:
                break
    return best_t, best_i, bnx, bny


@njit(cache=True, nogil=True)
def first_hit(scene, ox, oy, dx, dy, t_min, skip, corner_tol, tangent_tol):
    """Nearest boundary hit along a ray.

    Returns (t, piece, hx, hy, nx, ny, flag); piece is -1 when nothing is hit.
    The normal faces the incoming ray.  flag: 0 clean, SINGULAR_HIT when the
    point is within corner_tol * length of a piece endpoint, TANGENT_HIT when
    the ray meets the piece at an angle below tangent_tol.
    """
    if scene[12] == 1:
        t, i, nx, ny = _scan_grid(scene, ox, oy, dx, dy, t_min, skip)
    else:
        t, i, nx, ny = _scan_all(scene, ox, oy, dx, dy, t_min, skip)
    if i < 0:
        return np.inf, -1, 0.0, 0.0, 0.0, 0.0, 0
    hx = ox + t * dx
    hy = oy + t * dy
    c = dx * nx + dy * ny
    if c > 0.0:
        nx = -nx
        ny = -ny
        c = -c
    flag = 0
    e = scene[2][i]
    tol = corner_tol * scene[3][i]
    if math.hypot(hx - e[0], hy - e[1]) < tol or math.hypot(hx - e[2], hy - e[3]) < tol:
        flag = SINGULAR_HIT
    elif -c < tangent_tol:
        flag = TANGENT_HIT
    return t, i, hx, hy, nx, ny, flag


@njit(cache=True, nogil=True)
def trace_one(scene, ox, oy, dx, dy, max_refl, t_eps, corner_tol, tangent_tol, path):
    """Follow one particle until it leaves the scene.

    Returns (status, m, vx, vy, xi_plus, watched, n_path).  For hollows the
    particle exits through the opening and xi_plus is the normalized exit
    coordinate; for unbounded scenes it exits when no further hit exists.
    path (shape (K, 2)) receives the entry point, the reflection points and
    the exit point, up to K rows.
    """
    opening = scene[6]
    has_open = scene[7] == 1
    reuse = scene[4]
    watch = scene[5]
    kpath = path.shape[0]
    npath = 0
    if kpath > 0:
        path[0, 0] = ox
        path[0, 1] = oy
        npath = 1

    m = 0
    watched = 0
    skip = -1
    while True:
        t, i, hx, hy, nx, ny, flag = first_hit(
            scene, ox, oy, dx, dy, t_eps if m > 0 else 0.0, skip, corner_tol, tangent_tol
        )
        if has_open:
            onx = opening[4]
            ony = opening[5]
            if dx * onx + dy * ony > 0.0:
                ex = opening[2] - opening[0]
                ey = opening[3] - opening[1]
                den = dx * ey - dy * ex
                wx = opening[0] - ox
                wy = opening[1] - oy
                t_open = (wx * ey - wy * ex) / den
                if t_open < t:
                    s = (wx * dy - wy * dx) / den
                    if npath < kpath:
                        path[npath, 0] = ox + t_open * dx
                        path[npath, 1] = oy + t_open * dy
                        npath += 1
                    if s < -_SLACK or s > 1.0 + _SLACK:
                        return ESCAPED, m, dx, dy, np.nan, watched, npath
                    return OK, m, dx, dy, min(max(s, 0.0), 1.0), watched, npath
            if i < 0:
                return ESCAPED, m, dx, dy, np.nan, watched, npath
        elif i < 0 or t > _HORIZON * scene[13]:
            # hits beyond the horizon come from rounding in a direction that
            # should be exactly asymptotic (e.g. parallel to a parabola axis)
            if m == 0:
                return NO_INTERACTION, m, dx, dy, np.nan, watched, npath
            return OK, m, dx, dy, np.nan, watched, npath

        if npath < kpath:
            path[npath, 0] = hx
            path[npath, 1] = hy
            npath += 1
        if flag != 0:
            return flag, m, dx, dy, np.nan, watched, npath
        dn = dx * nx + dy * ny
        dx = dx - 2.0 * dn * nx
        dy = dy - 2.0 * dn * ny
        r = math.hypot(dx, dy)
        dx /= r
        dy /= r
        m += 1
        watched |= watch[i]
        if m > max_refl:
            return MAX_REFLECTIONS, m, dx, dy, np.nan, watched, npath
        ox = hx
        oy = hy
        skip = -1 if reuse[i] == 1 else i


@njit(cache=True, nogil=True)
def trace_batch(scene, ox, oy, dx, dy, max_refl, t_eps, corner_tol, tangent_tol,
                status, m, vx, vy, xi_plus, watched):
    """trace_one over arrays of rays; results are written into the out arrays."""
    nopath = np.empty((0, 2))
    for k in range(ox.shape[0]):
        s, mk, ux, uy, xp, w, _ = trace_one(
            scene, ox[k], oy[k], dx[k], dy[k], max_refl, t_eps, corner_tol, tangent_tol, nopath
        )
        status[k] = s
        m[k] = mk
        vx[k] = ux
        vy[k] = uy
        xi_plus[k] = xp
        watched[k] = w
