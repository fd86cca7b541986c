"""Independent reference computations used to freeze expected values.

Nothing here imports the code under test's geometry helpers; each oracle
takes a different route to the same quantity.
"""

from collections import deque

import numpy as np


def mirror_transmitter_point(transmitter, z_o):
    """Surface point of the specular path, solved from the law of reflection.

    The reflection point q on z = -z_o splits the horizontal run in the ratio
    of the vertical drops: observer drop z_o, transmitter drop z_o + t_z.
    """
    t = np.asarray(transmitter, dtype=float)
    drop_t = t[2] + z_o
    frac = z_o / (z_o + drop_t)
    return np.array([t[0] * frac, t[1] * frac, -z_o])


def line_through(a, b, point):
    """Distance from ``point`` to the infinite line through ``a`` and ``b``."""
    a, b, p = (np.asarray(x, dtype=float) for x in (a, b, point))
    d = (b - a) / np.linalg.norm(b - a)
    w = p - a
    return float(np.linalg.norm(w - np.dot(w, d) * d))


def flood_fill_count(binary):
    """8-connected component count by explicit breadth-first flood fill."""
    binary = np.asarray(binary, dtype=bool)
    seen = np.zeros_like(binary)
    h, w = binary.shape
    count = 0
    for v in range(h):
        for u in range(w):
            if not binary[v, u] or seen[v, u]:
                continue
            count += 1
            queue = deque([(v, u)])
            seen[v, u] = True
            while queue:
                cv, cu = queue.popleft()
                for dv in (-1, 0, 1):
                    for du in (-1, 0, 1):
                        nv, nu = cv + dv, cu + du
                        if 0 <= nv < h and 0 <= nu < w and binary[nv, nu] and not seen[nv, nu]:
                            seen[nv, nu] = True
                            queue.append((nv, nu))
    return count


def cone_frame_gram_schmidt(apex, endpoint):
    """Axis plus vertical/horizontal spread directions, rebuilt from scratch."""
    axis = np.asarray(endpoint, dtype=float) - np.asarray(apex, dtype=float)
    axis /= np.linalg.norm(axis)
    up = np.array([0.0, 0.0, 1.0])
    if abs(axis[2]) > 1 - 1e-12:
        up = np.array([1.0, 0.0, 0.0])
    vert = up - axis * np.dot(axis, up)
    vert /= np.linalg.norm(vert)
    horiz = np.cross(axis, vert)
    return axis, vert, horiz


def angular_membership(apex, endpoint, alpha_max, upsilon_max, point):
    """Membership from angular offsets of the point around the cone axis.

    The point is inside if its axial distance lies in [0, L] and the angular
    offsets (vertical, horizontal) fall inside the ellipse whose semi-axes are
    the half-apex angles, measured on the tangent scale.
    """
    apex = np.asarray(apex, dtype=float)
    axis, vert, horiz = cone_frame_gram_schmidt(apex, endpoint)
    length = np.linalg.norm(np.asarray(endpoint, dtype=float) - apex)
    w = np.asarray(point, dtype=float) - apex
    along = np.dot(w, axis)
    if along < 0 or along > length:
        return False
    off_v = np.arctan2(np.dot(w, vert), along)
    off_h = np.arctan2(np.dot(w, horiz), along)
    ta, tu = np.tan(alpha_max), np.tan(upsilon_max)
    if ta == 0 and abs(np.tan(off_v)) > 0:
        return False
    if tu == 0 and abs(np.tan(off_h)) > 0:
        return False
    s = 0.0
    if ta > 0:
        s += (np.tan(off_v) / ta) ** 2
    if tu > 0:
        s += (np.tan(off_h) / tu) ** 2
    return s <= 1.0


def fresnel_normal_incidence(n_i, n_t):
    """Power reflectance at normal incidence, ((n_t - n_i) / (n_t + n_i))^2."""
    return ((n_t - n_i) / (n_t + n_i)) ** 2


def brewster_angle(n_i, n_t):
    return float(np.arctan2(n_t, n_i))


def baseline_range_spread(range_m, baseline_px, jitter_px, focal_px, trials, rng):
    """Relative std of range from a marker pair separated by ``baseline_px`` pixels.

    Range = baseline * focal / separation; each marker centroid gets
    independent Gaussian pixel jitter.
    """
    baseline_m = baseline_px * range_m / focal_px
    sep = baseline_px + rng.normal(0, jitter_px, trials) - rng.normal(0, jitter_px, trials)
    sep = np.where(np.abs(sep) < 1e-3, 1e-3, sep)
    est = baseline_m * focal_px / np.abs(sep)
    return float(np.std(est) / range_m), float(np.median(np.abs(est - range_m)) / range_m)
