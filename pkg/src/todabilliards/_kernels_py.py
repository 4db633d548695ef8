"""Pure-Python twin of the compiled collision kernel.

Same algorithm and numerics as ``_kernels.pyx``: march along the
closed-form geodesic with a fixed stride, bracket the first sign change
of each wall's membership function, refine with Brent to the requested
time tolerance.  The compiled module is preferred at import time when
available (see ``_backend``); this twin keeps the package functional
without a C toolchain and serves as the baseline for the benchmark.
"""

import math

# geodesic kinds
ARC = 0
DIAMETER = 1

# return statuses
HIT = 0
NO_HIT_EVER = 1
NO_HIT_BEFORE_LIMIT = 2
BAD_START = 3

# omega*(t - t1) beyond which tanh has saturated to 1.0 in doubles
_SATURATION = 44.0
# walls whose best remaining membership value stays above -CROSS_EPS
# cannot produce a detectable crossing (tangencies are skipped)
_CROSS_EPS = 1e-12


def _arc_position(n1, n2, v, radius, kappa, phi, out):
    cos_phi = math.cos(phi)
    sin_phi = math.sin(phi)
    # radius*cos(phi) - v, stable for large v
    radial = -(2.0 * v * math.sin(0.5 * phi) ** 2 + kappa * cos_phi)
    tangential = radius * sin_phi
    for j in range(len(out)):
        out[j] = n1[j] * radial + n2[j] * tangential


def _wall_value(y, center, rsq):
    acc = 0.0
    for j in range(len(y)):
        d = y[j] - center[j]
        acc += d * d
    return acc - rsq


def _arc_min_remaining(n1, n2, v, radius, kappa, phi_a, phi_b, center, rsq, buf):
    """Minimum of the wall membership over the phase window [phi_a, phi_b].

    The membership along an arc is a sinusoid in the phase, so the
    minimum sits at an endpoint or at the single interior critical
    phase; every candidate is evaluated through the stable position
    formula because the sinusoid coefficients cancel badly at large v.
    """
    c_n1 = 0.0
    c_n2 = 0.0
    for j in range(len(buf)):
        c_n1 += n1[j] * center[j]
        c_n2 += n2[j] * center[j]
    _arc_position(n1, n2, v, radius, kappa, phi_a, buf)
    best = _wall_value(buf, center, rsq)
    _arc_position(n1, n2, v, radius, kappa, phi_b, buf)
    fb = _wall_value(buf, center, rsq)
    if fb < best:
        best = fb
    psi = math.atan2(-c_n2, -(v + c_n1))
    for crit in (psi - math.pi, psi + math.pi):
        if phi_a <= crit <= phi_b:
            _arc_position(n1, n2, v, radius, kappa, crit, buf)
            fc = _wall_value(buf, center, rsq)
            if fc < best:
                best = fc
    return best


def _diameter_min_remaining(n2, t_a_pos, center, rsq, d):
    """Minimum of T^2 - 2 b T + (|c|^2 - rsq) over T in [T_a, 1]."""
    b = 0.0
    cc = 0.0
    for j in range(d):
        b += n2[j] * center[j]
        cc += center[j] * center[j]
    cc -= rsq

    def val(tt):
        return tt * tt - 2.0 * b * tt + cc

    best = min(val(t_a_pos), val(1.0))
    if t_a_pos <= b <= 1.0:
        best = min(best, val(b))
    return best


def _brent(f, a, b, fa, fb, xtol):
    """Classic Brent root refinement on a sign-change bracket [a, b]."""
    c, fc = a, fa
    e = d = b - a
    eps = 2.220446049250313e-16
    for _ in range(200):
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol = 2.0 * eps * abs(b) + 0.5 * xtol
        m = 0.5 * (c - b)
        if abs(m) <= tol or fb == 0.0:
            return b
        if abs(e) < tol or abs(fa) <= abs(fb):
            e = d = m
        else:
            s = fb / fa
            if a == c:
                p = 2.0 * m * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0.0:
                q = -q
            else:
                p = -p
            if 2.0 * p < min(3.0 * m * q - abs(tol * q), abs(e * q)):
                e = d
                d = p / q
            else:
                e = d = m
        a, fa = b, fb
        if abs(d) > tol:
            b += d
        else:
            b += tol if m > 0.0 else -tol
        fb = f(b)
        if (fb > 0.0) == (fc > 0.0):
            c, fc = a, fa
            e = d = b - a
    return b


def next_collision(kind, n1, n2, v, omega, t1, t_from, t_limit,
                   centers, radii_sq, stride, tol_t):
    """Earliest inward wall crossing of a geodesic after t_from.

    Returns (status, t_hit, wall_index).  Walls that the remaining
    trajectory can never enter are discarded up front by an exact
    window-minimum test; the rest are marched with the given stride
    (halved once the position passes |y| > 0.99), sign changes are
    refined by Brent to tol_t, and simultaneous hits within tol_t go to
    the lowest wall index.
    """
    d = len(n2)
    m = len(centers)
    if m == 0:
        return (NO_HIT_EVER, math.nan, -1)

    buf = [0.0] * d
    if kind == ARC:
        radius = math.sqrt(v * v - 1.0)
        kappa = 1.0 / (v + radius)
        phi_end = 2.0 * math.atan(kappa)
        s_from = math.tanh(0.5 * omega * (t_from - t1))
        phi_from = 2.0 * math.atan(kappa * s_from)

        def position(t, out):
            s = math.tanh(0.5 * omega * (t - t1))
            _arc_position(n1, n2, v, radius, kappa, 2.0 * math.atan(kappa * s), out)
    else:
        t_from_pos = math.tanh(0.5 * omega * (t_from - t1))

        def position(t, out):
            s = math.tanh(0.5 * omega * (t - t1))
            for j in range(d):
                out[j] = n2[j] * s

    candidates = []
    for w in range(m):
        if kind == ARC:
            fmin = _arc_min_remaining(n1, n2, v, radius, kappa, phi_from,
                                      phi_end, centers[w], radii_sq[w], buf)
        else:
            fmin = _diameter_min_remaining(n2, t_from_pos, centers[w],
                                           radii_sq[w], d)
        if fmin < -_CROSS_EPS:
            candidates.append(w)
    if not candidates:
        return (NO_HIT_EVER, math.nan, -1)

    t_sat = t1 + _SATURATION / omega
    t_stop = min(t_limit, max(t_from, t_sat))
    no_hit = NO_HIT_BEFORE_LIMIT if t_limit < t_sat else NO_HIT_EVER
    if t_from >= t_stop:
        return (no_hit, math.nan, -1)

    t_a = t_from
    y_a = [0.0] * d
    position(t_a, y_a)
    f_a = {}
    for w in candidates:
        val = _wall_value(y_a, centers[w], radii_sq[w])
        if val < 0.0:
            if val < -1e-9:
                return (BAD_START, math.nan, w)
            val = 0.0  # leaving the wall it just reflected from
        f_a[w] = val

    y_b = [0.0] * d
    while t_a < t_stop:
        rr = 0.0
        for j in range(d):
            rr += y_a[j] * y_a[j]
        step = stride * (0.5 if rr > 0.9801 else 1.0)
        t_b = min(t_a + step, t_stop)
        position(t_b, y_b)
        best_t = math.inf
        best_w = -1
        for w in candidates:
            f_b = _wall_value(y_b, centers[w], radii_sq[w])
            if f_a[w] >= 0.0 and f_b < 0.0:
                if f_a[w] == 0.0:
                    # started on this wall moving inward: corner re-hit
                    root = t_a
                else:
                    center = centers[w]
                    rsq = radii_sq[w]

                    def fw(t, _c=center, _r=rsq):
                        position(t, buf)
                        return _wall_value(buf, _c, _r)

                    root = _brent(fw, t_a, t_b, f_a[w], f_b, tol_t)
                if root < best_t - tol_t:
                    best_t = root
                    best_w = w
                elif root <= best_t + tol_t and (best_w < 0 or w < best_w):
                    # simultaneous corner hit: keep the lowest index
                    if root < best_t:
                        best_t = root
                    best_w = w
            f_a[w] = f_b
        if best_w >= 0:
            return (HIT, best_t, best_w)
        t_a = t_b
        y_a, y_b = y_b, y_a
    return (no_hit, math.nan, -1)
