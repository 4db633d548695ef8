"""Charts and geodesics on the unit-ball model of hyperbolic space.

Points of the lower light cone in Minkowski coordinates z = (z0, zv)
are written in chart coordinates (y0, y) with |y| < 1; the ball carries
the metric h_ij = 4 delta_ij / (1 - |y|^2)^2 of curvature -1 and the
time slice satisfies -z.z = exp(-2 y0).  Geodesics of the ball metric
are circular arcs meeting the boundary sphere orthogonally, or
diameters; both families have closed-form time parametrizations, which
the billiard flow uses instead of numerical integration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .model import TodaModel

# Euclidean angular momentum (relative to |y| |w|) below which a state
# is treated as radial and produces a diameter instead of an arc.
RADIAL_TOL = 1e-12


class ChartDomainError(ValueError):
    """A point lies outside the domain of the requested chart."""


def _ball_point(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError("ball point must be a vector")
    if np.dot(y, y) >= 1.0:
        raise ChartDomainError(f"point with |y| >= 1 is not inside the ball: {y}")
    return y


def z_to_y(z) -> tuple[float, np.ndarray]:
    """Chart a lower-light-cone point z as (y0, y).

    Uses -z.z = exp(-2 y0) and the central projection of -z / |z| onto
    the ball, which inverts y_to_z exactly.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size < 2:
        raise ValueError("need a Minkowski vector of length >= 2")
    z0, zv = z[0], z[1:]
    square = z0 * z0 - np.dot(zv, zv)
    if z0 >= 0.0 or square <= 0.0:
        raise ChartDomainError("point is not in the lower light cone")
    rho = math.sqrt(square)
    y0 = -math.log(rho)
    y = zv / (z0 - rho)
    return y0, y


def y_to_z(y0: float, y) -> np.ndarray:
    """Map chart coordinates (y0, y), |y| < 1, to the lower light cone."""
    y = _ball_point(y)
    yy = np.dot(y, y)
    scale = math.exp(-y0) / (1.0 - yy)
    z = np.empty(y.size + 1)
    z[0] = -scale * (1.0 + yy)
    z[1:] = -2.0 * scale * y
    return z


def conformal_factor(y) -> float:
    """Common factor 4 / (1 - |y|^2)^2 of the ball metric."""
    y = _ball_point(y)
    return 4.0 / (1.0 - np.dot(y, y)) ** 2


def metric_at(y) -> np.ndarray:
    """Full metric matrix h_ij at an interior point."""
    y = np.asarray(y, dtype=float)
    return conformal_factor(y) * np.eye(y.size)


def hyperbolic_speed(y, w) -> float:
    """Metric norm sqrt(h_ij w^i w^j) of a coordinate velocity."""
    y = _ball_point(y)
    return 2.0 * math.sqrt(float(np.dot(w, w))) / (1.0 - float(np.dot(y, y)))


def hyperbolic_distance(a, b) -> float:
    """Distance in the ball metric (curvature -1) between interior points."""
    a = _ball_point(a)
    b = _ball_point(b)
    d2 = float(np.dot(a - b, a - b))
    denom = (1.0 - float(np.dot(a, a))) * (1.0 - float(np.dot(b, b)))
    return math.acosh(1.0 + 2.0 * d2 / denom)


# -- geodesics ----------------------------------------------------------------

class GeodesicKind(Enum):
    CIRCLE_ARC = "circle-arc"
    DIAMETER = "diameter"


@dataclass(frozen=True, eq=False)
class Geodesic:
    """Unit-speed-squared omega^2 geodesic of the ball metric.

    CIRCLE_ARC: the trace is the circle of center -v * n1 and radius
    sqrt(v^2 - 1) in the plane spanned by the orthonormal pair (n1, n2);
    it meets the boundary sphere orthogonally.  DIAMETER: the trace is
    the diameter along n2 (n1 is None, v is None).  t1 is the time of
    closest approach to the center.
    """

    kind: GeodesicKind
    n1: Optional[np.ndarray]
    n2: np.ndarray
    v: Optional[float]
    omega: float
    t1: float

    def __post_init__(self):
        if self.omega <= 0.0:
            raise ValueError("omega must be positive")
        n2 = np.asarray(self.n2, dtype=float)
        object.__setattr__(self, "n2", n2)
        if abs(np.dot(n2, n2) - 1.0) > 1e-9:
            raise ValueError("n2 must be a unit vector")
        if self.kind is GeodesicKind.CIRCLE_ARC:
            n1 = np.asarray(self.n1, dtype=float)
            object.__setattr__(self, "n1", n1)
            if self.v is None or self.v <= 1.0:
                raise ValueError("circle arc needs v > 1")
            if abs(np.dot(n1, n1) - 1.0) > 1e-9 or abs(np.dot(n1, n2)) > 1e-9:
                raise ValueError("(n1, n2) must be orthonormal")


def _arc_shape(v: float) -> tuple[float, float]:
    # radius and the contraction kappa = v - sqrt(v^2-1), computed
    # cancellation-free for large v
    root = math.sqrt(v * v - 1.0)
    return root, 1.0 / (v + root)


def geodesic_eval(g: Geodesic, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Position and coordinate velocity dy/dt at time t."""
    s = math.tanh(0.5 * g.omega * (t - g.t1))
    ds = 0.5 * g.omega * (1.0 - s * s)
    if g.kind is GeodesicKind.DIAMETER:
        return g.n2 * s, g.n2 * ds
    radius, kappa = _arc_shape(g.v)
    phi = 2.0 * math.atan(kappa * s)
    dphi = 2.0 * kappa * ds / (1.0 + (kappa * s) ** 2)
    cos_phi, sin_phi = math.cos(phi), math.sin(phi)
    # radius*cos(phi) - v without large-v cancellation:
    radial = -(2.0 * g.v * math.sin(0.5 * phi) ** 2 + kappa * cos_phi)
    y = g.n1 * radial + g.n2 * (radius * sin_phi)
    w = (g.n2 * cos_phi - g.n1 * sin_phi) * (radius * dphi)
    return y, w


def geodesic_endpoint(g: Geodesic) -> np.ndarray:
    """Unit vector the trajectory converges to as t -> +inf."""
    if g.kind is GeodesicKind.DIAMETER:
        return g.n2.copy()
    radius, _ = _arc_shape(g.v)
    return (-g.n1 + radius * g.n2) / g.v


def geodesic_from_state(y, w, t: float = 0.0, radial_tol: float = RADIAL_TOL) -> Geodesic:
    """Recover the geodesic passing through y with velocity w at time t.

    The circle through y orthogonal to the boundary sphere and tangent
    to w is found from the two linear conditions  2 y.c = 1 + |y|^2 and
    w.c = y.w  on its center c.  States whose angular momentum about
    the ball center is below radial_tol (relative) degenerate to a
    diameter.
    """
    y = _ball_point(y)
    w = np.asarray(w, dtype=float)
    wnorm = math.sqrt(float(np.dot(w, w)))
    if wnorm == 0.0:
        raise ValueError("velocity must be nonzero")
    rr = float(np.dot(y, y))
    omega = 2.0 * wnorm / (1.0 - rr)
    r = math.sqrt(rr)

    e1 = y / r if r > 0.0 else np.zeros_like(y)
    w_rad = float(np.dot(w, e1))
    w_tan = w - w_rad * e1
    tan_norm = math.sqrt(float(np.dot(w_tan, w_tan)))

    if r == 0.0 or tan_norm <= radial_tol * wnorm:
        # Radial motion: diameter along the direction of travel.
        direction = w / wnorm
        t_shift = math.copysign(r, w_rad) if r > 0.0 else 0.0
        t1 = t - (2.0 / omega) * math.atanh(t_shift)
        return Geodesic(GeodesicKind.DIAMETER, None, direction, None, omega, t1)

    e2 = w_tan / tan_norm
    c1 = (1.0 + rr) / (2.0 * r)
    c2 = w_rad * (r - c1) / tan_norm
    center = c1 * e1 + c2 * e2
    v = math.sqrt(c1 * c1 + c2 * c2)
    n1 = -center / v
    # In-plane rotation of n1 by a quarter turn.
    a1, a2 = float(np.dot(n1, e1)), float(np.dot(n1, e2))
    n2 = -a2 * e1 + a1 * e2
    n2 /= math.sqrt(float(np.dot(n2, n2)))

    q = y - center
    radius, kappa = _arc_shape(v)
    phi0 = math.atan2(float(np.dot(q, n2)), float(np.dot(q, n1)))
    tangent = n2 * math.cos(phi0) - n1 * math.sin(phi0)
    if float(np.dot(w, tangent)) < 0.0:
        n2 = -n2
        phi0 = -phi0
    x = math.tan(0.5 * phi0) / kappa
    x = max(-1.0 + 1e-16, min(1.0 - 1e-16, x))
    t1 = t - (2.0 / omega) * math.atanh(x)
    return Geodesic(GeodesicKind.CIRCLE_ARC, n1, n2, v, omega, t1)


# -- potentials ---------------------------------------------------------------

def potential_z(model: TodaModel, z) -> float:
    """Potential sum A_a exp(u_a . z) with plain Euclidean dot products.

    Overflowing exponentials saturate to an infinite value rather than
    raising; a positive infinity (a wall term) dominates the sum.
    """
    model.require_valid()
    z = np.asarray(z, dtype=float)
    if z.size != model.dimension:
        raise ValueError("coordinate vector has the wrong length")
    total = 0.0
    pos_inf = neg_inf = False
    for c in model.components:
        exponent = float(np.dot(c.u, z))
        if exponent > 709.0:  # exp would overflow a double
            pos_inf |= c.coupling > 0
            neg_inf |= c.coupling < 0
        else:
            total += c.coupling * math.exp(exponent)
    if pos_inf:
        return math.inf
    if neg_inf:
        return -math.inf
    return total


def term_exponent_y(y0: float, y, u) -> float:
    """Exponent of one potential term in chart coordinates.

    Equals -2*y0 - exp(-y0) * [u0 (1 + |y|^2) + 2 uv.y] / (1 - |y|^2);
    for a wall component (u.u > 0, u0 > 0) it diverges to +inf as
    y0 -> -inf exactly where the wall indicator is negative.
    """
    y = _ball_point(y)
    u = np.asarray(u, dtype=float)
    u0, uvec = u[0], u[1:]
    if u0 == 0.0:
        raise ValueError("term exponent requires a nonzero time component u[0]")
    yy = float(np.dot(y, y))
    bracket = u0 * (1.0 + yy) + 2.0 * float(np.dot(uvec, y))
    return -2.0 * y0 - math.exp(-y0) * bracket / (1.0 - yy)


def potential_y(model: TodaModel, y0: float, y) -> float:
    """Gauge-rescaled potential in chart coordinates.

    Identical to exp(-2*y0) * potential_z(model, y_to_z(y0, y)); the two
    routes are kept independent so they can check each other.  Overflow
    saturates to an infinite value, never NaN.
    """
    model.require_valid()
    total = 0.0
    pos_inf = neg_inf = False
    for c in model.components:
        phi = term_exponent_y(y0, y, c.u)
        if phi > 709.0:
            pos_inf |= c.coupling > 0
            neg_inf |= c.coupling < 0
        else:
            total += c.coupling * math.exp(phi)
    if pos_inf:
        return math.inf
    if neg_inf:
        return -math.inf
    return total


def wall_indicator(y, v) -> float:
    """Signed membership function |y - v|^2 - |v|^2 + 1 of a wall ball.

    Positive outside the ball of center v and radius sqrt(|v|^2 - 1),
    zero on its sphere, negative inside.
    """
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    d = y - v
    return float(np.dot(d, d) - np.dot(v, v) + 1.0)
