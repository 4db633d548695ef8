"""Exact billiard flow and the full smooth flow, with comparison helpers.

The billiard flow alternates closed-form geodesic segments with
specular reflections off the wall spheres; no differential equation is
integrated.  Reflections are Euclidean-specular, which is exact here
because the ball metric is conformal (Euclidean and metric angles
agree) and the wall spheres are totally geodesic.

The smooth flow integrates the gauge-fixed equations of motion of the
full model, in which every wall is a steep but finite exponential
ridge.  Deep inside the light cone the two flows agree; the helpers at
the bottom quantify that agreement bounce by bounce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from . import _backend
from .billiard import Billiard
from .geometry import (Geodesic, GeodesicKind, conformal_factor,
                       geodesic_endpoint, geodesic_eval, geodesic_from_state,
                       hyperbolic_distance, wall_indicator)
from .model import TodaModel

ON_WALL_TOL = 1e-9
TANGENT_TOL = 1e-12
STRIDE_FACTOR = 0.05   # marching stride in units of 1/omega
EXP_CLAMP = 700.0      # largest exponent fed to exp in the smooth flow


class TangentialIncidenceError(RuntimeError):
    """Reflection requested at (numerically) grazing incidence."""


class ConstraintDriftError(RuntimeError):
    """The smooth integrator exceeded the allowed energy-constraint drift."""


# -- billiard flow -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BilliardState:
    """Instantaneous state of the billiard flow.

    w is the coordinate velocity dy/dt; its metric square stays equal
    to omega^2 along the flow.
    """

    t: float
    y: np.ndarray
    w: np.ndarray
    omega: float

    def metric_energy(self) -> float:
        """h_ij w^i w^j, nominally omega^2."""
        return conformal_factor(self.y) * float(np.dot(self.w, self.w))


def billiard_state(y, direction, omega: float = 1.0, t: float = 0.0) -> BilliardState:
    """State at y moving along direction with metric speed omega."""
    y = np.asarray(y, dtype=float)
    direction = np.asarray(direction, dtype=float)
    nrm = np.linalg.norm(direction)
    if nrm == 0.0:
        raise ValueError("direction must be nonzero")
    w = direction / nrm * (0.5 * omega * (1.0 - float(np.dot(y, y))))
    return BilliardState(t, y, w, omega)


def reflect(state: BilliardState, wall, on_wall_tol: float = ON_WALL_TOL,
            tangent_tol: float = TANGENT_TOL) -> BilliardState:
    """Specular reflection of the velocity off a wall sphere.

    Position and omega are unchanged; the normal velocity component
    flips sign.  The state must sit on the wall sphere and move into
    the wall ball; grazing incidence (normal component below
    tangent_tol relative to the speed) is surfaced as an error for the
    caller to handle.
    """
    rel = state.y - wall.source
    dist = float(np.linalg.norm(rel))
    if abs(dist - wall.radius) > on_wall_tol:
        raise ValueError(f"state is not on the wall sphere: |y - v| = {dist}, "
                         f"radius {wall.radius}")
    normal = rel / dist
    speed = float(np.linalg.norm(state.w))
    wn = float(np.dot(state.w, normal))
    if abs(wn) < tangent_tol * speed:
        raise TangentialIncidenceError(
            f"grazing incidence at t = {state.t}: |normal component| = {abs(wn)}")
    if wn > 0.0:
        raise ValueError("velocity already points out of the wall ball")
    return BilliardState(state.t, state.y, state.w - 2.0 * wn * normal,
                         state.omega)


def _kernel_call(geodesic: Geodesic, t_from: float, t_limit: float,
                 centers: np.ndarray, radii_sq: np.ndarray,
                 stride: float, tol_t: float):
    k = _backend.kernels
    if geodesic.kind is GeodesicKind.CIRCLE_ARC:
        kind, n1, v = k.ARC, geodesic.n1, geodesic.v
    else:
        kind, n1, v = k.DIAMETER, np.zeros(geodesic.n2.size), 2.0
    return k.next_collision(int(kind), np.ascontiguousarray(n1, dtype=float),
                            np.ascontiguousarray(geodesic.n2, dtype=float),
                            float(v), float(geodesic.omega), float(geodesic.t1),
                            float(t_from), float(t_limit),
                            centers, radii_sq, float(stride), float(tol_t))


def _wall_arrays(billiard: Billiard):
    centers = np.ascontiguousarray(billiard.sources(), dtype=float)
    radii_sq = np.ascontiguousarray([w.radius ** 2 for w in billiard.walls],
                                    dtype=float)
    return centers, radii_sq


def next_collision(geodesic: Geodesic, t_from: float, billiard: Billiard,
                   t_limit: float = math.inf, stride: Optional[float] = None,
                   tol_t: float = 1e-12):
    """Earliest wall crossing after t_from, or None if the geodesic
    escapes to the boundary sphere (or t_limit) without one."""
    centers, radii_sq = _wall_arrays(billiard)
    if stride is None:
        stride = STRIDE_FACTOR / geodesic.omega
    status, t_hit, wall = _kernel_call(geodesic, t_from, t_limit,
                                       centers, radii_sq, stride, tol_t)
    k = _backend.kernels
    if status == k.BAD_START:
        raise ValueError(f"geodesic starts inside wall ball {wall}")
    if status != k.HIT:
        return None
    return t_hit, wall


class PropagationStatus(Enum):
    MAX_BOUNCES = "max-bounces"
    T_MAX = "t-max"
    ESCAPED = "escaped"
    TANGENTIAL_INCIDENCE = "tangential-incidence"
    CORNER_CYCLE_LIMIT = "corner-cycle-limit"
    NEAR_IDEAL_CORNER = "near-ideal-corner"

    @property
    def is_error(self) -> bool:
        return self in (PropagationStatus.TANGENTIAL_INCIDENCE,
                        PropagationStatus.CORNER_CYCLE_LIMIT,
                        PropagationStatus.NEAR_IDEAL_CORNER)


@dataclass(frozen=True, eq=False)
class Segment:
    geodesic: Geodesic
    t_start: float
    t_end: float


@dataclass(frozen=True, eq=False)
class Reflection:
    wall_index: int
    t: float
    position: np.ndarray


@dataclass(frozen=True, eq=False)
class EscapeToAbsolute:
    direction: np.ndarray


@dataclass(eq=False)
class PropagationResult:
    events: list
    status: PropagationStatus
    final_state: Optional[BilliardState]
    message: str = ""

    def reflections(self) -> list[Reflection]:
        return [e for e in self.events if isinstance(e, Reflection)]


def ideal_tangency_points(billiard: Billiard, tol: float = 1e-9) -> list[np.ndarray]:
    """Boundary points where two wall spheres touch (zero-angle corners)."""
    pts = []
    walls = billiard.walls
    for i in range(len(walls)):
        for j in range(i + 1, len(walls)):
            gap = walls[i].source - walls[j].source
            dist = float(np.linalg.norm(gap))
            if abs(dist - (walls[i].radius + walls[j].radius)) <= tol:
                p = walls[i].source - walls[i].radius * gap / dist
                pts.append(p / np.linalg.norm(p))
    return pts


def propagate_billiard(state: BilliardState, billiard: Billiard,
                       max_bounces: int = 10_000, t_max: float = math.inf,
                       stride: Optional[float] = None, tol_t: float = 1e-12,
                       corner_tol: float = 1e-12, max_corner_cycles: int = 8,
                       ideal_corner_tol: float = 1e-9) -> PropagationResult:
    """Run the exact billiard flow: segments and reflections until a
    stopping condition.

    Every segment is a closed-form geodesic.  Simultaneous corner hits
    reflect off the lowest-index wall and immediately re-test; more
    than max_corner_cycles zero-length cycles abort the trajectory, as
    does arrival within ideal_corner_tol of a boundary tangency point.
    Tangential incidence aborts with the trajectory so far retained.
    """
    for idx, w in enumerate(billiard.walls):
        if wall_indicator(state.y, w.source) < -ON_WALL_TOL:
            raise ValueError(f"initial state lies inside wall ball {idx}")
    centers, radii_sq = _wall_arrays(billiard)
    corners = ideal_tangency_points(billiard)
    kern = _backend.kernels
    if stride is None:
        stride = STRIDE_FACTOR / state.omega

    events: list = []
    s = state
    bounces = 0
    corner_streak = 0
    last_hit = None
    while True:
        g = geodesic_from_state(s.y, s.w, s.t)
        status, t_hit, widx = _kernel_call(g, s.t, t_max, centers, radii_sq,
                                           stride, tol_t)
        if status == kern.BAD_START:
            raise ValueError(f"state inside wall ball {widx} at t = {s.t}")
        if status != kern.HIT:
            if status == kern.NO_HIT_EVER and math.isinf(t_max):
                events.append(Segment(g, s.t, math.inf))
                events.append(EscapeToAbsolute(geodesic_endpoint(g)))
                return PropagationResult(events, PropagationStatus.ESCAPED, None)
            events.append(Segment(g, s.t, t_max))
            y_end, w_end = geodesic_eval(g, t_max)
            final = BilliardState(t_max, y_end, w_end, s.omega)
            return PropagationResult(events, PropagationStatus.T_MAX, final)

        y_hit, w_hit = geodesic_eval(g, t_hit)
        events.append(Segment(g, s.t, t_hit))
        hit_state = BilliardState(t_hit, y_hit, w_hit, s.omega)

        near = [c for c in corners
                if np.linalg.norm(y_hit - c) < ideal_corner_tol]
        if near:
            return PropagationResult(
                events, PropagationStatus.NEAR_IDEAL_CORNER, hit_state,
                f"trajectory reached within {ideal_corner_tol} of an ideal "
                f"corner at t = {t_hit}")
        try:
            s = reflect(hit_state, billiard.walls[widx])
        except TangentialIncidenceError as exc:
            return PropagationResult(events,
                                     PropagationStatus.TANGENTIAL_INCIDENCE,
                                     hit_state, str(exc))
        events.append(Reflection(widx, t_hit, y_hit))
        bounces += 1

        if last_hit is not None and t_hit - last_hit <= corner_tol:
            corner_streak += 1
            if corner_streak >= max_corner_cycles:
                return PropagationResult(
                    events, PropagationStatus.CORNER_CYCLE_LIMIT, s,
                    f"{corner_streak} zero-length corner cycles at t = {t_hit}")
        else:
            corner_streak = 0
        last_hit = t_hit

        if bounces >= max_bounces:
            return PropagationResult(events, PropagationStatus.MAX_BOUNCES, s)


@dataclass(frozen=True, eq=False)
class Epoch:
    """One geodesic segment: the wall it ends on (None for escape or
    truncation), its duration, and the segment's geodesic."""

    wall_index: Optional[int]
    duration: float
    geodesic: Geodesic


def epoch_sequence(events) -> list[Epoch]:
    """Flatten a trajectory into its symbolic itinerary."""
    out = []
    for i, ev in enumerate(events):
        if isinstance(ev, Segment):
            nxt = events[i + 1] if i + 1 < len(events) else None
            widx = nxt.wall_index if isinstance(nxt, Reflection) else None
            out.append(Epoch(widx, ev.t_end - ev.t_start, ev.geodesic))
    return out


# -- smooth flow ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SmoothState:
    """State of the gauge-fixed smooth system: (y0, y) and velocities."""

    t: float
    y0: float
    y: np.ndarray
    v0: float
    w: np.ndarray


def _component_arrays(model: TodaModel):
    A = np.array([c.coupling for c in model.components])
    U0 = np.array([c.u0 for c in model.components])
    UV = np.array([c.uvec for c in model.components])
    return A, U0, UV


def _exponent_pieces(y0: float, y: np.ndarray, U0, UV):
    yy = float(np.dot(y, y))
    one = 1.0 - yy
    s = U0 * (1.0 + yy) + 2.0 * UV @ y
    phibar = -math.exp(-y0) * s / one
    return yy, one, s, phibar


def smooth_potential_and_gradients(model: TodaModel, y0: float, y):
    """Value, d/dy0 and spatial gradient of the rescaled potential.

    Exponents are clamped at EXP_CLAMP so a deep excursion into a wall
    produces a huge finite force instead of an overflow.
    """
    y = np.asarray(y, dtype=float)
    A, U0, UV = _component_arrays(model)
    if len(A) == 0:
        return 0.0, 0.0, np.zeros_like(y)
    yy, one, s, phibar = _exponent_pieces(y0, y, U0, UV)
    phi = -2.0 * y0 + phibar
    e = np.exp(np.minimum(phi, EXP_CLAMP))
    value = float(np.dot(A, e))
    dv0 = float(np.dot(A * e, -2.0 - phibar))
    ds = 2.0 * U0[:, None] * y[None, :] + 2.0 * UV
    dphibar = -math.exp(-y0) * (ds * one + 2.0 * s[:, None] * y[None, :]) / one ** 2
    dvy = (A * e) @ dphibar
    return value, dv0, dvy


def constraint_energy(model: TodaModel, state: SmoothState) -> float:
    """Zero-energy constraint value; exactly conserved by the flow."""
    kin = 0.5 * conformal_factor(state.y) * float(np.dot(state.w, state.w))
    value, _, _ = smooth_potential_and_gradients(model, state.y0, state.y)
    return -0.5 * state.v0 ** 2 + kin + value


def constraint_fill(model: TodaModel, y0: float, y, w,
                    toward_singularity: bool = True) -> SmoothState:
    """Complete (y0, y, w) to a zero-energy state by choosing v0.

    The default sign makes y0 decrease along the integration, so
    forward time runs toward the singular regime; pass
    toward_singularity=False for the opposite convention.
    """
    model.require_valid()
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    value, _, _ = smooth_potential_and_gradients(model, y0, y)
    radicand = conformal_factor(y) * float(np.dot(w, w)) + 2.0 * value
    if radicand < 0.0:
        raise ValueError("no real time velocity: kinetic term plus twice the "
                         "potential is negative")
    v0 = math.sqrt(radicand)
    return SmoothState(0.0, y0, y, -v0 if toward_singularity else v0, w)


def smooth_rhs(model: TodaModel, y0: float, y, v0: float, w):
    """Accelerations (dv0/dt, dw/dt) of the gauge-fixed equations.

    dv0/dt is the y0-derivative of the potential; the spatial part is
    the geodesic acceleration of the conformal metric plus the
    metric-inverse potential gradient.
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    yy = float(np.dot(y, y))
    one = 1.0 - yy
    g = 4.0 * y / one
    ww = float(np.dot(w, w))
    _, dv0, dvy = smooth_potential_and_gradients(model, y0, y)
    acc_w = 0.5 * g * ww - float(np.dot(g, w)) * w - (one ** 2 / 4.0) * dvy
    return dv0, acc_w


@dataclass(eq=False)
class SmoothTrajectory:
    """Sampled smooth run: solver steps, per-step constraint drift, and
    the dense interpolant."""

    t: np.ndarray
    y0: np.ndarray
    y: np.ndarray
    v0: np.ndarray
    w: np.ndarray
    drift: np.ndarray
    sol: object

    @property
    def dimension(self) -> int:
        return self.y.shape[1]

    def state_at(self, t: float) -> SmoothState:
        x = self.sol(t)
        d = self.dimension
        return SmoothState(t, float(x[0]), x[1:1 + d], float(x[1 + d]),
                           x[2 + d:])


def integrate_smooth(model: TodaModel, s0: SmoothState, t_span,
                     rtol: float = 1e-10, atol: float = 1e-12,
                     max_drift: float = 1e-6,
                     constraint_tol: float = 1e-10) -> SmoothTrajectory:
    """Integrate the smooth equations of motion with adaptive control.

    The initial state must satisfy the zero-energy constraint to
    constraint_tol.  The constraint is evaluated at every accepted
    step; drift beyond max_drift raises ConstraintDriftError carrying
    the offending time.
    """
    model.require_valid()
    e0 = constraint_energy(model, s0)
    if abs(e0) > constraint_tol:
        raise ValueError(f"initial state violates the energy constraint: "
                         f"E = {e0}")
    d = s0.y.size

    def rhs(t, x):
        y0, y, v0, w = x[0], x[1:1 + d], x[1 + d], x[2 + d:]
        dv0, dw = smooth_rhs(model, y0, y, v0, w)
        return np.concatenate(([v0], w, [dv0], dw))

    x0 = np.concatenate(([s0.y0], s0.y, [s0.v0], s0.w))
    sol = solve_ivp(rhs, t_span, x0, method="DOP853", rtol=rtol, atol=atol,
                    dense_output=True)
    if not sol.success:
        raise RuntimeError(f"smooth integration failed: {sol.message}")

    y0s = sol.y[0]
    ys = sol.y[1:1 + d].T
    v0s = sol.y[1 + d]
    ws = sol.y[2 + d:].T
    drift = np.empty(sol.t.size)
    for i in range(sol.t.size):
        drift[i] = abs(constraint_energy(
            model, SmoothState(sol.t[i], y0s[i], ys[i], v0s[i], ws[i])))
    traj = SmoothTrajectory(sol.t, y0s, ys, v0s, ws, drift, sol.sol)
    worst = int(np.argmax(drift))
    if drift[worst] > max_drift:
        raise ConstraintDriftError(
            f"constraint drift {drift[worst]:.3e} at t = {sol.t[worst]} "
            f"exceeds {max_drift}")
    return traj


@dataclass(frozen=True, eq=False)
class WallEncounter:
    """Closest approach of the smooth flow to one wall: the time of a
    local maximum of the dominant term exponent, the position there,
    and which component dominated."""

    t: float
    y0: float
    y: np.ndarray
    component: int
    exponent: float


def wall_encounters(traj: SmoothTrajectory, model: TodaModel,
                    threshold: float = -5.0) -> list[WallEncounter]:
    """Locate wall encounters on a smooth trajectory.

    Encounters are local maxima (above threshold) of the largest term
    exponent, detected on the solver's own step sequence (the adaptive
    steps cluster inside the wall layers) and refined on the dense
    interpolant.
    """
    A, U0, UV = _component_arrays(model)
    if len(A) == 0:
        return []
    d = traj.dimension

    def best_exponent(t: float):
        x = traj.sol(t)
        y0, y = x[0], x[1:1 + d]
        _, one, _, phibar = _exponent_pieces(y0, y, U0, UV)
        phi = -2.0 * y0 + phibar
        k = int(np.argmax(phi))
        return float(phi[k]), k

    vals = np.array([best_exponent(t)[0] for t in traj.t])
    out = []
    for i in range(1, len(vals) - 1):
        if vals[i] >= vals[i - 1] and vals[i] > vals[i + 1] and vals[i] > threshold:
            res = minimize_scalar(lambda tt: -best_exponent(tt)[0],
                                  bounds=(traj.t[i - 1], traj.t[i + 1]),
                                  method="bounded",
                                  options={"xatol": 1e-12})
            t_peak = float(res.x)
            phi, comp = best_exponent(t_peak)
            if phi <= threshold:
                continue
            if out and abs(t_peak - out[-1].t) < 1e-9:
                continue
            x = traj.sol(t_peak)
            out.append(WallEncounter(t_peak, float(x[0]), x[1:1 + d], comp, phi))
    return out


# -- matched-run comparison ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BounceComparison:
    index: int
    wall_billiard: int
    wall_smooth: int
    t_billiard: float
    t_smooth: float
    deviation: float


def compare_billiard_smooth(model: TodaModel, billiard: Billiard,
                            y0_start: float, y_start, direction,
                            omega: float = 1.0, bounces: int = 1,
                            rtol: float = 1e-10, atol: float = 1e-12,
                            max_drift: float = 1e-6,
                            t_buffer: float = 1.0) -> list[BounceComparison]:
    """Match a billiard run against a smooth run from the same data.

    Both start at y_start moving along direction with metric speed
    omega; the smooth run starts at depth y0_start with the
    constraint-completed time velocity.  Encounter k of the smooth run
    is paired with reflection k of the billiard run; the deviation is
    the hyperbolic distance between the two wall-contact positions.
    """
    state = billiard_state(y_start, direction, omega)
    run = propagate_billiard(state, billiard, max_bounces=bounces)
    hits = run.reflections()
    if not hits:
        return []
    s0 = constraint_fill(model, y0_start, state.y, state.w)
    horizon = hits[-1].t + t_buffer
    traj = integrate_smooth(model, s0, (0.0, horizon), rtol=rtol, atol=atol,
                            max_drift=max_drift)
    encounters = wall_encounters(traj, model)
    wall_of = {w.origin_component: i for i, w in enumerate(billiard.walls)}
    out = []
    for k, (hit, enc) in enumerate(zip(hits, encounters)):
        out.append(BounceComparison(
            index=k,
            wall_billiard=hit.wall_index,
            wall_smooth=wall_of.get(enc.component, -1),
            t_billiard=hit.t,
            t_smooth=enc.t,
            deviation=hyperbolic_distance(hit.position, enc.y),
        ))
    return out
