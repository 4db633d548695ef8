"""Pseudo-Euclidean models with exponential potentials.

A model lives on an n-dimensional minisuperspace (n >= 3) carrying the
flat metric diag(-1, +1, ..., +1) and the potential

    V(z) = sum_a  A_a * exp(u_a . z),

where each term is described by a coupling A_a and an exponent vector
u_a whose first slot pairs with the time-like coordinate z^0.  This
module holds the model data, the admissibility checks on couplings and
exponent vectors, the wall / lightlike / timelike split of components,
and the diagonalizing change of variables used by the cosmological
presets (scale-factor coordinates x -> Minkowski coordinates z).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

# Relative half-width of the band around u.u = 0 treated as lightlike.
LIGHTLIKE_BAND = 1e-12


class ModelFormatError(ValueError):
    """A model file or dict does not match the expected schema."""


class InvalidModelError(ValueError):
    """An operation was given a model that fails validation."""

    def __init__(self, violations):
        self.violations = tuple(violations)
        lines = "; ".join(v.message for v in self.violations)
        super().__init__(f"model fails validation: {lines}")


def _readonly(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


def minkowski_square(u: Sequence[float]) -> float:
    """Return -u[0]**2 + |u[1:]|**2, the signature (-,+,...,+) square."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size < 2:
        raise ValueError(f"need a vector of length >= 2, got shape {u.shape}")
    return float(np.dot(u[1:], u[1:]) - u[0] * u[0])


@dataclass(frozen=True, eq=False)
class ExponentialComponent:
    """One term A * exp(u . z) of the potential."""

    coupling: float
    u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", _readonly(self.u))
        object.__setattr__(self, "coupling", float(self.coupling))
        if self.u.ndim != 1:
            raise ValueError("exponent vector must be one-dimensional")

    @property
    def u0(self) -> float:
        """Time-like slot of the exponent vector."""
        return float(self.u[0])

    @property
    def uvec(self) -> np.ndarray:
        """Spatial part of the exponent vector."""
        return self.u[1:]

    def minkowski_square(self) -> float:
        return minkowski_square(self.u)


@dataclass(frozen=True)
class Violation:
    """A single failed admissibility check, attached to a component."""

    component: int
    rule: str
    message: str


class ComponentClass(Enum):
    WALL = "wall"          # u.u > 0
    LIGHTLIKE = "lightlike"  # u.u = 0 within tolerance
    TIMELIKE = "timelike"  # u.u < 0


@dataclass(frozen=True)
class Classification:
    """Per-component classes plus the index set of wall components."""

    classes: tuple[ComponentClass, ...]
    wall_indices: tuple[int, ...]

    @property
    def wall_count(self) -> int:
        return len(self.wall_indices)


@dataclass(frozen=True, eq=False)
class TodaModel:
    """A validated-on-demand model: dimension n and its components.

    Construction enforces structural invariants only (n >= 3 and
    consistent vector lengths).  The physics restrictions on couplings
    and exponent vectors are checked by :meth:`validate`, which reports
    every violation instead of raising, so callers can explain all
    problems at once.
    """

    dimension: int
    components: tuple[ExponentialComponent, ...]

    def __post_init__(self):
        object.__setattr__(self, "dimension", int(self.dimension))
        object.__setattr__(self, "components", tuple(self.components))
        if self.dimension < 3:
            raise ValueError(f"dimension must be >= 3, got {self.dimension}")
        if not self.components:
            # An empty model is allowed: it has no potential at all.
            return
        for i, c in enumerate(self.components):
            if c.u.size != self.dimension:
                raise ValueError(
                    f"component {i}: exponent vector has length {c.u.size}, "
                    f"expected {self.dimension}"
                )

    def validate(self) -> list[Violation]:
        """Check every admissibility restriction, returning all violations."""
        out: list[Violation] = []
        for i, c in enumerate(self.components):
            if c.coupling == 0.0:
                out.append(Violation(i, "nonzero-coupling",
                                     f"component {i}: coupling must be nonzero"))
            if not c.u0 > 0.0:
                out.append(Violation(i, "positive-time-component",
                                     f"component {i}: time component u[0] must be "
                                     f"positive, got {c.u0}"))
            if c.minkowski_square() > 0.0 and not c.coupling > 0.0:
                out.append(Violation(i, "positive-coupling-on-wall",
                                     f"component {i}: coupling must be positive "
                                     f"when the exponent vector is space-like "
                                     f"(u.u > 0), got {c.coupling}"))
        return out

    def require_valid(self) -> "TodaModel":
        violations = self.validate()
        if violations:
            raise InvalidModelError(violations)
        return self

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "components": [{"A": c.coupling, "u": list(map(float, c.u))}
                           for c in self.components],
        }


def classify_components(model: TodaModel, tolerance: float = LIGHTLIKE_BAND) -> Classification:
    """Split components into wall / lightlike / timelike classes.

    A component is lightlike when |u.u| <= tolerance * max(1, |u|^2)
    with |u|^2 the Euclidean square; exact zeros of the indefinite
    square rarely survive floating point, hence the band.
    """
    classes = []
    walls = []
    for i, c in enumerate(model.components):
        square = c.minkowski_square()
        band = tolerance * max(1.0, float(np.dot(c.u, c.u)))
        if abs(square) <= band:
            classes.append(ComponentClass.LIGHTLIKE)
        elif square > 0.0:
            classes.append(ComponentClass.WALL)
            walls.append(i)
        else:
            classes.append(ComponentClass.TIMELIKE)
    return Classification(tuple(classes), tuple(walls))


# -- diagonalizing transform ------------------------------------------------

def diagonalizing_matrix(n: int) -> np.ndarray:
    """Matrix M of the linear map z = M x that diagonalizes the
    quadratic form G_ij = delta_ij - 1 into diag(-1, +1, ..., +1).

    Row 0 collects the overall scale, rows a = 1 .. n-1 are the
    normalized successive differences.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    m = np.zeros((n, n))
    q = math.sqrt(n / (n - 1))
    m[0, :] = 1.0 / q
    for a in range(1, n):
        c = 1.0 / math.sqrt((n - a + 1) * (n - a))
        m[a, a - 1] = -c * (n - a)
        m[a, a:] = c
    return m


def x_to_z(x: Sequence[float]) -> np.ndarray:
    """Map scale-factor coordinates x to Minkowski coordinates z."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need a coordinate vector of length >= 2")
    return diagonalizing_matrix(x.size) @ x


def exponent_transform(w: Sequence[float]) -> np.ndarray:
    """Map an exponent vector from x-coordinates to z-coordinates.

    Returns the unique u with u . z(x) = w . x for all x, i.e. the
    contragredient image of w under the diagonalizing map.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size < 2:
        raise ValueError("need an exponent vector of length >= 2")
    return np.linalg.solve(diagonalizing_matrix(w.size).T, w)


# -- model files ------------------------------------------------------------

def model_from_dict(data: dict) -> TodaModel:
    """Build a model from the JSON schema, rejecting unknown fields."""
    if not isinstance(data, dict):
        raise ModelFormatError("model document must be a JSON object")
    unknown = set(data) - {"dimension", "components"}
    if unknown:
        raise ModelFormatError(f"unknown top-level fields: {sorted(unknown)}")
    for key in ("dimension", "components"):
        if key not in data:
            raise ModelFormatError(f"missing required field {key!r}")
    dim = data["dimension"]
    if not isinstance(dim, int) or isinstance(dim, bool):
        raise ModelFormatError("'dimension' must be an integer")
    comps_raw = data["components"]
    if not isinstance(comps_raw, list):
        raise ModelFormatError("'components' must be an array")
    comps = []
    for i, entry in enumerate(comps_raw):
        if not isinstance(entry, dict):
            raise ModelFormatError(f"component {i} must be an object")
        unknown = set(entry) - {"A", "u"}
        if unknown:
            raise ModelFormatError(f"component {i}: unknown fields {sorted(unknown)}")
        if "A" not in entry or "u" not in entry:
            raise ModelFormatError(f"component {i}: needs fields 'A' and 'u'")
        a = entry["A"]
        u = entry["u"]
        if not isinstance(a, (int, float)) or isinstance(a, bool):
            raise ModelFormatError(f"component {i}: 'A' must be a number")
        if (not isinstance(u, list) or len(u) != dim
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in u)):
            raise ModelFormatError(f"component {i}: 'u' must be an array of {dim} numbers")
        comps.append(ExponentialComponent(float(a), u))
    try:
        return TodaModel(dim, tuple(comps))
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from exc


def load_model(path) -> TodaModel:
    """Read a model from a JSON file.  Parse errors carry positions."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return model_from_dict(data)


def save_model(model: TodaModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=2)
        fh.write("\n")
