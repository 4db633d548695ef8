"""Ready-made models: mixmaster, the prototype family, scalar-field extension.

All presets are defined through their scale-factor (x-space) potentials
and pushed through the diagonalizing transform, so the z-space exponent
vectors are outputs of the construction rather than hard-coded tables.
"""

from __future__ import annotations

import numpy as np

from .model import ExponentialComponent, TodaModel, exponent_transform


def bianchi_ix() -> TodaModel:
    """The mixmaster model: n = 3 with six exponential terms.

    The x-space potential is
        (1/4) (e^{4x1} + e^{4x2} + e^{4x3})
      - (1/2) (e^{2x1+2x2} + e^{2x2+2x3} + e^{2x1+2x3}),
    stored in that order: three wall terms, then three lightlike
    cross terms.
    """
    eye = np.eye(3)
    exponents = [4.0 * eye[i] for i in range(3)]
    couplings = [0.25, 0.25, 0.25]
    for i, j in ((0, 1), (1, 2), (0, 2)):
        exponents.append(2.0 * (eye[i] + eye[j]))
        couplings.append(-0.5)
    comps = tuple(ExponentialComponent(a, exponent_transform(w))
                  for a, w in zip(couplings, exponents))
    return TodaModel(3, comps)


def prototype_triples(n: int) -> list[tuple[int, int, int]]:
    """Index triples (i, j, k) with j < k and i distinct from both,
    in lexicographic order.  0-based."""
    return [(i, j, k)
            for i in range(n)
            for j in range(n)
            for k in range(j + 1, n)
            if i != j and i != k]


def prototype(n: int) -> TodaModel:
    """Prototype cosmological model in dimension n > 2.

    One term per triple (i, j, k): exponent 2*sum(x) + 2*(x_i - x_j - x_k)
    with coupling 1/4.  All n(n-1)(n-2)/2 components are wall components.
    """
    if n <= 2:
        raise ValueError(f"prototype model needs n > 2, got {n}")
    comps = []
    for i, j, k in prototype_triples(n):
        w = np.full(n, 2.0)
        w[i] += 2.0
        w[j] -= 2.0
        w[k] -= 2.0
        comps.append(ExponentialComponent(0.25, exponent_transform(w)))
    return TodaModel(n, tuple(comps))


def with_scalar_field(model: TodaModel) -> TodaModel:
    """Extend a model by one flat direction the potential ignores.

    The dimension grows by one and every exponent vector gets a trailing
    zero; couplings are unchanged.
    """
    model.require_valid()
    comps = tuple(ExponentialComponent(c.coupling, np.append(c.u, 0.0))
                  for c in model.components)
    return TodaModel(model.dimension + 1, comps)


def get_preset(name: str) -> TodaModel:
    """Resolve a preset name: 'bianchi-ix', 'prototype:N', 'scalar:<base>'."""
    if name == "bianchi-ix":
        return bianchi_ix()
    if name.startswith("prototype:"):
        try:
            n = int(name.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad prototype dimension in {name!r}") from None
        return prototype(n)
    if name.startswith("scalar:"):
        return with_scalar_field(get_preset(name.split(":", 1)[1]))
    raise ValueError(f"unknown preset {name!r}")
