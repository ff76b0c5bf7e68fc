"""The fixed-point operator A(u) = g-term + Volterra term + Fredholm term."""
from __future__ import annotations

import numpy as np

from .cubature import fredholm_field, volterra_prefix
from .dsl import DomainError, evaluate
from .grid import DomainMismatch, Field3D
from .problem import ProblemInstance


def g_term(p: ProblemInstance, u: Field3D) -> np.ndarray:
    """g(x, y, z, h(x, y, z, u(x, y, z))) on the grid."""
    x, y, z = p.domain.mesh()
    try:
        hu = evaluate(p.h_map, {"x": x, "y": y, "z": z, "v": u.values})
        out = evaluate(p.g, {"x": x, "y": y, "z": z, "v": hu})
    except DomainError as err:
        raise DomainError(f"g-term: {err}", err.index) from None
    return np.broadcast_to(out, p.domain.shape)


def apply_A(p: ProblemInstance, u: Field3D) -> Field3D:
    if u.domain != p.domain:
        raise DomainMismatch("field and problem live on different grids")
    total = g_term(p, u)
    total = total + volterra_prefix(p.K_spec, u).values
    total = total + fredholm_field(p.F_spec, u).values
    return Field3D(p.domain, total)


def residual(p: ProblemInstance, u: Field3D) -> Field3D:
    """|u - A(u)| pointwise."""
    return Field3D(p.domain, np.abs(u.values - apply_A(p, u).values))
