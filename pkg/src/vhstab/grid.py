"""Truncated computational box, grid-sampled fields and the Bielecki norm."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .dsl import DomainError, Expression, evaluate


class DomainMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Domain:
    """Box [0, L]^3 with ``n`` nodes per axis.

    ``R`` and ``m_nodes`` describe the uniform grid on [0, R]^3 used for the
    infinite-range integral; ``tau`` is the exponent of the weight
    exp(-tau (x + y + z)).
    """

    L: float = 1.0
    n: int = 17
    R: float | None = None
    m_nodes: int | None = None
    tau: float = 1.0

    def __post_init__(self):
        if self.R is None:
            object.__setattr__(self, "R", float(self.L))
        if self.m_nodes is None:
            object.__setattr__(self, "m_nodes", int(self.n))
        if not (np.isfinite(self.L) and self.L > 0):
            raise ValueError(f"L must be positive, got {self.L}")
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"n must be an integer >= 3, got {self.n}")
        if int(self.m_nodes) != self.m_nodes or self.m_nodes < 3:
            raise ValueError(f"m_nodes must be an integer >= 3, got {self.m_nodes}")
        if not (np.isfinite(self.R) and self.R >= self.L):
            raise ValueError(f"R must satisfy R >= L, got R={self.R}, L={self.L}")
        if not (np.isfinite(self.tau) and self.tau >= 0):
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "m_nodes", int(self.m_nodes))

    @property
    def h(self) -> float:
        return self.L / (self.n - 1)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.n)

    @property
    def quad_nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.R, self.m_nodes)

    def mesh(self):
        """Broadcastable coordinate arrays (x[:,None,None], y[None,:,None], z[None,None,:])."""
        t = self.nodes
        return t[:, None, None], t[None, :, None], t[None, None, :]

    def weight(self, tau: float | None = None) -> np.ndarray:
        """exp(-tau (x + y + z)) on the grid."""
        tau = self.tau if tau is None else tau
        x, y, z = self.mesh()
        return np.exp(-tau * (x + y + z))

    def with_(self, **changes) -> "Domain":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class Field3D:
    domain: Domain
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.domain.shape:
            vals = np.broadcast_to(vals, self.domain.shape).copy()
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __add__(self, other: "Field3D") -> "Field3D":
        return axpy(1.0, other, self)

    def __sub__(self, other: "Field3D") -> "Field3D":
        return axpy(-1.0, other, self)

    def __mul__(self, alpha: float) -> "Field3D":
        return Field3D(self.domain, alpha * self.values)

    __rmul__ = __mul__

    def __abs__(self) -> "Field3D":
        return Field3D(self.domain, np.abs(self.values))

    def at(self, i: int, j: int, k: int) -> float:
        return float(self.values[i, j, k])

    @property
    def corner(self) -> float:
        return float(self.values[-1, -1, -1])


def zeros(d: Domain) -> Field3D:
    return Field3D(d, np.zeros(d.shape))


def sample(e: Expression, d: Domain) -> Field3D:
    extra = e.variables - {"x", "y", "z"}
    if extra:
        raise ValueError(f"cannot sample expression with variables {sorted(extra)}")
    x, y, z = np.broadcast_arrays(*d.mesh())
    try:
        vals = evaluate(e, {"x": x, "y": y, "z": z})
    except DomainError as err:
        raise DomainError(f"sampling {e}: {err}", err.index) from None
    return Field3D(d, np.broadcast_to(vals, d.shape))


def _check_same(u: Field3D, v: Field3D):
    if u.domain != v.domain:
        raise DomainMismatch(f"{u.domain} != {v.domain}")


def bielecki_norm(u: Field3D, tau: float | None = None) -> float:
    """max over grid nodes of |u| exp(-tau (x+y+z)); tau defaults to the domain's."""
    return float(np.max(np.abs(u.values) * u.domain.weight(tau)))


def axpy(alpha: float, u: Field3D, v: Field3D) -> Field3D:
    _check_same(u, v)
    return Field3D(u.domain, alpha * u.values + v.values)


def sup_diff(u: Field3D, v: Field3D) -> float:
    _check_same(u, v)
    return float(np.max(np.abs(u.values - v.values)))


def to_csv(u: Field3D) -> str:
    """Dump as CSV with header x,y,z,value in row-major (i, j, k) order."""
    t = u.domain.nodes
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "z", "value"])
    for i in range(u.domain.n):
        for j in range(u.domain.n):
            for k in range(u.domain.n):
                w.writerow([f"{t[i]:.17g}", f"{t[j]:.17g}", f"{t[k]:.17g}",
                            f"{u.values[i, j, k]:.17g}"])
    return buf.getvalue()


def from_csv(text: str, d: Domain) -> Field3D:
    rows = list(csv.DictReader(io.StringIO(text)))
    if len(rows) != d.n ** 3:
        raise DomainMismatch(f"expected {d.n ** 3} rows, got {len(rows)}")
    vals = np.array([float(r["value"]) for r in rows]).reshape(d.shape)
    return Field3D(d, vals)
