"""Tensor-product trapezoid cubature for the two integral terms.

The Volterra term integrates over the prefix box [0,x]x[0,y]x[0,z] and is
needed at every grid node; the Fredholm term integrates over [0, R]^3 as a
truncation of the positive octant.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dsl import DomainError, Expression, evaluate, parse
from .grid import Domain, Field3D, sample

OUTER = ("x", "y", "z")
IDENTITY = parse("v", {"v"})

# upper bound on the number of integrand samples evaluated in one batch
_BATCH_BUDGET = 2_000_000


@dataclass(frozen=True)
class KernelSpec:
    """Kernel K(x,y,z,r,s,t,v) applied to inner_map(r,s,t,u(r,s,t)).

    ``inner_map`` is written over {x,y,z,v}; its x,y,z are bound to the
    integration variables r,s,t.
    """

    expr: Expression
    inner_map: Expression = field(default=IDENTITY)

    def __post_init__(self):
        bad = self.expr.variables - set("xyzrstv")
        if bad:
            raise ValueError(f"kernel uses unknown variables {sorted(bad)}")
        bad = self.inner_map.variables - set("xyzv")
        if bad:
            raise ValueError(f"inner map uses unknown variables {sorted(bad)}")

    @property
    def separable(self) -> bool:
        """True when the kernel does not see the outer point."""
        return not self.expr.depends_on(*OUTER)


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def prefix_weights(n: int, h: float) -> np.ndarray:
    """Row i holds the trapezoid weights of [0, x_i] on nodes 0..n-1."""
    W = np.zeros((n, n))
    for i in range(1, n):
        W[i, : i + 1] = trapezoid_weights(i + 1, h)
    return W


def cumulative_trapezoid_3d(vals: np.ndarray, h: float) -> np.ndarray:
    """Prefix trapezoid along all three axes, zero on the index-0 planes."""
    out = np.asarray(vals, dtype=float)
    for axis in range(3):
        out = np.moveaxis(out, axis, 0)
        steps = 0.5 * h * (out[1:] + out[:-1])
        out = np.concatenate([np.zeros_like(out[:1]), np.cumsum(steps, axis=0)])
        out = np.moveaxis(out, 0, axis)
    return out


def interpolation_matrix(targets: np.ndarray, L: float, n: int) -> np.ndarray:
    """Linear interpolation from the uniform grid on [0, L] to ``targets``.

    Targets beyond L are clamped to the boundary node.
    """
    h = L / (n - 1)
    q = np.clip(targets, 0.0, L) / h
    i0 = np.minimum(np.floor(q).astype(int), n - 2)
    frac = q - i0
    P = np.zeros((len(targets), n))
    rows = np.arange(len(targets))
    P[rows, i0] = 1.0 - frac
    P[rows, i0 + 1] += frac
    return P


def _inner_values(ks: KernelSpec, coords, u_vals: np.ndarray) -> np.ndarray:
    r, s, t = coords
    return evaluate(ks.inner_map, {"x": r, "y": s, "z": t, "v": u_vals})


def _kernel(ks: KernelSpec, outer, inner, v) -> np.ndarray:
    x, y, z = outer
    r, s, t = inner
    env = {"x": x, "y": y, "z": z, "r": r, "s": s, "t": t, "v": v}
    return evaluate(ks.expr, env)


def _annotate(err: DomainError, where: str, outer_index=None) -> DomainError:
    msg = f"{where}: {err}"
    if outer_index is not None:
        msg += f" (outer node {outer_index})"
    return DomainError(msg, err.index)


def _batch_node(err: DomainError, i, j, k) -> tuple[int, int, int]:
    b = err.index[0] if err.index and len(err.index) == 4 else 0
    return int(i[b]), int(j[b]), int(k[b])


def _weighted_sum(G: np.ndarray, wx: np.ndarray, wy: np.ndarray, wz: np.ndarray) -> np.ndarray:
    """sum_{abc} wx[b,a] wy[b,b'] wz[b,c] G[b,a,b',c] for a batch b, reducing z, y, x in turn."""
    acc = np.sum(G * wz[:, None, None, :], axis=-1)
    acc = np.sum(acc * wy[:, None, :], axis=-1)
    return np.sum(acc * wx, axis=-1)


def _batched_outer(d: Domain, inner_count: int, body: Callable) -> np.ndarray:
    """Run ``body(flat_indices)`` over batches of outer nodes, assembling a field."""
    total = d.n ** 3
    batch = max(1, _BATCH_BUDGET // max(inner_count, 1))
    out = np.empty(total)
    for start in range(0, total, batch):
        idx = np.arange(start, min(start + batch, total))
        out[idx] = body(idx)
    return out.reshape(d.shape)


def volterra_prefix(ks: KernelSpec, u: Field3D) -> Field3D:
    """Trapezoid approximation of int_0^x int_0^y int_0^z K(.., f(u)(r,s,t)) at every node."""
    d = u.domain
    inner = d.mesh()
    try:
        v = _inner_values(ks, inner, u.values)
    except DomainError as err:
        raise _annotate(err, "Volterra inner map") from None

    if ks.separable:
        try:
            G = _kernel(ks, (0.0, 0.0, 0.0), inner, v)
        except DomainError as err:
            raise _annotate(err, "Volterra kernel") from None
        G = np.broadcast_to(G, d.shape)
        return Field3D(d, cumulative_trapezoid_3d(G, d.h))

    t = d.nodes
    W = prefix_weights(d.n, d.h)
    v = np.broadcast_to(v, d.shape)

    def body(idx):
        i, j, k = np.unravel_index(idx, d.shape)
        outer = (t[i][:, None, None, None], t[j][:, None, None, None], t[k][:, None, None, None])
        inner_b = tuple(c[None] for c in inner)
        try:
            G = _kernel(ks, outer, inner_b, v[None])
        except DomainError as err:
            raise _annotate(err, "Volterra kernel", _batch_node(err, i, j, k)) from None
        G = np.broadcast_to(G, (len(idx),) + d.shape)
        return _weighted_sum(G, W[i], W[j], W[k])

    return Field3D(d, _batched_outer(d, d.n ** 3, body))


def _quad_setup(ks: KernelSpec, u: Field3D):
    d = u.domain
    q = d.quad_nodes
    P = interpolation_matrix(q, d.L, d.n)
    u_q = np.einsum("ai,bj,ck,ijk->abc", P, P, P, u.values, optimize=True)
    inner = (q[:, None, None], q[None, :, None], q[None, None, :])
    try:
        v = _inner_values(ks, inner, u_q)
    except DomainError as err:
        raise _annotate(err, "Fredholm inner map") from None
    w = trapezoid_weights(d.m_nodes, d.R / (d.m_nodes - 1))
    return inner, np.broadcast_to(v, (d.m_nodes,) * 3), w


def fredholm_field(ks: KernelSpec, u: Field3D, weights: np.ndarray | None = None) -> Field3D:
    """Trapezoid approximation of the [0,R]^3 integral for every outer node.

    u is interpolated (trilinearly) onto the quadrature grid and held at its
    boundary value beyond [0, L]^3.  ``weights`` overrides the per-axis
    quadrature weights (used for the tail indicator).
    """
    d = u.domain
    inner, v, w = _quad_setup(ks, u)
    if weights is not None:
        w = weights
    m = d.m_nodes

    if ks.separable:
        try:
            G = _kernel(ks, (0.0, 0.0, 0.0), inner, v)
        except DomainError as err:
            raise _annotate(err, "Fredholm kernel") from None
        G = np.broadcast_to(G, (m, m, m))
        total = _weighted_sum(G[None], w[None], w[None], w[None])[0]
        return Field3D(d, np.full(d.shape, total))

    t = d.nodes

    def body(idx):
        i, j, k = np.unravel_index(idx, d.shape)
        outer = (t[i][:, None, None, None], t[j][:, None, None, None], t[k][:, None, None, None])
        inner_b = tuple(c[None] for c in inner)
        try:
            G = _kernel(ks, outer, inner_b, v[None])
        except DomainError as err:
            raise _annotate(err, "Fredholm kernel", _batch_node(err, i, j, k)) from None
        G = np.broadcast_to(G, (len(idx), m, m, m))
        wb = np.broadcast_to(w, (len(idx), m))
        return _weighted_sum(G, wb, wb, wb)

    return Field3D(d, _batched_outer(d, m ** 3, body))


def fredholm_truncated(ks: KernelSpec, u: Field3D, outer: tuple[int, int, int]) -> float:
    """Fredholm integral at a single outer node (i, j, k)."""
    d = u.domain
    i, j, k = outer
    if not all(0 <= a < d.n for a in outer):
        raise IndexError(f"outer node {outer} outside the grid")
    inner, v, w = _quad_setup(ks, u)
    t = d.nodes
    try:
        G = _kernel(ks, (t[i], t[j], t[k]), inner, v)
    except DomainError as err:
        raise _annotate(err, "Fredholm kernel", outer) from None
    G = np.broadcast_to(G, (d.m_nodes,) * 3)
    return float(_weighted_sum(G[None], w[None], w[None], w[None])[0])


def fredholm_tail_indicator(ks: KernelSpec, u: Field3D) -> float:
    """Largest contribution of the outermost shell of quadrature cells.

    Difference between the [0,R]^3 estimate and the same rule restricted to
    [0, R - dR]^3, maximised over outer nodes.
    """
    d = u.domain
    m = d.m_nodes
    dR = d.R / (m - 1)
    w_in = np.zeros(m)
    w_in[: m - 1] = trapezoid_weights(m - 1, dR)
    full = fredholm_field(ks, u)
    inner = fredholm_field(ks, u, weights=w_in)
    return float(np.max(np.abs(full.values - inner.values)))


def refine_estimate(
    op: str,
    ks: KernelSpec,
    u: Expression,
    domain: Domain,
    levels: int = 3,
) -> list[tuple[float, float]]:
    """Repeat a quadrature on successively halved spacings.

    ``op`` is "volterra" (value at the far corner (L, L, L); n refined) or
    "fredholm" (value at the outer origin; n and m_nodes refined).  ``u`` is
    an expression in x, y, z resampled on every level.
    """
    if levels < 2:
        raise ValueError("levels must be >= 2")
    if op not in ("volterra", "fredholm"):
        raise ValueError(f"unknown op {op!r}")
    out = []
    d = domain
    for _ in range(levels):
        field_u = sample(u, d)
        if op == "volterra":
            out.append((d.h, volterra_prefix(ks, field_u).corner))
        else:
            out.append((d.R / (d.m_nodes - 1), fredholm_truncated(ks, field_u, (0, 0, 0))))
        d = d.with_(n=2 * d.n - 1, m_nodes=2 * d.m_nodes - 1)
    return out


def observed_orders(seq: list[tuple[float, float]], exact: float | None = None) -> list[float]:
    """Convergence orders from a refinement sequence.

    With ``exact``: log2(|e_h| / |e_{h/2}|) per consecutive pair.  Without it,
    three consecutive values give log2(|v1 - v0| / |v2 - v1|).
    """
    vals = np.array([v for _, v in seq])
    with np.errstate(divide="ignore", invalid="ignore"):
        if exact is not None:
            err = np.abs(vals - exact)
            return [float(np.log2(err[i] / err[i + 1])) for i in range(len(err) - 1)]
        diffs = np.abs(np.diff(vals))
        return [float(np.log2(diffs[i] / diffs[i + 1])) for i in range(len(diffs) - 1)]
