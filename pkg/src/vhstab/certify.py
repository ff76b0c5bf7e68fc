"""Numerical validation of the declared constants and the contraction certificate."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cubature import KernelSpec, fredholm_field, volterra_prefix
from .dsl import Expression, absolute, evaluate, parse, product
from .grid import Domain, Field3D, zeros
from .operator import g_term
from .problem import LIP_KERNEL_VARS, ProblemInstance

DEFAULT_SAMPLES = 1000
# relative slack when comparing a numerically integrated constant against its declaration
RTOL = 1e-9
# default range for the state variable v in Lipschitz spot checks
V_RANGE = (-10.0, 10.0)


def contraction_factor(l_g: float, l_h: float, l_1: float, l_2: float) -> float:
    return l_g * l_h + l_1 + l_2


def picard_constant(q: float) -> float | None:
    """c = 1 / (1 - q), or None when q >= 1."""
    return 1.0 / (1.0 - q) if q < 1 else None


def hur_constant(lgN: float, m: float) -> float | None:
    """exp(m / (1 - lgN)) / (1 - lgN), or None when lgN >= 1."""
    if lgN >= 1:
        return None
    return 1.0 / (1.0 - lgN) * math.exp(m / (1.0 - lgN))


def estimate_lipschitz(
    e: Expression,
    wrt: str,
    box: dict[str, tuple[float, float]],
    samples: int = DEFAULT_SAMPLES,
    rng_seed: int = 0,
) -> float:
    """Sampled lower bound on the Lipschitz constant of ``e`` in ``wrt``.

    Each pair differs only in ``wrt``.  Half of the partners are drawn from
    the whole interval, half are local (offset 1e-3..1e-1 of the width), so
    both secant and near-derivative slopes are seen.
    """
    if samples < 100:
        raise ValueError("samples must be >= 100")
    missing = (e.variables | {wrt}) - set(box)
    if missing:
        raise ValueError(f"box has no range for {sorted(missing)}")
    rng = np.random.default_rng(rng_seed)
    pts = {name: rng.uniform(lo, hi, samples) for name, (lo, hi) in sorted(box.items())}
    lo, hi = box[wrt]
    width = hi - lo
    a = pts[wrt]
    far = rng.uniform(lo, hi, samples)
    offset = width * 10.0 ** rng.uniform(-3, -1, samples) * rng.choice([-1.0, 1.0], samples)
    near = a + offset
    near = np.where((near < lo) | (near > hi), a - offset, near)
    b = np.where(np.arange(samples) % 2 == 0, far, near)
    keep = a != b
    env_a = {k: v[keep] for k, v in pts.items()}
    env_b = dict(env_a)
    env_b[wrt] = b[keep]
    fa = np.broadcast_to(evaluate(e, env_a), a[keep].shape)
    fb = np.broadcast_to(evaluate(e, env_b), a[keep].shape)
    slopes = np.abs(fa - fb) / np.abs(a[keep] - b[keep])
    return float(np.max(slopes, initial=0.0))


def kernel_lipschitz_excess(
    K: Expression,
    l_K: Expression,
    box: dict[str, tuple[float, float]],
    samples: int = DEFAULT_SAMPLES,
    rng_seed: int = 0,
) -> float:
    """max over sampled pairs of |dK|/|dv| - l_K(x,y,z,r,s,t); <= 0 when consistent.

    Pairs differ only in v and use local offsets so slopes track the
    pointwise bound.
    """
    rng = np.random.default_rng(rng_seed)
    pts = {name: rng.uniform(lo, hi, samples) for name, (lo, hi) in sorted(box.items())}
    lo, hi = box["v"]
    a = pts["v"]
    offset = (hi - lo) * 10.0 ** rng.uniform(-3, 0, samples)
    b = np.where(a + offset <= hi, a + offset, a - offset)
    env_b = dict(pts)
    env_b["v"] = b
    fa = np.broadcast_to(evaluate(K, pts), a.shape)
    fb = np.broadcast_to(evaluate(K, env_b), a.shape)
    bound = np.broadcast_to(evaluate(l_K, pts), a.shape)
    slopes = np.abs(fa - fb) / np.abs(a - b)
    return float(np.max(slopes - bound * (1 + RTOL)))


def _weighted_max(field: Field3D) -> float:
    return float(np.max(np.abs(field.values) * field.domain.weight()))


def _c7_kernel(l_f: float, l_ker: Expression, tau: float) -> KernelSpec:
    growth = parse(f"exp({tau!r} * (r + s + t))", LIP_KERNEL_VARS)
    return KernelSpec(product(l_f, l_ker, growth))


def validate_C7(lip, d: Domain) -> tuple[float, float]:
    """Weighted maxima of the two integrals bounded by l_1 and l_2."""
    dummy = zeros(d)
    l1 = _weighted_max(volterra_prefix(_c7_kernel(lip.l_f1, lip.l_K, d.tau), dummy))
    l2 = _weighted_max(fredholm_field(_c7_kernel(lip.l_f2, lip.l_F, d.tau), dummy))
    return l1, l2


def validate_C9_C10(p: ProblemInstance) -> tuple[float, float]:
    """(alpha_num, m_num).

    alpha_num evaluates the three-term bound at u = 0; m_num is the largest
    kernel mass, with the Volterra part over the prefix box and the
    Fredholm part over [0, R]^3.
    """
    d = p.domain
    u0 = zeros(d)
    g0 = np.abs(g_term(p, u0))
    K_abs = KernelSpec(absolute(p.K_spec.expr), p.K_spec.inner_map)
    F_abs = KernelSpec(absolute(p.F_spec.expr), p.F_spec.inner_map)
    total = g0 + volterra_prefix(K_abs, u0).values + fredholm_field(F_abs, u0).values
    alpha_num = float(np.max(total * d.weight()))

    lip = p.lip
    mass = (
        volterra_prefix(KernelSpec(product(lip.l_f1, lip.l_K)), u0).values
        + fredholm_field(KernelSpec(product(lip.l_f2, lip.l_F)), u0).values
    )
    return alpha_num, float(np.max(mass))


@dataclass
class ContractionCertificate:
    q: float
    c: float | None
    C_hur: float | None
    lgN: float
    flags: dict[str, bool] = field(default_factory=dict)
    validation_report: dict[str, dict[str, float]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.flags.values())


def _spot_checks(p: ProblemInstance, samples: int, seed: int) -> dict[str, dict[str, float]]:
    d = p.domain
    space = {k: (0.0, d.L) for k in "xyz"}
    box = dict(space, v=V_RANGE)
    lip = p.lip
    out = {}
    h_est = estimate_lipschitz(p.h_map, "v", box, samples, seed)
    for name, expr, declared in (
        ("l_g", p.g, lip.l_g),
        ("l_h", p.h_map, lip.l_h),
        ("N", p.h_map, lip.N),
        ("l_f1", p.f1_map, lip.l_f1),
        ("l_f2", p.f2_map, lip.l_f2),
    ):
        est = h_est if name in ("l_h", "N") else estimate_lipschitz(expr, "v", box, samples, seed)
        out[name] = {"declared": declared, "estimated": est}

    inner = {"r": (0.0, d.L), "s": (0.0, d.L), "t": (0.0, d.L)}
    out["l_K"] = {
        "declared": 0.0,
        "estimated": kernel_lipschitz_excess(p.K_spec.expr, lip.l_K, dict(box, **inner), samples, seed),
    }
    far = {"r": (0.0, d.R), "s": (0.0, d.R), "t": (0.0, d.R)}
    out["l_F"] = {
        "declared": 0.0,
        "estimated": kernel_lipschitz_excess(p.F_spec.expr, lip.l_F, dict(box, **far), samples, seed),
    }
    return out


def certify(p: ProblemInstance, samples: int = DEFAULT_SAMPLES, seed: int = 0) -> ContractionCertificate:
    """Evaluate q, c and the stability constant and validate every declared constant.

    Failures are reported as flags; nothing is raised for a failed check.
    For l_K and l_F the report holds the largest sampled excess of the
    pointwise slope over the declared bound (<= 0 passes).
    """
    lip = p.lip
    q = contraction_factor(lip.l_g, lip.l_h, lip.l_1, lip.l_2)
    lgN = lip.l_g * lip.N
    cert = ContractionCertificate(q=q, c=picard_constant(q), C_hur=hur_constant(lgN, lip.m), lgN=lgN)

    l1_num, l2_num = validate_C7(lip, p.domain)
    alpha_num, m_num = validate_C9_C10(p)
    report = {
        "l_1": {"declared": lip.l_1, "estimated": l1_num},
        "l_2": {"declared": lip.l_2, "estimated": l2_num},
        "alpha": {"declared": lip.alpha, "estimated": alpha_num},
        "m": {"declared": lip.m, "estimated": m_num},
    }
    report.update(_spot_checks(p, samples, seed))
    cert.validation_report = report

    def ok(name):
        entry = report[name]
        return entry["estimated"] <= entry["declared"] * (1 + RTOL)

    cert.flags = {
        "C3_l_g": ok("l_g"),
        "C2_l_h": ok("l_h"),
        "C4_l_K": report["l_K"]["estimated"] <= 0.0,
        "C5_l_F": report["l_F"]["estimated"] <= 0.0,
        "C6_l_f": ok("l_f1") and ok("l_f2"),
        "C7_valid": ok("l_1") and ok("l_2"),
        "C8": q < 1,
        "C9_alpha": ok("alpha"),
        "C10_m": ok("m"),
        "i_N": ok("N"),
        "ii": lgN < 1,
    }
    return cert
