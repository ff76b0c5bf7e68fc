"""Manufactured approximate solutions and the pointwise stability check |u - u*| <= C phi."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .certify import ContractionCertificate
from .dsl import Expression, parse
from .grid import Field3D, sample
from .operator import apply_A, residual
from .problem import ProblemInstance


class CertificateIncomplete(ValueError):
    pass


class LgNOutOfRange(ValueError):
    pass


class InvalidPhi(ValueError):
    pass


SPACE_VARS = frozenset("xyz")


@dataclass(frozen=True)
class PerturbationSpec:
    """u = u* + epsilon * shape; ``phi`` is None for the derived envelope."""

    shape: Expression
    epsilon: float
    phi: Expression | None = None

    def __post_init__(self):
        if not np.isfinite(self.epsilon):
            raise ValueError("epsilon must be finite")
        for name, e in (("shape", self.shape), ("phi", self.phi)):
            if e is not None and not e.variables <= SPACE_VARS:
                raise ValueError(f"{name} may only use x, y, z")

    @classmethod
    def from_strings(cls, shape: str, epsilon: float, phi: str | None = None) -> "PerturbationSpec":
        return cls(
            parse(shape, SPACE_VARS),
            float(epsilon),
            None if phi is None else parse(phi, SPACE_VARS),
        )

    @property
    def phi_mode(self) -> str:
        return "derived" if self.phi is None else "given"


@dataclass
class StabilityReport:
    residual_field: Field3D
    phi_field: Field3D
    bound_field: Field3D
    diff_field: Field3D
    min_slack: float
    admissible: bool
    hur_holds: bool
    C_hur: float
    tol_disc: float
    phi_mode: str

    @property
    def ratio(self) -> float:
        """Smallest constant C' with diff <= C' phi on nodes where phi > 0."""
        phi = self.phi_field.values
        mask = phi > 0
        if not np.any(mask):
            return 0.0
        return float(np.max(self.diff_field.values[mask] / phi[mask]))


def make_perturbed(u_star: Field3D, spec: PerturbationSpec) -> Field3D:
    w = sample(spec.shape, u_star.domain)
    return Field3D(u_star.domain, u_star.values + spec.epsilon * w.values)


def is_monotone(values: np.ndarray) -> bool:
    """Nondecreasing along each axis."""
    return all(np.all(np.diff(values, axis=a) >= 0) for a in range(values.ndim))


def derive_phi(res: Field3D) -> Field3D:
    """Smallest field >= res that is nondecreasing along every axis."""
    if np.any(res.values < 0):
        raise ValueError("residual must be nonnegative")
    env = res.values
    for axis in range(3):
        env = np.maximum.accumulate(env, axis=axis)
    return Field3D(res.domain, env)


def quadrature_error_estimate(p: ProblemInstance, u: Field3D) -> float:
    """Richardson-style estimate of the cubature error in A(u).

    Compares A on the grid against A on the grid with every other node
    (m_nodes halved too, when odd) and divides by 3 as for a second-order
    rule.  Returns 0 when the grid cannot be coarsened.
    """
    d = p.domain
    if d.n % 2 == 0 or d.n < 5:
        return 0.0
    m_c = (d.m_nodes + 1) // 2 if d.m_nodes % 2 == 1 and d.m_nodes >= 5 else d.m_nodes
    coarse = d.with_(n=(d.n + 1) // 2, m_nodes=m_c)
    pc = p.with_domain(coarse)
    sub = (slice(None, None, 2),) * 3
    A_fine = apply_A(p, u).values[sub]
    A_coarse = apply_A(pc, Field3D(coarse, u.values[sub])).values
    return float(np.max(np.abs(A_fine - A_coarse))) / 3.0


def default_tol_disc(solver_tol: float, quad_estimate: float) -> float:
    return 2.0 * (solver_tol + quad_estimate)


def check_hur(
    p: ProblemInstance,
    u: Field3D,
    u_star: Field3D,
    cert: ContractionCertificate,
    spec: PerturbationSpec,
    tol_disc: float,
) -> StabilityReport:
    if cert.C_hur is None:
        raise CertificateIncomplete("stability constant undefined (l_g * N >= 1)")
    res = residual(p, u)
    if spec.phi is None:
        phi = derive_phi(res)
    else:
        phi = sample(spec.phi, p.domain)
        if np.any(phi.values < 0) or not is_monotone(phi.values):
            raise InvalidPhi("given phi must be nonnegative and nondecreasing on the grid")
    diff = Field3D(p.domain, np.abs(u.values - u_star.values))
    bound = Field3D(p.domain, cert.C_hur * phi.values)
    min_slack = float(np.min(bound.values - diff.values))
    admissible = bool(np.all(res.values <= phi.values))
    return StabilityReport(
        residual_field=res,
        phi_field=phi,
        bound_field=bound,
        diff_field=diff,
        min_slack=min_slack,
        admissible=admissible,
        hur_holds=admissible and min_slack >= -tol_disc,
        C_hur=cert.C_hur,
        tol_disc=tol_disc,
        phi_mode=spec.phi_mode,
    )


def gronwall_check(
    psi: Field3D, phi: Field3D, weight_integral: float, lgN: float, m: float
) -> tuple[bool, bool]:
    """(premise_holds, conclusion_holds) for the scalar-kernel form.

    premise:    psi <= phi/(1-lgN) + weight_integral * sup(psi) / (1-lgN)
    conclusion: psi <= phi/(1-lgN) * exp(m/(1-lgN))
    both pointwise on the grid.
    """
    if not 0 <= lgN < 1:
        raise LgNOutOfRange(f"lgN must lie in [0, 1), got {lgN}")
    scale = 1.0 / (1.0 - lgN)
    sup_psi = float(np.max(psi.values))
    premise = np.all(psi.values <= scale * phi.values + scale * weight_integral * sup_psi)
    conclusion = np.all(psi.values <= scale * phi.values * np.exp(m * scale))
    return bool(premise), bool(conclusion)


_SHAPE_TERMS = ("1", "x", "y*z", "x*y*z", "sin(3*x + y)", "cos(2*z)*y", "exp(-x - y)")


def random_perturbation(rng: np.random.Generator, max_epsilon: float = 0.2) -> PerturbationSpec:
    """Random combination of a few smooth profiles with a random signed amplitude."""
    k = int(rng.integers(1, 4))
    picks = rng.choice(len(_SHAPE_TERMS), size=k, replace=False)
    coeffs = rng.uniform(-1.0, 1.0, size=k)
    shape = " + ".join(f"({float(c)!r})*({_SHAPE_TERMS[i]})" for c, i in zip(coeffs, picks))
    eps = float(rng.uniform(-max_epsilon, max_epsilon))
    return PerturbationSpec(parse(shape, SPACE_VARS), eps)


def harness_cases(p: ProblemInstance, u_star: Field3D, weight_integral: float, rng: np.random.Generator, count: int):
    """Gronwall cases drawn from perturbed solutions of a certified instance.

    Yields (psi, phi, weight_integral, lgN, m) with psi = |u - u*| and phi the
    derived envelope of the residual of u.
    """
    lgN = p.lip.l_g * p.lip.N
    for _ in range(count):
        u = make_perturbed(u_star, random_perturbation(rng))
        psi = Field3D(p.domain, np.abs(u.values - u_star.values))
        yield psi, derive_phi(residual(p, u)), weight_integral, lgN, p.lip.m
