"""Problem files (JSON) and report serialisation."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .certify import ContractionCertificate
from .cubature import KernelSpec
from .dsl import ExpressionError, parse, print_canonical
from .grid import Domain, Field3D, to_csv
from .problem import KERNEL_VARS, LIP_KERNEL_VARS, POINT_VARS, LipschitzData, ProblemInstance
from .solver import DEFAULT_MAX_ITER, DEFAULT_TOL, SolveReport
from .stability import SPACE_VARS, PerturbationSpec, StabilityReport


class ProblemFileError(ValueError):
    pass


class ParseError(ProblemFileError):
    pass


class SchemaError(ProblemFileError):
    pass


class ExpressionFieldError(ProblemFileError):
    def __init__(self, field: str, err: ExpressionError):
        super().__init__(f"{field}: {err}")
        self.field = field
        self.error = err


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ProblemSection(_Section):
    g: str = "0"
    h: str = "v"
    f1: str = "v"
    f2: str = "v"
    K: str = "0"
    F: str = "0"


NonNeg = Field(default=0.0, ge=0, allow_inf_nan=False)


class LipschitzSection(_Section):
    l_g: float = NonNeg
    l_h: float = NonNeg
    N: float = NonNeg
    l_f1: float = NonNeg
    l_f2: float = NonNeg
    l_1: float = NonNeg
    l_2: float = NonNeg
    alpha: float = NonNeg
    m: float = NonNeg
    l_K: str = "0"
    l_F: str = "0"


class DomainSection(_Section):
    L: float = Field(default=1.0, gt=0, allow_inf_nan=False)
    n: int = Field(default=17, ge=3)
    R: Optional[float] = Field(default=None, allow_inf_nan=False)
    m_nodes: Optional[int] = Field(default=None, ge=3)
    tau: float = Field(default=1.0, ge=0, allow_inf_nan=False)


class SolverSection(_Section):
    tol: float = Field(default=DEFAULT_TOL, gt=0)
    max_iter: int = Field(default=DEFAULT_MAX_ITER, ge=1)


class StabilitySection(_Section):
    shape: str = "1"
    epsilon: float = Field(default=0.1, allow_inf_nan=False)
    phi: Optional[str] = None
    tol_disc: Optional[float] = Field(default=None, ge=0)


class ProblemFile(_Section):
    problem: ProblemSection
    lipschitz: LipschitzSection = LipschitzSection()
    domain: DomainSection = DomainSection()
    solver: SolverSection = SolverSection()
    stability: StabilitySection = StabilitySection()


@dataclass
class LoadedProblem:
    instance: ProblemInstance
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    perturbation: PerturbationSpec | None = None
    tol_disc: float | None = None


def _expr(text: str, allowed, field: str):
    try:
        return parse(text, allowed)
    except ExpressionError as err:
        raise ExpressionFieldError(field, err) from None


def from_dict(data: Any) -> LoadedProblem:
    try:
        pf = ProblemFile.model_validate(data)
    except ValidationError as err:
        first = err.errors()[0]
        path = ".".join(str(p) for p in first["loc"])
        raise SchemaError(f"{path}: {first['msg']}") from None

    pr = pf.problem
    lp = pf.lipschitz
    try:
        domain = Domain(**pf.domain.model_dump())
    except ValueError as err:
        raise SchemaError(f"domain: {err}") from None
    lip = LipschitzData(
        l_g=lp.l_g, l_h=lp.l_h, N=lp.N, l_f1=lp.l_f1, l_f2=lp.l_f2,
        l_1=lp.l_1, l_2=lp.l_2, alpha=lp.alpha, m=lp.m,
        l_K=_expr(lp.l_K, LIP_KERNEL_VARS, "lipschitz.l_K"),
        l_F=_expr(lp.l_F, LIP_KERNEL_VARS, "lipschitz.l_F"),
    )
    inst = ProblemInstance(
        g=_expr(pr.g, POINT_VARS, "problem.g"),
        h_map=_expr(pr.h, POINT_VARS, "problem.h"),
        K_spec=KernelSpec(_expr(pr.K, KERNEL_VARS, "problem.K"), _expr(pr.f1, POINT_VARS, "problem.f1")),
        F_spec=KernelSpec(_expr(pr.F, KERNEL_VARS, "problem.F"), _expr(pr.f2, POINT_VARS, "problem.f2")),
        domain=domain,
        lip=lip,
    )
    st = pf.stability
    spec = PerturbationSpec(
        _expr(st.shape, SPACE_VARS, "stability.shape"),
        st.epsilon,
        None if st.phi is None else _expr(st.phi, SPACE_VARS, "stability.phi"),
    )
    return LoadedProblem(inst, pf.solver.tol, pf.solver.max_iter, spec, st.tol_disc)


def load_problem(path: str | Path) -> LoadedProblem:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(f"{path}: invalid JSON at line {err.lineno} column {err.colno}: {err.msg}") from None
    return from_dict(data)


def to_dict(lp: LoadedProblem) -> dict:
    p = lp.instance
    lip = p.lip
    d = p.domain
    out = {
        "problem": {
            "g": print_canonical(p.g),
            "h": print_canonical(p.h_map),
            "f1": print_canonical(p.f1_map),
            "f2": print_canonical(p.f2_map),
            "K": print_canonical(p.K_spec.expr),
            "F": print_canonical(p.F_spec.expr),
        },
        "lipschitz": {
            "l_g": lip.l_g, "l_h": lip.l_h, "N": lip.N, "l_f1": lip.l_f1, "l_f2": lip.l_f2,
            "l_1": lip.l_1, "l_2": lip.l_2, "alpha": lip.alpha, "m": lip.m,
            "l_K": print_canonical(lip.l_K), "l_F": print_canonical(lip.l_F),
        },
        "domain": {"L": d.L, "n": d.n, "R": d.R, "m_nodes": d.m_nodes, "tau": d.tau},
        "solver": {"tol": lp.tol, "max_iter": lp.max_iter},
    }
    if lp.perturbation is not None:
        spec = lp.perturbation
        st = {"shape": print_canonical(spec.shape), "epsilon": spec.epsilon}
        if spec.phi is not None:
            st["phi"] = print_canonical(spec.phi)
        if lp.tol_disc is not None:
            st["tol_disc"] = lp.tol_disc
        out["stability"] = st
    return out


def write_problem(lp: LoadedProblem, path: str | Path) -> None:
    Path(path).write_text(dumps(to_dict(lp)))


# --------------------------------------------------------------------------
# reports


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return "null"
        return format(obj, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if hasattr(obj, "item"):  # numpy scalar
        return _encode(obj.item(), indent, level)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON with 17 significant digits for floats and insertion-ordered keys."""
    return _encode(obj, indent, 0) + "\n"


def domain_dict(d: Domain) -> dict:
    return {"L": d.L, "n": d.n, "R": d.R, "m_nodes": d.m_nodes, "tau": d.tau}


def solve_report_dict(r: SolveReport) -> dict:
    u = r.u_star
    return {
        "converged": r.converged,
        "iterations": r.iterations,
        "tol": r.tol,
        "residual_history": list(r.residual_history),
        "observed_ratios": list(r.observed_ratios),
        "u_star_corner": u.corner,
        "u_star_origin": u.at(0, 0, 0),
        "domain": domain_dict(u.domain),
    }


def certificate_dict(c: ContractionCertificate) -> dict:
    return {
        "passed": c.passed,
        "q": c.q,
        "c": c.c,
        "lgN": c.lgN,
        "C_hur": c.C_hur,
        "flags": dict(c.flags),
        "validation_report": {k: dict(v) for k, v in c.validation_report.items()},
    }


def stability_report_dict(r: StabilityReport) -> dict:
    return {
        "hur_holds": r.hur_holds,
        "admissible": r.admissible,
        "min_slack": r.min_slack,
        "C_hur": r.C_hur,
        "observed_ratio": r.ratio,
        "tol_disc": r.tol_disc,
        "phi_mode": r.phi_mode,
        "max_residual": float(r.residual_field.values.max()),
        "max_diff": float(r.diff_field.values.max()),
        "phi_origin": r.phi_field.at(0, 0, 0),
    }


def write_field(u: Field3D, path: str | Path) -> None:
    Path(path).write_text(to_csv(u))
