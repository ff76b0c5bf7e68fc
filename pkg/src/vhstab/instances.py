"""Ready-made problem instances used by the tests, the CLI and the docs."""
from __future__ import annotations

from .dsl import parse
from .grid import Domain
from .problem import LIP_KERNEL_VARS, LipschitzData, ProblemInstance


def lin(lam: float = 0.5, n: int = 9, L: float = 1.0, tau: float = 1.0) -> ProblemInstance:
    """u = 1 + lam * int_0^x int_0^y int_0^z u.

    Exact solution sum_k (lam x y z)^k / (k!)^3.
    """
    lip = LipschitzData(
        l_g=0.0, l_h=1.0, N=1.0, l_f1=1.0, l_f2=1.0,
        l_K=parse(repr(float(lam)), LIP_KERNEL_VARS),
        l_1=lam / tau ** 3, l_2=0.0, alpha=1.0, m=lam * L ** 3,
    )
    return ProblemInstance.from_strings(
        g="1", h="v", K=f"{lam!r}*v", f1="v", F="0", f2="v",
        domain=Domain(L=L, n=n, tau=tau), lip=lip,
    )


def lin_series(lam: float, xyz: float, terms: int = 12) -> float:
    """Partial sum of sum_k (lam * xyz)^k / (k!)^3."""
    total, term = 0.0, 1.0
    for k in range(terms):
        if k:
            term *= lam * xyz / k ** 3
        total += term
    return total


def nonlinear(n: int = 9) -> ProblemInstance:
    """Nonlinear g and h, outer-point-dependent Volterra kernel, no Fredholm part."""
    lip = LipschitzData(
        l_g=0.3, l_h=0.5, N=0.5, l_f1=1.0, l_f2=1.0,
        l_K=parse("0.4*exp(-(x - r))", LIP_KERNEL_VARS),
        l_1=0.1, l_2=0.0, alpha=1.0, m=0.26,
    )
    return ProblemInstance.from_strings(
        g="0.3*sin(v) + 0.5*x*y*z", h="0.5*v + cos(x)",
        K="0.4*exp(-(x - r))*cos(v)", f1="v/(1 + y*y)",
        F="0", f2="v",
        domain=Domain(L=1.0, n=n, tau=1.0), lip=lip,
    )


def mixed(n: int = 9) -> ProblemInstance:
    """Volterra and Fredholm parts together, Fredholm kernel decaying like exp(-2(r+s+t))."""
    lip = LipschitzData(
        l_g=0.2, l_h=1.0, N=1.0, l_f1=1.0, l_f2=1.0,
        l_K=parse("0.3", LIP_KERNEL_VARS),
        l_F=parse("0.05*exp(-2*(r + s + t))", LIP_KERNEL_VARS),
        l_1=0.3, l_2=0.05, alpha=1.01, m=0.31,
    )
    return ProblemInstance.from_strings(
        g="1 + 0.2*v", h="sin(v)",
        K="0.3*v", f1="v",
        F="0.05*exp(-2*(r + s + t))*cos(v)", f2="v",
        domain=Domain(L=1.0, n=n, R=4.0, m_nodes=33, tau=1.0), lip=lip,
    )


def fredholm_dominated(n: int = 9) -> ProblemInstance:
    """Pure Fredholm instance, u = 1 + 0.5 int exp(-(r+s+t)) u over [0, 8]^3."""
    lip = LipschitzData(
        l_g=0.0, l_h=1.0, N=1.0, l_f1=1.0, l_f2=1.0,
        l_F=parse("0.5*exp(-(r + s + t))", LIP_KERNEL_VARS),
        l_1=0.0, l_2=0.51, alpha=1.0, m=0.51,
    )
    return ProblemInstance.from_strings(
        g="1", K="0", F="0.5*exp(-(r + s + t))*v",
        domain=Domain(L=1.0, n=n, R=8.0, m_nodes=33, tau=0.0), lip=lip,
    )


CERTIFIED = {"lin": lin, "nonlinear": nonlinear, "mixed": mixed}
