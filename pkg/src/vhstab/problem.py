"""Problem data: the six maps of the equation plus declared Lipschitz constants."""
from __future__ import annotations

from dataclasses import dataclass, field

from .cubature import KernelSpec
from .dsl import Expression, parse
from .grid import Domain

POINT_VARS = frozenset("xyzv")
KERNEL_VARS = frozenset("xyzrstv")
LIP_KERNEL_VARS = frozenset("xyzrst")


@dataclass(frozen=True)
class LipschitzData:
    """Declared constants; ``l_K`` / ``l_F`` are functions of (x,y,z,r,s,t)."""

    l_g: float = 0.0
    l_h: float = 0.0
    N: float = 0.0
    l_f1: float = 0.0
    l_f2: float = 0.0
    l_K: Expression = field(default_factory=lambda: parse("0", LIP_KERNEL_VARS))
    l_F: Expression = field(default_factory=lambda: parse("0", LIP_KERNEL_VARS))
    l_1: float = 0.0
    l_2: float = 0.0
    alpha: float = 0.0
    m: float = 0.0

    def __post_init__(self):
        for name in ("l_g", "l_h", "N", "l_f1", "l_f2", "l_1", "l_2", "alpha", "m"):
            value = float(getattr(self, name))
            if not (value >= 0 and value < float("inf")):
                raise ValueError(f"{name} must be finite and nonnegative, got {value}")
            object.__setattr__(self, name, value)
        for name in ("l_K", "l_F"):
            bad = getattr(self, name).variables - LIP_KERNEL_VARS
            if bad:
                raise ValueError(f"{name} uses unknown variables {sorted(bad)}")


@dataclass(frozen=True)
class ProblemInstance:
    """u = g(x,y,z, h(u)) + Volterra(K, f1(u)) + Fredholm(F, f2(u))."""

    g: Expression
    h_map: Expression
    K_spec: KernelSpec
    F_spec: KernelSpec
    domain: Domain
    lip: LipschitzData = field(default_factory=LipschitzData)

    def __post_init__(self):
        for name, e in (("g", self.g), ("h", self.h_map)):
            bad = e.variables - POINT_VARS
            if bad:
                raise ValueError(f"{name} uses unknown variables {sorted(bad)}")

    @property
    def f1_map(self) -> Expression:
        return self.K_spec.inner_map

    @property
    def f2_map(self) -> Expression:
        return self.F_spec.inner_map

    @classmethod
    def from_strings(
        cls,
        *,
        g: str,
        h: str = "v",
        K: str = "0",
        f1: str = "v",
        F: str = "0",
        f2: str = "v",
        domain: Domain | None = None,
        lip: LipschitzData | None = None,
    ) -> "ProblemInstance":
        return cls(
            g=parse(g, POINT_VARS),
            h_map=parse(h, POINT_VARS),
            K_spec=KernelSpec(parse(K, KERNEL_VARS), parse(f1, POINT_VARS)),
            F_spec=KernelSpec(parse(F, KERNEL_VARS), parse(f2, POINT_VARS)),
            domain=domain or Domain(),
            lip=lip or LipschitzData(),
        )

    def with_domain(self, domain: Domain) -> "ProblemInstance":
        return ProblemInstance(self.g, self.h_map, self.K_spec, self.F_spec, domain, self.lip)
