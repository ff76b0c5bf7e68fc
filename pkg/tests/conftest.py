import numpy as np
import pytest

from vhstab import instances
from vhstab.dsl import BINARY_OPS, UNARY_FUNCS, Binary, Const, Expression, Unary, Var

ACCEPTANCE_LINES: list[str] = []


def random_ast(rng: np.random.Generator, names=("x", "y", "z"), depth: int = 4):
    """Random expression tree; constants may be negative."""
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.5:
            return Var(str(rng.choice(names)))
        return Const(float(np.round(rng.normal() * 3, int(rng.integers(0, 6)))))
    if rng.random() < 0.35:
        op = str(rng.choice(("neg",) + UNARY_FUNCS))
        return Unary(op, random_ast(rng, names, depth - 1))
    op = str(rng.choice(BINARY_OPS))
    return Binary(op, random_ast(rng, names, depth - 1), random_ast(rng, names, depth - 1))


def random_expression(rng, names=("x", "y", "z"), depth: int = 4) -> Expression:
    return Expression.from_ast(random_ast(rng, names, depth))


@pytest.fixture(scope="session")
def lin():
    return instances.lin(0.5)


@pytest.fixture(scope="session")
def certified():
    return {name: make() for name, make in instances.CERTIFIED.items()}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
