import sympy as sp
import pytest

from liereduce.parse import parse_ode, parse_vector_field

S = sp.Symbol("s")
IDENTITY = sp.Lambda(S, S)
ZERO = sp.Lambda(S, 0)
SQUARE = sp.Lambda(S, S**2)

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def basis(u_field: str):
    return [
        parse_vector_field("d/dy", "X"),
        parse_vector_field("x*d/dy", "Y"),
        parse_vector_field("x^2*d/dy", "Z"),
        parse_vector_field(u_field, "U"),
    ]


@pytest.fixture(scope="session")
def a41():
    return parse_ode("y'''' = F(y''')", ["F"]), basis("d/dx")


@pytest.fixture(scope="session")
def a44():
    return parse_ode("y'''' = e^(-x)*F(e^x*y''')", ["F"]), basis("-d/dx + y*d/dy")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
