"""Exact expression kernel over the jet space of one dependent variable.

Expressions are plain sympy objects built from the symbols ``x``, ``y`` and
the jet symbols ``y1, y2, ...`` (``y1`` is y', ``y2`` is y'', ...), rational
constants, ``exp``/``log`` and applications of opaque unknown functions.
Everything here is exact: no floats ever enter a canonical form.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import sympy as sp

X = sp.Symbol("x")
Y = sp.Symbol("y")


class UnknownFunction(sp.Function):
    """Opaque arbitrary function of one argument (F, f, F', ...)."""

    nargs = 1
    base_name: str = ""
    derivative_order: int = 0

    def fdiff(self, argindex=1):
        return unknown_function(self.base_name, self.derivative_order + 1)(self.args[0])


def unknown_function(name: str, order: int = 0) -> type:
    """Return the (cached) function head for ``name`` differentiated ``order`` times."""
    if order < 0:
        raise ValueError("derivative order must be >= 0")
    return _unknown_head(name, int(order))


@lru_cache(maxsize=None)
def _unknown_head(name: str, order: int) -> type:
    head = name + "'" * order
    return type(head, (UnknownFunction,), {"base_name": name, "derivative_order": order})


@lru_cache(maxsize=None)
def jet(k: int) -> sp.Symbol:
    """Jet coordinate y^(k); ``jet(0)`` is y itself."""
    if k < 0:
        raise ValueError("jet order must be >= 0")
    return Y if k == 0 else sp.Symbol(f"y{k}")


def jet_order(sym) -> int | None:
    if sym == Y:
        return 0
    name = getattr(sym, "name", "")
    if isinstance(sym, sp.Symbol) and name.startswith("y") and name[1:].isdigit():
        return int(name[1:])
    return None


def max_jet_order(e) -> int:
    """Highest jet order occurring in ``e`` (-1 if it is free of y and its jets)."""
    orders = [jet_order(s) for s in sp.sympify(e).free_symbols]
    orders = [k for k in orders if k is not None]
    return max(orders, default=-1)


def unknown_applications(e) -> set:
    return {a for a in sp.sympify(e).atoms(sp.Function) if isinstance(a, UnknownFunction)}


def unknown_names(e) -> set[str]:
    return {a.base_name for a in unknown_applications(e)}


def _rebuild(e):
    if e.is_Atom:
        return e
    if isinstance(e, (UnknownFunction, sp.exp, sp.log)):
        return e.func(canonicalize(e.args[0]))
    return e.func(*[_rebuild(a) for a in e.args])


def canonicalize(e) -> sp.Expr:
    """Unique normal form: arguments of function nodes normalized first, then
    the whole expression brought to a reduced fraction and distributed over its
    denominator."""
    e = sp.sympify(e)
    if e.is_Atom:
        return e
    e = _rebuild(e)
    return sp.expand(sp.cancel(e))


def is_zero(e) -> bool:
    return canonicalize(e) == 0


def structurally_equal(a, b) -> bool:
    return canonicalize(a) == canonicalize(b)


def total_derivative(e) -> sp.Expr:
    """D_x e = e_x + y' e_y + y'' e_y' + ...; chain rule through unknown functions."""
    e = sp.sympify(e)
    result = sp.diff(e, X)
    for k in range(max_jet_order(e) + 1):
        result += jet(k + 1) * sp.diff(e, jet(k))
    return canonicalize(result)


def substitute(e, bindings: Mapping) -> sp.Expr:
    """Simultaneous substitution followed by canonicalization."""
    return canonicalize(sp.sympify(e).subs(dict(bindings), simultaneous=True))


def instantiate(e, functions: Mapping[str, sp.Lambda]) -> sp.Expr:
    """Replace every application of an unknown function (and its formal
    derivatives) by a concrete one-argument ``sympy.Lambda``."""
    e = sp.sympify(e)
    reps = {}
    for app in unknown_applications(e):
        lam = functions.get(app.base_name)
        if lam is None:
            continue
        s = lam.variables[0]
        body = sp.diff(lam.expr, s, app.derivative_order)
        reps[app] = body.subs(s, app.args[0])
    # innermost applications first so nested arguments get replaced too
    for app in sorted(reps, key=sp.count_ops):
        e = e.xreplace({app: reps[app]})
        reps = {k: v.xreplace({app: reps[app]}) for k, v in reps.items()}
    return canonicalize(e)


def denominators(e) -> list[sp.Expr]:
    """Irreducible denominator factors of ``e`` and of every nested argument."""
    e = sp.sympify(e)
    found: list[sp.Expr] = []
    pieces = [e] + [a.args[0] for a in e.atoms(sp.Function)]
    for p in pieces:
        _, den = sp.fraction(sp.together(p))
        for fac, _mult in sp.factor_list(den)[1]:
            if fac.free_symbols and fac not in found:
                found.append(fac)
    for a in e.atoms(sp.log):
        if a.args[0] not in found:
            found.append(a.args[0])
    return found


@dataclass(frozen=True)
class Ode:
    """Explicit scalar ODE  y^(order) = rhs(x, y, y', ..., y^(order-1))."""

    order: int
    rhs: sp.Expr
    unknowns: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("ODE order must be >= 1")
        rhs = canonicalize(self.rhs)
        if max_jet_order(rhs) >= self.order:
            raise ValueError(
                f"rhs of an order-{self.order} ODE contains y^({max_jet_order(rhs)})"
            )
        object.__setattr__(self, "rhs", rhs)
        names = tuple(sorted(set(self.unknowns) | unknown_names(rhs)))
        object.__setattr__(self, "unknowns", names)

    @property
    def top(self) -> sp.Symbol:
        return jet(self.order)

    @property
    def residual(self) -> sp.Expr:
        return self.top - self.rhs

    def denominators(self) -> list[sp.Expr]:
        return denominators(self.rhs)

    def instantiate(self, functions: Mapping[str, sp.Lambda]) -> "Ode":
        return Ode(self.order, instantiate(self.rhs, functions))

    def same_as(self, other: "Ode") -> bool:
        return self.order == other.order and structurally_equal(self.rhs, other.rhs)


def solve_for_top(lhs, rhs, order: int | None = None) -> Ode:
    """Turn ``lhs = rhs`` into explicit form by solving for the highest jet,
    which has to enter linearly and outside every function node."""
    eq = canonicalize(sp.sympify(lhs) - sp.sympify(rhs))
    n = max_jet_order(eq) if order is None else order
    if n < 1:
        raise ValueError("equation contains no derivative of y")
    top = jet(n)
    for node in eq.atoms(sp.Function):
        if top in node.free_symbols:
            raise ValueError(f"y^({n}) occurs inside {node.func}; cannot solve explicitly")
    num = sp.numer(sp.together(eq))
    poly = sp.Poly(sp.expand(num), top)
    if poly.degree() != 1:
        raise ValueError(f"equation is not linear in y^({n})")
    a, b = poly.all_coeffs()
    return Ode(n, canonicalize(-b / a))


def _is_opaque(node) -> bool:
    if isinstance(node, (UnknownFunction, sp.exp, sp.log)):
        return True
    return node.is_Pow and not node.exp.is_Integer


def freeze_nodes(e, keep=()) -> tuple[sp.Expr, dict]:
    """Replace function nodes and fractional powers by fresh symbols so that
    ``e`` becomes rational in plain symbols. Returns the frozen expression and
    the symbol -> node map."""
    table: dict = {}
    keep = set(keep)

    def value(node):
        if node not in table:
            table[node] = sp.Dummy("n")
        return table[node]

    frozen = sp.sympify(e).replace(
        lambda n: _is_opaque(n) and not (n.free_symbols & keep), value
    )
    return frozen, {v: k for k, v in table.items()}


def identity_equations(e, unknowns) -> list[sp.Expr]:
    """Linear conditions on ``unknowns`` under which ``e`` vanishes identically
    in every other symbol, treating function nodes as independent.

    Sufficient (and for the rational cases used here also necessary) for
    ``e == 0`` as a function of x, y and the jets.
    """
    unknowns = list(unknowns)
    e = canonicalize(e)
    if e == 0:
        return []
    frozen, _ = freeze_nodes(e, keep=unknowns)
    num = sp.numer(sp.together(frozen))
    gens = sorted(num.free_symbols - set(unknowns), key=sp.default_sort_key)
    if not gens:
        return [sp.expand(num)]
    poly = sp.Poly(sp.expand(num), *gens)
    return [c for c in poly.coeffs() if c != 0]


def solve_identity(e, unknowns) -> dict | None:
    """Solve ``e == 0`` identically for ``unknowns``; None when inconsistent.

    Unknowns not fixed by the identity are left out of the returned dict.
    """
    eqs = identity_equations(e, unknowns)
    if not eqs:
        return {}
    sol = sp.solve(eqs, list(unknowns), dict=True)
    if not sol:
        return None
    return sol[0]


def antiderivative(e, var=X) -> sp.Expr:
    """Term-by-term antiderivative for Laurent polynomials with rational
    exponents (1/var integrates to log) and pure exponentials exp(c*var)."""
    e = sp.expand(canonicalize(e))
    total = sp.Integer(0)
    for term in sp.Add.make_args(e):
        coeff, rest = term.as_independent(var, as_Add=False)
        if rest == 1:
            total += coeff * var
            continue
        base, p = rest.as_base_exp()
        if base == var and p.is_Rational:
            total += coeff * (sp.log(var) if p == -1 else var ** (p + 1) / (p + 1))
            continue
        if isinstance(rest, sp.exp):
            c = sp.diff(rest.args[0], var)
            if c != 0 and not c.has(var):
                total += coeff * rest / c
                continue
        raise ValueError(f"no closed antiderivative for term {term} in the kernel")
    return canonicalize(total)
