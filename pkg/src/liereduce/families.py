"""Third-order equations with a two-dimensional symmetry algebra whose first
reduction keeps a second point symmetry.

Every combination of a canonical pair (types I to IV) with a canonical
second-order shape (rows A to D) is pushed through the same pipeline: reduce
by the first generator, straighten the restriction of the second one, impose
the row shape in those coordinates and lift the result back to third order.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import sympy as sp

from .expr import (
    X,
    Y,
    Ode,
    UnknownFunction,
    canonicalize,
    jet,
    solve_for_top,
    solve_identity,
    unknown_applications,
    unknown_function,
)
from .lie import (
    CANONICAL_PAIRS,
    AlgebraError,
    VectorField,
    classify_2d,
    differential_invariants,
    is_symmetry,
    straighten,
)
from .reduce import change_variables, detect_point_symmetries, reduce_once

ALGEBRA_TAGS = ("I", "II", "III", "IV")
ROW_TAGS = ("A", "B", "C", "D")
THREE_SYMMETRIES = "existence of three point symmetries"

f = unknown_function("f")
_S = sp.Symbol("s_arg")


class FamilyId(NamedTuple):
    algebra: str
    row: str

    def __str__(self):
        return self.algebra + self.row


# the added generator of row A, and of row B over type II, is the prolongation
# of a point field, so these classes carry a three-dimensional algebra
REJECTED = frozenset([FamilyId(a, "A") for a in ALGEBRA_TAGS] + [FamilyId("II", "B")])


@dataclass(frozen=True)
class FamilyTemplate:
    family: FamilyId
    ode: Ode
    pair: tuple[VectorField, VectorField]
    reduced: Ode  # row shape in the straightened coordinates (v as x, u as y)
    coordinates: tuple[sp.Expr, sp.Expr]  # (u, v) through x, y', y''
    symmetries: tuple[VectorField, ...] = ()  # found by the degree-2 ansatz


@dataclass(frozen=True)
class Rejection:
    family: FamilyId
    reason: str
    ode: Ode
    symmetries: tuple[VectorField, ...]


def row_shape(row: str) -> Ode:
    """u'' = G(v, u') with v written as x, u as y, u' as y'."""
    v, up = X, jet(1)
    g = {
        "A": f(up),
        "B": f(v),
        "C": f(up) / v,
        "D": up * f(v),
    }[row]
    return Ode(2, g, ("f",))


def _reduction_plane(x_hat: VectorField, y_hat: VectorField, parent: Ode):
    step = reduce_once(parent, x_hat, [y_hat])
    status = step.statuses[0]
    if status.restriction is None:
        raise AlgebraError("second generator does not survive the first reduction")
    st = straighten(status.restriction)
    return step, st


def _plane_equation() -> Ode:
    # y''' = 0 admits every canonical pair; only its reduction plane is used
    return Ode(3, sp.Integer(0))


def derive_family_template(algebra: str, row: str) -> FamilyTemplate | Rejection:
    if algebra not in ALGEBRA_TAGS or row not in ROW_TAGS:
        raise ValueError(f"unknown family {algebra}{row}")
    fid = FamilyId(algebra, row)
    x_hat, y_hat = CANONICAL_PAIRS[algebra]
    step, st = _reduction_plane(x_hat, y_hat, _plane_equation())
    # (U, V) = (first invariant, second invariant) are the child's (x, y)
    inv = differential_invariants(x_hat, 3)
    shape = row_shape(row)
    # back from straightened (v, u) = (xbar, ybar) to the child's (x, y)
    xb, yb = sp.Symbol("xb_"), sp.Symbol("yb_")
    sol = sp.solve([st.xbar - xb, st.ybar - yb], [X, Y], dict=True)[0]
    child = change_variables(shape, sol[X].xreplace({xb: X, yb: Y}), sol[Y].xreplace({xb: X, yb: Y}))
    # lift: the child's (x, y, y', y'') are (I0, I1, I2, I3) of the first generator
    lift = {X: inv[0], Y: inv[1], jet(1): inv[2]}
    lhs = inv[3]
    rhs = child.rhs.subs(lift, simultaneous=True)
    ode = solve_for_top(lhs, rhs, 3)
    ode = Ode(3, absorb(ode.rhs), ("f",))
    u = canonicalize(st.ybar.subs({X: inv[0], Y: inv[1]}, simultaneous=True))
    v = canonicalize(st.xbar.subs({X: inv[0], Y: inv[1]}, simultaneous=True))
    for g in (x_hat, y_hat):
        assert is_symmetry(g, ode), f"{g} is not a symmetry of the {fid} template"
    syms = tuple(detect_point_symmetries(ode, 2, True))
    if fid in REJECTED:
        return Rejection(fid, THREE_SYMMETRIES, ode, syms)
    return FamilyTemplate(fid, ode, (x_hat, y_hat), shape, (u, v), syms)


def admissible_families() -> list[FamilyTemplate]:
    out = []
    for a in ALGEBRA_TAGS:
        for r in ROW_TAGS:
            t = derive_family_template(a, r)
            if isinstance(t, FamilyTemplate):
                out.append(t)
    return out


# ---------------------------------------------------------------- relabeling


def _single_application(e) -> UnknownFunction:
    apps = [a for a in unknown_applications(e)]
    if len(apps) != 1 or apps[0].derivative_order != 0:
        raise ValueError("expected exactly one application of one unknown function")
    return apps[0]


def absorb(e) -> sp.Expr:
    """Cosmetic relabeling A + B*f(1/p) -> A + B'*h(p), done only when a power
    of p factors out of B taking all of p's variables with it."""
    e = canonicalize(e)
    app = _single_application(e)
    num, den = sp.fraction(sp.together(app.args[0]))
    if num.free_symbols or not den.free_symbols:
        return e
    p = canonicalize(den / num)
    coeff = sp.expand(e).coeff(app)
    rest = canonicalize(sp.expand(e) - coeff * app)
    for k in range(-4, 5):
        c = canonicalize(coeff / p**k)
        if not (c.free_symbols & p.free_symbols):
            return canonicalize(rest + c * type(app)(p))
    return e


class AffineRelabel(NamedTuple):
    """candidate(h) = target(f) with h(s) = c*f(a*s + b) + d."""

    a: sp.Expr
    b: sp.Expr
    c: sp.Expr
    d: sp.Expr


def match_modulo_affine(candidate, target) -> AffineRelabel | None:
    """Is ``candidate`` (one unknown-function application) the ``target``
    after an invertible affine change of the function's argument and value?"""
    candidate, target = canonicalize(candidate), canonicalize(target)
    try:
        ca, ta = _single_application(candidate), _single_application(target)
    except ValueError:
        return None
    a, b, c, d = sp.symbols("a_ b_ c_ d_")
    sol = solve_identity(a * ca.args[0] + b - ta.args[0], [a, b])
    if not sol or sol.get(a, a) == 0 or a not in sol:
        return None
    a_v, b_v = sol[a], sol.get(b, sp.Integer(0))
    marker = sp.Symbol("F_node_")
    cand = candidate.xreplace({ca: c * marker + d})
    targ = target.xreplace({ta: marker})
    sol2 = solve_identity(cand - targ, [c, d])
    if sol2 is None or c not in sol2 or sol2[c] == 0:
        return None
    return AffineRelabel(a_v, b_v, sol2[c], sol2.get(d, sp.Integer(0)))


def same_modulo_affine(candidate, target) -> bool:
    return match_modulo_affine(candidate, target) is not None


# ---------------------------------------------------------------- matching


def _shape_tests(g) -> list[str]:
    v, up = X, jet(1)
    found = []
    if canonicalize(sp.diff(g, v)) == 0:
        found.append("A")
    if canonicalize(sp.diff(g, up)) == 0:
        found.append("B")
    if canonicalize(sp.diff(v * g, v)) == 0:
        found.append("C")
    if canonicalize(sp.diff(g / up, up)) == 0:
        found.append("D")
    return found


def match_family(e: Ode, a: VectorField, b: VectorField) -> FamilyId | None:
    """Which family ``e`` belongs to, given two point symmetries spanning a
    two-dimensional algebra; None when the straightened reduced equation has
    none of the row shapes B, C, D (or only the degenerate row A).

    For an abelian pair ``a`` is taken as the generator reduced first.
    """
    if e.order != 3:
        raise ValueError("match_family expects a third-order equation")
    for g in (a, b):
        if not is_symmetry(g, e):
            raise ValueError("generators are not symmetries")
    kind = classify_2d(a, b)  # raises AlgebraError for non-algebras
    x_hat, y_hat = kind.basis
    step, st = _reduction_plane(x_hat, y_hat, e)
    straight = change_variables(step.child, st.xbar, st.ybar)
    g = straight.rhs
    if Y in g.free_symbols:
        return None
    for row in _shape_tests(g):
        if row == "A" or (kind.tag, row) == ("II", "B"):
            continue
        return FamilyId(kind.tag, row)
    return None
