"""Point vector fields on the (x, y) plane and their calculus."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import sympy as sp

from .expr import (
    X,
    Y,
    Ode,
    antiderivative,
    canonicalize,
    is_zero,
    jet,
    max_jet_order,
    solve_identity,
    substitute,
    total_derivative,
)


class UnsupportedClass(ValueError):
    """Coefficients outside the class handled by the characteristic solver."""


class AlgebraError(ValueError):
    pass


@dataclass(frozen=True)
class VectorField:
    """xi(x, y) d/dx + eta(x, y) d/dy."""

    name: str
    xi: sp.Expr
    eta: sp.Expr
    allow_zero: bool = field(default=False, compare=False, repr=False)

    def __post_init__(self):
        xi, eta = canonicalize(self.xi), canonicalize(self.eta)
        if max_jet_order(xi) > 0 or max_jet_order(eta) > 0:
            raise ValueError(f"{self.name}: point-symmetry coefficients may not contain jets")
        if xi == 0 and eta == 0 and not self.allow_zero:
            raise ValueError(f"{self.name}: zero vector field")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "eta", eta)

    @property
    def is_zero(self) -> bool:
        return self.xi == 0 and self.eta == 0

    def __call__(self, e) -> sp.Expr:
        """Action on a function of (x, y)."""
        e = sp.sympify(e)
        return canonicalize(self.xi * sp.diff(e, X) + self.eta * sp.diff(e, Y))

    def renamed(self, name: str) -> "VectorField":
        return VectorField(name, self.xi, self.eta, allow_zero=self.allow_zero)

    def scaled(self, c, name: str | None = None) -> "VectorField":
        return VectorField(name or self.name, c * self.xi, c * self.eta)

    def same_field(self, other: "VectorField") -> bool:
        return is_zero(self.xi - other.xi) and is_zero(self.eta - other.eta)

    def __str__(self) -> str:
        from .parse import format_vector_field

        return format_vector_field(self)


@dataclass(frozen=True)
class ProlongedField:
    base: VectorField
    coefficients: tuple[sp.Expr, ...]  # eta^(1), ..., eta^(k)

    @property
    def order(self) -> int:
        return len(self.coefficients)

    def __call__(self, e) -> sp.Expr:
        """Action of the prolonged generator on a function of x, y and jets."""
        e = sp.sympify(e)
        n = max_jet_order(e)
        if n > self.order:
            raise ValueError(f"prolongation of order {self.order} applied to y^({n})")
        out = self.base.xi * sp.diff(e, X) + self.base.eta * sp.diff(e, Y)
        for k in range(1, n + 1):
            out += self.coefficients[k - 1] * sp.diff(e, jet(k))
        return canonicalize(out)


def prolong(f: VectorField, k: int) -> ProlongedField:
    if k < 1:
        raise ValueError("prolongation order must be >= 1")
    dxi = total_derivative(f.xi)
    coeffs = []
    prev = f.eta
    for j in range(1, k + 1):
        prev = canonicalize(total_derivative(prev) - jet(j) * dxi)
        coeffs.append(prev)
    return ProlongedField(f, tuple(coeffs))


def commutator(a: VectorField, b: VectorField, name: str | None = None) -> VectorField:
    """[a, b] = ab - ba; the zero field is returned with ``is_zero`` set."""
    xi = a(b.xi) - b(a.xi)
    eta = a(b.eta) - b(a.eta)
    return VectorField(name or f"[{a.name},{b.name}]", xi, eta, allow_zero=True)


def symmetry_residual(f: VectorField, e: Ode) -> sp.Expr:
    pf = prolong(f, e.order)
    return canonicalize(substitute(pf(e.residual), {e.top: e.rhs}))


def is_symmetry(f: VectorField, e: Ode) -> bool:
    """Invariance of y^(n) = rhs under the n-th prolongation of ``f``, on
    solutions; identically in any unknown function and its derivatives."""
    return symmetry_residual(f, e) == 0


# ---------------------------------------------------------------- spans


def span_coefficients(target: VectorField, basis: Sequence[VectorField]) -> list | None:
    """Constants c with target = sum c_i basis_i, or None."""
    cs = sp.symbols(f"c0:{len(basis)}")
    xi = target.xi - sum(c * b.xi for c, b in zip(cs, basis))
    eta = target.eta - sum(c * b.eta for c, b in zip(cs, basis))
    t = sp.Dummy("t")
    sol = solve_identity(xi + t * eta, list(cs))
    if sol is None:
        return None
    values = [sol.get(c, sp.Integer(0)) for c in cs]
    values = [v.subs({c: 0 for c in cs}) for v in values]
    check_xi = xi.subs(dict(zip(cs, values)))
    check_eta = eta.subs(dict(zip(cs, values)))
    if not (is_zero(check_xi) and is_zero(check_eta)):
        return None
    return [sp.nsimplify(v) for v in values]


def in_span(target: VectorField, basis: Sequence[VectorField]) -> bool:
    if target.is_zero:
        return True
    if not basis:
        return False
    return span_coefficients(target, basis) is not None


def linearly_independent(fields: Sequence[VectorField]) -> bool:
    """Independence over the constants."""
    for i, f in enumerate(fields):
        if in_span(f, list(fields[:i])):
            return False
    return True


def pseudo_scalar(a: VectorField, b: VectorField) -> sp.Expr:
    return canonicalize(a.xi * b.eta - b.xi * a.eta)


# ---------------------------------------------------------------- tables


@dataclass
class CommutatorTable:
    """Structure constants: ``brackets[(i, j)]`` is the coefficient vector of
    [e_i, e_j] in the basis; only i < j is stored."""

    names: list[str]
    brackets: dict[tuple[int, int], tuple[Fraction, ...]] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def bracket(self, i: int, j: int) -> tuple[Fraction, ...]:
        zero = tuple(Fraction(0) for _ in self.names)
        if i == j:
            return zero
        if i < j:
            return self.brackets.get((i, j), zero)
        return tuple(-c for c in self.brackets.get((j, i), zero))

    def bracket_vectors(self, u, v) -> tuple[Fraction, ...]:
        out = [Fraction(0)] * self.dim
        for i, a in enumerate(u):
            if not a:
                continue
            for j, b in enumerate(v):
                if not b:
                    continue
                for k, c in enumerate(self.bracket(i, j)):
                    out[k] += a * b * c
        return tuple(out)

    def jacobi_defects(self) -> list[tuple[str, str, str]]:
        bad = []
        n = self.dim
        unit = [tuple(Fraction(int(i == k)) for i in range(n)) for k in range(n)]
        for i, j, k in itertools.combinations(range(n), 3):
            a, b, c = unit[i], unit[j], unit[k]
            s = [
                self.bracket_vectors(self.bracket_vectors(a, b), c),
                self.bracket_vectors(self.bracket_vectors(b, c), a),
                self.bracket_vectors(self.bracket_vectors(c, a), b),
            ]
            if any(sum(t[m] for t in s) != 0 for m in range(n)):
                bad.append((self.names[i], self.names[j], self.names[k]))
        return bad

    def nonzero(self) -> dict[tuple[str, str], dict[str, Fraction]]:
        out = {}
        for (i, j), vec in sorted(self.brackets.items()):
            terms = {self.names[k]: c for k, c in enumerate(vec) if c}
            if terms:
                out[(self.names[i], self.names[j])] = terms
        return out

    def format(self) -> str:
        from .parse import format_commutator_table

        return format_commutator_table(self)


def commutator_table(fields: Sequence[VectorField]) -> CommutatorTable:
    """Structure constants computed from the fields themselves."""
    names = [f.name for f in fields]
    table = CommutatorTable(names)
    for i, j in itertools.combinations(range(len(fields)), 2):
        br = commutator(fields[i], fields[j])
        if br.is_zero:
            continue
        coeffs = span_coefficients(br, fields)
        if coeffs is None:
            raise AlgebraError(f"[{names[i]},{names[j]}] is not in the span of the basis")
        table.brackets[(i, j)] = tuple(Fraction(int(sp.numer(c)), int(sp.denom(c))) for c in coeffs)
    return table


def diagonal_rescaling(
    computed: CommutatorTable, target: CommutatorTable, fixed: Sequence[str] = ()
) -> dict[str, Fraction] | None:
    """Nonzero constants s_i such that replacing e_i by s_i e_i turns the
    computed structure constants into the target ones; None if impossible.
    Elements named in ``fixed`` keep scale 1, as do any left free."""
    if computed.names != target.names:
        raise ValueError("tables must share the basis ordering")
    n = computed.dim
    s = list(sp.symbols(f"s0:{n}", nonzero=True))
    for name in fixed:
        s[computed.index(name)] = sp.Integer(1)
    eqs = []
    for i, j in itertools.combinations(range(n), 2):
        c = computed.bracket(i, j)
        p = target.bracket(i, j)
        for k in range(n):
            # [s_i e_i, s_j e_j] = s_i s_j c^k e_k = (s_i s_j c^k / s_k) (s_k e_k)
            lhs = s[i] * s[j] * sp.Rational(c[k].numerator, c[k].denominator)
            rhs = sp.Rational(p[k].numerator, p[k].denominator) * s[k]
            if lhs == 0 and rhs == 0:
                continue
            if lhs == 0 or rhs == 0:
                return None
            if not (lhs - rhs).free_symbols:
                if lhs != rhs:
                    return None
                continue
            eqs.append(lhs - rhs)
    if not eqs:
        return {name: Fraction(1) for name in computed.names}
    unknowns = [v for v in s if v.is_Symbol]
    for sol in sp.solve(eqs, unknowns, dict=True):
        free = {v: 1 for v in unknowns if v not in sol}
        vals = [sp.nsimplify(sp.sympify(sol.get(v, v)).subs(free)) for v in s]
        if all(v.is_Rational and v != 0 for v in vals):
            return {name: Fraction(int(v.p), int(v.q)) for name, v in zip(computed.names, vals)}
    return None


# ---------------------------------------------------------------- 2-dim algebras


@dataclass(frozen=True)
class TwoDimAlgebraType:
    tag: str  # I, II, III, IV
    basis: tuple[VectorField, VectorField]  # adapted (Xh, Yh)
    change_of_basis: tuple[tuple[sp.Expr, sp.Expr], tuple[sp.Expr, sp.Expr]]
    bracket: str  # "0" or "X"


CANONICAL_PAIRS = {
    "I": (VectorField("X", 0, 1), VectorField("Y", 1, 0)),
    "II": (VectorField("X", 0, 1), VectorField("Y", 0, X)),
    "III": (VectorField("X", 0, 1), VectorField("Y", 0, Y)),
    "IV": (VectorField("X", 0, 1), VectorField("Y", X, Y)),
}


def classify_2d(a: VectorField, b: VectorField) -> TwoDimAlgebraType:
    """Lie's four types of two-dimensional algebras of plane vector fields."""
    if not linearly_independent([a, b]):
        raise AlgebraError("dependent generators")
    br = commutator(a, b)
    if br.is_zero:
        p, q = sp.Integer(0), sp.Integer(0)
    else:
        coeffs = span_coefficients(br, [a, b])
        if coeffs is None:
            raise AlgebraError("not a 2-dimensional algebra: [X,Y] is not in span{X,Y}")
        p, q = coeffs
    transitive = pseudo_scalar(a, b) != 0
    one, zero = sp.Integer(1), sp.Integer(0)
    if p == 0 and q == 0:
        tag = "I" if transitive else "II"
        return TwoDimAlgebraType(tag, (a, b), ((one, zero), (zero, one)), "0")
    # [a, b] = p a + q b; pick Xh spanning the derived algebra and Yh with [Xh, Yh] = Xh
    if q != 0:
        m = ((p, q), (-1 / q, zero))
    else:
        m = ((one, zero), (zero, 1 / p))
    xh = VectorField(a.name, m[0][0] * a.xi + m[0][1] * b.xi, m[0][0] * a.eta + m[0][1] * b.eta)
    yh = VectorField(b.name, m[1][0] * a.xi + m[1][1] * b.xi, m[1][0] * a.eta + m[1][1] * b.eta)
    check = commutator(xh, yh)
    assert check.same_field(xh), "adapted basis construction failed"
    tag = "IV" if transitive else "III"
    return TwoDimAlgebraType(tag, (xh, yh), m, "X")


# ---------------------------------------------------------------- canonical coordinates


class Straightening(NamedTuple):
    """Canonical coordinates (xbar invariant, ybar with f(ybar) = 1) plus a
    cross-section of the orbits: x, y written through the value ``s`` of xbar."""

    xbar: sp.Expr
    ybar: sp.Expr
    section: dict


SECTION_PARAM = sp.Symbol("s_")


def _finite(e) -> bool:
    e = sp.sympify(e)
    return not e.has(sp.zoo, sp.oo, -sp.oo, sp.nan)


def _along_line(coef, dep, other):
    """Canonical data for coef(other, dep) * d/d(dep): returns (ybar, dep value on
    the section as a function of ``other``)."""
    coef = sp.factor(coef)
    if not coef.has(dep):
        return canonicalize(dep / coef), sp.Integer(0)
    poly = sp.Poly(sp.numer(sp.together(coef)), dep)
    den = sp.denom(sp.together(coef))
    if den.has(dep) or poly.degree() > 2:
        raise UnsupportedClass(f"coefficient {coef} outside the supported class")
    cs = [c / den for c in poly.all_coeffs()]
    if poly.degree() == 1:
        a, b = cs
        shift = canonicalize(b / a)
        return canonicalize(sp.log(dep + shift) / a), canonicalize(1 - shift)
    a = cs[0]
    roots = sp.roots(sp.Poly(poly.as_expr() / poly.LC(), dep))
    if sum(roots.values()) != 2 or any(r.has(sp.I) for r in roots):
        raise UnsupportedClass(f"coefficient {coef}: roots not in the kernel")
    rs = [canonicalize(r) for r, m in roots.items() for _ in range(m)]
    if is_zero(rs[0] - rs[1]):
        r = rs[0]
        return canonicalize(-1 / (a * (dep - r))), canonicalize(r + 1)
    r1, r2 = rs
    ybar = sp.log((dep - r1) / (dep - r2)) / (a * (r1 - r2))
    return canonicalize(ybar), canonicalize(r1 + (r1 - r2))


def _pick_point(nonzero, finite, var) -> sp.Integer:
    for v in (1, 2, 3, -1, 5, 7):
        vals = [sp.sympify(e).subs(var, v) for e in nonzero]
        rest = [sp.sympify(e).subs(var, v) for e in finite]
        if all(_finite(w) and w != 0 for w in vals) and all(_finite(w) for w in rest):
            return sp.Integer(v)
    raise UnsupportedClass("no regular cross-section point found")


def straighten(f: VectorField, manual: tuple | None = None) -> Straightening:
    """Canonical coordinates of ``f`` with an orbit cross-section.

    Supported without help: xi = 0 or eta = 0 with the other coefficient at
    most quadratic in its own variable, and xi(x) d/dx + (a(x) y + b(x)) d/dy
    (and the same with x, y swapped) whenever the quadratures close in the
    kernel. ``manual`` = (xbar, ybar) is verified, never trusted.
    """
    s = SECTION_PARAM
    if manual is not None:
        xbar, ybar = (canonicalize(m) for m in manual)
        sols = sp.solve([xbar - s, ybar], [X, Y], dict=True)
        if not sols:
            raise UnsupportedClass("cannot invert the supplied map on a cross-section")
        section = {X: canonicalize(sols[0][X]), Y: canonicalize(sols[0][Y])}
        result = Straightening(xbar, ybar, section)
    elif f.xi == 0:
        ybar, y0 = _along_line(f.eta, Y, X)
        if not _finite(ybar.subs(Y, y0)):
            raise UnsupportedClass("degenerate cross-section")
        result = Straightening(X, ybar, {X: s, Y: y0.subs(X, s)})
    elif f.eta == 0:
        ybar, x0 = _along_line(f.xi, X, Y)
        result = Straightening(Y, ybar, {X: x0.subs(Y, s), Y: s})
    else:
        try:
            result = _affine_case(f.xi, f.eta, X, Y)
        except UnsupportedClass:
            result = _affine_case(f.eta, f.xi, Y, X)
    if not (is_zero(f(result.xbar)) and is_zero(f(result.ybar) - 1)):
        raise UnsupportedClass(f"{f.name}: straightening map failed verification")
    return result


def _affine_case(xi, eta, indep, dep):
    """xi(indep) d/indep + (a(indep) dep + b(indep)) d/dep."""
    if xi.has(dep) or sp.diff(eta, dep, 2) != 0:
        raise UnsupportedClass("coefficients outside the supported class")
    a = canonicalize(sp.diff(eta, dep))
    b = canonicalize(eta - a * dep)
    try:
        psi = antiderivative(1 / xi, indep)
        big_a = antiderivative(a / xi, indep)
        mu = canonicalize(sp.exp(-big_a))
        k = antiderivative(mu * b / xi, indep) if b != 0 else sp.Integer(0)
    except ValueError as exc:
        raise UnsupportedClass(str(exc)) from None
    xbar = canonicalize(mu * dep - k)
    p0 = _pick_point([xi, mu], [k, psi], indep)
    s = SECTION_PARAM
    dep0 = canonicalize((s + k.subs(indep, p0)) / mu.subs(indep, p0))
    return Straightening(xbar, psi, {indep: p0, dep: dep0})


def canonical_coordinates(f: VectorField, manual: tuple | None = None) -> tuple[sp.Expr, sp.Expr]:
    st = straighten(f, manual)
    return st.xbar, st.ybar


def _affine_in(e, var) -> bool:
    e = canonicalize(e)
    if var in sp.denom(sp.together(e)).free_symbols:
        return False
    return is_zero(sp.diff(e, var, 2))


def first_invariant(f: VectorField, st: Straightening | None = None) -> sp.Expr:
    """First-order differential invariant D(ybar)/D(xbar), replaced by its
    reciprocal when only the latter is affine in y'."""
    st = st or straighten(f)
    w = canonicalize(total_derivative(st.ybar) / total_derivative(st.xbar))
    if not _affine_in(w, jet(1)):
        inv = canonicalize(1 / w)
        if _affine_in(inv, jet(1)):
            return inv
    return w


def differential_invariants(f: VectorField, up_to: int, st: Straightening | None = None) -> list[sp.Expr]:
    """[I0, I1, ..., I_up_to]: I0 = xbar, I1 the first-order invariant and
    I_{k+1} = D(I_k) / D(I0), i.e. successive derivatives of v with respect to u."""
    st = st or straighten(f)
    invs = [st.xbar]
    if up_to >= 1:
        invs.append(first_invariant(f, st))
    du = total_derivative(st.xbar)
    for _ in range(2, up_to + 1):
        invs.append(canonicalize(total_derivative(invs[-1]) / du))
    pf = prolong(f, max(up_to, 1))
    for inv in invs:
        if not is_zero(pf(inv)):
            raise AssertionError(f"invariant {inv} not annihilated by {f.name}")
    return invs


def gauge_normalize(f: VectorField) -> tuple[VectorField, dict]:
    """Remove g(x) from d/dx + g(x) d/dy by ybar = y - G(x) with G' = g
    (G polynomial)."""
    if not is_zero(f.xi - 1) or f.eta.has(Y):
        raise ValueError(f"{f.name} is not of the form d/dx + g(x) d/dy")
    g = f.eta
    if g == 0:
        return VectorField(f.name, 1, 0), {"x": X, "y": Y}
    if not g.is_polynomial(X):
        raise ValueError("non-polynomial gauge term")
    big_g = antiderivative(g, X)
    ybar = canonicalize(Y - big_g)
    assert is_zero(f(ybar)) and is_zero(f(X) - 1)
    return VectorField(f.name, 1, 0), {"x": X, "y": ybar}
