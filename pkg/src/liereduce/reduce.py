"""Reduction of order by point symmetries, with tracking of what happens to
the remaining generators (inherited as point symmetries, lost to nonlocal
form, or reappearing later)."""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Sequence

import sympy as sp

from .expr import (
    X,
    Y,
    Ode,
    canonicalize,
    identity_equations,
    jet,
    total_derivative,
)
from .lie import (
    SECTION_PARAM,
    AlgebraError,
    CommutatorTable,
    Straightening,
    TwoDimAlgebraType,
    VectorField,
    commutator,
    commutator_table,
    differential_invariants,
    in_span,
    is_symmetry,
    prolong,
    span_coefficients,
    straighten,
)

log = logging.getLogger(__name__)

POINT_INHERITED = "point-inherited"
POINT_NEW = "point-new"
NONLOCAL = "nonlocal"


class ReductionError(ValueError):
    pass


class NotASymmetry(ReductionError):
    pass


@dataclass(frozen=True)
class SymmetryStatus:
    name: str
    status: str
    restriction: VectorField | None = None
    note: str = ""

    @property
    def is_point(self) -> bool:
        return self.status != NONLOCAL


@dataclass
class ReductionStep:
    level: int
    parent: Ode
    generator: VectorField
    u: sp.Expr
    v: sp.Expr
    invariants: list[sp.Expr]  # u, v, dv/du, ..., in parent jets
    child: Ode
    statuses: list[SymmetryStatus]

    def restrictions(self) -> list[VectorField]:
        return [s.restriction for s in self.statuses if s.restriction is not None]


@dataclass
class ReductionPath:
    source: Ode
    steps: list[ReductionStep] = field(default_factory=list)
    terminal_symmetries: list[VectorField] = field(default_factory=list)

    @property
    def terminal(self) -> Ode:
        return self.steps[-1].child if self.steps else self.source

    @property
    def unknowns(self) -> set[str]:
        names = set(self.source.unknowns)
        for st in self.steps:
            names |= set(st.child.unknowns)
        return names

    @property
    def quadrature_complete(self) -> bool:
        return self.terminal.order == 1 and bool(self.terminal_symmetries)


def base_name(name: str) -> str:
    return re.sub(r"~\(\d+\)$", "", name)


def restricted_name(name: str, level: int) -> str:
    return f"{base_name(name)}~({level})"


# ---------------------------------------------------------------- jets


def _solve_jets(base: dict, invariants: Sequence[sp.Expr], values: Sequence[sp.Symbol]) -> dict:
    """Write x, y, y', ..., y^(m) through new coordinates, given x and y
    (``base``) and equations invariants[k] = values[k] (k = 0..m-1), where
    invariants[k] contains y^(k+1) as its highest jet."""
    subs = dict(base)
    for k, (inv, val) in enumerate(zip(invariants, values), start=1):
        yk = jet(k)
        eq = canonicalize(sp.sympify(inv).subs(subs, simultaneous=True) - val)
        num = sp.numer(sp.together(eq))
        poly = sp.Poly(sp.expand(num), yk)
        if poly.degree() == 1:
            a, b = poly.all_coeffs()
            subs[yk] = canonicalize(-b / a)
            continue
        sols = sp.solve(eq, yk)
        if len(sols) != 1:
            raise ReductionError(f"implicit reduction: cannot solve for y^({k})")
        subs[yk] = canonicalize(sols[0])
    return subs


def _finite(e) -> bool:
    return not sp.sympify(e).has(sp.zoo, sp.oo, -sp.oo, sp.nan)


def _values(m: int) -> list[sp.Symbol]:
    return [sp.Symbol(f"v_{k}_") for k in range(m)]


def _rename_to_xy(e, m: int) -> sp.Expr:
    """s_ -> x, v_0_ -> y, v_k_ -> y^(k)."""
    vals = _values(m)
    mapping = {SECTION_PARAM: X}
    mapping.update({v: jet(k) for k, v in enumerate(vals)})
    return canonicalize(sp.sympify(e).xreplace(mapping))


# ---------------------------------------------------------------- one step


def reduce_once(
    e: Ode,
    f: VectorField,
    carried: Sequence[VectorField] = (),
    level: int = 1,
    st: Straightening | None = None,
) -> ReductionStep:
    """Rewrite y^(n) = rhs as an order n-1 equation for v(u), where u, v are
    the invariants of ``f``; the result is renamed back to (x, y).

    Every carried generator is classified by the normalizer condition
    [f, g] in span{f}; point ones get their restriction to the (u, v) plane.
    """
    n = e.order
    if n < 2:
        raise ReductionError("cannot reduce a first-order equation further")
    if not is_symmetry(f, e):
        raise NotASymmetry(f"{f.name} is not a symmetry of the equation")
    st = st or straighten(f)
    invs = differential_invariants(f, n, st)
    top = canonicalize(invs[n].subs(e.top, e.rhs))
    vals = _values(n)
    subs = _solve_jets(dict(st.section), invs[1:n], vals[: n - 1])
    phi = canonicalize(sp.sympify(top).subs(subs, simultaneous=True))
    leftover = phi.free_symbols & ({X, Y} | {jet(k) for k in range(1, n + 1)})
    if leftover or not _finite(phi):
        raise ReductionError(f"reduced right-hand side still depends on {sorted(map(str, leftover))}")
    child = Ode(n - 1, _rename_to_xy(phi, n), e.unknowns)

    statuses = []
    for g in carried:
        statuses.append(_status(f, g, invs, subs, level))
    return ReductionStep(level, e, f, invs[0], invs[1], invs, child, statuses)


def _status(f, g, invs, subs, level) -> SymmetryStatus:
    name = restricted_name(g.name, level)
    br = commutator(f, g)
    if not (br.is_zero or span_coefficients(br, [f]) is not None):
        from .parse import format_vector_field

        note = f"[{f.name},{g.name}] = {format_vector_field(br)} is not in span{{{f.name}}}"
        return SymmetryStatus(name, NONLOCAL, None, note)
    pg = prolong(g, 1)
    xi = canonicalize(sp.sympify(pg(invs[0])).subs(subs, simultaneous=True))
    eta = canonicalize(sp.sympify(pg(invs[1])).subs(subs, simultaneous=True))
    left = (xi.free_symbols | eta.free_symbols) & {X, Y, jet(1), jet(2)}
    if left:
        raise ReductionError(f"restriction of {g.name} is not a point field")
    restriction = VectorField(name, _rename_to_xy(xi, 1), _rename_to_xy(eta, 1), allow_zero=True)
    if restriction.is_zero:
        return SymmetryStatus(name, NONLOCAL, None, f"{g.name} restricts to zero")
    return SymmetryStatus(name, POINT_INHERITED, restriction)


def inheritance_status(reducer, other, algebra: CommutatorTable | None = None) -> str:
    """Point-inherited iff [reducer, other] lies in span{reducer}.

    Works on vector fields, or on basis names of ``algebra``."""
    if algebra is not None and isinstance(reducer, str):
        i, j = algebra.index(reducer), algebra.index(other)
        br = algebra.bracket(i, j)
        ok = all(c == 0 for k, c in enumerate(br) if k != i)
        return POINT_INHERITED if ok else NONLOCAL
    br = commutator(reducer, other)
    if br.is_zero or span_coefficients(br, [reducer]) is not None:
        return POINT_INHERITED
    return NONLOCAL


def to_canonical_coordinates(e: Ode, f: VectorField, st: Straightening | None = None) -> tuple[Ode, Straightening]:
    """Same-order change of variables to (xbar, ybar), in which f = d/dybar."""
    st = st or straighten(f)
    return change_variables(e, st.xbar, st.ybar), st


def change_variables(e: Ode, xbar, ybar) -> Ode:
    """Rewrite the equation in new point coordinates (xbar, ybar)(x, y)."""
    n = e.order
    xb, yb = sp.Symbol("xb_"), sp.Symbol("yb_")
    sols = sp.solve([canonicalize(xbar) - xb, canonicalize(ybar) - yb], [X, Y], dict=True)
    if not sols:
        raise ReductionError("point transformation is not invertible")
    base = {X: canonicalize(sols[0][X]), Y: canonicalize(sols[0][Y])}
    dxb = total_derivative(xbar)
    jets = [canonicalize(total_derivative(ybar) / dxb)]
    for _ in range(1, n):
        jets.append(canonicalize(total_derivative(jets[-1]) / dxb))
    vals = _values(n)[1:]
    subs = _solve_jets(base, jets[: n - 1], vals[: n - 1])
    top = canonicalize(jets[n - 1].subs(e.top, e.rhs))
    rhs = canonicalize(sp.sympify(top).subs(subs, simultaneous=True))
    mapping = {xb: X, yb: Y}
    mapping.update({v: jet(k + 1) for k, v in enumerate(vals)})
    return Ode(n, canonicalize(rhs.xreplace(mapping)), e.unknowns)


def push_forward(g: VectorField, xbar, ybar) -> VectorField:
    """Express g in new coordinates (xbar, ybar)."""
    xb, yb = sp.Symbol("xb_"), sp.Symbol("yb_")
    sols = sp.solve([canonicalize(xbar) - xb, canonicalize(ybar) - yb], [X, Y], dict=True)
    if not sols:
        raise ReductionError("point transformation is not invertible")
    inv = {X: sols[0][X], Y: sols[0][Y]}
    xi = canonicalize(g(xbar).subs(inv, simultaneous=True)).xreplace({xb: X, yb: Y})
    eta = canonicalize(g(ybar).subs(inv, simultaneous=True)).xreplace({xb: X, yb: Y})
    return VectorField(g.name, xi, eta)


def choose_reduction_order(algebra: TwoDimAlgebraType) -> tuple[VectorField, VectorField]:
    """Derived-algebra element first, so the other one is inherited."""
    xh, yh = algebra.basis
    return xh, yh


# ---------------------------------------------------------------- ansatz search


def ansatz_monomials(degree: int, allow_inverse: bool = True) -> list[sp.Expr]:
    low = -degree if allow_inverse else 0
    out = []
    for j in range(degree + 1):
        for i in range(low, degree + 1):
            if i + j <= degree:
                out.append(X**i * Y**j)
    return out


def detect_point_symmetries(e: Ode, degree_bound: int = 2, allow_inverse: bool = True) -> list[VectorField]:
    """Basis of the point symmetries with xi, eta in the span of the ansatz
    monomials x^i y^j (0 <= j, i + j <= degree, i >= -degree when inverse
    powers of x are admitted).

    Unknown functions are kept formal, so every field returned is a symmetry
    for all choices of them.
    """
    mons = ansatz_monomials(degree_bound, allow_inverse)
    a = sp.symbols(f"a0:{len(mons)}")
    b = sp.symbols(f"b0:{len(mons)}")
    xi = sum(c * m for c, m in zip(a, mons))
    eta = sum(c * m for c, m in zip(b, mons))
    unknowns = list(a) + list(b)
    residual = _ansatz_residual(xi, eta, e)
    eqs = identity_equations(residual, unknowns)
    if not eqs:
        basis_vecs = [sp.Matrix([int(i == k) for i in range(len(unknowns))]) for k in range(len(unknowns))]
    else:
        mat = sp.Matrix([[sp.expand(q).coeff(u) for u in unknowns] for q in eqs])
        basis_vecs = mat.nullspace()
    fields = []
    for idx, vec in enumerate(basis_vecs):
        vec = vec * sp.lcm([sp.denom(c) for c in vec])
        sub = dict(zip(unknowns, vec))
        fld = VectorField(f"S{idx + 1}", xi.subs(sub), eta.subs(sub))
        if not is_symmetry(fld, e):
            raise AssertionError(f"ansatz solution {fld} failed verification")
        fields.append(fld)
    return fields


def _ansatz_residual(xi, eta, e: Ode) -> sp.Expr:
    n = e.order
    dxi = total_derivative(xi)
    coeffs = []
    prev = eta
    for k in range(1, n + 1):
        prev = sp.expand(total_derivative(prev) - jet(k) * dxi)
        coeffs.append(prev)
    g = e.residual
    out = xi * sp.diff(g, X) + eta * sp.diff(g, Y)
    for k in range(1, n + 1):
        out += coeffs[k - 1] * sp.diff(g, jet(k))
    return sp.sympify(out).subs(e.top, e.rhs)


# ---------------------------------------------------------------- chains


def normalizer_reappearance(table: CommutatorTable, used: Sequence[str], candidate: str) -> bool:
    """The candidate normalizes span(used): it induces a point symmetry of the
    equation reduced by all of ``used``."""
    idx = [table.index(u) for u in used]
    c = table.index(candidate)
    for i in idx:
        br = table.bracket(i, c)
        if any(v != 0 for k, v in enumerate(br) if k not in idx):
            return False
    return True


def reduce_chain(
    e: Ode,
    algebra: Sequence[VectorField],
    order: Sequence[str] | None = None,
    detect: bool = True,
    degree_bound: int = 2,
    allow_inverse: bool = True,
) -> ReductionPath:
    """Reduce step by step, carrying every generator's status.

    ``order`` lists base names of generators; by default the input order is
    used, with two-dimensional algebras put in adapted order. Stops at order 1,
    when the order list is exhausted, or when no point generator is left.
    """
    for g in algebra:
        if not is_symmetry(g, e):
            raise NotASymmetry(f"{g.name} is not a symmetry of the equation")
    try:
        table = commutator_table(algebra)
    except AlgebraError:
        table = None
    if order is None:
        if len(algebra) == 2:
            from .lie import classify_2d

            first, _ = choose_reduction_order(classify_2d(*algebra))
            # keep user names; pick the input generator spanning the derived algebra
            names = [g.name for g in algebra]
            coeffs = span_coefficients(first, algebra)
            lead = names[0] if coeffs is None or coeffs[0] != 0 and coeffs[1] == 0 else names[1]
            if coeffs is not None and coeffs[0] != 0 and coeffs[1] != 0:
                algebra = [first.renamed(names[0]), algebra[1]] if coeffs[1] != 0 else algebra
                lead = names[0]
            order = [lead] + [n for n in names if n != lead]
        else:
            order = [g.name for g in algebra]
    order = list(order)
    known = {g.name for g in algebra}
    for name in order:
        if name not in known:
            raise ReductionError(f"unknown generator {name!r} in reduction order")

    path = ReductionPath(e)
    carried = list(algebra)
    nonlocal_names: list[str] = []
    used: list[str] = []
    current = e
    level = 0
    for name in order:
        if current.order <= 1:
            break
        match = [g for g in carried if base_name(g.name) == name]
        if not match:
            raise ReductionError(f"{name} is not a point symmetry at level {level}")
        f = match[0]
        others = [g for g in carried if g is not f]
        level += 1
        step = reduce_once(current, f, others, level)
        used.append(name)
        carried = step.restrictions()
        nonlocal_names += [base_name(s.name) for s in step.statuses if not s.is_point]
        if detect:
            new = _detect_new(step.child, carried, degree_bound, allow_inverse)
            for fld in new:
                label = _reappearing_label(table, used, nonlocal_names)
                if label is not None:
                    nonlocal_names.remove(label)
                    fname = restricted_name(label, level)
                    note = "reappeared point symmetry"
                else:
                    fname = f"H{len(path.steps) + 1}{len([s for s in step.statuses if s.status == POINT_NEW]) + 1}~({level})"
                    note = "new point symmetry"
                fld = fld.renamed(fname)
                step.statuses.append(SymmetryStatus(fname, POINT_NEW, fld, note))
                carried.append(fld)
        path.steps.append(step)
        current = step.child
    path.terminal_symmetries = list(carried)
    return path


def _detect_new(e: Ode, known: list[VectorField], degree: int, allow_inverse: bool) -> list[VectorField]:
    if e.order == 1 and not e.unknowns:
        # first-order equations have infinitely many symmetries; a concrete
        # one would flood the ansatz space, so only formal searches run here
        pass
    found = detect_point_symmetries(e, degree, allow_inverse)
    basis = list(known)
    new = []
    for fld in found:
        if not in_span(fld, basis):
            basis.append(fld)
            new.append(fld)
    return new


def _reappearing_label(table, used, nonlocal_names) -> str | None:
    if table is None:
        return None
    for cand in nonlocal_names:
        if normalizer_reappearance(table, used, cand):
            return cand
    return None


# ---------------------------------------------------------------- path skeletons


@dataclass(frozen=True)
class SkeletonLevel:
    order: int
    reducer: str | None
    inherited: tuple[str, ...]
    new: tuple[str, ...]
    nonlocal_: tuple[str, ...]

    @property
    def point(self) -> tuple[str, ...]:
        return self.inherited + self.new


@dataclass(frozen=True)
class PathSkeleton:
    reducers: tuple[str, ...]
    levels: tuple[SkeletonLevel, ...]
    quadrature_complete: bool
    case2: bool = False
    marked: bool = False

    def level_of_order(self, n: int) -> SkeletonLevel | None:
        for lv in self.levels:
            if lv.order == n:
                return lv
        return None


def _level_status(table, used, previous: SkeletonLevel | None):
    rest = [n for n in table.names if n not in used]
    inherited, new, nonloc = [], [], []
    for name in rest:
        point = normalizer_reappearance(table, used, name)
        was_point = previous is None or name in previous.point
        if point and was_point:
            inherited.append(name)
        elif point:
            new.append(name)
        else:
            nonloc.append(name)
    return tuple(inherited), tuple(new), tuple(nonloc)


def enumerate_paths(table: CommutatorTable, source_order: int) -> list[PathSkeleton]:
    """All sequences of one-generator reductions of an order-``source_order``
    equation admitting the algebra, labelled structurally.

    A generator is a point symmetry after reducing by span(used) iff it
    normalizes that span; it is nonlocal otherwise and comes back as soon as
    the condition holds again. ``marked`` flags the paths through a
    third-order equation with a two-dimensional algebra whose every
    continuation reaches a first-order equation with a known symmetry with
    the second-order stage keeping exactly one point symmetry.
    """
    if table.dim > source_order:
        raise ValueError("algebra dimension exceeds the source order")
    root = SkeletonLevel(source_order, None, tuple(table.names), (), ())
    paths: list[PathSkeleton] = []

    def walk(used: list[str], levels: list[SkeletonLevel]):
        cur = levels[-1]
        if cur.order == 1 or not cur.point:
            complete = cur.order == 1 and bool(cur.point)
            paths.append(PathSkeleton(tuple(used), tuple(levels), complete))
            return
        for r in cur.point:
            nxt_used = used + [r]
            inh, new, nl = _level_status(table, nxt_used, cur)
            walk(nxt_used, levels + [SkeletonLevel(cur.order - 1, r, inh, new, nl)])

    walk([], [root])
    return _mark(paths)


def _is_case2(p: PathSkeleton) -> bool:
    third = p.level_of_order(3)
    second = p.level_of_order(2)
    if third is None or second is None or not p.quadrature_complete:
        return False
    return len(third.point) == 2 and len(second.point) == 1 and not second.new


def _mark(paths: list[PathSkeleton]) -> list[PathSkeleton]:
    def third_prefix(p: PathSkeleton):
        for i, lv in enumerate(p.levels):
            if lv.order == 3:
                return p.reducers[:i]
        return None

    groups: dict = {}
    for p in paths:
        groups.setdefault(third_prefix(p), []).append(p)
    out = []
    for p in paths:
        case2 = _is_case2(p)
        prefix = third_prefix(p)
        node_ok = prefix is not None and all(_is_case2(q) for q in groups[prefix])
        out.append(PathSkeleton(p.reducers, p.levels, p.quadrature_complete, case2, case2 and node_ok))
    return out


def format_skeleton(p: PathSkeleton) -> str:
    parts = []
    for lv in p.levels:
        pt = ",".join(lv.inherited + tuple(n + "*" for n in lv.new)) or "-"
        nl = ",".join(n + "^N" for n in lv.nonlocal_)
        head = f"D{lv.order}" + (f" <={lv.reducer}" if lv.reducer else "")
        parts.append(f"{head}: [{pt}]" + (f" {nl}" if nl else ""))
    flag = " (quadrature)" if p.quadrature_complete else ""
    mark = " ▲" if p.marked else ""
    return " -> ".join(parts) + flag + mark
