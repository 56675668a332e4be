import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from liereduce.expr import X, Y, is_zero, jet, structurally_equal
from liereduce.lie import (
    CANONICAL_PAIRS,
    AlgebraError,
    UnsupportedClass,
    VectorField,
    classify_2d,
    commutator,
    commutator_table,
    diagonal_rescaling,
    differential_invariants,
    first_invariant,
    gauge_normalize,
    in_span,
    is_symmetry,
    prolong,
    straighten,
)
from liereduce.parse import parse_commutator_table, parse_ode, parse_vector_field as P

y1, y2, y3 = jet(1), jet(2), jet(3)


def test_prolongation_of_known_fields():
    assert prolong(P("x^2*d/dy"), 2).coefficients == (2 * X, 2)
    # scaling x -> e^t x, y -> e^t y leaves y' alone and divides y^(k) by e^((k-1) t)
    assert prolong(P("x*d/dx + y*d/dy"), 3).coefficients == (0, -y2, -2 * y3)
    # y -> e^t y scales every jet
    assert prolong(P("y*d/dy"), 2).coefficients == (y1, y2)


def test_prolongation_against_the_group_action():
    # inversion-free projective field: x -> x/(1 - t x), y -> y/(1 - t x)
    f = P("x^2*d/dx + x*y*d/dy")
    t = sp.Symbol("t")
    xt = X / (1 - t * X)
    yt = Y / (1 - t * X)
    # transformed slope dyt/dxt along a curve, differentiated at t = 0
    slope = (sp.diff(yt, X) + sp.diff(yt, Y) * y1) / (sp.diff(xt, X) + sp.diff(xt, Y) * y1)
    eta1 = sp.diff(slope, t).subs(t, 0)
    assert structurally_equal(prolong(f, 1).coefficients[0], eta1)


def test_zero_and_jet_fields_rejected():
    with pytest.raises(ValueError):
        VectorField("Z", 0, 0)
    with pytest.raises(ValueError):
        VectorField("J", y1, 0)


def test_symmetry_checks():
    e = parse_ode("y''' = y''^3*f(y')", ["f"])
    assert is_symmetry(P("d/dy"), e) and is_symmetry(P("d/dx"), e)
    assert not is_symmetry(P("y*d/dy"), e)
    assert is_symmetry(P("y*d/dy"), parse_ode("y''' = 0"))
    assert not is_symmetry(P("x*d/dy"), parse_ode("y''' = y"))


def test_commutators_of_the_four_dimensional_bases():
    fields = [P("d/dy", "X"), P("x*d/dy", "Y"), P("x^2*d/dy", "Z"), P("d/dx", "U")]
    table = commutator_table(fields)
    assert table.nonzero() == {("Y", "U"): {"X": -1}, ("Z", "U"): {"Y": -2}}
    assert table.jacobi_defects() == []
    fields[3] = P("-d/dx + y*d/dy", "U")
    t44 = commutator_table(fields)
    assert t44.nonzero() == {("X", "U"): {"X": 1}, ("Y", "U"): {"X": 1, "Y": 1}, ("Z", "U"): {"Y": 2, "Z": 1}}


def test_non_closed_span_is_an_error():
    with pytest.raises(AlgebraError):
        commutator_table([P("d/dx", "A"), P("x^2*d/dy", "B")])


def test_rescaling_onto_reference_tables():
    fields = [P("d/dy", "X"), P("x*d/dy", "Y"), P("x^2*d/dy", "Z"), P("d/dx", "U")]
    expected = parse_commutator_table("basis X, Y, Z, U\n[Y,U] = X\n[Z,U] = Y")
    s = diagonal_rescaling(commutator_table(fields), expected, fixed=("X", "Y"))
    assert s == {"X": 1, "Y": 1, "Z": sp.Rational(1, 2), "U": -1}
    literal = parse_commutator_table("basis X, Y, Z, U\n[X,U] = X\n[Y,U] = X + U\n[Z,U] = Y + Z")
    assert literal.jacobi_defects()  # X + U in the last bracket breaks Jacobi
    fields[3] = P("-d/dx + y*d/dy", "U")
    assert diagonal_rescaling(commutator_table(fields), literal) is None


@pytest.mark.parametrize("tag", ["I", "II", "III", "IV"])
def test_canonical_pairs_classify_to_themselves(tag):
    assert classify_2d(*CANONICAL_PAIRS[tag]).tag == tag


def test_classification_of_non_canonical_pairs():
    kind = classify_2d(P("x*d/dx + y*d/dy", "A"), P("d/dx", "B"))
    assert kind.tag == "IV"
    xh, yh = kind.basis
    assert commutator(xh, yh).same_field(xh)
    assert classify_2d(P("x*d/dy"), P("x^2*d/dy")).tag == "II"
    with pytest.raises(AlgebraError):
        classify_2d(P("d/dx"), P("2*d/dx"))


@pytest.mark.parametrize(
    "text",
    ["d/dy", "y*d/dy", "x^2*d/dy", "-2/x^3*d/dy", "d/dx", "x*d/dx + y*d/dy", "-d/dx + y*d/dy",
     "d/dx + 2*y/x*d/dy", "x*d/dx", "y^2*d/dy", "x^2*d/dx + x*y*d/dy"],
)
def test_straightening_is_verified(text):
    f = P(text)
    st_ = straighten(f)
    assert is_zero(f(st_.xbar)) and is_zero(f(st_.ybar) - 1)
    invs = differential_invariants(f, 3, st_)
    pf = prolong(f, 3)
    assert all(is_zero(pf(i)) for i in invs)


def test_rotation_is_outside_the_supported_class():
    with pytest.raises(UnsupportedClass):
        straighten(P("-y*d/dx + x*d/dy"))


def test_first_invariant_matches_the_classical_choices():
    assert first_invariant(P("x^2*d/dy")) == y1 / X**2 - 2 * Y / X**3
    assert first_invariant(P("d/dx")) == y1
    assert structurally_equal(first_invariant(P("x*d/dx + y*d/dy")), y1 - Y / X)


def test_gauge_normalize():
    f, coords = gauge_normalize(P("d/dx + 2*x*d/dy"))
    assert f.same_field(P("d/dx")) and coords["y"] == Y - X**2
    with pytest.raises(ValueError):
        gauge_normalize(P("d/dx + y*d/dy"))


# properties ---------------------------------------------------------------

coeffs = st.lists(st.integers(-2, 2), min_size=6, max_size=6)


def _field(c):
    mons = [1, X, Y]
    xi = sum(a * m for a, m in zip(c[:3], mons))
    eta = sum(a * m for a, m in zip(c[3:], mons)) + X * Y
    return VectorField("F", xi, eta)


@settings(max_examples=60, deadline=None)
@given(coeffs, coeffs)
def test_prolongation_is_a_lie_algebra_map(a, b):
    fa, fb = _field(a), _field(b)
    br = commutator(fa, fb)
    if br.is_zero:
        return
    pa, pb, pbr = prolong(fa, 2), prolong(fb, 2), prolong(br, 2)
    for z in (y1, y2):
        assert is_zero(pbr(z) - (pa(pb(z)) - pb(pa(z))))


@settings(max_examples=60, deadline=None)
@given(coeffs, coeffs, coeffs)
def test_jacobi_identity(a, b, c):
    fa, fb, fc = _field(a), _field(b), _field(c)
    br = commutator
    total = [br(fa, br(fb, fc)), br(fb, br(fc, fa)), br(fc, br(fa, fb))]
    assert is_zero(sum(t.xi for t in total)) and is_zero(sum(t.eta for t in total))


def test_span_membership():
    assert in_span(P("3*x^2*d/dy"), [P("x^2*d/dy")])
    assert not in_span(P("x*d/dy"), [P("x^2*d/dy")])
