"""Random jet-space expressions for property tests."""
import sympy as sp
from hypothesis import strategies as st

from liereduce.expr import X, Y, jet, unknown_function

F = unknown_function("F")

atoms = st.sampled_from([X, Y, jet(1), jet(2)])
constants = st.integers(-4, 4).filter(bool).map(sp.Integer) | st.fractions(
    min_value=-3, max_value=3, max_denominator=5
).filter(bool).map(lambda q: sp.Rational(q.numerator, q.denominator))


def _combine(children):
    pair = st.tuples(children, children)
    return st.one_of(
        pair.map(lambda ab: ab[0] + ab[1]),
        pair.map(lambda ab: ab[0] * ab[1]),
        st.tuples(children, st.integers(2, 3)).map(lambda be: be[0] ** be[1]),
        st.tuples(children, atoms, st.integers(1, 3)).map(lambda t: t[0] / (t[1] + t[2])),
        st.tuples(atoms, constants).map(lambda t: sp.exp(t[1] * t[0])),
        children.map(F),
    )


expressions = st.recursive(atoms | constants, _combine, max_leaves=6)
rational_expressions = st.recursive(
    atoms | constants,
    lambda ch: st.one_of(
        st.tuples(ch, ch).map(lambda ab: ab[0] + ab[1]),
        st.tuples(ch, ch).map(lambda ab: ab[0] * ab[1]),
        st.tuples(ch, atoms, st.integers(1, 3)).map(lambda t: t[0] / (t[1] + t[2])),
    ),
    max_leaves=6,
)
