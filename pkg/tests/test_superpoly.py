import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import forms, functions, sig_and, vector_fields
from cdo_engine.expr import parse_form
from cdo_engine.superpoly import (ChartSignature, MatrixForm, NotInvertible, SignatureError,
                                  SuperVectorField, bracket_vf, contract, exterior_d,
                                  lie_derivative, matrix_inverse, pair, partial, supertrace)


def P(text, sig):
    return parse_form(text, sig)


def field(sig, i, coeff=None):
    return SuperVectorField.basis(sig, i, coeff)


# examples ----------------------------------------------------------------


def test_partial_examples():
    s = ChartSignature(1, 0)
    assert partial(0, P("b1^2", s)) == P("2*b1", s)
    s = ChartSignature(0, 2)
    assert partial(0, P("b1*b2", s)) == P("b2", s)
    assert partial(1, P("b1*b2", s)) == P("-b1", s)


def test_pairing_examples():
    s = ChartSignature(1, 1)
    assert pair(P("d(b1)", s), field(s, 0)) == s.const(1)
    assert pair(P("d(b2)", s), field(s, 1)) == s.const(-1)
    assert pair(P("d(b1)", s), field(s, 1)).is_zero()


def test_exterior_derivative_examples():
    s = ChartSignature(2, 0)
    assert P("d(b1*d(b2))", s) == P("d(b1)*d(b2)", s)
    s = ChartSignature(1, 2)
    sq = P("d(b2*d(b2))", s)
    assert not sq.is_zero()
    assert sq == P("d(b2)*d(b2)", s)


def test_contraction_and_lie_examples():
    s = ChartSignature(3, 0)
    w = P("d(b1)*d(b2)*d(b3)", s)
    assert contract(field(s, 1), w) == P("-d(b1)*d(b3)", s)
    s = ChartSignature(2, 1)
    for i in range(3):
        for j in range(3):
            assert bracket_vf(field(s, i), field(s, j)).is_zero()
    s = ChartSignature(1, 0)
    assert lie_derivative(field(s, 0, P("b1", s)), P("d(b1)", s)) == P("d(b1)", s)


def test_supertrace_examples():
    for p, q in [(2, 1), (0, 3), (3, 0)]:
        s = ChartSignature(p, q)
        assert supertrace(MatrixForm.identity(s)) == s.const(p - q)
        assert supertrace(MatrixForm.zero(s)).is_zero()
    s = ChartSignature(2, 0)
    theta = MatrixForm.unit(s, 0, 1, P("2*d(b2)", s))
    assert supertrace(theta).is_zero()


def test_matrix_inverse_examples():
    s = ChartSignature(2, 0)
    M = MatrixForm(s, [[1, P("2*b2", s)], [0, 1]])
    assert matrix_inverse(M) == MatrixForm(s, [[1, P("-2*b2", s)], [0, 1]])
    assert matrix_inverse(MatrixForm.identity(s)) == MatrixForm.identity(s)
    s = ChartSignature(1, 2)
    M = MatrixForm(s, [[1, 0, 0], [0, P("1 + b2*b3", s), 0], [0, 0, 1]])
    assert matrix_inverse(M) == MatrixForm(s, [[1, 0, 0], [0, P("1 - b2*b3", s), 0], [0, 0, 1]])


def test_matrix_inverse_rejects_non_nilpotent():
    s = ChartSignature(1, 0)
    with pytest.raises(NotInvertible):
        matrix_inverse(MatrixForm(s, [[P("1 + b1", s)]]))


def test_signature_errors():
    with pytest.raises(SignatureError):
        ChartSignature(-1, 0)
    s = ChartSignature(1, 0)
    with pytest.raises(SignatureError):
        s.coord(3)


# properties --------------------------------------------------------------


def bideg(w):
    return w.parity(), w.degree()


@given(sig_and(forms, count=1))
def test_d_squares_to_zero(data):
    _, w = data
    assert exterior_d(exterior_d(w)).is_zero()


@given(sig_and(forms, count=2))
def test_graded_commutativity(data):
    _, a, b = data
    (pa, da), (pb, db) = bideg(a), bideg(b)
    sign = (-1) ** (pa * pb + da * db)
    assert a * b == (b * a) * sign


@given(sig_and(forms, count=2))
def test_d_is_a_derivation(data):
    _, a, b = data
    sign = (-1) ** a.degree()
    assert exterior_d(a * b) == exterior_d(a) * b + (a * exterior_d(b)) * sign


@settings(max_examples=60)
@given(st.data())
def test_cartan_formula(data):
    sig = data.draw(st.sampled_from([ChartSignature(2, 0), ChartSignature(1, 1), ChartSignature(0, 2)]))
    X = data.draw(vector_fields(sig))
    w = data.draw(forms(sig))
    # i_X has bidegree (-1, |X|), so [i_X, d] is an anticommutator for either parity of X
    assert lie_derivative(X, w) == contract(X, exterior_d(w)) + exterior_d(contract(X, w))


@settings(max_examples=60)
@given(st.data())
def test_bracket_is_the_supercommutator(data):
    sig = data.draw(st.sampled_from([ChartSignature(2, 0), ChartSignature(1, 1), ChartSignature(0, 2)]))
    X, Y = data.draw(vector_fields(sig)), data.draw(vector_fields(sig))
    f = data.draw(functions(sig))
    px, py = X.parity(), Y.parity()
    sign = (-1) ** (px * py)
    assert bracket_vf(X, Y).apply(f) == X.apply(Y.apply(f)) - Y.apply(X.apply(f)) * sign
    assert bracket_vf(X, Y) == -bracket_vf(Y, X).scale(sign)


@settings(max_examples=60)
@given(st.data())
def test_contraction_is_an_antiderivation(data):
    sig = data.draw(st.sampled_from([ChartSignature(2, 0), ChartSignature(1, 1), ChartSignature(2, 1)]))
    X = data.draw(vector_fields(sig))
    a, b = data.draw(forms(sig)), data.draw(forms(sig))
    px, (pa, da) = X.parity(), bideg(a)
    sign = (-1) ** (da + px * pa)
    assert contract(X, a * b) == contract(X, a) * b + (a * contract(X, b)) * sign
