import pytest
from hypothesis import given, settings

from cdo_engine.expr import ExprError, parse_field, parse_form, parse_matrix
from cdo_engine.scalars import gauss
from cdo_engine.superpoly import ChartSignature, SuperVectorField, exterior_d
from helpers import forms, sig_and, vector_fields

S21 = ChartSignature(2, 1)


def test_literals_and_operators():
    b1, b2, b3 = S21.coords()
    assert parse_form("1/2*b1^2 - b2", S21) == b1 * b1 * S21.const(gauss(1, 0) / 2) - b2
    assert parse_form("i*b3", S21) == b3 * S21.const(gauss(0, 1))
    assert parse_form("d(b1*b2)", S21) == exterior_d(b1 * b2)
    assert parse_form(3, S21) == S21.const(3)


def test_aliases_and_greek_letters():
    al = {"x1": 0, "zetab": 1, "e": 2}
    assert parse_form("x1*ζ", S21, al) == S21.coord(0) * S21.coord(1)
    assert parse_form("ε", S21, al) == S21.coord(2)


def test_vector_fields():
    X = parse_field("b1*b3@2 - 2@3", S21)
    assert X == SuperVectorField(S21, [S21.zero(), S21.coord(0) * S21.coord(2), S21.const(-2)])
    assert parse_field("0", S21).is_zero()


@pytest.mark.parametrize("text,col", [("b1 +* b2", 5), ("b4", 1), ("b1^(-1)", 5), ("b1^2 + b9", 8),
                                      ("sin(b1)", 1), ("b1/b2", 1), ("1.5*b1", 1)])
def test_errors_report_a_column(text, col):
    with pytest.raises(ExprError) as err:
        parse_form(text, S21)
    assert err.value.column is not None
    assert f"column {col}" in str(err.value)


@pytest.mark.parametrize("text", ["", "b1@1", "b1@1 + b2", "b1@1 * b2@2", "(b1@1)^2"])
def test_form_errors(text):
    with pytest.raises(ExprError):
        parse_form(text, S21)


@pytest.mark.parametrize("text", ["b1", "b1@4", "b1@b2"])
def test_field_errors(text):
    with pytest.raises(ExprError):
        parse_field(text, S21)


def test_matrix_shape_checked():
    with pytest.raises(ExprError):
        parse_matrix([["0"]], S21, n=2)
    assert len(parse_matrix([["0", "b1"], ["d(b2)", "0"]], S21, n=2)) == 2


@settings(max_examples=60, deadline=None)
@given(sig_and(forms, homogeneous=False))
def test_rendered_forms_parse_back(data):
    sig, w = data
    assert parse_form(str(w), sig) == w


@settings(max_examples=40, deadline=None)
@given(sig_and(vector_fields, homogeneous=False))
def test_rendered_fields_parse_back(data):
    sig, X = data
    text = str(X)
    body = text[text.index("(") + 1:-1]
    assert parse_field(body, sig) == X
