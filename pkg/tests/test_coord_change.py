import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdo_engine.acceptance import named_diffeos
from cdo_engine.algebroid import PreconditionError
from cdo_engine.coord_change import (DiffeoError, PolyDiffeo, compose_check, conformal_transform,
                                     delta_map, primitive_of_wz, verify_delta_map, wz_data)
from cdo_engine.expr import parse_form
from cdo_engine.superpoly import ChartSignature, MatrixForm, SuperVectorField, contract, supertrace

DIFFEOS = named_diffeos()


def P(text, sig):
    return parse_form(text, sig)


def test_identity_data():
    s = ChartSignature(2, 1)
    d = wz_data(PolyDiffeo.identity(s))
    assert d.g == MatrixForm.identity(s)
    assert d.theta.is_zero() and d.wz.is_zero()


def test_shear_data():
    sh = DIFFEOS["shear"]
    s = sh.sig
    d = wz_data(sh)
    assert d.g == MatrixForm(s, [[1, P("2*b2", s)], [0, 1]])
    assert d.theta == MatrixForm.unit(s, 0, 1, P("2*d(b2)", s))
    assert d.wz.is_zero()


def test_nilpotent_scaling_supertrace():
    ns = DIFFEOS["nscale"]
    assert supertrace(wz_data(ns).theta) == P("d(b2*b3)", ns.sig)


def test_bad_inverse_rejected():
    s = ChartSignature(2, 0)
    with pytest.raises(DiffeoError):
        PolyDiffeo(s, [P("b1 + b2^2", s), P("b2", s)], [P("b1", s), P("b2", s)])


def test_delta_map_examples():
    s = ChartSignature(2, 0)
    ident = PolyDiffeo.identity(s)
    sh = DIFFEOS["shear"]
    for X in s.coordinate_fields():
        assert delta_map(ident).delta(X).is_zero()
        assert delta_map(sh).delta(X).is_zero()
    xi = P("d(b1)*d(b2)", s)
    d2 = SuperVectorField.basis(s, 1)
    expected = contract(sh.pull_field(d2), xi) * P("-1/2", s)
    assert delta_map(sh, xi).delta(d2) == expected


def test_delta_map_rejects_wrong_primitive():
    ns = DIFFEOS["oddshift"]
    assert wz_data(ns).wz.is_zero()
    with pytest.raises(PreconditionError):
        delta_map(ns, P("b1*d(b2)*d(b3)", ns.sig))
    with pytest.raises(DiffeoError):
        delta_map(ns, P("b1*d(b1)*d(b2)", ns.sig))


@pytest.mark.parametrize("name", sorted(DIFFEOS))
def test_delta_maps_are_morphisms(name):
    phi = DIFFEOS[name]
    assert verify_delta_map(phi, primitive_of_wz(phi), samples=10).passed


def test_compose_with_inverse_is_identity():
    sh = DIFFEOS["shear"]
    rep = compose_check(sh, None, sh.inv(), None)
    assert rep.passed
    assert rep.get("composition").detail["eta"] == "0"


def test_identity_composition():
    ident = PolyDiffeo.identity(ChartSignature(2, 0))
    assert compose_check(ident, None, ident, None).get("composition").detail["eta"] == "0"


@pytest.mark.parametrize("first,second", [("shear", "swap"), ("swap", "shear"),
                                          ("nscale", "oddshift"), ("oddshift", "nscale")])
def test_named_compositions(first, second):
    a, b = DIFFEOS[first], DIFFEOS[second]
    assert compose_check(a, primitive_of_wz(a), b, primitive_of_wz(b)).passed


def test_conformal_transform_examples():
    rep = conformal_transform(DIFFEOS["shear"])
    assert rep.passed and rep[0].detail["new omega"] == "0"
    s = ChartSignature(1, 0)
    scale = PolyDiffeo(s, [P("2*b1", s)], [P("1/2*b1", s)], "scale")
    rep = conformal_transform(scale)
    assert rep.passed and rep[0].detail["new omega"] == "0"
    ns = DIFFEOS["nscale"]
    rep = conformal_transform(ns)
    assert rep.passed
    assert P(rep[0].detail["new omega"], ns.sig) == -P("d(b2*b3)", ns.sig)


def test_conformal_transform_rejects_open_omega():
    sh = DIFFEOS["shear"]
    with pytest.raises(PreconditionError):
        conformal_transform(sh, None, P("b1*d(b2)", sh.sig))


# random triangular automorphisms b1 -> b1 + f(b2), b2 -> b2 + c
@settings(max_examples=15, deadline=None)
@given(st.lists(st.integers(-2, 2), min_size=3, max_size=3), st.integers(-2, 2))
def test_triangular_automorphisms(coeffs, shift):
    s = ChartSignature(2, 0)
    b1, b2 = s.coords()
    f = sum((b2 ** (k + 1) * c for k, c in enumerate(coeffs)), s.zero())
    fwd = [b1 + f, b2 + shift]
    g = sum(((b2 - shift) ** (k + 1) * c for k, c in enumerate(coeffs)), s.zero())
    inv = [b1 - g, b2 - shift]
    phi = PolyDiffeo(s, fwd, inv, "tri")
    xi = primitive_of_wz(phi)
    assert verify_delta_map(phi, xi, samples=5).passed
    assert conformal_transform(phi, xi).passed
    swap = DIFFEOS["swap"]
    assert compose_check(phi, xi, swap, None).passed
