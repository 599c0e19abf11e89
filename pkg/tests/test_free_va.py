import random

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from cdo_engine import free_va as fva
from cdo_engine.acceptance import (explicit_dolbeault_chart, random_connection,
                                   torsionful_de_rham_chart, trace_free_de_rham_chart)
from cdo_engine.algebroid import (ConnectionData, conformal_weight1, coordinate_structure, homotopy,
                                  killing_form_sl2, lie_structure, sl2_constants)
from cdo_engine.cs_geometry import DolbeaultChart, PiEChart
from cdo_engine.expr import parse_form, parse_matrix
from cdo_engine.free_va import A, B, FockSpace, ModeOperator, apply_mode, nth_product
from cdo_engine.superpoly import ChartSignature, SuperVectorField, supertrace


def P(text, sig):
    return parse_form(text, sig)


def test_mode_examples():
    s = ChartSignature(1, 0)
    S = FockSpace(s)
    assert apply_mode(ModeOperator.a(0, 1), S.state([(B, 0, -1)])) == S.vacuum()
    assert apply_mode(ModeOperator.b(0, 0), S.vacuum()) == fva.function_state(S, P("b1", s))
    squared = fva.function_state(S, P("b1^2", s))
    assert apply_mode(ModeOperator.a(0, 0), squared) == fva.function_state(S, P("2*b1", s))


def test_pairing_as_first_product():
    s = ChartSignature(1, 0)
    S = FockSpace(s)
    alpha = fva.form_state(S, P("d(b1)", s))
    X = fva.field_state(S, SuperVectorField.basis(s, 0))
    assert nth_product(alpha, 1, X) == S.vacuum()


def test_translation_examples():
    s = ChartSignature(1, 0)
    S = FockSpace(s)
    assert fva.translation(S.vacuum()).is_zero()
    assert fva.translation(fva.function_state(S, P("b1", s))) == S.state([(B, 0, -1)])
    assert S.state([(A, 0, -2), (B, 0, -1)]).weight() == 3


def test_conformal_element_examples():
    s = ChartSignature(2, 1)
    S = FockSpace(s)
    nu = fva.conformal_element(s, None, S)
    assert nth_product(nu, 3, nu) == S.vacuum()
    assert nth_product(nu, 2, nu).is_zero()
    for i in range(s.n):
        X = fva.field_state(S, SuperVectorField.basis(s, i))
        assert nth_product(nu, 1, X) == X


@pytest.mark.parametrize("pq", [(1, 0), (0, 1), (1, 1)])
def test_virasoro_small(pq):
    rep = fva.virasoro_report(ChartSignature(*pq), max_weight=2)
    assert rep.passed, [r.to_dict() for r in rep.failures()]


def test_virasoro_with_closed_omega():
    s = ChartSignature(2, 0)
    assert fva.virasoro_report(s, P("d(b1*b2)", s), max_weight=2).passed


def test_non_closed_omega_rejected():
    s = ChartSignature(2, 0)
    with pytest.raises(fva.ConformalError):
        fva.conformal_element(s, P("b1*d(b2)", s))


def test_zero_mode_examples():
    s = ChartSignature(2, 0)
    S = FockSpace(s)
    closed = P("d(b1)", s)
    for X in s.coordinate_fields():
        assert fva.zero_mode_oneform(closed, X, S).is_zero()
    out = fva.zero_mode_oneform(P("b1*d(b2)", s), SuperVectorField.basis(s, 0), S)
    assert out == fva.form_state(S, P("-d(b2)", s))
    assert fva.zero_mode_report(P("b1*d(b2)", s), SuperVectorField.basis(s, 0)).passed
    exact = P("b2*d(b1) + b1*d(b2)", s)
    for X in s.coordinate_fields():
        assert fva.zero_mode_oneform(exact, X, S).is_zero()


def test_graded_character_examples():
    assert fva.graded_character(ChartSignature(1, 0), 2) == 5
    assert fva.graded_character(ChartSignature(0, 1), 1) == 2
    for pq in [(2, 1), (0, 2), (3, 0)]:
        assert fva.graded_character(ChartSignature(*pq), 0) == 1


def test_pbw_counts_frozen():
    # independent count by hand for (1,1): prod (1+q^l)^2 / (1-q^l)^2
    assert [fva.pbw_count(ChartSignature(1, 1), k) for k in range(5)] == [1, 4, 12, 32, 76]


# mode algebra over structures ----------------------------------------------


def test_kac_moody_level():
    V = lie_structure(sl2_constants(), killing_form_sl2(3))
    assert fva.kac_moody_report(V, max_weight=1).passed


def test_coordinate_modes_agree_with_fock():
    rep = fva.mode_agreement_report(coordinate_structure(ChartSignature(1, 0)), pairs=30)
    assert rep.passed, [r.to_dict() for r in rep.failures()]


def test_coordinate_field_modes_commute():
    s = ChartSignature(1, 0)
    S = FockSpace(s)
    d1 = fva.field_state(S, SuperVectorField.basis(s, 0))
    for v in fva.fock_basis(S, 2, 1):
        for m in range(-2, 3):
            for n in range(-2, 3):
                lhs = nth_product(d1, m, nth_product(d1, n, v)) - nth_product(d1, n, nth_product(d1, m, v))
                assert lhs.is_zero()


def test_fock_structure_matches_coordinate():
    from cdo_engine.algebroid import structures_agree
    s = ChartSignature(1, 1)
    assert structures_agree(coordinate_structure(s), fva.fock_structure(s), samples=20).passed


def test_weight_one_cross_check_on_global_chart():
    s = ChartSignature(2, 0)
    conn = ConnectionData(random_connection(s, random.Random(1)))
    H = homotopy(supertrace(conn.R @ conn.R))
    omega = homotopy(supertrace(conn.R))
    model = fva.GlobalFockModel(conn, H)
    nu = model.conformal(omega)
    for X in s.coordinate_fields() + [SuperVectorField(s, [P("b1*b2", s), P("b1^2", s)])]:
        lhs = nth_product(nu, 2, model.field(X))
        assert lhs == fva.function_state(model.space, conformal_weight1(conn, omega, X))


# properties --------------------------------------------------------------


def _states(space, rng, count=3):
    basis = fva.fock_basis(space, 2, 1)
    out = []
    for _ in range(count):
        par = rng.choice([0, 1])
        pool = [b for b in basis if b.parity() == par] or basis
        v = space.zero()
        for b in rng.sample(pool, min(2, len(pool))):
            v = v + b.scale(rng.choice([1, -1, 2]))
        out.append(v)
    return out


@settings(max_examples=20, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.sampled_from([(1, 0), (0, 1), (1, 1)]), st.integers(0, 10 ** 6),
       st.integers(-2, 2), st.integers(-2, 2))
def test_borcherds_commutator(pq, seed, m, k):
    S = FockSpace(ChartSignature(*pq))
    u, v, w = _states(S, random.Random(seed))
    assert fva.borcherds_commutator_holds(u, v, w, m, k)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([(1, 0), (0, 1), (1, 1)]), st.integers(0, 10 ** 6), st.integers(-1, 3))
def test_translation_derivative_rule(pq, seed, n):
    S = FockSpace(ChartSignature(*pq))
    u, v = _states(S, random.Random(seed), 2)
    assert nth_product(fva.translation(u), n, v) == nth_product(u, n - 1, v).scale(-n)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([(1, 0), (0, 1), (1, 1)]), st.integers(0, 10 ** 6))
def test_products_vanish_above_weight_bound(pq, seed):
    S = FockSpace(ChartSignature(*pq))
    for u in fva.fock_basis(S, 2, 1):
        v = random.Random(seed).choice(fva.fock_basis(S, 2, 1))
        assert nth_product(u, u.weight() + v.weight(), v).is_zero()


# chiral Dolbeault and chiral de Rham -------------------------------------


def _dolbeault(gm, ge):
    s = ChartSignature(4, 3)
    al = {"z1": 0, "z2": 1, "zb1": 2, "zb2": 3}
    return DolbeaultChart(2, 1, parse_matrix(gm, s, al, 2), parse_matrix(ge, s, al, 1))


def test_q_lift_with_zero_h():
    chart = explicit_dolbeault_chart()
    rep = fva.q_lift_report(chart, chart.sig.zero())
    assert rep.passed
    assert rep.get("Q_0 differential").detail["Q_0^2 = 0"] is True


def test_q_lift_detects_mixed_type_obstruction():
    chart = explicit_dolbeault_chart()
    sig = chart.sig
    conn = chart.affine_connection()
    H = homotopy(supertrace(conn.R @ conn.R)) + sig.dcoord(0) * sig.dcoord(2) * sig.dcoord(3)
    rep = fva.q_lift_report(chart, H)
    detail = rep.get("Q_0 differential").detail
    assert rep.passed and detail["Q_0^2 = 0"] is False
    assert "obstruction state" in detail


def test_fermion_numbers_trace_free_and_holomorphic_curvature():
    chart = _dolbeault([["0", "zb1*d(z2)"], ["zb2*d(z1)", "0"]], [["z2*d(z1)"]])
    rep = fva.fermion_report(chart)
    assert rep.passed
    assert rep.get("[Jr_0,Q_0]").detail["i_Q Tr Rbar^M"] == "0"
    assert rep.get("[Jl_0,Q_0]").detail["i_Q Tr R^E"] == "0"


def test_fermion_defects_on_generic_chart():
    chart = _dolbeault([["zb1*d(z1)", "0"], ["0", "0"]], [["zb2*d(z1)"]])
    rep = fva.fermion_report(chart)
    assert rep.passed
    assert rep.get("[Jr_0,Q_0]").detail["i_Q Tr Rbar^M"] == "-b5*d(b1)"
    assert rep.get("[Jl_0,Q_0]").detail["i_Q Tr R^E"] == "b6*d(b1)"


def test_cdr_flat_and_symmetric_and_torsionful():
    assert fva.cdr_report(PiEChart.de_rham(2)).passed
    assert fva.cdr_report(trace_free_de_rham_chart()).passed
    assert not fva.cdr_report(torsionful_de_rham_chart()).passed


def test_corrupted_sign_convention_is_caught(monkeypatch):
    # drop the odd-block sign from the supertrace convention
    monkeypatch.setattr(ChartSignature, "eps", lambda self, i: 1)
    rep = fva.virasoro_report(ChartSignature(1, 1), max_weight=2)
    assert not rep.passed
    assert "Virasoro bracket" in [r.check for r in rep.failures()]
