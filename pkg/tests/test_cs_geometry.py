import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdo_engine.acceptance import (chart_suite, explicit_dolbeault_chart, random_de_rham_chart,
                                   random_dolbeault_chart, random_pi_e_chart,
                                   torsionful_de_rham_chart, trace_free_de_rham_chart)
from cdo_engine.algebroid import cs_identity_residual
from cdo_engine.cs_geometry import (ChartDataError, DolbeaultChart, PiEChart, affine_connection,
                                    bracket_table_check, lift, q_operator_lemmas,
                                    supertrace_lemmas)
from cdo_engine.expr import parse_form, parse_matrix
from cdo_engine.superpoly import ChartSignature, SuperVectorField, bracket_vf, supertrace


def P(text, sig):
    return parse_form(text, sig)


def pi_e(d, r, gm=None, ge=None):
    sig = ChartSignature(d, r)
    names = {f"x{i + 1}": i for i in range(d)}
    names.update({f"e{k + 1}": d + k for k in range(r)})
    gM = parse_matrix(gm, sig, names, d) if gm else None
    gE = parse_matrix(ge, sig, names, r) if ge else None
    return PiEChart(d, r, gM, gE)


def test_degree_operator_counts_fiber_factors():
    ch = PiEChart(1, 3)
    s = ch.sig
    m = s.coord(0) * ch.fiber_coord(0) * ch.fiber_coord(1) * ch.fiber_coord(2)
    assert lift(ch, "J").apply(m) == m * 3


def test_contraction_lift():
    ch = PiEChart(1, 2)
    e1, e2 = ch.fiber_coord(0), ch.fiber_coord(1)
    assert lift(ch, "I", ch.section([1, 0])).apply(e1 * e2) == e2


def test_q_is_de_rham_differential_on_base_functions():
    ch = PiEChart.de_rham(2)
    s = ch.sig
    f = P("b1^2*b2", s)
    assert lift(ch, "Q").apply(f) == P("2*b1*b2*b3 + b1^2*b4", s)


def test_lift_argument_errors():
    ch = PiEChart(2, 1)
    with pytest.raises(ChartDataError):
        lift(ch, "K")
    with pytest.raises(ChartDataError):
        lift(ch, "Jr")
    with pytest.raises(ChartDataError):
        lift(ch, "J", ch.section([1]))


def test_flat_brackets_vanish():
    ch = PiEChart(1, 1)
    X = SuperVectorField.basis(ch.sig, 0)
    assert bracket_vf(ch.D(X), ch.I(ch.section([1]))).is_zero()
    assert bracket_table_check(ch).passed


def test_fiber_connection_in_bracket():
    ch = pi_e(1, 1, ge=[["x1*d(x1)"]])
    s = ch.sig
    X = SuperVectorField.basis(s, 0)
    assert bracket_vf(ch.D(X), ch.I(ch.section([1]))) == ch.I(ch.section([s.coord(0)]))


def test_dolbeault_right_degree_bracket():
    ch = explicit_dolbeault_chart()
    Jr, Q = lift(ch, "Jr"), lift(ch, "Q")
    assert bracket_vf(Jr, Q) == Q
    assert bracket_table_check(ch).passed


def test_affine_connection_blocks():
    assert affine_connection(PiEChart(2, 1)).gamma.is_zero()
    ch = pi_e(2, 1, gm=[["x2*d(x1)", "0"], ["0", "0"]])
    conn = ch.affine_connection()
    assert not conn.gamma.is_zero()
    assert cs_identity_residual(conn).is_zero()
    # contraction lifts are parallel: the fiber rows of the connection act trivially on I
    n = ch.sig.n
    for k in range(ch.d, n):
        assert all(conn.gamma.rows[k][j].is_zero() for j in range(ch.d))


def test_supertrace_lemma_examples():
    assert supertrace_lemmas(PiEChart(2, 1)).get("Str R").detail["Str R"] == "0"
    ch = pi_e(2, 1, gm=[["x2*d(x1)", "0"], ["0", "0"]])
    rep = supertrace_lemmas(ch)
    assert rep.passed
    s = ch.sig
    assert P(rep.get("Str R").detail["Str R"], s) == P("-d(b1)*d(b2)", s)


def test_q_operator_lemmas_flat_and_symmetric():
    assert q_operator_lemmas(PiEChart.de_rham(2)).passed
    assert q_operator_lemmas(trace_free_de_rham_chart()).passed


def test_q_lemmas_on_dolbeault_with_pure_mixed_curvature():
    # gamma_E = zb1 dz1 has curvature of type (1,1) only
    s = ChartSignature(4, 3)
    al = {"z1": 0, "z2": 1, "zb1": 2, "zb2": 3}
    ch = DolbeaultChart(2, 1, None, parse_matrix([["zb1*d(z1)"]], s, al, 1))
    rep = q_operator_lemmas(ch)
    assert rep.passed
    assert rep.get("R^E_{Q,U} = 0").passed


def test_torsion_detected():
    assert not torsionful_de_rham_chart().is_torsion_free()
    assert trace_free_de_rham_chart().is_torsion_free()


def test_symmetrized_dolbeault_is_torsion_free():
    ch = random_dolbeault_chart(2, 1, 5)
    assert ch.is_torsion_free()


@settings(max_examples=6, deadline=None)
@given(st.sampled_from(["pi_e", "de_rham", "dolbeault"]), st.integers(0, 10 ** 6))
def test_chart_suite_on_random_charts(model, seed):
    if model == "pi_e":
        ch, with_q = random_pi_e_chart(2, 1, seed), False
    elif model == "de_rham":
        ch, with_q = random_de_rham_chart(2, seed), True
    else:
        ch, with_q = random_dolbeault_chart(1, 1, seed), True
    rep = chart_suite(ch, "", with_q)
    assert rep.passed, [r.to_dict() for r in rep.failures()]


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_supertrace_of_curvature_splits(seed):
    ch = random_pi_e_chart(2, 2, seed)
    conn = ch.affine_connection()
    tr_m = sum((ch.R_M[i][i] for i in range(ch.d)), ch.sig.zero())
    tr_e = sum((ch.R_E[k][k] for k in range(ch.r)), ch.sig.zero())
    assert supertrace(conn.R) == tr_m - tr_e
