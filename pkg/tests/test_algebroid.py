import random

import pytest
from hypothesis import given, settings, HealthCheck
from hypothesis import strategies as st

from cdo_engine.acceptance import random_connection, random_two_form
from cdo_engine.algebroid import (AlgebroidMorphism, ConnectionData, PreconditionError,
                                  b_field_morphism, check_axioms, check_morphism,
                                  conformal_weight1, coordinate_structure, cs_form,
                                  cs_identity_residual, global_structure, homotopy,
                                  identity_map, is_torsion_free, killing_form_sl2, lie_structure,
                                  nabla_matrix, sl2_constants, structures_agree, tilde_nabla,
                                  torsion_free_part, transport)
from cdo_engine.expr import parse_form
from cdo_engine.superpoly import (ChartSignature, MatrixForm, SuperVectorField, contract,
                                  exterior_d, supertrace)


def P(text, sig):
    return parse_form(text, sig)


def F(sig, i, coeff=None):
    return SuperVectorField.basis(sig, i, coeff)


def statuses(report):
    return {r.check: r.status for r in report}


# coordinate structure ----------------------------------------------------


def test_coordinate_star_example():
    s = ChartSignature(1, 0)
    assert coordinate_structure(s).star(P("b1^2", s), F(s, 0)) == P("-2*d(b1)", s)


def test_coordinate_brace_examples():
    s = ChartSignature(2, 1)
    V = coordinate_structure(s)
    for i in range(3):
        for j in range(3):
            assert V.brace(F(s, i), F(s, j)).is_zero()
    s = ChartSignature(2, 0)
    V = coordinate_structure(s)
    assert V.brace(F(s, 0, P("b2", s)), F(s, 1, P("b1", s))) == s.const(-1)


@pytest.mark.parametrize("pq", [(1, 0), (0, 2), (1, 1)])
def test_coordinate_axioms_small(pq):
    rep = check_axioms(coordinate_structure(ChartSignature(*pq)), samples=30, seed=3,
                       exhaustive_degree=2)
    assert rep.passed, [r.to_dict() for r in rep.failures()]


def test_zero_samples_is_vacuous():
    rep = check_axioms(coordinate_structure(ChartSignature(2, 0)), samples=0, exhaustive_degree=None)
    assert rep.passed and all(r.samples == 0 for r in rep)


# global structure --------------------------------------------------------


def test_flat_global_matches_coordinate():
    s = ChartSignature(2, 1)
    G = global_structure(ConnectionData.flat(s), s.zero())
    assert structures_agree(coordinate_structure(s), G, samples=50, seed=1).passed


def test_h_contribution_to_brace_omega():
    s = ChartSignature(3, 0)
    G = global_structure(ConnectionData.flat(s), P("d(b1)*d(b2)*d(b3)", s))
    assert G.brace_omega(F(s, 0), F(s, 1)) == P("-1/2*d(b3)", s)


def test_even_self_contraction_vanishes():
    s = ChartSignature(3, 0)
    H = P("d(b1)*d(b2)*d(b3)", s)
    X = F(s, 0, P("b2", s)) + F(s, 2)
    assert contract(X, contract(X, H)).is_zero()


def test_mismatched_h_is_rejected():
    s = ChartSignature(1, 1)
    conn = ConnectionData(random_connection(s, random.Random(0)))
    assert not supertrace(conn.R @ conn.R).is_zero()
    with pytest.raises(PreconditionError):
        global_structure(conn, s.zero())


def test_nonflat_global_structure_axioms():
    s = ChartSignature(1, 1)
    rng = random.Random(7)
    conn = ConnectionData(random_connection(s, rng))
    H = homotopy(supertrace(conn.R @ conn.R))
    rep = check_axioms(global_structure(conn, H), samples=20, seed=2, exhaustive_degree=None)
    assert rep.passed, [r.to_dict() for r in rep.failures()]


def test_perturbed_brace_breaks_an_axiom():
    from cdo_engine.algebroid import VertexAlgebroidStructure
    s = ChartSignature(2, 0)
    V = coordinate_structure(s)

    def brace(X, Y):
        bump = 1 if (X == F(s, 0) and Y == F(s, 1)) else 0
        return V.brace(X, Y) + bump

    W = VertexAlgebroidStructure(V.base, V.star, brace, V.brace_omega)
    rep = check_axioms(W, samples=50, seed=0, exhaustive_degree=2)
    st_ = statuses(rep)
    assert st_["axiom 4"] == "fail" or st_["axiom 6"] == "fail" or st_["axiom 1"] == "fail"


# tilde nabla -------------------------------------------------------------


def test_tilde_nabla_flat():
    s = ChartSignature(2, 0)
    flat = ConnectionData.flat(s)
    assert tilde_nabla(flat, F(s, 0)).is_zero()
    M = tilde_nabla(flat, F(s, 0, P("b2", s)))
    assert M == MatrixForm.unit(s, 0, 1, 1)


def test_tilde_nabla_equals_nabla_when_torsion_free():
    s = ChartSignature(2, 0)
    rng = random.Random(11)
    conn = torsion_free_part(ConnectionData(random_connection(s, rng)))
    assert is_torsion_free(conn)
    X = F(s, 0, P("b1*b2", s)) + F(s, 1, P("b1^2", s))
    assert tilde_nabla(conn, X) == nabla_matrix(conn, X)


# Lie algebra structures --------------------------------------------------


def test_abelian_lie_structure_passes():
    V = lie_structure({}, [[1, 2], [2, 5]])
    assert check_axioms(V, samples=30).passed


def test_sl2_killing_passes():
    assert check_axioms(lie_structure(sl2_constants(), killing_form_sl2()), samples=30).passed


def test_sl2_non_invariant_form_fails_invariance():
    rep = check_axioms(lie_structure(sl2_constants(), [[1, 0, 0], [0, 0, 0], [0, 0, 0]]), samples=30)
    r = next(r for r in rep if r.check == "axiom 6")
    assert r.status == "fail" and r.counterexample


# morphisms ---------------------------------------------------------------


def test_identity_morphism():
    s = ChartSignature(1, 1)
    V = coordinate_structure(s)
    m = AlgebroidMorphism(identity_map(), lambda X: s.zero())
    assert check_morphism(V, V, m, samples=20).passed


def test_b_field_morphism_positive_and_negative():
    s = ChartSignature(1, 2)
    conn = ConnectionData.flat(s)
    B = P("b1*d(b2)*d(b3)", s)
    dB = exterior_d(B)
    V = global_structure(conn, s.zero())
    good = check_morphism(V, global_structure(conn, dB), b_field_morphism(B), samples=20)
    bad = check_morphism(V, global_structure(conn, -dB), b_field_morphism(B), samples=20)
    assert good.passed
    assert statuses(bad)["morphism 3"] == "fail"


def test_transport_identity_is_trivial():
    s = ChartSignature(2, 1)
    V = coordinate_structure(s)
    W = transport(V, identity_map(), lambda X: s.zero())
    assert structures_agree(V, W, samples=30).passed


def test_transport_closed_b_keeps_brace_omega_on_coordinate_fields():
    s = ChartSignature(2, 0)
    V = coordinate_structure(s)
    B = P("d(b1)*d(b2)", s)
    W = transport(V, identity_map(), lambda X: contract(X, B) * P("1/2", s))
    for X in s.coordinate_fields():
        for Y in s.coordinate_fields():
            assert (W.brace_omega(X, Y) - V.brace_omega(X, Y)).is_zero()


def test_transport_with_tensorial_delta_passes_axioms():
    s = ChartSignature(1, 1)
    B = random_two_form(s, random.Random(5))
    W = transport(coordinate_structure(s), identity_map(), lambda X: contract(X, B))
    assert check_axioms(W, samples=20, seed=4, exhaustive_degree=None).passed


# Chern-Simons and conformal weight one -----------------------------------


def test_cs_form_examples():
    s = ChartSignature(3, 0)
    assert cs_form(ConnectionData.flat(s)).is_zero()
    conn = ConnectionData(MatrixForm.unit(s, 0, 0, P("b2*d(b1) + b3*d(b2)", s)))
    assert cs_form(conn) == P("-b2*d(b1)*d(b2)*d(b3)", s)
    assert supertrace(conn.R @ conn.R).is_zero()
    assert cs_identity_residual(conn).is_zero()


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.sampled_from([(3, 0), (2, 2), (1, 1), (2, 1)]), st.integers(0, 10 ** 6))
def test_chern_simons_transgression_and_bianchi(pq, seed):
    s = ChartSignature(*pq)
    conn = ConnectionData(random_connection(s, random.Random(seed)))
    assert cs_identity_residual(conn).is_zero()
    assert conn.bianchi_residual().is_zero()


def test_conformal_weight1_examples():
    s = ChartSignature(1, 0)
    flat = ConnectionData.flat(s)
    assert conformal_weight1(flat, s.zero(), F(s, 0)).is_zero()
    assert conformal_weight1(flat, s.zero(), F(s, 0, P("b1", s))) == s.const(1)
    assert conformal_weight1(flat, P("d(b1)", s), F(s, 0)) == s.const(-1)
