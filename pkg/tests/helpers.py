"""Hypothesis strategies shared by the property tests."""
from hypothesis import strategies as st

from cdo_engine.superpoly import ChartSignature, SuperForm, SuperVectorField

SIGNATURES = [ChartSignature(p, q) for p, q in [(1, 0), (2, 0), (0, 2), (1, 1), (2, 1), (1, 2)]]

signatures = st.sampled_from(SIGNATURES)


@st.composite
def forms(draw, sig, max_poly_degree=2, form_degree=None, max_terms=3, homogeneous=True):
    """Random polynomial form; with ``homogeneous`` a single parity part is kept."""
    n = sig.n
    terms = {}
    for _ in range(draw(st.integers(0, max_terms))):
        coords = draw(st.lists(st.integers(0, n - 1), max_size=max_poly_degree))
        k = form_degree if form_degree is not None else draw(st.integers(0, 2))
        diffs = draw(st.lists(st.integers(0, n - 1), min_size=k, max_size=k))
        w = SuperForm(sig, {(): draw(st.integers(-3, 3))})
        for i in coords:
            w = w * sig.coord(i)
        for i in diffs:
            w = w * sig.dcoord(i)
        for m, c in w.terms.items():
            terms[m] = terms.get(m, 0) + c
    w = SuperForm(sig, terms)
    if homogeneous and w.terms:
        parts = w.parity_parts()
        w = parts[draw(st.sampled_from(sorted(parts)))]
        if form_degree is None:
            degs = sorted({w._mono_deg(m) for m in w.terms})
            w = w.degree_part(draw(st.sampled_from(degs)))
    return w


@st.composite
def functions(draw, sig, max_poly_degree=2, homogeneous=True):
    return draw(forms(sig, max_poly_degree, 0, homogeneous=homogeneous))


@st.composite
def vector_fields(draw, sig, max_poly_degree=2, homogeneous=True):
    comps = [draw(functions(sig, max_poly_degree, homogeneous=False)) for _ in range(sig.n)]
    X = SuperVectorField(sig, comps)
    if homogeneous and not X.is_zero():
        parts = X.parity_parts()
        X = parts[draw(st.sampled_from(sorted(parts)))]
    return X


@st.composite
def sig_and(draw, make, *args, count=1, **kwargs):
    sig = draw(signatures)
    return (sig,) + tuple(draw(make(sig, *args, **kwargs)) for _ in range(count))
