"""Polynomial coordinate changes of A^{p|q} and the induced isomorphisms.

A PolyDiffeo phi: W -> W' is given by component polynomials phi^i = phi^* b^i
together with explicit inverse components.  It acts by pullback on functions
and forms of W' and by the induced map on vector fields.
"""
from __future__ import annotations

from fractions import Fraction

from .algebroid import (AlgebroidMorphism, ChartMap, HALF, PreconditionError,
                        check_morphism, coordinate_structure, first_order_term,
                        homotopy, str_tensor_contract)
from .report import CheckResult, Report
from .superpoly import (ChartSignature, MatrixForm, SuperForm, SuperVectorField,
                        contract, exterior_d, partial, supertrace)


class DiffeoError(ValueError):
    pass


def substitute(w: SuperForm, images: list) -> SuperForm:
    """Algebra map sending generator x (coordinates then differentials) to images[x]."""
    sig = w.sig
    out = sig.zero()
    for m, c in w.terms.items():
        term = sig.const(c)
        for x in m:
            term = term * images[x]
            if not term.terms:
                break
        out = out + term
    return out


class PolyDiffeo:
    """phi with components ``forward`` and inverse components ``inverse``."""

    def __init__(self, sig: ChartSignature, forward, inverse, name="phi"):
        self.sig = sig
        self.forward = [f if isinstance(f, SuperForm) else sig.const(f) for f in forward]
        self.inverse = [f if isinstance(f, SuperForm) else sig.const(f) for f in inverse]
        self.name = name
        if len(self.forward) != sig.n or len(self.inverse) != sig.n:
            raise DiffeoError("wrong number of components")
        for i, (f, g) in enumerate(zip(self.forward, self.inverse)):
            for comp in (f, g):
                if not comp.is_function():
                    raise DiffeoError(f"component {i + 1} is not a function")
                if comp.terms and comp.parity() != sig.parity[i]:
                    raise DiffeoError(f"component {i + 1} does not preserve parity")
        self._fimg = self.forward + [exterior_d(f) for f in self.forward]
        self._iimg = self.inverse + [exterior_d(f) for f in self.inverse]
        for i in range(sig.n):
            if substitute(self.inverse[i], self._fimg) != sig.coord(i):
                raise DiffeoError(f"inverse fails on component {i + 1}")
            if substitute(self.forward[i], self._iimg) != sig.coord(i):
                raise DiffeoError(f"inverse fails on component {i + 1}")

    @classmethod
    def identity(cls, sig):
        return cls(sig, sig.coords(), sig.coords(), "id")

    def inv(self) -> "PolyDiffeo":
        return PolyDiffeo(self.sig, self.inverse, self.forward, self.name + "^-1")

    def then(self, other: "PolyDiffeo") -> "PolyDiffeo":
        """other o self (first self, then other)."""
        fwd = [substitute(c, self._fimg) for c in other.forward]
        inv = [substitute(c, other._iimg) for c in self.inverse]
        return PolyDiffeo(self.sig, fwd, inv, f"{other.name}.{self.name}")

    def pullback(self, w: SuperForm) -> SuperForm:
        return substitute(w, self._fimg)

    def pushforward(self, w: SuperForm) -> SuperForm:
        return substitute(w, self._iimg)

    def pull_field(self, X: SuperVectorField) -> SuperVectorField:
        """phi^* X, the field on W with (phi^*X)(phi^* f) = phi^*(X f)."""
        return SuperVectorField(self.sig, [self.pullback(X.apply(g)) for g in self.inverse])

    def push_field(self, Y: SuperVectorField) -> SuperVectorField:
        return SuperVectorField(self.sig, [self.pushforward(Y.apply(g)) for g in self.forward])

    def pull_matrix(self, M: MatrixForm) -> MatrixForm:
        return M.map(self.pullback)

    def chart_map(self) -> ChartMap:
        back = ChartMap(self.pushforward, self.pushforward, self.push_field, name=self.name + "_*")
        fwd = ChartMap(self.pullback, self.pullback, self.pull_field, inverse=back,
                       name=self.name + "^*")
        back.inverse = fwd
        return fwd

    def __repr__(self):
        return f"PolyDiffeo({self.name}: {', '.join(map(str, self.forward))})"


class WZData:
    def __init__(self, g, theta, wz):
        self.g = g
        self.theta = theta
        self.wz = wz

    def __repr__(self):
        return f"WZData(g={self.g}, theta={self.theta}, wz={self.wz})"


def jacobian(phi: PolyDiffeo) -> MatrixForm:
    """g^i_j = eps_j eps_ij d_j phi^i, so that phi^* db^i = g^i_j db^j."""
    sig = phi.sig
    return MatrixForm(sig, [[partial(j, phi.forward[i]) * (sig.eps(j) * sig.eps2(i, j))
                             for j in range(sig.n)] for i in range(sig.n)])


def jacobian_inverse(phi: PolyDiffeo, g: MatrixForm | None = None) -> MatrixForm:
    """g_phi^-1 = phi^* g_{phi^-1} by the chain rule; verified."""
    g = g if g is not None else jacobian(phi)
    h = phi.pull_matrix(jacobian(phi.inv()))
    if g @ h != MatrixForm.identity(phi.sig):
        raise DiffeoError("Jacobian not invertible over polynomials")
    return h


def wz_data(phi: PolyDiffeo) -> WZData:
    g = jacobian(phi)
    h = jacobian_inverse(phi, g)
    theta = h @ g.d()
    wz = supertrace(theta @ theta @ theta) * Fraction(1, 3)
    mc = theta.d() + theta @ theta
    if not mc.is_zero():
        raise AssertionError("Maurer-Cartan identity failed")
    if not exterior_d(wz).is_zero():
        raise AssertionError("WZ form not closed")
    return WZData(g, theta, wz)


def delta_map(phi: PolyDiffeo, xi: SuperForm | None = None, data: WZData | None = None
              ) -> AlgebroidMorphism:
    """(phi^*, Delta_{phi,xi}) from the coordinate structure on W' to the one on W."""
    sig = phi.sig
    data = data or wz_data(phi)
    xi = xi if xi is not None else sig.zero()
    if xi.terms and (xi.degree() != 2 or xi.parity()):
        raise DiffeoError("xi must be an even 2-form")
    res = exterior_d(xi) - data.wz
    if not res.is_zero():
        raise PreconditionError(f"d xi != WZ; residual {res}", res)
    theta = data.theta

    def delta(X):
        Y = phi.pull_field(X)
        out = -first_order_term(theta, Y)
        out = out - str_tensor_contract(theta, theta, Y) * HALF
        if xi.terms:
            out = out - contract(Y, xi) * HALF
        return out

    return AlgebroidMorphism(phi.chart_map(), delta, name=f"delta({phi.name})")


def sigma_form(phi: PolyDiffeo, phi2: PolyDiffeo, d1: WZData | None = None,
               d2: WZData | None = None) -> SuperForm:
    """sigma_{phi2, phi} = Str(theta_phi ^ g^-1 phi^* theta_phi2 g)."""
    d1 = d1 or wz_data(phi)
    d2 = d2 or wz_data(phi2)
    h = jacobian_inverse(phi, d1.g)
    return supertrace(d1.theta @ (h @ phi.pull_matrix(d2.theta) @ d1.g))


def compose_check(phi: PolyDiffeo, xi, phi2: PolyDiffeo, xi2) -> Report:
    """phi^*_xi o phi2^*_xi2 = (phi2 phi)^*_eta and the cocycle identities."""
    sig = phi.sig
    xi = xi if xi is not None else sig.zero()
    xi2 = xi2 if xi2 is not None else sig.zero()
    d1, d2 = wz_data(phi), wz_data(phi2)
    comp = phi.then(phi2)
    d12 = wz_data(comp)
    sigma = sigma_form(phi, phi2, d1, d2)
    eta = xi + phi.pullback(xi2) + sigma
    report = Report()

    r = CheckResult("chain rule", "g_{phi2 phi} = (phi^* g_phi2) g_phi", samples=1)
    if d12.g != phi.pull_matrix(d2.g) @ d1.g:
        r.fail("Jacobians differ")
    report.append(r)

    r = CheckResult("Str theta additivity", "Str theta_{phi2 phi} = Str theta_phi + phi^* Str theta_phi2",
                    samples=1)
    lhs = supertrace(d12.theta)
    rhs = supertrace(d1.theta) + phi.pullback(supertrace(d2.theta))
    if lhs != rhs:
        r.fail(f"{lhs} vs {rhs}")
    report.append(r)

    r = CheckResult("WZ cocycle", "WZ_{phi2 phi} = WZ_phi + phi^* WZ_phi2 + d sigma", samples=1)
    rhs = d1.wz + phi.pullback(d2.wz) + exterior_d(sigma)
    if d12.wz != rhs:
        r.fail(f"{d12.wz} vs {rhs}")
    report.append(r)

    r = CheckResult("composition", "phi^*_xi o phi2^*_xi2 = (phi2 phi)^*_eta on coordinate fields")
    m1 = delta_map(phi, xi, d1)
    m2 = delta_map(phi2, xi2, d2)
    m12 = delta_map(comp, eta, d12)
    for X in sig.coordinate_fields():
        # phi^*_xi (phi2^* X + D2(X)) = comp^* X + phi^* D2(X) + D1(phi2^* X)
        r.samples += 1
        lhs = phi.pullback(m2.delta(X)) + m1.delta(phi2.pull_field(X))
        rhs = m12.delta(X)
        if lhs != rhs:
            r.fail(f"X={X}: {lhs} vs {rhs}")
    r.detail["eta"] = str(eta)
    report.append(r)
    return report


def verify_delta_map(phi: PolyDiffeo, xi=None, samples: int = 20, seed: int = 0) -> Report:
    """check_morphism of (phi^*, Delta_{phi,xi}) between coordinate structures."""
    V = coordinate_structure(phi.sig)
    m = delta_map(phi, xi)
    return check_morphism(V, V, m, samples=samples, seed=seed, generators_only=True)


def primitive_of_wz(phi: PolyDiffeo) -> SuperForm:
    """A 2-form xi with d xi = WZ_phi."""
    return homotopy(wz_data(phi).wz)


def conformal_transform(phi: PolyDiffeo, xi=None, omega=None) -> Report:
    """Check phi^*_xi(nu^omega) = nu^{phi^* omega - Str theta} in the Fock space.

    The image of nu^omega = eps_i (d_i)_(-1) db^i + 1/2 T(omega) is computed from the
    images of the generators: d_i -> s(phi^* d_i) + Delta(d_i), db^i -> phi^* db^i.
    """
    from . import free_va as fva
    sig = phi.sig
    omega = omega if omega is not None else sig.zero()
    if omega.terms and (omega.degree() != 1 or omega.parity()):
        raise PreconditionError("omega must be an even 1-form")
    if not exterior_d(omega).is_zero():
        raise PreconditionError("omega is not closed", exterior_d(omega))
    data = wz_data(phi)
    m = delta_map(phi, xi, data)
    space = fva.FockSpace(sig)
    image = space.zero()
    for i, X in enumerate(sig.coordinate_fields()):
        field_img = fva.field_state(space, phi.pull_field(X))
        dlt = m.delta(X)
        if dlt.terms:
            field_img = field_img + fva.form_state(space, dlt)
        db_img = fva.form_state(space, exterior_d(phi.forward[i]))
        image = image + fva.nth_product(field_img, -1, db_img).scale(sig.eps(i))
    pulled = phi.pullback(omega)
    if pulled.terms:
        image = image + fva.translation(fva.form_state(space, pulled)).scale(HALF)
    new_omega = pulled - supertrace(data.theta)
    expected = fva.conformal_element(sig, new_omega, space)
    r = CheckResult("conformal transform", "phi^*_xi(nu^omega) = nu^{phi^* omega - Str theta}", samples=1)
    r.detail["new omega"] = str(new_omega)
    if image != expected:
        r.fail(f"image {fva.format_state(image)} vs {fva.format_state(expected)}")
    return Report([r])
