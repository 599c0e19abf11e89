"""Extended Lie superalgebroids, vertex superalgebroids and their morphisms.

The structure maps are stored as callables over an *extended Lie algebroid*
``base`` that knows how to multiply, differentiate, bracket and pair its
functions, one-forms and vector fields.  Two bases are provided: the
polynomial chart A^{p|q} and the degenerate one attached to a Lie algebra
(functions = scalars, no one-forms).

Super signs follow the Koszul rule relative to the order in which the
arguments appear in the first term of each identity.
"""
from __future__ import annotations

import itertools
import random
from fractions import Fraction
from typing import Callable

from .report import CheckResult, Report
from .superpoly import (ChartSignature, MatrixForm, SuperForm, SuperVectorField,
                        bracket_vf, contract, exterior_d, lie_derivative, pair,
                        partial, supertrace, format_field)

HALF = Fraction(1, 2)


def _sgn(x, negative: bool):
    return -x if negative else x


# ---------------------------------------------------------------------------
# Extended Lie algebroids

class ChartAlgebroid:
    """Functions, one-forms and vector fields on A^{p|q}."""

    kind = "chart"

    def __init__(self, sig: ChartSignature):
        self.sig = sig

    def __eq__(self, other):
        return isinstance(other, ChartAlgebroid) and other.sig == self.sig

    def __hash__(self):
        return hash(("chart", self.sig))

    def zero_function(self):
        return self.sig.zero()

    def zero_form(self):
        return self.sig.zero()

    def zero_field(self):
        return SuperVectorField(self.sig, [self.sig.zero()] * self.sig.n)

    def mul(self, f, g):
        return f * g

    def mul_form(self, f, alpha):
        return f * alpha

    def mul_field(self, f, X):
        return X.scale(f)

    def act(self, X, f):
        return X.apply(f)

    def lie(self, X, alpha):
        return lie_derivative(X, alpha)

    def bracket(self, X, Y):
        return bracket_vf(X, Y)

    def d(self, f):
        return exterior_d(f)

    def pair(self, alpha, X):
        return pair(alpha, X)

    def parity(self, x) -> int:
        return x.parity()

    def parts(self, x) -> dict:
        return x.parity_parts()

    def is_zero(self, x) -> bool:
        return x.is_zero()

    def fmt(self, x) -> str:
        if isinstance(x, SuperVectorField):
            return format_field(x)
        return str(x)


class LieVector:
    """Element of a finite-dimensional Lie algebra in a fixed basis."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        self.coeffs = {k: v for k, v in dict(coeffs).items() if v}

    def __add__(self, other):
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0) + v
        return LieVector(out)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return LieVector({k: -v for k, v in self.coeffs.items()})

    def scale(self, c):
        return LieVector({k: c * v for k, v in self.coeffs.items()})

    def __eq__(self, other):
        return isinstance(other, LieVector) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(frozenset(self.coeffs.items()))

    def is_zero(self):
        return not self.coeffs

    def __repr__(self):
        return "LieVector(" + " + ".join(f"{v}*e{k}" for k, v in sorted(self.coeffs.items())) + ")"


class LieAlgebroid:
    """(C, 0, g): scalars as functions, no one-forms, trivial action."""

    kind = "lie"

    def __init__(self, struct_constants: dict, dim: int):
        self.dim = dim
        self.sc = {k: dict(v) for k, v in struct_constants.items()}

    def basis(self):
        return [LieVector({a: 1}) for a in range(self.dim)]

    def zero_function(self):
        return 0

    def zero_form(self):
        return 0

    def zero_field(self):
        return LieVector({})

    def mul(self, f, g):
        return f * g

    def mul_form(self, f, alpha):
        return 0

    def mul_field(self, f, X):
        return X.scale(f)

    def act(self, X, f):
        return 0

    def lie(self, X, alpha):
        return 0

    def bracket(self, X, Y):
        out: dict = {}
        for a, xa in X.coeffs.items():
            for b, yb in Y.coeffs.items():
                for c, v in self.sc.get((a, b), {}).items():
                    out[c] = out.get(c, 0) + xa * yb * v
        return LieVector(out)

    def d(self, f):
        return 0

    def pair(self, alpha, X):
        return 0

    def parity(self, x) -> int:
        return 0

    def parts(self, x) -> dict:
        return {0: x}

    def is_zero(self, x) -> bool:
        if isinstance(x, LieVector):
            return x.is_zero()
        return x == 0

    def fmt(self, x) -> str:
        return repr(x)


# ---------------------------------------------------------------------------
# Vertex algebroid structures

class VertexAlgebroidStructure:
    """(star, brace, brace_omega) over an extended Lie algebroid.

    The callables receive parity-homogeneous arguments; the public methods
    extend them bilinearly.
    """

    def __init__(self, base, star: Callable, brace: Callable, brace_omega: Callable,
                 provenance: str = "custom"):
        self.base = base
        self._star = star
        self._brace = brace
        self._brace_omega = brace_omega
        self.provenance = provenance

    def _bilinear(self, fn, x, y, zero):
        base = self.base
        out = zero
        for _, xp in base.parts(x).items():
            if base.is_zero(xp):
                continue
            for _, yp in base.parts(y).items():
                if base.is_zero(yp):
                    continue
                out = out + fn(xp, yp)
        return out

    def star(self, f, X):
        return self._bilinear(self._star, f, X, self.base.zero_form())

    def brace(self, X, Y):
        return self._bilinear(self._brace, X, Y, self.base.zero_function())

    def brace_omega(self, X, Y):
        return self._bilinear(self._brace_omega, X, Y, self.base.zero_form())

    def __repr__(self):
        return f"VertexAlgebroidStructure({self.provenance})"


def _coordinate_star(sig, f, X):
    """-(eps_i eps_j)^{1+|f|+|X|} (d_j d_i f) X^i db^j."""
    e = (1 + f.parity() + X.parity()) % 2
    out = sig.zero()
    for i in range(sig.n):
        Xi = X.comps[i]
        if not Xi.terms:
            continue
        di = partial(i, f)
        if not di.terms:
            continue
        for j in range(sig.n):
            dji = partial(j, di)
            if not dji.terms:
                continue
            s = sig.eps(i) * sig.eps(j) if e else 1
            out = out - (dji * Xi * sig.dcoord(j)) * s
    return out


def coordinate_structure(sig: ChartSignature) -> VertexAlgebroidStructure:
    """The structure of the beta-gamma/bc system in the splitting s(X) = eps_i^{1+|X|} a_{i,-1} X^i."""
    base = ChartAlgebroid(sig)
    n = sig.n
    eps = [sig.eps(i) for i in range(n)]

    def star(f, X):
        return _coordinate_star(sig, f, X)

    def brace(X, Y):
        e = (1 + X.parity() + Y.parity()) % 2
        out = sig.zero()
        for i in range(n):
            for j in range(n):
                a = partial(j, X.comps[i])
                if not a.terms:
                    continue
                b = partial(i, Y.comps[j])
                if not b.terms:
                    continue
                s = eps[j] if e else 1
                out = out - (a * b) * s
        return out

    def brace_omega(X, Y):
        e = (1 + X.parity() + Y.parity()) % 2
        out = sig.zero()
        for i in range(n):
            for j in range(n):
                b = partial(i, Y.comps[j])
                if not b.terms:
                    continue
                a = partial(j, X.comps[i])
                if not a.terms:
                    continue
                for k in range(n):
                    c = partial(k, a)
                    if not c.terms:
                        continue
                    s = eps[j] * eps[k] if e else 1
                    out = out - (c * b * sig.dcoord(k)) * s
        return out

    return VertexAlgebroidStructure(base, star, brace, brace_omega, "coordinate")


def lie_structure(struct_constants: dict, form, dim: int | None = None) -> VertexAlgebroidStructure:
    """The structure (C, 0, g, 0, lambda, 0) of a Lie algebra with bilinear form lambda.

    ``struct_constants[(a, b)] = {c: coeff}`` encodes [e_a, e_b]; ``form`` is a
    square matrix.
    """
    dim = dim if dim is not None else len(form)
    base = LieAlgebroid(struct_constants, dim)

    def brace(X, Y):
        return sum((xa * yb * form[a][b] for a, xa in X.coeffs.items()
                    for b, yb in Y.coeffs.items()), 0)

    return VertexAlgebroidStructure(base, lambda f, X: 0, brace, lambda X, Y: 0, "lie")


def sl2_constants():
    """Basis e, h, f (indices 0, 1, 2) of sl_2."""
    return {
        (1, 0): {0: 2}, (0, 1): {0: -2},
        (1, 2): {2: -2}, (2, 1): {2: 2},
        (0, 2): {1: 1}, (2, 0): {1: -1},
    }


def killing_form_sl2(scale=1):
    # trace form in the defining representation: (e,f) = 1, (h,h) = 2
    return [[0, 0, scale], [0, 2 * scale, 0], [scale, 0, 0]]


# ---------------------------------------------------------------------------
# The seven axioms

AXIOM_NAMES = {
    1: "{X,Y} symmetric",
    2: "d{X,Y} = {X,Y}_O + {Y,X}_O",
    3: "(fg)*X Leibniz defect",
    4: "{X,fY} A-linearity defect",
    5: "{X,fY}_O A-linearity defect",
    6: "invariance of { }",
    7: "cocycle identity for { }_O",
}


def axiom_residual(V: VertexAlgebroidStructure, k: int, f=None, g=None, X=None, Y=None, Z=None):
    """LHS - RHS of axiom k on homogeneous inputs."""
    b = V.base
    if k == 1:
        px, py = b.parity(X), b.parity(Y)
        return V.brace(X, Y) - _sgn(V.brace(Y, X), px & py)
    if k == 2:
        px, py = b.parity(X), b.parity(Y)
        return b.d(V.brace(X, Y)) - V.brace_omega(X, Y) - _sgn(V.brace_omega(Y, X), px & py)
    if k == 3:
        pf, pg, px = b.parity(f), b.parity(g), b.parity(X)
        lhs = V.star(b.mul(f, g), X) - V.star(f, b.mul_field(g, X)) - b.mul_form(f, V.star(g, X))
        rhs1 = _sgn(b.mul_form(b.act(X, f), b.d(g)), px & (pf ^ pg))
        rhs2 = _sgn(b.mul_form(b.act(X, g), b.d(f)), (px & (pf ^ pg)) ^ (pf & pg))
        return lhs + rhs1 + rhs2
    if k == 4:
        px, pf, py = b.parity(X), b.parity(f), b.parity(Y)
        lhs = V.brace(X, b.mul_field(f, Y)) - _sgn(b.mul(f, V.brace(X, Y)), px & pf)
        rhs1 = _sgn(b.pair(V.star(f, Y), X), px & (pf ^ py))
        rhs2 = _sgn(b.act(Y, b.act(X, f)), py & (px ^ pf))
        return lhs + rhs1 + rhs2
    if k == 5:
        px, pf, py = b.parity(X), b.parity(f), b.parity(Y)
        lhs = V.brace_omega(X, b.mul_field(f, Y)) - _sgn(b.mul_form(f, V.brace_omega(X, Y)), px & pf)
        rhs = (-b.lie(X, V.star(f, Y)) + V.star(b.act(X, f), Y)
               + _sgn(V.star(f, b.bracket(X, Y)), px & pf))
        return lhs - rhs
    if k == 6:
        px, py, pz = b.parity(X), b.parity(Y), b.parity(Z)
        lhs = (b.act(X, V.brace(Y, Z)) - V.brace(b.bracket(X, Y), Z)
               - _sgn(V.brace(Y, b.bracket(X, Z)), px & py))
        rhs = b.pair(V.brace_omega(X, Y), Z) + _sgn(b.pair(V.brace_omega(X, Z), Y), py & pz)
        return lhs - rhs
    if k == 7:
        px, py, pz = b.parity(X), b.parity(Y), b.parity(Z)
        lhs = (b.lie(X, V.brace_omega(Y, Z))
               - _sgn(b.lie(Y, V.brace_omega(X, Z)), px & py)
               + _sgn(b.lie(Z, V.brace_omega(X, Y)), pz & (px ^ py))
               + V.brace_omega(X, b.bracket(Y, Z))
               - _sgn(V.brace_omega(Y, b.bracket(X, Z)), px & py)
               - V.brace_omega(b.bracket(X, Y), Z))
        rhs = b.d(b.pair(V.brace_omega(X, Y), Z))
        return lhs - rhs
    raise ValueError(f"no axiom {k}")


AXIOM_SLOTS = {1: ("X", "Y"), 2: ("X", "Y"), 3: ("f", "g", "X"), 4: ("X", "f", "Y"),
               5: ("X", "f", "Y"), 6: ("X", "Y", "Z"), 7: ("X", "Y", "Z")}


class Sampler:
    """Seeded random homogeneous inputs: coefficients in [-c, c], degree <= max_degree."""

    def __init__(self, base, seed: int = 0, max_degree: int = 3, coeff_range: int = 2,
                 max_terms: int = 3):
        self.base = base
        self.rng = random.Random(seed)
        self.max_degree = max_degree
        self.coeff_range = coeff_range
        self.max_terms = max_terms
        if base.kind == "chart":
            mons = base.sig.function_monomials(max_degree)
            self._by_parity = {0: [], 1: []}
            for m in mons:
                self._by_parity[m.parity()].append(m)

    def coeff(self):
        c = 0
        while c == 0:
            c = self.rng.randint(-self.coeff_range, self.coeff_range)
        return c

    def function(self, parity=None):
        b = self.base
        if b.kind == "lie":
            return self.rng.randint(-self.coeff_range, self.coeff_range)
        if parity is None:
            parity = self.rng.randint(0, 1) if b.sig.q else 0
        pool = self._by_parity[parity]
        if not pool:
            return b.sig.zero()
        out = b.sig.zero()
        for _ in range(self.rng.randint(1, self.max_terms)):
            out = out + self.rng.choice(pool) * self.coeff()
        return out

    def field(self, parity=None):
        b = self.base
        if b.kind == "lie":
            return LieVector({a: self.rng.randint(-self.coeff_range, self.coeff_range)
                              for a in range(b.dim)})
        sig = b.sig
        if parity is None:
            parity = self.rng.randint(0, 1) if sig.q else 0
        comps = []
        for i in range(sig.n):
            if self.rng.random() < 0.6:
                comps.append(self.function(parity ^ sig.parity[i]))
            else:
                comps.append(sig.zero())
        return SuperVectorField(sig, comps)

    def draw(self, slot):
        return self.field() if slot in ("X", "Y", "Z") else self.function()


def _basis_inputs(base, max_degree):
    """(degree, element) pairs spanning functions and fields up to max_degree."""
    if base.kind == "lie":
        return [(0, 1)], [(0, v) for v in base.basis()]
    sig = base.sig
    funcs = []
    for m in sig.function_monomials(max_degree):
        deg = len(next(iter(m.terms)))
        funcs.append((deg, m))
    fields = []
    for deg, m in funcs:
        for i in range(sig.n):
            fields.append((deg, SuperVectorField.basis(sig, i, m)))
    return funcs, fields


def check_axioms(V: VertexAlgebroidStructure, samples: int = 200, seed: int = 0,
                 exhaustive_degree: int | None = 3, axioms=range(1, 8),
                 max_degree: int = 3) -> Report:
    """Evaluate the seven identities on random and exhaustive monomial inputs.

    The exhaustive sweep runs over basis inputs (monomial times coordinate
    field) whose polynomial degrees add up to at most ``exhaustive_degree``.
    """
    base = V.base
    results = {k: CheckResult(f"axiom {k}", AXIOM_NAMES[k]) for k in axioms}
    sampler = Sampler(base, seed=seed, max_degree=max_degree)

    def run(k, inputs):
        res = results[k]
        res.samples += 1
        if res.status != "pass":
            return
        r = axiom_residual(V, k, **inputs)
        if not base.is_zero(r):
            witness = ", ".join(f"{name}={base.fmt(val)}" for name, val in inputs.items())
            res.fail(f"{witness} -> residual {base.fmt(r)}")

    for _ in range(samples):
        draws = {s: sampler.draw(s) for s in ("f", "g", "X", "Y", "Z")}
        for k in axioms:
            run(k, {s: draws[s] for s in AXIOM_SLOTS[k]})

    if exhaustive_degree is not None:
        funcs, fields = _basis_inputs(base, exhaustive_degree)
        for k in axioms:
            slots = AXIOM_SLOTS[k]
            pools = [fields if s in ("X", "Y", "Z") else funcs for s in slots]
            for combo in itertools.product(*pools):
                if sum(dg for dg, _ in combo) > exhaustive_degree:
                    continue
                run(k, {s: el for s, (_, el) in zip(slots, combo)})
    return Report(results[k] for k in axioms)


# ---------------------------------------------------------------------------
# Morphisms and transport

class ChartMap:
    """An isomorphism of extended Lie algebroids between charts of one signature.

    ``fn``, ``form``, ``field`` push source objects to the target; ``inverse``
    is another ChartMap going back.
    """

    def __init__(self, fn, form, field, inverse=None, name="map"):
        self.fn = fn
        self.form = form
        self.field = field
        self.inverse = inverse
        self.name = name


def identity_map(sig=None) -> ChartMap:
    ident = lambda x: x  # noqa: E731
    m = ChartMap(ident, ident, ident, name="id")
    m.inverse = m
    return m


class AlgebroidMorphism:
    """(phi, Delta): phi a map of extended Lie algebroids, Delta: T -> Omega' even."""

    def __init__(self, phi: ChartMap, delta: Callable, name="morphism"):
        self.phi = phi
        self._delta = delta
        self.name = name

    def delta(self, X):
        out = None
        for _, Xp in X.parity_parts().items():
            val = self._delta(Xp)
            out = val if out is None else out + val
        if out is None:
            out = self.phi.form(X.sig.zero()) if hasattr(X, "sig") else 0
        return out


def morphism_residual(V, W, m: AlgebroidMorphism, k: int, f=None, X=None, Y=None):
    """LHS - RHS of the k-th morphism identity (k = 1, 2, 3)."""
    b = W.base
    phi = m.phi
    if k == 1:
        lhs = W.star(phi.fn(f), phi.field(X)) - phi.form(V.star(f, X))
        rhs = m.delta(V.base.mul_field(f, X)) - b.mul_form(phi.fn(f), m.delta(X))
        return lhs - rhs
    px, py = V.base.parity(X), V.base.parity(Y)
    pX, pY = phi.field(X), phi.field(Y)
    if k == 2:
        lhs = W.brace(pX, pY) - phi.fn(V.brace(X, Y))
        rhs = -b.pair(m.delta(X), pY) - _sgn(b.pair(m.delta(Y), pX), px & py)
        return lhs - rhs
    if k == 3:
        lhs = W.brace_omega(pX, pY) - phi.form(V.brace_omega(X, Y))
        rhs = (-b.lie(pX, m.delta(Y)) + _sgn(b.lie(pY, m.delta(X)), px & py)
               - b.d(b.pair(m.delta(X), pY)) + m.delta(V.base.bracket(X, Y)))
        return lhs - rhs
    raise ValueError(k)


class InvalidMorphismError(ValueError):
    """The underlying map does not respect the extended Lie algebroid operations."""


def verify_base_map(src, tgt, phi: ChartMap, samples: int = 10, seed: int = 0) -> None:
    sampler = Sampler(src, seed=seed, max_degree=2)
    for _ in range(samples):
        f, g = sampler.function(), sampler.function()
        X, Y = sampler.field(), sampler.field()
        alpha = src.mul_form(g, src.d(f))
        checks = (
            ("products", phi.fn(src.mul(f, g)), tgt.mul(phi.fn(f), phi.fn(g))),
            ("d", phi.form(src.d(f)), tgt.d(phi.fn(f))),
            ("action", phi.fn(src.act(X, f)), tgt.act(phi.field(X), phi.fn(f))),
            ("bracket", phi.field(src.bracket(X, Y)), tgt.bracket(phi.field(X), phi.field(Y))),
            ("pairing", phi.fn(src.pair(alpha, X)), tgt.pair(phi.form(alpha), phi.field(X))),
            ("module", phi.field(src.mul_field(f, X)), tgt.mul_field(phi.fn(f), phi.field(X))),
        )
        for name, a, b in checks:
            if not tgt.is_zero(a - b):
                raise InvalidMorphismError(f"map does not respect {name}")


MORPHISM_NAMES = {1: "star compatibility", 2: "brace compatibility", 3: "brace_omega compatibility"}


def check_morphism(V, W, m: AlgebroidMorphism, samples: int = 50, seed: int = 0,
                   generators_only: bool = False, max_degree: int = 2) -> Report:
    """Test the three morphism identities.

    With ``generators_only`` the vector fields run over the coordinate fields,
    which are closed under the bracket and span the fields as a module, so this
    already implies the identities everywhere.
    """
    verify_base_map(V.base, W.base, m.phi, seed=seed)
    results = {k: CheckResult(f"morphism {k}", MORPHISM_NAMES[k]) for k in (1, 2, 3)}
    base = V.base
    sampler = Sampler(base, seed=seed, max_degree=max_degree)

    def run(k, **inputs):
        res = results[k]
        res.samples += 1
        if res.status != "pass":
            return
        r = morphism_residual(V, W, m, k, **inputs)
        if not W.base.is_zero(r):
            witness = ", ".join(f"{n}={base.fmt(v)}" for n, v in inputs.items())
            res.fail(f"{witness} -> residual {W.base.fmt(r)}")

    if generators_only and base.kind == "chart":
        gens = base.sig.coordinate_fields()
        funcs = base.sig.function_monomials(max_degree)
        for X in gens:
            for f in funcs:
                run(1, f=f, X=X)
            for Y in gens:
                run(2, X=X, Y=Y)
                run(3, X=X, Y=Y)
    for _ in range(samples):
        f = sampler.function()
        X, Y = sampler.field(), sampler.field()
        run(1, f=f, X=X)
        run(2, X=X, Y=Y)
        run(3, X=X, Y=Y)
    return Report(results[k] for k in (1, 2, 3))


def b_field_morphism(B: SuperForm) -> AlgebroidMorphism:
    """(id, Delta_B) with Delta_B(X) = 1/2 i_X B."""
    return AlgebroidMorphism(identity_map(), lambda X: contract(X, B) * HALF, name="id_B")


def transport(V: VertexAlgebroidStructure, phi: ChartMap, delta: Callable,
              target_base=None) -> VertexAlgebroidStructure:
    """The structure on the target making (phi, delta) a morphism."""
    src = V.base
    tgt = target_base or src
    inv = phi.inverse
    m = AlgebroidMorphism(phi, delta)

    def star(f2, X2):
        f, X = inv.fn(f2), inv.field(X2)
        return phi.form(V.star(f, X)) + m.delta(src.mul_field(f, X)) - tgt.mul_form(f2, m.delta(X))

    def brace(X2, Y2):
        X, Y = inv.field(X2), inv.field(Y2)
        px, py = src.parity(X), src.parity(Y)
        return (phi.fn(V.brace(X, Y)) - tgt.pair(m.delta(X), Y2)
                - _sgn(tgt.pair(m.delta(Y), X2), px & py))

    def brace_omega(X2, Y2):
        X, Y = inv.field(X2), inv.field(Y2)
        px, py = src.parity(X), src.parity(Y)
        return (phi.form(V.brace_omega(X, Y)) - tgt.lie(X2, m.delta(Y))
                + _sgn(tgt.lie(Y2, m.delta(X)), px & py)
                - tgt.d(tgt.pair(m.delta(X), Y2)) + m.delta(src.bracket(X, Y)))

    return VertexAlgebroidStructure(tgt, star, brace, brace_omega, f"transported({V.provenance})")


def structures_agree(V, W, samples: int = 50, seed: int = 0, max_degree: int = 2) -> CheckResult:
    """Pointwise comparison of two structures over the same base."""
    res = CheckResult("structures agree", "pointwise equality of star, brace, brace_omega")
    sampler = Sampler(V.base, seed=seed, max_degree=max_degree)
    b = V.base
    for _ in range(samples):
        f, X, Y = sampler.function(), sampler.field(), sampler.field()
        res.samples += 1
        for name, a, c in (("star", V.star(f, X), W.star(f, X)),
                           ("brace", V.brace(X, Y), W.brace(X, Y)),
                           ("brace_omega", V.brace_omega(X, Y), W.brace_omega(X, Y))):
            if not b.is_zero(a - c):
                res.fail(f"{name} differs at f={b.fmt(f)}, X={b.fmt(X)}, Y={b.fmt(Y)}: "
                         f"{b.fmt(a)} vs {b.fmt(c)}")
                return res
    return res


# ---------------------------------------------------------------------------
# Connections, curvature, Chern-Simons

class ConnectionData:
    """An even gl(p|q)-valued one-form Gamma and its curvature dGamma + Gamma^Gamma."""

    def __init__(self, gamma: MatrixForm):
        self.sig = gamma.sig
        self.gamma = gamma
        for _, _, e in gamma.entries():
            if e.terms and e.degree() != 1:
                raise ValueError("connection entries must be one-forms")
        if not gamma.is_even():
            raise ValueError("connection form must be even: |Gamma^i_j| = |b^i| + |b^j|")
        self._R = None

    @classmethod
    def flat(cls, sig):
        return cls(MatrixForm.zero(sig))

    @property
    def R(self) -> MatrixForm:
        if self._R is None:
            self._R = self.gamma.d() + self.gamma @ self.gamma
        return self._R

    def is_even(self) -> bool:
        return self.gamma.is_even()

    @property
    def frame_gamma(self) -> MatrixForm:
        """Gamma conjugated by diag(eps): the connection form acting on right coefficients."""
        return _eps_conjugate(self.gamma)

    @property
    def frame_curvature(self) -> MatrixForm:
        return _eps_conjugate(self.R)

    def bianchi_residual(self) -> MatrixForm:
        """dR - (R^Gamma - Gamma^R); zero for every Gamma."""
        return self.R.d() - (self.R @ self.gamma - self.gamma @ self.R)

    def __repr__(self):
        return f"ConnectionData({self.gamma})"


def _eps_conjugate(M: MatrixForm) -> MatrixForm:
    sig = M.sig
    return MatrixForm(sig, [[M.rows[k][j] * (sig.eps(k) * sig.eps(j)) for j in range(sig.n)]
                            for k in range(sig.n)])


def cs_form(conn: ConnectionData) -> SuperForm:
    """CS(Gamma) = Str(Gamma^R) - 1/3 Str(Gamma^Gamma^Gamma)."""
    G = conn.gamma
    return supertrace(G @ conn.R) - supertrace(G @ G @ G) * Fraction(1, 3)


def cs_identity_residual(conn: ConnectionData) -> SuperForm:
    return exterior_d(cs_form(conn)) - supertrace(conn.R @ conn.R)


def euler_field(sig: ChartSignature) -> SuperVectorField:
    return SuperVectorField(sig, sig.coords())


def homotopy(w: SuperForm) -> SuperForm:
    """A primitive of a closed polynomial form of positive degree.

    The Euler field E = sum b^i d_i scales a monomial by its number of factors,
    so for closed w the form sum (1/weight) i_E(w_monomial) has differential w.
    """
    sig = w.sig
    E = euler_field(sig)
    out = sig.zero()
    for m, c in w.terms.items():
        if not m:
            continue
        mono = SuperForm._raw(sig, {m: c})
        out = out + contract(E, mono) * Fraction(1, len(m))
    return out


def first_order_term(G: MatrixForm, X: SuperVectorField) -> SuperForm:
    """eps_i eps_ij eps_j^{1+|X|} (d_j X^i) G^j_i for homogeneous X."""
    sig = G.sig
    px = X.parity()
    out = sig.zero()
    for i in range(sig.n):
        Xi = X.comps[i]
        if not Xi.terms:
            continue
        for j in range(sig.n):
            gji = G.rows[j][i]
            if not gji.terms:
                continue
            dj = partial(j, Xi)
            if dj.terms:
                s = sig.eps(i) * sig.eps2(i, j) * (sig.eps(j) if not px else 1)
                out = out + (dj * gji) * s
    return out


def str_tensor_contract(G: MatrixForm, K: MatrixForm, X: SuperVectorField) -> SuperForm:
    """i_X Str(G (x) K) = sum_{i,j} eps_i i_X(G^i_j) K^j_i, contracting the first slot."""
    sig = G.sig
    out = sig.zero()
    for i in range(sig.n):
        for j in range(sig.n):
            a, b = G.rows[i][j], K.rows[j][i]
            if a.terms and b.terms:
                out = out + (contract(X, a) * b) * sig.eps(i)
    return out


def connection_delta(conn: ConnectionData, B: SuperForm | None = None) -> Callable:
    """Delta(X) = first_order_term(Gamma, X) + 1/2 i_X Str(Gamma (x) Gamma) + 1/2 i_X B."""
    G = conn.gamma

    def delta(X):
        out = first_order_term(G, X) + str_tensor_contract(G, G, X) * HALF
        if B is not None and B.terms:
            out = out + contract(X, B) * HALF
        return out

    return delta


class PreconditionError(ValueError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


def dh_residual(conn: ConnectionData, H: SuperForm) -> SuperForm:
    return exterior_d(H) - supertrace(conn.R @ conn.R)


def global_structure_via_transport(conn: ConnectionData, H: SuperForm) -> VertexAlgebroidStructure:
    """Coordinate structure transported along (id, Delta) with B a primitive of H - CS(Gamma)."""
    res = dh_residual(conn, H)
    if not res.is_zero():
        raise PreconditionError(f"dH != Str(R^R); residual {res}", res)
    B = homotopy(H - cs_form(conn))
    V = coordinate_structure(conn.sig)
    W = transport(V, identity_map(), connection_delta(conn, B))
    W.provenance = "global(transport)"
    return W


# ---------------------------------------------------------------------------
# The global structure written with the connection

def iota_matrix(X: SuperVectorField, M: MatrixForm) -> MatrixForm:
    """Contract X into an End-valued form; X passes the row frame vector first."""
    sig = M.sig
    out = MatrixForm.zero(sig)
    for px, Xp in X.parity_parts().items():
        out = out + MatrixForm(sig, [[_sgn(contract(Xp, M.rows[k][j]), px & sig.parity[k])
                                      for j in range(sig.n)] for k in range(sig.n)])
    return out


def flat_matrix(X: SuperVectorField) -> MatrixForm:
    """Matrix of Y -> -[X, Y] on the coordinate frame (right coefficients)."""
    sig = X.sig
    out = MatrixForm.zero(sig)
    for px, Xp in X.parity_parts().items():
        rows = []
        for i in range(sig.n):
            pi = sig.parity[i]
            rows.append([_sgn(partial(j, Xp.comps[i]),
                              (px & sig.parity[j]) ^ (pi & px) ^ pi ^ (pi & sig.parity[j]))
                         for j in range(sig.n)])
        out = out + MatrixForm(sig, rows)
    return out


def tilde_nabla(conn: ConnectionData, X: SuperVectorField) -> MatrixForm:
    """Matrix of Y -> nabla_X Y - [X, Y] in the coordinate frame."""
    return flat_matrix(X) + iota_matrix(X, conn.frame_gamma)


def covariant_end(conn: ConnectionData, N: MatrixForm) -> MatrixForm:
    """nabla of an End-valued function: dN + Gamma N - N Gamma."""
    G = conn.frame_gamma
    return N.d() + G @ N - N @ G


def covariant_hessian(conn: ConnectionData, f: SuperForm, X: SuperVectorField) -> SuperForm:
    """-(nabla df)(X): the one-form Y -> -(nabla_Y df)(X), for homogeneous f, X."""
    sig = conn.sig
    G = conn.gamma
    e = (1 + f.parity() + X.parity()) & 1
    out = _coordinate_star(sig, f, X)
    for j in range(sig.n):
        dj = partial(j, f)
        if not dj.terms:
            continue
        for i in range(sig.n):
            Xi, g = X.comps[i], G.rows[j][i]
            if Xi.terms and g.terms:
                s = sig.eps(i) * sig.eps2(i, j) * (sig.eps(j) if e else 1)
                out = out + (dj * Xi * g) * s
    return out


def global_structure(conn: ConnectionData, H: SuperForm) -> VertexAlgebroidStructure:
    """The structure attached to a connection and an even 3-form with dH = Str(R^R)."""
    if H.terms and (H.degree() != 3 or H.parity()):
        raise PreconditionError("H must be an even 3-form")
    res = dh_residual(conn, H)
    if not res.is_zero():
        raise PreconditionError(f"dH != Str(R^R); residual {res}", res)
    sig = conn.sig
    R = conn.frame_curvature

    def star(f, X):
        return covariant_hessian(conn, f, X)

    def brace(X, Y):
        return -supertrace(tilde_nabla(conn, X) @ tilde_nabla(conn, Y))

    def brace_omega(X, Y):
        NX, NY = tilde_nabla(conn, X), tilde_nabla(conn, Y)
        M = -(covariant_end(conn, NX) @ NY) + NX @ iota_matrix(Y, R) - iota_matrix(X, R) @ NY
        out = supertrace(M)
        if H.terms:
            out = out + contract(X, contract(Y, H)) * HALF
        return out

    return VertexAlgebroidStructure(ChartAlgebroid(sig), star, brace, brace_omega, "global")


class ConformalPreconditionError(PreconditionError):
    pass


def conformal_weight1(conn: ConnectionData, omega: SuperForm, X: SuperVectorField) -> SuperForm:
    """Str(tilde_nabla X) - omega(X); requires d omega = Str R."""
    res = exterior_d(omega) - supertrace(conn.R)
    if not res.is_zero():
        raise ConformalPreconditionError(f"d omega != Str R; residual {res}", res)
    return supertrace(tilde_nabla(conn, X)) - pair(omega, X)


# ---------------------------------------------------------------------------
# Connections acting on vector fields

def right_components(Y: SuperVectorField) -> list:
    """Coefficients c^j with Y = sum d_j c^j."""
    sig = Y.sig
    out = [sig.zero() for _ in range(sig.n)]
    for py, Yp in Y.parity_parts().items():
        for j in range(sig.n):
            pj = sig.parity[j]
            out[j] = out[j] + _sgn(Yp.comps[j], (py & pj) ^ pj)
    return out


def from_right_components(sig, comps) -> SuperVectorField:
    left = []
    for i, c in enumerate(comps):
        pi = sig.parity[i]
        acc = sig.zero()
        for pc, cp in c.parity_parts().items():
            acc = acc + _sgn(cp, pc & pi)
        left.append(acc)
    return SuperVectorField(sig, left)


def apply_end(N: MatrixForm, Y: SuperVectorField) -> SuperVectorField:
    """N(Y) for a matrix N acting on right coefficients."""
    sig = N.sig
    yr = right_components(Y)
    out = []
    for i in range(sig.n):
        acc = sig.zero()
        for j in range(sig.n):
            if N.rows[i][j].terms and yr[j].terms:
                acc = acc + N.rows[i][j] * yr[j]
        out.append(acc)
    return from_right_components(sig, out)


def covariant_derivative(conn: ConnectionData, X: SuperVectorField, Y: SuperVectorField) -> SuperVectorField:
    """nabla_X Y = X(Y^i) d_i + (i_X Gamma)(Y)."""
    flat = SuperVectorField(X.sig, [X.apply(c) for c in Y.comps])
    return flat + apply_end(iota_matrix(X, conn.frame_gamma), Y)


def torsion(conn: ConnectionData, X: SuperVectorField, Y: SuperVectorField) -> SuperVectorField:
    out = None
    for px, Xp in X.parity_parts().items():
        for py, Yp in Y.parity_parts().items():
            t = (covariant_derivative(conn, Xp, Yp)
                 - _sgn(covariant_derivative(conn, Yp, Xp), px & py) - bracket_vf(Xp, Yp))
            out = t if out is None else out + t
    return out if out is not None else SuperVectorField(X.sig, [X.sig.zero()] * X.sig.n)


def is_torsion_free(conn: ConnectionData) -> bool:
    fields = conn.sig.coordinate_fields()
    return all(torsion(conn, X, Y).is_zero() for X in fields for Y in fields)


def nabla_matrix(conn: ConnectionData, X: SuperVectorField) -> MatrixForm:
    """Matrix of Y -> (-1)^{|X||Y|} nabla_Y X, the full covariant derivative of X."""
    sig = conn.sig
    cols = []
    for px, Xp in X.parity_parts().items():
        for j, dj in enumerate(sig.coordinate_fields()):
            col = right_components(_sgn(covariant_derivative(conn, dj, Xp), px & sig.parity[j]))
            cols.append((j, col))
    rows = [[sig.zero() for _ in range(sig.n)] for _ in range(sig.n)]
    for j, col in cols:
        for i in range(sig.n):
            rows[i][j] = rows[i][j] + col[i]
    return MatrixForm(sig, rows)


def connection_from_derivatives(sig: ChartSignature, nabla_ab) -> ConnectionData:
    """The connection with nabla_{d_a} d_b = nabla_ab(a, b) on coordinate fields."""
    rows = [[sig.zero() for _ in range(sig.n)] for _ in range(sig.n)]
    for a in range(sig.n):
        for b in range(sig.n):
            col = right_components(nabla_ab(a, b))
            for c in range(sig.n):
                if col[c].terms:
                    rows[c][b] = rows[c][b] + _sgn(sig.dcoord(a) * col[c],
                                                   sig.parity[a] & sig.parity[c])
    return ConnectionData(_eps_conjugate(MatrixForm(sig, rows)))


def connection_from_frame(sig: ChartSignature, frame, coords_in_frame, nabla_frame) -> ConnectionData:
    """Connection given on a frame F_alpha by nabla_{F_alpha} F_beta = nabla_frame(alpha, beta).

    ``coords_in_frame[a][alpha]`` are left coefficients with d_a = sum c F_alpha;
    ``nabla_frame`` returns left coefficients in the frame.
    """
    n = sig.n

    def as_field(coeffs):
        out = SuperVectorField(sig, [sig.zero()] * n)
        for c, F in zip(coeffs, frame):
            if c.terms:
                out = out + F.scale(c)
        return out

    cache = {}

    def nab(alpha, beta):
        if (alpha, beta) not in cache:
            cache[(alpha, beta)] = as_field(nabla_frame(alpha, beta))
        return cache[(alpha, beta)]

    def nabla_ab(a, b):
        out = SuperVectorField(sig, [sig.zero()] * n)
        for alpha, ca in enumerate(coords_in_frame[a]):
            if not ca.terms:
                continue
            Fa = frame[alpha]
            pa = Fa.parity()
            inner = SuperVectorField(sig, [sig.zero()] * n)
            for beta, cb in enumerate(coords_in_frame[b]):
                if not cb.terms:
                    continue
                inner = inner + frame[beta].scale(Fa.apply(cb))
                t = nab(alpha, beta)
                if not t.is_zero():
                    inner = inner + t.scale(_sgn(cb, pa & cb.parity()))
            out = out + inner.scale(ca)
        return out

    return connection_from_derivatives(sig, nabla_ab)


def torsion_free_part(conn: ConnectionData) -> ConnectionData:
    """The connection nabla - T/2, which is torsion free."""
    sig = conn.sig
    fields = sig.coordinate_fields()

    def nabla_ab(a, b):
        X, Y = fields[a], fields[b]
        return covariant_derivative(conn, X, Y) - torsion(conn, X, Y).scale(sig.const(HALF))

    return connection_from_derivatives(sig, nabla_ab)
