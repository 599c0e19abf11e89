"""Polynomial calculus on the affine superspace A^{p|q}.

Coordinates are indexed from 0: indices ``0..p-1`` are even and ``p..p+q-1`` odd.
Functions and differential forms live in one bigraded algebra generated by
b^i (degree 0, parity |b^i|) and db^i (degree 1, parity |b^i|), with the
Deligne sign rule: swapping u and v costs (-1)^(deg u deg v + par u par v).
Hence differentials of even coordinates anticommute while differentials of
odd coordinates commute.

Conventions fixed here and used everywhere else:

* ``partial(i, f)`` is a left derivation, so d f = sum_i db^i (d_i f).
* ``contract(X, w)`` is the left antiderivation with contract(X, db^i) = X^i.
* ``pair(a, X) = (-1)^{|X||a|} contract(X, a)``, giving db^i(d_j) = eps_j delta.
* Matrices use right coefficients, F(d_j) = sum_i d_i F^i_j, so composition is
  the ordinary matrix product and Str of a parity-m matrix is
  sum_i (-1)^{p_i (1 + m)} F^i_i.
"""
from __future__ import annotations

from itertools import combinations, combinations_with_replacement

from . import _superalg as alg
from .scalars import canon, format_scalar, inverse


class SignatureError(ValueError):
    pass


class ChartSignature:
    """Coordinate data of A^{p|q}."""

    def __init__(self, p: int, q: int):
        if p < 0 or q < 0:
            raise SignatureError("p and q must be non-negative")
        self.p = p
        self.q = q
        self.n = p + q
        self.parity = tuple(0 if i < p else 1 for i in range(self.n))
        # grade codes: b^i -> (0, p_i), db^i -> (1, p_i)
        self.grade = tuple([par << 1 for par in self.parity]
                           + [1 | (par << 1) for par in self.parity])
        self._names = None

    def eps(self, i: int) -> int:
        return -1 if self.parity[i] else 1

    def eps2(self, i: int, j: int) -> int:
        return -1 if self.parity[i] and self.parity[j] else 1

    def check_index(self, i):
        if not 0 <= i < self.n:
            raise SignatureError(f"coordinate index {i} out of range for A^{{{self.p}|{self.q}}}")

    def __eq__(self, other):
        return isinstance(other, ChartSignature) and (self.p, self.q) == (other.p, other.q)

    def __hash__(self):
        return hash((self.p, self.q))

    def __repr__(self):
        return f"ChartSignature({self.p}, {self.q})"

    # element constructors
    def const(self, c=1) -> "SuperForm":
        return SuperForm(self, {(): c} if c else {})

    def zero(self) -> "SuperForm":
        return SuperForm(self, {})

    def coord(self, i: int) -> "SuperForm":
        self.check_index(i)
        return SuperForm(self, {(i,): 1})

    def dcoord(self, i: int) -> "SuperForm":
        self.check_index(i)
        return SuperForm(self, {(self.n + i,): 1})

    def coords(self):
        return [self.coord(i) for i in range(self.n)]

    def monomial(self, exps) -> "SuperForm":
        """Product of b^i ** exps[i]; odd exponents above 1 give zero."""
        key = []
        for i, e in enumerate(exps):
            if e and self.parity[i] and e > 1:
                return self.zero()
            key.extend([i] * e)
        return SuperForm(self, {tuple(key): 1})

    def function_monomials(self, max_degree: int) -> list:
        """All monomials of polynomial degree <= max_degree (odd factors counted)."""
        out = []
        evens = list(range(self.p))
        odds = list(range(self.p, self.n))
        for deg in range(max_degree + 1):
            for k in range(min(deg, len(odds)) + 1):
                for oset in combinations(odds, k):
                    for evs in combinations_with_replacement(evens, deg - k):
                        if deg - k and not evens:
                            continue
                        out.append(SuperForm(self, {tuple(sorted(evs + oset)): 1}))
        return out

    def coordinate_fields(self):
        return [SuperVectorField.basis(self, i) for i in range(self.n)]

    def name(self, i: int) -> str:
        return f"b{i + 1}"


class SuperForm:
    """Element of the polynomial de Rham superalgebra of a chart.

    Functions (SuperPolynomial) are the degree-0 elements.
    """

    __slots__ = ("sig", "terms")

    def __init__(self, sig: ChartSignature, terms=None):
        self.sig = sig
        self.terms = {m: canon(c) for m, c in (terms or {}).items() if c}

    @classmethod
    def _raw(cls, sig, terms):
        obj = cls.__new__(cls)
        obj.sig = sig
        obj.terms = terms
        return obj

    # ring structure
    def _coerce(self, other):
        if isinstance(other, SuperForm):
            if other.sig != self.sig:
                raise SignatureError("signature mismatch")
            return other
        return self.sig.const(other)

    def __add__(self, other):
        other = self._coerce(other)
        return SuperForm._raw(self.sig, alg.poly_add(self.terms, other.terms))

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        return SuperForm._raw(self.sig, alg.poly_add(self.terms, other.terms, -1))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __neg__(self):
        return SuperForm._raw(self.sig, {m: -c for m, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, SuperForm):
            if other.sig != self.sig:
                raise SignatureError("signature mismatch")
            return SuperForm._raw(self.sig, alg.poly_mul(self.terms, other.terms, self.sig.grade))
        return SuperForm._raw(self.sig, alg.poly_scale(self.terms, canon(other)))

    def __rmul__(self, other):
        return SuperForm._raw(self.sig, alg.poly_scale(self.terms, canon(other)))

    def __pow__(self, e: int):
        out = self.sig.const(1)
        for _ in range(e):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, SuperForm):
            return self.sig == other.sig and self.terms == other.terms
        if other == 0:
            return not self.terms
        return self.terms == self.sig.const(other).terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __bool__(self):
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    # grading
    def _mono_deg(self, m):
        n = self.sig.n
        return sum(1 for x in m if x >= n)

    def degree(self) -> int:
        """Form degree; raises if inhomogeneous. Zero has degree 0."""
        degs = {self._mono_deg(m) for m in self.terms}
        if len(degs) > 1:
            raise ValueError("inhomogeneous form degree")
        return degs.pop() if degs else 0

    def degree_part(self, k: int) -> "SuperForm":
        return SuperForm._raw(self.sig, {m: c for m, c in self.terms.items() if self._mono_deg(m) == k})

    def parity(self) -> int:
        """Parity (0/1) of a homogeneous element; zero is even."""
        g = {alg.mono_grade(m, self.sig.grade) >> 1 for m in self.terms}
        if len(g) > 1:
            raise ValueError("inhomogeneous parity")
        return g.pop() if g else 0

    def parity_parts(self) -> dict:
        parts: dict = {}
        for m, c in self.terms.items():
            parts.setdefault(alg.mono_grade(m, self.sig.grade) >> 1, {})[m] = c
        return {k: SuperForm._raw(self.sig, v) for k, v in parts.items()}

    def is_function(self) -> bool:
        n = self.sig.n
        return all(x < n for m in self.terms for x in m)

    def constant_term(self):
        return self.terms.get((), 0)

    def monomials(self):
        return [(SuperForm._raw(self.sig, {m: 1}), c) for m, c in self.terms.items()]

    # calculus
    def d(self) -> "SuperForm":
        return exterior_d(self)

    def __repr__(self):
        return f"SuperForm({self})"

    def __str__(self):
        return format_form(self)


SuperPolynomial = SuperForm


def format_form(w: SuperForm) -> str:
    if not w.terms:
        return "0"
    sig = w.sig
    parts = []
    for m, c in sorted(w.terms.items(), key=lambda t: (len(t[0]), t[0])):
        factors = []
        for x in m:
            factors.append(f"b{x + 1}" if x < sig.n else f"d(b{x - sig.n + 1})")
        mono = "*".join(factors)
        cs = format_scalar(c)
        if not mono:
            parts.append(cs)
        elif c == 1:
            parts.append(mono)
        elif c == -1:
            parts.append("-" + mono)
        else:
            parts.append(f"{cs}*{mono}")
    return " + ".join(parts).replace("+ -", "- ")


def partial(i: int, f: SuperForm) -> SuperForm:
    """Left super-derivative d/db^i (acts on coefficients of forms too)."""
    f.sig.check_index(i)
    return SuperForm._raw(f.sig, alg.left_partial(f.terms, i, f.sig.grade))


def exterior_d(w: SuperForm) -> SuperForm:
    sig = w.sig
    n = sig.n

    def act(x):
        return {(x + n,): 1} if x < n else None

    return SuperForm._raw(sig, alg.apply_derivation(w.terms, 1, act, sig.grade))


d = exterior_d


def wedge(*forms) -> SuperForm:
    out = forms[0]
    for f in forms[1:]:
        out = out * f
    return out


class SuperVectorField:
    """X = sum_i X^i d_i with polynomial components (coefficients on the left)."""

    __slots__ = ("sig", "comps")

    def __init__(self, sig: ChartSignature, comps):
        comps = list(comps)
        if len(comps) != sig.n:
            raise SignatureError("wrong number of components")
        self.sig = sig
        self.comps = [c if isinstance(c, SuperForm) else sig.const(c) for c in comps]

    @classmethod
    def basis(cls, sig, i, coeff=None):
        comps = [sig.zero() for _ in range(sig.n)]
        comps[i] = sig.const(1) if coeff is None else coeff
        return cls(sig, comps)

    def __add__(self, other):
        return SuperVectorField(self.sig, [a + b for a, b in zip(self.comps, other.comps)])

    def __sub__(self, other):
        return SuperVectorField(self.sig, [a - b for a, b in zip(self.comps, other.comps)])

    def __neg__(self):
        return SuperVectorField(self.sig, [-a for a in self.comps])

    def scale(self, f) -> "SuperVectorField":
        """f * X for a function or scalar f."""
        if isinstance(f, SuperForm):
            return SuperVectorField(self.sig, [f * a for a in self.comps])
        return SuperVectorField(self.sig, [a * f for a in self.comps])

    __rmul__ = scale

    def __eq__(self, other):
        return isinstance(other, SuperVectorField) and self.sig == other.sig and all(
            a == b for a, b in zip(self.comps, other.comps))

    def __hash__(self):
        return hash(tuple(hash(c) for c in self.comps))

    def is_zero(self):
        return all(c.is_zero() for c in self.comps)

    def parity(self) -> int:
        ps = set()
        for i, c in enumerate(self.comps):
            for part_par in c.parity_parts():
                ps.add(part_par ^ self.sig.parity[i])
        if len(ps) > 1:
            raise ValueError("inhomogeneous vector field")
        return ps.pop() if ps else 0

    def parity_parts(self) -> dict:
        parts: dict = {}
        for i, c in enumerate(self.comps):
            for par, piece in c.parity_parts().items():
                key = par ^ self.sig.parity[i]
                parts.setdefault(key, [self.sig.zero() for _ in range(self.sig.n)])
                parts[key][i] = parts[key][i] + piece
        return {k: SuperVectorField(self.sig, v) for k, v in parts.items()}

    def apply(self, f: SuperForm) -> SuperForm:
        """X f = sum X^i d_i f."""
        out = self.sig.zero()
        for i, c in enumerate(self.comps):
            if c.terms:
                df = partial(i, f)
                if df.terms:
                    out = out + c * df
        return out

    __call__ = apply

    def __repr__(self):
        return "SuperVectorField(" + format_field(self) + ")"


def format_field(X: SuperVectorField) -> str:
    parts = [f"({c})@{i + 1}" for i, c in enumerate(X.comps) if c.terms]
    return " + ".join(parts) or "0"


def bracket_vf(X: SuperVectorField, Y: SuperVectorField) -> SuperVectorField:
    """Super Lie bracket, bilinear over parity components."""
    if X.sig != Y.sig:
        raise SignatureError("signature mismatch")
    sig = X.sig
    out = [sig.zero() for _ in range(sig.n)]
    for px, Xp in X.parity_parts().items():
        for py, Yp in Y.parity_parts().items():
            sgn = -1 if px and py else 1
            for k in range(sig.n):
                out[k] = out[k] + Xp.apply(Yp.comps[k]) - Yp.apply(Xp.comps[k]) * sgn
    return SuperVectorField(sig, out)


def contract(X: SuperVectorField, w: SuperForm) -> SuperForm:
    """Interior product: odd-degree left antiderivation, db^i -> X^i."""
    sig = w.sig
    n = sig.n
    out: dict = {}
    for px, Xp in X.parity_parts().items():
        comps = [c.terms for c in Xp.comps]

        def act(x, comps=comps):
            return comps[x - n] if x >= n else None

        out = alg.poly_add(out, alg.apply_derivation(w.terms, 1 | (px << 1), act, sig.grade))
    return SuperForm._raw(sig, out)


def lie_derivative(X: SuperVectorField, w: SuperForm) -> SuperForm:
    """L_X as the even-degree derivation b^i -> X^i, db^i -> d X^i."""
    sig = w.sig
    n = sig.n
    out: dict = {}
    for px, Xp in X.parity_parts().items():
        comps = [c.terms for c in Xp.comps]
        dcomps = [exterior_d(c).terms for c in Xp.comps]

        def act(x, comps=comps, dcomps=dcomps):
            return comps[x] if x < n else dcomps[x - n]

        out = alg.poly_add(out, alg.apply_derivation(w.terms, px << 1, act, sig.grade))
    return SuperForm._raw(sig, out)


def pair(alpha: SuperForm, X: SuperVectorField) -> SuperForm:
    """alpha(X) for a 1-form alpha; A-linear in alpha from the left."""
    for m in alpha.terms:
        if alpha._mono_deg(m) != 1:
            raise ValueError("pair expects a 1-form")
    out = alpha.sig.zero()
    for pa, ap in alpha.parity_parts().items():
        for px, Xp in X.parity_parts().items():
            c = contract(Xp, ap)
            out = out + (-c if pa and px else c)
    return out


def one_form(sig: ChartSignature, coeffs) -> SuperForm:
    """sum_i coeffs[i] db^i."""
    out = sig.zero()
    for i, c in enumerate(coeffs):
        if isinstance(c, SuperForm) and c.is_zero():
            continue
        if not isinstance(c, SuperForm) and not c:
            continue
        out = out + (c if isinstance(c, SuperForm) else sig.const(c)) * sig.dcoord(i)
    return out


def one_form_coeffs(alpha: SuperForm) -> list:
    """Coefficients a_i with alpha = sum a_i db^i (coefficient on the left)."""
    sig = alpha.sig
    out = []
    for i in range(sig.n):
        # alpha(d_i) = sum_j a_j db^j(d_i) = a_i eps_i (sign from A-linearity only on left)
        out.append(pair(alpha, SuperVectorField.basis(sig, i)) * sig.eps(i))
    return out


class MatrixForm:
    """Square matrix of forms acting on the coordinate frame from the right."""

    __slots__ = ("sig", "rows")

    def __init__(self, sig: ChartSignature, rows):
        self.sig = sig
        self.rows = [[e if isinstance(e, SuperForm) else sig.const(e) for e in row] for row in rows]
        if len(self.rows) != sig.n or any(len(r) != sig.n for r in self.rows):
            raise SignatureError("matrix must be (p+q)x(p+q)")

    @classmethod
    def zero(cls, sig):
        return cls(sig, [[sig.zero() for _ in range(sig.n)] for _ in range(sig.n)])

    @classmethod
    def identity(cls, sig):
        return cls(sig, [[sig.const(1 if i == j else 0) for j in range(sig.n)] for i in range(sig.n)])

    @classmethod
    def unit(cls, sig, i, j, entry):
        m = cls.zero(sig)
        m.rows[i][j] = entry if isinstance(entry, SuperForm) else sig.const(entry)
        return m

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def entries(self):
        for i, row in enumerate(self.rows):
            for j, e in enumerate(row):
                yield i, j, e

    def map(self, fn) -> "MatrixForm":
        return MatrixForm(self.sig, [[fn(e) for e in row] for row in self.rows])

    def __add__(self, other):
        return MatrixForm(self.sig, [[a + b for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)])

    def __sub__(self, other):
        return MatrixForm(self.sig, [[a - b for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)])

    def __neg__(self):
        return self.map(lambda e: -e)

    def __matmul__(self, other: "MatrixForm") -> "MatrixForm":
        n = self.sig.n
        out = []
        for i in range(n):
            row = []
            for k in range(n):
                acc = {}
                for j in range(n):
                    a = self.rows[i][j]
                    b = other.rows[j][k]
                    if a.terms and b.terms:
                        acc = alg.poly_add(acc, alg.poly_mul(a.terms, b.terms, self.sig.grade))
                row.append(SuperForm._raw(self.sig, acc))
            out.append(row)
        return MatrixForm(self.sig, out)

    def scale(self, c) -> "MatrixForm":
        """Left multiplication of every entry by a scalar or form."""
        if isinstance(c, SuperForm):
            return self.map(lambda e: c * e)
        return self.map(lambda e: e * c)

    def __mul__(self, c):
        return self.scale(c)

    __rmul__ = scale

    def __eq__(self, other):
        return isinstance(other, MatrixForm) and all(
            a == b for r, s in zip(self.rows, other.rows) for a, b in zip(r, s))

    def __hash__(self):
        return hash(tuple(hash(e) for _, _, e in self.entries()))

    def is_zero(self):
        return all(e.is_zero() for _, _, e in self.entries())

    def d(self) -> "MatrixForm":
        return self.map(exterior_d)

    def matrix_parity(self) -> int:
        """Parity m with |M^i_j| = m + |b^i| + |b^j| for all nonzero entries."""
        ps = set()
        par = self.sig.parity
        for i, j, e in self.entries():
            for ep in e.parity_parts():
                ps.add(ep ^ par[i] ^ par[j])
        if len(ps) > 1:
            raise ValueError("matrix is not homogeneous")
        return ps.pop() if ps else 0

    def is_even(self) -> bool:
        try:
            return self.matrix_parity() == 0
        except ValueError:
            return False

    def __repr__(self):
        return "MatrixForm([" + "; ".join(", ".join(str(e) for e in r) for r in self.rows) + "])"


def supertrace(M: MatrixForm) -> SuperForm:
    """sum_i (-1)^{p_i (1 + m)} M^i_i for a matrix of parity m; Str(I) = p - q.

    A diagonal entry always has the parity of its matrix, so inhomogeneous
    matrices are handled piece by piece.
    """
    sig = M.sig
    out = sig.zero()
    for i in range(sig.n):
        e = M.rows[i][i]
        if not e.terms:
            continue
        if not sig.parity[i]:
            out = out + e
            continue
        for ep, piece in e.parity_parts().items():
            out = out + (piece if ep else -piece)
    return out


class NotInvertible(ArithmeticError):
    pass


def _scalar_matrix_inverse(A):
    n = len(A)
    M = [list(row) + [1 if i == j else 0 for j in range(n)] for i, row in enumerate(A)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col]), None)
        if piv is None:
            raise NotInvertible("body of matrix is singular")
        M[col], M[piv] = M[piv], M[col]
        inv = inverse(M[col][col])
        M[col] = [canon(x * inv) for x in M[col]]
        for r in range(n):
            if r != col and M[r][col]:
                f = M[r][col]
                M[r] = [canon(a - f * b) for a, b in zip(M[r], M[col])]
    return [row[n:] for row in M]


def matrix_inverse(M: MatrixForm, max_terms: int = 64) -> MatrixForm:
    """Inverse of a degree-0 matrix whose non-constant part is nilpotent."""
    sig = M.sig
    for _, _, e in M.entries():
        if not e.is_function():
            raise ValueError("matrix_inverse expects function entries")
    body = [[M.rows[i][j].constant_term() for j in range(sig.n)] for i in range(sig.n)]
    b_inv = MatrixForm(sig, _scalar_matrix_inverse(body))
    nil = M - MatrixForm(sig, body)
    step = -(b_inv @ nil)
    term = MatrixForm.identity(sig)
    total = MatrixForm.identity(sig)
    for _ in range(max_terms):
        term = term @ step
        if term.is_zero():
            break
        total = total + term
    else:
        raise NotInvertible("non-constant part is not nilpotent; matrix not invertible over polynomials")
    result = total @ b_inv
    if not (M @ result == MatrixForm.identity(sig)):
        raise NotInvertible("inverse check failed")
    return result


def contract_matrix(X: SuperVectorField, M: MatrixForm) -> MatrixForm:
    return M.map(lambda e: contract(X, e))


def pair_matrix(M: MatrixForm, X: SuperVectorField) -> MatrixForm:
    """Entrywise pairing of a matrix of 1-forms with X."""
    return M.map(lambda e: pair(e, X) if e.terms else e)
