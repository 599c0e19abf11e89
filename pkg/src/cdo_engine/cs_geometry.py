"""Charts of odd vector bundles Pi E and the geometry lifted to them.

A chart has even base coordinates x^1..x^d followed by odd fiber coordinates
e^1..e^r, which are identified with the dual frame of E.  Base vector fields
and sections of E are represented on the chart itself:

* a base field is a SuperVectorField whose fiber components vanish and whose
  components are the coefficients in front of d/dx^i (they may contain odd
  coordinates, which then act as form-valued coefficients);
* a section of E is a list of r coefficient functions.

The Dolbeault chart is realised as a Pi E chart whose base has coordinates
(z, zbar) and whose fiber has coordinates (zetabar, e), with the connections
assembled block-diagonally.  All identities are therefore checked by one
implementation.
"""
from __future__ import annotations

from fractions import Fraction

from .algebroid import (ConnectionData, PreconditionError, apply_end, connection_from_frame,
                        covariant_derivative, covariant_end, iota_matrix, tilde_nabla)
from .coord_change import substitute
from .report import CheckResult, Report
from .superpoly import (ChartSignature, MatrixForm, SuperForm, SuperVectorField, bracket_vf,
                        contract, exterior_d, supertrace)


_HALF = Fraction(1, 2)


class ChartDataError(ValueError):
    pass


class TorsionError(PreconditionError):
    pass


# small matrices of forms (lists of lists)

def _mm(A, B):
    n, m, k = len(A), len(B), len(B[0]) if B else 0
    out = []
    for i in range(n):
        row = []
        for j in range(k):
            acc = None
            for t in range(m):
                a, b = A[i][t], B[t][j]
                if a.terms and b.terms:
                    acc = a * b if acc is None else acc + a * b
            row.append(acc if acc is not None else A[i][0].sig.zero())
        out.append(row)
    return out


def _madd(A, B, sign=1):
    return [[a + b * sign for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def _md(A):
    return [[exterior_d(a) for a in row] for row in A]


def _mtr(A, sig):
    out = sig.zero()
    for i in range(len(A)):
        out = out + A[i][i]
    return out


def curvature(G):
    """dG + G^G for a square block of one-forms."""
    if not G:
        return []
    return _madd(_md(G), _mm(G, G))


class PiEChart:
    """Chart of Pi E with connections gamma_M on TM and gamma_E on E."""

    model = "pi_e"

    def __init__(self, d: int, r: int, gamma_M=None, gamma_E=None, names=None):
        self.d, self.r = d, r
        self.sig = ChartSignature(d, r)
        sig = self.sig
        self.names = names or ([f"x{i + 1}" for i in range(d)] + [f"e{k + 1}" for k in range(r)])
        self.gamma_M = self._block(gamma_M, d, "gamma_M")
        self.gamma_E = self._block(gamma_E, r, "gamma_E")
        self.R_M = curvature(self.gamma_M)
        self.R_E = curvature(self.gamma_E)
        base = [SuperVectorField.basis(sig, i) for i in range(d)]
        # Christoffel symbols Gamma^a_b(d_i) as functions
        self._cM = [[[contract(b, g) for g in row] for row in self.gamma_M] for b in base]
        self._cE = [[[contract(b, g) for g in row] for row in self.gamma_E] for b in base]
        self._RM = [[[[contract(bj, contract(bi, x)) for x in row] for row in self.R_M]
                     for bj in base] for bi in base]
        self._RE = [[[[contract(bj, contract(bi, x)) for x in row] for row in self.R_E]
                     for bj in base] for bi in base]
        # fiber indices forming the Q block, with the base index each one pairs with
        self.q_pairs: list = []
        self._conn = None

    # -- data validation ---------------------------------------------------
    def _block(self, G, n, label):
        sig = self.sig
        if G is None:
            return [[sig.zero() for _ in range(n)] for _ in range(n)]
        if len(G) != n or any(len(row) != n for row in G):
            raise ChartDataError(f"{label} must be {n}x{n}")
        out = []
        for row in G:
            new = []
            for e in row:
                e = e if isinstance(e, SuperForm) else sig.const(e)
                if e.terms:
                    if e.sig != sig:
                        raise ChartDataError(f"{label} entry lives on another chart")
                    if e.degree() != 1:
                        raise ChartDataError(f"{label} entries must be one-forms")
                    for m in e.terms:
                        for x in m:
                            if x % sig.n >= self.d:
                                raise ChartDataError(f"{label} entries must be forms on the base")
                new.append(e)
            out.append(new)
        return out

    # -- coordinates --------------------------------------------------------
    def base_coord(self, i):
        return self.sig.coord(i)

    def fiber_coord(self, k):
        return self.sig.coord(self.d + k)

    def base_field(self, comps) -> SuperVectorField:
        sig = self.sig
        comps = [c if isinstance(c, SuperForm) else sig.const(c) for c in comps]
        if len(comps) != self.d:
            raise ChartDataError("a base field needs d components")
        return SuperVectorField(sig, comps + [sig.zero()] * self.r)

    def base_basis(self):
        return [self.base_field([1 if j == i else 0 for j in range(self.d)]) for i in range(self.d)]

    def base_part(self, X: SuperVectorField):
        if any(c.terms for c in X.comps[self.d:]):
            raise ChartDataError("argument is not a base vector field")
        return X.comps[:self.d]

    def section(self, comps):
        sig = self.sig
        comps = [c if isinstance(c, SuperForm) else sig.const(c) for c in comps]
        if len(comps) != self.r:
            raise ChartDataError("a section needs r components")
        return comps

    def section_basis(self):
        return [self.section([1 if j == k else 0 for j in range(self.r)]) for k in range(self.r)]

    def is_torsion_free(self) -> bool:
        """Symmetric Christoffel symbols Gamma^m_j(d_i) = Gamma^m_i(d_j)."""
        c = self._cM
        return all(c[i][m][j] == c[j][m][i]
                   for i in range(self.d) for j in range(self.d) for m in range(self.d))

    # -- covariant derivatives on the base ----------------------------------
    def nabla_base(self, X: SuperVectorField, Y: SuperVectorField) -> SuperVectorField:
        xs, ys = self.base_part(X), self.base_part(Y)
        out = [X.apply(y) for y in ys]
        for i, xi in enumerate(xs):
            if not xi.terms:
                continue
            for b, yb in enumerate(ys):
                if not yb.terms:
                    continue
                for a in range(self.d):
                    g = self._cM[i][a][b]
                    if g.terms:
                        out[a] = out[a] + xi * yb * g
        return self.base_field(out)

    def nabla_section(self, X: SuperVectorField, s) -> list:
        xs = self.base_part(X)
        out = [X.apply(c) for c in s]
        for i, xi in enumerate(xs):
            if not xi.terms:
                continue
            for b, sb in enumerate(s):
                if not sb.terms:
                    continue
                for a in range(self.r):
                    g = self._cE[i][a][b]
                    if g.terms:
                        out[a] = out[a] + xi * sb * g
        return out

    def _curv_apply(self, table, dim, X, Y, v, ncomp):
        xs, ys = self.base_part(X), self.base_part(Y)
        out = [self.sig.zero() for _ in range(ncomp)]
        for i, xi in enumerate(xs):
            if not xi.terms:
                continue
            for j, yj in enumerate(ys):
                if not yj.terms:
                    continue
                pre = xi * yj
                block = table[i][j]
                for b, vb in enumerate(v):
                    if not vb.terms:
                        continue
                    t = pre * vb
                    for a in range(dim):
                        if block[a][b].terms:
                            out[a] = out[a] + t * block[a][b]
        return out

    def curv_base(self, X, Y, Z) -> SuperVectorField:
        """R^M_{X,Y} Z with coefficients taken out in the order X, Y, Z."""
        return self.base_field(self._curv_apply(self._RM, self.d, X, Y, self.base_part(Z), self.d))

    def curv_section(self, X, Y, s) -> list:
        """R^E_{X,Y} s with coefficients taken out in the order X, Y, s."""
        return self._curv_apply(self._RE, self.r, X, Y, s, self.r)

    def curv_section_operator(self, X, Y, s) -> list:
        """R^E_{X,Y} s from commutators of covariant derivatives (X, Y with even coefficients)."""
        a = self.nabla_section(X, self.nabla_section(Y, s))
        b = self.nabla_section(Y, self.nabla_section(X, s))
        c = self.nabla_section(bracket_vf(X, Y), s)
        return [x - y - z for x, y, z in zip(a, b, c)]

    def curv_base_operator(self, X, Y, Z) -> SuperVectorField:
        return (self.nabla_base(X, self.nabla_base(Y, Z)) - self.nabla_base(Y, self.nabla_base(X, Z))
                - self.nabla_base(bracket_vf(X, Y), Z))

    def nabla_curv_section(self, X, A, B, s) -> list:
        """(nabla_X R^E)_{A,B} s for X with even coefficients; A, B, s may carry odd ones.

        Computed from the components of the covariant derivative, so odd
        coefficients of A, B, s are not differentiated.
        """
        out = [self.sig.zero() for _ in range(self.r)]
        for i, xi in enumerate(self.base_part(X)):
            if not xi.terms:
                continue
            t = self._nabla_R_table()[i]
            part = self._curv_apply(t, self.r, A, B, s, self.r)
            out = [o + xi * p for o, p in zip(out, part)]
        return out

    def _nabla_R_table(self):
        if getattr(self, "_nR", None) is None:
            d, r = self.d, self.r
            base = self.base_basis()
            tab = []
            for i in range(d):
                rows = []
                for j in range(d):
                    cols = []
                    for k in range(d):
                        M = [[partial_base(base[i], self._RE[j][k][a][b]) for b in range(r)]
                             for a in range(r)]
                        G = self._cE[i]
                        M = _madd(M, _madd(_mm(G, self._RE[j][k]), _mm(self._RE[j][k], G), -1))
                        for m in range(d):
                            gj, gk = self._cM[i][m][j], self._cM[i][m][k]
                            if gj.terms:
                                M = _madd(M, [[gj * e for e in row] for row in self._RE[m][k]], -1)
                            if gk.terms:
                                M = _madd(M, [[gk * e for e in row] for row in self._RE[j][m]], -1)
                        cols.append(M)
                    rows.append(cols)
                tab.append(rows)
            self._nR = tab
        return self._nR

    # -- lifted vector fields -----------------------------------------------
    def lift(self, kind: str, argument=None) -> SuperVectorField:
        return lift(self, kind, argument)

    def D(self, X: SuperVectorField) -> SuperVectorField:
        sig = self.sig
        out = SuperVectorField(sig, [sig.zero()] * sig.n)
        for i, xi in enumerate(self.base_part(X)):
            if xi.terms:
                out = out + self._D_basis(i).scale(xi)
        return out

    def _D_basis(self, i):
        sig, d = self.sig, self.d
        comps = [sig.zero() for _ in range(sig.n)]
        comps[i] = sig.const(1)
        for k in range(self.r):
            acc = sig.zero()
            for l in range(self.r):
                g = self._cE[i][k][l]
                if g.terms:
                    acc = acc - g * self.fiber_coord(l)
            comps[d + k] = acc
        return SuperVectorField(sig, comps)

    def I(self, s) -> SuperVectorField:
        sig = self.sig
        s = self.section(s)
        return SuperVectorField(sig, [sig.zero()] * self.d + list(s))

    def J(self, block=None) -> SuperVectorField:
        """Degree operator counting the fiber coordinates in ``block`` (default: all)."""
        sig = self.sig
        block = range(self.r) if block is None else block
        comps = [sig.zero() for _ in range(sig.n)]
        for k in block:
            comps[self.d + k] = self.fiber_coord(k)
        return SuperVectorField(sig, comps)

    # -- Q structure (de Rham and Dolbeault models) --------------------------
    @property
    def has_q(self) -> bool:
        return bool(self.q_pairs)

    @property
    def q_block(self):
        return [k for k, _ in self.q_pairs]

    @property
    def e_block(self):
        qs = set(self.q_block)
        return [k for k in range(self.r) if k not in qs]

    def Q(self) -> SuperVectorField:
        """sum_k e^k D_{d_{i(k)}} over the Q block."""
        self._need_q()
        return self.D(self.q_as_base())

    def q_coordinate_field(self) -> SuperVectorField:
        """The same operator written as sum_k e^k d/dx^{i(k)}."""
        self._need_q()
        sig = self.sig
        comps = [sig.zero() for _ in range(sig.n)]
        for k, i in self.q_pairs:
            comps[i] = comps[i] + self.fiber_coord(k)
        return SuperVectorField(sig, comps)

    def q_as_base(self) -> SuperVectorField:
        comps = [self.sig.zero() for _ in range(self.d)]
        for k, i in self.q_pairs:
            comps[i] = comps[i] + self.fiber_coord(k)
        return self.base_field(comps)

    def q_as_section(self) -> list:
        s = [self.sig.zero() for _ in range(self.r)]
        for k, _ in self.q_pairs:
            s[k] = self.fiber_coord(k)
        return s

    def section_to_base(self, s) -> SuperVectorField:
        """A section supported on the Q block viewed as a base field."""
        comps = [self.sig.zero() for _ in range(self.d)]
        for k, i in self.q_pairs:
            comps[i] = comps[i] + s[k]
        return self.base_field(comps)

    def base_to_section(self, X: SuperVectorField) -> list:
        """Projection of a base field onto the directions paired with the Q block."""
        xs = self.base_part(X)
        s = [self.sig.zero() for _ in range(self.r)]
        for k, i in self.q_pairs:
            s[k] = xs[i]
        return s

    def _need_q(self):
        if not self.q_pairs:
            raise ChartDataError(f"model {self.model} has no Q operator")

    # -- connection on T(Pi E) ------------------------------------------------
    def affine_connection(self) -> ConnectionData:
        if self._conn is None:
            self._conn = affine_connection(self)
        return self._conn

    @classmethod
    def de_rham(cls, d: int, gamma_M=None, names=None) -> "PiEChart":
        """E = TM with e^i = dx^i and the same connection on both."""
        sig = ChartSignature(d, d)
        gamma = gamma_M
        if gamma is not None:
            gamma = [[g if isinstance(g, SuperForm) else sig.const(g) for g in row] for row in gamma]
        ch = cls(d, d, gamma, gamma, names or ([f"x{i + 1}" for i in range(d)]
                                                + [f"dx{i + 1}" for i in range(d)]))
        ch.model = "de_rham"
        ch.q_pairs = [(i, i) for i in range(d)]
        return ch


def partial_base(X: SuperVectorField, f: SuperForm) -> SuperForm:
    return X.apply(f)


def conjugate_form(w: SuperForm, swap) -> SuperForm:
    """Complex conjugate: swap paired coordinates (and differentials), conjugate coefficients."""
    sig = w.sig
    images = []
    for x in range(2 * sig.n):
        base, dflag = x % sig.n, x >= sig.n
        j = swap.get(base, base)
        images.append(sig.dcoord(j) if dflag else sig.coord(j))
    out = substitute(w, images)
    return SuperForm(sig, {m: c.conjugate() for m, c in out.terms.items()})


class DolbeaultChart(PiEChart):
    """Dolbeault model: z (even), zbar (even), zetabar (odd, for dzbar), e (odd).

    gamma_M (d x d) and gamma_E (r x r) are type (1,0): polynomial in z, zbar with
    only dz components.  With ``symmetrize`` the torsion of gamma_M is removed by
    nabla' = nabla - T/2.
    """

    model = "dolbeault"

    def __init__(self, d: int, r: int, gamma_M=None, gamma_E=None, symmetrize=False):
        sig = ChartSignature(2 * d, d + r)
        self.cdim, self.rank = d, r
        self._swap = {i: d + i for i in range(d)}
        self._swap.update({d + i: i for i in range(d)})
        gM = self._holo_block(sig, gamma_M, d, "gamma_M")
        gE = self._holo_block(sig, gamma_E, r, "gamma_E")
        if symmetrize:
            gM = _symmetrize(sig, gM, list(range(d)))
        self.holo_gamma_M, self.holo_gamma_E = gM, gE
        gMbar = [[conjugate_form(g, self._swap) for g in row] for row in gM]
        self.bar_gamma_M = gMbar
        base = _block_diag(sig, gM, gMbar)
        fiber = _block_diag(sig, gMbar, gE)
        names = ([f"z{i + 1}" for i in range(d)] + [f"zb{i + 1}" for i in range(d)]
                 + [f"zetab{i + 1}" for i in range(d)] + [f"e{k + 1}" for k in range(r)])
        super().__init__(2 * d, d + r, base, fiber, names)
        self.q_pairs = [(i, d + i) for i in range(d)]

    @staticmethod
    def _holo_block(sig, G, n, label):
        if G is None:
            return [[sig.zero() for _ in range(n)] for _ in range(n)]
        if len(G) != n or any(len(row) != n for row in G):
            raise ChartDataError(f"{label} must be {n}x{n}")
        out = [[g if isinstance(g, SuperForm) else sig.const(g) for g in row] for row in G]
        d = sig.p // 2
        for row in out:
            for g in row:
                for m in g.terms:
                    for x in m:
                        if x < sig.n and x >= sig.p:
                            raise ChartDataError(f"{label} entries must be forms on the base")
                        if x >= sig.n and not x - sig.n < d:
                            raise ChartDataError(f"{label} is not of type (1,0)")
        return out

    def is_type_10(self) -> bool:
        d, n = self.cdim, self.sig.n
        return all(not (x >= n and x - n >= d)
                   for G in (self.holo_gamma_M, self.holo_gamma_E)
                   for row in G for g in row for m in g.terms for x in m)

    def holomorphic_traces(self):
        """(Tr R^M, Tr Rbar^M, Tr R^E) and the quadratic traces of R^M and R^E."""
        sig = self.sig
        RM, RMb, RE = (curvature(self.holo_gamma_M), curvature(self.bar_gamma_M),
                       curvature(self.holo_gamma_E))
        return {"TrRM": _mtr(RM, sig), "TrRMbar": _mtr(RMb, sig), "TrRE": _mtr(RE, sig),
                "TrRM2": _mtr(_mm(RM, RM), sig) if RM else sig.zero(),
                "TrRE2": _mtr(_mm(RE, RE), sig) if RE else sig.zero()}

    def Jr(self):
        return self.J(self.q_block)

    def Jl(self):
        return self.J(self.e_block)


def _block_diag(sig, A, B):
    n, m = len(A), len(B)
    out = [[sig.zero() for _ in range(n + m)] for _ in range(n + m)]
    for i in range(n):
        for j in range(n):
            out[i][j] = A[i][j]
    for i in range(m):
        for j in range(m):
            out[n + i][n + j] = B[i][j]
    return out


def _symmetrize(sig, G, idx):
    """Christoffels 1/2 (Gamma^m_j(d_i) + Gamma^m_i(d_j)) on the coordinates idx."""
    n = len(idx)
    G = [[g if isinstance(g, SuperForm) else sig.const(g) for g in row] for row in G]
    fields = [SuperVectorField.basis(sig, i) for i in idx]
    c = [[[contract(f, g) for g in row] for row in G] for f in fields]
    out = [[sig.zero() for _ in range(n)] for _ in range(n)]
    for m in range(n):
        for j in range(n):
            for i in range(n):
                coeff = (c[i][m][j] + c[j][m][i]) * _HALF
                if coeff.terms:
                    out[m][j] = out[m][j] + coeff * sig.dcoord(idx[i])
    return out




# ---------------------------------------------------------------------------

LIFT_KINDS = ("D", "I", "J", "Jr", "Jl", "Q")


def lift(chart: PiEChart, kind: str, argument=None) -> SuperVectorField:
    """The lifted vector field of the given kind as a derivation of chart functions."""
    if kind not in LIFT_KINDS:
        raise ChartDataError(f"unknown lift kind {kind!r}")
    if kind == "D":
        if not isinstance(argument, SuperVectorField):
            raise ChartDataError("D needs a base vector field")
        return chart.D(argument)
    if kind == "I":
        if isinstance(argument, SuperVectorField):
            if not chart.has_q:
                raise ChartDataError("I needs a section of E")
            return chart.I(chart.base_to_section(argument))
        if argument is None:
            raise ChartDataError("I needs a section")
        return chart.I(argument)
    if argument is not None:
        raise ChartDataError(f"{kind} takes no argument")
    if kind == "J":
        return chart.J()
    if kind in ("Jr", "Jl"):
        if not isinstance(chart, DolbeaultChart):
            raise ChartDataError(f"{kind} is defined for Dolbeault charts")
        return chart.Jr() if kind == "Jr" else chart.Jl()
    return chart.Q()


def affine_connection(chart: PiEChart) -> ConnectionData:
    """Connection on T(Pi E) with nabla_{D_X} D_Y = D_{nabla X Y}, nabla_{D_X} I_s = I_{nabla s}
    and nabla_{I_s} = 0, expressed in the coordinate frame."""
    sig, d, r = chart.sig, chart.d, chart.r
    frame = [chart._D_basis(i) for i in range(d)]
    frame += [chart.I([1 if j == k else 0 for j in range(r)]) for k in range(r)]
    coords = [[sig.zero() for _ in range(sig.n)] for _ in range(sig.n)]
    for i in range(d):
        coords[i][i] = sig.const(1)
        for k in range(r):
            acc = sig.zero()
            for l in range(r):
                g = chart._cE[i][k][l]
                if g.terms:
                    acc = acc + g * chart.fiber_coord(l)
            coords[i][d + k] = acc
    for k in range(r):
        coords[d + k][d + k] = sig.const(1)

    def nabla_frame(alpha, beta):
        out = [sig.zero() for _ in range(sig.n)]
        if alpha >= d:
            return out
        if beta < d:
            for m in range(d):
                out[m] = chart._cM[alpha][m][beta]
        else:
            for k in range(r):
                out[d + k] = chart._cE[alpha][k][beta - d]
        return out

    return connection_from_frame(sig, frame, coords, nabla_frame)


# ---------------------------------------------------------------------------
# verification

def _fields_and_sections(chart: PiEChart, max_degree: int):
    sig = chart.sig
    polys = [m for m in sig.function_monomials(max_degree)
             if all(x < chart.d for mono in m.terms for x in mono)]
    fields = []
    for f in polys:
        for i in range(chart.d):
            fields.append(chart.base_field([f if j == i else 0 for j in range(chart.d)]))
    sections = []
    for f in polys[: 1 + chart.d]:
        for k in range(chart.r):
            sections.append(chart.section([f if j == k else 0 for j in range(chart.r)]))
    return fields, sections


def _zero_field(sig):
    return SuperVectorField(sig, [sig.zero()] * sig.n)


def _sum_fields(sig, fields):
    out = _zero_field(sig)
    for f in fields:
        out = out + f
    return out


def _e_block_term(chart, make_section) -> SuperVectorField:
    """sum over the E block of e^k I_{make_section(unit section k)}."""
    sig = chart.sig
    out = _zero_field(sig)
    for k in chart.e_block:
        unit = chart.section([1 if j == k else 0 for j in range(chart.r)])
        s = make_section(unit)
        if any(c.terms for c in s):
            out = out + chart.I(s).scale(chart.fiber_coord(k))
    return out


def _check_equal(res: CheckResult, label, lhs, rhs):
    res.samples += 1
    if lhs != rhs:
        res.fail(f"{label}: {lhs} vs {rhs}")


def bracket_table_check(chart: PiEChart, max_degree: int = 2) -> Report:
    """Every bracket among lifted fields, compared as derivations (on all generators)."""
    sig = chart.sig
    fields, sections = _fields_and_sections(chart, max_degree)
    D, I = chart.D, chart.I
    rep = Report()

    r = CheckResult("[D_X,D_Y]", "[D_X,D_Y] = D_[X,Y] - e^k I_{R^E_{X,Y} e_k}")
    for X in fields:
        for Y in fields:
            def make(unit, X=X, Y=Y):
                return chart.curv_section(X, Y, unit)
            rhs = D(bracket_vf(X, Y)) - _sum_fields(sig, [
                I(make(chart.section([1 if j == k else 0 for j in range(chart.r)])))
                .scale(chart.fiber_coord(k)) for k in range(chart.r)])
            _check_equal(r, f"X={X}, Y={Y}", bracket_vf(D(X), D(Y)), rhs)
    rep.append(r)

    r = CheckResult("[D_X,I_s]", "[D_X,I_s] = I_{nabla_X s}")
    for X in fields:
        for s in sections:
            _check_equal(r, f"X={X}, s={s}", bracket_vf(D(X), I(s)), I(chart.nabla_section(X, s)))
    rep.append(r)

    r = CheckResult("[I_s,I_t]", "[I_s,I_t] = 0")
    for s in sections:
        for t in sections:
            _check_equal(r, f"s={s}, t={t}", bracket_vf(I(s), I(t)), _zero_field(sig))
    rep.append(r)

    blocks = [("J", list(range(chart.r)))]
    if isinstance(chart, DolbeaultChart):
        blocks = [("Jr", chart.q_block), ("Jl", chart.e_block)]
    for name, block in blocks:
        Jb = chart.J(block)
        r = CheckResult(f"[{name},D_X]", f"[{name},D_X] = 0")
        for X in fields:
            _check_equal(r, f"X={X}", bracket_vf(Jb, D(X)), _zero_field(sig))
        rep.append(r)
        r = CheckResult(f"[{name},I_s]", f"[{name},I_s] = -I_s on its block, 0 elsewhere")
        for s in sections:
            inside = [c if k in block else sig.zero() for k, c in enumerate(s)]
            _check_equal(r, f"s={s}", bracket_vf(Jb, I(s)), -I(inside))
        rep.append(r)
    if isinstance(chart, DolbeaultChart):
        r = CheckResult("[Jr,Jl]", "[Jr,Jl] = 0")
        _check_equal(r, "", bracket_vf(chart.Jr(), chart.Jl()), _zero_field(sig))
        rep.append(r)

    if chart.has_q:
        rep.extend_report(_q_bracket_checks(chart, fields, sections))
    return rep


def _q_bracket_checks(chart, fields, sections) -> Report:
    sig = chart.sig
    D, I = chart.D, chart.I
    Q, Qb, sQ = chart.Q(), chart.q_as_base(), chart.q_as_section()
    rep = Report()
    torsion_free = chart.is_torsion_free()

    r = CheckResult("Q = D_Q", "Q = e^i D_{d_i} equals the coordinate differential (torsion free)")
    r.samples = 1
    if torsion_free and isinstance(chart, DolbeaultChart) and not chart.is_type_10():
        torsion_free = False
    if (Q == chart.q_coordinate_field()) != torsion_free:
        r.fail(f"Q={Q}, torsion free={torsion_free}")
    r.detail["torsion_free"] = torsion_free
    rep.append(r)

    r = CheckResult("[Q,D_X]", "[Q,D_X] = D_{nabla_Q X} - I_{R_{Q,X} Q} + e^k I_{R^E_{Q,X} e_k}")
    for X in fields:
        rhs = (D(chart.nabla_base(Qb, X)) - I(chart.curv_section(Qb, X, sQ))
               + _e_block_term(chart, lambda u, X=X: chart.curv_section(Qb, X, u)))
        _check_equal(r, f"X={X}", bracket_vf(Q, D(X)), rhs)
    rep.append(r)

    r = CheckResult("[Q,I_U]", "[Q,I_U] = I_{nabla_Q U} + D_U")
    r2 = CheckResult("[Q,I_s]", "[Q,I_s] = I_{nabla_Q s} on the E block")
    qs = set(chart.q_block)
    for s in sections:
        lhs = bracket_vf(Q, I(s))
        if all(k in qs for k, c in enumerate(s) if c.terms):
            _check_equal(r, f"U={s}", lhs, I(chart.nabla_section(Qb, s)) + D(chart.section_to_base(s)))
        else:
            _check_equal(r2, f"s={s}", lhs, I(chart.nabla_section(Qb, s)))
    rep.append(r)
    if chart.e_block:
        rep.append(r2)

    r = CheckResult("[Q,Q]", "[Q,Q] = 0", samples=1)
    if not bracket_vf(Q, Q).is_zero():
        r.fail(str(bracket_vf(Q, Q)))
    rep.append(r)
    r = CheckResult("[J_Q,Q]", "[J^r,Q] = Q (J in the de Rham model)", samples=1)
    if bracket_vf(chart.J(chart.q_block), Q) != Q:
        r.fail(str(bracket_vf(chart.J(chart.q_block), Q)))
    rep.append(r)
    if chart.e_block:
        r = CheckResult("[Jl,Q]", "[J^l,Q] = 0", samples=1)
        if not bracket_vf(chart.J(chart.e_block), Q).is_zero():
            r.fail(str(bracket_vf(chart.J(chart.e_block), Q)))
        rep.append(r)
    return rep


def connection_table_check(chart: PiEChart, max_degree: int = 1) -> Report:
    """The defining rules of the affine connection and its curvature blocks."""
    sig = chart.sig
    conn = chart.affine_connection()
    fields, sections = _fields_and_sections(chart, max_degree)
    D, I = chart.D, chart.I
    zero = _zero_field(sig)
    nab = lambda A, B: covariant_derivative(conn, A, B)  # noqa: E731

    def curv(A, B, C):
        return nab(A, nab(B, C)) - nab(B, nab(A, C)) - nab(bracket_vf(A, B), C)

    rep = Report()
    r = CheckResult("connection rules", "nabla_{D_X} D_Y = D_{nabla X Y}, nabla_{D_X} I_s = I_{nabla_X s}, nabla_I = 0")
    for X in fields:
        for Y in fields:
            _check_equal(r, f"D X={X} Y={Y}", nab(D(X), D(Y)), D(chart.nabla_base(X, Y)))
        for s in sections:
            _check_equal(r, f"I X={X} s={s}", nab(D(X), I(s)), I(chart.nabla_section(X, s)))
    for s in sections:
        for X in fields:
            _check_equal(r, f"I_s D s={s}", nab(I(s), D(X)), zero)
        for t in sections:
            _check_equal(r, f"I_s I_t s={s}", nab(I(s), I(t)), zero)
    rep.append(r)

    r = CheckResult("curvature blocks", "R_{D_X,D_Y} D_Z = D_{R^M_{X,Y}Z}, R_{D_X,D_Y} I_s = I_{R^E_{X,Y}s}, others 0")
    basis = chart.base_basis()
    units = chart.section_basis()
    for X in basis:
        for Y in basis:
            for Z in basis:
                _check_equal(r, f"DDD {X},{Y},{Z}", curv(D(X), D(Y), D(Z)), D(chart.curv_base(X, Y, Z)))
            for s in units:
                _check_equal(r, f"DDI {X},{Y},{s}", curv(D(X), D(Y), I(s)), I(chart.curv_section(X, Y, s)))
        for s in units:
            for W in [D(Z) for Z in basis] + [I(t) for t in units]:
                _check_equal(r, f"DI {X},{s}", curv(D(X), I(s), W), zero)
    for s in units:
        for t in units:
            for W in [D(Z) for Z in basis] + [I(u) for u in units]:
                _check_equal(r, f"II {s},{t}", curv(I(s), I(t), W), zero)
    rep.append(r)

    r = CheckResult("curvature forms", "R = dGamma + Gamma^Gamma agrees with commutators of nabla")
    for X in basis:
        for Y in basis:
            for s in units:
                _check_equal(r, f"E {X},{Y}", chart.curv_section(X, Y, s), chart.curv_section_operator(X, Y, s))
            for Z in basis:
                _check_equal(r, f"M {X},{Y}", chart.curv_base(X, Y, Z), chart.curv_base_operator(X, Y, Z))
    rep.append(r)
    return rep


def supertrace_lemmas(chart: PiEChart) -> Report:
    sig = chart.sig
    conn = chart.affine_connection()
    R, Rf = conn.R, conn.frame_curvature
    fields, sections = _fields_and_sections(chart, 1)
    rep = Report()
    if isinstance(chart, DolbeaultChart):
        tr = chart.holomorphic_traces()
        trM, trE, trM2, trE2 = tr["TrRM"], tr["TrRE"], tr["TrRM2"], tr["TrRE2"]
    else:
        trM, trE = _mtr(chart.R_M, sig), _mtr(chart.R_E, sig)
        trM2 = _mtr(_mm(chart.R_M, chart.R_M), sig) if chart.d else sig.zero()
        trE2 = _mtr(_mm(chart.R_E, chart.R_E), sig) if chart.r else sig.zero()

    r = CheckResult("Str R", "Str R = Tr R^M - Tr R^E", samples=1)
    if supertrace(R) != trM - trE:
        r.fail(f"{supertrace(R)} vs {trM - trE}")
    r.detail["Str R"] = str(supertrace(R))
    rep.append(r)

    r = CheckResult("Str R^R", "Str(R^R) = Tr(R^M^R^M) - Tr(R^E^R^E)", samples=1)
    if supertrace(R @ R) != trM2 - trE2:
        r.fail(f"{supertrace(R @ R)} vs {trM2 - trE2}")
    rep.append(r)

    if isinstance(chart, DolbeaultChart):
        tr = chart.holomorphic_traces()
        blocks = [("Jr", chart.q_block, -tr["TrRMbar"]), ("Jl", chart.e_block, -tr["TrRE"])]
    else:
        blocks = [("J", list(range(chart.r)), -trE)]
    for name, block, expected in blocks:
        Jb = chart.J(block)
        N = tilde_nabla(conn, Jb)
        r = CheckResult(f"Str(R.tnabla {name})", f"Str(R . tnabla {name}) = {'-Tr Rbar^M' if name == 'Jr' else '-Tr R^E'}",
                        samples=1)
        val = supertrace(Rf @ N)
        if val != expected:
            r.fail(f"{val} vs {expected}")
        rep.append(r)
        r = CheckResult(f"tnabla {name} table", f"tnabla {name} kills D_X and fixes I_s on its block")
        for X in fields:
            _check_equal(r, f"X={X}", apply_end(N, chart.D(X)), _zero_field(sig))
        for s in sections:
            inside = [c if k in block else sig.zero() for k, c in enumerate(s)]
            _check_equal(r, f"s={s}", apply_end(N, chart.I(s)), chart.I(inside))
        rep.append(r)
        r = CheckResult(f"nabla(tnabla {name})", f"nabla(tnabla {name}) = 0", samples=1)
        if not covariant_end(conn, N).is_zero():
            r.fail(str(covariant_end(conn, N)))
        rep.append(r)
    return rep


def _nabla_end_apply(conn, Z, N, par_n, W):
    """(nabla_Z N)(W) = nabla_Z(N W) - (-1)^{|Z||N|} N(nabla_Z W) for homogeneous Z."""
    first = covariant_derivative(conn, Z, apply_end(N, W))
    second = apply_end(N, covariant_derivative(conn, Z, W))
    return first - second if not (Z.parity() and par_n) else first + second


def q_operator_lemmas(chart: PiEChart) -> Report:
    if not chart.has_q:
        raise ChartDataError("Q lemmas need a de Rham or Dolbeault chart")
    if not chart.is_torsion_free():
        raise TorsionError("the Q lemmas need a torsion-free connection on TM")
    if isinstance(chart, DolbeaultChart) and not chart.is_type_10():
        raise PreconditionError("Dolbeault connections must be of type (1,0)")
    sig = chart.sig
    conn = chart.affine_connection()
    Rf = conn.frame_curvature
    Q, Qb, sQ = chart.Q(), chart.q_as_base(), chart.q_as_section()
    N = tilde_nabla(conn, Q)
    fields, sections = _fields_and_sections(chart, 1)
    D, I = chart.D, chart.I
    zero = _zero_field(sig)
    qs = set(chart.q_block)
    q_sections = [s for s in sections if all(k in qs for k, c in enumerate(s) if c.terms)]
    e_sections = [s for s in sections if s not in q_sections]
    rep = Report()

    r = CheckResult("tnabla Q table", "tnabla Q: D_X -> I_{R_{Q,X}Q} - e^k I_{R^E_{Q,X}e_k}, I_U -> -D_U, I_s -> 0")
    for X in fields:
        rhs = I(chart.curv_section(Qb, X, sQ)) - _e_block_term(
            chart, lambda u, X=X: chart.curv_section(Qb, X, u))
        _check_equal(r, f"X={X}", apply_end(N, D(X)), rhs)
    for s in q_sections:
        _check_equal(r, f"U={s}", apply_end(N, I(s)), -D(chart.section_to_base(s)))
    for s in e_sections:
        _check_equal(r, f"s={s}", apply_end(N, I(s)), zero)
    rep.append(r)

    r = CheckResult("nabla_D tnabla Q", "nabla_{D_X}(tnabla Q): D_Y -> I_{(nabla_X R)_{Q,Y}Q} - e^k I_{(nabla_X R^E)_{Q,Y}e_k}")
    for X in chart.base_basis():
        for Y in fields:
            rhs = I(chart.nabla_curv_section(X, Qb, Y, sQ)) - _e_block_term(
                chart, lambda u, X=X, Y=Y: chart.nabla_curv_section(X, Qb, Y, u))
            _check_equal(r, f"X={X}, Y={Y}", _nabla_end_apply(conn, D(X), N, 1, D(Y)), rhs)
        for s in sections:
            _check_equal(r, f"X={X}, s={s}", _nabla_end_apply(conn, D(X), N, 1, I(s)), zero)
    rep.append(r)

    r = CheckResult("nabla_I tnabla Q", "nabla_{I_U}(tnabla Q): D_X -> I_{R_{U,Q}X} + e^k I_{R^E_{U,X}e_k}")
    for U in q_sections:
        Ub = chart.section_to_base(U)
        for X in fields:
            rhs = I(chart.curv_section(Ub, Qb, chart.base_to_section(X))) + _e_block_term(
                chart, lambda u, X=X: chart.curv_section(Ub, X, u))
            _check_equal(r, f"U={U}, X={X}", _nabla_end_apply(conn, I(U), N, 1, D(X)), rhs)
        for s in sections:
            _check_equal(r, f"U={U}, s={s}", _nabla_end_apply(conn, I(U), N, 1, I(s)), zero)
    rep.append(r)

    if e_sections:
        r = CheckResult("nabla_Is tnabla Q", "nabla_{I_s}(tnabla Q): D_X -> -I_{R^E_{Q,X}s}")
        for s in e_sections:
            for X in fields:
                _check_equal(r, f"s={s}, X={X}", _nabla_end_apply(conn, I(s), N, 1, D(X)),
                             -I(chart.curv_section(Qb, X, s)))
            for t in sections:
                _check_equal(r, f"s={s}, t={t}", _nabla_end_apply(conn, I(s), N, 1, I(t)), zero)
        rep.append(r)

        r = CheckResult("R^E_{Q,U} = 0", "R^E vanishes on two directions paired with the Q block")
        for U in q_sections:
            for u in chart.section_basis():
                if any(u[k].terms for k in chart.e_block):
                    _check_equal(r, f"U={U}", chart.curv_section(Qb, chart.section_to_base(U), u),
                                 [sig.zero()] * chart.r)
        rep.append(r)

    M = covariant_end(conn, N)
    r = CheckResult("covariant_end", "iota_Z of nabla(tnabla Q) equals nabla_Z(tnabla Q)")
    for Z in [D(X) for X in chart.base_basis()] + [I(u) for u in chart.section_basis()]:
        for W in [D(X) for X in chart.base_basis()] + [I(u) for u in chart.section_basis()]:
            _check_equal(r, f"Z={Z}, W={W}", apply_end(iota_matrix(Z, M), W),
                         _nabla_end_apply(conn, Z, N, 1, W))
    rep.append(r)

    for label, val in [("Str tnabla Q", supertrace(N)), ("Str R.tnabla Q", supertrace(Rf @ N)),
                       ("Str R.tnabla Q.tnabla Q", supertrace(Rf @ N @ N)),
                       ("Str nabla(tnabla Q)^2", supertrace(M @ M))]:
        r = CheckResult(label, "supertrace zero", samples=1)
        if not val.is_zero():
            r.fail(str(val))
        rep.append(r)
    r = CheckResult("closedness", "d Str(nabla(tnabla Q) . tnabla Q) = 0", samples=1)
    cs = supertrace(M @ N)
    if not exterior_d(cs).is_zero():
        r.fail(str(exterior_d(cs)))
    r.detail["Str(nabla(tnabla Q).tnabla Q)"] = str(cs)
    rep.append(r)
    return rep
