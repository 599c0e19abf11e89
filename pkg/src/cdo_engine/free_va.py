"""The beta-gamma / bc Fock space on A^{p|q} and its vertex superalgebra structure.

States are supercommutative polynomials in the creation modes
``b^i_n`` (n <= 0) and ``a_{i,n}`` (n <= -1) applied to the vacuum.  Mode keys
are tuples ``(0, i, n)`` for b^i_n and ``(1, i, n)`` for a_{i,n}; sorting the
keys gives the normal order (b-modes first, then index, then mode number).

The only nonzero supercommutator is [a_{i,n}, b^j_m] = delta^j_i delta_{n,-m}, so
annihilators act as left derivatives:
a_{i,n} = d/d b^i_{-n} (n >= 0) and b^i_n = -eps_i d/d a_{i,-n} (n >= 1).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import factorial

from . import _superalg as alg
from .report import CheckResult, Report
from .scalars import QYSeries, canon, format_scalar, product_pow, one_minus_q_power
from .superpoly import (ChartSignature, SuperForm, SuperVectorField, bracket_vf,
                        exterior_d)

B, A = 0, 1


class _ModeGrades(dict):
    """Lazy grade table for mode keys: parity only, no form degree."""

    def __init__(self, parity):
        super().__init__()
        self._parity = parity

    def __missing__(self, key):
        g = self._parity[key[1]] << 1
        self[key] = g
        return g


class FockSpace:
    def __init__(self, sig: ChartSignature):
        self.sig = sig
        self.grade = _ModeGrades(sig.parity)

    def __eq__(self, other):
        return isinstance(other, FockSpace) and self.sig == other.sig

    def __hash__(self):
        return hash(self.sig)

    def vacuum(self) -> "FockState":
        return FockState(self, {(): 1})

    def zero(self) -> "FockState":
        return FockState(self, {})

    def state(self, keys, coeff=1) -> "FockState":
        """Ordered product of creation modes applied to the vacuum."""
        out = self.vacuum().terms
        for key in reversed(list(keys)):
            out = _create(self, key, out)
        return FockState(self, out).scale(coeff)


def _is_creation(key) -> bool:
    kind, _, n = key
    return n <= 0 if kind == B else n <= -1


def _create(space, key, terms: dict) -> dict:
    out: dict = {}
    one = (key,)
    for m, c in terms.items():
        s, nm = alg.mono_mul(one, m, space.grade)
        if s:
            v = out.get(nm, 0) + (c if s > 0 else -c)
            if v:
                out[nm] = v
            else:
                del out[nm]
    return out


def _annihilate(space, key, terms: dict) -> dict:
    kind, i, n = key
    if kind == A:
        return alg.left_partial(terms, (B, i, -n), space.grade)
    out = alg.left_partial(terms, (A, i, -n), space.grade)
    if space.sig.parity[i]:
        return out
    return {m: -c for m, c in out.items()}


def _apply_key(space, key, terms: dict) -> dict:
    if _is_creation(key):
        return _create(space, key, terms)
    return _annihilate(space, key, terms)


class FockState:
    __slots__ = ("space", "terms")

    def __init__(self, space: FockSpace, terms=None):
        self.space = space
        self.terms = {m: canon(c) for m, c in (terms or {}).items() if c}

    @classmethod
    def _raw(cls, space, terms):
        obj = cls.__new__(cls)
        obj.space = space
        obj.terms = terms
        return obj

    def __add__(self, other):
        return FockState._raw(self.space, alg.poly_add(self.terms, other.terms))

    def __sub__(self, other):
        return FockState._raw(self.space, alg.poly_add(self.terms, other.terms, -1))

    def __neg__(self):
        return FockState._raw(self.space, {m: -c for m, c in self.terms.items()})

    def scale(self, c) -> "FockState":
        return FockState._raw(self.space, alg.poly_scale(self.terms, canon(c)))

    __mul__ = scale
    __rmul__ = scale

    def __eq__(self, other):
        if isinstance(other, FockState):
            return self.terms == other.terms
        if other == 0:
            return not self.terms
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def is_zero(self):
        return not self.terms

    def weight_parts(self) -> dict:
        parts: dict = {}
        for m, c in self.terms.items():
            parts.setdefault(monomial_weight(m), {})[m] = c
        return {w: FockState._raw(self.space, t) for w, t in parts.items()}

    def weight(self) -> int:
        ws = {monomial_weight(m) for m in self.terms}
        if len(ws) > 1:
            raise ValueError("state is not weight-homogeneous")
        return ws.pop() if ws else 0

    def parity(self) -> int:
        ps = {alg.mono_grade(m, self.space.grade) >> 1 for m in self.terms}
        if len(ps) > 1:
            raise ValueError("state has mixed parity")
        return ps.pop() if ps else 0

    def __repr__(self):
        return f"FockState({format_state(self)})"

    def __str__(self):
        return format_state(self)


def monomial_weight(m) -> int:
    return -sum(k[2] for k in m)


def format_key(key) -> str:
    kind, i, n = key
    return f"{'b' if kind == B else 'a'}({i + 1},{n})"


def format_state(v: FockState) -> str:
    if not v.terms:
        return "0"
    parts = []
    for m, c in sorted(v.terms.items()):
        body = " ".join(format_key(k) for k in m)
        body = (body + " |0>") if body else "|0>"
        parts.append(f"{format_scalar(c)} {body}")
    return " + ".join(parts)


# ---------------------------------------------------------------------------
# Mode operators

@dataclass(frozen=True)
class ModeOperator:
    """Either a generator mode (kind 'b' or 'a') or the mode u_(n) of a state."""

    kind: str
    index: int = 0
    n: int = 0
    state: FockState | None = None

    @classmethod
    def b(cls, i, n):
        return cls("b", i, n)

    @classmethod
    def a(cls, i, n):
        return cls("a", i, n)

    @classmethod
    def of_state(cls, u, n):
        return cls("state", 0, n, u)


def apply_mode(op: ModeOperator, v: FockState) -> FockState:
    if op.kind == "state":
        return nth_product(op.state, op.n, v)
    key = (B if op.kind == "b" else A, op.index, op.n)
    v.space.sig.check_index(op.index)
    return FockState._raw(v.space, _apply_key(v.space, key, v.terms))


def generator_mode(v: FockState, kind: str, i: int, n: int) -> FockState:
    return apply_mode(ModeOperator(kind, i, n), v)


def _binom(x: int, r: int):
    num = 1
    for t in range(r):
        num *= x - t
    return Fraction(num, factorial(r)) if r > 1 else num


def _field_coefficient(key, m):
    """Coefficient of the mode with index m in the field of the state key|0>."""
    kind, _, n = key
    if kind == B:
        return _binom(-m, -n)
    return _binom(-m - 1, -n - 1)


def _compositions(slack, bounds_count):
    """All tuples of non-negative ints of given length summing to slack."""
    if bounds_count == 0:
        if slack == 0:
            yield ()
        return
    if bounds_count == 1:
        yield (slack,)
        return
    for first in range(slack + 1):
        for rest in _compositions(slack - first, bounds_count - 1):
            yield (first,) + rest


def _monomial_mode(space, u_mono: tuple, n: int, v_terms: dict, v_weight_max: int) -> dict:
    """u_(n) v for a single normal-ordered monomial u."""
    k = len(u_mono)
    if k == 0:
        return dict(v_terms) if n == -1 else {}
    wt_u = monomial_weight(u_mono)
    total = n + 1 - wt_u            # sum of the chosen mode numbers
    par = [space.sig.parity[key[1]] for key in u_mono]
    out: dict = {}
    for mask in range(1 << k):
        ann = [j for j in range(k) if mask >> j & 1]
        cre = [j for j in range(k) if not mask >> j & 1]
        sign = 0
        for j in ann:
            for l in cre:
                if l > j:
                    sign ^= par[j] & par[l]
        # annihilator mode numbers: b: m >= 1, a: m >= 0; their sum lowers weight
        lows = [1 if u_mono[j][0] == B else 0 for j in ann]
        budget = v_weight_max - sum(lows)
        if budget < 0:
            continue
        for extra in itertools.chain.from_iterable(
                _compositions(s, len(ann)) for s in range(budget + 1)):
            modes_ann = [lo + e for lo, e in zip(lows, extra)]
            coef = 1
            for j, m in zip(ann, modes_ann):
                coef *= _field_coefficient(u_mono[j], m)
                if not coef:
                    break
            if not coef:
                continue
            terms = v_terms
            for j, m in reversed(list(zip(ann, modes_ann))):
                terms = _annihilate(space, (u_mono[j][0], u_mono[j][1], m), terms)
                if not terms:
                    break
            if not terms:
                continue
            # creation modes: b: m <= 0, a: m <= -1, summing to the rest
            target = total - sum(modes_ann)
            ups = [0 if u_mono[j][0] == B else -1 for j in cre]
            slack = sum(ups) - target
            if slack < 0:
                continue
            if not cre:
                if slack != 0:
                    continue
                combos = [()]
            else:
                combos = _compositions(slack, len(cre))
            for lowering in combos:
                modes_cre = [u - s for u, s in zip(ups, lowering)]
                c2 = coef
                for j, m in zip(cre, modes_cre):
                    c2 *= _field_coefficient(u_mono[j], m)
                    if not c2:
                        break
                if not c2:
                    continue
                t2 = terms
                for j, m in reversed(list(zip(cre, modes_cre))):
                    t2 = _create(space, (u_mono[j][0], u_mono[j][1], m), t2)
                    if not t2:
                        break
                if sign:
                    c2 = -c2
                for mm, cc in t2.items():
                    val = out.get(mm, 0) + c2 * cc
                    if val:
                        out[mm] = val
                    else:
                        del out[mm]
    return out


def nth_product(u: FockState, n: int, v: FockState) -> FockState:
    """u_(n) v: the coefficient of z^{-n-1} in Y(u, z) v.

    Vertex operators of monomials are total normal-ordered products of the
    generating fields and their derivatives, which is what the strong
    reconstruction theorem produces for free fields.
    """
    space = v.space
    if not v.terms:
        return space.zero()
    wmax = max(monomial_weight(m) for m in v.terms)
    out: dict = {}
    for um, uc in u.terms.items():
        part = _monomial_mode(space, um, n, v.terms, wmax)
        if part:
            out = alg.poly_add(out, part, uc)
    return FockState._raw(space, out)


def translation(v: FockState) -> FockState:
    """T as the even derivation [T, b_n] = (1-n) b_{n-1}, [T, a_n] = -n a_{n-1}."""

    def act(key):
        kind, i, n = key
        c = (1 - n) if kind == B else -n
        return {((kind, i, n - 1),): c} if c else None

    return FockState._raw(v.space, alg.apply_derivation(v.terms, 0, act, v.space.grade))


def L0(v: FockState) -> FockState:
    out = {m: c * monomial_weight(m) for m, c in v.terms.items() if monomial_weight(m)}
    return FockState._raw(v.space, out)


# ---------------------------------------------------------------------------
# Dictionary between chart geometry and low-weight states

def function_state(space: FockSpace, f: SuperForm) -> FockState:
    """f(b_0)|0>; chart monomials map to zero modes in the same order."""
    out = {}
    for m, c in f.terms.items():
        if any(x >= f.sig.n for x in m):
            raise ValueError("function_state expects a function")
        out[tuple((B, x, 0) for x in m)] = c
    return FockState(space, out)


def form_state(space: FockSpace, alpha: SuperForm) -> FockState:
    """A 1-form f db^j as f_0 b^j_{-1}|0>."""
    n = alpha.sig.n
    out: dict = {}
    for m, c in alpha.terms.items():
        keys = [(B, x, 0) if x < n else (B, x - n, -1) for x in m]
        if sum(1 for x in m if x >= n) != 1:
            raise ValueError("form_state expects a 1-form")
        t = {(): c}
        for key in reversed(keys):
            t = _create(space, key, t)
        out = alg.poly_add(out, t)
    return FockState._raw(space, out)


def field_state(space: FockSpace, X: SuperVectorField) -> FockState:
    """The splitting s(X) = sum_i eps_i^{1+|X|} a_{i,-1} X^i."""
    sig = X.sig
    out: dict = {}
    for px, Xp in X.parity_parts().items():
        for i, comp in enumerate(Xp.comps):
            if not comp.terms:
                continue
            sign = sig.eps(i) if not px else 1
            t = _create(space, (A, i, -1), function_state(space, comp).terms)
            out = alg.poly_add(out, t, sign)
    return FockState._raw(space, out)


def state_function(v: FockState) -> SuperForm:
    sig = v.space.sig
    out = {}
    for m, c in v.terms.items():
        if any(k[0] != B or k[2] != 0 for k in m):
            raise ValueError("not a weight-zero function state")
        out[tuple(k[1] for k in m)] = c
    return SuperForm(sig, out)


def split_weight_one(v: FockState):
    """Write a weight-one state as form_state(alpha) + field_state(X)."""
    space = v.space
    sig = space.sig
    n = sig.n
    alpha_terms: dict = {}
    comps = [dict() for _ in range(n)]
    for m, c in v.terms.items():
        if monomial_weight(m) != 1:
            raise ValueError("state is not of weight one")
        a_pos = [j for j, k in enumerate(m) if k[0] == A]
        if a_pos:
            j = a_pos[0]
            key = m[j]
            rest = m[:j] + m[j + 1:]
            # move a_{i,-1} to the front
            par = 0
            if sig.parity[key[1]]:
                par = sum(sig.parity[k[1]] for k in m[:j]) & 1
            rest_par = sum(sig.parity[k[1]] for k in rest) & 1
            xpar = rest_par ^ sig.parity[key[1]]
            sign = -1 if par else 1
            if not xpar:
                sign *= sig.eps(key[1])
            fm = tuple(k[1] for k in rest)
            comps[key[1]][fm] = comps[key[1]].get(fm, 0) + sign * c
        else:
            # f_0 b^j_{-1}: rebuild in form order (functions first, then d)
            j = next(idx for idx, k in enumerate(m) if k[2] == -1)
            key = m[j]
            rest = m[:j] + m[j + 1:]
            par = sig.parity[key[1]] & (sum(sig.parity[k[1]] for k in m[j + 1:]) & 1)
            fm = tuple(k[1] for k in rest) + (n + key[1],)
            alpha_terms[fm] = alpha_terms.get(fm, 0) + (-c if par else c)
    alpha = SuperForm(sig, alpha_terms)
    X = SuperVectorField(sig, [SuperForm(sig, t) for t in comps])
    return alpha, X


# ---------------------------------------------------------------------------
# Conformal elements and the Virasoro algebra

class ConformalError(ValueError):
    pass


def conformal_element(sig: ChartSignature, omega: SuperForm | None = None,
                      space: FockSpace | None = None) -> FockState:
    """nu^omega = sum_i eps_i a_{i,-1} b^i_{-1}|0> + 1/2 T(omega)."""
    space = space or FockSpace(sig)
    nu = space.zero()
    for i in range(sig.n):
        nu = nu + space.state([(A, i, -1), (B, i, -1)], sig.eps(i))
    if omega is not None and not omega.is_zero():
        if not exterior_d(omega).is_zero():
            raise ConformalError("omega must be closed")
        if omega.parity() != 0:
            raise ConformalError("omega must be even")
        nu = nu + translation(form_state(space, omega)).scale(Fraction(1, 2))
    return nu


def fock_basis(space: FockSpace, max_weight: int, max_zero_modes: int = 2) -> list:
    """Normal-ordered monomial states of weight <= max_weight.

    Zero modes b^i_0 carry no weight, so their number is capped separately.
    """
    sig = space.sig
    gens = []
    for w in range(1, max_weight + 1):
        for i in range(sig.n):
            gens.append(((B, i, -w), w))
            gens.append(((A, i, -w), w))
    zero = [(B, i, 0) for i in range(sig.n)]
    results = []

    def rec(start, weight, chosen):
        results.append(tuple(chosen))
        for idx in range(start, len(gens)):
            key, w = gens[idx]
            if weight + w > max_weight:
                continue
            if sig.parity[key[1]] and key in chosen:
                continue
            nxt = idx if not sig.parity[key[1]] else idx + 1
            chosen.append(key)
            rec(nxt, weight + w, chosen)
            chosen.pop()

    rec(0, 0, [])
    zero_monos = [()]
    for k in range(1, max_zero_modes + 1):
        for combo in itertools.combinations_with_replacement(zero, k):
            if any(sig.parity[key[1]] and combo.count(key) > 1 for key in combo):
                continue
            zero_monos.append(combo)
    states = []
    seen = set()
    for zm in zero_monos:
        for nm in results:
            st = space.state(list(zm) + list(nm))
            if st.terms:
                key = frozenset(st.terms)
                if key not in seen:
                    seen.add(key)
                    states.append(st)
    return states


def virasoro_report(sig: ChartSignature, omega: SuperForm | None = None, max_weight: int = 3,
                    mode_range=(-2, 2), max_zero_modes: int = 1) -> Report:
    space = FockSpace(sig)
    nu = conformal_element(sig, omega, space)
    c = 2 * (sig.p - sig.q)
    report = Report()
    vac = space.vacuum()

    def L(n, v):
        return nth_product(nu, n + 1, v)

    gens = []
    for i in range(sig.n):
        gens.append((f"b{i + 1}", space.state([(B, i, 0)])))
        gens.append((f"db{i + 1}", space.state([(B, i, -1)])))
        gens.append((f"d{i + 1}", space.state([(A, i, -1)])))
    r0 = CheckResult("nu_(0) = T", "conformal element: translation")
    r1 = CheckResult("nu_(1) = L0", "conformal element: weight operator")
    for name, g in gens:
        r0.samples += 1
        r1.samples += 1
        if nth_product(nu, 0, g) != translation(g):
            r0.fail(f"{name}: {nth_product(nu, 0, g)} vs {translation(g)}")
        if nth_product(nu, 1, g) != L0(g):
            r1.fail(f"{name}: {nth_product(nu, 1, g)} vs {L0(g)}")
    report += [r0, r1]

    r2 = CheckResult("nu_(2) nu = 0", "conformal element: quasi-primary")
    r2.samples = 1
    v2 = nth_product(nu, 2, nu)
    if not v2.is_zero():
        r2.fail(str(v2))
    r3 = CheckResult("nu_(3) nu = (p-q)|0>", "central charge 2(p-q)")
    r3.samples = 1
    v3 = nth_product(nu, 3, nu)
    r3.detail["nu_(3) nu"] = str(v3)
    if v3 != vac.scale(Fraction(c, 2)):
        r3.fail(str(v3))
    report += [r2, r3]

    rv = CheckResult("Virasoro bracket", f"[L_m, L_n] with c = {c}")
    lo, hi = mode_range
    basis = fock_basis(space, max_weight, max_zero_modes)
    for v in basis:
        Lv = {n: L(n, v) for n in range(lo, hi + 1)}
        for m in range(lo, hi + 1):
            for n in range(lo, hi + 1):
                lhs = L(m, Lv[n]) - L(n, Lv[m])
                rhs = L(m + n, v).scale(m - n)
                if m + n == 0:
                    rhs = rhs + v.scale(Fraction(c * (m ** 3 - m), 12))
                rv.samples += 1
                if lhs != rhs:
                    rv.fail(f"m={m}, n={n}, v={v}")
    report.append(rv)
    return report


# ---------------------------------------------------------------------------
# Borcherds commutator formula

def borcherds_commutator_holds(u: FockState, v: FockState, w: FockState, m: int, k: int) -> bool:
    """[u_(m), v_(k)] w = sum_j C(m, j) (u_(j) v)_(m+k-j) w."""
    pu = u.parity()
    pv = v.parity()
    lhs = nth_product(u, m, nth_product(v, k, w))
    other = nth_product(v, k, nth_product(u, m, w))
    lhs = lhs - other if not (pu and pv) else lhs + other
    rhs = w.space.zero()
    j = 0
    wu = max((monomial_weight(x) for x in u.terms), default=0)
    wv = max((monomial_weight(x) for x in v.terms), default=0)
    while j < wu + wv + 1:
        coef = _binom(m, j)
        if coef:
            uv = nth_product(u, j, v)
            if uv.terms:
                rhs = rhs + nth_product(uv, m + k - j, w).scale(coef)
        j += 1
    return lhs == rhs


# ---------------------------------------------------------------------------
# Zero modes of one-forms

def zero_mode_oneform(alpha: SuperForm, X: SuperVectorField, space: FockSpace | None = None) -> FockState:
    """alpha_0 s(X), computed in the Fock space."""
    space = space or FockSpace(alpha.sig)
    return nth_product(form_state(space, alpha), 0, field_state(space, X))


# ---------------------------------------------------------------------------
# PBW count

def pbw_count(sig: ChartSignature, k: int) -> int:
    """Number of normal-ordered monomials of weight k in the positive-weight modes."""
    space = FockSpace(sig)
    return sum(1 for v in fock_basis(space, k, 0) if v.weight() == k)


def character_series(sig: ChartSignature, order: int) -> QYSeries:
    """prod_{l>=1} (1+q^l)^{2q} / (1-q^l)^{2p} truncated at q^order."""
    factors = [(QYSeries.const(order, 1), 1)]
    for l in range(1, order + 1):
        factors.append((one_minus_q_power(order, l, -1), 2 * sig.q))
        factors.append((one_minus_q_power(order, l, 1), -2 * sig.p))
    return product_pow(factors)


def graded_character(sig: ChartSignature, k: int) -> int:
    """PBW count of weight k, cross-checked against the product formula."""
    count = pbw_count(sig, k)
    expected = character_series(sig, k).coeff(k)
    if count != expected:
        raise AssertionError(f"PBW count {count} != series coefficient {expected}")
    return count


# ---------------------------------------------------------------------------
# The vertex algebroid read off from the Fock space

def fock_structure(sig: ChartSignature, splitting=None, space: FockSpace | None = None):
    """Structure maps computed from products of weight <= 1 states.

    With the splitting s (default: field_state), f * X = form part of
    f_(-1) s(X) - s(fX), {X, Y} = s(X)_(1) s(Y) and {X, Y}_O = form part of
    s(X)_(0) s(Y) - s([X, Y]).
    """
    from .algebroid import ChartAlgebroid, VertexAlgebroidStructure
    space = space or FockSpace(sig)
    split = splitting or (lambda X: field_state(space, X))

    def form_part(v, label):
        alpha, rest = split_weight_one(v)
        if not rest.is_zero():
            raise AssertionError(f"{label} has a vector part")
        return alpha

    def star(f, X):
        v = nth_product(function_state(space, f), -1, split(X)) - split(X.scale(f))
        return form_part(v, "f_(-1) s(X) - s(fX)")

    def brace(X, Y):
        return state_function(nth_product(split(X), 1, split(Y)))

    def brace_omega(X, Y):
        v = nth_product(split(X), 0, split(Y)) - split(bracket_vf(X, Y))
        return form_part(v, "s(X)_(0) s(Y) - s([X,Y])")

    return VertexAlgebroidStructure(ChartAlgebroid(sig), star, brace, brace_omega,
                                    "fock" if splitting is None else "fock(split)")


# ---------------------------------------------------------------------------
# Mode algebra driven by an arbitrary vertex algebroid

@dataclass(frozen=True)
class Gen:
    """A generator of the mode algebra: kind is "f", "alpha" or "X"."""

    kind: str
    value: object

    def parity(self, V) -> int:
        return V.base.parity(self.value) if V.base.kind == "chart" else 0


class StructuredModes:
    """Supercommutators of f_n, alpha_n, X_n with structure constants read from V.

    Function modes are indexed so that f_n = f_(n-1); one-form and field modes
    satisfy alpha_n = alpha_(n), X_n = X_(n).  Terms are (Gen, mode, coefficient).
    """

    def __init__(self, V):
        self.V = V
        self.base = V.base

    def _iota(self, X, alpha):
        if self.base.kind != "chart":
            return 0
        from .superpoly import contract
        return contract(X, alpha)

    def _nonzero(self, x):
        return not self.base.is_zero(x)

    def commutator(self, u: Gen, n: int, w: Gen, m: int) -> list:
        V, b = self.V, self.base
        if u.kind != "X" and w.kind != "X":
            return []
        if u.kind != "X":
            sign = -1 if (u.parity(V) and w.parity(V)) else 1
            return [(g, k, -sign * c) for g, k, c in self.commutator(w, m, u, n)]
        X = u.value
        out = []
        if w.kind == "f":
            val = b.act(X, w.value)
            if self._nonzero(val):
                out.append((Gen("f", val), n + m, 1))
        elif w.kind == "alpha":
            lie = b.lie(X, w.value)
            if self._nonzero(lie):
                out.append((Gen("alpha", lie), n + m, 1))
            it = self._iota(X, w.value)
            if n and self._nonzero(it):
                out.append((Gen("f", it), n + m, n))
        else:
            Y = w.value
            br = b.bracket(X, Y)
            if self._nonzero(br):
                out.append((Gen("X", br), n + m, 1))
            bo = V.brace_omega(X, Y)
            if self._nonzero(bo):
                out.append((Gen("alpha", bo), n + m, 1))
            bc = V.brace(X, Y)
            if n and self._nonzero(bc):
                out.append((Gen("f", bc), n + m, n))
        return out


class FockRealization:
    """Generator modes of a chart structure acting on the Fock space through a splitting."""

    def __init__(self, sig: ChartSignature, splitting=None, space: FockSpace | None = None):
        self.sig = sig
        self.space = space or FockSpace(sig)
        self.split = splitting or (lambda X: field_state(self.space, X))

    def state(self, g: Gen) -> FockState:
        if g.kind == "f":
            return function_state(self.space, g.value)
        if g.kind == "alpha":
            return form_state(self.space, g.value)
        return self.split(g.value)

    def act(self, g: Gen, n: int, v: FockState) -> FockState:
        return nth_product(self.state(g), n - 1 if g.kind == "f" else n, v)

    def act_terms(self, terms, v: FockState) -> FockState:
        out = self.space.zero()
        for g, k, c in terms:
            out = out + self.act(g, k, v).scale(c)
        return out


class AffineVacuumModule:
    """PBW vacuum module of the affinization of a Lie vertex algebroid.

    States are dicts from sorted tuples of (mode, basis index), modes <= -1.
    X_n acts through [X_n, Y_m] = [X, Y]_{n+m} + n lambda(X, Y) delta_{n+m,0}.
    """

    def __init__(self, V):
        if V.base.kind != "lie":
            raise ValueError("the affine vacuum module needs a Lie algebroid")
        self.V = V
        self.dim = V.base.dim
        basis = V.base.basis()
        self._br = [[V.base.bracket(x, y).coeffs for y in basis] for x in basis]
        self._lam = [[V.brace(x, y) for y in basis] for x in basis]
        self._cache = {}

    def vacuum(self) -> dict:
        return {(): 1}

    def _apply_basis(self, a: int, n: int, mono: tuple) -> dict:
        key = (a, n, mono)
        if key in self._cache:
            return self._cache[key]
        if not mono:
            out = {} if n >= 0 else {((n, a),): 1}
        elif n < 0 and (n, a) <= mono[0]:
            out = {((n, a),) + mono: 1}
        else:
            (m, b), rest = mono[0], mono[1:]
            out = {}
            inner = self._apply_basis(a, n, rest)
            for mono2, c in inner.items():
                _acc(out, self._apply_basis(b, m, mono2), c)
            for k, c in self._br[a][b].items():
                _acc(out, self._apply_basis(k, n + m, rest), c)
            lam = self._lam[a][b]
            if n and n + m == 0 and lam:
                _acc(out, {rest: 1}, n * lam)
        self._cache[key] = out
        return out

    def act(self, X, n: int, state: dict) -> dict:
        out: dict = {}
        for a, xa in X.coeffs.items():
            for mono, c in state.items():
                _acc(out, self._apply_basis(a, n, mono), xa * c)
        return out

    def basis_states(self, max_weight: int) -> list:
        gens = [(m, a) for m in range(-max_weight, 0) for a in range(self.dim)]
        out = []

        def rec(start, weight, chosen):
            out.append({tuple(chosen): 1})
            for i in range(start, len(gens)):
                m, _ = gens[i]
                if weight - m <= max_weight:
                    rec(i, weight - m, chosen + [gens[i]])

        rec(0, 0, [])
        return out


def _acc(out: dict, terms: dict, c) -> None:
    for k, v in terms.items():
        val = canon(out.get(k, 0) + c * v)
        if val:
            out[k] = val
        else:
            out.pop(k, None)


def structured_mode_action(V, gen: Gen, n: int, v, realization=None):
    """Apply gen_n to a state of the vertex algebra freely generated by V.

    Lie algebroids act on their PBW vacuum module; chart structures act on the
    Fock space through ``realization`` (default: the coordinate splitting).
    """
    if V.base.kind == "lie":
        module = realization or AffineVacuumModule(V)
        if gen.kind != "X":
            raise ValueError("a Lie algebroid has only field generators with nonzero modes")
        return module.act(gen.value, n, v)
    realization = realization or FockRealization(V.base.sig)
    return realization.act(gen, n, v)


def mode_agreement_report(V, realization: FockRealization | None = None, pairs: int = 30,
                          seed: int = 0, max_weight: int = 2, modes=(-2, 2)) -> Report:
    """Commutators predicted by V against the Fock space action, on random states."""
    import random as _random
    from .algebroid import Sampler
    sig = V.base.sig
    realization = realization or FockRealization(sig)
    sm = StructuredModes(V)
    rng = _random.Random(seed)
    sampler = Sampler(V.base, seed=seed, max_degree=2)
    states = [v for v in fock_basis(realization.space, max_weight, 1)]
    r = CheckResult("mode commutators", "[u_n, w_m] from the algebroid structure agrees with the Fock action")

    def draw():
        kind = rng.choice(["f", "alpha", "X"])
        if kind == "f":
            return Gen("f", sampler.function())
        if kind == "alpha":
            f = sampler.function()
            return Gen("alpha", f * sig.dcoord(rng.randrange(sig.n)))
        return Gen("X", sampler.field())

    lo, hi = modes
    for _ in range(pairs):
        u, w = draw(), draw()
        n, m = rng.randint(lo, hi), rng.randint(lo, hi)
        v = rng.choice(states)
        pu = u.parity(V)
        pw = w.parity(V)
        lhs = realization.act(u, n, realization.act(w, m, v))
        other = realization.act(w, m, realization.act(u, n, v))
        lhs = lhs + other if (pu and pw) else lhs - other
        rhs = realization.act_terms(sm.commutator(u, n, w, m), v)
        r.samples += 1
        if lhs != rhs:
            r.fail(f"u={u}, n={n}, w={w}, m={m}, v={format_state(v)}")
    return Report([r])


def kac_moody_report(V, max_weight: int = 2, modes=(-2, 2)) -> Report:
    """[X_m, Y_n] = [X, Y]_{m+n} + m lambda(X, Y) delta_{m+n,0} on the vacuum module."""
    M = AffineVacuumModule(V)
    basis = V.base.basis()
    r = CheckResult("affine Kac-Moody relations", "[X_m, Y_n] = [X,Y]_{m+n} + m lambda(X,Y) delta_{m+n,0}")
    lo, hi = modes
    for v in M.basis_states(max_weight):
        for X in basis:
            for Y in basis:
                lam = V.brace(X, Y)
                br = V.base.bracket(X, Y)
                for m in range(lo, hi + 1):
                    for n in range(lo, hi + 1):
                        lhs: dict = {}
                        _acc(lhs, M.act(X, m, M.act(Y, n, v)), 1)
                        _acc(lhs, M.act(Y, n, M.act(X, m, v)), -1)
                        rhs: dict = {}
                        _acc(rhs, M.act(br, m + n, v), 1)
                        if m + n == 0 and m and lam:
                            _acc(rhs, v, m * lam)
                        r.samples += 1
                        if lhs != rhs:
                            r.fail(f"X={X}, Y={Y}, m={m}, n={n}, v={v}")
    return Report([r])


# ---------------------------------------------------------------------------
# Zero modes of one-forms

def zero_mode_sign(alpha: SuperForm, X: SuperVectorField) -> int:
    """alpha_0 s(X) = sign * i_X d alpha, with sign = -(-1)^{|alpha||X|}."""
    return 1 if (alpha.parity() and X.parity()) else -1


def zero_mode_report(alpha: SuperForm, X: SuperVectorField, space: FockSpace | None = None) -> Report:
    from .superpoly import contract
    space = space or FockSpace(alpha.sig)
    r = CheckResult("one-form zero mode", "alpha_0 s(X) = -(-1)^{|alpha||X|} i_X d alpha", samples=1)
    out = space.zero()
    expected = space.zero()
    for pa, ap in alpha.parity_parts().items():
        for px, Xp in X.parity_parts().items():
            out = out + zero_mode_oneform(ap, Xp, space)
            expected = expected + form_state(space, contract(Xp, exterior_d(ap))).scale(zero_mode_sign(ap, Xp))
    r.detail["alpha_0 s(X)"] = format_state(out)
    r.detail["sign convention"] = "-(-1)^{|alpha||X|}"
    if out != expected:
        r.fail(f"{format_state(out)} vs {format_state(expected)}")
    return Report([r])


# ---------------------------------------------------------------------------
# Global structures on a chart, realised in the Fock space

class GlobalFockModel:
    """The vertex algebra of global_structure(conn, H) on one chart, inside the Fock space.

    (id, Delta) with B a primitive of H - CS(Gamma) maps the coordinate structure
    to the global one, so a field X of the latter is s(X) - Delta(X).  The
    conformal element nu^omega is the Fock element with omega - Str Gamma.
    """

    def __init__(self, conn, H: SuperForm | None = None):
        from .algebroid import (PreconditionError, connection_delta, cs_form, dh_residual,
                                homotopy)
        from .superpoly import supertrace
        sig = conn.sig
        H = H if H is not None else sig.zero()
        res = dh_residual(conn, H)
        if not res.is_zero():
            raise PreconditionError(f"dH != Str(R^R); residual {res}", res)
        self.conn, self.H, self.sig = conn, H, sig
        self.space = FockSpace(sig)
        self.delta = connection_delta(conn, homotopy(H - cs_form(conn)))
        self._str_gamma = supertrace(conn.gamma)

    def field(self, X: SuperVectorField) -> FockState:
        return field_state(self.space, X) - form_state(self.space, self.delta(X))

    def realization(self) -> FockRealization:
        return FockRealization(self.sig, self.field, self.space)

    def structure(self):
        return fock_structure(self.sig, self.field, self.space)

    def conformal(self, omega: SuperForm | None = None) -> FockState:
        from .algebroid import ConformalPreconditionError
        from .superpoly import supertrace
        omega = omega if omega is not None else self.sig.zero()
        res = exterior_d(omega) - supertrace(self.conn.R)
        if not res.is_zero():
            raise ConformalPreconditionError(f"d omega != Str R; residual {res}", res)
        return conformal_element(self.sig, omega - self._str_gamma, self.space)

    def zero_mode(self, X: SuperVectorField):
        s = self.field(X)
        return lambda v: nth_product(s, 0, v)

    def generators(self) -> list:
        sig, sp = self.sig, self.space
        out = []
        for i in range(sig.n):
            out.append((f"b{i + 1}", function_state(sp, sig.coord(i))))
            out.append((f"db{i + 1}", form_state(sp, sig.dcoord(i))))
            out.append((f"d{i + 1}", field_state(sp, SuperVectorField.basis(sig, i))))
        return out


def _form_zero_mode(model: GlobalFockModel, alpha: SuperForm):
    st = form_state(model.space, alpha)
    return lambda v: nth_product(st, 0, v)


def _compare_on_generators(model, res: CheckResult, lhs_op, rhs_op, label=""):
    for name, g in model.generators():
        res.samples += 1
        a, b = lhs_op(g), rhs_op(g)
        if a != b:
            res.fail(f"{label}{name}: {format_state(a)} vs {format_state(b)}")


def form_type(w: SuperForm, holo: list, anti: list) -> set:
    """Set of (p, q) types of the monomials of w, counting dz and dzbar factors."""
    n = w.sig.n
    out = set()
    for m in w.terms:
        p = sum(1 for x in m if x >= n and x - n in holo)
        q = sum(1 for x in m if x >= n and x - n in anti)
        out.add((p, q))
    return out


def q_lift_report(chart, H: SuperForm | None = None, omega: SuperForm | None = None) -> Report:
    """Q_0 squared and Q_0 nu^omega for a Dolbeault chart, on the Fock generators."""
    from .algebroid import global_structure, homotopy
    from .superpoly import contract, pair, supertrace
    conn = chart.affine_connection()
    sig = chart.sig
    H = H if H is not None else homotopy(supertrace(conn.R @ conn.R))
    model = GlobalFockModel(conn, H)
    V = global_structure(conn, H)
    Q = chart.Q()
    Q0 = model.zero_mode(Q)
    obstruction = contract(Q, contract(Q, H)) * Fraction(1, 2)
    rep = Report()

    # equality only up to closed forms, which have vanishing zero modes
    r = CheckResult("{Q,Q}_O", "[Q,Q] = 0 and {Q,Q}_O - 1/2 i_Q i_Q H is closed", samples=1)
    diff = V.brace_omega(Q, Q) - obstruction
    r.detail["{Q,Q}_O - 1/2 i_Q i_Q H"] = str(diff)
    if not bracket_vf(Q, Q).is_zero():
        r.fail(f"[Q,Q] = {bracket_vf(Q, Q)}")
    elif not exterior_d(diff).is_zero():
        r.fail(f"d of the difference is {exterior_d(diff)}")
    rep.append(r)

    r = CheckResult("2 Q_0^2", "2 Q_0^2 = (1/2 i_Q i_Q H)_0 on generators")
    obs0 = _form_zero_mode(model, obstruction)
    _compare_on_generators(model, r, lambda v: Q0(Q0(v)).scale(2), obs0)
    rep.append(r)

    holo = list(range(chart.cdim))
    anti = list(range(chart.cdim, 2 * chart.cdim))
    types = form_type(H, holo, anti)
    bad_types = sorted(t for t in types if t[1] >= 2)
    r = CheckResult("Q_0 differential", "Q_0^2 = 0 iff H has no (1,2) or (0,3) part")
    vanishes = True
    for name, g in model.generators():
        r.samples += 1
        if not Q0(Q0(g)).is_zero():
            vanishes = False
            r.detail.setdefault("obstruction state", f"Q_0^2 {name} = {format_state(Q0(Q0(g)))}")
    r.detail["H types"] = sorted(types)
    r.detail["i_Q i_Q H / 2"] = str(obstruction)
    if vanishes != (not bad_types):
        r.fail(f"Q_0^2 vanishing={vanishes} but H types {sorted(types)}")
    r.detail["Q_0^2 = 0"] = vanishes
    rep.append(r)

    if omega is None:
        omega = homotopy(supertrace(conn.R))
    nu = model.conformal(omega)
    r = CheckResult("Q_0 nu", "Q_0 nu^omega = 1/2 T^2 (omega(Q))", samples=1)
    lhs = Q0(nu)
    wq = pair(omega, Q)
    rhs = translation(translation(function_state(model.space, wq))).scale(Fraction(1, 2))
    r.detail["omega(Q)"] = str(wq)
    r.detail["omega types"] = sorted(form_type(omega, holo, anti))
    if lhs != rhs:
        r.fail(f"{format_state(lhs)} vs {format_state(rhs)}")
    rep.append(r)
    return rep


def _commutator_even_odd(A0, Q0):
    return lambda v: A0(Q0(v)) - Q0(A0(v))


def fermion_report(chart, H: SuperForm | None = None) -> Report:
    """[J^r_0, Q_0] - Q_0 = -(i_Q Tr Rbar^M)_0 and [J^l_0, Q_0] = -(i_Q Tr R^E)_0."""
    from .algebroid import homotopy
    from .superpoly import contract, supertrace
    conn = chart.affine_connection()
    H = H if H is not None else homotopy(supertrace(conn.R @ conn.R))
    model = GlobalFockModel(conn, H)
    Q = chart.Q()
    Q0 = model.zero_mode(Q)
    tr = chart.holomorphic_traces()
    rep = Report()

    Jr0 = model.zero_mode(chart.Jr())
    defect_r = contract(Q, tr["TrRMbar"])
    r = CheckResult("[Jr_0,Q_0]", "[J^r_0, Q_0] - Q_0 = -(i_Q Tr Rbar^M)_0")
    lhs = lambda v: _commutator_even_odd(Jr0, Q0)(v) - Q0(v)  # noqa: E731
    rhs = lambda v: -_form_zero_mode(model, defect_r)(v)  # noqa: E731
    _compare_on_generators(model, r, lhs, rhs)
    r.detail["i_Q Tr Rbar^M"] = str(defect_r)
    rep.append(r)

    Jl0 = model.zero_mode(chart.Jl())
    defect_l = contract(Q, tr["TrRE"])
    r = CheckResult("[Jl_0,Q_0]", "[J^l_0, Q_0] = -(i_Q Tr R^E)_0")
    lhs = _commutator_even_odd(Jl0, Q0)
    rhs = lambda v: -_form_zero_mode(model, defect_l)(v)  # noqa: E731
    _compare_on_generators(model, r, lhs, rhs)
    r.detail["i_Q Tr R^E"] = str(defect_l)
    rep.append(r)
    return rep


def cdr_report(chart) -> Report:
    """Chiral de Rham checks with H = 0 and omega = 0 on a de Rham chart."""
    conn = chart.affine_connection()
    model = GlobalFockModel(conn, None)
    Q, J = chart.Q(), chart.J()
    Q0, J0 = model.zero_mode(Q), model.zero_mode(J)
    nu = model.conformal(None)
    rep = Report()

    r = CheckResult("Q_0^2 = 0", "Q_0 is a differential")
    _compare_on_generators(model, r, lambda v: Q0(Q0(v)), lambda v: model.space.zero())
    rep.append(r)
    r = CheckResult("[J_0,Q_0] = Q_0", "Q_0 raises the fermion number by one")
    _compare_on_generators(model, r, _commutator_even_odd(J0, Q0), Q0)
    rep.append(r)
    # without a metric the trace of R^E need not vanish; the defect is exact
    from .superpoly import contract
    from .cs_geometry import _mtr
    defect = contract(Q, _mtr(chart.R_E, chart.sig))
    r = CheckResult("[J_0,Q_0] defect", "[J_0,Q_0] - Q_0 = -(i_Q Tr R^E)_0")
    _compare_on_generators(model, r, lambda v: _commutator_even_odd(J0, Q0)(v) - Q0(v),
                           lambda v: -_form_zero_mode(model, defect)(v))
    r.detail["i_Q Tr R^E"] = str(defect)
    rep.append(r)
    for label, op in (("Q_0 nu = 0", Q0), ("J_0 nu = 0", J0)):
        r = CheckResult(label, "conformal element is annihilated", samples=1)
        val = op(nu)
        if not val.is_zero():
            r.fail(format_state(val))
        rep.append(r)
    return rep
