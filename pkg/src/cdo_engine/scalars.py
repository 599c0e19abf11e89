"""Exact scalars: Gaussian rationals and truncated series in q (with Laurent y).

Coefficients throughout the engine are plain ``int``/``Fraction`` values when
real, and :class:`GaussianRational` only when an imaginary part is present.
``gauss(re, im)`` returns the cheapest exact representative.
"""
from __future__ import annotations

from fractions import Fraction
from numbers import Rational


class GaussianRational:
    """a + b i with a, b rational."""

    __slots__ = ("real", "imag")

    def __init__(self, real=0, imag=0):
        self.real = Fraction(real)
        self.imag = Fraction(imag)

    @staticmethod
    def _split(x):
        if isinstance(x, GaussianRational):
            return x.real, x.imag
        if isinstance(x, (int, Fraction, Rational)):
            return Fraction(x), Fraction(0)
        return None

    def __add__(self, other):
        o = self._split(other)
        if o is None:
            return NotImplemented
        return gauss(self.real + o[0], self.imag + o[1])

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.real, -self.imag)

    def __sub__(self, other):
        o = self._split(other)
        if o is None:
            return NotImplemented
        return gauss(self.real - o[0], self.imag - o[1])

    def __rsub__(self, other):
        o = self._split(other)
        if o is None:
            return NotImplemented
        return gauss(o[0] - self.real, o[1] - self.imag)

    def __mul__(self, other):
        o = self._split(other)
        if o is None:
            return NotImplemented
        a, b = self.real, self.imag
        c, d = o
        return gauss(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def inverse(self):
        n = self.real * self.real + self.imag * self.imag
        if n == 0:
            raise ZeroDivisionError("GaussianRational division by zero")
        return gauss(self.real / n, -self.imag / n)

    def __truediv__(self, other):
        o = self._split(other)
        if o is None:
            return NotImplemented
        return self * GaussianRational(*o).inverse()

    def __rtruediv__(self, other):
        o = self._split(other)
        if o is None:
            return NotImplemented
        return GaussianRational(*o) * self.inverse()

    def conjugate(self):
        return gauss(self.real, -self.imag)

    def __eq__(self, other):
        o = self._split(other)
        if o is None:
            return NotImplemented
        return self.real == o[0] and self.imag == o[1]

    def __hash__(self):
        if self.imag == 0:
            return hash(self.real)
        return hash((self.real, self.imag))

    def __bool__(self):
        return bool(self.real) or bool(self.imag)

    def __repr__(self):
        return f"GaussianRational({self.real}, {self.imag})"

    def __str__(self):
        return format_scalar(self)


I = GaussianRational(0, 1)


def gauss(real, imag=0):
    """Canonical exact scalar: a Fraction/int when imag == 0."""
    if imag == 0:
        r = Fraction(real)
        return r.numerator if r.denominator == 1 else r
    return GaussianRational(real, imag)


def canon(x):
    """Normalize an exact scalar (int, Fraction or GaussianRational)."""
    if isinstance(x, GaussianRational):
        return gauss(x.real, x.imag)
    if isinstance(x, Fraction) and x.denominator == 1:
        return x.numerator
    return x


def inverse(x):
    if isinstance(x, GaussianRational):
        return x.inverse()
    if x == 0:
        raise ZeroDivisionError("division by zero")
    return canon(Fraction(1) / Fraction(x))


def _fmt_rat(r: Fraction) -> str:
    r = Fraction(r)
    return str(r.numerator) if r.denominator == 1 else f"{r.numerator}/{r.denominator}"


def format_scalar(x) -> str:
    """'p/q', 'p/q*i' or '(a + b*i)'."""
    if isinstance(x, GaussianRational):
        if x.imag == 0:
            return _fmt_rat(x.real)
        im = _fmt_rat(x.imag)
        im_part = "i" if x.imag == 1 else ("-i" if x.imag == -1 else f"{im}*i")
        if x.real == 0:
            return im_part
        sign = "-" if x.imag < 0 else "+"
        mag = _fmt_rat(abs(x.imag))
        mag_part = "i" if abs(x.imag) == 1 else f"{mag}*i"
        return f"({_fmt_rat(x.real)} {sign} {mag_part})"
    return _fmt_rat(Fraction(x))


def parse_scalar(text: str):
    """Inverse of format_scalar for the plain rational / pure imaginary forms."""
    t = text.strip().replace(" ", "")
    if t.startswith("(") and t.endswith(")"):
        t = t[1:-1]
    if "i" not in t:
        return canon(Fraction(t))
    # a+b*i, b*i, i, -i
    body = t
    split = max(body.rfind("+", 1), body.rfind("-", 1))
    re_part, im_part = (body[:split], body[split:]) if split > 0 else ("0", body)
    im_part = im_part.replace("*i", "").replace("i", "")
    if im_part in ("", "+"):
        im_part = "1"
    elif im_part == "-":
        im_part = "-1"
    return gauss(Fraction(re_part), Fraction(im_part))


class SeriesError(ValueError):
    pass


class QYSeries:
    """Power series in q truncated after q^N, with Laurent-polynomial coefficients in y.

    Stored as ``{(qexp, yexp): coeff}`` with zero coefficients removed.
    """

    __slots__ = ("order", "terms")

    def __init__(self, order: int, terms=None):
        if order < 0:
            raise SeriesError("truncation order must be non-negative")
        self.order = order
        clean = {}
        if terms:
            for (a, b), c in terms.items():
                if a < 0:
                    raise SeriesError("negative q exponent")
                if a <= order and c:
                    clean[(a, b)] = canon(c)
        self.terms = clean

    # constructors
    @classmethod
    def const(cls, order, c=1):
        return cls(order, {(0, 0): c})

    @classmethod
    def monomial(cls, order, qexp=0, yexp=0, c=1):
        return cls(order, {(qexp, yexp): c})

    @classmethod
    def from_poly(cls, order, coeffs, var="q"):
        """coeffs[k] is the coefficient of q^k (or of y^k if var == 'y')."""
        if var == "q":
            return cls(order, {(k, 0): c for k, c in enumerate(coeffs)})
        return cls(order, {(0, k): c for k, c in enumerate(coeffs)})

    def _check(self, other):
        if not isinstance(other, QYSeries):
            return QYSeries.const(self.order, other)
        if other.order != self.order:
            raise SeriesError(
                f"mismatched truncation orders {self.order} and {other.order}")
        return other

    def __add__(self, other):
        other = self._check(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0) + c
        return QYSeries(self.order, out)

    __radd__ = __add__

    def __neg__(self):
        return QYSeries(self.order, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._check(other))

    def __rsub__(self, other):
        return self._check(other) - self

    def scale(self, c):
        return QYSeries(self.order, {k: c * v for k, v in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, QYSeries):
            return self.scale(other)
        return series_mul(self, other)

    __rmul__ = __mul__

    def __pow__(self, e: int):
        return product_pow([(self, e)])

    def __eq__(self, other):
        if isinstance(other, QYSeries):
            return self.order == other.order and self.terms == other.terms
        return self == QYSeries.const(self.order, other)

    def __hash__(self):
        return hash((self.order, frozenset(self.terms.items())))

    def is_zero(self):
        return not self.terms

    def coeff(self, qexp, yexp=0):
        return self.terms.get((qexp, yexp), 0)

    def q_coeff(self, qexp) -> dict:
        """The Laurent polynomial in y multiplying q^qexp, as {yexp: coeff}."""
        return {b: c for (a, b), c in self.terms.items() if a == qexp}

    def constant_term(self):
        return self.terms.get((0, 0), 0)

    def substitute_y(self, value):
        """Evaluate y at a nonzero exact scalar; returns a series without y."""
        out = {}
        for (a, b), c in self.terms.items():
            yv = value ** b if b >= 0 else inverse(value) ** (-b)
            out[(a, 0)] = out.get((a, 0), 0) + c * yv
        return QYSeries(self.order, out)

    def shift_y(self, k: int):
        return QYSeries(self.order, {(a, b + k): c for (a, b), c in self.terms.items()})

    def truncate(self, order):
        return QYSeries(order, {k: c for k, c in self.terms.items() if k[0] <= order})

    def items(self):
        return sorted(self.terms.items())

    def render(self) -> list:
        return [f"{format_scalar(c)} * q^{a} * y^{b}" for (a, b), c in self.items()]

    def __repr__(self):
        body = " + ".join(self.render()) or "0"
        return f"QYSeries(N={self.order}: {body})"


def series_mul(a: QYSeries, b: QYSeries) -> QYSeries:
    if a.order != b.order:
        raise SeriesError(f"mismatched truncation orders {a.order} and {b.order}")
    n = a.order
    out: dict = {}
    for (qa, ya), ca in a.terms.items():
        for (qb, yb), cb in b.terms.items():
            qq = qa + qb
            if qq > n:
                continue
            key = (qq, ya + yb)
            out[key] = out.get(key, 0) + ca * cb
    return QYSeries(n, out)


def series_invert(a: QYSeries) -> QYSeries:
    """Inverse of a series whose q^0 part is a nonzero constant (no y)."""
    n = a.order
    c0 = a.q_coeff(0)
    if set(c0) != {0}:
        raise SeriesError("constant term is not a unit (must be a nonzero y-free scalar)")
    inv0 = inverse(c0[0])
    # rest = a - c0; a = c0 (1 + u), u has positive q-order
    u = a.scale(inv0) - QYSeries.const(n, 1)
    result = QYSeries.const(n, 1)
    power = QYSeries.const(n, 1)
    for _ in range(n):
        power = series_mul(power, -u)
        if power.is_zero():
            break
        result = result + power
    return result.scale(inv0)


def product_pow(factors) -> QYSeries:
    """Truncated product of ``base ** exponent`` over (base, exponent) pairs."""
    factors = list(factors)
    if not factors:
        raise SeriesError("product_pow needs at least one factor to fix the order")
    n = factors[0][0].order
    result = QYSeries.const(n, 1)
    for base, e in factors:
        if base.order != n:
            raise SeriesError("mismatched truncation orders")
        if e < 0:
            base = series_invert(base)
            e = -e
        # binary powering
        acc = base
        while e:
            if e & 1:
                result = series_mul(result, acc)
            e >>= 1
            if e:
                acc = series_mul(acc, acc)
    return result


def q_series(order, coeffs) -> QYSeries:
    return QYSeries.from_poly(order, coeffs, "q")


def one_minus_q_power(order, n, c=1, yexp=0) -> QYSeries:
    """1 - c q^n y^yexp."""
    return QYSeries(order, {(0, 0): 1}) - QYSeries.monomial(order, n, yexp, c)
