"""Brute-force oracle for chiral characters on CP^n.

Each Chern-root factor is expanded directly as a bivariate series in the root
class x and in q (no logarithms, no power sums), the product is truncated and
the coefficient of x^n is read off.  The variable y is set to a number.
"""
from fractions import Fraction
from math import factorial


class XQ:
    def __init__(self, n, N, terms=None):
        self.n, self.N = n, N
        self.t = {k: v for k, v in (terms or {}).items() if v and k[0] <= n and k[1] <= N}

    def __mul__(self, o):
        out = {}
        for (i, k), a in self.t.items():
            for (j, l), b in o.t.items():
                if i + j <= self.n and k + l <= self.N:
                    out[(i + j, k + l)] = out.get((i + j, k + l), 0) + a * b
        return XQ(self.n, self.N, out)

    def __add__(self, o):
        out = dict(self.t)
        for k, v in o.t.items():
            out[k] = out.get(k, 0) + v
        return XQ(self.n, self.N, out)

    def scale(self, c):
        return XQ(self.n, self.N, {k: v * c for k, v in self.t.items()})

    def inverse(self):
        c0 = Fraction(self.t.get((0, 0), 0))
        if not c0:
            raise ZeroDivisionError("non-unit series")
        rest = XQ(self.n, self.N, {k: -v / c0 for k, v in self.t.items() if k != (0, 0)})
        out = XQ(self.n, self.N, {(0, 0): 1})
        power = XQ(self.n, self.N, {(0, 0): 1})
        for _ in range(self.n + self.N + 1):
            power = power * rest
            out = out + power
        return out.scale(1 / c0)


def one(n, N):
    return XQ(n, N, {(0, 0): 1})


def exp_term(n, N, a, qpow=0):
    """e^{a x} q^qpow."""
    return XQ(n, N, {(i, qpow): Fraction(a) ** i / factorial(i) for i in range(n + 1)})


def todd_factor(n, N, a):
    if a == 0:
        return one(n, N)
    # (1 - e^{-ax}) / (ax) = sum_i (-ax)^i / (i+1)!
    g = XQ(n, N, {(i, 0): Fraction((-a) ** i, factorial(i + 1)) for i in range(n + 1)})
    return g.inverse()


def _one_minus_exp_over_x(n, N, a):
    # (1 - e^{-ax}) / x
    return XQ(n, N, {(i, 0): Fraction(-(-a) ** (i + 1), factorial(i + 1)) for i in range(n + 1)})


def character(n, tm_lines, e_lines, N, yv=1):
    """Integral over CP^n of Td(TM) ch(Sym, Lambda factors); lines are (a, +-1) for +-O(a).

    At y = 1 each E line contributes one factor of x, which is divided out so that
    virtual bundles become ratios of units; the degree read off shifts to match.
    """
    yv = Fraction(yv)
    shift = sum(s for _, s in e_lines) if yv == 1 else 0
    target = n - shift
    if target < 0:
        return [0] * (N + 1)
    m = max(n, target)
    acc = one(m, N)
    for a, s in tm_lines:
        f = todd_factor(m, N, a)
        for k in range(1, N + 1):
            f = f * (one(m, N) + exp_term(m, N, a, k).scale(-1)).inverse()
            f = f * (one(m, N) + exp_term(m, N, -a, k).scale(-1)).inverse()
        acc = acc * (f if s > 0 else f.inverse())
    for a, s in e_lines:
        if yv == 1:
            f = _one_minus_exp_over_x(m, N, a)
        else:
            f = one(m, N) + exp_term(m, N, -a).scale(-yv)
        for k in range(1, N + 1):
            f = f * (one(m, N) + exp_term(m, N, -a, k).scale(-yv))
            f = f * (one(m, N) + exp_term(m, N, a, k).scale(-1 / yv))
        acc = acc * (f if s > 0 else f.inverse())
    return [acc.t.get((target, k), 0) for k in range(N + 1)]


def lines(spec):
    """[(a, signed count)] -> [(a, +-1), ...]."""
    out = []
    for a, c in spec:
        out.extend([(a, 1 if c > 0 else -1)] * abs(c))
    return out


def cp_tangent(n):
    return lines([(1, n + 1), (0, -1)])
