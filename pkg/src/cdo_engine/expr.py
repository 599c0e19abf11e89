"""Parser for polynomial forms and vector fields typed as text.

Grammar: identifiers b1..bn (plus chart aliases such as z1, zb1, x1, e1),
integer and rational literals, ``i`` for the imaginary unit, the operators
``+ - * / ^``, ``d(expr)`` for the exterior derivative and ``expr@j`` for the
component of d_j in a vector field.  Parsing goes through Python's ``ast``
module with a whitelist of node types, so nothing is ever executed.
"""
from __future__ import annotations

import ast
from fractions import Fraction

from .scalars import GaussianRational, gauss
from .superpoly import (ChartSignature, MatrixForm, SuperForm, SuperVectorField,
                        exterior_d)

GREEK = {"ζ": "zetab", "ε": "e"}


class ExprError(ValueError):
    def __init__(self, message: str, text: str = "", column: int | None = None):
        self.text = text
        self.column = column
        where = f" at column {column + 1}" if column is not None else ""
        super().__init__(f"{message}{where} in {text!r}")


class _Field:
    def __init__(self, comps):
        self.comps = comps


def _is_scalar(v):
    return isinstance(v, (Fraction, GaussianRational))


class _Evaluator:
    def __init__(self, sig: ChartSignature, aliases: dict, text: str, cols=None):
        self.sig = sig
        self.aliases = aliases
        self.text = text
        self.cols = cols

    def fail(self, msg, node):
        col = getattr(node, "col_offset", None)
        if col is not None and self.cols:
            col = self.cols[min(col, len(self.cols) - 1)]
        raise ExprError(msg, self.text, col)

    def form(self, v, node):
        if isinstance(v, _Field):
            self.fail("vector field where a form was expected", node)
        return v if isinstance(v, SuperForm) else self.sig.const(v)

    def visit(self, node):
        if isinstance(node, ast.Expression):
            return self.visit(node.body)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, int):
                self.fail("only integer literals are allowed", node)
            return Fraction(node.value)
        if isinstance(node, ast.Name):
            name = node.id
            if name == "i":
                return gauss(0, 1)
            for g, latin in GREEK.items():
                name = name.replace(g, latin)
            if name in self.aliases:
                return self.sig.coord(self.aliases[name])
            if name.startswith("b") and name[1:].isdigit():
                k = int(name[1:])
                if 1 <= k <= self.sig.n:
                    return self.sig.coord(k - 1)
            self.fail(f"unknown identifier {node.id!r}", node)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = self.visit(node.operand)
            if isinstance(node.op, ast.UAdd):
                return v
            return _Field([-c for c in v.comps]) if isinstance(v, _Field) else -v
        if isinstance(node, ast.Call):
            if not (isinstance(node.func, ast.Name) and node.func.id == "d") or node.keywords \
                    or len(node.args) != 1:
                self.fail("only d(expr) calls are allowed", node)
            return exterior_d(self.form(self.visit(node.args[0]), node))
        if isinstance(node, ast.BinOp):
            return self.binop(node)
        self.fail(f"unsupported syntax {type(node).__name__}", node)

    def binop(self, node):
        op = node.op
        if isinstance(op, ast.MatMult):
            coeff = self.visit(node.left)
            if not (isinstance(node.right, ast.Constant) and isinstance(node.right.value, int)):
                self.fail("@ must be followed by a coordinate number", node.right)
            j = node.right.value
            if not 1 <= j <= self.sig.n:
                self.fail(f"coordinate @{j} out of range", node.right)
            comps = [self.sig.zero() for _ in range(self.sig.n)]
            comps[j - 1] = self.form(coeff, node.left)
            return _Field(comps)
        a, b = self.visit(node.left), self.visit(node.right)
        if isinstance(op, ast.Pow):
            if not (isinstance(b, Fraction) and b.denominator == 1 and b >= 0):
                self.fail("exponents must be non-negative integers", node.right)
            if isinstance(a, _Field):
                self.fail("cannot raise a vector field to a power", node)
            if isinstance(a, SuperForm):
                return a ** int(b)
            out = Fraction(1)
            for _ in range(int(b)):
                out = out * a
            return out
        if isinstance(op, ast.Div):
            if not (_is_scalar(a) and _is_scalar(b)):
                self.fail("division is only allowed between numbers", node)
            if not b:
                self.fail("division by zero", node)
            return a / b
        if isinstance(op, (ast.Add, ast.Sub)):
            sign = 1 if isinstance(op, ast.Add) else -1
            if isinstance(a, _Field) or isinstance(b, _Field):
                if not (isinstance(a, _Field) and isinstance(b, _Field)):
                    self.fail("cannot add a vector field and a form", node)
                return _Field([x + y * sign for x, y in zip(a.comps, b.comps)])
            if _is_scalar(a) and _is_scalar(b):
                return a + b * sign
            return self.form(a, node) + self.form(b, node) * sign
        if isinstance(op, ast.Mult):
            if isinstance(b, _Field):
                if isinstance(a, _Field):
                    self.fail("cannot multiply two vector fields", node)
                f = self.form(a, node)
                return _Field([f * c for c in b.comps])
            if isinstance(a, _Field):
                if not _is_scalar(b):
                    self.fail("put function coefficients to the left of a field", node)
                return _Field([c * b for c in a.comps])
            if _is_scalar(a) and _is_scalar(b):
                return a * b
            return self.form(a, node) * self.form(b, node)
        self.fail(f"unsupported operator {type(op).__name__}", node)


def _parse(text: str, sig: ChartSignature, aliases=None):
    src = str(text).strip()
    if not src:
        raise ExprError("empty expression", src, 0)
    # '^' becomes '**'; keep a map from rewritten columns back to the source
    rewritten, cols = [], []
    for k, ch in enumerate(src):
        rewritten.append("**" if ch == "^" else ch)
        cols.extend([k, k] if ch == "^" else [k])
    cols.append(len(src))
    try:
        tree = ast.parse("".join(rewritten), mode="eval")
    except SyntaxError as exc:
        col = cols[min(max((exc.offset or 1) - 1, 0), len(cols) - 1)]
        raise ExprError(f"syntax error: {exc.msg}", src, col) from None
    return _Evaluator(sig, aliases or {}, src, cols).visit(tree)


def parse_form(text, sig: ChartSignature, aliases=None) -> SuperForm:
    """Parse a function or differential form."""
    if isinstance(text, int):
        return sig.const(text)
    v = _parse(text, sig, aliases)
    if isinstance(v, _Field):
        raise ExprError("expected a form, got a vector field", str(text))
    return v if isinstance(v, SuperForm) else sig.const(v)


def parse_field(text, sig: ChartSignature, aliases=None) -> SuperVectorField:
    """Parse ``coeff@j + ...`` into a vector field; ``0`` is the zero field."""
    v = _parse(text, sig, aliases)
    if isinstance(v, _Field):
        return SuperVectorField(sig, v.comps)
    if _is_scalar(v) and not v:
        return SuperVectorField(sig, [sig.zero()] * sig.n)
    raise ExprError("expected a vector field written with @j", str(text))


def parse_matrix(rows, sig: ChartSignature, aliases=None, n: int | None = None):
    """List of rows of expressions; returns a list of lists of forms."""
    n = n if n is not None else sig.n
    if not isinstance(rows, list) or len(rows) != n or any(
            not isinstance(r, list) or len(r) != n for r in rows):
        raise ExprError(f"expected a {n}x{n} list of expressions", str(rows))
    return [[parse_form(e, sig, aliases) for e in row] for row in rows]


def parse_matrix_form(rows, sig: ChartSignature, aliases=None) -> MatrixForm:
    return MatrixForm(sig, parse_matrix(rows, sig, aliases))
