"""Sparse arithmetic in bigraded supercommutative algebras.

A monomial is a sorted tuple of generator keys; bosonic generators may repeat.
Every generator has a grade code ``g = degree_bit | (parity_bit << 1)``. Two
generators commute up to the sign (-1)^(d1*d2 + p1*p2) (Deligne rule), so a
generator is nilpotent exactly when its code is 1 or 2.
"""
from __future__ import annotations

# SWAP[g1][g2] = 1 when swapping generators of codes g1, g2 costs a minus sign
SWAP = tuple(tuple(((a & b) & 1) ^ ((a & b) >> 1) for b in range(4)) for a in range(4))
NILPOTENT = (False, True, True, False)


def mono_mul(a: tuple, b: tuple, grade):
    """Return (sign, monomial) for a*b, or (0, None) when the product vanishes."""
    if not a:
        return 1, b
    if not b:
        return 1, a
    if a[-1] < b[0]:
        return 1, a + b
    parity = 0
    aset = None
    for y in b:
        gy = grade[y]
        for x in reversed(a):
            if x < y:
                break
            if x == y:
                if NILPOTENT[gy]:
                    return 0, None
                break
            if gy:
                parity ^= SWAP[grade[x]][gy]
    merged = tuple(sorted(a + b))
    return (-1 if parity else 1), merged


def mono_grade(m: tuple, grade) -> int:
    g = 0
    for x in m:
        g ^= grade[x]
    return g


def poly_add(p: dict, q: dict, scale=1) -> dict:
    out = dict(p)
    for k, c in q.items():
        v = out.get(k, 0) + scale * c
        if v:
            out[k] = v
        else:
            out.pop(k, None)
    return out


def poly_mul(p: dict, q: dict, grade) -> dict:
    out: dict = {}
    for ma, ca in p.items():
        for mb, cb in q.items():
            s, m = mono_mul(ma, mb, grade)
            if s:
                v = out.get(m, 0) + (ca * cb if s > 0 else -(ca * cb))
                if v:
                    out[m] = v
                else:
                    del out[m]
    return out


def poly_scale(p: dict, c) -> dict:
    if not c:
        return {}
    return {m: c * v for m, v in p.items()}


def left_partial(p: dict, var, grade) -> dict:
    """Left super-derivative with respect to a single generator."""
    gv = grade[var]
    out: dict = {}
    for m, c in p.items():
        if var not in m:
            continue
        parity = 0
        for j, x in enumerate(m):
            if x == var:
                nm = m[:j] + m[j + 1:]
                v = out.get(nm, 0) + (-c if parity else c)
                if v:
                    out[nm] = v
                else:
                    del out[nm]
            parity ^= SWAP[gv][grade[x]]
    return out


def apply_derivation(p: dict, gcode: int, action, grade) -> dict:
    """Apply the left derivation of grade ``gcode`` fixed by ``action(gen) -> dict``."""
    out: dict = {}
    cache: dict = {}
    for m, c in p.items():
        parity = 0
        for j, x in enumerate(m):
            img = cache.get(x)
            if img is None:
                img = action(x) or {}
                cache[x] = img
            if img:
                pre = m[:j]
                post = m[j + 1:]
                for mi, ci in img.items():
                    s1, t = mono_mul(pre, mi, grade)
                    if not s1:
                        continue
                    s2, t = mono_mul(t, post, grade)
                    if not s2:
                        continue
                    coef = c * ci
                    if (s1 * s2 < 0) != bool(parity):
                        coef = -coef
                    v = out.get(t, 0) + coef
                    if v:
                        out[t] = v
                    else:
                        del out[t]
            parity ^= SWAP[gcode][grade[x]]
    return out


def split_by_grade(p: dict, grade) -> dict:
    parts: dict = {}
    for m, c in p.items():
        parts.setdefault(mono_grade(m, grade), {})[m] = c
    return parts
