"""Canonical rational-function arithmetic over the parameters.

Parameter-only coefficients (rational functions of declared parameters)
tend to accumulate unreduced factors during elimination.  This module
normalizes them to gcd-reduced numerator/denominator form.  Polynomials are
sparse dicts exponent-tuple -> integer; the gcd is the classical primitive
polynomial-remainder-sequence algorithm, adequate for the low-degree
parameter polynomials that occur here.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd as igcd

from .expr import (
    Expr,
    Num,
    Pow,
    PowSym,
    Sum,
    Var,
    nf,
    rebuild,
    tmap_of,
)
from .symbols import Kind

Poly = dict  # tuple[int, ...] -> int


# ---------------------------------------------------------------------------
# Sparse integer polynomial helpers
# ---------------------------------------------------------------------------


def padd(a: Poly, b: Poly) -> Poly:
    out = dict(a)
    for m, c in b.items():
        nc = out.get(m, 0) + c
        if nc:
            out[m] = nc
        else:
            out.pop(m, None)
    return out


def pmul(a: Poly, b: Poly) -> Poly:
    out: Poly = {}
    for m1, c1 in a.items():
        for m2, c2 in b.items():
            m = tuple(x + y for x, y in zip(m1, m2))
            nc = out.get(m, 0) + c1 * c2
            if nc:
                out[m] = nc
            else:
                out.pop(m, None)
    return out


def pscale(a: Poly, c: int) -> Poly:
    if c == 0:
        return {}
    return {m: v * c for m, v in a.items()}


def pconst(c: int, n: int) -> Poly:
    return {(0,) * n: c} if c else {}


def content(a: Poly) -> int:
    g = 0
    for c in a.values():
        g = igcd(g, abs(c))
    return g or 1


def _lead_mono(a: Poly):
    return max(a)


def ppos(a: Poly) -> Poly:
    """Primitive, positive-leading-coefficient version of a."""
    if not a:
        return a
    c = content(a)
    if a[_lead_mono(a)] < 0:
        c = -c
    return {m: v // c for m, v in a.items()}


def degree_in(a: Poly, v: int) -> int:
    return max((m[v] for m in a), default=0)


def _by_main(a: Poly, v: int):
    """View a as univariate in variable v: deg -> coefficient poly."""
    out: dict[int, Poly] = {}
    for m, c in a.items():
        key = m[v]
        rest = m[:v] + (0,) + m[v + 1:]
        cur = out.setdefault(key, {})
        cur[rest] = cur.get(rest, 0) + c
    return {k: {m: c for m, c in p.items() if c} for k, p in out.items()}


def _from_main(parts: dict, v: int) -> Poly:
    out: Poly = {}
    for k, p in parts.items():
        for m, c in p.items():
            mm = m[:v] + (k,) + m[v + 1:]
            out[mm] = out.get(mm, 0) + c
    return {m: c for m, c in out.items() if c}


def _shift_main(a: Poly, v: int, k: int) -> Poly:
    return {m[:v] + (m[v] + k,) + m[v + 1:]: c for m, c in a.items()}


def pseudo_rem(a: Poly, b: Poly, v: int) -> Poly:
    """Pseudo-remainder of a by b w.r.t. main variable v."""
    da, db = degree_in(a, v), degree_in(b, v)
    bb = _by_main(b, v)
    lb = bb[db]
    r = a
    while r and degree_in(r, v) >= db:
        dr = degree_in(r, v)
        rr = _by_main(r, v)
        lr = rr[dr]
        r = padd(pmul(r, lb), pscale(_shift_main(pmul(lr, b), v, dr - db), -1))
    return r


def pgcd(a: Poly, b: Poly) -> Poly:
    if not a:
        return ppos(b)
    if not b:
        return ppos(a)
    n = len(next(iter(a)))
    main = None
    for v in range(n):
        if degree_in(a, v) or degree_in(b, v):
            if degree_in(a, v) and degree_in(b, v):
                main = v
                break
    if main is None:
        # no shared variable: gcd is the gcd of all coefficients times any
        # shared monomial structure (none here)
        return pconst(igcd(content(a), content(b)), n)
    ca, pa = _cont_pp(a, main)
    cb, pb = _cont_pp(b, main)
    cg = pgcd(ca, cb)
    # primitive PRS
    while pb:
        r = pseudo_rem(pa, pb, main)
        pa, pb = pb, _pp_main(r, main)
    return ppos(pmul(cg, pa))


def _cont_pp(a: Poly, v: int):
    parts = _by_main(a, v)
    cont: Poly = {}
    for p in parts.values():
        cont = pgcd(cont, p)
    pp = pdiv_exact(a, cont)
    return cont, pp


def _pp_main(a: Poly, v: int) -> Poly:
    if not a:
        return a
    cont, pp = _cont_pp(a, v)
    return pp


def pdiv_exact(a: Poly, b: Poly):
    """Exact division a / b (raises if not exact)."""
    if not a:
        return {}
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    n = len(next(iter(a)))
    if b == pconst(b.get((0,) * n, 0), n):
        c = b[(0,) * n]
        return {m: v // c for m, v in a.items()}
    q: Poly = {}
    r = dict(a)
    lb = _lead_mono(b)
    cb = b[lb]
    guard = 0
    while r:
        guard += 1
        if guard > 10000:
            raise ArithmeticError("non-terminating exact division")
        lr = _lead_mono(r)
        mono = tuple(x - y for x, y in zip(lr, lb))
        if any(e < 0 for e in mono) or r[lr] % cb:
            raise ArithmeticError("inexact polynomial division")
        c = r[lr] // cb
        q[mono] = q.get(mono, 0) + c
        r = padd(r, pscale(pmul({mono: c}, b), -1))
    return q


# ---------------------------------------------------------------------------
# Expression-level normalization
# ---------------------------------------------------------------------------


def _is_param_atomic(e: Expr, allowed=None) -> bool:
    from .expr import atoms

    for a in atoms(e):
        if not isinstance(a, Var):
            return False
        if allowed is not None:
            if a.sym not in allowed:
                return False
        elif a.sym.kind not in (Kind.PARAMETER, Kind.CONSTANT):
            return False
    return True


def _poly_of(e: Expr, params) -> Poly:
    """Convert a param-polynomial expression (no denominators) to a sparse
    integer poly together with a rational scale; returns (poly, scale)."""
    t = tmap_of(nf(e))
    idx = {s: i for i, s in enumerate(params)}
    n = len(params)
    terms = {}
    denom_lcm = 1
    for mono, c in t.items():
        exps = [0] * n
        for g, k in mono:
            if not isinstance(g, Var) or g.sym not in idx or k < 0:
                raise ArithmeticError("not a parameter polynomial")
            exps[idx[g.sym]] = k
        terms[tuple(exps)] = c
        denom_lcm = denom_lcm * c.denominator // igcd(denom_lcm, c.denominator)
    out = {m: int(c * denom_lcm) for m, c in terms.items()}
    return out, Fraction(1, denom_lcm)


def _expr_of(p: Poly, scale: Fraction, params) -> Expr:
    from .expr import TMap

    t: dict = {}
    for m, c in p.items():
        slots = []
        for i, k in enumerate(m):
            if k:
                slots.append((Var(params[i]), k))
        t[tuple(sorted(slots, key=lambda s: s[0].skey()))] = Fraction(c) * scale
    return rebuild(t)


def reduce_param_fraction(num: Expr, den: Expr, params) -> tuple:
    """gcd-reduce a parameter fraction; returns (num', den') exprs."""
    pn, sn = _poly_of(num, params)
    pd, sd = _poly_of(den, params)
    if not pn:
        return Num(0), Num(1)
    g = pgcd(pn, pd)
    pn = pdiv_exact(pn, g)
    pd = pdiv_exact(pd, g)
    cn = content(pn)
    if pn[_lead_mono(pn)] < 0:
        cn = -cn
    cd = content(pd)
    if pd[_lead_mono(pd)] < 0:
        cd = -cd
    c = Fraction(cn, cd) * sn / sd
    pn = {m: v // cn for m, v in pn.items()}
    pd = {m: v // cd for m, v in pd.items()}
    return _expr_of(pn, c, params), _expr_of(pd, Fraction(1), params)


def ratsimp(e: Expr, params=None) -> Expr:
    """Normalize every parameter-rational coefficient of e to reduced form.

    Terms are grouped by their non-parameter monomial part; each group's
    parameter coefficient is rewritten over a common denominator and
    gcd-reduced.
    """
    e = nf(e)
    if params is None:
        from .expr import atoms

        params = sorted(
            {a.sym for a in atoms(e)
             if isinstance(a, Var) and a.sym.kind is Kind.PARAMETER},
            key=lambda s: s.sort_key(),
        )
    if not params:
        return e
    params = list(params)
    allowed = set(params)
    t = tmap_of(e)
    groups: dict = {}
    for mono, c in t.items():
        par, rest = [], []
        for g, k in mono:
            if isinstance(g, Var) and g.sym in allowed:
                par.append((g, k))
            elif (isinstance(g, Sum) and k < 0 and _is_param_atomic(g, allowed)):
                par.append((g, k))
            else:
                rest.append((g, k))
        groups.setdefault(tuple(sorted(rest, key=lambda s: s[0].skey())), []).append(
            (tuple(par), c)
        )
    out: dict = {}
    for rest, entries in groups.items():
        num, den = _combine(entries, params)
        if isinstance(num, Num) and num.q == 0:
            continue
        for m2, c2 in tmap_of(num).items():
            slots = list(rest) + list(m2)
            if not (isinstance(den, Num) and den.q == 1):
                dt = tmap_of(den)
                if len(dt) == 1:
                    ((dm, dc),) = dt.items()
                    c2 = c2 / dc
                    slots += [(g, -k) for g, k in dm]
                else:
                    slots.append((den, -1))
            key = tuple(sorted(slots, key=lambda s: s[0].skey()))
            out[key] = out.get(key, 0) + c2
    return rebuild({m: c for m, c in out.items() if c})


def _combine(entries, params):
    """Combine (param-mono, coefficient) terms into one reduced fraction."""
    num_total = Num(0)
    den_total = Num(1)
    for par, c in entries:
        tn: dict = {(): Fraction(c)}
        td: dict = {(): Fraction(1)}
        for g, k in par:
            if k > 0:
                tn = _mulslot(tn, g, k)
            else:
                td = _mulslot(td, g, -k)
        n_e = rebuild(tn)
        d_e = rebuild(td)
        # num_total/den_total + n_e/d_e
        num_total = nf(num_total * d_e + n_e * den_total)
        den_total = nf(den_total * d_e)
    try:
        return reduce_param_fraction(num_total, den_total, params)
    except ArithmeticError:
        return num_total, den_total


def _mulslot(t, g, k):
    from .expr import tmap_mul, tmap_pow, tmap_of

    return tmap_mul(t, tmap_pow(tmap_of(g), k))
