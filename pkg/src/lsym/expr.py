"""Exact-arithmetic expression kernel.

Expressions are immutable trees over rational constants, declared symbols,
jet variables, opaque function applications, elementary heads (sin, cos,
log, exp), symbolic-exponent powers and antiderivatives.  Every arithmetic
operation returns a canonical normal form: a flat sum of terms, each term a
rational coefficient times a sorted monomial of generators with integer
exponents.  The zero test is exact for polynomials in jet variables and
opaque applications with rational-function coefficients in base variables
and parameters.

Simplification rules carried by the kernel, and nothing more:
  * sums/products flattened, sorted, folded; integer powers of sums expanded;
  * powers with a common base combine additively in the exponent;
  * constants declared with a ``square`` rewrite have even powers reduced;
  * sin(w)^2 + cos(w)^2 -> 1 between matching terms;
  * d/dv Int(g, v) = g is known to the calculus layer, not rewritten here.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Iterator, Optional, Union

from .symbols import Kind, Symbol

Q = Fraction

FN_NAMES = ("sin", "cos", "log", "exp")


class ExprError(ValueError):
    pass


def _q(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise ExprError(f"not a rational: {x!r}")


class Expr:
    """Base class; all subclasses are immutable and hashable."""

    __slots__ = ("_h", "_skey", "_canon")

    def _init_cache(self):
        object.__setattr__(self, "_h", None)
        object.__setattr__(self, "_skey", None)
        object.__setattr__(self, "_canon", False)

    def __hash__(self):
        h = self._h
        if h is None:
            h = self._hash()
            object.__setattr__(self, "_h", h)
        return h

    def skey(self) -> str:
        k = self._skey
        if k is None:
            k = self._skey_build()
            object.__setattr__(self, "_skey", k)
        return k

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other):
            return False
        return hash(self) == hash(other) and self._fields() == other._fields()

    def __ne__(self, other):
        return not self.__eq__(other)

    # -- arithmetic sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, mul(MINUS_ONE, as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), mul(MINUS_ONE, self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return mul(MINUS_ONE, self)

    def __pow__(self, other):
        if isinstance(other, int):
            return pow_int(self, other)
        return pow_sym(self, as_expr(other))

    def __str__(self):
        from .printer import to_text

        return to_text(self)

    def __repr__(self):
        return f"<{self.__class__.__name__} {self}>"


class Num(Expr):
    __slots__ = ("q",)

    def __init__(self, q):
        object.__setattr__(self, "q", _q(q))
        self._init_cache()
        object.__setattr__(self, "_canon", True)

    def _fields(self):
        return (self.q,)

    def _hash(self):
        return hash(("Num", self.q))

    def _skey_build(self):
        return f"7({self.q})"


class Var(Expr):
    __slots__ = ("sym",)

    def __init__(self, sym: Symbol):
        if sym.kind is Kind.DEPENDENT:
            raise ExprError(f"dependent '{sym.name}' must be a jet variable")
        object.__setattr__(self, "sym", sym)
        self._init_cache()
        object.__setattr__(self, "_canon", True)

    def _fields(self):
        return (self.sym,)

    def _hash(self):
        return hash(("Var", self.sym))

    def _skey_build(self):
        r, i, n = self.sym.sort_key()
        return f"6({r:02d}.{i:06d}.{n})"


class Jet(Expr):
    """Derivative coordinate u^alpha_J; zero multi-index is the dependent."""

    __slots__ = ("dep", "orders")

    def __init__(self, dep: Symbol, orders=()):
        if dep.kind is not Kind.DEPENDENT:
            raise ExprError(f"jet of non-dependent '{dep.name}'")
        items = []
        for sym, k in sorted(dict(orders).items(), key=lambda p: p[0].sort_key()):
            if k < 0:
                raise ExprError("negative derivative order")
            if k:
                if sym.kind is not Kind.INDEPENDENT:
                    raise ExprError(f"jet direction '{sym.name}' is not independent")
                items.append((sym, k))
        object.__setattr__(self, "dep", dep)
        object.__setattr__(self, "orders", tuple(items))
        self._init_cache()
        object.__setattr__(self, "_canon", True)

    @property
    def order(self) -> int:
        return sum(k for _, k in self.orders)

    def bump(self, x: Symbol) -> "Jet":
        d = dict(self.orders)
        d[x] = d.get(x, 0) + 1
        return Jet(self.dep, d)

    def order_in(self, x: Symbol) -> int:
        return dict(self.orders).get(x, 0)

    def contains_index(self, other: "Jet") -> bool:
        """True if self's multi-index dominates other's (same dependent)."""
        if self.dep is not other.dep:
            return False
        mine = dict(self.orders)
        return all(mine.get(s, 0) >= k for s, k in other.orders)

    def index_minus(self, other: "Jet"):
        mine = dict(self.orders)
        for s, k in other.orders:
            mine[s] = mine.get(s, 0) - k
        return [(s, k) for s, k in mine.items() if k]

    def _fields(self):
        return (self.dep, self.orders)

    def _hash(self):
        return hash(("Jet", self.dep, self.orders))

    def _skey_build(self):
        r, i, n = self.dep.sort_key()
        parts = ".".join(f"{s.name}^{k}" for s, k in self.orders)
        return f"0({i:06d}.{n}|{self.order:03d}|{parts})"


class FunApp(Expr):
    """Application of a declared opaque head, with a derivative multi-index.

    ``dorders[i]`` is the number of derivatives taken in the head's i-th
    argument slot.  Arguments are restricted to plain variables (or zero
    jets), so the chain rule through an application is trivial.
    """

    __slots__ = ("head", "dorders", "args")

    def __init__(self, head: Symbol, dorders, args):
        if head.kind not in (Kind.FUNCTION, Kind.UNKNOWN_FUNCTION):
            raise ExprError(f"'{head.name}' is not a function head")
        args = tuple(args)
        dorders = tuple(int(k) for k in dorders)
        if len(args) != head.arity or len(dorders) != head.arity:
            raise ExprError(
                f"arity mismatch for '{head.name}': expected {head.arity} arguments"
            )
        for a in args:
            if not (isinstance(a, Var) or (isinstance(a, Jet) and a.order == 0)):
                raise ExprError(
                    f"opaque head '{head.name}' applied to a non-variable argument"
                )
        if any(k < 0 for k in dorders):
            raise ExprError("negative derivative order on application")
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "dorders", dorders)
        object.__setattr__(self, "args", args)
        self._init_cache()
        object.__setattr__(self, "_canon", True)

    def bump(self, pos: int) -> "FunApp":
        d = list(self.dorders)
        d[pos] += 1
        return FunApp(self.head, d, self.args)

    def _fields(self):
        return (self.head, self.dorders, self.args)

    def _hash(self):
        return hash(("FunApp", self.head, self.dorders, self.args))

    def _skey_build(self):
        r, i, n = self.head.sort_key()
        total = sum(self.dorders)
        ds = ",".join(str(k) for k in self.dorders)
        argk = ",".join(a.skey() for a in self.args)
        return f"1({i:06d}.{n}|{total:03d}|{ds}|{argk})"


class Fn(Expr):
    """Elementary opaque head (sin, cos, log, exp) with one general argument."""

    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: Expr):
        if name not in FN_NAMES:
            raise ExprError(f"unknown elementary head '{name}'")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "arg", arg)
        self._init_cache()

    def _fields(self):
        return (self.name, self.arg)

    def _hash(self):
        return hash(("Fn", self.name, self.arg))

    def _skey_build(self):
        return f"2({self.name}|{self.arg.skey()})"


class Inte(Expr):
    """Antiderivative of ``integrand`` in ``var``, vanishing at the base point.

    The only rule it satisfies is d/dvar Inte(g, var) = g; the integrand may
    mention the integration variable freely (it is bound), plus parameters
    and constants.
    """

    __slots__ = ("integrand", "var")

    def __init__(self, integrand: Expr, var: Symbol):
        if var.kind is not Kind.INDEPENDENT:
            raise ExprError("antiderivative variable must be independent")
        object.__setattr__(self, "integrand", integrand)
        object.__setattr__(self, "var", var)
        self._init_cache()

    def _fields(self):
        return (self.integrand, self.var)

    def _hash(self):
        return hash(("Inte", self.integrand, self.var))

    def _skey_build(self):
        return f"3({self.var.name}|{self.integrand.skey()})"


class PowSym(Expr):
    """Power with a symbolic (non-integer, differentiation-constant) exponent."""

    __slots__ = ("base", "expo")

    def __init__(self, base: Expr, expo: Expr):
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "expo", expo)
        self._init_cache()

    def _fields(self):
        return (self.base, self.expo)

    def _hash(self):
        return hash(("PowSym", self.base, self.expo))

    def _skey_build(self):
        return f"4({self.base.skey()}|{self.expo.skey()})"


class Pow(Expr):
    """Integer power of a generator (canonical container, exponent != 0, 1)."""

    __slots__ = ("base", "k")

    def __init__(self, base: Expr, k: int):
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "k", int(k))
        self._init_cache()

    def _fields(self):
        return (self.base, self.k)

    def _hash(self):
        return hash(("Pow", self.base, self.k))

    def _skey_build(self):
        return f"8({self.base.skey()}|{self.k:+d})"


class Prod(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors):
        object.__setattr__(self, "factors", tuple(factors))
        self._init_cache()

    def _fields(self):
        return (self.factors,)

    def _hash(self):
        return hash(("Prod", self.factors))

    def _skey_build(self):
        return "9(" + "|".join(f.skey() for f in self.factors) + ")"


class Sum(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms):
        object.__setattr__(self, "terms", tuple(terms))
        self._init_cache()

    def _fields(self):
        return (self.terms,)

    def _hash(self):
        return hash(("Sum", self.terms))

    def _skey_build(self):
        return "5(" + "|".join(t.skey() for t in self.terms) + ")"


ZERO = Num(0)
ONE = Num(1)
MINUS_ONE = Num(-1)
HALF = Num(Q(1, 2))


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return Num(x)
    if isinstance(x, Symbol):
        return Jet(x) if x.kind is Kind.DEPENDENT else Var(x)
    raise ExprError(f"cannot coerce {x!r} to an expression")


def atom(sym: Symbol) -> Expr:
    return as_expr(sym)


# ---------------------------------------------------------------------------
# Term maps: the working representation behind normalization.
#
# A monomial is a sorted tuple of (generator, exponent) slots.  Generators
# are atoms (Var, Jet, FunApp, Fn, Inte), canonical sums (only with negative
# exponents: denominators) or PowSym nodes (always with slot exponent 1);
# exponents are nonzero ints.  A term map sends monomials to rational
# coefficients.
# ---------------------------------------------------------------------------

Mono = tuple
TMap = dict


def _slot_sort(slots: Iterable) -> Mono:
    return tuple(sorted(slots, key=lambda s: s[0].skey()))


def tmap_add(a: TMap, b: TMap) -> TMap:
    out = dict(a)
    for m, c in b.items():
        nc = out.get(m, 0) + c
        if nc:
            out[m] = nc
        else:
            out.pop(m, None)
    return out


def _scale(t: TMap, c: Fraction) -> TMap:
    if c == 0:
        return {}
    return {m: v * c for m, v in t.items()}


def _mono_mul(m1: Mono, c1: Fraction, m2: Mono, c2: Fraction) -> TMap:
    """Multiply two monomials, merging common bases; may fan out."""
    coef = c1 * c2
    if coef == 0:
        return {}
    merged: dict[str, list] = {}
    for gen, k in list(m1) + list(m2):
        if isinstance(gen, PowSym):
            base, e = gen.base, gen.expo
            if k != 1:
                e = mul(Num(k), e)
        else:
            base, e = gen, k
        bk = base.skey()
        if bk in merged:
            old = merged[bk][1]
            if isinstance(old, int) and isinstance(e, int):
                merged[bk][1] = old + e
            else:
                s = add(as_expr(old) if isinstance(old, int) else old,
                        as_expr(e) if isinstance(e, int) else e)
                if isinstance(s, Num) and s.q.denominator == 1:
                    s = int(s.q)
                merged[bk][1] = s
        else:
            merged[bk] = [base, e]
    return _finalize(list(merged.values()), coef)


def _finalize(pairs: list, coef: Fraction) -> TMap:
    """Turn (base, exponent) pairs into a TMap, applying expansion rules."""
    plain = []
    specials = []  # list of TMaps to multiply in
    for base, e in pairs:
        if isinstance(e, Expr):
            en = _ratsimp_exponent(nf(e))
            if isinstance(en, Num):
                if en.q == 0:
                    continue
                if en.q.denominator == 1:
                    e = int(en.q)
                else:
                    plain.append((PowSym(base, en), 1))
                    continue
            else:
                plain.append((PowSym(base, en), 1))
                continue
        if e == 0:
            continue
        if isinstance(base, Num):
            coef *= base.q ** e
            continue
        if isinstance(base, Sum) and e > 0:
            specials.append(tmap_pow(tmap_of(base), e))
            continue
        if (
            isinstance(base, Var)
            and base.sym.square is not None
            and (e >= 2 or e < 0)
        ):
            r = e % 2
            m = (e - r) // 2
            specials.append(tmap_pow(tmap_of(base.sym.square), m))
            if r:
                plain.append((base, 1))
            continue
        plain.append((base, e))
    out: TMap = {_slot_sort(plain): coef}
    for sp in specials:
        out = tmap_mul(out, sp)
    return out


def tmap_mul(a: TMap, b: TMap) -> TMap:
    if not a or not b:
        return {}
    if len(b) > 1:
        hit = _absorb(a, b)
        if hit is not None:
            return hit
    if len(a) > 1:
        hit = _absorb(b, a)
        if hit is not None:
            return hit
    out: TMap = {}
    for m1, c1 in a.items():
        for m2, c2 in b.items():
            for m, c in _mono_mul(m1, c1, m2, c2).items():
                nc = out.get(m, 0) + c
                if nc:
                    out[m] = nc
                else:
                    out.pop(m, None)
    return out


def _absorb(host: TMap, factor: TMap) -> Optional[TMap]:
    """Multiply host by a sum that occurs in host as a power base.

    Keeps (t+a)^s * (t+a) canonical as (t+a)^(s+1) instead of distributing;
    monomials not containing the base are multiplied out normally.
    """
    bases = {}
    for m in host:
        for g, _k in m:
            if isinstance(g, Sum):
                bases[g.skey()] = g
            elif isinstance(g, PowSym) and isinstance(g.base, Sum):
                bases[g.base.skey()] = g.base
    if not bases:
        return None
    S = None
    quotient: TMap = None
    fx = rebuild(factor)
    if isinstance(fx, Sum):
        S = bases.get(fx.skey())
        if S is not None:
            quotient = {(): Q(1)}
    if S is None:
        for cand in sorted(bases.values(), key=lambda g: g.skey()):
            q = _tmap_exact_div(factor, tmap_of(cand))
            if q is not None:
                S = cand
                quotient = q
                break
        if S is None:
            return None
    out: TMap = {}
    for m, c in host.items():
        has = any(
            (isinstance(g, Sum) and g == S)
            or (isinstance(g, PowSym) and g.base == S)
            for g, _k in m
        )
        if has:
            bumped = _mono_mul(m, c, ((S, 1),), Q(1))
            frag = tmap_mul(bumped, quotient)
        else:
            frag = _mul_mono_tmap(m, c, factor)
        for mm, cc in frag.items():
            nc = out.get(mm, 0) + cc
            if nc:
                out[mm] = nc
            else:
                out.pop(mm, None)
    return out


def _tmap_exact_div(a: TMap, b: TMap) -> Optional[TMap]:
    """Exact polynomial division of term maps over plain atom generators."""
    gens = {}
    for t in (a, b):
        for m in t:
            for g, k in m:
                if k < 0 or isinstance(g, (PowSym, Sum, Inte)):
                    return None
                gens[g.skey()] = g
    order = sorted(gens)
    idx = {k: i for i, k in enumerate(order)}
    glist = [gens[k] for k in order]

    def to_poly(t):
        lcm = 1
        for c in t.values():
            lcm = lcm * c.denominator // _gcd(lcm, c.denominator)
        p = {}
        for m, c in t.items():
            exps = [0] * len(order)
            for g, k in m:
                exps[idx[g.skey()]] = k
            p[tuple(exps)] = int(c * lcm)
        return p, lcm

    from .ratfunc import pdiv_exact

    pa, la = to_poly(a)
    pb, lb = to_poly(b)
    try:
        qp = pdiv_exact(pa, pb)
    except (ArithmeticError, ZeroDivisionError):
        return None
    scale = Q(lb, la)
    out: TMap = {}
    for m, c in qp.items():
        slots = tuple(
            (glist[i], k) for i, k in enumerate(m) if k
        )
        out[_slot_sort(slots)] = Q(c) * scale
    return out


def _gcd(a, b):
    from math import gcd

    return gcd(a, b)


def _mul_mono_tmap(m: Mono, c: Fraction, t: TMap) -> TMap:
    out: TMap = {}
    for m2, c2 in t.items():
        for mm, cc in _mono_mul(m, c, m2, c2).items():
            nc = out.get(mm, 0) + cc
            if nc:
                out[mm] = nc
            else:
                out.pop(mm, None)
    return out


def tmap_pow(t: TMap, k: int) -> TMap:
    if k == 0:
        return {(): Q(1)}
    if k == 1:
        return dict(t)
    if k > 1:
        half = tmap_pow(t, k // 2)
        out = tmap_mul(half, half)
        if k % 2:
            out = tmap_mul(out, t)
        return out
    # negative power
    if len(t) == 1:
        ((m, c),) = t.items()
        pairs = []
        for gen, e in m:
            if isinstance(gen, PowSym):
                pairs.append((gen.base, mul(Num(k), gen.expo)))
            else:
                pairs.append((gen, e * k))
        if c == 0:
            raise ExprError("division by zero")
        return _finalize(pairs, c ** k)
    # multi-term base raised to a negative power: clear inner denominators
    # and pull out rational content / common factors first, so denominators
    # stay flat polynomials
    cleared, extra = _clear_denominators(t)
    if extra:
        out = tmap_pow(cleared, k)
        for g, kk in extra:
            out = tmap_mul(out, _finalize([(g, -k * kk)], Q(1)))
        return out
    content, common, core = _content_split(t)
    if content != 1 or common:
        out = tmap_pow(core, k)
        pairs = [(g, e * k) for g, e in common]
        out = tmap_mul(out, _finalize(pairs, content ** k))
        return out
    root = _perfect_power_root(t)
    if root is not None:
        qt, n = root
        return tmap_pow(qt, n * k)
    base = rebuild(t)
    if isinstance(base, Num):
        if base.q == 0:
            raise ExprError("division by zero")
        return {(): base.q ** k}
    if not isinstance(base, Sum):
        return tmap_pow(tmap_of(base), k)
    return {((base, k),): Q(1)}


def _clear_denominators(t: TMap):
    """Multiply out negative powers of generators shared by a term map.

    Returns (cleared, extra) with t = cleared * prod(g^-k for g, k in extra).
    """
    need: dict[str, list] = {}
    for m in t:
        for g, k in m:
            if k < 0 and not isinstance(g, PowSym):
                cur = need.get(g.skey())
                if cur is None or -k > cur[1]:
                    need[g.skey()] = [g, -k]
    if not need:
        return t, []
    out = t
    extra = []
    for _, (g, k) in sorted(need.items()):
        for _ in range(k):
            out = tmap_mul(out, tmap_of(g))
        extra.append((g, k))
    return out, extra


def _perfect_power_root(t: TMap):
    """If the (primitive, integer) polynomial t is Q^n, return (Q, n).

    Keeps denominators like ((c/2)t + d)^(-2) canonical over the linear base
    instead of the expanded square.
    """
    gens = sorted(
        {g for m in t for g, _k in m}, key=lambda g: g.skey()
    )
    if not gens:
        return None
    idx = {g.skey(): i for i, g in enumerate(gens)}
    P = {}
    for m, c in t.items():
        if c.denominator != 1:
            return None
        exps = [0] * len(gens)
        for g, k in m:
            if k < 0 or isinstance(g, PowSym):
                return None
            exps[idx[g.skey()]] = k
        P[tuple(exps)] = int(c)
    lead = max(P)
    top = max((e for e in lead if e), default=0)
    if top < 2:
        return None
    for n in range(top, 1, -1):
        if any(e % n for e in lead):
            continue
        Q = _poly_root(P, n)
        if Q is not None:
            out: TMap = {}
            for m, c in Q.items():
                slots = tuple(
                    (gens[i], k) for i, k in enumerate(m) if k
                )
                out[_slot_sort(slots)] = Q_frac(c)
            return out, n
    return None


def Q_frac(c):
    return Q(c)


def _ipow_root(c: int, n: int):
    if c < 0 and n % 2 == 0:
        return None
    sign = -1 if c < 0 else 1
    a = abs(c)
    r = round(a ** (1.0 / n))
    for cand in (r - 1, r, r + 1):
        if cand >= 0 and cand ** n == a:
            return sign * cand
    return None


def _poly_root(P: dict, n: int):
    from .ratfunc import pmul, pscale, padd

    lead = max(P)
    lc = _ipow_root(P[lead], n)
    if lc is None:
        return None
    Qp = {tuple(e // n for e in lead): lc}
    for _ in range(400):
        cur = Qp
        for _i in range(n - 1):
            cur = pmul(cur, Qp)
        R = padd(P, pscale(cur, -1))
        if not R:
            return Qp
        leadR = max(R)
        leadQ = max(Qp)
        denom = n * P[lead] // lc  # n * lc^(n-1) * ... careful below
        dcoef = n * (lc ** (n - 1))
        mono = tuple(
            er - (n - 1) * eq for er, eq in zip(leadR, leadQ)
        )
        if any(e < 0 for e in mono) or R[leadR] % dcoef:
            return None
        Qp = dict(Qp)
        Qp[mono] = Qp.get(mono, 0) + R[leadR] // dcoef
    return None


def _content_split(t: TMap):
    """Extract rational content and common generator factors from a term map.

    Returns (content, common, core) with t = content * prod(common) * core;
    the leading coefficient of core is positive.
    """
    from math import gcd

    nums = [abs(c.numerator) for c in t.values()]
    dens = [c.denominator for c in t.values()]
    g = 0
    for n in nums:
        g = gcd(g, n)
    l = 1
    for d in dens:
        l = l * d // gcd(l, d)
    content = Q(g, l) if g else Q(1)
    lead = t[min(t, key=_mono_key)]
    if lead < 0:
        content = -content
    common: dict[str, list] = None
    for m in t:
        slots = {}
        for gen, k in m:
            if not isinstance(gen, PowSym) and k > 0:
                slots[gen.skey()] = [gen, k]
        if common is None:
            common = slots
        else:
            common = {
                key: [v[0], min(v[1], slots[key][1])]
                for key, v in common.items()
                if key in slots
            }
        if not common:
            break
    common_pairs = [tuple(v) for _, v in sorted((common or {}).items())]
    if content == 1 and not common_pairs:
        return Q(1), [], t
    inv = [(gen, -k) for gen, k in common_pairs]
    core = tmap_mul(t, _finalize(inv, Q(1) / content))
    return content, common_pairs, core


def tmap_of(e: Expr) -> TMap:
    if isinstance(e, Num):
        return {(): e.q} if e.q else {}
    if isinstance(e, (Var, Jet)):
        return {((e, 1),): Q(1)}
    if isinstance(e, FunApp):
        return {((e, 1),): Q(1)}
    if isinstance(e, Fn):
        a = nf(e.arg)
        g = e if a is e.arg else Fn(e.name, a)
        object.__setattr__(g, "_canon", True)
        return {((g, 1),): Q(1)}
    if isinstance(e, Inte):
        return _inte_tmap(e.integrand, e.var)
    if isinstance(e, PowSym):
        return _powsym_tmap(e.base, e.expo)
    if isinstance(e, Pow):
        return tmap_pow(tmap_of(e.base), e.k)
    if isinstance(e, Prod):
        out: TMap = {(): Q(1)}
        for f in e.factors:
            out = tmap_mul(out, tmap_of(f))
            if not out:
                return {}
        return out
    if isinstance(e, Sum):
        out: TMap = {}
        for t in e.terms:
            out = tmap_add(out, tmap_of(t))
        return out
    raise ExprError(f"unknown node {e!r}")


def _ratsimp_exponent(s: Expr) -> Expr:
    """Exponents compare structurally, so normalize them as reduced
    parameter fractions when they are built from constants alone."""
    if isinstance(s, Num):
        return s
    for a in iter_atoms(s):
        if isinstance(a, Var) and a.sym.kind.value in ("parameter", "constant"):
            continue
        return s
    from .ratfunc import ratsimp
    from .symbols import Kind

    syms = sorted(
        {a.sym for a in iter_atoms(s) if isinstance(a, Var)},
        key=lambda x: x.sort_key(),
    )
    try:
        return ratsimp(s, syms)
    except Exception:
        return s


def _inte_tmap(integrand: Expr, var) -> TMap:
    """Canonicalize an antiderivative.

    Rules: linear over the integrand's terms; factors free of the
    integration variable are pulled out; integrands holding a derivative of
    an opaque head are rewritten by parts until only underived heads remain
    (the formal antiderivative is determined up to a constant, which these
    rewrites may shift).
    """
    g = nf(integrand)
    t = tmap_of(g)
    out: TMap = {}
    for mono, c in t.items():
        frag = _inte_term(mono, c, var)
        for m, cc in frag.items():
            nc = out.get(m, 0) + cc
            if nc:
                out[m] = nc
            else:
                out.pop(m, None)
    return out


def _inte_term(mono: Mono, c: Fraction, var) -> TMap:
    watom = Var(var)
    # by parts for derivative towers under the integral
    for g, k in mono:
        if isinstance(g, FunApp) and k == 1:
            for pos, a in enumerate(g.args):
                if a == watom and g.dorders[pos] >= 1:
                    lower = list(g.dorders)
                    lower[pos] -= 1
                    lowered = FunApp(g.head, lower, g.args)
                    rest = mul(Num(c), *[
                        (h if kk == 1 else Pow(h, kk))
                        for h, kk in mono if h is not g
                    ])
                    from .calculus import partial_diff

                    boundary = mul(rest, lowered)
                    drest = partial_diff(rest, watom)
                    out = tmap_of(boundary)
                    inner = _inte_tmap(mul(drest, lowered), var)
                    for m, cc in inner.items():
                        nc = out.get(m, 0) - cc
                        if nc:
                            out[m] = nc
                        else:
                            out.pop(m, None)
                    return out
    free = []
    bound = []
    for g, k in mono:
        if contains(g, watom):
            bound.append((g, k))
        else:
            free.append((g, k))
    if not bound:
        # integral of a constant
        return tmap_of(mul(Num(c), *[
            (h if kk == 1 else Pow(h, kk)) for h, kk in free
        ], watom))
    core = _slot_sort(bound)
    node = Inte(rebuild({core: Q(1)}), var)
    object.__setattr__(node, "_canon", True)
    slots = _slot_sort(list(free) + [(node, 1)])
    return {slots: c}


def _powsym_tmap(base: Expr, expo: Expr) -> TMap:
    b = nf(base)
    s = _ratsimp_exponent(nf(expo))
    if isinstance(s, Num) and s.q.denominator == 1:
        return tmap_pow(tmap_of(b), int(s.q))
    if isinstance(b, Num):
        if b.q == 1:
            return {(): Q(1)}
        if b.q == 0:
            return {}
        g = PowSym(b, s)
        object.__setattr__(g, "_canon", True)
        return {((g, 1),): Q(1)}
    if isinstance(b, PowSym):
        return _powsym_tmap(b.base, mul(b.expo, s))
    if isinstance(b, Pow):
        return _powsym_tmap(b.base, mul(Num(b.k), s))
    if isinstance(b, Prod):
        t = tmap_of(b)
        if len(t) == 1:
            ((m, c),) = t.items()
            if c == 1:
                out: TMap = {(): Q(1)}
                for gen, k in m:
                    if isinstance(gen, PowSym):
                        out = tmap_mul(
                            out, _powsym_tmap(gen.base, mul(gen.expo, s))
                        )
                    else:
                        out = tmap_mul(out, _powsym_tmap(gen, mul(Num(k), s)))
                return out
        b = rebuild(t)
    return _finalize([(b, s)], Q(1))


# ---------------------------------------------------------------------------
# Rebuilding canonical expressions from term maps.
# ---------------------------------------------------------------------------


def _mono_grade(m: Mono) -> int:
    return sum(k for g, k in m if not isinstance(g, PowSym))


def _mono_key(m: Mono):
    return (-_mono_grade(m), tuple((g.skey(), -k) for g, k in m))


def _trig_rewrite(t: TMap) -> TMap:
    """Apply sin(w)^2 + cos(w)^2 -> 1 between matching terms, to a fixpoint."""
    t = dict(t)
    for _ in range(1000):
        hit = None
        for m in sorted(t.keys(), key=_mono_key):
            for i, (g, k) in enumerate(m):
                if isinstance(g, Fn) and g.name == "sin" and k >= 2:
                    cosg = Fn("cos", g.arg)
                    object.__setattr__(cosg, "_canon", True)
                    partner = dict(m)
                    if partner[g] == 2:
                        del partner[g]
                    else:
                        partner[g] = k - 2
                    partner[cosg] = partner.get(cosg, 0) + 2
                    pm = _slot_sort(partner.items())
                    if pm in t:
                        hit = (m, g, k, pm, cosg)
                        break
            if hit:
                break
        if not hit:
            break
        m, g, k, pm, cosg = hit
        c1, c2 = t[m], t[pm]
        # c1*sin^2*M + c2*cos^2*M = c2*M + (c1-c2)*sin^2*M
        reduced = dict(m)
        if reduced[g] == 2:
            del reduced[g]
        else:
            reduced[g] = k - 2
        rm = _slot_sort(reduced.items())
        del t[pm]
        if c1 == c2:
            t.pop(m, None)
        else:
            t[m] = c1 - c2
        nc = t.get(rm, 0) + c2
        if nc:
            t[rm] = nc
        else:
            t.pop(rm, None)
    return t


def rebuild(t: TMap) -> Expr:
    t = {m: c for m, c in t.items() if c}
    if any(
        isinstance(g, Fn) and g.name == "sin" and k >= 2
        for m in t
        for g, k in m
    ):
        t = _trig_rewrite(t)
    if not t:
        return ZERO
    terms = []
    for m in sorted(t.keys(), key=_mono_key):
        c = t[m]
        factors = []
        for g, k in m:
            factors.append(g if k == 1 else _mk_pow(g, k))
        if not factors:
            terms.append(Num(c))
            continue
        if c == 1 and len(factors) == 1:
            terms.append(factors[0])
            continue
        fs = ([] if c == 1 else [Num(c)]) + factors
        if len(fs) == 1:
            terms.append(fs[0])
        else:
            p = Prod(fs)
            object.__setattr__(p, "_canon", True)
            terms.append(p)
    if len(terms) == 1:
        out = terms[0]
    else:
        out = Sum(terms)
    object.__setattr__(out, "_canon", True)
    return out


def _mk_pow(g: Expr, k: int) -> Expr:
    p = Pow(g, k)
    object.__setattr__(p, "_canon", True)
    return p


def nf(e: Expr) -> Expr:
    """Canonical normal form (idempotent)."""
    if e._canon:
        return e
    return rebuild(tmap_of(e))


def normal_form(e: Expr) -> Expr:
    return nf(e)


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------


def add(*es) -> Expr:
    out: TMap = {}
    for e in es:
        out = tmap_add(out, tmap_of(as_expr(e)))
    return rebuild(out)


def mul(*es) -> Expr:
    out: TMap = {(): Q(1)}
    for e in es:
        out = tmap_mul(out, tmap_of(as_expr(e)))
        if not out:
            return ZERO
    return rebuild(out)


def div(a, b) -> Expr:
    return mul(as_expr(a), pow_int(as_expr(b), -1))


def pow_int(e: Expr, k: int) -> Expr:
    return rebuild(tmap_pow(tmap_of(as_expr(e)), k))


def pow_sym(base, expo) -> Expr:
    return rebuild(_powsym_tmap(as_expr(base), as_expr(expo)))


def sqrt(e) -> Expr:
    return pow_sym(e, Num(Q(1, 2)))


def fn_sin(e) -> Expr:
    return nf(Fn("sin", as_expr(e)))


def fn_cos(e) -> Expr:
    return nf(Fn("cos", as_expr(e)))


def fn_log(e) -> Expr:
    return nf(Fn("log", as_expr(e)))


def fn_exp(e) -> Expr:
    return nf(Fn("exp", as_expr(e)))


def integral(integrand, var: Symbol) -> Expr:
    return nf(Inte(as_expr(integrand), var))


# ---------------------------------------------------------------------------
# Inspection helpers
# ---------------------------------------------------------------------------


def iter_atoms(e: Expr) -> Iterator[Expr]:
    """Yield every generator atom occurring anywhere in e (with repeats)."""
    if isinstance(e, Num):
        return
    if isinstance(e, (Var, Jet)):
        yield e
        return
    if isinstance(e, FunApp):
        yield e
        for a in e.args:
            yield a
        return
    if isinstance(e, Fn):
        yield e
        yield from iter_atoms(e.arg)
        return
    if isinstance(e, Inte):
        yield e
        yield from iter_atoms(e.integrand)
        return
    if isinstance(e, PowSym):
        yield e
        yield from iter_atoms(e.base)
        yield from iter_atoms(e.expo)
        return
    if isinstance(e, Pow):
        yield from iter_atoms(e.base)
        return
    if isinstance(e, Prod):
        for f in e.factors:
            yield from iter_atoms(f)
        return
    if isinstance(e, Sum):
        for t in e.terms:
            yield from iter_atoms(t)
        return
    raise ExprError(f"unknown node {e!r}")


def atoms(e: Expr, types=None) -> set:
    out = set()
    for a in iter_atoms(e):
        if types is None or isinstance(a, types):
            out.add(a)
    return out


def contains(e: Expr, target: Expr) -> bool:
    if e == target:
        return True
    return any(a == target or _inside(a, target) for a in iter_atoms(e))


def _inside(a: Expr, target: Expr) -> bool:
    if a == target:
        return True
    if isinstance(a, (Fn,)):
        return contains(a.arg, target)
    if isinstance(a, Inte):
        return contains(a.integrand, target)
    if isinstance(a, PowSym):
        return contains(a.base, target) or contains(a.expo, target)
    if isinstance(a, FunApp):
        return any(x == target for x in a.args)
    return False


def jets_of(e: Expr) -> set:
    return atoms(e, Jet)


# ---------------------------------------------------------------------------
# Zero testing
# ---------------------------------------------------------------------------


def is_zero(e: Expr) -> bool:
    """Exact zero test.

    Complete for polynomials in atoms with rational-function coefficients;
    denominators and integer-offset families of symbolic powers are cleared
    by multiplying with nonzero factors before the syntactic test.
    """
    z = nf(as_expr(e))
    if isinstance(z, Num):
        return z.q == 0
    t = tmap_of(z)
    for _ in range(64):
        if not t:
            return True
        mults = _clearing_multipliers(t)
        if not mults:
            return False
        for mult in mults:
            t = tmap_mul(t, mult)
        t = tmap_of(rebuild(t))
    return not t


def _clearing_multipliers(t: TMap) -> list:
    # denominators: negative powers of compound sums, cleared one factor at a
    # time so power-base absorption keeps them canonical
    need: dict[str, list] = {}
    for m in t:
        for g, k in m:
            if isinstance(g, Sum) and k < 0:
                cur = need.get(g.skey())
                if cur is None or -k > cur[1]:
                    need[g.skey()] = [g, -k]
    if need:
        out = []
        for _, (g, k) in sorted(need.items()):
            out.extend([tmap_of(g)] * k)
        return out
    # symbolic powers whose exponents differ by integers
    groups: dict[str, list] = {}
    for m in t:
        for g, k in m:
            if isinstance(g, PowSym):
                groups.setdefault(g.base.skey(), []).append(g)
    for _, gens in sorted(groups.items()):
        uniq = {}
        for g in gens:
            uniq[g.expo.skey()] = g
        if len(uniq) < 2:
            continue
        items = sorted(uniq.values(), key=lambda g: g.expo.skey())
        ref = items[0]
        offsets = []
        for g in items[1:]:
            d = add(g.expo, mul(MINUS_ONE, ref.expo))
            if isinstance(d, Num) and d.q.denominator == 1:
                offsets.append((g, int(d.q)))
        if not offsets:
            continue
        low = min(0, min(o for _, o in offsets))
        # multiply by base^(-(ref.expo + low)) : every class member becomes an
        # integer (>= 0) power of the base
        shift = add(ref.expo, Num(low))
        return [_finalize([(ref.base, mul(MINUS_ONE, shift))], Q(1))]
    return []


def equal(a: Expr, b: Expr) -> bool:
    return is_zero(add(as_expr(a), mul(MINUS_ONE, as_expr(b))))
