"""Deterministic canonical printer.

Every expression prints to a string that re-parses (in the same scope) to a
structurally equal expression; parse -> print -> parse is a fixed point.
"""

from __future__ import annotations

from fractions import Fraction

from .expr import (
    Expr,
    Fn,
    FunApp,
    Inte,
    Jet,
    Num,
    Pow,
    PowSym,
    Prod,
    Sum,
    Var,
)

_ATOMIC = (Var, Jet, FunApp, Fn, Inte)


def _num_text(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def _paren(s: str) -> str:
    return f"({s})"


def to_text(e: Expr) -> str:
    if isinstance(e, Num):
        return _num_text(e.q)
    if isinstance(e, Var):
        return e.sym.name
    if isinstance(e, Jet):
        if not e.orders:
            return e.dep.name
        suffix = "".join(s.name * k for s, k in e.orders)
        return f"{e.dep.name}_{suffix}"
    if isinstance(e, FunApp):
        args = ", ".join(to_text(a) for a in e.args)
        total = sum(e.dorders)
        if total == 0:
            return f"{e.head.name}({args})"
        if e.head.arity == 1 and total <= 3:
            return f"{e.head.name}{chr(39) * total}({args})"
        dirs = []
        for sym, k in zip(e.head.args, e.dorders):
            dirs.extend([sym.name] * k)
        return f"D[{e.head.name},{','.join(dirs)}]({args})"
    if isinstance(e, Fn):
        return f"{e.name}({to_text(e.arg)})"
    if isinstance(e, Inte):
        return f"Int({to_text(e.integrand)}, {e.var.name})"
    if isinstance(e, PowSym):
        return f"{_pow_base_text(e.base)}^({to_text(e.expo)})"
    if isinstance(e, Pow):
        k = f"{e.k}" if e.k > 0 else f"({e.k})"
        return f"{_pow_base_text(e.base)}^{k}"
    if isinstance(e, Prod):
        return _prod_text(e)
    if isinstance(e, Sum):
        parts = [to_text(e.terms[0])]
        for t in e.terms[1:]:
            neg = _negated(t)
            if neg is not None:
                parts.append(f" - {to_text(neg)}")
            else:
                parts.append(f" + {to_text(t)}")
        return "".join(parts)
    raise TypeError(f"unprintable node {e!r}")


def _pow_base_text(base: Expr) -> str:
    s = to_text(base)
    if isinstance(base, (Var, Jet)) :
        return s
    if isinstance(base, (FunApp, Fn, Inte)) and not s.startswith("-"):
        return _paren(s) if isinstance(base, FunApp) and sum(base.dorders) else _paren(s)
    return _paren(s)


def _negated(t: Expr):
    """If t has a negative leading rational, return -t (for pretty sums)."""
    if isinstance(t, Num) and t.q < 0:
        return Num(-t.q)
    if isinstance(t, Prod) and isinstance(t.factors[0], Num) and t.factors[0].q < 0:
        c = Num(-t.factors[0].q)
        rest = t.factors[1:]
        if c.q == 1:
            if len(rest) == 1:
                return rest[0]
            p = Prod(rest)
            object.__setattr__(p, "_canon", True)
            return p
        p = Prod((c,) + rest)
        object.__setattr__(p, "_canon", True)
        return p
    return None


def _prod_text(e: Prod) -> str:
    parts = []
    for f in e.factors:
        if isinstance(f, Num):
            if f.q == -1 and len(e.factors) > 1:
                parts.append("-1")
            else:
                s = _num_text(f.q)
                parts.append(_paren(s) if (f.q < 0 or f.q.denominator != 1) else s)
        elif isinstance(f, Sum):
            parts.append(_paren(to_text(f)))
        else:
            parts.append(to_text(f))
    return "*".join(parts)
