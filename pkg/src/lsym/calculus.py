"""Differentiation, substitution, collection and numeric evaluation.

The workhorse is :func:`derive`, which extends a rule on coordinates (plain
variables and jet variables) to a derivation on all expressions via
linearity, the Leibniz rule, and the chain rule through opaque heads:

  * an application f(t) differentiates to f'(t) * D(t);
  * Int(g, v) differentiates to g * D(v) (plus differentiation under the
    integral for coordinates free in g);
  * w^s differentiates to s * w^(s-1) * D(w) for constant exponents;
  * sin, cos, log, exp carry the usual chain rules.

Partial and total derivatives are instances of this driver.
"""

from __future__ import annotations

from fractions import Fraction

from .expr import (
    ZERO,
    Expr,
    ExprError,
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
    add,
    as_expr,
    atoms,
    fn_cos,
    fn_exp,
    fn_sin,
    is_zero,
    mul,
    nf,
    pow_int,
    pow_sym,
    rebuild,
    tmap_of,
)
from .symbols import Kind, Symbol


class EvalError(ValueError):
    pass


class SubstitutionError(ValueError):
    pass


class CollectError(ValueError):
    pass


def _coord(x) -> Expr:
    if isinstance(x, Symbol):
        return as_expr(x)
    return x


def derive(e: Expr, rule) -> Expr:
    """Extend ``rule`` (coordinate atom -> Expr or None) to a derivation."""
    t = tmap_of(nf(e))
    pieces = []
    for mono, c in t.items():
        for idx, (g, k) in enumerate(mono):
            dg = _derive_gen(g, rule)
            if dg is ZERO or (isinstance(dg, Num) and dg.q == 0):
                continue
            rest = [
                (h if kk == 1 else Pow(h, kk))
                for j, (h, kk) in enumerate(mono)
                if j != idx
            ]
            if isinstance(g, PowSym):
                factor = mul(Num(c), dg, *rest)
            else:
                self_part = [] if k == 1 else [Pow(g, k - 1)]
                factor = mul(Num(c * k), dg, *(self_part + rest))
            pieces.append(factor)
    if not pieces:
        return ZERO
    return add(*pieces)


def _derive_gen(g: Expr, rule) -> Expr:
    if isinstance(g, (Var, Jet)):
        r = rule(g)
        return ZERO if r is None else as_expr(r)
    if isinstance(g, FunApp):
        parts = []
        for j, a in enumerate(g.args):
            r = rule(a)
            if r is None:
                continue
            r = as_expr(r)
            if isinstance(r, Num) and r.q == 0:
                continue
            parts.append(mul(g.bump(j), r))
        return add(*parts) if parts else ZERO
    if isinstance(g, Fn):
        da = derive(g.arg, rule)
        if is_trivially_zero(da):
            return ZERO
        if g.name == "sin":
            return mul(fn_cos(g.arg), da)
        if g.name == "cos":
            return mul(Num(-1), fn_sin(g.arg), da)
        if g.name == "exp":
            return mul(fn_exp(g.arg), da)
        if g.name == "log":
            return mul(pow_int(g.arg, -1), da)
        raise ExprError(f"no derivative rule for {g.name}")
    if isinstance(g, Inte):
        limit = rule(Var(g.var))
        parts = []
        if limit is not None and not is_trivially_zero(as_expr(limit)):
            parts.append(mul(g.integrand, as_expr(limit)))
        masked = lambda a: None if a == Var(g.var) else rule(a)  # noqa: E731
        inner = derive(g.integrand, masked)
        if not is_trivially_zero(inner):
            parts.append(Inte(inner, g.var))
        return add(*parts) if parts else ZERO
    if isinstance(g, PowSym):
        ds = derive(g.expo, rule)
        if not is_trivially_zero(ds):
            raise ExprError(
                "cannot differentiate a power with a non-constant exponent"
            )
        db = derive(g.base, rule)
        if is_trivially_zero(db):
            return ZERO
        return mul(g.expo, pow_sym(g.base, add(g.expo, Num(-1))), db)
    if isinstance(g, Sum):
        return derive(g, rule)
    raise ExprError(f"cannot differentiate generator {g!r}")


def is_trivially_zero(e: Expr) -> bool:
    e = nf(e)
    return isinstance(e, Num) and e.q == 0


def partial_diff(e: Expr, coord) -> Expr:
    """Formal partial derivative w.r.t. one coordinate.

    Jet variables and distinct opaque applications count as independent
    coordinates; differentiating f(t) by t raises its derivative order, and
    d/dt Int(g, t) = g.
    """
    target = _coord(coord)
    if not isinstance(target, (Var, Jet)):
        raise ExprError("partial_diff needs a variable or jet coordinate")

    def rule(a):
        return Num(1) if a == target else None

    return derive(e, rule)


def total_diff(e: Expr, x) -> Expr:
    """Total derivative D_x in jet space."""
    xv = _coord(x)
    if not isinstance(xv, Var) or xv.sym.kind is not Kind.INDEPENDENT:
        raise ExprError("total_diff direction must be an independent variable")

    def rule(a):
        if isinstance(a, Var):
            return Num(1) if a == xv else None
        if isinstance(a, Jet):
            return a.bump(xv.sym)
        return None

    return derive(e, rule)


def total_diff_multi(e: Expr, directions) -> Expr:
    for x in directions:
        e = total_diff(e, x)
    return e


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------


def substitute(e: Expr, bindings: dict) -> Expr:
    """Simultaneous replacement of coordinates/applications, then normalize."""
    if not bindings:
        return nf(e)
    b = {}
    for k, v in bindings.items():
        kk = nf(_coord(k))
        if not isinstance(kk, (Var, Jet, FunApp, Fn, Inte, PowSym)):
            raise SubstitutionError(
                "substitution keys must be coordinates or whole applications"
            )
        b[kk] = nf(as_expr(v))
    return nf(_subst(nf(e), b))


def _subst(e: Expr, b: dict) -> Expr:
    hit = b.get(e)
    if hit is not None:
        return hit
    if isinstance(e, (Num, Var, Jet)):
        return e
    if isinstance(e, FunApp):
        if any(a in b for a in e.args):
            new_args = []
            for a in e.args:
                r = b.get(a, a)
                if not isinstance(r, (Var, Jet)) or (isinstance(r, Jet) and r.order):
                    raise SubstitutionError(
                        f"cannot substitute a non-variable into arguments of "
                        f"'{e.head.name}'"
                    )
                new_args.append(r)
            return FunApp(e.head, e.dorders, new_args)
        return e
    if isinstance(e, Fn):
        return Fn(e.name, _subst(e.arg, b))
    if isinstance(e, Inte):
        key = Var(e.var)
        if key in b:
            r = b[key]
            if isinstance(r, Var) and r.sym.kind is Kind.INDEPENDENT:
                inner = dict(b)
                inner[key] = r
                return Inte(_subst(e.integrand, inner), r.sym)
            raise SubstitutionError(
                "cannot substitute an expression for an integration variable"
            )
        return Inte(_subst(e.integrand, b), e.var)
    if isinstance(e, PowSym):
        return PowSym(_subst(e.base, b), _subst(e.expo, b))
    if isinstance(e, Pow):
        return Pow(_subst(e.base, b), e.k)
    if isinstance(e, Prod):
        return Prod(tuple(_subst(f, b) for f in e.factors))
    if isinstance(e, Sum):
        return Sum(tuple(_subst(t, b) for t in e.terms))
    raise ExprError(f"unknown node {e!r}")


# ---------------------------------------------------------------------------
# Collection
# ---------------------------------------------------------------------------


def collect(e: Expr, vars) -> dict:
    """Split e as sum(monomial * coefficient) over monomials in ``vars``.

    Targets may be coordinates or whole opaque applications.  Coefficients
    are free of the collected variables; raises CollectError on
    non-polynomial dependence (negative powers, or occurrence inside an
    opaque generator).
    """
    targets = {nf(_coord(v)) for v in vars}
    for v in targets:
        if not isinstance(v, (Var, Jet, FunApp, Fn, Inte, PowSym)):
            raise CollectError("collect variables must be coordinates or applications")
    t = tmap_of(nf(e))
    groups: dict = {}
    for mono, c in t.items():
        key_slots = []
        rest_slots = []
        for g, k in mono:
            if g in targets:
                if k < 0:
                    raise CollectError(f"negative power of collected variable {g}")
                key_slots.append((g, k))
            else:
                for v in targets:
                    if _occurs_inside(g, v):
                        raise CollectError(
                            f"non-polynomial dependence on {v} inside {g!r}"
                        )
                rest_slots.append((g, k))
        key = rebuild({tuple(key_slots): Fraction(1)})
        groups.setdefault(key, {})
        m = tuple(rest_slots)
        groups[key][m] = groups[key].get(m, 0) + c
    return {k: rebuild(tm) for k, tm in groups.items() if any(tm.values())}


def _occurs_inside(g: Expr, v: Expr) -> bool:
    from .expr import contains

    if isinstance(g, FunApp):
        return any(a == v for a in g.args)
    if isinstance(g, Fn):
        return contains(g.arg, v)
    if isinstance(g, Inte):
        return contains(g.integrand, v)
    if isinstance(g, PowSym):
        return contains(g.base, v) or contains(g.expo, v)
    if isinstance(g, Sum):
        return contains(g, v)
    return False


# ---------------------------------------------------------------------------
# Numeric evaluation
# ---------------------------------------------------------------------------


def eval_numeric(e: Expr, assignment: dict, function_table: dict = None) -> Fraction:
    """Exact rational evaluation; every coordinate/application must be covered."""
    assign = {nf(_coord(k)): Fraction(v) for k, v in assignment.items()}
    funcs = {nf(_coord(k)): Fraction(v) for k, v in (function_table or {}).items()}

    def val(g: Expr) -> Fraction:
        if isinstance(g, (Var, Jet)):
            if g in assign:
                return assign[g]
            raise EvalError(f"missing assignment for {g}")
        if g in funcs:
            return funcs[g]
        raise EvalError(f"missing function-table entry for {g}")

    t = tmap_of(nf(e))
    total = Fraction(0)
    for mono, c in t.items():
        acc = Fraction(c)
        for g, k in mono:
            if isinstance(g, Sum):
                base = eval_numeric(g, assign, funcs)
            elif isinstance(g, PowSym):
                base = None
                if g in funcs:
                    acc *= funcs[g] ** k
                    continue
                raise EvalError(f"missing function-table entry for {g}")
            else:
                base = val(g)
            if base == 0 and k < 0:
                raise EvalError("division by zero during evaluation")
            acc *= base ** k
        total += acc
    return total
