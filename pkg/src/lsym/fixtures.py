"""Loading of field / map / table / solution fixture files.

All paper content ships as DSL text under ``fixtures/v1``; nothing is
embedded as code.  Each loader returns plain engine objects plus the local
scope (constants, arbitrary functions, derived-constant definitions) that
the file introduces.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from fractions import Fraction

from .calculus import substitute
from .expr import Expr, Num, Var, as_expr, is_zero, nf, pow_int
from .parser import parse
from .printer import to_text
from .symbols import Kind, Scope, Symbol
from .systems import PdeSystem, SystemError, builtin, fixture_text, parse_function_decl


class FixtureError(ValueError):
    pass


def _lines(text: str):
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


@dataclass
class LoadedField:
    name: str
    system: PdeSystem
    scope: Scope
    field: "VectorField"
    families: list = dc_field(default_factory=list)   # function-slot heads
    defines: dict = dc_field(default_factory=dict)    # Symbol -> Expr
    status: str = "printed"


def _parse_define(scope: Scope, rest: str, defines: dict):
    name, _, src = rest.partition("=")
    name = name.strip()
    src = src.strip()
    if "^2" in name:
        # algebraic constant: define k2^2 = <expr>
        base = name[: name.index("^2")].strip()
        expr = substitute(parse(src, scope), defines)
        sym = scope.constant(base, square=nf(expr))
        return sym
    expr = substitute(parse(src, scope), defines)
    sym = scope.constant(name)
    defines[Var(sym)] = nf(expr)
    return sym


def load_field(text: str, system: PdeSystem = None) -> LoadedField:
    from .vector_fields import VectorField

    name = None
    scope = None
    families = []
    defines: dict = {}
    xis: dict = {}
    phis: dict = {}
    status = "printed"
    sys = system
    for line in _lines(text):
        head, _, rest = line.partition(" ")
        rest = rest.strip()
        if head == "field":
            fname, _, on = rest.partition(" on ")
            name = fname.strip()
            if sys is None:
                sys = builtin(on.strip())
            scope = sys.scope.child()
        elif head == "constant":
            for n in rest.split():
                scope.constant(n)
        elif head == "arbitrary":
            parse_function_decl(scope, rest)
        elif head == "define":
            _parse_define(scope, rest, defines)
        elif head == "family":
            families.append(scope[rest])
        elif head == "status":
            status = rest
        elif head in ("xi", "phi"):
            target_name, _, src = rest.partition(":")
            target = scope[target_name.strip()]
            e = substitute(parse(src.strip(), scope), defines)
            if head == "xi":
                xis[target] = e
            else:
                phis[target] = e
        else:
            raise FixtureError(f"unknown field declaration '{head}'")
    if name is None or sys is None:
        raise FixtureError("missing 'field <name> on <system>' line")
    vf = VectorField(sys.independents, sys.dependents, xis, phis)
    return LoadedField(name, sys, scope, vf, families, defines, status)


def load_field_fixture(fname: str, system: PdeSystem = None) -> LoadedField:
    return load_field(fixture_text(f"fields/{fname}.lsym"), system)


@dataclass
class LoadedMap:
    name: str
    system: PdeSystem
    scope: Scope
    map: "SimilarityMap"
    field: "VectorField" = None          # restricted field, if declared
    claimed: list = dc_field(default_factory=list)
    claimed_corrected: list = dc_field(default_factory=list)
    status: str = "printed"
    excluded: bool = False


def _parse_restrictions(text: str) -> dict:
    out = {}
    for chunk in text.replace(",", " ").split():
        name, _, val = chunk.partition("=")
        out[name.strip()] = Fraction(val.strip())
    return out


def load_map(text: str, system: PdeSystem = None) -> LoadedMap:
    from .reduction import SimilarityMap

    name = None
    sys = system
    scope = None
    defines: dict = {}
    field = None
    residual = None
    taus = []
    deps = []
    claimed = []
    claimed_corrected = []
    status = "printed"
    excluded = False
    tau_inline: dict = {}
    for line in _lines(text):
        head, _, rest = line.partition(" ")
        rest = rest.strip()
        if head.endswith(":"):
            head = head[:-1]
        if head == "map":
            mname, _, on = rest.partition(" on ")
            name = mname.strip()
            if sys is None:
                sys = builtin(on.strip())
            scope = sys.scope.child()
        elif head == "field":
            fname, _, withpart = rest.partition(" with ")
            lf = load_field_fixture(fname.strip(), sys)
            scope = lf.scope.child()
            if withpart.strip():
                field = restrict_field(lf, _parse_restrictions(withpart))
            else:
                field = lf.field
        elif head == "constant":
            for n in rest.split():
                scope.constant(n)
        elif head == "arbitrary":
            parse_function_decl(scope, rest)
        elif head == "define":
            _parse_define(scope, rest, defines)
        elif head == "status":
            status = rest
        elif head == "excluded":
            excluded = True
        elif head == "residual":
            residual = scope[rest]
        elif head == "tau":
            tname, _, src = rest.partition(":")
            tau = scope.independent(tname.strip())
            e = substitute(parse(src.strip(), scope), defines)
            e = substitute(e, tau_inline)
            taus.append((tau, nf(e)))
            tau_inline[Var(tau)] = nf(e)
        elif head == "dep":
            dname, _, src = rest.partition(":")
            newdep = scope.dependent(dname.strip())
            old_name, _, expr_src = src.partition("=")
            old = scope[old_name.strip()]
            e = substitute(parse(expr_src.strip(), scope), defines)
            e = substitute(e, tau_inline)
            deps.append((newdep, old, nf(e)))
        elif head == "claimed":
            claimed.append(rest.lstrip(": ").strip())
        elif head == "corrected":
            claimed_corrected.append(rest.lstrip(": ").strip())
        else:
            raise FixtureError(f"unknown map declaration '{head}'")
    if name is None or sys is None or residual is None:
        raise FixtureError("map needs 'map <name> on <system>' and 'residual'")
    claimed_exprs = [
        _parse_equation(c, scope, defines) for c in claimed
    ]
    corrected_exprs = [
        _parse_equation(c, scope, defines) for c in claimed_corrected
    ]
    m = SimilarityMap(sys, taus, deps, residual, scope, name)
    return LoadedMap(name, sys, scope, m, field, claimed_exprs,
                     corrected_exprs, status, excluded)


def _parse_equation(src: str, scope: Scope, defines: dict) -> Expr:
    if "=" in src:
        lhs, _, rhs = src.partition("=")
        e = parse(lhs.strip(), scope) - parse(rhs.strip(), scope)
    else:
        e = parse(src, scope)
    return nf(substitute(e, defines))


def load_map_fixture(fname: str, system: PdeSystem = None) -> LoadedMap:
    return load_map(fixture_text(f"maps/{fname}.lsym"), system)


def restrict_field(lf: LoadedField, restrictions: dict) -> "VectorField":
    """Set some of the field's constants/functions to fixed values."""
    from .vector_fields import VectorField

    bind = {}
    for key, value in restrictions.items():
        sym = lf.scope[key] if isinstance(key, str) else key
        if sym.kind is Kind.FUNCTION:
            raise FixtureError("use instantiate_family for function slots")
        bind[Var(sym)] = as_expr(value)
    return VectorField(
        lf.field.independents,
        lf.field.dependents,
        {s: substitute(e, bind) for s, e in lf.field.xis.items()},
        {s: substitute(e, bind) for s, e in lf.field.phis.items()},
    )
