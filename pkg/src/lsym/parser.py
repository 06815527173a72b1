"""Expression parser for the input DSL.

Grammar (infix, exact rational arithmetic):

    expr    := term (('+'|'-') term)*
    term    := signed (('*'|'/') signed)*
    signed  := '-'* power
    power   := primary ('^' exponent)?
    exponent:= INT | '(' expr ')'
    primary := NUMBER | call | name | '(' expr ')'
    call    := IDENT PRIME* '(' expr (',' expr)* ')'
             | 'D' '[' IDENT (',' IDENT)+ ']' '(' args ')'
             | 'Int' '(' expr ',' IDENT ')'
             | 'sqrt' | 'sin' | 'cos' | 'log' | 'exp' applied to one argument

Jet variables use underscore multi-indices (``u_xxy``, ``F_tau1tau2``); the
suffix is matched greedily against the declared independent variables.
Every identifier must be declared in the scope.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .expr import (
    Expr,
    FunApp,
    Jet,
    Num,
    Var,
    add,
    as_expr,
    div,
    fn_cos,
    fn_exp,
    fn_log,
    fn_sin,
    integral,
    mul,
    pow_int,
    pow_sym,
    sqrt,
)
from .symbols import Kind, Scope, Symbol


class ParseError(ValueError):
    def __init__(self, message: str, pos: int, text: str = ""):
        self.pos = pos
        super().__init__(f"{message} (at position {pos})")


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+)|(?P<ident>[A-Za-z][A-Za-z0-9_]*)|(?P<op>[-+*/^(),\[\]=']))"
)


def tokenize(text: str):
    pos = 0
    out = []
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if not m or m.end() == m.start():
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ParseError(f"unexpected character {stripped[0]!r}", pos, text)
        if m.group("num"):
            out.append(("num", m.group("num"), m.start("num")))
        elif m.group("ident"):
            out.append(("ident", m.group("ident"), m.start("ident")))
        else:
            out.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    out.append(("end", "", n))
    return out


class _Parser:
    def __init__(self, text: str, scope: Scope):
        self.text = text
        self.scope = scope
        self.toks = tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, val: str):
        kind, v, pos = self.next()
        if v != val:
            raise ParseError(f"expected {val!r}, found {v!r}", pos, self.text)

    def fail(self, msg: str):
        raise ParseError(msg, self.peek()[2], self.text)

    # -- grammar ----------------------------------------------------------
    def parse(self) -> Expr:
        e = self.expr()
        kind, v, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing input {v!r}", pos, self.text)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            kind, v, _ = self.peek()
            if v == "+":
                self.next()
                e = add(e, self.term())
            elif v == "-":
                self.next()
                e = add(e, mul(Num(-1), self.term()))
            else:
                return e

    def term(self) -> Expr:
        e = self.signed()
        while True:
            kind, v, _ = self.peek()
            if v == "*":
                self.next()
                e = mul(e, self.signed())
            elif v == "/":
                self.next()
                e = div(e, self.signed())
            else:
                return e

    def signed(self) -> Expr:
        neg = False
        while self.peek()[1] == "-":
            self.next()
            neg = not neg
        e = self.power()
        return mul(Num(-1), e) if neg else e

    def power(self) -> Expr:
        base = self.primary()
        if self.peek()[1] != "^":
            return base
        self.next()
        kind, v, pos = self.peek()
        if kind == "num":
            self.next()
            return pow_int(base, int(v))
        if v == "(":
            self.next()
            e = self.expr()
            self.expect(")")
            if isinstance(e, Num) and e.q.denominator == 1:
                return pow_int(base, int(e.q))
            return pow_sym(base, e)
        raise ParseError("expected integer or parenthesized exponent", pos, self.text)

    def primary(self) -> Expr:
        kind, v, pos = self.next()
        if kind == "num":
            return Num(int(v))
        if v == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind != "ident":
            raise ParseError(f"unexpected token {v!r}", pos, self.text)
        # builtin callables
        if v in ("sin", "cos", "log", "exp", "sqrt") and self.peek()[1] == "(":
            self.next()
            arg = self.expr()
            self.expect(")")
            return {"sin": fn_sin, "cos": fn_cos, "log": fn_log, "exp": fn_exp,
                    "sqrt": sqrt}[v](arg)
        if v == "Int" and self.peek()[1] == "(":
            self.next()
            integ = self.expr()
            self.expect(",")
            k2, name, p2 = self.next()
            if k2 != "ident":
                raise ParseError("expected integration variable", p2, self.text)
            var = self._symbol(name, p2)
            self.expect(")")
            return integral(integ, var)
        if v == "D" and self.peek()[1] == "[":
            return self._d_form(pos)
        # derivative primes on a declared head
        primes = 0
        while self.peek()[1] == "'":
            self.next()
            primes += 1
        if self.peek()[1] == "(" and (primes or self._is_head(v)):
            head = self._symbol(v, pos)
            if head.kind not in (Kind.FUNCTION, Kind.UNKNOWN_FUNCTION):
                raise ParseError(f"'{v}' is not a function head", pos, self.text)
            self.next()
            args = [self.expr()]
            while self.peek()[1] == ",":
                self.next()
                args.append(self.expr())
            self.expect(")")
            if head.arity != 1 and primes:
                raise ParseError(
                    f"prime notation needs a unary head, '{v}' has arity {head.arity}",
                    pos,
                    self.text,
                )
            dorders = [0] * head.arity
            if primes:
                dorders[0] = primes
            return FunApp(head, dorders, [self._as_app_arg(a, pos) for a in args])
        if primes:
            raise ParseError(f"'{v}' is not a function head", pos, self.text)
        return self._name(v, pos)

    def _d_form(self, pos: int) -> Expr:
        self.expect("[")
        k, headname, p = self.next()
        if k != "ident":
            raise ParseError("expected head name in D[...]", p, self.text)
        head = self._symbol(headname, p)
        if head.kind not in (Kind.FUNCTION, Kind.UNKNOWN_FUNCTION):
            raise ParseError(f"'{headname}' is not a function head", p, self.text)
        dirs = []
        while self.peek()[1] == ",":
            self.next()
            k, dname, p2 = self.next()
            if k != "ident":
                raise ParseError("expected variable name in D[...]", p2, self.text)
            dirs.append(self._symbol(dname, p2))
        self.expect("]")
        self.expect("(")
        args = [self.expr()]
        while self.peek()[1] == ",":
            self.next()
            args.append(self.expr())
        self.expect(")")
        dorders = [0] * head.arity
        argsyms = list(head.args)
        for d in dirs:
            if d not in argsyms:
                raise ParseError(
                    f"'{d.name}' is not an argument of head '{head.name}'", pos, self.text
                )
            dorders[argsyms.index(d)] += 1
        return FunApp(head, dorders, [self._as_app_arg(a, pos) for a in args])

    def _as_app_arg(self, e: Expr, pos: int):
        if isinstance(e, (Var, Jet)):
            return e
        raise ParseError("opaque heads take plain variables as arguments", pos, self.text)

    def _is_head(self, name: str) -> bool:
        sym = self.scope.lookup(name)
        return sym is not None and sym.kind in (Kind.FUNCTION, Kind.UNKNOWN_FUNCTION)

    def _symbol(self, name: str, pos: int) -> Symbol:
        sym = self.scope.lookup(name)
        if sym is None:
            raise ParseError(f"undeclared identifier '{name}'", pos, self.text)
        return sym

    def _name(self, name: str, pos: int) -> Expr:
        sym = self.scope.lookup(name)
        if sym is not None:
            if sym.kind in (Kind.FUNCTION, Kind.UNKNOWN_FUNCTION):
                raise ParseError(
                    f"function head '{name}' must be applied to arguments", pos, self.text
                )
            return as_expr(sym)
        if "_" in name:
            dep_name, _, suffix = name.partition("_")
            dep = self.scope.lookup(dep_name)
            if dep is None or dep.kind is not Kind.DEPENDENT:
                raise ParseError(f"undeclared identifier '{name}'", pos, self.text)
            orders = self._jet_suffix(suffix, pos)
            return Jet(dep, orders)
        raise ParseError(f"undeclared identifier '{name}'", pos, self.text)

    def _jet_suffix(self, suffix: str, pos: int):
        indeps = sorted(
            (s for s in (self.scope.lookup(n) for n in set(self.scope.names()))
             if s is not None and s.kind is Kind.INDEPENDENT),
            key=lambda s: -len(s.name),
        )
        orders: dict[Symbol, int] = {}
        rest = suffix
        while rest:
            for s in indeps:
                if rest.startswith(s.name):
                    orders[s] = orders.get(s, 0) + 1
                    rest = rest[len(s.name):]
                    break
            else:
                raise ParseError(
                    f"cannot read derivative suffix '{suffix}'", pos, self.text
                )
        return orders


def parse(text: str, scope: Scope) -> Expr:
    """Parse an expression string in the given scope; returns a canonical Expr."""
    return _Parser(text, scope).parse()
