"""Symbols and declaration scopes for the expression kernel.

Every identifier that may appear in an expression is declared up front as a
:class:`Symbol` with a kind.  Scopes map names to symbols and give each
symbol a declaration index that fixes the canonical term order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class Kind(Enum):
    INDEPENDENT = "independent"
    DEPENDENT = "dependent"
    PARAMETER = "parameter"
    CONSTANT = "constant"          # unknown constant (c1, I1, k2, ...)
    FUNCTION = "function"          # arbitrary-function head (f(t), m(y), N(y,t))
    UNKNOWN_FUNCTION = "unknown"   # solver unknowns (xi, phi heads)


_KIND_RANK = {
    Kind.INDEPENDENT: 0,
    Kind.DEPENDENT: 1,
    Kind.PARAMETER: 2,
    Kind.CONSTANT: 3,
    Kind.FUNCTION: 4,
    Kind.UNKNOWN_FUNCTION: 5,
}


@dataclass(frozen=True)
class Symbol:
    """A declared identifier.

    Function heads carry an argument signature (``args``) of the variables
    they are applied to; plain symbols have an empty signature.  Constants
    may carry a defining rewrite for their square (``square``), used for
    surd-like constants such as k2 with k2^2 a rational expression.
    """

    name: str
    kind: Kind
    args: tuple = ()              # tuple[Symbol, ...] for function heads
    nonzero: bool = False
    index: int = 0                # declaration order within the scope
    square: object = None         # Optional[Expr]; set for algebraic constants

    @property
    def arity(self) -> int:
        return len(self.args)

    def sort_key(self):
        return (_KIND_RANK[self.kind], self.index, self.name)

    def __repr__(self):
        return f"Symbol({self.name})"


class ScopeError(ValueError):
    pass


class Scope:
    """A declaration scope: name -> Symbol, with ordered declaration."""

    def __init__(self, parent: Optional["Scope"] = None):
        self.parent = parent
        self._table: dict[str, Symbol] = {}
        self._counter = parent._counter if parent is not None else 0

    def _declare(self, sym: Symbol) -> Symbol:
        if self.lookup(sym.name) is not None:
            raise ScopeError(f"duplicate declaration of '{sym.name}'")
        self._table[sym.name] = sym
        return sym

    def _next_index(self) -> int:
        self._counter += 1
        return self._counter

    def independent(self, name: str) -> Symbol:
        return self._declare(Symbol(name, Kind.INDEPENDENT, index=self._next_index()))

    def dependent(self, name: str) -> Symbol:
        return self._declare(Symbol(name, Kind.DEPENDENT, index=self._next_index()))

    def parameter(self, name: str, nonzero: bool = True) -> Symbol:
        return self._declare(
            Symbol(name, Kind.PARAMETER, nonzero=nonzero, index=self._next_index())
        )

    def constant(self, name: str, square=None) -> Symbol:
        return self._declare(
            Symbol(name, Kind.CONSTANT, index=self._next_index(), square=square)
        )

    def function(self, name: str, args: tuple) -> Symbol:
        if not args:
            raise ScopeError(f"function head '{name}' needs at least one argument")
        return self._declare(
            Symbol(name, Kind.FUNCTION, args=tuple(args), index=self._next_index())
        )

    def unknown_function(self, name: str, args: tuple) -> Symbol:
        return self._declare(
            Symbol(name, Kind.UNKNOWN_FUNCTION, args=tuple(args), index=self._next_index())
        )

    def lookup(self, name: str) -> Optional[Symbol]:
        sym = self._table.get(name)
        if sym is None and self.parent is not None:
            return self.parent.lookup(name)
        return sym

    def __getitem__(self, name: str) -> Symbol:
        sym = self.lookup(name)
        if sym is None:
            raise ScopeError(f"undeclared identifier '{name}'")
        return sym

    def __contains__(self, name: str) -> bool:
        return self.lookup(name) is not None

    def names(self):
        seen = []
        scope = self
        while scope is not None:
            seen.extend(scope._table.keys())
            scope = scope.parent
        return seen

    def child(self) -> "Scope":
        return Scope(parent=self)
