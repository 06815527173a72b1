"""Point vector fields, prolongation to jet space, and commutators."""

from __future__ import annotations

from .calculus import derive, partial_diff, total_diff
from .expr import Expr, Jet, Num, Var, add, atoms, is_zero, mul, nf, as_expr
from .printer import to_text
from .symbols import Kind, Symbol


class FieldError(ValueError):
    pass


class VectorField:
    """Infinitesimal generator sum(xi_i d/dx_i) + sum(phi_a d/du_a).

    Components are base-space expressions: independents, dependents,
    parameters, constants and opaque functions, but no derivative
    coordinates.
    """

    def __init__(self, independents, dependents, xis=None, phis=None):
        self.independents = tuple(independents)
        self.dependents = tuple(dependents)
        self.xis = {s: nf(as_expr(xis.get(s, Num(0)) if xis else Num(0)))
                    for s in self.independents}
        self.phis = {s: nf(as_expr(phis.get(s, Num(0)) if phis else Num(0)))
                     for s in self.dependents}
        for comp in list(self.xis.values()) + list(self.phis.values()):
            for j in atoms(comp, Jet):
                if j.order:
                    raise FieldError(
                        f"point field component contains jet {to_text(j)}"
                    )

    @classmethod
    def zero(cls, sys) -> "VectorField":
        return cls(sys.independents, sys.dependents)

    def components(self):
        for s in self.independents:
            yield Var(s), self.xis[s]
        for s in self.dependents:
            yield Jet(s), self.phis[s]

    def component(self, sym: Symbol) -> Expr:
        if sym in self.xis:
            return self.xis[sym]
        return self.phis[sym]

    def is_zero_field(self) -> bool:
        return all(is_zero(c) for _, c in self.components())

    def same_space(self, other: "VectorField") -> bool:
        return (self.independents == other.independents
                and self.dependents == other.dependents)

    def __eq__(self, other):
        if not isinstance(other, VectorField) or not self.same_space(other):
            return False
        return all(
            is_zero(self.component(s) - other.component(s))
            for s in self.independents + self.dependents
        )

    def __add__(self, other):
        if not self.same_space(other):
            raise FieldError("fields live on different spaces")
        return VectorField(
            self.independents,
            self.dependents,
            {s: self.xis[s] + other.xis[s] for s in self.independents},
            {s: self.phis[s] + other.phis[s] for s in self.dependents},
        )

    def __sub__(self, other):
        return self + other.scale(Num(-1))

    def scale(self, c) -> "VectorField":
        c = as_expr(c)
        return VectorField(
            self.independents,
            self.dependents,
            {s: mul(c, self.xis[s]) for s in self.independents},
            {s: mul(c, self.phis[s]) for s in self.dependents},
        )

    def _rule(self):
        table = {Var(s): self.xis[s] for s in self.independents}
        table.update({Jet(s): self.phis[s] for s in self.dependents})
        return lambda a: table.get(a)

    def act_on(self, e: Expr) -> Expr:
        """Apply the field as a first-order operator on base-space
        expressions (chain rule through opaque heads and antiderivatives)."""
        return derive(e, self._rule())

    def __str__(self):
        parts = []
        for coord, comp in self.components():
            if not is_zero(comp):
                parts.append(f"({to_text(nf(comp))}) d/d{to_text(coord)}")
        return " + ".join(parts) if parts else "0"

    def to_json(self):
        return {
            "xi": {s.name: to_text(self.xis[s]) for s in self.independents},
            "phi": {s.name: to_text(self.phis[s]) for s in self.dependents},
        }


def commutator(v: VectorField, w: VectorField) -> VectorField:
    """Lie bracket [v, w], computed component-wise on base space."""
    if not v.same_space(w):
        raise FieldError("commutator of fields on different spaces")
    xis = {s: v.act_on(w.xis[s]) - w.act_on(v.xis[s]) for s in v.independents}
    phis = {s: v.act_on(w.phis[s]) - w.act_on(v.phis[s]) for s in v.dependents}
    return VectorField(v.independents, v.dependents, xis, phis)


class ProlongedField:
    """A point field together with its jet-space coefficients.

    Coefficients follow the recursion
        phi^(J+1_i) = D_i phi^J - sum_k (D_i xi_k) u^alpha_(J+1_k),
    computed on demand and cached; the order of directions does not matter
    (asserted by tests).
    """

    def __init__(self, base: VectorField):
        self.base = base
        self._coeff: dict[Jet, Expr] = {
            Jet(s): base.phis[s] for s in base.dependents
        }
        self._dxi = {
            (i, k): nf(total_diff(base.xis[k], i))
            for i in base.independents
            for k in base.independents
        }

    def coefficient(self, jet: Jet) -> Expr:
        got = self._coeff.get(jet)
        if got is not None:
            return got
        # strip the last direction in canonical order
        sym = max((s for s, k in jet.orders if k), key=lambda s: s.sort_key())
        lower = dict(jet.orders)
        lower[sym] -= 1
        prev = Jet(jet.dep, lower)
        prev_c = self.coefficient(prev)
        out = total_diff(prev_c, sym)
        for k in self.base.independents:
            dxi = self._dxi[(sym, k)]
            if isinstance(dxi, Num) and dxi.q == 0:
                continue
            out = out - mul(dxi, prev.bump(k))
        out = nf(out)
        self._coeff[jet] = out
        return out

    def apply(self, e: Expr) -> Expr:
        """Act as a derivation on a jet-space expression."""
        e = nf(e)
        parts = []
        for s in self.base.independents:
            xi = self.base.xis[s]
            if isinstance(xi, Num) and xi.q == 0:
                continue
            d = partial_diff(e, Var(s))
            if not (isinstance(d, Num) and d.q == 0):
                parts.append(mul(xi, d))
        for jet in sorted(atoms(e, Jet), key=lambda j: j.skey()):
            c = self.coefficient(jet)
            if isinstance(c, Num) and c.q == 0:
                continue
            d = partial_diff(e, jet)
            if not (isinstance(d, Num) and d.q == 0):
                parts.append(mul(c, d))
        return add(*parts) if parts else Num(0)


def prolong(v: VectorField, jets=None) -> ProlongedField:
    """Prolong a point field; coefficients are produced lazily, so the jet
    set only warms the cache."""
    pv = ProlongedField(v)
    for j in jets or ():
        pv.coefficient(j)
    return pv
