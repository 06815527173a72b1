"""Invariance conditions, determining equations, and symmetry verification."""

from __future__ import annotations

import random
from fractions import Fraction

from .calculus import CollectError, collect, eval_numeric, partial_diff
from .expr import (
    Expr,
    Fn,
    FunApp,
    Inte,
    Jet,
    Num,
    PowSym,
    Var,
    atoms,
    is_zero,
    nf,
)
from .printer import to_text
from .symbols import Kind, Scope
from .systems import PdeSystem
from .vector_fields import VectorField, prolong


class DeterminingSystem:
    """Linear homogeneous system for the unknown infinitesimals.

    ``unknowns`` are the function heads xi_i, phi_alpha over all base
    variables; ``equations`` are the split coefficients (free of jet
    variables of order >= 1 unless flagged in ``unsplit``).
    """

    def __init__(self, origin: PdeSystem, unknowns, equations, unsplit=None):
        self.origin = origin
        self.unknowns = tuple(unknowns)
        self.equations = [nf(e) for e in equations]
        self.unsplit = list(unsplit or [])

    def __len__(self):
        return len(self.equations)


class ResidualReport:
    """Per-equation residuals of an invariance check."""

    def __init__(self, entries, max_numeric=None):
        self.entries = list(entries)  # (index, residual-Expr)
        self.max_numeric = max_numeric

    @property
    def passed(self) -> bool:
        return all(is_zero(r) for _, r in self.entries)

    def residuals(self):
        return [r for _, r in self.entries]

    def to_json(self):
        out = []
        for i, r in self.entries:
            out.append(
                {
                    "equation_index": i,
                    "residual_string": to_text(nf(r)),
                    "pass": is_zero(r),
                }
            )
        return out

    def __str__(self):
        lines = []
        for i, r in self.entries:
            ok = is_zero(r)
            lines.append(
                f"  eq {i}: {'ok' if ok else 'RESIDUAL ' + to_text(nf(r))}"
            )
        return "\n".join(lines)


def generic_field(sys: PdeSystem, prefix_xi="xi", prefix_phi="phi"):
    """A vector field with unknown-function components over all base vars."""
    scope = sys.scope.child()
    base_args = tuple(sys.independents) + tuple(sys.dependents)
    xis, phis = {}, {}
    for i, s in enumerate(sys.independents, 1):
        head = scope.unknown_function(f"{prefix_xi}{i}", base_args)
        xis[s] = FunApp(head, [0] * len(base_args), [_arg(a) for a in base_args])
    for i, s in enumerate(sys.dependents, 1):
        head = scope.unknown_function(f"{prefix_phi}{i}", base_args)
        phis[s] = FunApp(head, [0] * len(base_args), [_arg(a) for a in base_args])
    field = VectorField(sys.independents, sys.dependents, xis, phis)
    return field, scope


def _arg(sym):
    return Jet(sym) if sym.kind is Kind.DEPENDENT else Var(sym)


def invariance_conditions(sys: PdeSystem, v: VectorField, reduce=True):
    """pr v (Delta) for each equation, optionally reduced on solutions."""
    pv = prolong(v)
    out = []
    for eq in sys.equations:
        e = pv.apply(eq)
        if reduce:
            e = sys.reduce_modulo(e)
        out.append(nf(e))
    return out


def generate_determining(sys: PdeSystem) -> DeterminingSystem:
    """Form, reduce and split the linearized invariance conditions."""
    field, _scope = generic_field(sys)
    equations = []
    unsplit = []
    for cond in invariance_conditions(sys, field, reduce=True):
        jets = sorted(
            (j for j in atoms(cond, Jet) if j.order >= 1),
            key=lambda j: j.skey(),
        )
        try:
            groups = collect(cond, jets)
        except CollectError as err:
            unsplit.append((cond, str(err)))
            continue
        for mono in sorted(groups, key=lambda m: m.skey()):
            equations.append(nf(groups[mono]))
    # deduplicate up to sign and rational scale would hide structure; only
    # drop exact duplicates and zeros
    seen = set()
    uniq = []
    for e in equations:
        if isinstance(e, Num) and e.q == 0:
            continue
        if e in seen:
            continue
        seen.add(e)
        uniq.append(e)
    return DeterminingSystem(sys, field_heads(field), uniq, unsplit)


def field_heads(field: VectorField):
    heads = []
    for _, comp in field.components():
        for a in atoms(comp, FunApp):
            heads.append(a.head)
    return tuple(dict.fromkeys(heads))


def verify_symmetry(sys: PdeSystem, v: VectorField) -> ResidualReport:
    """Check the invariance condition identically (in all constants and
    arbitrary-function towers)."""
    if (tuple(sys.independents) != v.independents
            or tuple(sys.dependents) != v.dependents):
        raise ValueError("field does not match the system's variables")
    conds = invariance_conditions(sys, v, reduce=True)
    return ResidualReport(list(enumerate(conds, 1)))


def numeric_spotcheck(sys: PdeSystem, v: VectorField, n_samples=25, seed=0):
    """Evaluate the unreduced invariance condition at random rational points
    constrained to the solved forms; exact rational max-|residual|."""
    rng = random.Random(seed)
    conds = invariance_conditions(sys, v, reduce=False)
    worst = Fraction(0)
    for _ in range(n_samples):
        assign: dict = {}
        funcs: dict = {}

        def rand(nonzero=False):
            while True:
                q = Fraction(rng.randint(-6, 6), rng.randint(1, 4))
                if not nonzero or q != 0:
                    return q

        def value_of(a):
            if a in assign:
                return assign[a]
            if isinstance(a, Var):
                val = rand(nonzero=a.sym.kind is Kind.PARAMETER and a.sym.nonzero)
                assign[a] = val
                return val
            if isinstance(a, Jet):
                if sys.reducible(a):
                    expr = sys.reduce_modulo(a)
                    val = ev(expr)
                else:
                    val = rand()
                assign[a] = val
                return val
            raise ValueError(f"unexpected coordinate {a!r}")

        def ev(e):
            for a in sorted(atoms(e), key=lambda a: a.skey()):
                if isinstance(a, (Var, Jet)):
                    value_of(a)
                elif isinstance(a, (FunApp, Fn, Inte, PowSym)):
                    if a not in funcs:
                        funcs[a] = rand()
            return eval_numeric(e, assign, funcs)

        for cond in conds:
            try:
                r = abs(ev(cond))
            except ZeroDivisionError:
                continue
            if r > worst:
                worst = r
    return worst
