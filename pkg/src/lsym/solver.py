"""Heuristic solver for determining systems.

The strategy mirrors hand computation: strip variable monomial factors by
collecting, turn single-application equations into integrations, solve
algebraic relations between the unknown heads, integrate single-head
derivative relations in closed form (with fresh heads as integration
constants), and differentiate mixed equations to decouple them.  Unknowns
left fully unconstrained become arbitrary-function slots; polynomially
resolved ones yield constant slots.  Whatever the rules cannot settle is
returned as relations, never dropped.
"""

from __future__ import annotations

from fractions import Fraction

from .calculus import CollectError, collect, partial_diff, substitute
from .expr import (
    Expr,
    FunApp,
    Jet,
    Num,
    Pow,
    Var,
    _mono_key,
    add,
    as_expr,
    atoms,
    is_zero,
    mul,
    nf,
    pow_int,
    rebuild,
    tmap_of,
)
from .printer import to_text
from .symbols import Kind, Scope, Symbol
from .determining import DeterminingSystem
from .ratfunc import ratsimp
from .vector_fields import VectorField


class NotIntegrable(Exception):
    pass


class SolverError(ValueError):
    pass


class SymmetryAnsatz:
    """Solver strategy knobs.

    ``distinguished`` is the variable whose functional dependence is never
    truncated (defaults to the system's t, or its last independent);
    the degree caps bound the polynomial truncation fallback in the
    remaining space variables and in the dependent variables.
    """

    def __init__(self, distinguished: Symbol = None, space_degree: int = 2,
                 dep_degree: int = 1):
        if space_degree < 0 or dep_degree < 0:
            raise SolverError("ansatz degrees must be >= 0")
        self.distinguished = distinguished
        self.space_degree = space_degree
        self.dep_degree = dep_degree

    def pick_distinguished(self, sys) -> Symbol:
        if self.distinguished is not None:
            return self.distinguished
        for s in sys.independents:
            if s.name == "t":
                return s
        return sys.independents[-1]


class GeneralSymmetry:
    """Solved symmetry family: constant slots plus function slots."""

    def __init__(self, system, components, constant_slots, function_slots,
                 relations, truncated=False):
        self.system = system
        self.components = components      # coord Symbol -> Expr
        self.constant_slots = list(constant_slots)  # (Symbol, VectorField)
        self.function_slots = list(function_slots)  # (Symbol, VectorField)
        self.relations = list(relations)
        self.truncated = truncated

    @property
    def n_constants(self):
        return len(self.constant_slots)

    @property
    def n_functions(self):
        return len(self.function_slots)

    def basis_fields(self):
        for _, f in self.constant_slots:
            yield f
        for _, f in self.function_slots:
            yield f

    def to_json(self):
        return {
            "constants": [
                {"slot": c.name, "field": f.to_json()}
                for c, f in self.constant_slots
            ],
            "functions": [
                {"slot": h.name,
                 "arguments": [a.name for a in h.args],
                 "field": f.to_json()}
                for h, f in self.function_slots
            ],
            "relations": [to_text(r) for r in self.relations],
        }


def _atom(sym: Symbol) -> Expr:
    return Jet(sym) if sym.kind is Kind.DEPENDENT else Var(sym)


class _Solver:
    def __init__(self, ds: DeterminingSystem, ansatz: SymmetryAnsatz):
        self.ds = ds
        self.sys = ds.origin
        self.ansatz = ansatz
        self.distinguished = ansatz.pick_distinguished(self.sys)
        self.scope = self.sys.scope.child()
        self.params = [p for p in self.sys.parameters]
        self.eqs = [ratsimp(e, self.params) for e in ds.equations]
        self.active = set(ds.unknowns)
        self.sols: dict[Symbol, Expr] = {}
        self._const_n = 0
        self._head_n = 0
        self.fresh_consts: set[Symbol] = set()
        self.truncated = False
        self._seen = set(self.eqs)

    # -- fresh objects -----------------------------------------------------
    def new_const(self) -> Symbol:
        while True:
            self._const_n += 1
            name = f"c{self._const_n}"
            if name not in self.scope:
                c = self.scope.constant(name)
                self.fresh_consts.add(c)
                return c

    def new_head(self, args) -> Symbol:
        if not args:
            return self.new_const()
        while True:
            self._head_n += 1
            name = f"h{self._head_n}"
            if name not in self.scope:
                h = self.scope.unknown_function(name, tuple(args))
                self.active.add(h)
                return h

    def app(self, head: Symbol) -> Expr:
        return FunApp(head, [0] * head.arity, [_atom(a) for a in head.args])

    # -- substitution of a solved head --------------------------------------
    def subst_head(self, head: Symbol, expr: Expr):
        expr = nf(expr)
        self.active.discard(head)
        self.sols[head] = expr
        cache: dict = {}

        def repl(e: Expr) -> Expr:
            apps = [a for a in atoms(e, FunApp) if a.head is head]
            if not apps:
                return e
            bind = {}
            for a in apps:
                if a not in cache:
                    d = expr
                    for pos, k in enumerate(a.dorders):
                        for _ in range(k):
                            d = partial_diff(d, _atom(head.args[pos]))
                    cache[a] = nf(d)
                bind[a] = cache[a]
            return substitute(e, bind)

        self.eqs = [ratsimp(repl(e), self.params) for e in self.eqs]
        self.sols = {h: ratsimp(repl(s), self.params) for h, s in self.sols.items()}

    # -- rule: collect by variables no active head depends on ---------------
    def _split_pass(self) -> bool:
        changed = False
        out = []
        for e in self.eqs:
            if isinstance(e, Num):
                if e.q:
                    raise SolverError("inconsistent determining system")
                continue
            apps = [a for a in atoms(e, FunApp) if a.head in self.active]
            dep_vars = set()
            for a in apps:
                dep_vars.update(a.head.args)
            split_atoms = []
            for a in atoms(e, (Var, Jet)):
                sym = a.sym if isinstance(a, Var) else a.dep
                if sym in dep_vars:
                    continue
                if sym.kind in (Kind.INDEPENDENT, Kind.DEPENDENT):
                    split_atoms.append(a)
            if not split_atoms:
                out.append(e)
                continue
            try:
                groups = collect(e, split_atoms)
            except CollectError:
                out.append(e)
                continue
            parts = [nf(c) for c in groups.values()]
            if len(parts) == 1 and parts[0] == e:
                out.append(e)
                continue
            changed = True
            out.extend(p for p in parts if not (isinstance(p, Num) and p.q == 0))
        self.eqs = out
        return changed

    # -- candidate scan ------------------------------------------------------
    def _param_grouped(self, e: Expr) -> dict:
        """Group terms by their non-parameter monomial part; values are the
        accumulated parameter-polynomial coefficients."""
        groups: dict = {}
        for mono, c in tmap_of(e).items():
            par, rest = [], []
            for g, k in mono:
                if isinstance(g, Var) and g.sym.kind is Kind.PARAMETER:
                    par.append((g, k))
                else:
                    rest.append((g, k))
            cur = groups.setdefault(tuple(rest), {})
            pm = tuple(par)
            cur[pm] = cur.get(pm, 0) + c
        out = {}
        for key, pmap in groups.items():
            coeff = rebuild({m: c for m, c in pmap.items() if c})
            if not (isinstance(coeff, Num) and coeff.q == 0):
                out[key] = coeff
        return out

    def _single_app_terms(self, e: Expr):
        """Yield (app, coefficient) for active-head apps occurring in exactly
        one parameter-grouped term of e, linearly, with a head-free cofactor."""
        groups = self._param_grouped(e)
        count: dict[FunApp, int] = {}
        where: dict[FunApp, tuple] = {}
        for slots, coeff in groups.items():
            napps = [
                (g, k) for g, k in slots
                if isinstance(g, FunApp) and g.head in self.active
            ]
            for g, k in napps:
                count[g] = count.get(g, 0) + 1
                if k == 1 and len(napps) == 1:
                    rest = tuple((h, kk) for h, kk in slots if h is not g)
                    where[g] = (rest, coeff)
        heads_here: dict[Symbol, int] = {}
        for g in count:
            heads_here[g.head] = heads_here.get(g.head, 0) + count[g]
        for g, n in sorted(count.items(), key=lambda kv: kv[0].skey()):
            if n == 1 and g in where and heads_here[g.head] == 1:
                rest, coeff = where[g]
                coeff = nf(mul(coeff, *[
                    (h if kk == 1 else Pow(h, kk)) for h, kk in rest
                ]))
                yield g, coeff

    def _facts_pass(self) -> bool:
        for e in list(self.eqs):
            groups = self._param_grouped(e)
            if len(groups) != 1:
                continue
            ((slots, _coeff),) = groups.items()
            apps = [
                (g, k) for g, k in slots
                if isinstance(g, FunApp) and g.head in self.active
            ]
            if len(apps) != 1 or apps[0][1] != 1:
                continue
            g = apps[0][0]
            others = [(h, k) for h, k in slots if h is not g]
            if any(
                isinstance(h, FunApp) and h.head in self.active
                for h, _ in others
            ):
                continue
            self.eqs.remove(e)
            self._integrate_head(g, Num(0))
            return True
        return False

    def _algebra_pass(self) -> bool:
        for e in sorted(self.eqs, key=lambda e: (len(tmap_of(e)), e.skey())):
            for g, coeff in self._single_app_terms(e):
                if not self._coeff_ok(coeff):
                    continue
                rest = nf(e - mul(coeff, g))
                rhs = nf(mul(Num(-1), rest, pow_int(coeff, -1)))
                if sum(g.dorders) == 0:
                    if not self._vars_ok(rhs, g.head):
                        continue
                    self.eqs.remove(e)
                    self.subst_head(g.head, rhs)
                    return True
                try:
                    sol = self._antidiff(rhs, g)
                except NotIntegrable:
                    continue
                if not self._vars_ok(sol, g.head):
                    continue
                self.eqs.remove(e)
                self.subst_head(g.head, sol)
                return True
        return False

    def _coeff_ok(self, coeff: Expr) -> bool:
        """Coefficients we are willing to divide by: nonzero expressions in
        the parameters alone (parameters are treated generically)."""
        if is_zero(coeff):
            return False
        for a in atoms(coeff):
            if isinstance(a, Var) and a.sym.kind is Kind.PARAMETER:
                continue
            return False
        return True

    def _vars_ok(self, expr: Expr, head: Symbol) -> bool:
        allowed = set(head.args)
        for a in atoms(expr, (Var, Jet)):
            sym = a.sym if isinstance(a, Var) else a.dep
            if sym.kind in (Kind.INDEPENDENT, Kind.DEPENDENT) and sym not in allowed:
                return False
        return True

    def _integrate_head(self, g: FunApp, rhs: Expr):
        """Solve D^d head = rhs by closed-form antidifferentiation."""
        sol = self._antidiff(rhs, g)
        self.subst_head(g.head, sol)

    def _antidiff(self, rhs: Expr, g: FunApp) -> Expr:
        head = g.head
        steps = []
        for pos, k in enumerate(g.dorders):
            steps.extend([head.args[pos]] * k)
        part = nf(rhs)
        done: list[Symbol] = []
        homog = []
        for w in steps:
            if not (isinstance(part, Num) and part.q == 0):
                part = _integrate(part, w)
            # integration constant: arbitrary in all args but w, then
            # integrated by the remaining steps of other directions
            rest_steps = steps[len(done) + 1:]
            term = self._homog_term(head, w, rest_steps)
            homog.append(term)
            done.append(w)
        return nf(add(part, *homog) if homog else part)

    def _homog_term(self, head: Symbol, w: Symbol, rest_steps) -> Expr:
        """Integration constant from one w-step: arbitrary in args minus w.

        Later integration steps in other directions just absorb it (it is
        already arbitrary there); repeated w-steps multiply by w.
        """
        args = tuple(a for a in head.args if a is not w)
        fresh = self.new_head(args)
        base = self.app(fresh) if args else Var(fresh)
        out = base
        for v in rest_steps:
            if v is w:
                out = mul(out, _atom(v))
        return out

    def _consts_pass(self) -> bool:
        """Solve residual linear relations among the fresh constants."""
        for e in sorted(self.eqs, key=lambda e: (len(tmap_of(e)), e.skey())):
            targets = [
                a for a in atoms(e, Var)
                if a.sym in self.fresh_consts
            ]
            for target in sorted(targets, key=lambda a: a.skey()):
                groups = collect(e, [target])
                coeff = groups.get(target)
                if coeff is None or not self._coeff_ok(coeff):
                    continue
                if Pow(target, 2) in [g for m in tmap_of(e) for g, _ in m]:
                    continue
                rest = nf(e - mul(coeff, target))
                if target in atoms(rest, Var):
                    continue
                val = nf(mul(Num(-1), rest, pow_int(coeff, -1)))
                self.eqs.remove(e)
                self._subst_const(target.sym, val)
                return True
        return False

    def _subst_const(self, c: Symbol, val: Expr):
        self.fresh_consts.discard(c)
        bind = {Var(c): val}
        self.eqs = [nf(substitute(e, bind)) for e in self.eqs]
        self.sols = {h: substitute(s, bind) for h, s in self.sols.items()}

    # -- separation by differentiation ---------------------------------------
    def _separate_pass(self) -> bool:
        added = False
        for e in list(self.eqs):
            heads = {a.head for a in atoms(e, FunApp) if a.head in self.active}
            if len(heads) < 1:
                continue
            var_sets = [set(h.args) for h in heads]
            common = set.intersection(*var_sets) if var_sets else set()
            candidates = set()
            for s in var_sets:
                candidates.update(s - common)
            for w in sorted(candidates, key=lambda s: s.sort_key()):
                d = nf(partial_diff(e, _atom(w)))
                if isinstance(d, Num) and d.q == 0:
                    continue
                if d in self._seen:
                    continue
                self._seen.add(d)
                self.eqs.append(d)
                added = True
        return added

    # -- truncation fallback ---------------------------------------------------
    def _truncate_pass(self) -> bool:
        remaining = {
            a.head
            for e in self.eqs
            for a in atoms(e, FunApp)
            if a.head in self.active
        }
        if not remaining:
            return False
        head = sorted(remaining, key=lambda h: (-len(h.args), h.name))[0]
        space = [a for a in head.args
                 if a.kind is Kind.INDEPENDENT and a is not self.distinguished]
        deps = [a for a in head.args if a.kind is Kind.DEPENDENT]
        functional = [a for a in head.args if a is self.distinguished]
        monos = _bounded_monomials(space, self.ansatz.space_degree,
                                   deps, self.ansatz.dep_degree)
        parts = []
        for mono in monos:
            fresh = self.new_head(tuple(functional))
            base = self.app(fresh) if functional else Var(fresh)
            parts.append(mul(base, mono))
        self.truncated = True
        self.subst_head(head, add(*parts))
        return True

    # -- main loop ---------------------------------------------------------------
    def run(self):
        for _ in range(3000):
            self.eqs = _dedupe([ratsimp(e, self.params) for e in self.eqs])
            if not self.eqs:
                break
            if self._split_pass():
                continue
            if self._facts_pass():
                continue
            if self._algebra_pass():
                continue
            if self._consts_pass():
                continue
            if self._separate_pass():
                continue
            if self._truncate_pass():
                continue
            break
        return self._assemble()

    def _assemble(self):
        comps = {}
        field_template, _ = _field_and_coords(self.ds)
        for coord, app in field_template:
            expr = self.sols.get(app.head, self.app(app.head))
            comps[coord] = nf(expr)
        consts = []
        heads = []
        for e in comps.values():
            for a in atoms(e, Var):
                if (a.sym.kind is Kind.CONSTANT and a.sym not in consts
                        and self.scope.lookup(a.sym.name) is a.sym):
                    consts.append(a.sym)
            for a in atoms(e, FunApp):
                if a.head in self.active and a.head not in heads:
                    heads.append(a.head)
        consts.sort(key=lambda s: s.sort_key())
        heads.sort(key=lambda s: s.sort_key())
        constant_slots = []
        for c in consts:
            f = self._instantiate(comps, {c: Num(1)}, set(heads))
            if not f.is_zero_field():
                constant_slots.append((c, f))
        function_slots = []
        for h in heads:
            f = self._instantiate(comps, {}, set(heads) - {h})
            if not f.is_zero_field():
                function_slots.append((h, f))
        constant_slots, function_slots = self._reduce_slots(
            constant_slots, function_slots
        )
        return GeneralSymmetry(
            self.sys, comps, constant_slots, function_slots,
            [nf(e) for e in self.eqs], self.truncated,
        )

    def _reduce_slots(self, constant_slots, function_slots):
        """Drop redundant basis presentation: merge function slots that are
        the same family under head renaming, and constants lying in the span
        of the families (a constant instance of an arbitrary function)."""
        kept_funcs = []
        for h, f in function_slots:
            dup = False
            for h2, f2 in kept_funcs:
                if tuple(h.args) != tuple(h2.args):
                    continue
                if _in_span(_swap_field_head(f, h, h2), [f2], self.sys):
                    dup = True
                    break
            if not dup:
                kept_funcs.append((h, f))
        instances = [_instantiate_head_const(f, h) for h, f in kept_funcs]
        kept_consts = []
        for c, f in constant_slots:
            basis = [f2 for _, f2 in kept_consts] + instances
            if _in_span(f, basis, self.sys):
                continue
            kept_consts.append((c, f))
        return kept_consts, kept_funcs

    def _instantiate(self, comps, const_values, zero_heads):
        xis, phis = {}, {}
        for coord, expr in comps.items():
            e = _zero_heads(expr, zero_heads)
            bind = {}
            for a in atoms(e, Var):
                if a.sym.kind is Kind.CONSTANT and self.scope.lookup(a.sym.name) is a.sym:
                    bind[a] = const_values.get(a.sym, Num(0))
            e = substitute(e, bind) if bind else e
            if coord.kind is Kind.INDEPENDENT:
                xis[coord] = e
            else:
                phis[coord] = e
        return VectorField(self.sys.independents, self.sys.dependents, xis, phis)


def _instantiate_head_const(f: VectorField, head: Symbol) -> VectorField:
    """The slot's field with its head set to the constant function 1."""
    def inst(e):
        bind = {}
        for a in atoms(e, FunApp):
            if a.head is head:
                bind[a] = Num(1) if sum(a.dorders) == 0 else Num(0)
        return substitute(e, bind) if bind else e

    return VectorField(
        f.independents, f.dependents,
        {s: inst(e) for s, e in f.xis.items()},
        {s: inst(e) for s, e in f.phis.items()},
    )


def _in_span(target: VectorField, fields, sys) -> bool:
    if not fields:
        return target.is_zero_field()
    coords = list(sys.independents) + list(sys.dependents)
    rows = []
    for c in coords:
        cols = [f.component(c) for f in fields]
        rows.extend(_linear_rows(cols, target.component(c), sys))
    return solve_linear(rows, len(fields)) is not None


def _zero_heads(e: Expr, heads) -> Expr:
    if not heads:
        return nf(e)
    bind = {a: Num(0) for a in atoms(e, FunApp) if a.head in heads}
    return substitute(e, bind) if bind else nf(e)


def _dedupe(eqs):
    seen = set()
    out = []
    for e in eqs:
        e = nf(e)
        if isinstance(e, Num):
            if e.q:
                raise SolverError("inconsistent determining system")
            continue
        t = tmap_of(e)
        lead = min(t, key=_mono_key)
        if t[lead] != 1:
            c0 = t[lead]
            e = rebuild({m: c / c0 for m, c in t.items()})
        if e in seen:
            continue
        seen.add(e)
        out.append(e)
    return out


def _bounded_monomials(space, s_cap, deps, d_cap):
    from itertools import product

    def degrees(vars_, cap):
        out = []
        for combo in product(range(cap + 1), repeat=len(vars_)):
            if sum(combo) <= cap:
                out.append(combo)
        return out

    monos = []
    for sd in degrees(space, s_cap):
        for dd in degrees(deps, d_cap):
            m = Num(1)
            for v, k in zip(space, sd):
                m = mul(m, pow_int(_atom(v), k)) if k else m
            for v, k in zip(deps, dd):
                m = mul(m, pow_int(_atom(v), k)) if k else m
            monos.append(nf(m))
    return monos


def _integrate(e: Expr, w: Symbol) -> Expr:
    """Closed-form antiderivative in w for the solver's equation class."""
    watom = _atom(w)
    t = tmap_of(nf(e))
    parts = []
    for mono, c in t.items():
        parts.append(_integrate_mono(mono, c, w, watom))
    return add(*parts) if parts else Num(0)


def _integrate_mono(mono, c, w, watom):
    k = 0
    app = None
    rest = []
    for g, kk in mono:
        if g == watom:
            if kk < 0:
                raise NotIntegrable(f"negative power of {w.name}")
            k = kk
            continue
        if isinstance(g, FunApp) and w in g.head.args:
            pos = list(g.head.args).index(w)
            if g.dorders[pos] == 0 or app is not None or kk != 1:
                raise NotIntegrable(f"cannot integrate {to_text(g)}")
            app = g
            continue
        if isinstance(g, (Var, Jet)):
            rest.append((g, kk))
            continue
        raise NotIntegrable(f"cannot integrate generator {to_text(g)}")
    restpart = mul(Num(c), *[
        (h if kk == 1 else Pow(h, kk)) for h, kk in rest
    ])
    if app is None:
        return mul(restpart, pow_int(watom, k + 1), Num(Fraction(1, k + 1)))
    pos = list(app.head.args).index(w)
    lower = list(app.dorders)
    lower[pos] -= 1
    lowered = FunApp(app.head, lower, app.args)
    if k == 0:
        return mul(restpart, lowered)
    # integration by parts: int w^k A' = w^k A - k int w^(k-1) A
    inner = _integrate_mono(
        tuple([(watom, k - 1)] if k > 1 else []) + ((lowered, 1),),
        Fraction(1), w, watom,
    )
    return mul(restpart, add(mul(pow_int(watom, k), lowered),
                             mul(Num(-k), inner)))


def _field_and_coords(ds: DeterminingSystem):
    """Pair each unknown head with its coordinate, in declaration order."""
    sys = ds.origin
    coords = list(sys.independents) + list(sys.dependents)
    pairs = []
    for coord, head in zip(coords, ds.unknowns):
        pairs.append((coord, FunApp(head, [0] * head.arity,
                                    [_atom(a) for a in head.args])))
    return pairs, coords


def solve_determining(ds: DeterminingSystem,
                      ansatz: SymmetryAnsatz = None) -> GeneralSymmetry:
    """Solve a determining system under the structured strategy."""
    return _Solver(ds, ansatz or SymmetryAnsatz()).run()


# ---------------------------------------------------------------------------
# Span testing
# ---------------------------------------------------------------------------


def spans(g: GeneralSymmetry, v: VectorField) -> bool:
    """Is v a combination of g's basis with rational-function coefficients
    in the parameters, matching function slots by head unification?"""
    sys = g.system
    coords = list(sys.independents) + list(sys.dependents)
    unknown_fields = [f for _, f in g.constant_slots]
    # function slots: instantiate at each opaque head of v with matching
    # signature
    v_heads = set()
    for c in coords:
        for a in atoms(v.component(c), FunApp):
            v_heads.add(a.head)
    for slot_head, f in g.function_slots:
        for h in sorted(v_heads, key=lambda s: s.sort_key()):
            if tuple(h.args) == tuple(slot_head.args):
                unknown_fields.append(_swap_field_head(f, slot_head, h))
        unknown_fields.append(f)  # the slot at its own head (matches zero)
    rows = []
    for c in coords:
        target = v.component(c)
        cols = [f.component(c) for f in unknown_fields]
        rows.extend(_linear_rows(cols, target, sys))
    sol = solve_linear(rows, len(unknown_fields))
    return sol is not None


def _swap_field_head(f: VectorField, old: Symbol, new: Symbol) -> VectorField:
    def swap(e):
        bind = {}
        for a in atoms(e, FunApp):
            if a.head is old:
                bind[a] = FunApp(new, a.dorders, a.args)
        return substitute(e, bind) if bind else e

    return VectorField(
        f.independents, f.dependents,
        {s: swap(e) for s, e in f.xis.items()},
        {s: swap(e) for s, e in f.phis.items()},
    )


def _linear_rows(cols, target, sys):
    """Rows of sum(lambda_k * cols[k]) = target, split over monomials in
    base variables and opaque applications."""
    split_atoms = set()
    for e in list(cols) + [target]:
        for a in atoms(e):
            if isinstance(a, (Var, Jet)):
                sym = a.sym if isinstance(a, Var) else a.dep
                if sym.kind in (Kind.INDEPENDENT, Kind.DEPENDENT):
                    split_atoms.add(a)
            elif isinstance(a, FunApp):
                split_atoms.add(a)
    split_atoms = sorted(split_atoms, key=lambda a: a.skey())
    groups: dict = {}
    for idx, e in enumerate(list(cols) + [target]):
        try:
            parts = collect(e, split_atoms) if split_atoms else {Num(1): e}
        except CollectError:
            raise SolverError("non-polynomial component in span test")
        for mono, coeff in parts.items():
            groups.setdefault(mono, {})[idx] = coeff
    rows = []
    n = len(cols)
    for mono in sorted(groups, key=lambda m: m.skey()):
        row = [groups[mono].get(i, Num(0)) for i in range(n)]
        rhs = groups[mono].get(n, Num(0))
        rows.append((row, rhs))
    return rows


def solve_linear(rows, ncols):
    """Gaussian elimination over exact expressions; returns a solution list
    or None if inconsistent.  Free unknowns are set to zero."""
    rows = [([nf(c) for c in r], nf(b)) for r, b in rows]
    assign = [None] * ncols
    pivots = []
    used = set()
    for col in range(ncols):
        pivot_row = None
        for i, (r, b) in enumerate(rows):
            if i in used or is_zero(r[col]):
                continue
            # prefer rational pivots
            if isinstance(nf(r[col]), Num):
                pivot_row = i
                break
            if pivot_row is None:
                pivot_row = i
        if pivot_row is None:
            continue
        used.add(pivot_row)
        pivots.append((col, pivot_row))
        pr, pb = rows[pivot_row]
        inv = pow_int(pr[col], -1)
        for i, (r, b) in enumerate(rows):
            if i == pivot_row or is_zero(r[col]):
                continue
            factor = mul(r[col], inv)
            rows[i] = (
                [nf(rc - mul(factor, pc)) for rc, pc in zip(r, pr)],
                nf(b - mul(factor, pb)),
            )
    # back-substitute (pivot rows may still reference later pivot columns)
    for col, i in reversed(pivots):
        r, b = rows[i]
        val = b
        for c2 in range(ncols):
            if c2 == col or assign[c2] is None:
                continue
            val = val - mul(r[c2], assign[c2])
        assign[col] = nf(mul(val, pow_int(r[col], -1)))
    for c in range(ncols):
        if assign[c] is None:
            assign[c] = Num(0)
    for i, (r, b) in enumerate(rows):
        if i in used:
            continue
        resid = b
        for c in range(ncols):
            resid = resid - mul(r[c], assign[c])
        if not is_zero(resid):
            return None
    return assign
