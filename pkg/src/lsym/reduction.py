"""Similarity maps: invariant-surface checks, push-forward of systems
through a change of variables, reduction verification, and automatic
characteristic reduction for the tractable class."""

from __future__ import annotations

from fractions import Fraction

from .calculus import collect, derive, partial_diff, substitute, total_diff
from .expr import (
    Expr,
    Fn,
    FunApp,
    Inte,
    Jet,
    Num,
    Pow,
    PowSym,
    Sum,
    Var,
    add,
    atoms,
    fn_exp,
    fn_log,
    is_zero,
    mul,
    nf,
    pow_int,
    pow_sym,
    tmap_of,
)
from .printer import to_text
from .symbols import Kind, Scope, Symbol
from .systems import PdeSystem
from .vector_fields import VectorField
from .determining import ResidualReport


class ReductionError(ValueError):
    pass


class TractabilityError(ReductionError):
    """The characteristic system is outside the engine's solvable class."""


class PushForwardError(ReductionError):
    def __init__(self, message, leftover=None):
        super().__init__(message)
        self.leftover = leftover


class ReducedSystem:
    def __init__(self, independents, dependents, equations):
        self.independents = tuple(independents)
        self.dependents = tuple(dependents)
        self.equations = [nf(e) for e in equations]

    def __str__(self):
        return "\n".join(to_text(e) + " = 0" for e in self.equations)

    def to_json(self):
        return {
            "independents": [s.name for s in self.independents],
            "dependents": [s.name for s in self.dependents],
            "equations": [to_text(e) for e in self.equations],
        }


class SimilarityMap:
    """Change of variables for a similarity reduction.

    new_independents: [(tau symbol, defining expr in old variables)]
    new_dependents:   [(new symbol, old dependent, relation expressing the
                       old dependent in old independents and new-dependent
                       jets)]
    residual:         the old independent eliminated by quadrature.
    """

    def __init__(self, old_sys: PdeSystem, new_independents, new_dependents,
                 residual: Symbol, scope: Scope = None, name: str = ""):
        self.name = name
        self.old_sys = old_sys
        self.new_independents = list(new_independents)
        self.new_dependents = list(new_dependents)
        self.residual = residual
        self.scope = scope
        self.new_indep_syms = tuple(s for s, _ in new_independents)
        self.new_dep_syms = tuple(s for s, _, _ in new_dependents)

    def describe(self) -> str:
        lines = []
        for s, d in self.new_independents:
            lines.append(f"{s.name} = {to_text(nf(d))}")
        for s, old, rel in self.new_dependents:
            lines.append(f"{old.name} = {to_text(nf(rel))}")
        return "\n".join(lines)


def invariant_surface_report(m: SimilarityMap, v: VectorField) -> ResidualReport:
    """Check v annihilates the similarity variables and surfaces.

    For each new independent tau: v(tau_def) = 0.  For each dependent
    relation u = E(x, F(tau)): phi_u[deps -> E] - sum_i xi_i dE/dx_i = 0,
    with the new-dependent jets held constant.
    """
    entries = []
    idx = 0
    dep_bind = {
        Jet(old): nf(rel) for _, old, rel in m.new_dependents
    }
    for s, d in m.new_independents:
        idx += 1
        entries.append((idx, nf(v.act_on(d))))
    for _, old, rel in m.new_dependents:
        idx += 1
        phi = substitute(v.phis[old], dep_bind)
        drift = Num(0)
        for i in m.old_sys.independents:
            xi = v.xis[i]
            if isinstance(xi, Num) and xi.q == 0:
                continue
            xi = substitute(xi, dep_bind)
            drift = drift + mul(xi, partial_diff(rel, Var(i)))
        entries.append((idx, nf(phi - drift)))
    return ResidualReport(entries)


# ---------------------------------------------------------------------------
# Push-forward
# ---------------------------------------------------------------------------


def _map_derivative_rule(m: SimilarityMap, jac, i: Symbol):
    taus = m.new_indep_syms

    def rule(a):
        if isinstance(a, Var):
            if a.sym is i:
                return Num(1)
            return None
        if isinstance(a, Jet):
            if a.dep in m.new_dep_syms:
                parts = []
                for l, tau in enumerate(taus):
                    J = jac[(i, tau)]
                    if isinstance(J, Num) and J.q == 0:
                        continue
                    parts.append(mul(J, a.bump(tau)))
                return add(*parts) if parts else Num(0)
            raise PushForwardError(
                f"old jet {to_text(a)} inside a map relation"
            )
        return None

    return rule


def push_forward(sys: PdeSystem, m: SimilarityMap) -> ReducedSystem:
    """Rewrite the system in the similarity variables.

    Substitutes the dependent relations, applies the chain rule through the
    new independents, inverts the tau definitions to eliminate the old
    space variables, and cancels the residual variable from each equation
    (error if it does not cancel).
    """
    jac = {}
    for i in sys.independents:
        for tau, taudef in m.new_independents:
            jac[(i, tau)] = nf(partial_diff(taudef, Var(i)))
    rules = {i: _map_derivative_rule(m, jac, i) for i in sys.independents}

    repl: dict[Jet, Expr] = {}
    for _, old, rel in m.new_dependents:
        repl[Jet(old)] = nf(rel)

    def replacement(jet: Jet) -> Expr:
        got = repl.get(jet)
        if got is not None:
            return got
        sym = max((s for s, k in jet.orders if k), key=lambda s: s.sort_key())
        lower = dict(jet.orders)
        lower[sym] -= 1
        prev = replacement(Jet(jet.dep, lower))
        out = nf(derive(prev, rules[sym]))
        repl[jet] = out
        return out

    inversions = _invert_taus(sys, m)
    transformed = []
    for eq in sys.equations:
        bind = {}
        for j in sorted(atoms(eq, Jet), key=lambda a: a.skey()):
            if j.dep in {old for _, old, _ in m.new_dependents}:
                bind[j] = replacement(j)
        e = substitute(eq, bind)
        e = substitute(e, inversions)
        transformed.append(nf(e))
    # residual cancellation may need the other transformed equations (the
    # system holds on solutions); iterate with rewrite rules drawn from the
    # equations already reduced
    reduced = []
    pending = list(transformed)
    rules: dict = {}
    last_error = None
    for _round in range(len(pending) + 2):
        progressed = False
        still = []
        for e in pending:
            e2 = _rewrite_with(e, rules)
            try:
                out = _cancel_residual(e2, m)
            except PushForwardError as err:
                last_error = err
                still.append(e)
                continue
            progressed = True
            if out is not None:
                reduced.append(out)
                rule = _rule_from(out)
                if rule:
                    rules[rule[0]] = rule[1]
        pending = still
        if not pending or not progressed:
            break
    if pending:
        raise last_error or PushForwardError("residual variable does not cancel")
    return ReducedSystem(m.new_indep_syms, m.new_dep_syms, reduced)


def _rule_from(eq: Expr):
    """A rewrite rule (leading jet -> rhs) from a reduced equation."""
    jets = sorted(atoms(eq, Jet), key=lambda j: (j.order, j.skey()))
    for j in reversed(jets):
        groups = collect(eq, [j])
        coeff = groups.get(j)
        if coeff is None or atoms(coeff, Jet):
            continue
        if set(groups) - {j, Num(1)}:
            continue
        rest = groups.get(Num(1), Num(0))
        return j, nf(mul(Num(-1), rest, pow_int(coeff, -1)))
    return None


def _rewrite_with(e: Expr, rules: dict) -> Expr:
    if not rules:
        return nf(e)
    derived = dict(rules)

    def rhs_for(jet):
        got = derived.get(jet)
        if got is not None:
            return got
        for lead in list(rules):
            if jet.contains_index(lead):
                cur_jet, cur = lead, derived[lead]
                for sym, k in jet.index_minus(lead):
                    for _ in range(k):
                        cur_jet = cur_jet.bump(sym)
                        nxt = derived.get(cur_jet)
                        if nxt is None:
                            nxt = nf(total_diff(cur, sym))
                            derived[cur_jet] = nxt
                        cur = nxt
                return cur
        return None

    e = nf(e)
    for _ in range(200):
        target = None
        for j in sorted(atoms(e, Jet), key=lambda j: (-j.order, j.skey())):
            if any(j.contains_index(lead) and j != lead or j == lead
                   for lead in rules):
                if any(j.contains_index(lead) for lead in rules):
                    target = j
                    break
        if target is None:
            return e
        e = substitute(e, {target: rhs_for(target)})
    raise PushForwardError("nonterminating reduction among reduced equations")


def _invert_taus(sys: PdeSystem, m: SimilarityMap) -> dict:
    """Solve each tau definition for one old independent (linear case)."""
    used = set()
    bind = {}
    for tau, taudef in m.new_independents:
        choice = None
        for z in sys.independents:
            if z is m.residual or z in used:
                continue
            a = nf(partial_diff(taudef, Var(z)))
            if isinstance(a, Num) and a.q == 0:
                continue
            if not is_zero(partial_diff(a, Var(z))):
                raise PushForwardError(
                    f"{tau.name} is nonlinear in {z.name}"
                )
            choice = (z, a)
            break
        if choice is None:
            raise PushForwardError(
                f"cannot invert the definition of {tau.name}"
            )
        z, a = choice
        used.add(z)
        rest = nf(taudef - mul(a, Var(z)))
        bind[Var(z)] = nf(mul(Var(tau) - rest, pow_int(a, -1)))
    return bind


def _residual_atoms(e: Expr, residual: Symbol) -> bool:
    from .expr import contains

    return contains(nf(e), Var(residual))


def _cancel_residual(e: Expr, m: SimilarityMap):
    """Factor the residual variable out of a pushed-forward equation."""
    e = nf(e)
    if isinstance(e, Num):
        if e.q:
            raise PushForwardError("equation reduces to a nonzero constant")
        return None
    targets = [Var(s) for s in m.new_indep_syms]
    for s in m.new_dep_syms:
        targets.extend(
            a for a in atoms(e, Jet) if a.dep is s
        )
    groups = collect(e, targets)
    if not groups:
        return None
    # reference coefficient: prefer single-term coefficients, largest mono
    def single(c):
        return len(tmap_of(nf(c))) == 1

    candidates = sorted(
        groups.items(), key=lambda kv: (not single(kv[1]), kv[0].skey())
    )
    last_left = None
    for _, kappa0 in candidates:
        if not single(kappa0):
            continue
        inv = pow_int(kappa0, -1)
        terms = []
        ok = True
        for mono, kappa in sorted(groups.items(), key=lambda kv: kv[0].skey()):
            r = nf(mul(kappa, inv))
            if _residual_atoms(r, m.residual):
                r = _constant_value(r, m.residual)
                if r is None:
                    ok = False
                    last_left = nf(mul(kappa, inv))
                    break
            terms.append(mul(r, mono))
        if ok:
            return nf(add(*terms))
    raise PushForwardError(
        "residual variable does not cancel; leftover "
        + (to_text(last_left) if last_left is not None else "unknown"),
        leftover=last_left,
    )


def _split_residual(e: Expr, residual: Symbol):
    from .expr import contains

    free_terms = []
    res_terms = []
    t = tmap_of(nf(e))
    for mono, c in t.items():
        piece = mul(Num(c), *[
            (g if k == 1 else Pow(g, k)) for g, k in mono
        ])
        if any(contains(g, Var(residual)) for g, _ in mono):
            res_terms.append(piece)
        else:
            free_terms.append(piece)
    return (add(*free_terms) if free_terms else Num(0),
            add(*res_terms) if res_terms else Num(0))


def _constant_value(r: Expr, residual: Symbol):
    """If r is independent of the residual variable (possibly written with
    cancelling residual structure), return its residual-free value; else
    None."""
    from .expr import contains, tmap_mul

    free, res = _split_residual(r, residual)
    if is_zero(res):
        return nf(free)
    # clear residual-bearing denominators of the residual part
    t = tmap_of(nf(res))
    denom = Num(1)
    for _ in range(12):
        need = {}
        for mono, _c in t.items():
            for g, k in mono:
                if k < 0 and contains(g, Var(residual)):
                    cur = need.get(g.skey())
                    if cur is None or -k > cur[1]:
                        need[g.skey()] = [g, -k]
        if not need:
            break
        for _, (g, kk) in sorted(need.items()):
            for _ in range(kk):
                t = tmap_mul(t, tmap_of(g))
                denom = nf(mul(denom, g))
    numer = nf(rebuild_tmap(t))
    # collect numerator and denominator over residual atoms; a constant
    # ratio means numer = c * denom coefficient-wise
    res_atoms = sorted(
        {a for a in atoms(numer) | atoms(denom)
         if contains(a, Var(residual)) or a == Var(residual)},
        key=lambda a: a.skey(),
    )
    try:
        gn = collect(numer, res_atoms)
        gd = collect(denom, res_atoms)
    except Exception:
        return None
    ref = None
    for mono in sorted(gd, key=lambda m: m.skey()):
        ref = mono
        break
    if ref is None or ref not in gn:
        probe = next(iter(sorted(gn, key=lambda m: m.skey())), None)
        if probe is not None and probe not in gd:
            return None
        return None
    c = nf(mul(gn[ref], pow_int(gd[ref], -1)))
    if contains(c, Var(residual)):
        return None
    if is_zero(numer - mul(c, denom)):
        return nf(free + c)
    return None


def rebuild_tmap(t):
    from .expr import rebuild

    return rebuild(t)


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


def leading_coefficient(e: Expr) -> Expr:
    from .expr import _mono_key, rebuild

    t = tmap_of(nf(e))
    if not t:
        return Num(0)
    lead = min(t, key=_mono_key)
    return rebuild({lead: t[lead]})


def match_up_to_factor(a: Expr, b: Expr) -> bool:
    """a and b agree up to an overall nonzero factor free of the variables."""
    a = nf(a)
    b = nf(b)
    az = is_zero(a)
    bz = is_zero(b)
    if az or bz:
        return az and bz
    la = leading_coefficient(a)
    lb = leading_coefficient(b)
    return is_zero(mul(a, lb) - mul(b, la))


def verify_reduction(sys: PdeSystem, m: SimilarityMap, claimed) -> ResidualReport:
    """Push the system forward and match each claimed equation (up to an
    overall nonzero factor, and modulo the reduced system's own relations)
    against a computed one."""
    computed = push_forward(sys, m)
    rules = {}
    for e in computed.equations:
        rule = _rule_from(e)
        if rule:
            rules[rule[0]] = rule[1]
    entries = []
    remaining = list(computed.equations)
    for idx, c in enumerate(claimed, 1):
        cr = _rewrite_with(c, rules)
        hit = None
        for d in remaining:
            if match_up_to_factor(c, d) or match_up_to_factor(cr, d):
                hit = d
                break
        if hit is not None:
            remaining.remove(hit)
            entries.append((idx, Num(0)))
        else:
            diffs = [nf(mul(cr, leading_coefficient(d)) - mul(d, leading_coefficient(cr)))
                     for d in computed.equations]
            best = min(diffs, key=lambda e: len(tmap_of(e)), default=nf(cr))
            entries.append((idx, best))
    return ResidualReport(entries)


def verify_solution(system, candidate: dict) -> ResidualReport:
    """Substitute explicit dependent expressions and check all residuals."""
    independents = system.independents
    equations = system.equations
    cand = {s: nf(e) for s, e in candidate.items()}
    entries = []
    for idx, eq in enumerate(equations, 1):
        bind = {}
        for j in sorted(atoms(eq, Jet), key=lambda a: a.skey()):
            if j.dep not in cand:
                continue
            d = cand[j.dep]
            for s, k in j.orders:
                for _ in range(k):
                    d = total_diff(d, s)
            bind[j] = nf(d)
        entries.append((idx, nf(substitute(eq, bind))))
    return ResidualReport(entries)


# ---------------------------------------------------------------------------
# Automatic characteristic reduction (tractable class)
# ---------------------------------------------------------------------------


def _linear_in(e: Expr, watom) -> tuple:
    """e = alpha*w + beta with alpha, beta free of w; error otherwise."""
    groups = collect(e, [watom])
    alpha = groups.get(watom, Num(0))
    beta = groups.get(Num(1), Num(0))
    if set(groups) - {watom, Num(1)}:
        raise TractabilityError(
            f"not linear in {to_text(watom)}: {to_text(e)}"
        )
    return nf(alpha), nf(beta)


def _const_only(e: Expr) -> bool:
    for a in atoms(e):
        if isinstance(a, Var):
            if a.sym.kind in (Kind.INDEPENDENT, Kind.DEPENDENT):
                return False
        elif isinstance(a, Jet):
            return False
        elif isinstance(a, (FunApp, Fn, Inte, PowSym)):
            return False
    return True


def _only_in(e: Expr, allowed_var: Symbol) -> bool:
    for a in atoms(e):
        if isinstance(a, Var):
            if a.sym.kind is Kind.INDEPENDENT and a.sym is not allowed_var:
                return False
            if a.sym.kind is Kind.DEPENDENT:
                return False
        elif isinstance(a, Jet):
            return False
        elif isinstance(a, FunApp):
            if any(
                (x.sym if isinstance(x, Var) else x.dep) is not allowed_var
                for x in a.args
            ):
                return False
    return True


def _integrating_factor(alpha: Expr, xi_r: Expr, r: Symbol) -> Expr:
    """mu = exp(-int alpha/xi_r dr) in closed form."""
    if isinstance(nf(alpha), Num) and nf(alpha).q == 0:
        return Num(1)
    ratom = Var(r)
    a1, a0 = _linear_in(xi_r, ratom)   # xi_r = a1*r + a0
    if not (_const_only(a1) and _const_only(a0)):
        raise TractabilityError("coefficients of the residual ODE are not constant")
    if not _const_only(alpha):
        raise TractabilityError(
            f"nonconstant linear coefficient {to_text(alpha)}"
        )
    if is_zero(a1):
        # int alpha/a0 dr = (alpha/a0) r
        return fn_exp(nf(mul(Num(-1), alpha, pow_int(a0, -1), ratom)))
    expo = nf(mul(Num(-1), alpha, pow_int(a1, -1)))
    base = nf(xi_r)
    if isinstance(expo, Num) and expo.q.denominator == 1:
        return pow_int(base, int(expo.q))
    return pow_sym(base, expo)


def closed_integral(e: Expr, r: Symbol) -> Expr:
    """Antiderivative in r: closed forms where the rules reach, otherwise an
    antiderivative head (always sound)."""
    ratom = Var(r)
    t = tmap_of(nf(e))
    parts = []
    for mono, c in t.items():
        parts.append(_integrate_term(mono, c, r, ratom))
    return add(*parts) if parts else Num(0)


def _integrate_term(mono, c, r, ratom):
    k = 0
    power = None       # (base, expo, a1, a0) for (a1*r+a0)^expo
    app = None
    rest = []
    whole = mul(Num(c), *[(g if kk == 1 else Pow(g, kk)) for g, kk in mono])
    for g, kk in mono:
        if g == ratom:
            k = kk
            continue
        contains_r = _residual_atoms(g, r)
        if not contains_r:
            rest.append((g, kk))
            continue
        if isinstance(g, PowSym) or (isinstance(g, Sum) and kk != 0):
            base = g.base if isinstance(g, PowSym) else g
            expo = g.expo if isinstance(g, PowSym) else Num(kk)
            try:
                a1, a0 = _linear_in(base, ratom)
            except TractabilityError:
                return Inte(whole, r)
            if not (_const_only(a1) and _const_only(a0) and _const_only(expo)):
                return Inte(whole, r)
            if power is not None:
                return Inte(whole, r)
            power = (base, expo if isinstance(g, PowSym) else Num(kk), a1, a0)
            continue
        if isinstance(g, FunApp) and kk == 1:
            pos = [idx for idx, x in enumerate(g.args)
                   if (x.sym if isinstance(x, Var) else x.dep) is r]
            if len(pos) == 1 and g.dorders[pos[0]] >= 1 and app is None:
                app = (g, pos[0])
                continue
            return Inte(whole, r)
        return Inte(whole, r)
    cof = mul(Num(c), *[(g if kk == 1 else Pow(g, kk)) for g, kk in rest])
    if app is not None and power is None and k >= 0:
        return _tower_integral(cof, k, app, r, ratom)
    if app is not None:
        return Inte(whole, r)
    if power is None:
        if k == -1:
            return mul(cof, fn_log(ratom))
        return mul(cof, Num(Fraction(1, k + 1)), pow_int(ratom, k + 1))
    base, expo, a1, a0 = power
    if is_zero(a1):
        return Inte(whole, r)
    # rewrite r^k over the base: r = (base - a0)/a1
    out = []
    shifted = nf(mul(pow_int(a1, -1), nf(base) - a0))
    # (shifted)^k expands into powers of base
    expansion = tmap_of(pow_int(shifted, k)) if k else {(): Fraction(1)}
    for mono2, c2 in expansion.items():
        j = 0
        extra = []
        for g, kk in mono2:
            if g == nf(base) or (isinstance(g, Sum) and g == nf(base)):
                j = kk
            else:
                extra.append((g, kk))
        cfac = mul(Num(c2), *[(g if kk == 1 else Pow(g, kk)) for g, kk in extra])
        q = nf(expo + Num(j))
        if isinstance(q, Num) and q.q == -1:
            out.append(mul(cof, cfac, pow_int(a1, -1), fn_log(base)))
        else:
            out.append(
                mul(cof, cfac, pow_int(a1, -1), pow_int(nf(q + Num(1)), -1),
                    _power_of(base, nf(q + Num(1))))
            )
    return add(*out)


def _power_of(base, expo):
    if isinstance(expo, Num) and expo.q.denominator == 1:
        return pow_int(base, int(expo.q))
    return pow_sym(base, expo)


def _tower_integral(cof, k, app, r, ratom):
    g, pos = app
    lower = list(g.dorders)
    lower[pos] -= 1
    lowered = FunApp(g.head, lower, g.args)
    if k == 0:
        return mul(cof, lowered)
    inner = _integrate_term(
        tuple(([(ratom, k - 1)] if k > 1 else []) + [(lowered, 1)]),
        Fraction(1), r, ratom,
    )
    return mul(cof, add(mul(pow_int(ratom, k), lowered), mul(Num(-k), inner)))


def characteristic_reduce(sys: PdeSystem, v: VectorField, residual: Symbol = None,
                          names=None, scope: Scope = None) -> SimilarityMap:
    """Integrate the characteristic system for the tractable class.

    Requires: the residual's xi depends on the residual alone (degree <= 1),
    each other xi is linear in its own variable with a constant slope and a
    drift in the residual only, and each phi is linear in its own dependent
    with constant slope (no coupling between dependents)."""
    if residual is None:
        for s in reversed(sys.independents):
            if not is_zero(v.xis[s]):
                residual = s
                break
    if residual is None:
        raise TractabilityError("the field does not move any independent")
    r = residual
    xi_r = nf(v.xis[r])
    if not _only_in(xi_r, r):
        raise TractabilityError(
            f"xi_{r.name} involves more than {r.name}: {to_text(xi_r)}"
        )
    scope = scope if scope is not None else sys.scope.child()
    new_indeps = []
    new_deps = []
    names = dict(names or {})

    def fresh(name_default, i):
        return names.get(name_default, f"{name_default}{i}")

    idx = 0
    for w in sys.independents:
        if w is r:
            continue
        idx += 1
        watom = Var(w)
        xi_w = nf(v.xis[w])
        alpha, beta = _linear_in(xi_w, watom)
        if not _only_in(beta, r):
            raise TractabilityError(
                f"drift of {w.name} involves other variables: {to_text(beta)}"
            )
        mu = _integrating_factor(alpha, xi_r, r)
        integrand = nf(mul(mu, beta, pow_int(xi_r, -1)))
        quad = closed_integral(integrand, r)
        tau = scope.independent(fresh("tau", idx))
        new_indeps.append((tau, nf(mul(watom, mu) - quad)))
    didx = 0
    for u in sys.dependents:
        didx += 1
        uatom = Jet(u)
        phi = nf(v.phis[u])
        alpha, beta = _linear_in(phi, uatom)
        for other in sys.dependents:
            if other is not u and not is_zero(partial_diff(phi, Jet(other))):
                raise TractabilityError(
                    f"phi_{u.name} couples to {other.name}"
                )
        if not _only_in(beta, r):
            raise TractabilityError(
                f"phi_{u.name} drift involves other variables: {to_text(beta)}"
            )
        mu = _integrating_factor(alpha, xi_r, r)
        # invariant: F = u*mu - int(mu*beta/xi_r)
        integrand = nf(mul(mu, beta, pow_int(xi_r, -1)))
        quad = closed_integral(integrand, r)
        newdep = scope.dependent(fresh("F", didx))
        relation = nf(mul(Jet(newdep) + quad, pow_int(mu, -1)))
        new_deps.append((newdep, u, relation))
    m = SimilarityMap(sys, new_indeps, new_deps, r, scope)
    report = invariant_surface_report(m, v)
    if not report.passed:
        raise ReductionError(
            "characteristic reduction failed its invariant-surface check:\n"
            + str(report)
        )
    return m
