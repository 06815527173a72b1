"""Commutator tables, Virasoro classification, and Kac-Moody weights."""

from __future__ import annotations

from fractions import Fraction

from .calculus import collect, partial_diff, substitute
from .expr import (
    Expr,
    FunApp,
    Num,
    Var,
    atoms,
    is_zero,
    mul,
    nf,
    pow_int,
)
from .printer import to_text
from .symbols import Kind, Scope, Symbol
from .solver import _linear_rows, solve_linear
from .vector_fields import VectorField, commutator


class Family:
    """A function-slot family: a field template linear in an opaque head."""

    def __init__(self, label: str, head: Symbol, field: VectorField):
        self.label = label
        self.head = head
        self.field = field
        self._defining = self._find_defining_component()

    def _find_defining_component(self):
        """A component of the form c * monomial * head (no derivatives)."""
        from .expr import tmap_of

        for coord, comp in self.field.components():
            t = tmap_of(nf(comp))
            if len(t) != 1:
                continue
            ((mono, c),) = t.items()
            apps = [
                (g, k) for g, k in mono
                if isinstance(g, FunApp) and g.head is self.head
            ]
            if len(apps) != 1 or apps[0][1] != 1 or sum(apps[0][0].dorders):
                continue
            cof = [(g, k) for g, k in mono if g is not apps[0][0]]
            if any(isinstance(g, FunApp) for g, _ in cof):
                continue
            return _coord_sym(coord), apps[0][0], cof, c
        raise ValueError(
            f"family {self.label} has no defining component linear in "
            f"{self.head.name}"
        )

    @property
    def argument_vars(self):
        return tuple(self.head.args)

    def instantiate(self, value) -> VectorField:
        """Field with the head replaced by another head or an expression."""
        swap_head = isinstance(value, Symbol)

        def repl(e):
            bind = {}
            for a in atoms(e, FunApp):
                if a.head is not self.head:
                    continue
                if swap_head:
                    bind[a] = FunApp(value, a.dorders, a.args)
                else:
                    d = nf(value)
                    for pos, k in enumerate(a.dorders):
                        for _ in range(k):
                            d = partial_diff(d, _coord_atom(self.head.args[pos]))
                    bind[a] = d
            return substitute(e, bind) if bind else nf(e)

        return VectorField(
            self.field.independents,
            self.field.dependents,
            {s: repl(e) for s, e in self.field.xis.items()},
            {s: repl(e) for s, e in self.field.phis.items()},
        )

    def match(self, v: VectorField):
        """If v = self.field with head -> A, return the argument A."""
        coord, app, cof, c = self._defining
        comp = v.component(coord)
        denom = mul(Num(c), *[
            (g if k == 1 else pow_int(g, k)) for g, k in cof
        ])
        candidate = nf(mul(comp, pow_int(denom, -1)))
        if _has_fraction_of_vars(candidate):
            return None
        if self.instantiate(candidate) == v:
            return nf(candidate)
        return None


def _coord_sym(coord):
    from .expr import Jet, Var

    if isinstance(coord, Var):
        return coord.sym
    if isinstance(coord, Jet):
        return coord.dep
    return coord


def _coord_atom(sym: Symbol):
    from .expr import Jet, Var

    return Jet(sym) if sym.kind is Kind.DEPENDENT else Var(sym)


def _has_fraction_of_vars(e: Expr) -> bool:
    """True if e contains negative powers of base variables (a failed
    monomial division)."""
    from .expr import Jet, Sum, tmap_of

    for mono, _ in tmap_of(nf(e)).items():
        for g, k in mono:
            if k < 0:
                if isinstance(g, (Var,)) and g.sym.kind in (
                    Kind.INDEPENDENT, Kind.DEPENDENT
                ):
                    return True
                if isinstance(g, Jet):
                    return True
                if isinstance(g, Sum):
                    syms = {
                        a.sym
                        for a in atoms(g, Var)
                        if a.sym.kind in (Kind.INDEPENDENT, Kind.DEPENDENT)
                    }
                    if syms:
                        return True
    return False


class TableEntry:
    """One computed commutator, expanded against the basis."""

    def __init__(self, i, j, kind, data=None, field=None):
        self.i = i
        self.j = j
        self.kind = kind          # "zero" | "combo" | "family" | "non-closing"
        self.data = data          # combo: {label: coeff}; family: (label, arg)
        self.field = field        # the computed bracket as a field

    def describe(self) -> str:
        if self.kind == "zero":
            return "0"
        if self.kind == "combo":
            parts = []
            for label, c in self.data.items():
                parts.append(f"({to_text(c)}) {label}")
            return " + ".join(parts)
        if self.kind == "family":
            label, arg = self.data
            return f"{label}({to_text(arg)})"
        return f"non-closing: {self.field}"

    def to_json(self):
        out = {"i": self.i, "j": self.j, "kind": self.kind}
        if self.kind == "combo":
            out["expansion"] = {k: to_text(v) for k, v in self.data.items()}
        elif self.kind == "family":
            out["family"] = self.data[0]
            out["argument"] = to_text(self.data[1])
        elif self.kind == "non-closing":
            out["field"] = self.field.to_json()
        return out


class CommutatorTable:
    def __init__(self, labels, entries):
        self.labels = list(labels)
        self.entries = dict(entries)   # (i, j) i<j -> TableEntry

    def entry(self, li, lj) -> TableEntry:
        i = self.labels.index(li)
        j = self.labels.index(lj)
        if i == j:
            return TableEntry(i, j, "zero")
        if i < j:
            return self.entries[(i, j)]
        e = self.entries[(j, i)]
        flipped = TableEntry(j, i, e.kind, e.data, e.field)
        if e.kind == "combo":
            flipped.data = {k: nf(-v) for k, v in e.data.items()}
        elif e.kind == "family":
            flipped.data = (e.data[0], nf(-e.data[1]))
        elif e.kind == "non-closing":
            flipped.field = e.field.scale(Num(-1))
        return flipped

    def grid_text(self) -> str:
        lines = []
        for (i, j), e in sorted(self.entries.items()):
            lines.append(
                f"[{self.labels[i]}, {self.labels[j]}] = {e.describe()}"
            )
        return "\n".join(lines)

    def to_json(self):
        return {
            "labels": self.labels,
            "entries": [e.to_json() for _, e in sorted(self.entries.items())],
        }


class BasisItem:
    """A table basis item: plain field or function family."""

    def __init__(self, label, field=None, family=None):
        self.label = label
        self.family = family
        self.field = field if field is not None else None

    @property
    def is_family(self):
        return self.family is not None


def _fresh_family_head(scope: Scope, family: Family, suffix: str) -> Symbol:
    base = family.head.name
    n = 0
    while True:
        n += 1
        name = f"{base}{n}"
        if name not in scope:
            return scope.function(name, family.argument_vars)


def table(items, nonzero_params=()) -> CommutatorTable:
    """Commutator table over plain fields and families.

    Families enter instantiated at fresh opaque heads; each bracket is
    expanded in the basis (rational-function coefficients in parameters) or
    matched against a family argument; leftovers are reported non-closing.
    """
    labels = [it.label for it in items]
    scope = None
    concrete = []
    for it in items:
        if it.is_family:
            if scope is None:
                scope = Scope(parent=_family_scope(it.family))
            head = _fresh_family_head(scope, it.family, "_")
            concrete.append(it.family.instantiate(head))
        else:
            concrete.append(it.field)
    plain_fields = [it.field for it in items if not it.is_family]
    plain_labels = [it.label for it in items if not it.is_family]
    entries = {}
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            br = commutator(concrete[i], concrete[j])
            entries[(i, j)] = _classify_bracket(
                i, j, br, items, plain_fields, plain_labels
            )
    return CommutatorTable(labels, entries)


def _family_scope(family: Family) -> Scope:
    sc = Scope()
    return sc


def _classify_bracket(i, j, br, items, plain_fields, plain_labels):
    if br.is_zero_field():
        return TableEntry(i, j, "zero")
    # family match first (brackets involving family heads)
    has_heads = any(
        atoms(c, FunApp) for _, c in br.components()
    )
    if has_heads:
        for it in items:
            if not it.is_family:
                continue
            arg = it.family.match(br)
            if arg is not None:
                return TableEntry(i, j, "family", (it.label, arg), br)
        return TableEntry(i, j, "non-closing", None, br)
    if plain_fields:
        sys_like = br
        coords = list(br.independents) + list(br.dependents)
        rows = []
        for s in coords:
            cols = [f.component(s) for f in plain_fields]
            rows.extend(_linear_rows(cols, br.component(s), None))
        sol = solve_linear(rows, len(plain_fields))
        if sol is not None:
            combo = {
                lbl: c for lbl, c in zip(plain_labels, sol) if not is_zero(c)
            }
            return TableEntry(i, j, "combo", combo, br)
    return TableEntry(i, j, "non-closing", None, br)


class FamilyClassification:
    def __init__(self, label, verdict, lam=None, witness=None):
        self.label = label
        self.verdict = verdict      # "abelian" | "centerless-virasoro" | "other"
        self.lam = lam
        self.witness = witness

    def describe(self):
        if self.verdict == "abelian":
            return f"{self.label}: NOT Virasoro (abelian)"
        if self.verdict == "centerless-virasoro":
            return f"{self.label}: centerless Virasoro (lambda = {to_text(self.lam)})"
        return f"{self.label}: other ({self.witness})"

    def to_json(self):
        out = {"family": self.label, "verdict": self.verdict}
        if self.lam is not None:
            out["lambda"] = to_text(self.lam)
        return out


def classify_family(family: Family) -> FamilyClassification:
    """Compute [V(f1), V(f2)] and match 0 or V(lam*(f1 f2' - f2 f1'))."""
    scope = Scope()
    argvars = family.argument_vars
    if len(argvars) != 1:
        # multi-argument families are classified only against 0
        heads = [scope.function(f"{family.head.name}{i}", argvars) for i in (1, 2)]
        br = commutator(family.instantiate(heads[0]), family.instantiate(heads[1]))
        if br.is_zero_field():
            return FamilyClassification(family.label, "abelian", witness=br)
        return FamilyClassification(family.label, "other", witness=br)
    w = argvars[0]
    f1 = scope.function("fam1", argvars)
    f2 = scope.function("fam2", argvars)
    br = commutator(family.instantiate(f1), family.instantiate(f2))
    if br.is_zero_field():
        return FamilyClassification(family.label, "abelian", witness=br)
    arg = family.match(br)
    if arg is not None:
        lam = _virasoro_lambda(arg, f1, f2, w)
        if lam is not None:
            return FamilyClassification(
                family.label, "centerless-virasoro", lam=lam, witness=br
            )
    return FamilyClassification(family.label, "other", witness=br)


def _app(head, dorders, args):
    return FunApp(head, dorders, args)


def _virasoro_lambda(arg, f1, f2, w):
    """arg == lam*(f1 f2' - f2 f1') for a rational-function lam?"""
    watom = Var(w)
    a1 = _app(f1, (0,), (watom,))
    a2 = _app(f2, (0,), (watom,))
    d1 = _app(f1, (1,), (watom,))
    d2 = _app(f2, (1,), (watom,))
    apps = sorted(atoms(arg, FunApp), key=lambda a: a.skey())
    try:
        groups = collect(arg, apps)
    except Exception:
        return None
    lam = None
    for mono, coeff in groups.items():
        key = nf(mono)
        if key == nf(mul(a1, d2)):
            lam = coeff
        elif key == nf(mul(a2, d1)):
            continue
        else:
            return None
    if lam is None:
        return None
    want = nf(mul(lam, a1, d2) - mul(lam, a2, d1))
    if is_zero(arg - want):
        return nf(lam)
    return None


def kac_moody_check(acting: Family, module: Family, max_power: int = 3):
    """Match [V_a(f), V_b(g)] = V_b(f g' - mu g f'); confirm the weight on
    monomials t^n, t^m for n, m in 0..max_power.

    Returns the weight mu, or None (with the zero bracket reported as a
    vacuous match when the bracket vanishes identically).
    """
    if acting.argument_vars != module.argument_vars or len(acting.argument_vars) != 1:
        return None, None
    w = acting.argument_vars[0]
    scope = Scope()
    f = scope.function("act", (w,))
    g = scope.function("mod", (w,))
    br = commutator(acting.instantiate(f), module.instantiate(g))
    if br.is_zero_field():
        return None, br
    arg = module.match(br)
    if arg is None:
        return None, br
    watom = Var(w)
    af = _app(f, (0,), (watom,))
    ag = _app(g, (0,), (watom,))
    df = _app(f, (1,), (watom,))
    dg = _app(g, (1,), (watom,))
    groups = collect(arg, [af, ag, df, dg])
    c1 = groups.get(nf(mul(af, dg)))
    c2 = groups.get(nf(mul(ag, df)))
    if c1 is None or not is_zero(c1 - Num(1)) or len(groups) > 2:
        return None, br
    mu = nf(-c2) if c2 is not None else Num(0)
    # confirm on monomial instantiations
    for n in range(max_power + 1):
        for m in range(max_power + 1):
            lhs = commutator(
                acting.instantiate(pow_int(watom, n)),
                module.instantiate(pow_int(watom, m)),
            )
            weight = nf(Num(m) - mul(mu, Num(n)))
            target = (
                pow_int(watom, n + m - 1) if n + m >= 1 else Num(0)
            )
            rhs = module.instantiate(nf(mul(weight, target)))
            if not (lhs - rhs).is_zero_field():
                return None, br
    return mu, br


def check_jacobi(fields, samples=None) -> list:
    """All Jacobi sums over concrete fields (families pre-instantiated).

    Returns a list of ((i, j, k), ok) for i < j < k.
    """
    out = []
    n = len(fields)
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                a, b, c = fields[i], fields[j], fields[k]
                s = (
                    commutator(commutator(a, b), c)
                    + commutator(commutator(b, c), a)
                    + commutator(commutator(c, a), b)
                )
                out.append(((i, j, k), s.is_zero_field()))
    return out


def instantiate_samples(items, polys=None):
    """Concrete fields from basis items, families taken at polynomial
    samples of their argument (default 1, t, t^2, t^3)."""
    out = []
    for it in items:
        if not it.is_family:
            out.append((it.label, it.field))
            continue
        w = it.family.argument_vars[0] if len(it.family.argument_vars) == 1 else None
        if w is None:
            continue
        watom = Var(w)
        powers = polys if polys is not None else [
            Num(1), watom, pow_int(watom, 2), pow_int(watom, 3)
        ]
        for p in powers:
            out.append(
                (f"{it.label}({to_text(p)})", it.family.instantiate(p))
            )
    return out
