"""PDE system declarations, the builtin model registry, and reduction
modulo a system's solved form.
"""

from __future__ import annotations

import json
from importlib import resources

from .calculus import substitute, total_diff
from .expr import Expr, Jet, Num, atoms, is_zero, nf
from .parser import ParseError, parse
from .printer import to_text
from .symbols import Kind, Scope, Symbol


class SystemError(ValueError):
    pass


class ReductionCycleError(SystemError):
    pass


class PdeSystem:
    """A declared system of PDEs with solved leading-derivative forms.

    Equations are expressions whose vanishing defines the system.  The
    solved forms map a leading jet of each equation to the expression it
    equals on solutions; they drive :meth:`reduce_modulo`.
    """

    def __init__(self, name, scope, independents, dependents, parameters,
                 functions, equations, solved=None):
        self.name = name
        self.scope = scope
        self.independents = tuple(independents)
        self.dependents = tuple(dependents)
        self.parameters = tuple(parameters)
        self.functions = tuple(functions)
        self.equations = [nf(e) for e in equations]
        for i, e in enumerate(self.equations):
            if isinstance(e, Num):
                raise SystemError(
                    f"equation {i + 1} of '{name}' is identically "
                    f"{'zero' if e.q == 0 else 'constant'}"
                )
        self._check_declared()
        self.solved = dict(solved) if solved else self._auto_solved_forms()
        self._validate_solved()
        self._derived: dict[Jet, Expr] = dict(self.solved)

    # -- construction helpers ----------------------------------------------
    def _check_declared(self):
        for e in self.equations:
            for j in atoms(e, Jet):
                if j.dep not in self.dependents:
                    raise SystemError(f"undeclared dependent '{j.dep.name}'")

    def _linear_clean_candidates(self, eq: Expr):
        """Jets occurring linearly in eq with a jet-free coefficient."""
        from .calculus import collect

        jets = sorted(atoms(eq, Jet), key=lambda j: j.skey())
        out = []
        for j in jets:
            try:
                groups = collect(eq, [j])
            except Exception:
                continue
            keys = {to_text(k) for k in groups}
            if not keys <= {to_text(Num(1)), to_text(j)}:
                continue
            coeff = groups.get(j)
            if coeff is None:
                continue
            if atoms(coeff, Jet):
                continue
            out.append((j, coeff))
        return out

    def _auto_solved_forms(self):
        solved = {}
        for i, eq in enumerate(self.equations):
            cands = self._linear_clean_candidates(eq)
            if not cands:
                raise SystemError(
                    f"no admissible solved form for equation {i + 1} of "
                    f"'{self.name}'"
                )
            top = max(j.order for j, _ in cands)
            best = [(j, c) for j, c in cands if j.order == top]
            if len(best) > 1:
                names = ", ".join(to_text(j) for j, _ in best)
                raise SystemError(
                    f"solved form for equation {i + 1} of '{self.name}' is "
                    f"ambiguous between {names}; annotate with 'solve'"
                )
            j, coeff = best[0]
            rhs = nf((coeff * j - eq) / coeff)
            solved[j] = rhs
        return solved

    def solve_for(self, jets):
        """Recompute solved forms for the explicitly given leading jets."""
        from .calculus import collect

        jets = list(jets)
        if len(jets) != len(self.equations):
            raise SystemError("need one leading jet per equation")
        solved = {}
        for eq, j in zip(self.equations, jets):
            groups = collect(eq, [j])
            coeff = groups.get(j)
            if coeff is None:
                raise SystemError(f"{to_text(j)} does not occur linearly")
            rest = groups.get(Num(1), Num(0))
            if len(groups) > (2 if Num(1) in groups else 1):
                raise SystemError(f"{to_text(j)} does not occur linearly")
            solved[j] = nf(-rest / coeff)
        self.solved = solved
        self._derived = dict(self.solved)
        self._validate_solved()

    def _validate_solved(self):
        leads = list(self.solved)
        for a in leads:
            for b in leads:
                if a is not b and a.contains_index(b):
                    raise SystemError(
                        f"leading jets overlap: {to_text(a)} is a "
                        f"prolongation of {to_text(b)}"
                    )
        for i, eq in enumerate(self.equations):
            r = self.reduce_modulo(eq)
            if not is_zero(r):
                raise SystemError(
                    f"solved forms do not annihilate equation {i + 1}: "
                    f"residual {to_text(nf(r))}"
                )

    # -- reduction ----------------------------------------------------------
    def _rhs_for(self, jet: Jet) -> Expr:
        cached = self._derived.get(jet)
        if cached is not None:
            return cached
        for lead in self.solved:
            if jet.contains_index(lead):
                delta = jet.index_minus(lead)
                cur_jet, cur = lead, self._derived[lead]
                for sym, k in delta:
                    for _ in range(k):
                        cur_jet = cur_jet.bump(sym)
                        nxt = self._derived.get(cur_jet)
                        if nxt is None:
                            nxt = nf(total_diff(cur, sym))
                            self._derived[cur_jet] = nxt
                        cur = nxt
                return cur
        raise SystemError(f"{to_text(jet)} is not reducible")

    def reducible(self, jet: Jet) -> bool:
        return any(jet.contains_index(lead) for lead in self.solved)

    def reduce_modulo(self, e: Expr) -> Expr:
        """Replace leading jets and their prolongations by solved forms."""
        e = nf(e)
        for _ in range(500):
            target = None
            for j in sorted(atoms(e, Jet), key=lambda j: (-j.order, j.skey())):
                if self.reducible(j):
                    target = j
                    break
            if target is None:
                return e
            e = substitute(e, {target: self._rhs_for(target)})
        raise ReductionCycleError(
            f"reduction does not terminate in '{self.name}'"
        )

    # -- serialization --------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "name": self.name,
            "independents": [s.name for s in self.independents],
            "dependents": [s.name for s in self.dependents],
            "parameters": [
                {"name": s.name, "nonzero": s.nonzero} for s in self.parameters
            ],
            "arbitrary_functions": [
                {"name": s.name, "args": [a.name for a in s.args]}
                for s in self.functions
            ],
            "equations": [to_text(e) for e in self.equations],
            "solved_forms": {
                to_text(j): to_text(r) for j, r in sorted(
                    self.solved.items(), key=lambda kv: kv[0].skey()
                )
            },
        }


# ---------------------------------------------------------------------------
# System DSL
# ---------------------------------------------------------------------------


def _strip_comment(line: str) -> str:
    if "#" in line:
        line = line[: line.index("#")]
    return line.strip()


def parse_function_decl(scope: Scope, text: str):
    """Parse one or more declarations like 'f(t) g(t) N(y,t)'."""
    out = []
    for chunk in text.split():
        name, _, rest = chunk.partition("(")
        name = name.strip()
        if not rest.endswith(")"):
            raise SystemError(f"bad function declaration '{chunk}'")
        argnames = [a.strip() for a in rest[:-1].split(",") if a.strip()]
        args = []
        for a in argnames:
            sym = scope.lookup(a)
            if sym is None or sym.kind not in (Kind.INDEPENDENT, Kind.DEPENDENT):
                raise SystemError(
                    f"function argument '{a}' is not a declared variable"
                )
            args.append(sym)
        out.append(scope.function(name, tuple(args)))
    return out


def load_system(text: str, name_hint: str = None) -> PdeSystem:
    """Load a PDE system from its DSL block."""
    scope = Scope()
    name = name_hint
    independents, dependents, parameters, functions = [], [], [], []
    eq_lines, solve_names = [], []
    for raw in text.splitlines():
        line = _strip_comment(raw)
        if not line:
            continue
        head, _, rest = line.partition(" ")
        rest = rest.strip()
        if head == "system":
            name = rest
        elif head == "independent":
            independents.extend(scope.independent(n) for n in rest.split())
        elif head == "dependent":
            dependents.extend(scope.dependent(n) for n in rest.split())
        elif head == "parameter":
            parts = rest.split()
            nonzero = "nonzero" in parts
            for n in [p for p in parts if p != "nonzero"]:
                parameters.append(scope.parameter(n, nonzero=nonzero))
        elif head == "constant":
            for n in rest.split():
                scope.constant(n)
        elif head == "arbitrary":
            functions.extend(parse_function_decl(scope, rest))
        elif head == "eq":
            eq_lines.append(rest)
        elif head == "solve":
            solve_names.extend(rest.split())
        else:
            raise SystemError(f"unknown system declaration '{head}'")
    if name is None:
        raise SystemError("missing 'system <name>' line")
    equations = []
    for src in eq_lines:
        if "=" in src:
            lhs, _, rhs = src.partition("=")
            e = parse(lhs, scope) - parse(rhs, scope)
        else:
            e = parse(src, scope)
        equations.append(e)
    sys = PdeSystem.__new__(PdeSystem)
    sys.name = name
    sys.scope = scope
    sys.independents = tuple(independents)
    sys.dependents = tuple(dependents)
    sys.parameters = tuple(parameters)
    sys.functions = tuple(functions)
    sys.equations = [nf(e) for e in equations]
    for i, e in enumerate(sys.equations):
        if isinstance(e, Num):
            raise SystemError(f"equation {i + 1} of '{name}' is identically zero")
    sys._check_declared()
    if solve_names:
        jets = [parse(n, scope) for n in solve_names]
        sys.solved = {}
        sys._derived = {}
        sys.solve_for(jets)
    else:
        sys.solved = sys._auto_solved_forms()
        sys._validate_solved()
        sys._derived = dict(sys.solved)
    return sys


# ---------------------------------------------------------------------------
# Builtin registry
# ---------------------------------------------------------------------------

BUILTIN_NAMES = (
    "breaking_soliton",
    "zakharov_strachan",
    "nnv",
    "fokas_nls",
    "sine_gordon_2p1",
    "ldw_2p1",
    "kdv",
    "heat",
    "bs_reduced",
    "bs_case2_reduced",
    "zs_reduced",
)

_CACHE: dict[str, PdeSystem] = {}


def fixture_text(relpath: str) -> str:
    root = resources.files("lsym") / "fixtures" / "v1"
    return (root / relpath).read_text()


def builtin(name: str) -> PdeSystem:
    if name not in BUILTIN_NAMES:
        raise SystemError(
            f"unknown builtin '{name}'; available: {', '.join(BUILTIN_NAMES)}"
        )
    if name not in _CACHE:
        _CACHE[name] = load_system(fixture_text(f"systems/{name}.lsym"))
    return _CACHE[name]


def registry() -> dict:
    return {n: (lambda n=n: builtin(n)) for n in BUILTIN_NAMES}
