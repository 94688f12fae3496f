"""Temporal-logic front end: parsing, mode-automaton synthesis, trace checking.

The accepted fragment is deliberately narrow. A task description consists of
assumption clauses binding each mode to one sensor valuation, a transition
relation over modes written as G(mode -> X mode' | ...), and a GF goal over
mode atoms. Synthesis is therefore graph construction plus shortest-path
replanning, not general reactive game solving; anything outside the template
raises TemplateViolation so the restriction stays visible.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from .core import BitVector, ModeId
from .errors import (
    SpecSyntaxError,
    TemplateViolation,
    UndeclaredAtom,
    UnsynthesizableSpec,
)

# ---------------------------------------------------------------------------
# formulas


@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class TrueLit:
    pass


@dataclass(frozen=True)
class Not:
    operand: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Iff:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Next:
    operand: "Formula"


@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Eventually:
    operand: "Formula"


@dataclass(frozen=True)
class Globally:
    operand: "Formula"


Formula = Union[Atom, TrueLit, Not, And, Or, Implies, Iff, Next, Until, Eventually, Globally]

# precedence: U < (-> <->) < | < & < unary < atom
_PREC = {Until: 1, Implies: 2, Iff: 2, Or: 3, And: 4}
_UNARY_PREC = 5
_ATOM_PREC = 6


def _prec(f: Formula) -> int:
    t = type(f)
    if t in _PREC:
        return _PREC[t]
    if t in (Not, Next, Eventually, Globally):
        return _UNARY_PREC
    return _ATOM_PREC


def format_formula(f: Formula) -> str:
    """Render a formula; parsing the result reproduces the same tree."""
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, TrueLit):
        return "True"
    if isinstance(f, (Not, Next, Eventually, Globally)):
        sym = {Not: "!", Next: "X ", Eventually: "F ", Globally: "G "}[type(f)]
        inner = format_formula(f.operand)
        if _prec(f.operand) < _UNARY_PREC:
            inner = f"({inner})"
        return sym + inner
    sym = {And: "&", Or: "|", Implies: "->", Iff: "<->", Until: "U"}[type(f)]
    p = _prec(f)
    # & and | parse left-associative; -> <-> U parse right-associative
    left_assoc = isinstance(f, (And, Or))
    left = format_formula(f.left)
    right = format_formula(f.right)
    same_chain_left = left_assoc and type(f.left) is type(f)
    same_chain_right = (not left_assoc) and type(f.right) is type(f)
    if _prec(f.left) < p or (_prec(f.left) == p and not same_chain_left):
        left = f"({left})"
    if _prec(f.right) < p or (_prec(f.right) == p and not same_chain_right):
        right = f"({right})"
    return f"{left} {sym} {right}"


def conjuncts(f: Formula) -> list[Formula]:
    """Flatten nested conjunctions into a list."""
    if isinstance(f, And):
        return conjuncts(f.left) + conjuncts(f.right)
    return [f]


def disjuncts(f: Formula) -> list[Formula]:
    if isinstance(f, Or):
        return disjuncts(f.left) + disjuncts(f.right)
    return [f]


def atoms_of(f: Formula) -> set[str]:
    if isinstance(f, Atom):
        return {f.name}
    if isinstance(f, (TrueLit,)):
        return set()
    if isinstance(f, (Not, Next, Eventually, Globally)):
        return atoms_of(f.operand)
    return atoms_of(f.left) | atoms_of(f.right)


# ---------------------------------------------------------------------------
# lexer / parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<lparen>\()|(?P<rparen>\))|(?P<iff><->)|(?P<implies>->)"
    r"|(?P<not>!)|(?P<and>&)|(?P<or>\|)|(?P<name>[A-Za-z_][A-Za-z0-9_]*))"
)

_RESERVED = {"X", "U", "F", "G", "True"}


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str, line: int) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            col = pos + (len(text[pos:]) - len(stripped)) + 1
            raise SpecSyntaxError(f"unexpected character {stripped[0]!r}", line, col)
        kind = m.lastgroup
        tok_text = m.group(kind)
        col = m.start(kind) + 1
        if kind == "name" and tok_text in _RESERVED:
            kind = tok_text
        tokens.append(_Token(kind, tok_text, line, col))
        pos = m.end()
    return tokens


class _Parser:
    """Recursive-descent parser; precedence unary > & > | > (-> <->) > U."""

    def __init__(self, tokens: list[_Token], line: int):
        self.tokens = tokens
        self.i = 0
        self.line = line

    def _peek(self) -> Optional[_Token]:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def _take(self) -> _Token:
        tok = self._peek()
        if tok is None:
            end_col = (self.tokens[-1].col + len(self.tokens[-1].text)) if self.tokens else 1
            raise SpecSyntaxError("unexpected end of formula", self.line, end_col)
        self.i += 1
        return tok

    def parse(self) -> Formula:
        f = self._until()
        tok = self._peek()
        if tok is not None:
            raise SpecSyntaxError(f"unexpected token {tok.text!r}", tok.line, tok.col)
        return f

    def _until(self) -> Formula:
        left = self._implication()
        tok = self._peek()
        if tok is not None and tok.kind == "U":
            self._take()
            right = self._until()
            return Until(left, right)
        return left

    def _implication(self) -> Formula:
        left = self._or()
        tok = self._peek()
        if tok is not None and tok.kind in ("implies", "iff"):
            self._take()
            right = self._implication()
            return Implies(left, right) if tok.kind == "implies" else Iff(left, right)
        return left

    def _or(self) -> Formula:
        f = self._and()
        while True:
            tok = self._peek()
            if tok is not None and tok.kind == "or":
                self._take()
                f = Or(f, self._and())
            else:
                return f

    def _and(self) -> Formula:
        f = self._unary()
        while True:
            tok = self._peek()
            if tok is not None and tok.kind == "and":
                self._take()
                f = And(f, self._unary())
            else:
                return f

    def _unary(self) -> Formula:
        tok = self._take()
        if tok.kind == "not":
            return Not(self._unary())
        if tok.kind == "X":
            return Next(self._unary())
        if tok.kind == "F":
            return Eventually(self._unary())
        if tok.kind == "G":
            return Globally(self._unary())
        if tok.kind == "True":
            return TrueLit()
        if tok.kind == "name":
            return Atom(tok.text)
        if tok.kind == "lparen":
            f = self._until()
            closing = self._take()
            if closing.kind != "rparen":
                raise SpecSyntaxError("expected ')'", closing.line, closing.col)
            return f
        raise SpecSyntaxError(f"unexpected token {tok.text!r}", tok.line, tok.col)


def parse_formula(text: str, line: int = 1) -> Formula:
    tokens = _tokenize(text, line)
    if not tokens:
        raise SpecSyntaxError("empty formula", line, 1)
    return _Parser(tokens, line).parse()


# ---------------------------------------------------------------------------
# specification files


@dataclass(frozen=True)
class Gr1Spec:
    """Assumption/guarantee clause lists over declared sensor and mode APs."""

    ap_env: tuple[str, ...]
    ap_sys: tuple[str, ...]
    env_init: tuple[Formula, ...] = ()
    env_trans: tuple[Formula, ...] = ()
    env_live: tuple[Formula, ...] = ()
    sys_init: tuple[Formula, ...] = ()
    sys_trans: tuple[Formula, ...] = ()
    sys_live: tuple[Formula, ...] = ()

    def modes(self) -> list[ModeId]:
        return [ModeId(i, name) for i, name in enumerate(self.ap_sys)]


_SECTIONS = (
    "aps_env",
    "aps_sys",
    "env_init",
    "env_trans",
    "env_live",
    "sys_init",
    "sys_trans",
    "sys_live",
)


def parse_spec(text: str) -> Gr1Spec:
    """Parse the plain-text section format into a Gr1Spec.

    Sections are `aps_env:`/`aps_sys:` (AP names, whitespace separated) and
    the six clause lists, one formula per line. Lines starting with '#' and
    blank lines are ignored.
    """
    sections: dict[str, list[tuple[str, int]]] = {name: [] for name in _SECTIONS}
    current: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        header = None
        for name in _SECTIONS:
            if line == f"{name}:" or line.startswith(f"{name}:"):
                header = name
                rest = line[len(name) + 1 :].strip()
                break
        if header is not None:
            current = header
            if rest:
                sections[current].append((rest, lineno))
            continue
        if current is None:
            raise SpecSyntaxError(f"content before any section: {line!r}", lineno, 1)
        sections[current].append((line, lineno))

    ap_env = tuple(name for chunk, _ in sections["aps_env"] for name in chunk.split())
    ap_sys = tuple(name for chunk, _ in sections["aps_sys"] for name in chunk.split())
    if not ap_env or not ap_sys:
        raise SpecSyntaxError("aps_env and aps_sys must declare at least one AP each", 1, 1)
    for name in ap_env + ap_sys:
        if name in _RESERVED:
            raise SpecSyntaxError(f"AP name {name!r} is reserved", 1, 1)
    declared = set(ap_env) | set(ap_sys)
    if len(declared) != len(ap_env) + len(ap_sys):
        raise SpecSyntaxError("AP names must be unique across aps_env and aps_sys", 1, 1)

    def parse_section(name: str) -> tuple[Formula, ...]:
        out = []
        for chunk, lineno in sections[name]:
            f = parse_formula(chunk, lineno)
            unknown = atoms_of(f) - declared
            if unknown:
                raise UndeclaredAtom(
                    f"{name} line {lineno}: undeclared atom(s) {sorted(unknown)}"
                )
            out.append(f)
        return tuple(out)

    return Gr1Spec(
        ap_env=ap_env,
        ap_sys=ap_sys,
        env_init=parse_section("env_init"),
        env_trans=parse_section("env_trans"),
        env_live=parse_section("env_live"),
        sys_init=parse_section("sys_init"),
        sys_trans=parse_section("sys_trans"),
        sys_live=parse_section("sys_live"),
    )


def format_spec(spec: Gr1Spec) -> str:
    lines = [
        "aps_env: " + " ".join(spec.ap_env),
        "aps_sys: " + " ".join(spec.ap_sys),
    ]
    for name in _SECTIONS[2:]:
        lines.append(f"{name}:")
        for f in getattr(spec, name):
            lines.append(format_formula(f))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# template extraction


def _literal(f: Formula) -> Optional[tuple[str, bool]]:
    """(atom name, polarity) when f is an atom or a negated atom."""
    if isinstance(f, Atom):
        return f.name, True
    if isinstance(f, Not) and isinstance(f.operand, Atom):
        return f.operand.name, False
    return None


def _valuation_of(f: Formula, ap_env: Sequence[str]) -> Optional[BitVector]:
    """Read a full conjunction of sensor literals as a bitvector."""
    bits: dict[str, int] = {}
    for lit in conjuncts(f):
        parsed = _literal(lit)
        if parsed is None or parsed[0] not in ap_env:
            return None
        name, pol = parsed
        if name in bits:
            return None
        bits[name] = 1 if pol else 0
    if set(bits) != set(ap_env):
        return None
    return tuple(bits[name] for name in ap_env)


def transition_clauses(spec: Gr1Spec) -> dict[str, list[str]]:
    """Extract the mode-transition relation from sys_trans.

    Every clause must be G(...) whose conjuncts read (mode -> X mode' | ...);
    every declared mode must get exactly one clause across the section.
    """
    successors: dict[str, list[str]] = {}
    for f in spec.sys_trans:
        if not isinstance(f, Globally):
            raise TemplateViolation(
                f"sys_trans clause is not G-wrapped: {format_formula(f)}"
            )
        for clause in conjuncts(f.operand):
            if not isinstance(clause, Implies) or not isinstance(clause.left, Atom):
                raise TemplateViolation(
                    f"sys_trans conjunct is not (mode -> ...): {format_formula(clause)}"
                )
            mode = clause.left.name
            if mode not in spec.ap_sys:
                raise TemplateViolation(f"{mode!r} is not a declared mode")
            if mode in successors:
                raise TemplateViolation(f"mode {mode!r} has more than one transition clause")
            succ = []
            for d in disjuncts(clause.right):
                if not (isinstance(d, Next) and isinstance(d.operand, Atom)):
                    raise TemplateViolation(
                        f"transition successor is not X mode: {format_formula(d)}"
                    )
                if d.operand.name not in spec.ap_sys:
                    raise TemplateViolation(f"{d.operand.name!r} is not a declared mode")
                succ.append(d.operand.name)
            successors[mode] = succ
    missing = [m for m in spec.ap_sys if m not in successors]
    if missing:
        raise TemplateViolation(f"modes without a transition clause: {missing}")
    return successors


def mode_valuations(spec: Gr1Spec) -> dict[str, BitVector]:
    """Extract each mode's defining sensor valuation from env_trans.

    Accepts G-wrapped conjunctions of (mode <-> valuation) or
    (mode -> valuation); the biconditional form suits scenes where every mode
    looks distinct, the implication form allows several modes to share one
    appearance.
    """
    bindings: dict[str, BitVector] = {}
    for f in spec.env_trans:
        body = f.operand if isinstance(f, Globally) else f
        for clause in conjuncts(body):
            if isinstance(clause, (Iff, Implies)) and isinstance(clause.left, Atom):
                mode = clause.left.name
                if mode not in spec.ap_sys:
                    continue
                valuation = _valuation_of(clause.right, spec.ap_env)
                if valuation is None:
                    raise TemplateViolation(
                        f"mode {mode!r} is not bound to a full sensor valuation"
                    )
                if mode in bindings and bindings[mode] != valuation:
                    raise TemplateViolation(f"mode {mode!r} bound to two valuations")
                bindings[mode] = valuation
    missing = [m for m in spec.ap_sys if m not in bindings]
    if missing:
        raise TemplateViolation(f"modes without a sensor binding: {missing}")
    return bindings


def _has_mutual_exclusion(spec: Gr1Spec) -> bool:
    """Look for the exactly-one-mode clause in env_trans."""
    mode_set = set(spec.ap_sys)
    for f in spec.env_trans:
        body = f.operand if isinstance(f, Globally) else f
        for clause in conjuncts(body) if not isinstance(body, Or) else [body]:
            if not isinstance(clause, Or):
                continue
            cases = disjuncts(clause)
            seen_positive = set()
            ok = True
            for case in cases:
                lits = [_literal(c) for c in conjuncts(case)]
                if any(l is None or l[0] not in mode_set for l in lits):
                    ok = False
                    break
                positives = [name for name, pol in lits if pol]
                if len(positives) != 1 or {name for name, _ in lits} != mode_set:
                    ok = False
                    break
                seen_positive.add(positives[0])
            if ok and seen_positive == mode_set:
                return True
    return False


def goal_modes_of(spec: Gr1Spec) -> set[str]:
    """Goal modes from sys_live, which must be GF over a mode disjunction."""
    goals: set[str] = set()
    for f in spec.sys_live:
        if isinstance(f, Eventually) and isinstance(f.operand, Globally):
            raise UnsynthesizableSpec(
                "sys_live clause of the form F G(...) is outside the synthesizable fragment"
            )
        if not (isinstance(f, Globally) and isinstance(f.operand, Eventually)):
            raise TemplateViolation(
                f"sys_live clause is not G F(...): {format_formula(f)}"
            )
        for d in disjuncts(f.operand.operand):
            if not isinstance(d, Atom) or d.name not in spec.ap_sys:
                raise TemplateViolation(
                    f"sys_live goal is not a mode atom: {format_formula(d)}"
                )
            goals.add(d.name)
    if not goals:
        raise TemplateViolation("sys_live declares no goal modes")
    return goals


# ---------------------------------------------------------------------------
# automaton


@dataclass(frozen=True)
class ModeAutomaton:
    """Transition graph plus shortest-path replanning strategy."""

    modes: tuple[ModeId, ...]
    edges: frozenset[tuple[ModeId, ModeId]]
    goal_modes: frozenset[ModeId]
    strategy: tuple[tuple[ModeId, ModeId], ...]

    def strategy_map(self) -> dict[ModeId, ModeId]:
        return dict(self.strategy)

    def successors(self, mode: ModeId) -> list[ModeId]:
        return sorted((j for i, j in self.edges if i == mode), key=lambda m: m.id)

    def mode_named(self, name: str) -> ModeId:
        for m in self.modes:
            if m.name == name:
                return m
        raise KeyError(name)


def synthesize(spec: Gr1Spec) -> ModeAutomaton:
    """Build the mode automaton and its replanning strategy.

    Edges come from the sys_trans transition relation, goals from sys_live.
    The strategy maps each mode to the successor on a breadth-first shortest
    path to the nearest goal mode, ties broken by lowest successor mode id.
    Raises UnsynthesizableSpec when some mode has no path to any goal.
    """
    succ_names = transition_clauses(spec)
    mode_valuations(spec)  # validates the sensor binding
    if not _has_mutual_exclusion(spec):
        raise TemplateViolation("env_trans lacks an exactly-one-mode clause")
    for f in spec.env_live:
        if not (
            isinstance(f, TrueLit)
            or (
                isinstance(f, Globally)
                and isinstance(f.operand, Eventually)
                and isinstance(f.operand.operand, TrueLit)
            )
        ):
            raise TemplateViolation("env_live must be trivial (True or G F True)")
    goal_names = goal_modes_of(spec)

    modes = tuple(spec.modes())
    by_name = {m.name: m for m in modes}
    edges = frozenset(
        (by_name[i], by_name[j]) for i, succs in succ_names.items() for j in succs
    )
    goals = frozenset(by_name[g] for g in goal_names)

    # breadth-first distance to the nearest goal over non-self edges
    INF = len(modes) + 1
    dist = {m: 0 if m in goals else INF for m in modes}
    changed = True
    while changed:
        changed = False
        for i, j in edges:
            if i != j and dist[j] + 1 < dist[i]:
                dist[i] = dist[j] + 1
                changed = True
    unreachable = [m.name for m in modes if dist[m] >= INF]
    if unreachable:
        raise UnsynthesizableSpec(f"no path to a goal mode from: {unreachable}")

    strategy = []
    for m in modes:
        if m in goals:
            if (m, m) in edges:
                strategy.append((m, m))
                continue
            # non-absorbing goal: the task is cyclic, keep moving
        candidates = [j for i, j in edges if i == m and i != j]
        best = min(
            candidates,
            key=lambda j: (dist[j], j.id),
            default=None,
        )
        if best is None:
            # absorbing non-goal modes were rejected above
            strategy.append((m, m))
        else:
            strategy.append((m, best))
    return ModeAutomaton(
        modes=modes, edges=edges, goal_modes=goals, strategy=tuple(strategy)
    )


def next_mode(automaton: ModeAutomaton, current: ModeId) -> ModeId:
    """Next commanded mode: stay at an absorbing goal, else follow strategy."""
    return automaton.strategy_map()[current]


# ---------------------------------------------------------------------------
# finite-trace checking


@dataclass(frozen=True)
class Verdict:
    kind: str  # "Satisfied" | "SafetyViolation" | "LivenessViolation"
    step: Optional[int] = None
    clause: Optional[str] = None

    @property
    def satisfied(self) -> bool:
        return self.kind == "Satisfied"


SATISFIED = Verdict("Satisfied")

TracePairs = Sequence[tuple[BitVector, ModeId]]


def _assignments(spec: Gr1Spec, trace: TracePairs) -> list[dict[str, bool]]:
    out = []
    for alpha, mode in trace:
        env = {name: bool(alpha[i]) for i, name in enumerate(spec.ap_env)}
        sys = {name: name == mode.name for name in spec.ap_sys}
        env.update(sys)
        out.append(env)
    return out


def _eval(f: Formula, t: int, assigns: list[dict[str, bool]]) -> bool:
    """Finite-trace semantics; X at the final step is vacuously true."""
    if isinstance(f, TrueLit):
        return True
    if isinstance(f, Atom):
        return assigns[t][f.name]
    if isinstance(f, Not):
        return not _eval(f.operand, t, assigns)
    if isinstance(f, And):
        return _eval(f.left, t, assigns) and _eval(f.right, t, assigns)
    if isinstance(f, Or):
        return _eval(f.left, t, assigns) or _eval(f.right, t, assigns)
    if isinstance(f, Implies):
        return (not _eval(f.left, t, assigns)) or _eval(f.right, t, assigns)
    if isinstance(f, Iff):
        return _eval(f.left, t, assigns) == _eval(f.right, t, assigns)
    if isinstance(f, Next):
        if t + 1 >= len(assigns):
            return True
        return _eval(f.operand, t + 1, assigns)
    if isinstance(f, Globally):
        return all(_eval(f.operand, u, assigns) for u in range(t, len(assigns)))
    if isinstance(f, Eventually):
        return any(_eval(f.operand, u, assigns) for u in range(t, len(assigns)))
    if isinstance(f, Until):
        for u in range(t, len(assigns)):
            if _eval(f.right, u, assigns):
                return True
            if not _eval(f.left, u, assigns):
                return False
        return False
    raise TypeError(f"unknown formula node {f!r}")


def check_trace(spec: Gr1Spec, trace: TracePairs) -> Verdict:
    """Check a finite (alpha, mode) trace against the specification.

    Initial clauses are evaluated at step 0; every G-clause of env_trans and
    sys_trans is evaluated at every step with X read as the immediate
    successor (vacuous at the final step); sys_live's GF goal holds exactly
    when a goal mode holds at the final step.
    """
    if len(trace) == 0:
        return Verdict("LivenessViolation")
    assigns = _assignments(spec, trace)
    for f in spec.env_init + spec.sys_init:
        if not _eval(f, 0, assigns):
            return Verdict("SafetyViolation", step=0, clause=format_formula(f))
    for f in spec.env_trans + spec.sys_trans:
        if isinstance(f, Globally):
            for t in range(len(assigns)):
                if not _eval(f.operand, t, assigns):
                    return Verdict("SafetyViolation", step=t, clause=format_formula(f))
        else:
            if not _eval(f, 0, assigns):
                return Verdict("SafetyViolation", step=0, clause=format_formula(f))
    for f in spec.env_live + spec.sys_live:
        if not _eval(f, 0, assigns):
            return Verdict("LivenessViolation")
    return SATISFIED


def infer_sys_trans(
    observed_transitions: Iterable[tuple[ModeId, ModeId]], modes: Sequence[ModeId]
) -> list[Formula]:
    """Mine a transition relation: per mode, self-loop plus observed successors."""
    observed = {(i.name, j.name) for i, j in observed_transitions}
    out: list[Formula] = []
    for m in sorted(modes, key=lambda m: m.id):
        succs = [m.name] + [
            j.name
            for j in sorted(modes, key=lambda m: m.id)
            if j.name != m.name and (m.name, j.name) in observed
        ]
        rhs: Formula = Next(Atom(succs[0]))
        for name in succs[1:]:
            rhs = Or(rhs, Next(Atom(name)))
        out.append(Globally(Implies(Atom(m.name), rhs)))
    return out


def extend_spec(spec: Gr1Spec, observed: Iterable[tuple[ModeId, ModeId]]) -> Gr1Spec:
    """Add the observed transitions to sys_trans, keeping all existing ones.

    Self-loop structure is preserved: a mode gains a self-successor only if
    its original clause already had one (a goal made non-absorbing on purpose
    must stay that way after a run extends the relation).
    """
    successors = {m: list(succs) for m, succs in transition_clauses(spec).items()}
    for i, j in observed:
        if i.name != j.name and j.name not in successors[i.name]:
            successors[i.name].append(j.name)
    modes = spec.modes()
    out: list[Formula] = []
    for m in sorted(modes, key=lambda m: m.id):
        succs = successors[m.name]
        rhs: Formula = Next(Atom(succs[0]))
        for name in succs[1:]:
            rhs = Or(rhs, Next(Atom(name)))
        out.append(Globally(Implies(Atom(m.name), rhs)))
    return Gr1Spec(
        ap_env=spec.ap_env,
        ap_sys=spec.ap_sys,
        env_init=spec.env_init,
        env_trans=spec.env_trans,
        env_live=spec.env_live,
        sys_init=spec.sys_init,
        sys_trans=tuple(out),
        sys_live=spec.sys_live,
    )
