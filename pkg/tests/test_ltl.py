"""Parser, synthesis, trace-checking, and transition-mining tests."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tli.core import ModeId
from tli.errors import (
    SpecSyntaxError,
    TemplateViolation,
    UndeclaredAtom,
    UnsynthesizableSpec,
)
from tli.ltl import (
    And,
    Atom,
    Eventually,
    Globally,
    Iff,
    Implies,
    Next,
    Not,
    Or,
    TrueLit,
    Until,
    check_trace,
    extend_spec,
    format_formula,
    format_spec,
    infer_sys_trans,
    mode_valuations,
    next_mode,
    parse_formula,
    parse_spec,
    synthesize,
)

SCOOPING_FULL = """
aps_env: r s t
aps_sys: a b c d
env_init:
!r & !s & !t
env_trans:
G((a <-> (!r & !s & !t)) & (b <-> (r & !s & !t)) & (c <-> (!r & s & !t)) & (d <-> (!r & !s & t)))
G((a & !b & !c & !d) | (!a & b & !c & !d) | (!a & !b & c & !d) | (!a & !b & !c & d))
env_live:
True
sys_init:
a
sys_trans:
G((a -> (X a | X b)) & (b -> (X a | X b | X c)) & (c -> (X a | X b | X c | X d)) & (d -> X d))
sys_live:
G F d
"""

SCOOPING_PARTIAL = SCOOPING_FULL.replace(
    "G((a -> (X a | X b)) & (b -> (X a | X b | X c)) & (c -> (X a | X b | X c | X d)) & (d -> X d))",
    "G((a -> (X a | X b)) & (b -> (X b | X c)) & (c -> (X c | X d)) & (d -> X d))",
)


def names(pairs):
    return {(i.name, j.name) for i, j in pairs}


# ---------------------------------------------------------------------------
# parsing


def test_parse_g_wrapped_implication():
    f = parse_formula("G((a -> (X a | X b)))")
    assert isinstance(f, Globally)
    body = f.operand
    assert isinstance(body, Implies)
    assert body.left == Atom("a")
    assert body.right == Or(Next(Atom("a")), Next(Atom("b")))


def test_parse_precedence_unary_and_or_implies():
    # ! binds over &, & over |, | over ->
    f = parse_formula("!a & b | c -> d")
    assert f == Implies(Or(And(Not(Atom("a")), Atom("b")), Atom("c")), Atom("d"))


def test_parse_until_binds_loosest():
    f = parse_formula("a -> b U c")
    assert f == Until(Implies(Atom("a"), Atom("b")), Atom("c"))


def test_parse_iff_and_true():
    f = parse_formula("a <-> True")
    assert f == Iff(Atom("a"), TrueLit())


def test_parse_dangling_implication_is_syntax_error():
    with pytest.raises(SpecSyntaxError):
        parse_formula("a -> ")


def test_parse_reports_line_and_column():
    with pytest.raises(SpecSyntaxError) as err:
        parse_formula("a -> $b", line=7)
    assert err.value.line == 7
    assert err.value.col == 6


def test_spec_rejects_undeclared_atom():
    text = SCOOPING_FULL.replace("G F d", "G F q")
    with pytest.raises(UndeclaredAtom):
        parse_spec(text)


def test_scooping_transition_formula_has_four_clauses():
    spec = parse_spec(SCOOPING_FULL)
    assert len(spec.sys_trans) == 1
    from tli.ltl import conjuncts

    clauses = conjuncts(spec.sys_trans[0].operand)
    assert len(clauses) == 4
    assert [c.left.name for c in clauses] == ["a", "b", "c", "d"]


# formula generator for round-trip property
_atoms = st.sampled_from(["a", "b", "c", "r", "s"])


def _formulas(depth=3):
    base = st.one_of(_atoms.map(Atom), st.just(TrueLit()))
    return st.recursive(
        base,
        lambda children: st.one_of(
            children.map(Not),
            children.map(Next),
            children.map(Eventually),
            children.map(Globally),
            st.tuples(children, children).map(lambda p: And(*p)),
            st.tuples(children, children).map(lambda p: Or(*p)),
            st.tuples(children, children).map(lambda p: Implies(*p)),
            st.tuples(children, children).map(lambda p: Iff(*p)),
            st.tuples(children, children).map(lambda p: Until(*p)),
        ),
        max_leaves=25,
    )


@settings(max_examples=200, deadline=None)
@given(_formulas())
def test_format_parse_round_trip(f):
    assert parse_formula(format_formula(f)) == f


def test_format_spec_round_trip():
    spec = parse_spec(SCOOPING_FULL)
    assert parse_spec(format_spec(spec)) == spec


# ---------------------------------------------------------------------------
# synthesis


def test_scooping_full_automaton_matches_fixture():
    auto = synthesize(parse_spec(SCOOPING_FULL))
    assert [m.name for m in auto.modes] == ["a", "b", "c", "d"]
    non_self = {(i, j) for i, j in names(auto.edges) if i != j}
    assert non_self == {
        ("a", "b"),
        ("b", "a"),
        ("b", "c"),
        ("c", "a"),
        ("c", "b"),
        ("c", "d"),
    }
    self_loops = {(i, j) for i, j in names(auto.edges) if i == j}
    assert self_loops == {("a", "a"), ("b", "b"), ("c", "c"), ("d", "d")}
    assert {m.name for m in auto.goal_modes} == {"d"}


def test_scooping_partial_automaton_matches_fixture():
    auto = synthesize(parse_spec(SCOOPING_PARTIAL))
    non_self = {(i, j) for i, j in names(auto.edges) if i != j}
    assert non_self == {("a", "b"), ("b", "c"), ("c", "d")}
    assert {(i, j) for i, j in names(auto.edges) if i == j} == {
        ("a", "a"),
        ("b", "b"),
        ("c", "c"),
        ("d", "d"),
    }


def test_next_mode_follows_shortest_path():
    auto = synthesize(parse_spec(SCOOPING_FULL))
    a, b, c, d = auto.modes
    assert next_mode(auto, b) == c
    assert next_mode(auto, d) == d
    # replanned from a: a -> b -> c -> d
    assert next_mode(auto, a) == b
    assert next_mode(auto, c) == d


def test_unsynthesizable_when_mode_cannot_reach_goal():
    text = """
aps_env: p q
aps_sys: a z
env_init:
!p & !q
env_trans:
G((a <-> (!p & !q)) & (z <-> (p & !q)))
G((a & !z) | (!a & z))
env_live:
True
sys_init:
a
sys_trans:
G((a -> (X a | X z)) & (z -> X z))
sys_live:
G F a
"""
    with pytest.raises(UnsynthesizableSpec):
        synthesize(parse_spec(text))


def test_fg_goal_clause_rejected():
    text = SCOOPING_FULL.replace("G F d", "F G d")
    with pytest.raises(UnsynthesizableSpec):
        synthesize(parse_spec(text))


def test_non_template_sys_trans_rejected():
    text = SCOOPING_FULL.replace(
        "G((a -> (X a | X b)) & (b -> (X a | X b | X c)) & (c -> (X a | X b | X c | X d)) & (d -> X d))",
        "G((a -> F b) & (b -> (X a | X b | X c)) & (c -> (X a | X b | X c | X d)) & (d -> X d))",
    )
    with pytest.raises(TemplateViolation):
        synthesize(parse_spec(text))


def test_synthesize_is_deterministic_and_idempotent():
    spec = parse_spec(SCOOPING_FULL)
    assert synthesize(spec) == synthesize(spec)


def test_mode_valuations_extracted():
    spec = parse_spec(SCOOPING_FULL)
    assert mode_valuations(spec) == {
        "a": (0, 0, 0),
        "b": (1, 0, 0),
        "c": (0, 1, 0),
        "d": (0, 0, 1),
    }


# ---------------------------------------------------------------------------
# trace checking

ALPHAS = {"a": (0, 0, 0), "b": (1, 0, 0), "c": (0, 1, 0), "d": (0, 0, 1)}


def trace_of(mode_names):
    spec_modes = {m: ModeId(i, m) for i, m in enumerate("abcd")}
    return [(ALPHAS[m], spec_modes[m]) for m in mode_names]


def test_demonstration_trace_satisfied():
    spec = parse_spec(SCOOPING_FULL)
    assert check_trace(spec, trace_of("aabbccdd")).satisfied


def test_direct_jump_is_safety_violation():
    spec = parse_spec(SCOOPING_FULL)
    verdict = check_trace(spec, trace_of("aacd"))
    assert verdict.kind == "SafetyViolation"
    assert verdict.step == 1
    assert "a ->" in verdict.clause


def test_trace_ending_off_goal_is_liveness_violation():
    spec = parse_spec(SCOOPING_FULL)
    verdict = check_trace(spec, trace_of("aabb"))
    assert verdict.kind == "LivenessViolation"


def test_wrong_sensor_for_mode_is_safety_violation():
    spec = parse_spec(SCOOPING_FULL)
    modes = {m: ModeId(i, m) for i, m in enumerate("abcd")}
    trace = [(ALPHAS["a"], modes["a"]), (ALPHAS["c"], modes["b"])]
    verdict = check_trace(spec, trace)
    assert verdict.kind == "SafetyViolation"
    assert verdict.step == 1


def test_strategy_reaches_goal_and_trace_checks(subtests=None):
    spec = parse_spec(SCOOPING_FULL)
    auto = synthesize(spec)
    for start in auto.modes:
        seq = [start]
        for _ in range(len(auto.modes)):
            nxt = next_mode(auto, seq[-1])
            if nxt == seq[-1]:
                break
            seq.append(nxt)
        assert seq[-1] in auto.goal_modes
        assert len(seq) <= len(auto.modes)
        if start.name == "a":
            # only the declared initial mode yields a full closed-loop trace
            trace = [(ALPHAS[m.name], m) for m in seq]
            assert check_trace(spec, trace).satisfied


# ---------------------------------------------------------------------------
# transition mining


def test_infer_sys_trans_matches_partial_formula():
    modes = [ModeId(i, m) for i, m in enumerate("abcd")]
    observed = {(modes[0], modes[1]), (modes[1], modes[2]), (modes[2], modes[3])}
    clauses = infer_sys_trans(observed, modes)
    rendered = [format_formula(c) for c in clauses]
    assert rendered == [
        "G (a -> X a | X b)",
        "G (b -> X b | X c)",
        "G (c -> X c | X d)",
        "G (d -> X d)",
    ]


def test_infer_sys_trans_empty_gives_self_loops():
    modes = [ModeId(0, "a"), ModeId(1, "b")]
    clauses = infer_sys_trans(set(), modes)
    assert [format_formula(c) for c in clauses] == ["G (a -> X a)", "G (b -> X b)"]


def test_extend_spec_adds_edge_after_resynthesis():
    spec = parse_spec(SCOOPING_PARTIAL)
    auto = synthesize(spec)
    b = auto.mode_named("b")
    a = auto.mode_named("a")
    assert (b, a) not in auto.edges
    extended = extend_spec(spec, {(b, a)})
    auto2 = synthesize(extended)
    assert (b, a) in auto2.edges
    # previously present edges survive
    assert names(auto.edges) <= names(auto2.edges)


# ---------------------------------------------------------------------------
# cooking and color-tracing fixtures

COOKING_PREFIX = """
aps_env: cy cg cp
aps_sys: {aps}
env_init:
!cy & !cg & !cp
env_trans:
{bindings}
{exclusion}
env_live:
True
sys_init:
{init}
sys_trans:
{trans}
sys_live:
{live}
"""


def cooking_spec_cb():
    return COOKING_PREFIX.format(
        aps="w1 y d1 w2 g d2",
        bindings=(
            "G((w1 -> (!cy & !cg & !cp)) & (y -> (cy & !cg & !cp)) & (d1 -> (!cy & !cg & cp)) & "
            "(w2 -> (!cy & !cg & !cp)) & (g -> (!cy & cg & !cp)) & (d2 -> (!cy & !cg & cp)))"
        ),
        exclusion=(
            "G((w1 & !y & !d1 & !w2 & !g & !d2) | (!w1 & y & !d1 & !w2 & !g & !d2) | "
            "(!w1 & !y & d1 & !w2 & !g & !d2) | (!w1 & !y & !d1 & w2 & !g & !d2) | "
            "(!w1 & !y & !d1 & !w2 & g & !d2) | (!w1 & !y & !d1 & !w2 & !g & d2))"
        ),
        init="w1",
        trans=(
            "G((w1 -> X y) & (y -> (X w1 | X d1)) & (d1 -> (X w2 | X g)) & "
            "(w2 -> X g) & (g -> (X w2 | X d2)) & (d2 -> X d2))"
        ),
        live="G F d2",
    )


def test_cooking_chicken_first_automaton():
    auto = synthesize(parse_spec(cooking_spec_cb()))
    non_self = {(i, j) for i, j in names(auto.edges) if i != j}
    assert non_self == {
        ("w1", "y"),
        ("y", "w1"),
        ("y", "d1"),
        ("d1", "w2"),
        ("d1", "g"),
        ("w2", "g"),
        ("g", "w2"),
        ("g", "d2"),
    }
    assert {m.name for m in auto.goal_modes} == {"d2"}
    d1 = auto.mode_named("d1")
    # shortest path from d1 to d2 runs through g
    assert next_mode(auto, d1).name == "g"


def test_cooking_continuous_goal_is_not_absorbing():
    text = COOKING_PREFIX.format(
        aps="w y d",
        bindings=(
            "G((w -> (!cy & !cg & !cp)) & (y -> (cy & !cg & !cp)) & (d -> (!cy & !cg & cp)))"
        ),
        exclusion=("G((w & !y & !d) | (!w & y & !d) | (!w & !y & d))"),
        init="w",
        trans="G((w -> X y) & (y -> (X w | X d)) & (d -> X w))",
        live="G F d",
    )
    auto = synthesize(parse_spec(text))
    d = auto.mode_named("d")
    w = auto.mode_named("w")
    # no self-loop at the goal: the cycle continues through w
    assert (d, d) not in auto.edges
    assert next_mode(auto, d) == w


COLOR_PREFIX = """
aps_env: vy vb vg vo vp vr
aps_sys: {aps}
env_init:
vy & !vb & !vg & !vo & !vp & !vr
env_trans:
{bindings}
{exclusion}
env_live:
True
sys_init:
Y
sys_trans:
{trans}
sys_live:
G F R
"""

_TILE_BITS = {
    "Y": "vy & !vb & !vg & !vo & !vp & !vr",
    "B": "!vy & vb & !vg & !vo & !vp & !vr",
    "G_": "!vy & !vb & vg & !vo & !vp & !vr",
    "O": "!vy & !vb & !vg & vo & !vp & !vr",
    "P": "!vy & !vb & !vg & !vo & vp & !vr",
    "R": "!vy & !vb & !vg & !vo & !vp & vr",
    "DARK": "!vy & !vb & !vg & !vo & !vp & !vr",
}


def _color_spec(dark_modes, trans):
    aps = ["Y", "B", "G_", "O", "P", "R"] + dark_modes
    bindings = " & ".join(
        f"({m} -> ({_TILE_BITS[m]}))" for m in ["Y", "B", "G_", "O", "P", "R"]
    )
    bindings += " & " + " & ".join(f"({m} -> ({_TILE_BITS['DARK']}))" for m in dark_modes)
    exclusion_cases = []
    for m in aps:
        lits = [(n if n == m else f"!{n}") for n in aps]
        exclusion_cases.append("(" + " & ".join(lits) + ")")
    return COLOR_PREFIX.format(
        aps=" ".join(aps),
        bindings=f"G({bindings})",
        exclusion="G(" + " | ".join(exclusion_cases) + ")",
        trans=trans,
    )


def test_color_tracing_reentry_behaviors():
    # (a) exit anywhere re-enters at the yellow tile
    spec_a = _color_spec(
        ["D1"],
        "G((Y -> (X Y | X B | X D1)) & (B -> (X B | X G_ | X D1)) & "
        "(G_ -> (X G_ | X O | X D1)) & (O -> (X O | X P | X D1)) & "
        "(P -> (X P | X R | X D1)) & (R -> X R) & (D1 -> (X D1 | X Y)))",
    )
    auto_a = synthesize(parse_spec(spec_a))
    assert next_mode(auto_a, auto_a.mode_named("D1")).name == "Y"

    # (b) exit after the blue tile re-enters at the blue tile
    spec_b = _color_spec(
        ["D1", "D2"],
        "G((Y -> (X Y | X B | X D1)) & (B -> (X B | X G_ | X D2)) & "
        "(G_ -> (X G_ | X O | X D2)) & (O -> (X O | X P | X D2)) & "
        "(P -> (X P | X R | X D2)) & (R -> X R) & "
        "(D1 -> (X D1 | X Y)) & (D2 -> (X D2 | X B)))",
    )
    auto_b = synthesize(parse_spec(spec_b))
    assert next_mode(auto_b, auto_b.mode_named("D2")).name == "B"
    assert next_mode(auto_b, auto_b.mode_named("D1")).name == "Y"
    # exits from tiles after blue land in D2
    assert (auto_b.mode_named("O"), auto_b.mode_named("D2")) in auto_b.edges

    # (c) yellow exit re-enters at blue; blue exit re-enters at pink
    spec_c = _color_spec(
        ["D1", "D2", "D3", "D4"],
        "G((Y -> (X Y | X B | X D1)) & (B -> (X B | X G_ | X D2)) & "
        "(G_ -> (X G_ | X O | X D3)) & (O -> (X O | X P | X D4)) & "
        "(P -> (X P | X R | X D2)) & (R -> X R) & "
        "(D1 -> (X D1 | X B)) & (D2 -> (X D2 | X P)) & "
        "(D3 -> (X D3 | X G_)) & (D4 -> (X D4 | X O)))",
    )
    auto_c = synthesize(parse_spec(spec_c))
    assert next_mode(auto_c, auto_c.mode_named("D1")).name == "B"
    assert next_mode(auto_c, auto_c.mode_named("D2")).name == "P"


def test_duplicated_appearance_modes_share_valuation():
    spec = parse_spec(cooking_spec_cb())
    vals = mode_valuations(spec)
    assert vals["w1"] == vals["w2"] == (0, 0, 0)
    assert vals["d1"] == vals["d2"] == (0, 0, 1)
