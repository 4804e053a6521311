import random
import threading
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prooftrace.engine import (AnswerLabel, BuiltinNode, DivisionByZero, FactNode,
                               FlounderingError, InstantiationError, NafNode, QueryNode,
                               RuleNode, SearchConfig, Strategy, call_builtin, check_proof,
                               classify_answer, depth_limited_solve, dumps_proof, ids_solve,
                               proof_depth, proof_from_dict, proof_to_dict, solve, solve_naf,
                               solution_to_dict)
from prooftrace.parser import parse_program, parse_query, parse_term
from prooftrace.terms import Atom, Builtin, Call, Clause, Naf, Num, Struct, Var

from oracles import fixpoint, random_rulebase

DFS = SearchConfig(strategy=Strategy.DFS)


def T(text):
    return parse_term(text)


QUIET = "% id: t1\nred(fiona).\n% id: t2\nrough(fiona).\n% id: r1\nquiet(X) :- red(X), rough(X).\n"
WAGE = "wage(18.00).\novertime_wage(W) :- wage(W1), W is 1.5 * W1.\n"


def test_fact_query():
    kb = parse_program("green(fiona).")
    r = solve(kb, parse_query("green(fiona)"))
    assert len(r) == 1
    assert r.first.proof == FactNode(T("green(fiona)"))


def test_rule_proof_shape():
    kb = parse_program(QUIET)
    r = solve(kb, parse_query("quiet(fiona)"))
    assert len(r) == 1
    assert r.first.proof == RuleNode(T("quiet(fiona)"), "r1",
                                     (FactNode(T("red(fiona)"), "t1"), FactNode(T("rough(fiona)"), "t2")))
    assert r.first.depth_found == 2


@pytest.mark.parametrize("strategy", list(Strategy))
def test_wage_is_exact(strategy):
    kb = parse_program(WAGE)
    r = solve(kb, parse_query("overtime_wage(W)"), SearchConfig(strategy=strategy))
    assert r.first.answer_bindings[Var("W")] == Num(27)
    assert r.first.answer_bindings[Var("W")].value == Fraction(27)


def test_left_recursion_dfs_vs_ids():
    kb = parse_program("p(X) :- p(X).\np(a).")
    d = solve(kb, parse_query("p(Y)"), SearchConfig(strategy=Strategy.DFS, step_budget=20_000))
    assert d.budget_exhausted and not d.solutions
    i = ids_solve(kb, parse_query("p(Y)"))
    assert i.first.answer_bindings[Var("Y")] == Atom("a")
    assert i.first.depth_found == 1


def test_natural_depth_limits():
    kb = parse_program("natural(0).\nnatural(s(X)) :- natural(X).")
    q = parse_query("natural(s(s(0)))")
    assert len(depth_limited_solve(kb, q, 2)) == 0
    assert len(depth_limited_solve(kb, q, 3)) == 1


def test_limit_one_on_rules_only():
    kb = parse_program("p(X) :- q(X).\nq(X) :- p(X).")
    assert len(depth_limited_solve(kb, parse_query("p(a)"), 1)) == 0


def test_ids_depth_exhaustion():
    chain = "".join(f"n{i}(x) :- n{i + 1}(x).\n" for i in range(20)) + "n20(x).\n"
    kb = parse_program(chain)
    r = ids_solve(kb, parse_query("n0(x)"), SearchConfig(max_depth=20))
    assert not r.solutions and r.depth_exhausted
    r = ids_solve(kb, parse_query("n0(x)"), SearchConfig(max_depth=21))
    assert r.first.depth_found == 21


def test_ids_stops_without_cutoff():
    kb = parse_program("p(a).")
    r = ids_solve(kb, parse_query("q(a)"))
    assert not r.solutions and not r.depth_exhausted


def test_builtins():
    s = call_builtin(Builtin("is", (Var("W"), T("1.5 * 18"))))
    assert s[Var("W")] == Num(27)
    assert call_builtin(Builtin("=:=", (Num(3), T("6 / 2")))) is not None
    assert call_builtin(Builtin("<", (Num(3), Num(2)))) is None
    with pytest.raises(InstantiationError):
        call_builtin(Builtin("<", (Var("X"), Num(3))))
    with pytest.raises(DivisionByZero):
        call_builtin(Builtin("is", (Var("X"), T("1 / 0"))))
    assert call_builtin(Builtin("==", (Var("X"), Var("X")))) is not None
    assert call_builtin(Builtin("\\==", (Var("X"), Var("Y")))) is not None


def test_division_by_zero_fails_branch_with_diagnostic():
    kb = parse_program("r(X) :- X is 1 / 0.\nr(2).")
    res = solve(kb, parse_query("r(X)"))
    assert [s.answer_bindings[Var("X")] for s in res] == [Num(2)]
    assert any("DivisionByZero" in d for d in res.diagnostics)


def test_naf():
    kb = parse_program("green(fiona).")
    assert solve_naf(kb, Naf(Call(T("green(fiona)"))), 20) is None
    node = solve_naf(kb, Naf(Call(T("blue(fiona)"))), 20)
    assert node == NafNode(T("blue(fiona)"), 20)
    with pytest.raises(FlounderingError):
        solve_naf(kb, Naf(Call(T("p(X)"))), 20)


def test_naf_in_rules():
    kb = parse_program("bird(tweety).\nbird(pingu).\npenguin(pingu).\n"
                       "flies(X) :- bird(X), \\+ penguin(X).")
    r = solve(kb, parse_query("flies(X)"))
    assert [s.answer_bindings[Var("X")] for s in r] == [Atom("tweety")]
    assert r.first.proof.children[1] == NafNode(T("penguin(tweety)"), 20)
    assert check_proof(kb, r.first.proof)


def test_floundering_negation_is_diagnosed():
    kb = parse_program("p(X) :- \\+ q(X).\nq(a).")
    r = solve(kb, parse_query("p(Y)"))
    assert not r.solutions
    assert any("FlounderingError" in d for d in r.diagnostics)


def test_classify():
    kb = parse_program("green(fiona).\nneg_green(bob).")
    c = classify_answer(kb, T("green(fiona)"))
    assert c.label is AnswerLabel.TRUE and c.proof == FactNode(T("green(fiona)"))
    c = classify_answer(kb, T("green(bob)"))
    assert c.label is AnswerLabel.FALSE and c.proof == FactNode(T("neg_green(bob)"))
    c = classify_answer(kb, T("blue(fiona)"))
    assert c.label is AnswerLabel.UNKNOWN and c.proof is None


def test_inconsistent_kb_flagged():
    kb = parse_program("big(x).\nneg_big(x).")
    c = classify_answer(kb, T("big(x)"))
    assert c.label is AnswerLabel.TRUE and c.inconsistent


def test_multi_goal_query_gets_query_root():
    kb = parse_program(QUIET)
    r = solve(kb, parse_query("red(X), \\+ blue(X), X \\== bob"))
    proof = r.first.proof
    assert isinstance(proof, QueryNode) and len(proof.children) == 3
    assert check_proof(kb, proof)


def test_check_proof_rejections():
    kb = parse_program(QUIET)
    proof = solve(kb, parse_query("quiet(fiona)")).first.proof
    assert check_proof(kb, proof)
    swapped = RuleNode(proof.head, proof.provenance, proof.children[::-1])
    assert not check_proof(kb, swapped)
    fabricated = RuleNode(proof.head, "r1", (FactNode(T("red(fiona)"), "t1"), FactNode(T("rough(fiona)"), "t9")))
    verdict = check_proof(kb, fabricated)
    assert not verdict and "t9" in verdict.reason
    assert not check_proof(kb, FactNode(T("green(fiona)"), "t1"))
    assert not check_proof(kb, BuiltinNode(T("3 < 2")))
    assert not check_proof(kb, BuiltinNode(T("X is 1 + 1"), Num(3)))
    assert not check_proof(kb, NafNode(T("red(fiona)"), 20))


def test_occurs_check_config():
    kb = parse_program("same(X, X).")
    assert len(solve(kb, parse_query("same(Y, f(Y))"), SearchConfig(occurs_check=True))) == 0
    r = solve(kb, parse_query("same(Y, f(Y))"))
    # the cyclic answer cannot be rendered, so it is dropped with a diagnostic
    assert not r.solutions and any("Cyclic" in d for d in r.diagnostics)


def test_proof_dict_roundtrip():
    kb = parse_program(WAGE + "ok(X) :- X = 1, \\+ bad(X).")
    for q in ("overtime_wage(W)", "ok(X)"):
        proof = solve(kb, parse_query(q)).first.proof
        assert proof_from_dict(proof_to_dict(proof)) == proof


def test_solution_serialization_is_stable():
    kb = parse_program(WAGE)
    a = solution_to_dict(solve(kb, parse_query("overtime_wage(W)")).first)
    assert a == {"bindings": {"W": "27"}, "depth": 2, "steps": a["steps"],
                 "proof": proof_to_dict(solve(kb, parse_query("overtime_wage(W)")).first.proof)}


def test_max_solutions():
    kb = parse_program("".join(f"n({i}).\n" for i in range(30)))
    assert len(solve(kb, parse_query("n(X)"))) == 20
    assert len(solve(kb, parse_query("n(X)"), SearchConfig(max_solutions=3))) == 3


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(max_depth=0)
    with pytest.raises(ValueError):
        SearchConfig(strategy="bfs")


def test_concurrent_solves_agree():
    kb = parse_program(QUIET + "anc(X, Y) :- anc(X, Z), par(Z, Y).\nanc(X, Y) :- par(X, Y).\n"
                       "par(a, b).\npar(b, c).\npar(c, d).\n")
    q = parse_query("anc(a, d)")
    expected = dumps_proof(ids_solve(kb, q).first.proof)
    out = []

    def work():
        out.append(dumps_proof(ids_solve(kb, q).first.proof))

    threads = [threading.Thread(target=work) for _ in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert out == [expected] * 6


def test_gc_restored_after_search():
    import gc
    kb = parse_program("p(X) :- p(X).")
    solve(kb, parse_query("p(a)"), SearchConfig(strategy=Strategy.DFS, step_budget=1000))
    assert gc.isenabled()


# --- properties over random rulebases -------------------------------------

seeds = st.integers(0, 10 ** 9)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_replay_every_solution(seed):
    rb = random_rulebase(random.Random(seed))
    kb = parse_program(rb.program())
    for q in list(rb.ground_queries())[:12]:
        for strategy in Strategy:
            for sol in solve(kb, parse_query(q.text()), SearchConfig(strategy=strategy)):
                assert check_proof(kb, sol.proof)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_ids_first_solution_has_minimal_depth(seed):
    rb = random_rulebase(random.Random(seed))
    kb = parse_program(rb.program())
    model = fixpoint(rb)
    for q, depth in model.items():
        r = ids_solve(kb, parse_query(q.text()))
        assert r.first.depth_found == depth
        assert proof_depth(r.first.proof) == depth


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 6))
def test_ids_complete_wrt_depth_limited(seed, d):
    rb = random_rulebase(random.Random(seed))
    kb = parse_program(rb.program())
    for q in list(rb.ground_queries())[:10]:
        goals = parse_query(q.text())
        if depth_limited_solve(kb, goals, d).solutions:
            r = ids_solve(kb, goals, SearchConfig(max_depth=d))
            assert r.solutions and r.first.depth_found <= d


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_ids_matches_dfs_on_loop_free_kb(seed):
    rb = random_rulebase(random.Random(seed))
    kb = parse_program(rb.program())
    for q in list(rb.ground_queries())[:10]:
        goals = parse_query(q.text())
        dfs = {s.depth_found for s in solve(kb, goals, DFS)}
        ids = ids_solve(kb, goals)
        assert bool(dfs) == bool(ids.solutions)
        if dfs:
            assert ids.first.depth_found == min(dfs)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_determinism(seed):
    rb = random_rulebase(random.Random(seed))
    text = rb.program()
    out = []
    for _ in range(2):
        kb = parse_program(text)
        out.append([[dumps_proof(s.proof) for s in solve(kb, parse_query(q.text()))]
                    for q in rb.ground_queries()])
    assert out[0] == out[1]
