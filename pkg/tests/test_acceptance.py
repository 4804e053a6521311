"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary) and
then asserts, so a red criterion is both visible and failing.
"""

import json
import random
import time
from fractions import Fraction

import conftest
from prooftrace.engine import (FactNode, RuleNode, SearchConfig, Strategy, check_proof,
                               classify_answer, dumps_proof, ids_solve, proof_depth, solve)
from prooftrace.harness import (DEPTH_BUCKETS, STATEMENT_BUCKETS, OfflineSource, emit_report,
                                load_dataset, run_eval, score_predictions)
from prooftrace.metrics import ged, proof_exact_match, proof_similarity, tree_to_dag
from prooftrace.parser import parse_program, parse_query, parse_term
from prooftrace.terms import Num, Struct, Var

from oracles import (brute_ged, fixpoint, left_recursive_corpus, oracle_label, random_graph,
                     random_rulebase)

SEED = 20240601


def record(n, text, ok, detail=""):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {text}" + (f"  [{detail}]" if detail else "")
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def corpus(n=200, seed=SEED):
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        rb = random_rulebase(rng)
        out.append((rb, parse_program(rb.program())))
    return out


# 1 -----------------------------------------------------------------------

def test_criterion_1_oracle_equivalence():
    start = time.perf_counter()
    agree = total = 0
    for rb, kb in corpus():
        model = fixpoint(rb)
        for q in rb.ground_queries():
            total += 1
            got = classify_answer(kb, parse_term(q.text())).label.value
            agree += got == oracle_label(model, q)
    elapsed = time.perf_counter() - start
    record(1, "classify_answer vs forward-chaining oracle on 200 rulebases",
           agree == total and elapsed < 60,
           f"{agree}/{total} queries agree, {elapsed:.1f}s")


# 2 -----------------------------------------------------------------------

def _proofs():
    out = []
    for rb, kb in corpus(60, SEED + 1):
        for q in rb.ground_queries():
            goals = parse_query(q.text())
            for strategy in Strategy:
                for sol in solve(kb, goals, SearchConfig(strategy=strategy)):
                    out.append((kb, sol.proof))
            for sol in ids_solve(kb, goals):
                out.append((kb, sol.proof))
    return out


def _nodes(proof, path=()):
    yield path, proof
    for i, c in enumerate(getattr(proof, "children", ())):
        yield from _nodes(c, path + (i,))


def _replace(proof, path, new):
    if not path:
        return new
    kids = list(proof.children)
    kids[path[0]] = _replace(kids[path[0]], path[1:], new)
    return RuleNode(proof.head, proof.provenance, tuple(kids))


def _relabel(node):
    head = node.head
    fresh = Struct("mutated_" + head.functor, head.args) if isinstance(head, Struct) else parse_term("mutated")
    if isinstance(node, RuleNode):
        return RuleNode(fresh, node.provenance, node.children)
    return FactNode(fresh, node.provenance)


def _functor(node):
    return node.head.functor if isinstance(node.head, Struct) else node.head.name


def mutate(rng, kb, proof, kind):
    nodes = list(_nodes(proof))
    if kind == "child order":
        nodes = [(p, n) for p, n in nodes if isinstance(n, RuleNode)
                 and len({_functor(c) for c in n.children}) > 1]
        if not nodes:
            return None
        path, node = rng.choice(nodes)
        kids = list(node.children)
        i, j = rng.sample(range(len(kids)), 2)
        while _functor(kids[i]) == _functor(kids[j]):
            i, j = rng.sample(range(len(kids)), 2)
        kids[i], kids[j] = kids[j], kids[i]
        return _replace(proof, path, RuleNode(node.head, node.provenance, tuple(kids)))
    path, node = rng.choice(nodes)
    if kind == "label":
        return _replace(proof, path, _relabel(node))
    fresh = "mutated_id"
    if isinstance(node, RuleNode):
        return _replace(proof, path, RuleNode(node.head, fresh, node.children))
    return _replace(proof, path, FactNode(node.head, fresh))


def test_criterion_2_replay_and_mutation():
    proofs = _proofs()
    accepted = sum(1 for kb, p in proofs if check_proof(kb, p))
    rng = random.Random(SEED)
    kinds = ["label", "provenance", "child order"]
    rejected = done = 0
    per_kind = {k: 0 for k in kinds}
    while done < 100:
        kind = kinds[done % 3]
        kb, proof = rng.choice(proofs)
        mutant = mutate(rng, kb, proof, kind)
        if mutant is None:
            continue
        done += 1
        per_kind[kind] += 1
        rejected += not check_proof(kb, mutant)
    record(2, "emitted proofs replay; single-node mutations are rejected",
           accepted == len(proofs) and rejected == 100 and len(proofs) > 0,
           f"{accepted}/{len(proofs)} replayed, {rejected}/100 mutants rejected {per_kind}")


# 3 -----------------------------------------------------------------------

DFS_BUDGET = 100_000   # per program; one program is also run at the default budget


def test_criterion_3_ids_vs_dfs():
    programs = left_recursive_corpus()
    ids_ok = dfs_ok = 0
    for name, text, query in programs:
        kb = parse_program(text)
        goals = parse_query(query)
        r = ids_solve(kb, goals, SearchConfig(max_depth=20, max_solutions=1))
        ids_ok += bool(r.solutions)
        d = solve(kb, goals, SearchConfig(strategy=Strategy.DFS, step_budget=DFS_BUDGET, max_solutions=1))
        dfs_ok += d.budget_exhausted and not d.solutions
    name, text, query = programs[0]
    full = solve(parse_program(text), parse_query(query),
                 SearchConfig(strategy=Strategy.DFS, max_solutions=1))
    record(3, "IDS answers all 20 left-recursive programs; DFS exhausts its budget on all 20",
           len(programs) == 20 and ids_ok == 20 and dfs_ok == 20 and full.budget_exhausted,
           f"ids {ids_ok}/20, dfs exhausted {dfs_ok}/20 at {DFS_BUDGET} steps, "
           f"{name} exhausted at default {full.steps} steps: {full.budget_exhausted}")


# 4 -----------------------------------------------------------------------

def test_criterion_4_ged_oracle():
    rng = random.Random(SEED)
    equal = in_range = iff = 0
    for _ in range(100):
        a, b = random_graph(rng, 6), random_graph(rng, 6)
        res = ged(a, b)
        equal += res.exact and res.distance == brute_ged(a, b)
        sim = proof_similarity(a, b, True)
        in_range += 0 <= sim <= 1
        iff += (sim == 1) == (proof_exact_match(a, b, True) == 1)
    record(4, "exact GED equals exhaustive enumeration on 100 pairs; similarity in [0,1]; sim=1 iff exact match",
           equal == in_range == iff == 100, f"equal {equal}, in range {in_range}, iff {iff}")


# 5 -----------------------------------------------------------------------

def _random_dataset(tmp_path, n=40):
    """Random rulebases as a proofwriter-style dataset with gold programs and proofs."""
    data = tmp_path / "random.jsonl"
    progs = tmp_path / "random_progs"
    progs.mkdir()
    rng = random.Random(SEED + 5)
    lines = []
    i = 0
    while len(lines) < n:
        rb = random_rulebase(rng)
        kb = parse_program(rb.program())
        queries = list(rb.ground_queries())
        q = rng.choice(queries)
        c = classify_answer(kb, parse_term(q.text()))
        proofs = [tree_to_dag(c.proof).to_dict()]
        iid = f"r{i}"
        i += 1
        (progs / f"{iid}.pl").write_text(rb.program() + f"?- {q.text()}.\n")
        triples = {ident: {"text": lit.text()} for lit, ident in rb.facts}
        rules = {r.ident: {"text": r.ident} for r in rb.rules}
        depth = None if c.proof is None else proof_depth(c.proof) - 1
        lines.append(json.dumps({"id": iid, "triples": triples, "rules": rules, "question": q.text(),
                                 "answer": c.label.value, "depth": depth, "proofs": proofs}))
    data.write_text("\n".join(lines) + "\n")
    return load_dataset(data, "proofwriter").records, progs


def _bounded(report):
    groups = [report.overall] + list(report.breakdowns.values())
    return all(m.proof_similarity_all <= m.answer_accuracy and
               (m.proof_accuracy_all is None or m.proof_accuracy_all <= m.answer_accuracy)
               for m in groups)


def _corrupt(rng, text):
    lines = text.splitlines()
    choice = rng.randrange(5)
    if choice == 0:
        return text.replace(":-", ";", 1) if ":-" in text else text + "bad ; x.\n"
    if choice == 1:
        return "\n".join(l.replace("neg_", "") if not l.startswith("?-") else l for l in lines) + "\n"
    if choice == 2:
        keep = [l for l in lines if l.startswith("?-") or rng.random() < 0.5]
        return "\n".join(keep) + "\n"
    if choice == 3:
        return "\n".join(l.replace("?- ", "?- neg_") if not l.startswith("?- neg_") else
                         l.replace("?- neg_", "?- ") for l in lines) + "\n"
    return "\n".join(l for l in lines if not l.startswith("% id:")) + "\n"


def test_criterion_5_metric_self_consistency(fixtures, tmp_path):
    runs = []
    for name, fmt in (("proofwriter", "proofwriter"), ("prontoqa", "prontoqa"), ("gsm8k", "gsm8k_proofs")):
        recs = load_dataset(fixtures / f"{name}.jsonl", fmt).records
        runs.append(run_eval(recs, OfflineSource(fixtures / "programs" / name)))
    recs, progs = _random_dataset(tmp_path)
    runs.append(run_eval(recs, OfflineSource(progs)))
    perfect = [r.answer_accuracy == r.proof_similarity_all == r.proof_accuracy_all == 1 for r in runs]

    rng = random.Random(SEED)
    adversarial = []
    for trial in range(8):
        bad = tmp_path / f"corrupt{trial}"
        bad.mkdir()
        for p in progs.iterdir():
            text = p.read_text()
            (bad / p.name).write_text(_corrupt(rng, text) if rng.random() < 0.6 else text)
        adversarial.append(run_eval(recs, OfflineSource(bad)))
    for trial in range(8):
        preds = {}
        for r in recs:
            if rng.random() < 0.2:
                continue
            preds[r.instance_id] = {
                "answer": rng.choice(["True", "False", "Unknown"]),
                "proof": (r.gold_proofs[0] if rng.random() < 0.5 else random_graph(rng, 5)).to_dict(),
            }
        adversarial.append(score_predictions(recs, preds))
    bounded = [_bounded(r) for r in runs + adversarial]
    partitions = all(sum(r.breakdowns[b].n for b in buckets) == r.overall.n
                     for r in runs + adversarial for buckets in (DEPTH_BUCKETS, STATEMENT_BUCKETS))
    record(5, "gold programs and proofs score exactly 1; answer accuracy bounds proof metrics on every run",
           all(perfect) and all(bounded) and partitions,
           f"perfect {sum(perfect)}/{len(perfect)}, bounded {sum(bounded)}/{len(bounded)} "
           f"(incl. {len(adversarial)} corrupted)")


# 6 -----------------------------------------------------------------------

def test_criterion_6_worked_snippets():
    snippets = ["green(fiona).", "quiet(X) :-\n    red(X), rough(X).", "wage(18.00).",
                "overtime_wage(W) :-\n    wage(W1),\n    W is 1.5 * W1."]
    parsed = sum(len(parse_program(s).clauses) == 1 for s in snippets)
    kb = parse_program(snippets[2] + "\n" + snippets[3])
    w = solve(kb, parse_query("overtime_wage(W)")).first.answer_bindings[Var("W")]
    exact = isinstance(w, Num) and w.value == Fraction(27) and isinstance(w.value, Fraction)
    kb = parse_program("% id: t1\nred(fiona).\n% id: t2\nrough(fiona).\n% id: r1\n" + snippets[1])
    g = tree_to_dag(solve(kb, parse_query("quiet(fiona)")).first.proof)
    record(6, "worked snippets parse; wage gives W = 27 exactly; quiet(fiona) DAG is 3 nodes / 2 edges",
           parsed == 4 and exact and len(g.nodes) == 3 and len(g.edges) == 2,
           f"parsed {parsed}/4, W = {w}, dag {len(g.nodes)}n/{len(g.edges)}e")


# 7 -----------------------------------------------------------------------

def _distractors(rng, n=50):
    out = []
    for i in range(n):
        name = f"distractor{i % 7}"
        if rng.random() < 0.5:
            out.append(f"% id: d{i}\n{name}({rng.choice('abc')}).")
        else:
            other = f"distractor{rng.randrange(7)}"
            out.append(f"% id: d{i}\n{name}(X) :- {other}(X), {other}(Y).")
    return "\n".join(out) + "\n"


def test_criterion_7_distractor_invariance():
    rng = random.Random(SEED)
    trials = same = 0
    for rb, kb in corpus(400, SEED + 7):
        if trials == 50:
            break
        provable = list(fixpoint(rb))
        if not provable:
            continue
        q = parse_query(rng.choice(provable).text())
        before = dumps_proof(solve(kb, q).first.proof)
        noisy = parse_program(rb.program() + _distractors(rng))
        assert len(noisy.clauses) == len(kb.clauses) + 50
        after = dumps_proof(solve(noisy, q).first.proof)
        trials += 1
        same += before == after
    record(7, "appending 50 unrelated clauses leaves the first proof byte-identical",
           trials == 50 and same == 50, f"{same}/{trials}")


# 8 -----------------------------------------------------------------------

def test_criterion_8_determinism(fixtures, tmp_path):
    recs, progs = _random_dataset(tmp_path)
    recs += load_dataset(fixtures / "proofwriter.jsonl", "proofwriter").records
    both = fixtures / "programs" / "proofwriter"
    for p in both.iterdir():
        (progs / p.name).write_text(p.read_text())
    outs = []
    for k in range(2):
        out = tmp_path / f"report{k}"
        emit_report(run_eval(recs, OfflineSource(progs), workers=1 + 3 * k), out)
        outs.append({p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()})
    record(8, "two offline end-to-end runs give byte-identical reports",
           outs[0] == outs[1] and len(outs[0]) == len(recs) + 2,
           f"{len(outs[0])} files compared")
