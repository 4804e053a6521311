"""SLD resolution with proof recording, depth-limited and iterative deepening
search, builtins, negation as failure and an independent proof checker.

The search is iterative (explicit goal list and choicepoint stack), so deep
or divergent derivations are bounded by the step budget rather than by the
Python stack.  Proof structure is recorded as a persistent event list that
is rebuilt into a tree for every solution.
"""

from __future__ import annotations

import gc
import json
import threading
import weakref
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional, Union

from .terms import (
    BUILTIN_OPS, Atom, Builtin, Call, Clause, CyclicTermError, KnowledgeBase,
    Naf, Num, Struct, Substitution, Term, Var, _unify, canonical_render,
    goal_term, is_ground, predicate_key, rename_apart, resolve, term_vars, walk,
)

__all__ = [
    "Strategy", "SearchConfig", "FactNode", "RuleNode", "BuiltinNode", "NafNode",
    "QueryNode", "ProofNode", "Solution", "SolveResult", "AnswerLabel",
    "Classification", "ProofCheck", "EngineError", "InstantiationError",
    "DivisionByZero", "EvaluationError", "FlounderingError",
    "solve", "depth_limited_solve", "ids_solve", "call_builtin", "solve_naf",
    "classify_answer", "check_proof", "evaluate", "proof_depth",
    "proof_to_dict", "proof_from_dict", "dumps_proof", "solution_to_dict",
]

NEG_PREFIX = "neg_"


class Strategy(str, Enum):
    DFS = "dfs"
    IDS = "ids"


@dataclass(frozen=True)
class SearchConfig:
    strategy: Strategy = Strategy.IDS
    max_depth: int = 20
    max_solutions: int = 20
    step_budget: int = 1_000_000
    occurs_check: bool = False

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.max_depth < 1 or self.max_solutions < 1 or self.step_budget < 1:
            raise ValueError("max_depth, max_solutions and step_budget must be >= 1")


class EngineError(Exception):
    """An error that aborts the current branch of a search."""


class InstantiationError(EngineError):
    pass


class EvaluationError(EngineError):
    pass


class DivisionByZero(EngineError, ZeroDivisionError):
    pass


class FlounderingError(EngineError):
    pass


# ---------------------------------------------------------------------------
# proof trees
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FactNode:
    head: Term
    provenance: Optional[str] = None


@dataclass(frozen=True)
class RuleNode:
    head: Term
    provenance: Optional[str]
    children: tuple


@dataclass(frozen=True)
class BuiltinNode:
    goal: Term
    # the value bound by ``is``; True for tests and unification
    result: Union[Term, bool] = True


@dataclass(frozen=True)
class NafNode:
    goal: Term
    depth_limit: int


@dataclass(frozen=True)
class QueryNode:
    """Synthetic root joining the proofs of a multi-goal query."""
    children: tuple


ProofNode = Union[FactNode, RuleNode, BuiltinNode, NafNode, QueryNode]


def proof_depth(node: ProofNode) -> int:
    """Resolution depth: fact and rule nodes count one level, others none."""
    if isinstance(node, FactNode):
        return 1
    if isinstance(node, RuleNode):
        return 1 + max((proof_depth(c) for c in node.children), default=0)
    if isinstance(node, QueryNode):
        return max((proof_depth(c) for c in node.children), default=0)
    return 0


def proof_to_dict(node: ProofNode) -> dict:
    if isinstance(node, FactNode):
        return {"kind": "fact", "label": canonical_render(node.head),
                "provenance": node.provenance, "children": []}
    if isinstance(node, RuleNode):
        return {"kind": "rule", "label": canonical_render(node.head),
                "provenance": node.provenance,
                "children": [proof_to_dict(c) for c in node.children]}
    if isinstance(node, BuiltinNode):
        result = "true" if node.result is True else canonical_render(node.result)
        return {"kind": "builtin", "label": canonical_render(node.goal),
                "provenance": None, "children": [], "result": result}
    if isinstance(node, NafNode):
        return {"kind": "naf", "label": canonical_render(node.goal),
                "provenance": None, "children": [], "depth_limit": node.depth_limit}
    children = [proof_to_dict(c) for c in node.children]
    return {"kind": "query", "label": ", ".join(c["label"] for c in children),
            "provenance": None, "children": children}


def proof_from_dict(d: dict) -> ProofNode:
    from .parser import parse_term

    kind = d["kind"]
    children = tuple(proof_from_dict(c) for c in d.get("children", ()))
    if kind == "query":
        return QueryNode(children)
    label = parse_term(d["label"])
    if kind == "fact":
        return FactNode(label, d.get("provenance"))
    if kind == "rule":
        return RuleNode(label, d.get("provenance"), children)
    if kind == "builtin":
        result = d.get("result", "true")
        return BuiltinNode(label, True if result == "true" else parse_term(result))
    if kind == "naf":
        return NafNode(label, int(d["depth_limit"]))
    raise ValueError(f"unknown proof node kind {kind!r}")


def dumps_proof(node: ProofNode) -> str:
    return json.dumps(proof_to_dict(node), ensure_ascii=False)


@dataclass(frozen=True)
class Solution:
    answer_bindings: Substitution
    proof: ProofNode
    depth_found: int
    steps_used: int


def solution_to_dict(sol: Solution) -> dict:
    return {
        "bindings": {canonical_render(k): canonical_render(v) for k, v in sol.answer_bindings.items()},
        "depth": sol.depth_found,
        "steps": sol.steps_used,
        "proof": proof_to_dict(sol.proof),
    }


@dataclass
class SolveResult:
    solutions: list = field(default_factory=list)
    budget_exhausted: bool = False
    # IDS reached max_depth with branches still cut off by the limit
    depth_exhausted: bool = False
    steps: int = 0
    diagnostics: list = field(default_factory=list)

    def __len__(self):
        return len(self.solutions)

    def __iter__(self):
        return iter(self.solutions)

    def __getitem__(self, i):
        return self.solutions[i]

    @property
    def first(self) -> Optional[Solution]:
        return self.solutions[0] if self.solutions else None


# ---------------------------------------------------------------------------
# arithmetic and builtins
# ---------------------------------------------------------------------------

def evaluate(t, bindings=None) -> Fraction:
    """Exact rational value of an arithmetic expression."""
    bindings = bindings or {}
    t = walk(t, bindings)
    if isinstance(t, Num):
        return t.value
    if isinstance(t, Var):
        raise InstantiationError(f"arguments are not sufficiently instantiated: {canonical_render(t)}")
    if isinstance(t, Struct):
        if len(t.args) == 2 and t.functor in ("+", "-", "*", "/"):
            a = evaluate(t.args[0], bindings)
            b = evaluate(t.args[1], bindings)
            if t.functor == "+":
                return a + b
            if t.functor == "-":
                return a - b
            if t.functor == "*":
                return a * b
            if b == 0:
                raise DivisionByZero(f"division by zero in {canonical_render(resolve(t, bindings))}")
            return a / b
        if len(t.args) == 1 and t.functor in ("-", "+"):
            v = evaluate(t.args[0], bindings)
            return -v if t.functor == "-" else v
    raise EvaluationError(f"not an arithmetic expression: {canonical_render(resolve(t, bindings))}")


_COMPARE = {
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
    "=<": lambda a, b: a <= b,
    ">=": lambda a, b: a >= b,
    "=:=": lambda a, b: a == b,
    "=\\=": lambda a, b: a != b,
}


def _builtin(op, args, bindings, trail, occurs_check):
    """Run a builtin against the mutable store. Returns the recorded result or None."""
    left, right = args
    if op == "is":
        value = Num(evaluate(right, bindings))
        return value if _unify(left, value, bindings, trail, occurs_check) else None
    if op == "=":
        return True if _unify(left, right, bindings, trail, occurs_check) else None
    if op == "==":
        return True if resolve(left, bindings) == resolve(right, bindings) else None
    if op == "\\==":
        return True if resolve(left, bindings) != resolve(right, bindings) else None
    return True if _COMPARE[op](evaluate(left, bindings), evaluate(right, bindings)) else None


def call_builtin(goal: Builtin, s=None, occurs_check: bool = False):
    """Apply a builtin goal under substitution ``s``.

    Returns the extended Substitution, or None when the builtin fails.
    Raises InstantiationError / DivisionByZero / EvaluationError.
    """
    bindings = dict(s or {})
    if _builtin(goal.op, goal.args, bindings, [], occurs_check) is None:
        return None
    return Substitution({v: resolve(t, bindings) for v, t in bindings.items()})


# ---------------------------------------------------------------------------
# search
# ---------------------------------------------------------------------------

class _BudgetOut(Exception):
    pass


class _Budget:
    __slots__ = ("steps", "limit")

    def __init__(self, limit):
        self.steps = 0
        self.limit = limit

    def tick(self):
        if self.steps >= self.limit:
            raise _BudgetOut()
        self.steps += 1


_gc_lock = threading.Lock()
_gc_users = 0
_gc_restore = False


@contextmanager
def _gc_paused():
    # A search allocates many long-lived tuples and no reference cycles, so
    # cyclic collection passes over the growing goal list are pure overhead
    # (about half the run time on long searches).  Reentrant across threads.
    global _gc_users, _gc_restore
    with _gc_lock:
        if _gc_users == 0:
            _gc_restore = gc.isenabled()
            gc.disable()
        _gc_users += 1
    try:
        yield
    finally:
        with _gc_lock:
            _gc_users -= 1
            if _gc_users == 0 and _gc_restore:
                gc.enable()


_COMPILED: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _compiled(kb: KnowledgeBase) -> list:
    """Per-clause (renamer or None, head, body, provenance), cached per kb."""
    table = _COMPILED.get(kb)
    if table is None:
        table = [(c.renamer if c.variables else None, c.head, c.body, c.provenance) for c in kb.clauses]
        _COMPILED[kb] = table
    return table


class _Searcher:
    def __init__(self, kb: KnowledgeBase, cfg: SearchConfig, budget: _Budget, diagnostics: list):
        self.kb = kb
        self.cfg = cfg
        self.budget = budget
        self.diagnostics = diagnostics
        self.cutoff = False

    def solutions(self, query, limit):
        """Yield (events, bindings) for each solution in DFS order.

        ``limit`` bounds the resolution depth of every fact/rule node;
        None means unbounded.  The bindings dict is live and must be
        consumed before advancing the generator.
        """
        compiled = _compiled(self.kb)
        index = self.kb.index
        budget = self.budget
        occurs = self.cfg.occurs_check
        bindings: dict = {}
        trail: list = []
        choices: list = []
        unify = _unify

        goals = None
        for i in range(len(query) - 1, -1, -1):
            goals = ((query[i], i, 1), goals)
        next_id = len(query)
        events = None
        resume = None

        def undo(mark):
            while len(trail) > mark:
                del bindings[trail.pop()]

        while True:
            if resume is None:
                if goals is None:
                    yield events, bindings
                    if not choices:
                        return
                    resume = choices.pop()
                    undo(resume[4])
                    continue
                entry, rest = goals
                goal, node_id, depth = entry
                if type(goal) is Call:
                    if limit is not None and depth > limit:
                        self.cutoff = True
                        cands = ()
                    else:
                        term = goal.term
                        key = (term[0], len(term[1])) if type(term) is Struct else (term[0], 0)
                        cands = index.get(key, ())
                    idx = 0
                else:
                    ok = self._side_goal(goal, node_id, bindings, trail)
                    if ok is not None:
                        events = (ok, events)
                        goals = rest
                        continue
                    cands, idx = (), 0
            else:
                entry, rest, cands, idx, _, events = resume
                resume = None
                goal, node_id, depth = entry

            # try the remaining candidate clauses for this call
            n = len(cands)
            pushed = False
            if n:
                term = goal.term
            while idx < n:
                if budget.steps >= budget.limit:
                    raise _BudgetOut()
                budget.steps += 1
                renamer, head, body, provenance = compiled[cands[idx]]
                idx += 1
                if renamer is not None:
                    head, body = renamer(budget.steps)
                mark = len(trail)
                if unify(term, head, bindings, trail, occurs):
                    if idx < n:
                        choices.append((entry, rest, cands, idx, mark, events))
                    if body:
                        nb = len(body)
                        ids = tuple(range(next_id, next_id + nb))
                        next_id += nb
                        new = rest
                        d1 = depth + 1
                        for j in range(nb - 1, -1, -1):
                            new = ((body[j], ids[j], d1), new)
                        goals = new
                        events = (("rule", node_id, term, provenance, ids), events)
                    else:
                        goals = rest
                        events = (("fact", node_id, term, provenance), events)
                    pushed = True
                    break
                undo(mark)
            if pushed:
                continue
            if not choices:
                return
            resume = choices.pop()
            undo(resume[4])

    def _side_goal(self, goal, node_id, bindings, trail):
        """Builtin or negated goal; returns the proof event or None on failure."""
        self.budget.tick()
        mark = len(trail)
        try:
            if type(goal) is Builtin:
                result = _builtin(goal.op, goal.args, bindings, trail, self.cfg.occurs_check)
                if result is not None:
                    return ("builtin", node_id, Struct(goal.op, goal.args), result)
            else:
                inner = resolve(goal_term(goal.inner), bindings)
                if not self.naf_holds(inner, self.cfg.max_depth):
                    return None
                return ("naf", node_id, inner, self.cfg.max_depth)
        except (EngineError, CyclicTermError) as exc:
            self.diagnostics.append(f"{type(exc).__name__}: {exc}")
        while len(trail) > mark:
            del bindings[trail.pop()]
        return None

    def naf_holds(self, goal: Term, limit: int) -> bool:
        """True iff the ground ``goal`` has no proof within ``limit``."""
        if not is_ground(goal):
            raise FlounderingError(f"negated goal is not ground: {canonical_render(goal)}")
        if isinstance(goal, Struct) and goal.functor in BUILTIN_OPS and len(goal.args) == 2:
            return _builtin(goal.functor, goal.args, {}, [], self.cfg.occurs_check) is None
        sub = _Searcher(self.kb, self.cfg, self.budget, self.diagnostics)
        for _ in sub.solutions((Call(goal),), limit):
            return False
        return True


def _build_solution(query, events, bindings, steps) -> Solution:
    nodes = {}
    ev = events
    while ev is not None:
        e, ev = ev
        kind = e[0]
        if kind == "fact":
            node = FactNode(resolve(e[2], bindings), e[3])
        elif kind == "rule":
            node = RuleNode(resolve(e[2], bindings), e[3], tuple(nodes[c] for c in e[4]))
        elif kind == "builtin":
            result = e[3] if e[3] is True else resolve(e[3], bindings)
            node = BuiltinNode(resolve(e[2], bindings), result)
        else:
            node = NafNode(e[2], e[3])
        nodes[e[1]] = node
    roots = tuple(nodes[i] for i in range(len(query)))
    proof = roots[0] if len(roots) == 1 else QueryNode(roots)
    answer = {}
    for g in query:
        for v in term_vars(goal_term(g)):
            if v not in answer:
                value = resolve(v, bindings)
                if value != v:
                    answer[v] = value
    return Solution(Substitution(answer), proof, proof_depth(proof), steps)


def _collect(searcher, query, limit, max_solutions, result: SolveResult):
    for events, bindings in searcher.solutions(query, limit):
        try:
            sol = _build_solution(query, events, bindings, searcher.budget.steps)
        except CyclicTermError as exc:
            result.diagnostics.append(f"CyclicTermError: {exc}")
            continue
        result.solutions.append(sol)
        if len(result.solutions) >= max_solutions:
            break


def _as_goals(query):
    if isinstance(query, (Call, Builtin, Naf)):
        return (query,)
    if isinstance(query, (Atom, Struct)):
        return (Call(query),)
    return tuple(Call(g) if isinstance(g, (Atom, Struct)) else g for g in query)


def depth_limited_solve(kb: KnowledgeBase, query, limit: int, cfg: SearchConfig = SearchConfig()) -> SolveResult:
    """DFS solutions whose proof depth is at most ``limit``, in DFS order."""
    if limit < 1:
        raise ValueError("limit must be >= 1")
    query = _as_goals(query)
    result = SolveResult()
    budget = _Budget(cfg.step_budget)
    searcher = _Searcher(kb, cfg, budget, result.diagnostics)
    try:
        with _gc_paused():
            _collect(searcher, query, limit, cfg.max_solutions, result)
    except _BudgetOut:
        result.budget_exhausted = True
    result.steps = budget.steps
    return result


def ids_solve(kb: KnowledgeBase, query, cfg: SearchConfig = SearchConfig()) -> SolveResult:
    """Iterative deepening: limits 1..max_depth, stopping at the first limit
    that yields a solution (explored fully, up to max_solutions)."""
    query = _as_goals(query)
    result = SolveResult()
    budget = _Budget(cfg.step_budget)
    try:
        with _gc_paused():
            for limit in range(1, cfg.max_depth + 1):
                searcher = _Searcher(kb, cfg, budget, result.diagnostics)
                _collect(searcher, query, limit, cfg.max_solutions, result)
                if result.solutions or not searcher.cutoff:
                    break
            else:
                result.depth_exhausted = True
    except _BudgetOut:
        result.budget_exhausted = True
    result.steps = budget.steps
    return result


def solve(kb: KnowledgeBase, query, cfg: SearchConfig = SearchConfig()) -> SolveResult:
    """Solve ``query`` (a goal list, a single goal or a term) against ``kb``.

    DFS runs without a depth limit and stops only on exhaustion, on
    ``max_solutions`` or when the step budget runs out.
    """
    if cfg.strategy is Strategy.IDS:
        return ids_solve(kb, query, cfg)
    query = _as_goals(query)
    result = SolveResult()
    budget = _Budget(cfg.step_budget)
    searcher = _Searcher(kb, cfg, budget, result.diagnostics)
    try:
        with _gc_paused():
            _collect(searcher, query, None, cfg.max_solutions, result)
    except _BudgetOut:
        result.budget_exhausted = True
    result.steps = budget.steps
    return result


def solve_naf(kb: KnowledgeBase, goal: Naf, depth_limit: int, cfg: SearchConfig = SearchConfig(),
              s=None) -> Optional[NafNode]:
    """NafNode when the (ground) negated goal has no proof within ``depth_limit``,
    None when it does.  Raises FlounderingError on a non-ground goal."""
    inner = resolve(goal_term(goal.inner), dict(s or {}))
    searcher = _Searcher(kb, cfg, _Budget(cfg.step_budget), [])
    try:
        holds = searcher.naf_holds(inner, depth_limit)
    except _BudgetOut:
        raise EngineError("step budget exhausted while evaluating negation") from None
    return NafNode(inner, depth_limit) if holds else None


# ---------------------------------------------------------------------------
# answers
# ---------------------------------------------------------------------------

class AnswerLabel(str, Enum):
    TRUE = "True"
    FALSE = "False"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class Classification:
    label: AnswerLabel
    proof: Optional[ProofNode] = None
    inconsistent: bool = False
    budget_exhausted: bool = False
    steps: int = 0


def negate_statement(statement: Term) -> Term:
    """``p(a)`` <-> ``neg_p(a)``."""
    if isinstance(statement, Atom):
        name = statement.name
    elif isinstance(statement, Struct):
        name = statement.functor
    else:
        raise ValueError(f"statement must be an atom or compound: {statement!r}")
    flipped = name[len(NEG_PREFIX):] if name.startswith(NEG_PREFIX) else NEG_PREFIX + name
    if isinstance(statement, Atom):
        return Atom(flipped)
    return Struct(flipped, statement.args)


def classify_answer(kb: KnowledgeBase, statement: Term, cfg: SearchConfig = SearchConfig()) -> Classification:
    """True / False / Unknown under the open world with ``neg_`` literals."""
    one = SearchConfig(cfg.strategy, cfg.max_depth, 1, cfg.step_budget, cfg.occurs_check)
    pos = solve(kb, [Call(statement)], one)
    neg = solve(kb, [Call(negate_statement(statement))], one)
    exhausted = pos.budget_exhausted or neg.budget_exhausted
    steps = pos.steps + neg.steps
    if pos.solutions:
        return Classification(AnswerLabel.TRUE, pos.first.proof, bool(neg.solutions), exhausted, steps)
    if neg.solutions:
        return Classification(AnswerLabel.FALSE, neg.first.proof, False, exhausted, steps)
    return Classification(AnswerLabel.UNKNOWN, None, False, exhausted, steps)


# ---------------------------------------------------------------------------
# proof checking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProofCheck:
    ok: bool
    reason: str = ""
    node: Optional[ProofNode] = None

    def __bool__(self):
        return self.ok


class _Reject(Exception):
    def __init__(self, node, reason):
        self.node = node
        self.reason = reason


_PATTERN = -1  # variable index reserved for clause variables during checking


def _match(pattern, term, b) -> bool:
    """One-way matching: only pattern (clause) variables may be bound."""
    stack = [(pattern, term)]
    while stack:
        p, t = stack.pop()
        if isinstance(p, Var) and p.index == _PATTERN:
            bound = b.get(p)
            if bound is None:
                b[p] = t
            elif bound != t:
                return False
        elif isinstance(p, Struct):
            if not isinstance(t, Struct) or p.functor != t.functor or len(p.args) != len(t.args):
                return False
            stack.extend(zip(p.args, t.args))
        elif p != t:
            return False
    return True


def _child_term(goal, child):
    """Term a body goal must match in ``child``, or None if kinds disagree."""
    if isinstance(goal, Call) and isinstance(child, (FactNode, RuleNode)):
        return goal.term, child.head
    if isinstance(goal, Builtin) and isinstance(child, BuiltinNode):
        return Struct(goal.op, goal.args), child.goal
    if isinstance(goal, Naf) and isinstance(child, NafNode):
        return goal_term(goal.inner), child.goal
    return None


def _instance_of(clause: Clause, node) -> bool:
    c = rename_apart(clause, _PATTERN)
    b: dict = {}
    if not _match(c.head, node.head, b):
        return False
    children = node.children if isinstance(node, RuleNode) else ()
    if len(children) != len(c.body):
        return False
    for goal, child in zip(c.body, children):
        pair = _child_term(goal, child)
        if pair is None or not _match(pair[0], pair[1], b):
            return False
    return True


def _check(kb, node, cfg):
    if isinstance(node, QueryNode):
        for child in node.children:
            _check(kb, child, cfg)
        return
    if isinstance(node, (FactNode, RuleNode)):
        key = predicate_key(node.head)
        label = canonical_render(node.head) if key else repr(node.head)
        if key is None:
            raise _Reject(node, f"{label} is not a callable term")
        want_fact = isinstance(node, FactNode)
        for i in kb.candidates(key):
            clause = kb.clauses[i]
            if clause.is_fact != want_fact or clause.provenance != node.provenance:
                continue
            if _instance_of(clause, node):
                break
        else:
            what = "fact" if want_fact else "rule"
            raise _Reject(node, f"no {what} with provenance {node.provenance!r} licenses {label}")
        for child in getattr(node, "children", ()):
            _check(kb, child, cfg)
        return
    if isinstance(node, BuiltinNode):
        goal = node.goal
        label = canonical_render(goal)
        if not (isinstance(goal, Struct) and goal.functor in BUILTIN_OPS and len(goal.args) == 2):
            raise _Reject(node, f"{label} is not a builtin goal")
        if not is_ground(goal) and goal.functor not in ("=", "==", "\\=="):
            raise _Reject(node, f"{label} is not ground")
        try:
            bindings: dict = {}
            result = _builtin(goal.functor, goal.args, bindings, [], cfg.occurs_check)
        except EngineError as exc:
            raise _Reject(node, f"{label} does not evaluate: {exc}") from None
        if result is None or bindings:
            raise _Reject(node, f"{label} does not hold")
        if result != node.result:
            raise _Reject(node, f"{label} evaluates to {result!r}, recorded {node.result!r}")
        return
    if isinstance(node, NafNode):
        label = canonical_render(node.goal)
        searcher = _Searcher(kb, cfg, _Budget(cfg.step_budget), [])
        try:
            holds = searcher.naf_holds(node.goal, node.depth_limit)
        except (EngineError, _BudgetOut) as exc:
            raise _Reject(node, f"cannot re-check \\+ {label}: {type(exc).__name__}") from None
        if not holds:
            raise _Reject(node, f"\\+ {label} fails: the goal is provable within depth {node.depth_limit}")
        return
    raise _Reject(node, f"unknown proof node {node!r}")


def check_proof(kb: KnowledgeBase, proof: ProofNode, cfg: SearchConfig = SearchConfig()) -> ProofCheck:
    """Replay ``proof`` against ``kb``; rejects with the first failing node."""
    try:
        _check(kb, proof, cfg)
    except _Reject as rej:
        return ProofCheck(False, rej.reason, rej.node)
    return ProofCheck(True)
