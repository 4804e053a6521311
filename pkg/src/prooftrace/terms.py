"""Terms, clauses, substitutions and unification.

Every value here is immutable once built. The engine keeps its own mutable
binding store during a search, but it goes through the same ``_unify`` and
``resolve`` routines defined below.
"""

from __future__ import annotations

import re
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from operator import itemgetter
from typing import Optional, Union

__all__ = [
    "Var", "Num", "Atom", "Struct", "Term",
    "Call", "Naf", "Builtin", "Goal", "BUILTIN_OPS",
    "Clause", "KnowledgeBase", "Substitution", "CyclicTermError",
    "unify", "apply", "resolve", "rename_apart", "canonical_render",
    "render_goal", "render_clause", "term_vars", "is_ground", "goal_term",
]

# Expansion cap for substitution chains; cyclic bindings are only possible
# with the occurs check off.
MAX_EXPANSION = 1000


class CyclicTermError(ValueError):
    """Raised when applying a substitution would expand a cyclic binding."""


# Terms are tuple subclasses: equality and hashing run at C speed, which
# matters because the search hashes variables on every dereference.  Field
# layouts never collide across classes (Var's index is an int where Struct
# holds an argument tuple).

class Var(tuple):
    __slots__ = ()

    def __new__(cls, name: str, index: int = 0):
        return tuple.__new__(cls, (name, index))

    name = property(itemgetter(0))
    index = property(itemgetter(1))

    def __getnewargs__(self):
        return tuple(self)

    def __repr__(self):
        return f"Var({canonical_render(self)})"


class Num(tuple):
    __slots__ = ()

    def __new__(cls, value):
        return tuple.__new__(cls, (Fraction(value),))

    value = property(itemgetter(0))

    def __getnewargs__(self):
        return tuple(self)

    def __repr__(self):
        return f"Num({canonical_render(self)})"


class Atom(tuple):
    __slots__ = ()

    def __new__(cls, name: str):
        return tuple.__new__(cls, (name,))

    name = property(itemgetter(0))

    def __getnewargs__(self):
        return tuple(self)

    def __repr__(self):
        return f"Atom({canonical_render(self)})"


class Struct(tuple):
    __slots__ = ()

    def __new__(cls, functor: str, args):
        args = tuple(args)
        if not args:
            raise ValueError("compound terms need at least one argument; use Atom")
        return tuple.__new__(cls, (functor, args))

    functor = property(itemgetter(0))
    args = property(itemgetter(1))

    @property
    def key(self) -> tuple[str, int]:
        return self[0], len(self[1])

    def __getnewargs__(self):
        return tuple(self)

    def __repr__(self):
        return f"Struct({canonical_render(self)})"


Term = Union[Var, Num, Atom, Struct]


BUILTIN_OPS = frozenset(
    ["is", "=", "==", "\\==", "<", ">", "=<", ">=", "=:=", "=\\="]
)


@dataclass(frozen=True, slots=True)
class Call:
    term: Term


@dataclass(frozen=True, slots=True)
class Builtin:
    op: str
    args: tuple

    def __post_init__(self):
        if self.op not in BUILTIN_OPS:
            raise ValueError(f"unknown builtin {self.op!r}")
        if not isinstance(self.args, tuple):
            object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True, slots=True)
class Naf:
    inner: Union[Call, Builtin]

    def __post_init__(self):
        if not isinstance(self.inner, (Call, Builtin)):
            raise ValueError("negation as failure wraps a single call or builtin")


Goal = Union[Call, Builtin, Naf]


def goal_term(goal: Goal) -> Term:
    """The term a goal is matched or recorded as (``\\+`` is stripped)."""
    if isinstance(goal, Call):
        return goal.term
    if isinstance(goal, Builtin):
        return Struct(goal.op, goal.args)
    return goal_term(goal.inner)


def predicate_key(term: Term) -> Optional[tuple[str, int]]:
    if isinstance(term, Struct):
        return term.functor, len(term.args)
    if isinstance(term, Atom):
        return term.name, 0
    return None


@dataclass(frozen=True)
class Clause:
    head: Term
    body: tuple = ()
    provenance: Optional[str] = None
    variables: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.head, (Atom, Struct)):
            raise ValueError(f"clause head must be an atom or compound, got {self.head!r}")
        if not isinstance(self.body, tuple):
            object.__setattr__(self, "body", tuple(self.body))
        seen: dict[Var, None] = {}
        for t in (self.head, *(goal_term(g) for g in self.body)):
            for v in term_vars(t):
                seen.setdefault(v)
        object.__setattr__(self, "variables", tuple(seen))

    @property
    def renamer(self):
        fn = self.__dict__.get("_renamer")
        if fn is None:
            fn = _compile_renamer(self)
            object.__setattr__(self, "_renamer", fn)
        return fn

    @property
    def is_fact(self) -> bool:
        return not self.body

    @property
    def key(self) -> tuple[str, int]:
        return predicate_key(self.head)


class KnowledgeBase:
    """An ordered, indexed collection of clauses.

    Clause order is source order and is what makes search deterministic.
    ``queries`` holds any ``?-`` directives found next to the clauses.
    """

    __slots__ = ("clauses", "index", "provenance_map", "queries", "__weakref__")

    def __init__(self, clauses=(), queries=()):
        self.clauses: tuple[Clause, ...] = tuple(clauses)
        index: dict[tuple[str, int], list[int]] = {}
        for i, c in enumerate(self.clauses):
            index.setdefault(c.key, []).append(i)
        self.index = {k: tuple(v) for k, v in index.items()}
        self.provenance_map = {
            i: c.provenance for i, c in enumerate(self.clauses) if c.provenance is not None
        }
        self.queries: tuple[tuple, ...] = tuple(tuple(q) for q in queries)

    def candidates(self, key) -> tuple[int, ...]:
        return self.index.get(key, ())

    def extend(self, clauses) -> "KnowledgeBase":
        return KnowledgeBase(self.clauses + tuple(clauses), self.queries)

    def __len__(self):
        return len(self.clauses)

    def __iter__(self):
        return iter(self.clauses)

    def __eq__(self, other):
        if not isinstance(other, KnowledgeBase):
            return NotImplemented
        return self.clauses == other.clauses and self.queries == other.queries

    __hash__ = object.__hash__

    def __repr__(self):
        return f"KnowledgeBase({len(self.clauses)} clauses)"


# ---------------------------------------------------------------------------
# substitutions
# ---------------------------------------------------------------------------

class Substitution(Mapping):
    """Immutable map from variables to terms."""

    __slots__ = ("_bindings",)

    def __init__(self, bindings=None):
        self._bindings = dict(bindings or {})

    def __getitem__(self, v):
        return self._bindings[v]

    def __iter__(self) -> Iterator[Var]:
        return iter(self._bindings)

    def __len__(self):
        return len(self._bindings)

    def __hash__(self):
        return hash(frozenset(self._bindings.items()))

    def __repr__(self):
        inner = ", ".join(
            f"{canonical_render(k)}→{canonical_render(v)}" for k, v in self._bindings.items()
        )
        return "{" + inner + "}"

    def __call__(self, t: Term) -> Term:
        return apply(self, t)


def walk(t, bindings):
    while type(t) is Var:
        nxt = bindings.get(t)
        if nxt is None:
            return t
        t = nxt
    return t


def _occurs(v, t, bindings) -> bool:
    stack = [t]
    while stack:
        t = walk(stack.pop(), bindings)
        if t == v:
            return True
        if type(t) is Struct:
            stack.extend(t[1])
    return False


def _unify(a, b, bindings: dict, trail: list, occurs_check: bool) -> bool:
    """Unify in triangular form, recording new bindings on ``trail``.

    On failure the caller is responsible for undoing the trail.
    """
    stack = [(a, b)]
    pop = stack.pop
    get = bindings.get
    while stack:
        x, y = pop()
        while type(x) is Var:
            nxt = get(x)
            if nxt is None:
                break
            x = nxt
        while type(y) is Var:
            nxt = get(y)
            if nxt is None:
                break
            y = nxt
        if x is y:
            continue
        tx = type(x)
        if tx is Var:
            if type(y) is Var and x == y:
                continue
            if occurs_check and _occurs(x, y, bindings):
                return False
            bindings[x] = y
            trail.append(x)
        elif type(y) is Var:
            if occurs_check and _occurs(y, x, bindings):
                return False
            bindings[y] = x
            trail.append(y)
        elif tx is Struct:
            if type(y) is not Struct or x[0] != y[0] or len(x[1]) != len(y[1]):
                return False
            stack.extend(zip(x[1], y[1]))
        elif x != y:
            return False
    return True


def resolve(t, bindings) -> Term:
    """Fully apply triangular ``bindings`` to ``t``.

    Raises CyclicTermError once a chain of variable expansions nested inside
    each other exceeds MAX_EXPANSION.
    """
    t = walk(t, bindings)
    if type(t) is not Struct:
        return t
    # Explicit stack: (struct, resolved args, expansion depth)
    root: list = []
    stack = [(t, [], 0)]
    while stack:
        s, done, depth = stack[-1]
        args = s[1]
        if len(done) == len(args):
            stack.pop()
            if all(a is b for a, b in zip(done, args)):
                built = s
            else:
                built = tuple.__new__(Struct, (s[0], tuple(done)))
            (stack[-1][1] if stack else root).append(built)
            continue
        arg = args[len(done)]
        d = depth
        while type(arg) is Var:
            nxt = bindings.get(arg)
            if nxt is None:
                break
            arg = nxt
            d += 1
        if d > MAX_EXPANSION:
            raise CyclicTermError(f"substitution expansion exceeded {MAX_EXPANSION} levels")
        if type(arg) is Struct:
            stack.append((arg, [], d))
        else:
            done.append(arg)
    return root[0]


def apply(s: Mapping, t: Term) -> Term:
    """Replace every bound variable of ``t`` by its binding, recursively."""
    bindings = s._bindings if isinstance(s, Substitution) else s
    if not bindings:
        return t
    return resolve(t, bindings)


def unify(t1: Term, t2: Term, s: Optional[Mapping] = None, occurs_check: bool = False):
    """Most general unifier of ``t1`` and ``t2`` extending ``s``, or None.

    The result is idempotent unless the occurs check is off and the terms
    force a cyclic binding, in which case the cyclic binding is kept as is.
    """
    bindings = dict(s or {})
    trail: list = []
    if not _unify(t1, t2, bindings, trail, occurs_check):
        return None
    solved = {}
    for v, b in bindings.items():
        try:
            solved[v] = resolve(b, bindings)
        except CyclicTermError:
            solved[v] = b
    return Substitution(solved)


# ---------------------------------------------------------------------------
# variables and renaming
# ---------------------------------------------------------------------------

def term_vars(t) -> Iterator[Var]:
    """Variables of ``t`` in left-to-right order (with repeats)."""
    stack = [t]
    while stack:
        t = stack.pop()
        if isinstance(t, Var):
            yield t
        elif isinstance(t, Struct):
            stack.extend(reversed(t.args))


def is_ground(t) -> bool:
    return next(term_vars(t), None) is None


def _compile_renamer(clause):
    """Build ``f(generation) -> (head, body)`` for ``clause``.

    The returned function constructs the renamed clause directly from
    generated source, skipping ground subterms entirely.
    """
    consts: list = []
    slots = {v: i for i, v in enumerate(clause.variables)}

    def const(x):
        consts.append(x)
        return f"k[{len(consts) - 1}]"

    def term_src(t):
        if type(t) is Var:
            return f"v{slots[t]}"
        if type(t) is Struct and not is_ground(t):
            args = "".join(term_src(a) + ", " for a in t[1])
            return f"_new(_S, ({const(t[0])}, ({args})))"
        return const(t)

    def goal_src(g):
        if type(g) is Call:
            return f"_C({term_src(g.term)})"
        if type(g) is Builtin:
            args = "".join(term_src(a) + ", " for a in g.args)
            return f"_B({const(g.op)}, ({args}))"
        return f"_N({goal_src(g.inner)})"

    head = term_src(clause.head)
    body = "".join(goal_src(g) + ", " for g in clause.body)
    names = "".join(f"v{i} = _new(_V, ({const(v.name)}, g)); " for i, v in enumerate(clause.variables))
    src = f"def rename(g):\n    {names}\n    return {head}, ({body})\n"
    env = {"_new": tuple.__new__, "_S": Struct, "_V": Var, "_C": Call, "_B": Builtin, "_N": Naf,
           "k": tuple(consts)}
    exec(compile(src, "<renamer>", "exec"), env)
    return env["rename"]


def rename_apart(c: Clause, generation: int) -> Clause:
    """Copy of ``c`` whose variables all carry ``generation`` as their index."""
    if not c.variables:
        return c
    head, body = c.renamer(generation)
    return Clause(head, body, c.provenance)


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

# name -> (precedence, type)
INFIX_OPS = {
    ":-": (1200, "xfx"),
    ",": (1000, "xfy"),
    "is": (700, "xfx"), "=": (700, "xfx"), "==": (700, "xfx"), "\\==": (700, "xfx"),
    "<": (700, "xfx"), ">": (700, "xfx"), "=<": (700, "xfx"), ">=": (700, "xfx"),
    "=:=": (700, "xfx"), "=\\=": (700, "xfx"),
    "+": (500, "yfx"), "-": (500, "yfx"),
    "*": (400, "yfx"), "/": (400, "yfx"),
}
PREFIX_OPS = {
    "\\+": (900, "fy"),
    "-": (200, "fy"),
}

_PLAIN_ATOM = re.compile(r"[a-z][A-Za-z0-9_]*\Z")


def render_number(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    d = q.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        # not a terminating decimal: rational literal, e.g. 1r3
        return f"{q.numerator}r{q.denominator}"
    places = max(twos, fives)
    sign = "-" if q < 0 else ""
    scaled = abs(q.numerator) * 10 ** places // q.denominator
    digits = str(scaled).rjust(places + 1, "0")
    text = f"{digits[:-places]}.{digits[-places:]}".rstrip("0")
    return sign + text


def render_atom(name: str) -> str:
    if _PLAIN_ATOM.match(name):
        return name
    escaped = name.replace("\\", "\\\\").replace("'", "\\'")
    return f"'{escaped}'"


def _render_var(v: Var) -> str:
    return v.name if v.index == 0 else f"{v.name}_{v.index}"


def canonical_render(t: Term, max_prec: int = 1200) -> str:
    """Deterministic text form of a term that parses back to an equal term."""
    if isinstance(t, Var):
        return _render_var(t)
    if isinstance(t, Num):
        return render_number(t.value)
    if isinstance(t, Atom):
        return render_atom(t.name)
    if len(t.args) == 2 and t.functor in INFIX_OPS:
        prec, typ = INFIX_OPS[t.functor]
        left_max = prec - 1 if typ[0] == "x" else prec
        right_max = prec - 1 if typ[2] == "x" else prec
        left = canonical_render(t.args[0], left_max)
        right = canonical_render(t.args[1], right_max)
        text = f"{left}, {right}" if t.functor == "," else f"{left} {t.functor} {right}"
        return f"({text})" if prec > max_prec else text
    if len(t.args) == 1 and t.functor == "\\+":
        prec = PREFIX_OPS["\\+"][0]
        text = "\\+ " + canonical_render(t.args[0], prec)
        return f"({text})" if prec > max_prec else text
    name = t.functor if _PLAIN_ATOM.match(t.functor) or t.functor in INFIX_OPS or t.functor in PREFIX_OPS \
        else render_atom(t.functor)
    if name == ",":
        name = "','"
    return name + "(" + ", ".join(canonical_render(a, 999) for a in t.args) + ")"


def render_goal(g: Goal) -> str:
    if isinstance(g, Naf):
        return "\\+ " + canonical_render(goal_term(g.inner), 900)
    return canonical_render(goal_term(g), 999)


def render_clause(c: Clause) -> str:
    head = canonical_render(c.head, 1199)
    if not c.body:
        return head + "."
    return head + " :- " + ", ".join(render_goal(g) for g in c.body) + "."
