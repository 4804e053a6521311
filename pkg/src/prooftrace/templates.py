"""Shipped few-shot templates.

These demonstrations were written for this package in the style of short
rulebase and word problems; they are reconstructions, not the original
prompts of any published system.  Conventions they teach the model:

* one clause per context statement, tagged ``% id: <statement id>``;
* a negated statement ``X is not big`` becomes ``neg_big(x)``;
* the question is a single ``?- goal.`` line;
* arithmetic problems bind the result to a variable named ``Answer``.
"""

from .symgen import Demonstration, PromptTemplate

_PROOFWRITER = (
    Demonstration(
        "triple1: Fiona is green.\n"
        "triple2: Fiona is red.\n"
        "triple3: Fiona is rough.\n"
        "rule1: All red, rough things are quiet.\n"
        "rule2: If something is quiet then it is not big.\n"
        "Question: Fiona is not big.",
        "% id: triple1\ngreen(fiona).\n"
        "% id: triple2\nred(fiona).\n"
        "% id: triple3\nrough(fiona).\n"
        "% id: rule1\nquiet(X) :- red(X), rough(X).\n"
        "% id: rule2\nneg_big(X) :- quiet(X).\n"
        "?- neg_big(fiona).",
    ),
    Demonstration(
        "triple1: The cat chases the dog.\n"
        "triple2: The dog is kind.\n"
        "rule1: If someone chases the dog and the dog is kind then they like the dog.\n"
        "rule2: If someone likes the dog then the dog visits them.\n"
        "Question: The dog does not visit the cat.",
        "% id: triple1\nchases(cat, dog).\n"
        "% id: triple2\nkind(dog).\n"
        "% id: rule1\nlikes(X, dog) :- chases(X, dog), kind(dog).\n"
        "% id: rule2\nvisits(dog, X) :- likes(X, dog).\n"
        "?- neg_visits(dog, cat).",
    ),
)

_PRONTOQA = (
    Demonstration(
        "s1: Every wumpus is a tumpus.\n"
        "s2: Tumpuses are not bright.\n"
        "s3: Each yumpus is bright.\n"
        "s4: Max is a wumpus.\n"
        "Question: Max is bright.",
        "% id: s1\ntumpus(X) :- wumpus(X).\n"
        "% id: s2\nneg_bright(X) :- tumpus(X).\n"
        "% id: s3\nbright(X) :- yumpus(X).\n"
        "% id: s4\nwumpus(max).\n"
        "?- bright(max).",
    ),
    Demonstration(
        "s1: Each zumpus is a dumpus.\n"
        "s2: Every dumpus is sour.\n"
        "s3: Sally is a zumpus.\n"
        "Question: Sally is sour.",
        "% id: s1\ndumpus(X) :- zumpus(X).\n"
        "% id: s2\nsour(X) :- dumpus(X).\n"
        "% id: s3\nzumpus(sally).\n"
        "?- sour(sally).",
    ),
)

_GSM8K = (
    Demonstration(
        "Tina makes $18.00 an hour. Overtime pays her hourly wage plus half her hourly wage. "
        "What is her overtime wage per hour?",
        "wage(18.00).\n"
        "overtime_wage(W) :- wage(W1), W is 1.5 * W1.\n"
        "?- overtime_wage(Answer).",
    ),
    Demonstration(
        "A baker fills 4 trays with 12 rolls each and sells 30 rolls. How many rolls are left?",
        "trays(4).\nper_tray(12).\nsold(30).\n"
        "baked(B) :- trays(T), per_tray(P), B is T * P.\n"
        "left(L) :- baked(B), sold(S), L is B - S.\n"
        "?- left(Answer).",
    ),
    Demonstration(
        "Sam has 3 times as many stamps as Lee. Lee has 7 stamps. How many stamps do they have together?",
        "lee(7).\n"
        "sam(S) :- lee(L), S is 3 * L.\n"
        "total(T) :- sam(S), lee(L), T is S + L.\n"
        "?- total(Answer).",
    ),
    Demonstration(
        "A rope 45 meters long is cut into pieces of 5 meters. Two pieces are lost. How many pieces remain?",
        "rope(45).\npiece(5).\nlost(2).\n"
        "pieces(N) :- rope(R), piece(P), N is R / P.\n"
        "remaining(M) :- pieces(N), lost(K), M is N - K.\n"
        "?- remaining(Answer).",
    ),
    Demonstration(
        "Ana reads 20 pages on Monday and twice as many on Tuesday. "
        "Her book has 100 pages. How many pages does she still have to read?",
        "monday(20).\nbook(100).\n"
        "tuesday(T) :- monday(M), T is 2 * M.\n"
        "read(R) :- monday(M), tuesday(T), R is M + T.\n"
        "to_read(X) :- book(B), read(R), X is B - R.\n"
        "?- to_read(Answer).",
    ),
)

TEMPLATES = {
    "proofwriter": PromptTemplate(_PROOFWRITER),
    "prontoqa": PromptTemplate(_PRONTOQA),
    "gsm8k_proofs": PromptTemplate(_GSM8K),
}


def shipped_template(fmt: str) -> PromptTemplate:
    try:
        return TEMPLATES[fmt]
    except KeyError:
        raise KeyError(f"no shipped template for {fmt!r}") from None
