"""Prolog-subset engine with checkable proofs, plus proof-scoring tools."""

from .engine import (AnswerLabel, BuiltinNode, Classification, FactNode, NafNode, QueryNode,
                     RuleNode, SearchConfig, SolveResult, Solution, Strategy, check_proof,
                     classify_answer, depth_limited_solve, ids_solve, solve)
from .metrics import (EditCosts, GraphNode, ProofGraph, ged, proof_exact_match,
                      proof_similarity, tree_to_dag)
from .parser import ParseError, SourceProgram, parse_program, parse_query, parse_term
from .terms import (Atom, Builtin, Call, Clause, KnowledgeBase, Naf, Num, Struct, Substitution,
                    Var, canonical_render, unify)

__version__ = "0.1.0"
