"""Proof graphs and proof scoring.

Proof trees from the engine are folded into DAGs whose edges run from a
premise to the conclusion it supports.  Predicted and gold graphs are
compared with unit-cost graph edit distance and with exact isomorphism.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, Optional

import networkx as nx
from networkx.algorithms.isomorphism import DiGraphMatcher

from .engine import BuiltinNode, FactNode, NafNode, ProofNode, QueryNode, RuleNode
from .terms import canonical_render

Labeling = Literal["by_provenance", "by_render"]

DEFAULT_GED_BUDGET = 200_000


class MissingProvenance(ValueError):
    pass


class InvalidGraph(ValueError):
    pass


@dataclass(frozen=True)
class GraphNode:
    id: int
    label: str
    provenance: Optional[str] = None


@dataclass(frozen=True)
class ProofGraph:
    nodes: tuple
    edges: tuple

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise InvalidGraph("duplicate node id")
        known = set(ids)
        if len(set(self.edges)) != len(self.edges):
            raise InvalidGraph("parallel edge")
        for a, b in self.edges:
            if a not in known or b not in known:
                raise InvalidGraph(f"edge ({a}, {b}) references an unknown node")
        if not _acyclic(ids, self.edges):
            raise InvalidGraph("graph has a cycle")

    @property
    def size(self) -> int:
        return len(self.nodes) + len(self.edges)

    def labels(self) -> dict:
        return {n.id: n.label for n in self.nodes}

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": n.id, "label": n.label, "provenance": n.provenance} for n in self.nodes],
            "edges": [list(e) for e in self.edges],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProofGraph":
        try:
            nodes = tuple(GraphNode(int(n["id"]), str(n["label"]), n.get("provenance")) for n in d["nodes"])
            edges = tuple((int(a), int(b)) for a, b in d.get("edges", ()))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidGraph(f"malformed proof graph: {exc}") from exc
        return cls(nodes, edges)


def _acyclic(ids, edges) -> bool:
    g = nx.DiGraph()
    g.add_nodes_from(ids)
    g.add_edges_from(edges)
    return nx.is_directed_acyclic_graph(g)


EMPTY_GRAPH = ProofGraph((), ())


@dataclass(frozen=True)
class EditCosts:
    node_insert: int = 1
    node_delete: int = 1
    node_substitute: int = 1
    edge_insert: int = 1
    edge_delete: int = 1

    def __post_init__(self):
        if min(self.node_insert, self.node_delete, self.node_substitute,
               self.edge_insert, self.edge_delete) < 0:
            raise ValueError("edit costs must be non-negative")

    def substitute(self, a: str, b: str) -> int:
        return 0 if a == b else self.node_substitute


UNIT_COSTS = EditCosts()


def normalize_label(label: str) -> str:
    return " ".join(label.split())


# ---------------------------------------------------------------------------
# tree -> DAG
# ---------------------------------------------------------------------------

def tree_to_dag(proof: Optional[ProofNode], labeling: Labeling = "by_provenance") -> ProofGraph:
    """Fold a proof tree into a DAG, merging repeated premises.

    Under ``by_provenance`` nodes are labeled by statement id; facts merge
    on their id and rule applications on (id, conclusion), so a rule used
    for two different conclusions stays two nodes.  Builtin and negation
    nodes are dropped.  Under ``by_render`` every node is labeled by its
    rendered goal and nodes merge on the label.  A merge that would close a
    cycle makes a fresh node instead.
    """
    if labeling not in ("by_provenance", "by_render"):
        raise ValueError(f"unknown labeling {labeling!r}")
    if proof is None:
        return EMPTY_GRAPH

    nodes: list[GraphNode] = []
    edges: dict = {}          # insertion-ordered set
    succ: dict[int, set] = {}  # premise -> conclusions, for the cycle guard
    by_key: dict = {}

    def reaches(src, dst) -> bool:
        stack, seen = [src], {src}
        while stack:
            n = stack.pop()
            if n == dst:
                return True
            for m in succ[n]:
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        return False

    def node_for(key, label, provenance, premises) -> int:
        nid = by_key.get(key)
        if nid is None or any(reaches(nid, p) for p in premises):
            nid = len(nodes)
            nodes.append(GraphNode(nid, label, provenance))
            succ[nid] = set()
            if key not in by_key:
                by_key[key] = nid
        for p in premises:
            if (p, nid) not in edges:
                edges[(p, nid)] = None
                succ[p].add(nid)
        return nid

    def visit(node) -> list[int]:
        # returns the graph ids standing for this subtree (several for a query root)
        if isinstance(node, QueryNode):
            out = []
            for c in node.children:
                out.extend(visit(c))
            return out
        if isinstance(node, (BuiltinNode, NafNode)):
            if labeling == "by_provenance":
                return []
            text = canonical_render(node.goal)
            label = normalize_label("\\+ " + text if isinstance(node, NafNode) else text)
            return [node_for(label, label, None, ())]
        premises: list[int] = []
        if isinstance(node, RuleNode):
            for c in node.children:
                premises.extend(visit(c))
        head = canonical_render(node.head)
        if labeling == "by_provenance":
            if node.provenance is None:
                raise MissingProvenance(f"no provenance for {head}")
            if isinstance(node, FactNode):
                key = ("fact", node.provenance)
            else:
                key = ("rule", node.provenance, head)
            return [node_for(key, node.provenance, node.provenance, premises)]
        label = normalize_label(head)
        return [node_for(label, label, node.provenance, premises)]

    visit(proof)
    return ProofGraph(tuple(nodes), tuple(edges))


# ---------------------------------------------------------------------------
# graph edit distance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GedResult:
    distance: int
    exact: bool


class _Search:
    def __init__(self, g1: ProofGraph, g2: ProofGraph, costs: EditCosts, budget: int):
        self.costs = costs
        self.budget = budget
        self.expanded = 0
        # order g1 nodes by degree so that edge costs get decided early
        deg = Counter()
        for a, b in g1.edges:
            deg[a] += 1
            deg[b] += 1
        order = sorted(g1.nodes, key=lambda n: (-deg[n.id], n.id))
        self.l1 = [n.label for n in order]
        self.l2 = [n.label for n in g2.nodes]
        pos1 = {n.id: i for i, n in enumerate(order)}
        pos2 = {n.id: i for i, n in enumerate(g2.nodes)}
        self.e1 = {(pos1[a], pos1[b]) for a, b in g1.edges}
        self.e2 = {(pos2[a], pos2[b]) for a, b in g2.edges}
        self.n1, self.n2 = len(self.l1), len(self.l2)
        # g1 edges whose later endpoint (in search order) is i
        self.closing = [[] for _ in range(self.n1)]
        for a, b in self.e1:
            self.closing[max(a, b)].append((a, b))
        self.adj2 = [set() for _ in range(self.n2)]
        for a, b in self.e2:
            self.adj2[a].add(b)
            self.adj2[b].add(a)

    def total(self, mapping) -> int:
        """Cost of a complete mapping (g1 index -> g2 index or None)."""
        c = self.costs
        cost = 0
        used = set()
        for i, j in enumerate(mapping):
            if j is None:
                cost += c.node_delete
            else:
                used.add(j)
                cost += c.substitute(self.l1[i], self.l2[j])
        cost += c.node_insert * (self.n2 - len(used))
        image = set()
        for a, b in self.e1:
            ja, jb = mapping[a], mapping[b]
            if ja is not None and jb is not None and (ja, jb) in self.e2:
                image.add((ja, jb))
            else:
                cost += c.edge_delete
        cost += c.edge_insert * (len(self.e2) - len(image))
        return cost

    def greedy(self):
        free = list(range(self.n2))
        mapping = [None] * self.n1
        for i, lab in enumerate(self.l1):
            for j in free:
                if self.l2[j] == lab:
                    mapping[i] = j
                    free.remove(j)
                    break
        for i in range(self.n1):
            if mapping[i] is None and free:
                mapping[i] = free.pop(0)
        return mapping

    def lower_bound(self, i, used, e2_decided) -> int:
        c = self.costs
        rest1 = Counter(self.l1[i:])
        rest2 = Counter(self.l2[j] for j in range(self.n2) if j not in used)
        a, b = self.n1 - i, self.n2 - len(used)
        common = sum((rest1 & rest2).values())
        node_lb = min(c.node_insert, c.node_delete, c.node_substitute) * (max(a, b) - common)
        e1_rest = sum(1 for x, y in self.e1 if max(x, y) >= i)
        e2_rest = len(self.e2) - e2_decided
        if e1_rest > e2_rest:
            edge_lb = c.edge_delete * (e1_rest - e2_rest)
        else:
            edge_lb = c.edge_insert * (e2_rest - e1_rest)
        return node_lb + edge_lb

    def run(self) -> GedResult:
        best_map = self.greedy()
        self.best = self.total(best_map)
        mapping = [None] * self.n1
        used: set = set()
        exhausted = False
        c = self.costs

        # cost so far counts: node ops for g1[:i], g1 edges with both ends
        # decided, and g2 edges between two used nodes that no g1 edge covers
        def rec(i, cost, e2_decided):
            nonlocal exhausted
            if exhausted:
                return
            self.expanded += 1
            if self.expanded > self.budget:
                exhausted = True
                return
            if i == self.n1:
                final = cost + c.node_insert * (self.n2 - len(used)) \
                    + c.edge_insert * (len(self.e2) - e2_decided)
                if final < self.best:
                    self.best = final
                return
            if cost + self.lower_bound(i, used, e2_decided) >= self.best:
                return
            lab = self.l1[i]
            cands = sorted((j for j in range(self.n2) if j not in used),
                           key=lambda j: (self.l2[j] != lab, j))
            for j in cands + [None]:
                step = c.node_delete if j is None else c.substitute(lab, self.l2[j])
                mapping[i] = j
                covered = 0
                for a, b in self.closing[i]:
                    ja, jb = mapping[a], mapping[b]
                    if ja is not None and jb is not None and (ja, jb) in self.e2:
                        covered += 1
                    else:
                        step += c.edge_delete
                newly = 0
                if j is not None:
                    used.add(j)
                    # g2 edges between j and an earlier image become decided
                    for k in self.adj2[j]:
                        if k in used and k != j:
                            newly += ((j, k) in self.e2) + ((k, j) in self.e2)
                    step += c.edge_insert * (newly - covered)
                rec(i + 1, cost + step, e2_decided + newly)
                if j is not None:
                    used.discard(j)
                mapping[i] = None
                if exhausted:
                    return

        rec(0, 0, 0)
        return GedResult(self.best, not exhausted)


def ged(g1: ProofGraph, g2: ProofGraph, costs: EditCosts = UNIT_COSTS,
        budget: int = DEFAULT_GED_BUDGET) -> GedResult:
    """Minimum edit cost turning g1 into g2.

    ``budget`` caps the number of search nodes.  If it runs out the best
    mapping found so far (at worst the greedy one) is returned with
    ``exact=False``; that distance is still attained by a real edit path.
    """
    return _Search(g1, g2, costs, budget).run()


def proof_similarity(pred: ProofGraph, gold: ProofGraph, answer_correct: bool,
                     costs: EditCosts = UNIT_COSTS, budget: int = DEFAULT_GED_BUDGET) -> Fraction:
    if not answer_correct:
        return Fraction(0)
    denom = max(pred.size, gold.size)
    if denom == 0:
        return Fraction(1)
    d = ged(pred, gold, costs, budget).distance
    return min(Fraction(1), max(Fraction(0), 1 - Fraction(d, denom)))


def _to_nx(g: ProofGraph) -> nx.DiGraph:
    out = nx.DiGraph()
    for n in g.nodes:
        out.add_node(n.id, label=n.label)
    out.add_edges_from(g.edges)
    return out


def proof_exact_match(pred: ProofGraph, gold: ProofGraph, answer_correct: bool) -> int:
    if not answer_correct:
        return 0
    if len(pred.nodes) != len(gold.nodes) or len(pred.edges) != len(gold.edges):
        return 0
    if Counter(n.label for n in pred.nodes) != Counter(n.label for n in gold.nodes):
        return 0
    matcher = DiGraphMatcher(_to_nx(pred), _to_nx(gold),
                             node_match=lambda a, b: a["label"] == b["label"])
    return int(matcher.is_isomorphic())
