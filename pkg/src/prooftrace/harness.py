"""Evaluation pipeline: datasets in, programs obtained, engine run, scores out."""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Union

from .engine import (AnswerLabel, EngineError, SearchConfig, classify_answer, solve)
from .metrics import (EMPTY_GRAPH, UNIT_COSTS, EditCosts, InvalidGraph, MissingProvenance,
                      ProofGraph, normalize_label, proof_exact_match, proof_similarity,
                      tree_to_dag)
from .symgen import (CompletionService, GenerationResult, PromptTemplate, build_prompt,
                     format_diagnostics, generate_program, load_offline)
from .terms import Call, Num, Var, canonical_render

log = logging.getLogger(__name__)

FORMATS = ("proofwriter", "prontoqa", "gsm8k_proofs")
ARITHMETIC = {"gsm8k_proofs"}
ANSWER_VAR = "Answer"

Gold = Union[AnswerLabel, int]


class UnreadableFile(OSError):
    pass


class SchemaViolation(ValueError):
    pass


class KindMismatch(TypeError):
    pass


class EmptyGolds(ValueError):
    pass


@dataclass(frozen=True)
class Statement:
    id: str
    text: str


@dataclass(frozen=True)
class EvalRecord:
    instance_id: str
    context_statements: tuple
    question_text: str
    gold_answer: Gold
    gold_proofs: tuple
    depth: Optional[int] = None
    format: str = "proofwriter"

    @property
    def n_statements(self) -> int:
        return len(self.context_statements)

    @property
    def arithmetic(self) -> bool:
        return self.format in ARITHMETIC

    def problem_text(self) -> str:
        lines = [f"{s.id}: {s.text}" for s in self.context_statements]
        lines.append(f"Question: {self.question_text}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# dataset adapters
# ---------------------------------------------------------------------------

_LABELS = {"true": AnswerLabel.TRUE, "false": AnswerLabel.FALSE, "unknown": AnswerLabel.UNKNOWN}


def _label(value) -> AnswerLabel:
    if isinstance(value, bool):
        return AnswerLabel.TRUE if value else AnswerLabel.FALSE
    if isinstance(value, str) and value.strip().lower() in _LABELS:
        return _LABELS[value.strip().lower()]
    raise SchemaViolation(f"bad answer label {value!r}")


def _integer(value) -> int:
    if isinstance(value, bool):
        raise SchemaViolation(f"bad integer answer {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            q = Fraction(value.strip().replace(",", ""))
        except ValueError:
            raise SchemaViolation(f"bad integer answer {value!r}") from None
        if q.denominator == 1:
            return int(q)
    raise SchemaViolation(f"bad integer answer {value!r}")


def _proofs(raw, by_render: bool) -> tuple:
    if not isinstance(raw, list) or not raw:
        raise SchemaViolation("'proofs' must be a non-empty list")
    out = []
    for g in raw:
        try:
            graph = ProofGraph.from_dict(g)
        except (InvalidGraph, AttributeError) as exc:
            raise SchemaViolation(f"bad gold proof: {exc}") from exc
        if by_render:
            graph = ProofGraph(tuple(type(n)(n.id, normalize_label(n.label), n.provenance)
                                     for n in graph.nodes), graph.edges)
        out.append(graph)
    return tuple(out)


def _depth(rec):
    d = rec.get("depth")
    if d is None:
        return None
    if isinstance(d, bool) or not isinstance(d, int) or d < 0:
        raise SchemaViolation(f"bad depth {d!r}")
    return d


def _require(rec, key):
    if key not in rec:
        raise SchemaViolation(f"missing field {key!r}")
    return rec[key]


def _text_map(m, what):
    if not isinstance(m, dict):
        raise SchemaViolation(f"{what!r} must be an object")
    out = []
    for sid, v in m.items():
        text = v.get("text") if isinstance(v, dict) else v
        if not isinstance(text, str):
            raise SchemaViolation(f"{what}.{sid} has no text")
        out.append(Statement(str(sid), text))
    return out


def _context_list(raw):
    if not isinstance(raw, list):
        raise SchemaViolation("'context' must be a list")
    out = []
    for item in raw:
        if not isinstance(item, dict) or not isinstance(item.get("text"), str) or "id" not in item:
            raise SchemaViolation("context entries need 'id' and 'text'")
        out.append(Statement(str(item["id"]), item["text"]))
    return out


_SENTENCE = re.compile(r"(?<=[.!?])\s+")


def _proofwriter(rec) -> EvalRecord:
    context = _text_map(rec.get("triples", {}), "triples") + _text_map(rec.get("rules", {}), "rules")
    return EvalRecord(str(_require(rec, "id")), tuple(context), str(_require(rec, "question")),
                      _label(_require(rec, "answer")), _proofs(_require(rec, "proofs"), False),
                      _depth(rec), "proofwriter")


def _prontoqa(rec) -> EvalRecord:
    return EvalRecord(str(_require(rec, "id")), tuple(_context_list(_require(rec, "context"))),
                      str(_require(rec, "query")), _label(_require(rec, "answer")),
                      _proofs(_require(rec, "proofs"), False), _depth(rec), "prontoqa")


def _gsm8k(rec) -> EvalRecord:
    question = _require(rec, "question")
    if not isinstance(question, str):
        raise SchemaViolation("'question' must be a string")
    if "context" in rec:
        context = _context_list(rec["context"])
    else:
        sentences = [s for s in _SENTENCE.split(question.strip()) if s]
        context = [Statement(f"s{i + 1}", s) for i, s in enumerate(sentences)]
    return EvalRecord(str(_require(rec, "id")), tuple(context), question,
                      _integer(_require(rec, "answer")), _proofs(_require(rec, "proofs"), True),
                      _depth(rec), "gsm8k_proofs")


_ADAPTERS = {"proofwriter": _proofwriter, "prontoqa": _prontoqa, "gsm8k_proofs": _gsm8k}


@dataclass
class LoadResult:
    records: list
    diagnostics: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


def load_dataset(path, fmt: str) -> LoadResult:
    """Read a JSON-lines dataset.  Bad records are skipped with a diagnostic."""
    if fmt not in _ADAPTERS:
        raise ValueError(f"unknown dataset format {fmt!r}")
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableFile(f"cannot read {path}: {exc}") from exc
    adapter = _ADAPTERS[fmt]
    out = LoadResult([])
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            if not isinstance(rec, dict):
                raise SchemaViolation("record is not an object")
            record = adapter(rec)
            if record.instance_id in seen:
                raise SchemaViolation(f"duplicate id {record.instance_id!r}")
        except (json.JSONDecodeError, SchemaViolation) as exc:
            out.diagnostics.append(f"line {lineno}: {exc}")
            log.warning("%s line %d rejected: %s", path, lineno, exc)
            continue
        seen.add(record.instance_id)
        out.records.append(record)
    if not out.records and not out.diagnostics:
        out.diagnostics.append("empty dataset")
        log.warning("%s: empty dataset", path)
    return out


# ---------------------------------------------------------------------------
# scoring
# ---------------------------------------------------------------------------

def score_answer(pred, gold) -> bool:
    if isinstance(gold, AnswerLabel):
        if not isinstance(pred, AnswerLabel):
            raise KindMismatch(f"label gold with {type(pred).__name__} prediction")
        return pred is gold
    if isinstance(gold, int) and not isinstance(gold, bool):
        if isinstance(pred, AnswerLabel) or not isinstance(pred, (int, Fraction)):
            raise KindMismatch(f"integer gold with {type(pred).__name__} prediction")
        return Fraction(pred) == gold
    raise KindMismatch(f"unsupported gold {gold!r}")


def best_gold_similarity(pred: ProofGraph, golds, answer_correct: bool,
                         costs: EditCosts = UNIT_COSTS) -> Fraction:
    golds = list(golds)
    if not golds:
        raise EmptyGolds("no gold proofs")
    return max(proof_similarity(pred, g, answer_correct, costs) for g in golds)


def best_gold_exact(pred: ProofGraph, golds, answer_correct: bool) -> int:
    return max((proof_exact_match(pred, g, answer_correct) for g in golds), default=0)


# ---------------------------------------------------------------------------
# program sources
# ---------------------------------------------------------------------------

class OfflineSource:
    def __init__(self, directory):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise UnreadableFile(f"program directory {directory} does not exist")

    def get(self, record: EvalRecord) -> GenerationResult:
        return load_offline(self.directory, record.instance_id)


class GeneratedSource:
    def __init__(self, service: CompletionService, templates: dict, retries: int = 2):
        self.service = service
        self.templates = templates
        self.retries = retries

    def get(self, record: EvalRecord) -> GenerationResult:
        template: PromptTemplate = self.templates[record.format]
        prompt = build_prompt(template, record.problem_text())
        return generate_program(self.service, prompt, self.retries, template.stop_markers,
                                origin=record.instance_id)


# ---------------------------------------------------------------------------
# per-instance evaluation
# ---------------------------------------------------------------------------

GENERATION_FAILURE = "generation_failure"
ENGINE_FAILURE = "engine_failure"
WRONG_ANSWER = "wrong_answer"
FAILURE_FLAGS = (WRONG_ANSWER, GENERATION_FAILURE, ENGINE_FAILURE)


@dataclass(frozen=True)
class MetricsConfig:
    costs: EditCosts = UNIT_COSTS
    exact_match: bool = True
    # None picks by_render for arithmetic data and by_provenance otherwise
    labeling: Optional[str] = None

    def labeling_for(self, record: EvalRecord) -> str:
        if self.labeling:
            return self.labeling
        return "by_render" if record.arithmetic else "by_provenance"


@dataclass(frozen=True)
class Prediction:
    answer: object              # AnswerLabel, Fraction or None
    proof: ProofGraph
    flag: Optional[str] = None  # generation_failure / engine_failure before scoring
    program: str = ""
    diagnostics: tuple = ()


@dataclass(frozen=True)
class InstanceResult:
    instance_id: str
    answer: Optional[str]
    gold: str
    label_correct: bool
    similarity: Fraction
    exact_match: Optional[int]
    flags: tuple
    depth: Optional[int]
    n_statements: int
    program: str = ""
    proof: ProofGraph = EMPTY_GRAPH
    diagnostics: tuple = ()


def _render_answer(a) -> Optional[str]:
    if a is None:
        return None
    if isinstance(a, AnswerLabel):
        return a.value
    return canonical_render(Num(a))


def _single_query(kb):
    if len(kb.queries) != 1:
        return None
    return kb.queries[0]


def predict(record: EvalRecord, gen: GenerationResult, cfg: SearchConfig,
            labeling: str) -> Prediction:
    """Run the engine over a generated program; failures become flags."""
    program = gen.extracted_program.text if gen.extracted_program else gen.raw_text
    diags = tuple(format_diagnostics(gen.diagnostics))
    if not gen.ok:
        return Prediction(None, EMPTY_GRAPH, GENERATION_FAILURE, program,
                          (f"generation: {gen.status.value}",) + diags)
    query = _single_query(gen.kb)
    if query is None:
        return Prediction(None, EMPTY_GRAPH, GENERATION_FAILURE, program,
                          diags + (f"expected one query, found {len(gen.kb.queries)}",))
    try:
        if record.arithmetic:
            answer, proof, exhausted = _arithmetic(gen.kb, query, cfg)
        else:
            if len(query) != 1 or not isinstance(query[0], Call):
                return Prediction(None, EMPTY_GRAPH, GENERATION_FAILURE, program,
                                  diags + ("logical query must be a single positive goal",))
            c = classify_answer(gen.kb, query[0].term, cfg)
            answer, proof = c.label, c.proof
            exhausted = c.budget_exhausted and c.label is AnswerLabel.UNKNOWN
            if c.inconsistent:
                diags += ("program proves both the statement and its negation",)
    except EngineError as exc:
        return Prediction(None, EMPTY_GRAPH, ENGINE_FAILURE, program, diags + (f"engine: {exc}",))
    if exhausted:
        return Prediction(None, EMPTY_GRAPH, ENGINE_FAILURE, program, diags + ("engine: step budget exhausted",))
    try:
        graph = tree_to_dag(proof, labeling)
    except MissingProvenance as exc:
        graph = EMPTY_GRAPH
        diags += (f"proof graph: {exc}",)
    return Prediction(answer, graph, None, program, diags)


def _arithmetic(kb, query, cfg):
    one = SearchConfig(cfg.strategy, cfg.max_depth, 1, cfg.step_budget, cfg.occurs_check)
    result = solve(kb, query, one)
    sol = result.first
    if sol is None:
        return None, None, result.budget_exhausted
    value = sol.answer_bindings.get(Var(ANSWER_VAR))
    answer = value.value if isinstance(value, Num) else None
    return answer, sol.proof, False


def score_instance(record: EvalRecord, pred: Prediction, mcfg: MetricsConfig) -> InstanceResult:
    gold = record.gold_answer
    if pred.flag is not None or pred.answer is None:
        correct = False
    else:
        try:
            correct = score_answer(pred.answer, gold)
        except KindMismatch:
            correct = False
    flag = pred.flag or (None if correct else WRONG_ANSWER)
    sim = best_gold_similarity(pred.proof, record.gold_proofs, correct, mcfg.costs)
    exact = best_gold_exact(pred.proof, record.gold_proofs, correct) if mcfg.exact_match else None
    return InstanceResult(
        record.instance_id, _render_answer(pred.answer), _render_answer(gold) if isinstance(gold, AnswerLabel) else str(gold),
        correct, sim, exact, (flag,) if flag else (), record.depth, record.n_statements,
        pred.program, pred.proof, pred.diagnostics)


def evaluate_instance(record: EvalRecord, source, cfg: SearchConfig, mcfg: MetricsConfig) -> InstanceResult:
    gen = source.get(record)
    return score_instance(record, predict(record, gen, cfg, mcfg.labeling_for(record)), mcfg)


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Metrics:
    n: int
    answer_accuracy: Fraction
    proof_similarity_all: Fraction
    proof_similarity_correct: Fraction
    proof_accuracy_all: Optional[Fraction]
    proof_accuracy_correct: Optional[Fraction]
    generation_failure_rate: Fraction
    flag_counts: tuple  # (wrong_answer, generation_failure, engine_failure)

    def to_dict(self) -> dict:
        def q(x):
            return None if x is None else str(x)
        return {
            "n": self.n,
            "answer_accuracy": q(self.answer_accuracy),
            "proof_similarity_all": q(self.proof_similarity_all),
            "proof_similarity_correct": q(self.proof_similarity_correct),
            "proof_accuracy_all": q(self.proof_accuracy_all),
            "proof_accuracy_correct": q(self.proof_accuracy_correct),
            "generation_failure_rate": q(self.generation_failure_rate),
            "flags": dict(zip(FAILURE_FLAGS, self.flag_counts)),
        }


def _mean(xs) -> Fraction:
    xs = list(xs)
    return sum(xs, Fraction(0)) / len(xs) if xs else Fraction(0)


def aggregate(results, exact_match: bool = True) -> Metrics:
    results = list(results)
    correct = [r for r in results if r.label_correct]
    counts = tuple(sum(1 for r in results if f in r.flags) for f in FAILURE_FLAGS)
    acc_all = acc_correct = None
    if exact_match:
        acc_all = _mean(r.exact_match for r in results)
        acc_correct = _mean(r.exact_match for r in correct)
    return Metrics(
        len(results),
        _mean(int(r.label_correct) for r in results),
        _mean(r.similarity for r in results),
        _mean(r.similarity for r in correct),
        acc_all, acc_correct,
        _mean(int(GENERATION_FAILURE in r.flags) for r in results),
        counts,
    )


DEPTH_BUCKETS = ("depth=0", "depth<=1", "depth<=2", "depth<=3", "depth<=5", "depth=other")
STATEMENT_BUCKETS = ("statements<=20", "statements>20")


def depth_bucket(depth: Optional[int]) -> str:
    """Exclusive buckets: ``depth<=3`` holds depth 3 only, ``depth<=5`` holds 4 and 5."""
    if depth is None or depth > 5:
        return "depth=other"
    if depth == 0:
        return "depth=0"
    if depth <= 3:
        return f"depth<={depth}"
    return "depth<=5"


def statement_bucket(n: int) -> str:
    return "statements<=20" if n <= 20 else "statements>20"


@dataclass(frozen=True)
class MetricsReport:
    overall: Metrics
    breakdowns: dict
    per_instance: tuple
    config: dict = field(default_factory=dict)

    @property
    def answer_accuracy(self):
        return self.overall.answer_accuracy

    @property
    def proof_similarity_all(self):
        return self.overall.proof_similarity_all

    @property
    def proof_similarity_correct(self):
        return self.overall.proof_similarity_correct

    @property
    def proof_accuracy_all(self):
        return self.overall.proof_accuracy_all

    @property
    def proof_accuracy_correct(self):
        return self.overall.proof_accuracy_correct

    @property
    def generation_failure_rate(self):
        return self.overall.generation_failure_rate


class AccountingError(AssertionError):
    pass


def check_report(report: MetricsReport):
    """Invariants every report must satisfy; violations are bugs, not data problems."""
    groups = [("overall", report.overall)] + list(report.breakdowns.items())
    for name, m in groups:
        bounded = [m.proof_similarity_all]
        if m.proof_accuracy_all is not None:
            bounded.append(m.proof_accuracy_all)
        if any(x > m.answer_accuracy for x in bounded):
            raise AccountingError(f"{name}: a proof metric exceeds answer accuracy")
        if sum(m.flag_counts) != m.n - round(m.answer_accuracy * m.n):
            raise AccountingError(f"{name}: failure flags do not account for incorrect answers")
    n = report.overall.n
    for buckets in (DEPTH_BUCKETS, STATEMENT_BUCKETS):
        if sum(report.breakdowns[b].n for b in buckets) != n:
            raise AccountingError("buckets do not partition the instances")


def build_report(results, exact_match: bool = True, config: Optional[dict] = None) -> MetricsReport:
    results = tuple(results)
    breakdowns = {}
    for b in DEPTH_BUCKETS:
        breakdowns[b] = aggregate((r for r in results if depth_bucket(r.depth) == b), exact_match)
    for b in STATEMENT_BUCKETS:
        breakdowns[b] = aggregate((r for r in results if statement_bucket(r.n_statements) == b), exact_match)
    report = MetricsReport(aggregate(results, exact_match), breakdowns, results, dict(config or {}))
    check_report(report)
    return report


def run_eval(records, source, cfg: SearchConfig = SearchConfig(),
             mcfg: MetricsConfig = MetricsConfig(), workers: int = 1) -> MetricsReport:
    """Evaluate every record; results are folded in input order."""
    records = list(records)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda r: evaluate_instance(r, source, cfg, mcfg), records))
    else:
        results = [evaluate_instance(r, source, cfg, mcfg) for r in records]
    config = {
        "strategy": cfg.strategy.value,
        "max_depth": cfg.max_depth,
        "max_solutions": cfg.max_solutions,
        "step_budget": cfg.step_budget,
        "occurs_check": cfg.occurs_check,
        "labeling": mcfg.labeling or "per-format",
    }
    return build_report(results, mcfg.exact_match, config)


def score_predictions(records, predictions: dict, mcfg: MetricsConfig = MetricsConfig()) -> MetricsReport:
    """Score precomputed predictions: ``{id: {"answer": ..., "proof": graph}}``.

    Records with no prediction count as generation failures.
    """
    results = []
    for record in records:
        p = predictions.get(record.instance_id)
        if p is None:
            pred = Prediction(None, EMPTY_GRAPH, GENERATION_FAILURE, "", ("no prediction",))
        else:
            pred = _prediction_from_dict(record, p)
        results.append(score_instance(record, pred, mcfg))
    return build_report(results, mcfg.exact_match, {"labeling": mcfg.labeling or "per-format"})


def _prediction_from_dict(record: EvalRecord, p: dict) -> Prediction:
    raw = p.get("answer")
    try:
        if raw is None:
            answer = None
        elif record.arithmetic:
            answer = Fraction(str(raw))
        else:
            answer = _label(raw)
        proof = ProofGraph.from_dict(p["proof"]) if p.get("proof") else EMPTY_GRAPH
    except (ValueError, SchemaViolation, InvalidGraph) as exc:
        return Prediction(None, EMPTY_GRAPH, GENERATION_FAILURE, "", (f"bad prediction: {exc}",))
    if record.arithmetic:
        proof = ProofGraph(tuple(type(n)(n.id, normalize_label(n.label), n.provenance)
                                 for n in proof.nodes), proof.edges)
    return Prediction(answer, proof)


# ---------------------------------------------------------------------------
# report files
# ---------------------------------------------------------------------------

def _pct(x) -> str:
    return "-" if x is None else f"{float(x) * 100:.2f}"


def render_summary(report: MetricsReport) -> str:
    cols = ("group", "n", "answer", "sim_all", "sim_correct", "acc_all", "acc_correct", "gen_fail")
    rows = [cols]
    for name, m in [("all", report.overall)] + list(report.breakdowns.items()):
        if not m.n:
            rows.append((name, "0") + ("-",) * 6)
            continue
        rows.append((name, str(m.n), _pct(m.answer_accuracy), _pct(m.proof_similarity_all),
                     _pct(m.proof_similarity_correct), _pct(m.proof_accuracy_all),
                     _pct(m.proof_accuracy_correct), _pct(m.generation_failure_rate)))
    widths = [max(len(r[i]) for r in rows) for i in range(len(cols))]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
             for r in rows]
    flags = dict(zip(FAILURE_FLAGS, report.overall.flag_counts))
    lines.append("")
    lines.append("incorrect: " + ", ".join(f"{k}={v}" for k, v in flags.items()))
    return "\n".join(lines) + "\n"


def instance_to_dict(r: InstanceResult) -> dict:
    return {
        "instance_id": r.instance_id,
        "answer": r.answer,
        "gold": r.gold,
        "label_correct": r.label_correct,
        "similarity": str(r.similarity),
        "exact_match": r.exact_match,
        "flags": list(r.flags),
        "depth": r.depth,
        "n_statements": r.n_statements,
        "program": r.program,
        "proof": r.proof.to_dict(),
        "diagnostics": list(r.diagnostics),
    }


def report_to_dict(report: MetricsReport) -> dict:
    return {
        "config": report.config,
        "overall": report.overall.to_dict(),
        "breakdowns": {k: v.to_dict() for k, v in report.breakdowns.items()},
    }


_UNSAFE = re.compile(r"[^A-Za-z0-9._-]")


def emit_report(report: MetricsReport, out_dir) -> list[Path]:
    """Write summary.txt, summary.json and instances/<id>.json; return the paths."""
    out = Path(out_dir)
    inst_dir = out / "instances"
    inst_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def write(path: Path, text: str):
        path.write_text(text, encoding="utf-8", newline="\n")
        written.append(path)

    write(out / "summary.txt", render_summary(report))
    write(out / "summary.json", json.dumps(report_to_dict(report), indent=2, ensure_ascii=False) + "\n")
    taken = set()
    for r in report.per_instance:
        stem = _UNSAFE.sub("_", r.instance_id)
        name, k = stem + ".json", 1
        while name in taken:
            k += 1
            name = f"{stem}~{k}.json"
        taken.add(name)
        write(inst_dir / name, json.dumps(instance_to_dict(r), indent=2, ensure_ascii=False) + "\n")
    return written
