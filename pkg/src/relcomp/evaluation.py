"""Benchmark scoring for relation-composition operators.

Three protocols are supported: SAT-style multiple choice (pick the
candidate pair most relationally similar to a stem pair), MaxDiff (pick
the most and least illustrative of four member pairs, scored against
prototype pairs), and a k-fold held-out relation classification over
relation groups.  Ties always break toward the lowest index so reports
are deterministic.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .bilinear import BilinearOperator, _cosine_flagged, compose, compose_many
from .embeddings import EmbeddingMatrix
from .errors import DataError, DimensionMismatchError, RelcompError
from .training import RelationGroup

logger = logging.getLogger(__name__)

OOV_SKIP = "skip"
OOV_COUNT_WRONG = "count-wrong"


@dataclass
class SatQuestion:
    """A stem pair, exactly five candidate pairs, and the gold index."""

    question_id: str
    stem: tuple[str, str]
    candidates: list[tuple[str, str]]
    answer_index: int

    def __post_init__(self):
        self.stem = (str(self.stem[0]), str(self.stem[1]))
        self.candidates = [(str(a), str(b)) for a, b in self.candidates]
        if len(self.candidates) != 5:
            raise DataError(
                f"question {self.question_id!r}: expected 5 candidates, "
                f"got {len(self.candidates)}"
            )
        if not 0 <= self.answer_index < 5:
            raise DataError(
                f"question {self.question_id!r}: answer index out of range"
            )


@dataclass
class MaxDiffQuestion:
    choices: list[tuple[str, str]]
    gold_most: int
    gold_least: int

    def __post_init__(self):
        self.choices = [(str(a), str(b)) for a, b in self.choices]
        if len(self.choices) != 4 or len(set(self.choices)) != 4:
            raise DataError("each MaxDiff question needs 4 distinct choices")
        if not (0 <= self.gold_most < 4 and 0 <= self.gold_least < 4):
            raise DataError("gold indices out of range")
        if self.gold_most == self.gold_least:
            raise DataError("gold most and least must differ")


@dataclass
class SemEvalRelation:
    """A relation with prototype pairs, member pairs, and MaxDiff questions."""

    relation_id: str
    prototypes: list[tuple[str, str]]
    members: list[tuple[str, str]]
    maxdiff_questions: list[MaxDiffQuestion]

    def __post_init__(self):
        self.prototypes = [(str(a), str(b)) for a, b in self.prototypes]
        self.members = [(str(a), str(b)) for a, b in self.members]
        if not self.prototypes:
            raise DataError(f"relation {self.relation_id!r} has no prototypes")


@dataclass
class EvalReport:
    """Aggregate score plus per-item records and the skipped-item count.

    ``attempted`` and ``skipped`` are counted in scoring units: questions
    for SAT and the held-out classification, binary decisions (two per
    question) for MaxDiff.
    """

    metric: str
    score: float
    correct: int
    attempted: int
    skipped: int
    items: list[dict] = field(default_factory=list)
    degenerate_count: int = 0

    def to_dict(self, include_items: bool = True) -> dict:
        out = {
            "metric": self.metric,
            "score": self.score,
            "correct": self.correct,
            "attempted": self.attempted,
            "skipped": self.skipped,
            "degenerate_count": self.degenerate_count,
        }
        if include_items:
            out["items"] = self.items
        return out

    def summary_tsv_line(self) -> str:
        return (
            f"{self.metric}\t{self.score!r}\t{self.correct}\t"
            f"{self.attempted}\t{self.skipped}"
        )


def load_sat_questions(path) -> list[SatQuestion]:
    """Read SAT-style questions from JSONL records
    ``{"id", "stem": [a, b], "candidates": [[c, d] x 5], "answer": int}``."""
    questions = []
    with open(path, "r", encoding="utf-8") as fh:
        for number, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
                questions.append(
                    SatQuestion(
                        question_id=str(rec.get("id", number)),
                        stem=tuple(rec["stem"]),
                        candidates=[tuple(c) for c in rec["candidates"]],
                        answer_index=int(rec["answer"]),
                    )
                )
            except (
                DataError, json.JSONDecodeError, KeyError, TypeError, ValueError
            ) as exc:
                raise DataError(f"line {number}: {exc}") from None
    if not questions:
        raise DataError("no SAT questions found")
    return questions


def load_semeval_relations(path) -> list[SemEvalRelation]:
    """Read MaxDiff relations from a JSON list of
    ``{"relation", "prototypes", "members", "questions": [{"choices", "most", "least"}]}``."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"not valid JSON: {exc}") from None
    if isinstance(doc, dict):
        doc = doc.get("relations", [])
    if not isinstance(doc, list) or not doc:
        raise DataError("expected a nonempty JSON list of relations")
    relations = []
    for entry in doc:
        try:
            relations.append(
                SemEvalRelation(
                    relation_id=str(entry["relation"]),
                    prototypes=[tuple(p) for p in entry["prototypes"]],
                    members=[tuple(m) for m in entry.get("members", [])],
                    maxdiff_questions=[
                        MaxDiffQuestion(
                            choices=[tuple(c) for c in q["choices"]],
                            gold_most=int(q["most"]),
                            gold_least=int(q["least"]),
                        )
                        for q in entry.get("questions", [])
                    ],
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed relation entry: {exc}") from None
    return relations


def _resolvable(emb: EmbeddingMatrix, pairs) -> bool:
    return all(a in emb and b in emb for a, b in pairs)


def _check_dims(op: BilinearOperator, emb: EmbeddingMatrix) -> None:
    if op.d != emb.dim:
        raise DimensionMismatchError(
            f"operator dimension {op.d} does not match embeddings ({emb.dim})"
        )


def eval_sat(
    op: BilinearOperator,
    emb: EmbeddingMatrix,
    questions: list[SatQuestion],
    oov_policy: str = OOV_SKIP,
) -> EvalReport:
    """Multiple-choice accuracy: argmax relational similarity to the stem.

    Questions containing out-of-vocabulary words are skipped (excluded
    from the denominator) or counted wrong, per ``oov_policy``.  Ties
    break toward the lowest candidate index.
    """
    if oov_policy not in (OOV_SKIP, OOV_COUNT_WRONG):
        raise RelcompError(f"unknown OOV policy: {oov_policy!r}")
    _check_dims(op, emb)
    correct = attempted = skipped = degenerate = 0
    items = []
    for question in questions:
        oov = not (
            _resolvable(emb, [question.stem])
            and _resolvable(emb, question.candidates)
        )
        if oov:
            if oov_policy == OOV_SKIP:
                skipped += 1
                items.append(
                    {"id": question.question_id, "chosen": None,
                     "gold": question.answer_index, "skipped": True}
                )
            else:
                attempted += 1
                items.append(
                    {"id": question.question_id, "chosen": None,
                     "gold": question.answer_index, "skipped": False}
                )
            continue
        stem_r = compose(op, emb.lookup(question.stem[0]), emb.lookup(question.stem[1]))
        sims = []
        for a, b in question.candidates:
            cand_r = compose(op, emb.lookup(a), emb.lookup(b))
            sim, flag = _cosine_flagged(stem_r, cand_r)
            degenerate += flag
            sims.append(sim)
        chosen = int(np.argmax(sims))
        attempted += 1
        correct += chosen == question.answer_index
        items.append(
            {
                "id": question.question_id,
                "chosen": chosen,
                "gold": question.answer_index,
                "similarities": sims,
                "skipped": False,
            }
        )
    score = correct / attempted if attempted else 0.0
    return EvalReport(
        metric="sat_accuracy",
        score=score,
        correct=correct,
        attempted=attempted,
        skipped=skipped,
        items=items,
        degenerate_count=degenerate,
    )


def _pair_score_flagged(op, emb, prototypes, pair):
    head, tail = emb.lookup(pair[0]), emb.lookup(pair[1])
    pair_r = compose(op, head, tail)
    total = 0.0
    degenerate = 0
    for a, b in prototypes:
        proto_r = compose(op, emb.lookup(a), emb.lookup(b))
        sim, flag = _cosine_flagged(pair_r, proto_r)
        degenerate += flag
        total += sim
    return total / len(prototypes), degenerate


def semeval_pair_score(
    op: BilinearOperator, emb: EmbeddingMatrix, rel: SemEvalRelation, pair
) -> float:
    """Mean relational similarity between ``pair`` and the relation's
    prototype pairs.  Unresolvable prototypes are dropped with a warning;
    it is an error if none remain."""
    _check_dims(op, emb)
    usable = [p for p in rel.prototypes if _resolvable(emb, [p])]
    dropped = len(rel.prototypes) - len(usable)
    if dropped:
        logger.warning(
            "relation %r: dropped %d unresolvable prototypes",
            rel.relation_id,
            dropped,
        )
    if not usable:
        raise DataError(f"relation {rel.relation_id!r} has no resolvable prototypes")
    if not _resolvable(emb, [pair]):
        raise DataError(f"pair {pair!r} is not resolvable")
    score, _ = _pair_score_flagged(op, emb, usable, pair)
    return score


def eval_maxdiff(
    op: BilinearOperator,
    emb: EmbeddingMatrix,
    relations: list[SemEvalRelation],
    oov_policy: str = OOV_SKIP,
) -> EvalReport:
    """MaxDiff accuracy: each question contributes two binary decisions
    (most and least illustrative choice), predicted as the argmax and the
    argmin of the prototype-averaged similarity.

    The least prediction is the lowest-scoring choice other than the
    predicted most, breaking ties toward the lowest index.  Counts are in
    decision units (two per question).
    """
    if oov_policy not in (OOV_SKIP, OOV_COUNT_WRONG):
        raise RelcompError(f"unknown OOV policy: {oov_policy!r}")
    _check_dims(op, emb)
    correct = attempted = skipped = degenerate = 0
    items = []
    for rel in relations:
        usable_protos = [p for p in rel.prototypes if _resolvable(emb, [p])]
        if len(usable_protos) < len(rel.prototypes):
            logger.warning(
                "relation %r: dropped %d unresolvable prototypes",
                rel.relation_id,
                len(rel.prototypes) - len(usable_protos),
            )
        for qi, question in enumerate(rel.maxdiff_questions):
            qid = f"{rel.relation_id}[{qi}]"
            oov = not usable_protos or not _resolvable(emb, question.choices)
            if oov:
                if oov_policy == OOV_SKIP:
                    skipped += 2
                else:
                    attempted += 2
                items.append(
                    {"id": qid, "pred_most": None, "pred_least": None,
                     "gold_most": question.gold_most,
                     "gold_least": question.gold_least,
                     "skipped": oov_policy == OOV_SKIP}
                )
                continue
            scores = []
            for choice in question.choices:
                score, flags = _pair_score_flagged(op, emb, usable_protos, choice)
                degenerate += flags
                scores.append(score)
            pred_most = int(np.argmax(scores))
            rest = [i for i in range(4) if i != pred_most]
            pred_least = min(rest, key=lambda i: (scores[i], i))
            most_ok = pred_most == question.gold_most
            least_ok = pred_least == question.gold_least
            attempted += 2
            correct += most_ok + least_ok
            items.append(
                {
                    "id": qid,
                    "scores": scores,
                    "pred_most": pred_most,
                    "pred_least": pred_least,
                    "gold_most": question.gold_most,
                    "gold_least": question.gold_least,
                    "skipped": False,
                }
            )
    score = correct / attempted if attempted else 0.0
    return EvalReport(
        metric="maxdiff_accuracy",
        score=score,
        correct=correct,
        attempted=attempted,
        skipped=skipped,
        items=items,
        degenerate_count=degenerate,
    )


def eval_bats_holdout(
    op: BilinearOperator,
    emb: EmbeddingMatrix,
    groups: list[RelationGroup],
    k: int = 5,
    seed: int = 0,
) -> EvalReport:
    """k-fold held-out 1-of-n relation classification over relation groups.

    Pairs are split into k seeded folds within each group; each held-out
    pair is assigned to the group whose remaining (training) pairs have
    the highest mean relational similarity to it.  Groups with fewer than
    k resolvable pairs are skipped with a warning.
    """
    if k < 2:
        raise RelcompError("fold count must be at least 2")
    _check_dims(op, emb)
    rng = np.random.default_rng(seed)

    usable: list[tuple[str, list[tuple[str, str]]]] = []
    skipped = 0
    for group in groups:
        pairs = [(h, t) for h, t in group.pairs if h in emb and t in emb]
        skipped += len(group.pairs) - len(pairs)
        if len(pairs) < k:
            logger.warning(
                "relation %r has %d resolvable pairs (< %d folds); skipped",
                group.relation_id,
                len(pairs),
                k,
            )
            skipped += len(pairs)
            continue
        usable.append((group.relation_id, pairs))
    if len(usable) < 2:
        raise DataError("need at least 2 relation groups large enough for k folds")

    relation_vectors = []
    folds_per_group = []
    for _, pairs in usable:
        heads = np.array([emb.lookup(h) for h, _ in pairs])
        tails = np.array([emb.lookup(t) for _, t in pairs])
        relation_vectors.append(compose_many(op, heads, tails))
        folds_per_group.append(np.array_split(rng.permutation(len(pairs)), k))

    correct = attempted = degenerate = 0
    items = []
    for fold in range(k):
        train_vectors = []
        for gi in range(len(usable)):
            held = set(folds_per_group[gi][fold].tolist())
            keep = [i for i in range(len(usable[gi][1])) if i not in held]
            train_vectors.append(relation_vectors[gi][keep])
        for gi, (relation, pairs) in enumerate(usable):
            for local in folds_per_group[gi][fold]:
                r = relation_vectors[gi][local]
                means = []
                for candidate in train_vectors:
                    sims = []
                    for row in candidate:
                        sim, flag = _cosine_flagged(r, row)
                        degenerate += flag
                        sims.append(sim)
                    means.append(float(np.mean(sims)) if sims else 0.0)
                predicted = int(np.argmax(means))
                attempted += 1
                correct += predicted == gi
                items.append(
                    {
                        "id": f"{relation}[{int(local)}]",
                        "chosen": usable[predicted][0],
                        "gold": relation,
                        "mean_similarities": means,
                        "fold": fold,
                    }
                )
    score = correct / attempted if attempted else 0.0
    return EvalReport(
        metric="holdout_accuracy",
        score=score,
        correct=correct,
        attempted=attempted,
        skipped=skipped,
        items=items,
        degenerate_count=degenerate,
    )


def write_reports_json(reports: list[EvalReport], path, include_items=True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            [r.to_dict(include_items) for r in reports], fh, indent=2, sort_keys=True
        )
        fh.write("\n")


def write_reports_tsv(reports: list[EvalReport], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for report in reports:
            fh.write(report.summary_tsv_line() + "\n")
