"""Benchmark scoring: SAT choice, MaxDiff decisions, held-out classification."""

import math

import numpy as np
import pytest

from relcomp import (
    BilinearOperator,
    DataError,
    DimensionMismatchError,
    EmbeddingMatrix,
    SatQuestion,
    SemEvalRelation,
    eval_bats_holdout,
    eval_maxdiff,
    eval_sat,
    load_embeddings,
    load_sat_questions,
    load_semeval_relations,
    semeval_pair_score,
)
from relcomp.evaluation import MaxDiffQuestion
from relcomp.training import RelationGroup


def toy_embedding(words_vectors):
    vocab = [w for w, _ in words_vectors]
    vectors = np.array([v for _, v in words_vectors], dtype=float)
    return EmbeddingMatrix(vocab=vocab, vectors=vectors)


def oracle_cosine(u, v):
    """Plain-Python cosine, independent of the library's similarity path."""
    dot = math.fsum(a * b for a, b in zip(u, v))
    nu = math.sqrt(math.fsum(a * a for a in u))
    nv = math.sqrt(math.fsum(b * b for b in v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return dot / (nu * nv)


def oracle_offset(emb, pair):
    h = emb.lookup(pair[0])
    t = emb.lookup(pair[1])
    return [a - b for a, b in zip(h, t)]


class TestSatQuestionValidation:
    def test_candidate_count(self):
        with pytest.raises(DataError, match="5 candidates"):
            SatQuestion("q", ("a", "b"), [("c", "d")] * 4, 0)

    def test_answer_range(self):
        with pytest.raises(DataError, match="out of range"):
            SatQuestion("q", ("a", "b"), [("c", "d")] * 5, 5)


class TestEvalSat:
    def self_answering_setup(self):
        # candidate 1 is word-identical to the stem; others are orthogonal
        emb = toy_embedding(
            [
                ("s_h", [2.0, 0.0]), ("s_t", [0.0, 0.0]),
                ("o0_h", [0.0, 3.0]), ("o0_t", [0.0, 0.0]),
                ("o1_h", [0.0, 0.0]), ("o1_t", [0.0, 4.0]),
                ("o2_h", [0.0, 1.0]), ("o2_t", [0.0, 0.0]),
                ("o3_h", [0.0, 5.0]), ("o3_t", [0.0, 0.0]),
            ]
        )
        question = SatQuestion(
            "q0",
            ("s_h", "s_t"),
            [("o0_h", "o0_t"), ("s_h", "s_t"), ("o1_h", "o1_t"),
             ("o2_h", "o2_t"), ("o3_h", "o3_t")],
            answer_index=1,
        )
        return emb, [question]

    def test_self_answering_question(self):
        emb, questions = self.self_answering_setup()
        op = BilinearOperator.pairdiff(2)
        report = eval_sat(op, emb, questions)
        assert report.score == 1.0
        assert report.items[0]["chosen"] == 1

    def test_identical_candidates_tie_break_to_zero(self):
        emb = toy_embedding(
            [("s_h", [1.0, 0.0]), ("s_t", [0.0, 0.0]),
             ("c_h", [3.0, 0.0]), ("c_t", [0.0, 0.0])]
        )
        question = SatQuestion(
            "q0", ("s_h", "s_t"), [("c_h", "c_t")] * 5, answer_index=3
        )
        report = eval_sat(BilinearOperator.pairdiff(2), emb, [question])
        assert report.items[0]["chosen"] == 0
        assert report.score == 0.0

    def test_oov_skip_policy(self):
        emb, questions = self.self_answering_setup()
        oov = SatQuestion(
            "q1", ("s_h", "ghost"),
            [("o0_h", "o0_t"), ("s_h", "s_t"), ("o1_h", "o1_t"),
             ("o2_h", "o2_t"), ("o3_h", "o3_t")],
            answer_index=0,
        )
        report = eval_sat(BilinearOperator.pairdiff(2), emb, questions + [oov], "skip")
        assert report.attempted == 1 and report.skipped == 1
        assert report.score == 1.0
        wrong = eval_sat(
            BilinearOperator.pairdiff(2), emb, questions + [oov], "count-wrong"
        )
        assert wrong.attempted == 2 and wrong.skipped == 0
        assert wrong.score == 0.5

    def test_counts_balance(self):
        emb, questions = self.self_answering_setup()
        report = eval_sat(BilinearOperator.pairdiff(2), emb, questions)
        assert report.attempted + report.skipped == len(questions)

    def test_dimension_mismatch(self):
        emb, questions = self.self_answering_setup()
        with pytest.raises(DimensionMismatchError):
            eval_sat(BilinearOperator.pairdiff(3), emb, questions)

    def test_fixture_scores_frozen_value(self, fixtures_dir):
        emb = load_embeddings(fixtures_dir / "embeddings_fixture.txt")
        questions = load_sat_questions(fixtures_dir / "sat_fixture.jsonl")
        report = eval_sat(BilinearOperator.pairdiff(emb.dim), emb, questions)
        assert report.score == 0.9
        assert report.correct == 9 and report.attempted == 10

    def test_fixture_agrees_with_oracle(self, fixtures_dir):
        emb = load_embeddings(fixtures_dir / "embeddings_fixture.txt")
        questions = load_sat_questions(fixtures_dir / "sat_fixture.jsonl")
        report = eval_sat(BilinearOperator.pairdiff(emb.dim), emb, questions)
        for question, item in zip(questions, report.items):
            stem = oracle_offset(emb, question.stem)
            sims = [
                oracle_cosine(stem, oracle_offset(emb, cand))
                for cand in question.candidates
            ]
            best = max(range(5), key=lambda i: (sims[i], -i))
            assert item["chosen"] == best


class TestSemevalPairScore:
    def test_pair_equals_single_prototype(self):
        emb = toy_embedding(
            [("p_h", [1.0, 1.0]), ("p_t", [0.0, 0.0]),
             ("x_h", [2.0, 2.0]), ("x_t", [0.0, 0.0])]
        )
        rel = SemEvalRelation("r", [("p_h", "p_t")], [], [])
        score = semeval_pair_score(
            BilinearOperator.pairdiff(2), emb, rel, ("x_h", "x_t")
        )
        assert score == pytest.approx(1.0)

    def test_mean_over_prototypes(self):
        emb = toy_embedding(
            [("p1_h", [1.0, 0.0]), ("p1_t", [0.0, 0.0]),
             ("p2_h", [0.0, 1.0]), ("p2_t", [0.0, 0.0]),
             ("x_h", [5.0, 0.0]), ("x_t", [0.0, 0.0])]
        )
        rel = SemEvalRelation("r", [("p1_h", "p1_t"), ("p2_h", "p2_t")], [], [])
        score = semeval_pair_score(
            BilinearOperator.pairdiff(2), emb, rel, ("x_h", "x_t")
        )
        assert score == pytest.approx(0.5)

    def test_zero_vector_prototype_contributes_zero(self):
        emb = toy_embedding(
            [("p1_h", [1.0, 0.0]), ("p1_t", [1.0, 0.0]),   # zero offset
             ("p2_h", [3.0, 0.0]), ("p2_t", [0.0, 0.0]),
             ("x_h", [5.0, 0.0]), ("x_t", [0.0, 0.0])]
        )
        rel = SemEvalRelation("r", [("p1_h", "p1_t"), ("p2_h", "p2_t")], [], [])
        score = semeval_pair_score(
            BilinearOperator.pairdiff(2), emb, rel, ("x_h", "x_t")
        )
        assert score == pytest.approx(0.5)  # (0 + 1) / 2

    def test_unresolvable_prototypes(self, caplog):
        emb = toy_embedding(
            [("p_h", [1.0, 0.0]), ("p_t", [0.0, 0.0]),
             ("x_h", [1.0, 0.0]), ("x_t", [0.0, 0.0])]
        )
        rel = SemEvalRelation("r", [("p_h", "p_t"), ("ghost", "p_t")], [], [])
        with caplog.at_level("WARNING"):
            score = semeval_pair_score(
                BilinearOperator.pairdiff(2), emb, rel, ("x_h", "x_t")
            )
        assert score == pytest.approx(1.0)
        assert "dropped 1" in caplog.text
        all_gone = SemEvalRelation("r", [("ghost", "p_t")], [], [])
        with pytest.raises(DataError, match="no resolvable prototypes"):
            semeval_pair_score(
                BilinearOperator.pairdiff(2), emb, all_gone, ("x_h", "x_t")
            )


class TestEvalMaxdiff:
    def test_fixture_frozen_value(self, fixtures_dir):
        emb = load_embeddings(fixtures_dir / "embeddings_fixture.txt")
        relations = load_semeval_relations(fixtures_dir / "semeval_fixture.json")
        report = eval_maxdiff(BilinearOperator.pairdiff(emb.dim), emb, relations)
        assert report.score == 0.875
        assert report.correct == 7 and report.attempted == 8

    def test_fixture_matches_bruteforce_oracle(self, fixtures_dir):
        emb = load_embeddings(fixtures_dir / "embeddings_fixture.txt")
        relations = load_semeval_relations(fixtures_dir / "semeval_fixture.json")
        op = BilinearOperator.pairdiff(emb.dim)
        report = eval_maxdiff(op, emb, relations)
        item = iter(report.items)
        for rel in relations:
            protos = [oracle_offset(emb, p) for p in rel.prototypes]
            for question in rel.maxdiff_questions:
                scores = []
                for choice in question.choices:
                    offset = oracle_offset(emb, choice)
                    sims = [oracle_cosine(offset, proto) for proto in protos]
                    scores.append(math.fsum(sims) / len(sims))
                most = max(range(4), key=lambda i: (scores[i], -i))
                least = min(
                    (i for i in range(4) if i != most), key=lambda i: (scores[i], i)
                )
                rec = next(item)
                assert rec["pred_most"] == most
                assert rec["pred_least"] == least

    def test_identical_scores_tie_break(self):
        emb = toy_embedding(
            [("p_h", [1.0, 0.0]), ("p_t", [0.0, 0.0]),
             ("c0_h", [2.0, 0.0]), ("c0_t", [0.0, 0.0]),
             ("c1_h", [3.0, 0.0]), ("c1_t", [0.0, 0.0]),
             ("c2_h", [4.0, 0.0]), ("c2_t", [0.0, 0.0]),
             ("c3_h", [5.0, 0.0]), ("c3_t", [0.0, 0.0])]
        )
        rel = SemEvalRelation(
            "r",
            [("p_h", "p_t")],
            [],
            [MaxDiffQuestion(
                [("c0_h", "c0_t"), ("c1_h", "c1_t"), ("c2_h", "c2_t"), ("c3_h", "c3_t")],
                gold_most=0, gold_least=1,
            )],
        )
        report = eval_maxdiff(BilinearOperator.pairdiff(2), emb, [rel])
        assert report.items[0]["pred_most"] == 0
        assert report.items[0]["pred_least"] == 1
        assert report.score == 1.0

    def test_oov_choice_skips_question(self):
        emb = toy_embedding(
            [("p_h", [1.0, 0.0]), ("p_t", [0.0, 0.0]),
             ("c_h", [2.0, 0.0]), ("c_t", [0.0, 0.0])]
        )
        rel = SemEvalRelation(
            "r",
            [("p_h", "p_t")],
            [],
            [MaxDiffQuestion(
                [("c_h", "c_t"), ("ghost", "c_t"), ("p_h", "c_t"), ("c_h", "p_t")],
                gold_most=0, gold_least=1,
            )],
        )
        report = eval_maxdiff(BilinearOperator.pairdiff(2), emb, [rel], "skip")
        assert report.attempted == 0 and report.skipped == 2
        wrong = eval_maxdiff(BilinearOperator.pairdiff(2), emb, [rel], "count-wrong")
        assert wrong.attempted == 2 and wrong.score == 0.0

    def test_question_validation(self):
        with pytest.raises(DataError, match="distinct"):
            MaxDiffQuestion([("a", "b")] * 4, 0, 1)
        with pytest.raises(DataError, match="must differ"):
            MaxDiffQuestion(
                [("a", "b"), ("c", "d"), ("e", "f"), ("g", "h")], 2, 2
            )


def offset_groups(offsets, pairs_per_group, d, label="g"):
    """Groups whose pairs all share their group's exact offset vector."""
    words = []
    groups = []
    base = np.arange(d, dtype=float)
    for gi, offset in enumerate(offsets):
        pairs = []
        for pj in range(pairs_per_group):
            tail = base + 10.0 * gi + pj
            head = tail + np.asarray(offset, dtype=float)
            words.append((f"{label}{gi}_p{pj}_h", head))
            words.append((f"{label}{gi}_p{pj}_t", tail))
            pairs.append((f"{label}{gi}_p{pj}_h", f"{label}{gi}_p{pj}_t"))
        groups.append(RelationGroup(f"{label}{gi}", pairs))
    emb = toy_embedding(words)
    return emb, groups


class TestEvalBatsHoldout:
    def test_identical_offsets_classify_perfectly(self):
        emb, groups = offset_groups([[3.0, 0.0], [0.0, 2.0]], 6, d=2)
        report = eval_bats_holdout(BilinearOperator.pairdiff(2), emb, groups, k=3, seed=0)
        assert report.score == 1.0
        assert report.attempted == 12

    def test_zero_operator_degenerates_to_first_group(self):
        emb, groups = offset_groups([[3.0, 0.0], [0.0, 2.0]], 4, d=2)
        report = eval_bats_holdout(BilinearOperator.zero(2), emb, groups, k=2, seed=0)
        assert all(item["chosen"] == "g0" for item in report.items)
        assert report.score == pytest.approx(0.5)
        assert report.degenerate_count > 0

    def test_same_seed_identical_report(self):
        emb, groups = offset_groups([[1.0, 1.0], [1.0, -1.0]], 7, d=2)
        op = BilinearOperator.pairdiff(2)
        first = eval_bats_holdout(op, emb, groups, k=3, seed=5)
        second = eval_bats_holdout(op, emb, groups, k=3, seed=5)
        assert first.items == second.items and first.score == second.score

    def test_small_group_skipped(self, caplog):
        emb, groups = offset_groups([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], 5, d=2)
        small_emb, small_groups = offset_groups([[2.0, 0.0]], 2, d=2, label="s")
        merged = toy_embedding(
            list(zip(emb.vocab, emb.vectors)) + list(zip(small_emb.vocab, small_emb.vectors))
        )
        with caplog.at_level("WARNING"):
            report = eval_bats_holdout(
                BilinearOperator.pairdiff(2), merged, groups + small_groups, k=3, seed=0
            )
        assert "skipped" in caplog.text
        assert report.skipped == 2

    def test_needs_two_usable_groups(self):
        emb, groups = offset_groups([[1.0, 0.0]], 5, d=2)
        with pytest.raises(DataError):
            eval_bats_holdout(BilinearOperator.pairdiff(2), emb, groups, k=3, seed=0)


class TestLoaders:
    def test_sat_loader_roundtrip(self, fixtures_dir):
        questions = load_sat_questions(fixtures_dir / "sat_fixture.jsonl")
        assert len(questions) == 10
        assert all(len(q.candidates) == 5 for q in questions)

    def test_sat_loader_errors(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"id": "x", "stem": ["a", "b"], "candidates": [], "answer": 0}\n')
        with pytest.raises(DataError, match="line 1"):
            load_sat_questions(bad)
        empty = tmp_path / "empty.jsonl"
        empty.write_text("\n")
        with pytest.raises(DataError, match="no SAT questions"):
            load_sat_questions(empty)

    def test_semeval_loader(self, fixtures_dir):
        relations = load_semeval_relations(fixtures_dir / "semeval_fixture.json")
        assert [r.relation_id for r in relations] == ["R0", "R1"]
        assert all(len(r.maxdiff_questions) == 2 for r in relations)

    def test_semeval_loader_errors(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("[]")
        with pytest.raises(DataError, match="nonempty"):
            load_semeval_relations(bad)
        bad.write_text('[{"relation": "r"}]')
        with pytest.raises(DataError, match="malformed"):
            load_semeval_relations(bad)
