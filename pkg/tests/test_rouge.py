import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mdsum.rouge import (
    RougeConfig,
    RougeScore,
    ngram_counts,
    rouge_corpus,
    rouge_pair,
    rouge_report,
    skip_bigram_counts,
)
from oracles import naive_rouge

R1, R2, RSU = (RougeConfig(variant=v) for v in ("R1", "R2", "RSU"))


def test_ngram_counts():
    assert ngram_counts(list("aba"), 1) == {("a",): 2, ("b",): 1}
    assert ngram_counts(list("aba"), 2) == {("a", "b"): 1, ("b", "a"): 1}
    assert ngram_counts(["a"], 2) == {}


def test_skip_bigrams():
    assert set(skip_bigram_counts(list("abc"), 4)) == {("a", "b"), ("a", "c"), ("b", "c")}
    assert skip_bigram_counts(["a"], 4) == {}
    assert list(skip_bigram_counts(list("abcdefg"), 0)) == [tuple(p) for p in ("ab", "bc", "cd", "de", "ef", "fg")]


def test_gap_modes_differ_at_the_boundary():
    hyp, ref = list("abcdef"), ["a", "f"]
    assert rouge_pair(hyp, ref, RSU).recall == 1.0
    assert rouge_pair(hyp, ref, RougeConfig(variant="RSU", gap_mode="distance")).recall == pytest.approx(2 / 3)


def test_empty_hypothesis_has_zero_precision():
    s = rouge_pair([], ["a"], R1)
    assert (s.precision, s.recall, s.f1) == (0.0, 0.0, 0.0)


def test_empty_reference_rejected():
    with pytest.raises(ValueError):
        rouge_pair(["a"], [], R1)


def test_truncated_hypothesis():
    cfg = RougeConfig(variant="R1", truncate_hypothesis_to=2)
    assert rouge_pair(list("abxx"), list("ab"), cfg).f1 == 1.0


def test_recall_reporting():
    assert RougeScore.from_pr(1.0, 0.5).headline("recall") == 0.5
    assert RougeScore.from_pr(1.0, 0.5).headline() == pytest.approx(2 / 3)


def test_bad_config():
    for kwargs in ({"variant": "R3"}, {"gap_mode": "x"}, {"reporting": "p"}, {"skip_distance": -1}):
        with pytest.raises(ValueError):
            RougeConfig(**kwargs)


class TestCorpus:
    def test_single_pair(self):
        assert rouge_corpus([(["a", "b"], ["a"])]) == rouge_pair(["a", "b"], ["a"])

    def test_macro_average(self):
        assert rouge_corpus([(["a"], ["a"]), (["b"], ["a"])]).f1 == 0.5

    def test_empty(self):
        with pytest.raises(ValueError):
            rouge_corpus([])

    def test_report_keys(self):
        report = rouge_report([(list("abc"), list("abc"))])
        assert sorted(report) == ["R-1", "R-2", "R-SU"]
        assert all(s.f1 == 1.0 for s in report.values())


def test_permutation_keeps_unigram_score():
    rng = random.Random(3)
    for _ in range(50):
        hyp = [rng.choice("abcde") for _ in range(rng.randint(1, 10))]
        ref = [rng.choice("abcde") for _ in range(rng.randint(1, 10))]
        perm = hyp[:]
        rng.shuffle(perm)
        assert rouge_pair(perm, ref, R1) == rouge_pair(hyp, ref, R1)
    # bigram-based scores do move under permutation
    assert rouge_pair(list("ba"), list("ab"), R2).f1 != rouge_pair(list("ab"), list("ab"), R2).f1


@given(st.lists(st.sampled_from("abcd"), max_size=12), st.lists(st.sampled_from("abcd"), min_size=1, max_size=12),
       st.sampled_from(["R1", "R2", "RSU"]))
def test_matches_naive_matcher(hyp, ref, variant):
    s = rouge_pair(hyp, ref, RougeConfig(variant=variant))
    p, r, f = naive_rouge(hyp, ref, variant)
    assert s.precision == pytest.approx(p, abs=1e-12)
    assert s.recall == pytest.approx(r, abs=1e-12)
    assert s.f1 == pytest.approx(f, abs=1e-12)


@given(st.lists(st.sampled_from("abc"), min_size=1, max_size=10))
def test_identity_scores_one_for_unigram_and_su(seq):
    assert rouge_pair(seq, seq, R1).f1 == 1.0
    assert rouge_pair(seq, seq, RSU).f1 == 1.0
