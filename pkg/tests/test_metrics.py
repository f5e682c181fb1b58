import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tempocap.captionfmt import ChangeEntry, SegmentEntry, SegmentedCaption
from tempocap.core import DimensionMismatchError, TimeInterval
from tempocap.metrics import (
    EmptyHypothesisWarning,
    bert_score,
    bleu,
    clap_score,
    corpus_bleu,
    corpus_stats,
    lcs_length,
    mean_clap_score,
    median_rank,
    meteor_lite,
    recall_at_k,
    retrieval_report,
    rouge_l,
    stem,
    tokenize,
)
from tempocap.retrieval import RankedList

from oracles import lcs_oracle

words = st.lists(st.sampled_from(["a", "b", "c", "d", "the", "runs", "running"]), max_size=10)
nonempty = st.lists(st.sampled_from(["a", "b", "c", "d", "the", "runs", "running"]), min_size=1, max_size=10)


@pytest.mark.parametrize("text, tokens", [
    ("The cat, sat.", ["the", "cat", "sat"]),
    ("", []),
    ("  A  a ", ["a", "a"]),
    ("... (hi) !!", ["hi"]),
    ("rock'n'roll 4/4", ["rock'n'roll", "4/4"]),
])
def test_tokenize(text, tokens):
    assert tokenize(text) == tokens


def test_bleu_identity():
    s = tokenize("a warm piano ballad with strings")
    assert bleu(s, [s]) == 1.0


def test_bleu_no_overlap_is_epsilon_scale():
    assert bleu(["x", "y", "z", "w"], [["a", "b", "c", "d"]]) <= 1e-8


def test_bleu_brevity_penalty_example():
    got = bleu(["the", "cat", "sat"], [["the", "cat", "sat", "on", "the", "mat"]], max_n=1)
    assert got == pytest.approx(math.exp(1 - 6 / 3), abs=1e-15)
    assert got == pytest.approx(0.36788, abs=1e-5)


def test_bleu_clipping_and_closest_ref():
    # "the the the" vs "the cat": clipped unigram precision 1/3
    assert bleu(["the"] * 3, [["the", "cat", "x"]], max_n=1) == pytest.approx(1 / 3)
    # closest ref length 3 (not 6) so no brevity penalty
    assert bleu(["a", "b", "c"], [["a", "b", "c", "d", "e", "f"], ["a", "b", "c"]], max_n=2) == 1.0


def test_bleu_empty_hypothesis_flagged():
    with pytest.warns(EmptyHypothesisWarning):
        assert bleu([], [["a"]]) == 0.0
    with pytest.raises(ValueError):
        bleu(["a"], [])
    with pytest.raises(ValueError):
        bleu(["a"], [["a"]], max_n=0)


def test_corpus_bleu_identity_and_pooling():
    hyps = [tokenize("a b c d e"), tokenize("f g h i")]
    assert corpus_bleu(hyps, [[h] for h in hyps]) == 1.0
    # pooled unigram precision 3/4 (not the mean of 1/2 and 1)
    hyps = [["a", "x"], ["b", "c"]]
    refs = [[["a", "y"]], [["b", "c"]]]
    assert corpus_bleu(hyps, refs, max_n=1) == pytest.approx(0.75)


def test_rouge_examples():
    s = ["a", "b", "c"]
    assert rouge_l(s, s) == 1.0
    assert rouge_l(["a", "b"], ["c", "d"]) == 0.0
    assert rouge_l(["a", "b", "c", "d"], ["a", "c", "d"]) == pytest.approx(2 * 0.75 / 1.75, abs=1e-15)
    assert rouge_l(["a", "b", "c", "d"], ["a", "c", "d"]) == pytest.approx(0.857142, abs=1e-6)
    assert rouge_l([], ["a"]) == 0.0


@given(st.lists(st.sampled_from("abc"), max_size=8), st.lists(st.sampled_from("abc"), max_size=8))
def test_lcs_matches_recursive_oracle(a, b):
    assert lcs_length(a, b) == lcs_oracle(tuple(a), tuple(b))


def test_meteor_examples():
    assert meteor_lite(["a", "b"], ["c", "d"]) == 0.0
    assert meteor_lite(["a", "b", "c", "d"], ["a", "b", "c", "d"]) == 0.9921875
    assert meteor_lite(["a"], ["a"]) == 0.5


def test_meteor_hand_computed_reordering():
    # m=3, P=1, R=3/4, chunks 2 ("c" then "a b")
    p, r = 1.0, 0.75
    f_mean = p * r / (0.9 * p + 0.1 * r)
    want = f_mean * (1 - 0.5 * (2 / 3) ** 3)
    assert meteor_lite(["c", "a", "b"], ["a", "b", "c", "d"]) == pytest.approx(want, abs=1e-15)


def test_meteor_stem_stage():
    assert stem("running") == "run" and stem("drums") == "drum" and stem("melodies") == "melody"
    assert meteor_lite(["drums", "playing"], ["drum", "plays"]) == meteor_lite(["drum", "play"], ["drum", "play"])


def test_bert_score_examples():
    e = np.eye(3)
    assert bert_score(e, e) == pytest.approx((1.0, 1.0, 1.0))
    assert bert_score(e[:1], e[1:]) == (0.0, 0.0, 0.0)
    p, r, f = bert_score([e[0]], [e[0], e[1]])
    assert (p, r) == pytest.approx((1.0, 0.5)) and f == pytest.approx(2 / 3)


def test_bert_score_errors():
    with pytest.raises(ValueError):
        bert_score([], [[1.0]])
    with pytest.raises(DimensionMismatchError):
        bert_score([[1.0, 0.0]], [[1.0]])


@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_bert_score_swap_symmetry(nh, nr, seed):
    rng = np.random.default_rng(seed)
    h, r = rng.normal(size=(nh, 4)), rng.normal(size=(nr, 4))
    p1, r1, f1 = bert_score(h, r)
    p2, r2, f2 = bert_score(r, h)
    assert (p1, r1) == pytest.approx((r2, p2), abs=1e-15)
    assert f1 == pytest.approx(f2, abs=1e-15)


@given(words, nonempty)
def test_bounded_metrics(h, r):
    assert 0.0 <= rouge_l(h, r) <= 1.0
    assert 0.0 <= meteor_lite(h, r) <= 1.0
    if h:
        assert 0.0 <= bleu(h, [r]) <= 1.0


@given(nonempty)
def test_identity_closed_forms(s):
    assert rouge_l(s, s) == 1.0
    assert meteor_lite(s, s) == pytest.approx(1 - 0.5 * (1 / len(s)) ** 3, abs=1e-15)
    if len(s) >= 4:
        assert bleu(s, [s]) == 1.0


def _ranked(ranks, n_items=12):
    """One query per rank; the truth item "t" sits at the given 1-based rank."""
    out, truth = [], {}
    for q, rank in enumerate(ranks):
        items = [f"x{k}" for k in range(n_items - 1)]
        items.insert(rank - 1, "t")
        out.append(RankedList(f"q{q}", tuple((i, 1.0 - k / 100) for k, i in enumerate(items))))
        truth[f"q{q}"] = "t"
    return out, truth


def test_recall_examples():
    assert recall_at_k(*_ranked([1, 1, 1]), 1) == 1.0
    ranked, truth = _ranked([7] * 10)
    assert recall_at_k(ranked, truth, 5) == 0.0 and recall_at_k(ranked, truth, 10) == 1.0
    assert recall_at_k(*_ranked([1, 3, 8]), 5) == pytest.approx(2 / 3)


def test_recall_errors():
    ranked, truth = _ranked([1])
    with pytest.raises(KeyError):
        recall_at_k(ranked, {}, 1)
    with pytest.raises(ValueError):
        recall_at_k(ranked, truth, 0)


@pytest.mark.parametrize("ranks, med", [([1, 3, 5], 3), ([1, 4], 2.5), ([1, 1, 1, 1], 1)])
def test_median_rank(ranks, med):
    assert median_rank(*_ranked(ranks)) == med


def test_retrieval_report_keys():
    rep = retrieval_report(*_ranked([1, 2, 6]))
    assert list(rep) == ["R@1", "R@5", "R@10", "MedR"]
    assert rep == {"R@1": 1 / 3, "R@5": 2 / 3, "R@10": 1.0, "MedR": 2.0}


def test_clap_score():
    assert clap_score([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)
    assert clap_score([1, 0], [0, 1]) == 0.0
    assert mean_clap_score([([1, 0], [1, 0]), ([1, 0], [0, 1])]) == 0.5


def _cap(global_text, seg_texts, change_texts=()):
    n = len(seg_texts)
    segs = tuple(SegmentEntry(TimeInterval(i / n, (i + 1) / n), t) for i, t in enumerate(seg_texts))
    return SegmentedCaption(global_text, segs, tuple(ChangeEntry(i, t) for i, t in enumerate(change_texts)))


def test_corpus_stats_examples():
    s = corpus_stats([_cap("a b", ["c"])])
    assert (s.mean_tokens_global, s.mean_tokens_total, s.vocabulary_size, s.mean_segments, s.mean_changes) == (
        2, 3, 3, 1, 0)
    one = _cap("slow intro", ["piano", "drums enter"], ["build up"])
    a, b = corpus_stats([one]), corpus_stats([one, one])
    assert b.vocabulary_size == a.vocabulary_size
    assert (b.mean_tokens_total, b.mean_segments, b.mean_changes) == (a.mean_tokens_total, a.mean_segments, a.mean_changes)
    s = corpus_stats([_cap("g", ["1", "2", "3", "4"], ["x", "y", "z"])])
    assert (s.mean_segments, s.mean_changes) == (4, 3)
    with pytest.raises(ValueError):
        corpus_stats([])
