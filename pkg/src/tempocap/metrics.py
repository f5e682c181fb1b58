"""Caption, retrieval and generation metrics, plus corpus statistics.

Metric variants (reports carry these strings so numbers from different
variants are never mixed up):

* ``bleu``: clipped n-gram precision up to ``max_n`` (default 4), numerator
  floored at 1e-9, closest-reference brevity penalty.  Sentence level per
  item; corpus level pools counts over all items.
* ``rouge_l``: LCS-based F1.
* ``meteor_lite``: exact then stemmed unigram alignment, alpha=0.9, beta=3,
  gamma=0.5, no synonym stage.
* ``bert_score``: greedy cosine matching over caller-supplied token
  embeddings, no IDF weighting.
"""
from __future__ import annotations

import math
import statistics
import string
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .captionfmt import SegmentedCaption
from .core import DimensionMismatchError, cosine, normalize_rows
from .retrieval import RankedList

BLEU_EPSILON = 1e-9
METEOR_ALPHA = 0.9
METEOR_BETA = 3.0
METEOR_GAMMA = 0.5
DEFAULT_KS = (1, 5, 10)

VARIANTS = {
    "bleu": f"bleu-4 sentence, eps={BLEU_EPSILON:g} numerator floor, closest-ref BP",
    "bleu_corpus": f"bleu-4 corpus, eps={BLEU_EPSILON:g} numerator floor, closest-ref BP",
    "rouge_l": "rouge-l F1 (beta=1)",
    "meteor_lite": "meteor exact+stem, alpha=0.9 beta=3 gamma=0.5, no synonyms",
    "bert_score": "bertscore F1, greedy cosine, no idf",
    "clap_score": "mean audio-text cosine",
}


class EmptyHypothesisWarning(UserWarning):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip leading/trailing punctuation."""
    out = []
    for raw in text.lower().split():
        tok = raw.strip(string.punctuation)
        if tok:
            out.append(tok)
    return out


# -- BLEU -------------------------------------------------------------------

def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _closest_ref_len(hyp_len: int, refs: Sequence[Sequence[str]]) -> int:
    return min((len(r) for r in refs), key=lambda rl: (abs(rl - hyp_len), rl))


def _bleu_counts(hyp, refs, max_n):
    matches, totals = [], []
    for n in range(1, max_n + 1):
        hyp_counts = _ngrams(hyp, n)
        max_ref = Counter()
        for r in refs:
            max_ref |= _ngrams(r, n)
        matches.append(sum(min(c, max_ref[g]) for g, c in hyp_counts.items()))
        totals.append(max(len(hyp) - n + 1, 0))
    return matches, totals


def _bleu_from_counts(matches, totals, hyp_len, ref_len) -> float:
    if hyp_len == 0:
        return 0.0
    log_p = 0.0
    for m, t in zip(matches, totals):
        # an n-gram order longer than the hypothesis contributes the floor
        p = max(m, BLEU_EPSILON) / t if t > 0 else BLEU_EPSILON
        log_p += math.log(p)
    bp = math.exp(min(0.0, 1.0 - ref_len / hyp_len))
    return min(1.0, bp * math.exp(log_p / len(matches)))


def bleu(hyp: Sequence[str], refs: Sequence[Sequence[str]], max_n: int = 4) -> float:
    if max_n < 1:
        raise ValueError("max_n must be at least 1")
    if not refs:
        raise ValueError("bleu needs at least one reference")
    if not hyp:
        warnings.warn("empty hypothesis scores 0", EmptyHypothesisWarning, stacklevel=2)
        return 0.0
    matches, totals = _bleu_counts(hyp, refs, max_n)
    return _bleu_from_counts(matches, totals, len(hyp), _closest_ref_len(len(hyp), refs))


def corpus_bleu(hyps: Sequence[Sequence[str]], refs_list: Sequence[Sequence[Sequence[str]]], max_n: int = 4) -> float:
    """Pooled counts and lengths across the corpus, then one BLEU."""
    if len(hyps) != len(refs_list):
        raise ValueError("hypothesis and reference counts differ")
    matches = [0] * max_n
    totals = [0] * max_n
    hyp_len = ref_len = 0
    for hyp, refs in zip(hyps, refs_list):
        if not refs:
            raise ValueError("bleu needs at least one reference")
        m, t = _bleu_counts(hyp, refs, max_n)
        matches = [a + b for a, b in zip(matches, m)]
        totals = [a + b for a, b in zip(totals, t)]
        hyp_len += len(hyp)
        ref_len += _closest_ref_len(len(hyp), refs)
    return _bleu_from_counts(matches, totals, hyp_len, ref_len)


# -- ROUGE-L ----------------------------------------------------------------

def lcs_length(a: Sequence, b: Sequence) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(hyp: Sequence[str], ref: Sequence[str]) -> float:
    lcs = lcs_length(hyp, ref)
    if lcs == 0:
        return 0.0
    p = lcs / len(hyp)
    r = lcs / len(ref)
    return 2 * p * r / (p + r)


# -- METEOR (no synonym stage) ----------------------------------------------

_SUFFIXES = ("ingly", "edly", "ness", "ment", "ing", "ies", "ied", "ed", "es", "ly", "s")


def stem(token: str) -> str:
    """Strip the first matching suffix from a fixed list, keeping at least 3 characters.

    ``ies``/``ied`` become ``y``; a doubled final consonant left behind by
    ``ing``/``ed`` is undone (``running`` -> ``run``).
    """
    for suf in _SUFFIXES:
        if token.endswith(suf) and len(token) - len(suf) >= 3:
            base = token[: -len(suf)]
            if suf in ("ies", "ied"):
                return base + "y"
            if suf in ("ing", "ed") and len(base) >= 4 and base[-1] == base[-2] and base[-1] not in "aeiouls":
                base = base[:-1]
            return base
    return token


def _align(hyp, ref, key, used_h, used_r, pairs):
    """Match unused hyp tokens left to right, preferring the ref slot right after the last match."""
    positions: dict[str, list[int]] = {}
    for j, tok in enumerate(ref):
        if j not in used_r:
            positions.setdefault(key(tok), []).append(j)
    last_r = -2
    for i, tok in enumerate(hyp):
        if i in used_h:
            last_r = next((r for h, r in pairs if h == i), last_r)
            continue
        cands = positions.get(key(tok))
        if not cands:
            continue
        j = min(cands, key=lambda r: (abs(r - (last_r + 1)), r))
        cands.remove(j)
        used_h.add(i)
        used_r.add(j)
        pairs.append((i, j))
        last_r = j


def _chunks(pairs) -> int:
    if not pairs:
        return 0
    pairs = sorted(pairs)
    chunks = 1
    for (h0, r0), (h1, r1) in zip(pairs, pairs[1:]):
        if not (h1 == h0 + 1 and r1 == r0 + 1):
            chunks += 1
    return chunks


def meteor_lite(hyp: Sequence[str], ref: Sequence[str]) -> float:
    used_h: set[int] = set()
    used_r: set[int] = set()
    pairs: list[tuple[int, int]] = []
    _align(hyp, ref, lambda t: t, used_h, used_r, pairs)
    _align(hyp, ref, stem, used_h, used_r, pairs)
    m = len(pairs)
    if m == 0:
        return 0.0
    p = m / len(hyp)
    r = m / len(ref)
    f_mean = p * r / (METEOR_ALPHA * p + (1 - METEOR_ALPHA) * r)
    penalty = METEOR_GAMMA * (_chunks(pairs) / m) ** METEOR_BETA
    return f_mean * (1 - penalty)


# -- BERTScore --------------------------------------------------------------

def bert_score(hyp_tokens, ref_tokens) -> tuple[float, float, float]:
    """Greedy-matching precision, recall and F1 over token embeddings."""
    h = np.asarray([np.asarray(v, dtype=np.float64) for v in hyp_tokens])
    r = np.asarray([np.asarray(v, dtype=np.float64) for v in ref_tokens])
    if h.size == 0 or r.size == 0:
        raise ValueError("bert_score needs at least one token on each side")
    if h.ndim != 2 or r.ndim != 2 or h.shape[1] != r.shape[1]:
        raise DimensionMismatchError("token embeddings must share one dimension")
    sim = normalize_rows(h) @ normalize_rows(r).T
    p = float(sim.max(axis=1).mean())
    rec = float(sim.max(axis=0).mean())
    f = 2 * p * rec / (p + rec) if p > 0 and rec > 0 else 0.0
    return p, rec, f


# -- retrieval --------------------------------------------------------------

def truth_ranks(ranked: Sequence[RankedList], truth: Mapping[str, str]) -> list[int]:
    ranks = []
    for rl in ranked:
        if rl.query_id not in truth:
            raise KeyError(f"no ground-truth item for query {rl.query_id!r}")
        ranks.append(rl.rank_of(truth[rl.query_id]))
    return ranks


def recall_at_k(ranked: Sequence[RankedList], truth: Mapping[str, str], k: int) -> float:
    if k < 1:
        raise ValueError("K must be at least 1")
    ranks = truth_ranks(ranked, truth)
    return sum(r <= k for r in ranks) / len(ranks)


def median_rank(ranked: Sequence[RankedList], truth: Mapping[str, str]) -> float:
    return float(statistics.median(truth_ranks(ranked, truth)))


def retrieval_report(ranked: Sequence[RankedList], truth: Mapping[str, str], ks=DEFAULT_KS) -> dict[str, float]:
    """``{"R@k": ..., "MedR": ...}`` in the order of ``ks``."""
    ranks = truth_ranks(ranked, truth)
    out = {f"R@{k}": sum(r <= k for r in ranks) / len(ranks) for k in ks}
    out["MedR"] = float(statistics.median(ranks))
    return out


# -- generation -------------------------------------------------------------

def clap_score(audio, text) -> float:
    return cosine(audio, text)


def mean_clap_score(pairs) -> float:
    scores = [clap_score(a, t) for a, t in pairs]
    if not scores:
        raise ValueError("no pairs")
    return math.fsum(scores) / len(scores)


# -- reports ----------------------------------------------------------------

@dataclass(frozen=True)
class MetricReport:
    """``corpus_score`` is the mean of ``per_item`` unless the variant says otherwise."""

    name: str
    variant: str
    corpus_score: float
    per_item: tuple[tuple[str, float], ...]

    def to_record(self) -> dict:
        return {
            "metric": self.name,
            "variant": self.variant,
            "corpus_score": self.corpus_score,
            "per_item": [{"id": i, "score": s} for i, s in self.per_item],
        }


def mean_report(name: str, scores: Mapping[str, float]) -> MetricReport:
    items = tuple(sorted(scores.items()))
    corpus = math.fsum(s for _, s in items) / len(items) if items else 0.0
    return MetricReport(name, VARIANTS.get(name, name), corpus, items)


@dataclass(frozen=True)
class StatsReport:
    caption_count: int
    mean_tokens_global: float
    mean_tokens_total: float
    vocabulary_size: int
    mean_segments: float
    mean_changes: float


def corpus_stats(caps: Sequence[SegmentedCaption]) -> StatsReport:
    if not caps:
        raise ValueError("empty corpus")
    n = len(caps)
    vocab: set[str] = set()
    global_tokens = total_tokens = 0
    for c in caps:
        g = tokenize(c.global_text)
        global_tokens += len(g)
        for text in c.texts:
            toks = tokenize(text)
            total_tokens += len(toks)
            vocab.update(toks)
    return StatsReport(
        caption_count=n,
        mean_tokens_global=global_tokens / n,
        mean_tokens_total=total_tokens / n,
        vocabulary_size=len(vocab),
        mean_segments=sum(len(c.segments) for c in caps) / n,
        mean_changes=sum(len(c.changes) for c in caps) / n,
    )
