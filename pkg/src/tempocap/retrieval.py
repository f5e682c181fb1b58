"""Many-to-many text/audio retrieval with IoU-weighted cosine similarity.

A document is a set of (relative interval, embedding) parts.  A text doc and
an audio doc score as the mean of all cross-part cosines, each weighted by
the IoU of the two parts' intervals.  Pairs with no temporal overlap at all
score :data:`IRRELEVANT`, which ranks below every finite score.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import (
    CorpusError,
    DimensionMismatchError,
    EmbeddingVector,
    TimeInterval,
    dumps,
    iter_jsonl,
    normalize_rows,
)

IRRELEVANT = float("-inf")
IRRELEVANT_TOKEN = "irrelevant"
DEFAULT_WINDOW_S = 10.0


def interval_iou(a: TimeInterval, b: TimeInterval) -> float:
    inter = min(a.end, b.end) - max(a.start, b.start)
    if inter <= 0.0:
        return 0.0
    union = max(a.end, b.end) - min(a.start, b.start)
    return inter / union


def iou_matrix(a: Sequence[TimeInterval], b: Sequence[TimeInterval]) -> np.ndarray:
    sa = np.array([[i.start, i.end] for i in a], dtype=np.float64)
    sb = np.array([[i.start, i.end] for i in b], dtype=np.float64)
    inter = np.minimum(sa[:, None, 1], sb[None, :, 1]) - np.maximum(sa[:, None, 0], sb[None, :, 0])
    union = np.maximum(sa[:, None, 1], sb[None, :, 1]) - np.minimum(sa[:, None, 0], sb[None, :, 0])
    return np.where(inter > 0.0, inter / union, 0.0)


def uniform_windows(duration_s: float, window_s: float = DEFAULT_WINDOW_S) -> list[TimeInterval]:
    """Back-to-back windows of ``window_s`` seconds as relative intervals.

    A shorter final window is kept.
    """
    if not (duration_s > 0 and math.isfinite(duration_s)):
        raise ValueError(f"duration must be positive, got {duration_s!r}")
    if not (window_s > 0 and math.isfinite(window_s)):
        raise ValueError(f"window must be positive, got {window_s!r}")
    count = max(1, math.ceil(duration_s / window_s))
    # float division can overshoot an exact multiple by one window
    if count > 1 and duration_s - (count - 1) * window_s <= 1e-9 * duration_s:
        count -= 1
    edges = [k * window_s / duration_s for k in range(count)] + [1.0]
    return [TimeInterval(s, e) for s, e in zip(edges, edges[1:])]


@dataclass(frozen=True)
class SegmentDoc:
    """Parts are kept sorted by (start, end, vector) so scoring order is canonical."""

    id: str
    parts: tuple[tuple[TimeInterval, EmbeddingVector], ...]

    def __post_init__(self):
        parts = tuple(
            (iv, v if isinstance(v, EmbeddingVector) else EmbeddingVector(v)) for iv, v in self.parts
        )
        if not parts:
            raise ValueError(f"doc {self.id!r} has no parts")
        dims = {v.dim for _, v in parts}
        if len(dims) != 1:
            raise DimensionMismatchError(f"doc {self.id!r} mixes embedding dims {sorted(dims)}")
        parts = tuple(sorted(parts, key=lambda p: (p[0].start, p[0].end, tuple(p[1].values))))
        object.__setattr__(self, "parts", parts)

    @property
    def dim(self) -> int:
        return self.parts[0][1].dim

    @property
    def intervals(self) -> list[TimeInterval]:
        return [iv for iv, _ in self.parts]

    @cached_property
    def unit_vectors(self) -> np.ndarray:
        return normalize_rows(np.stack([v.values for _, v in self.parts]))


@dataclass(frozen=True)
class ScoreMatrix:
    queries: tuple[str, ...]
    items: tuple[str, ...]
    scores: np.ndarray

    def row(self, query_id: str) -> np.ndarray:
        try:
            return self.scores[self.queries.index(query_id)]
        except ValueError:
            raise KeyError(f"unknown query id {query_id!r}") from None


@dataclass(frozen=True)
class RankedList:
    query_id: str
    entries: tuple[tuple[str, float], ...]

    def rank_of(self, item_id: str) -> int:
        """1-based rank of ``item_id``."""
        for r, (iid, _) in enumerate(self.entries, 1):
            if iid == item_id:
                return r
        raise KeyError(f"item {item_id!r} not in ranking for query {self.query_id!r}")


def pair_score(text_doc: SegmentDoc, audio_doc: SegmentDoc) -> float:
    if text_doc.dim != audio_doc.dim:
        raise DimensionMismatchError(
            f"dimension mismatch: {text_doc.id!r} has {text_doc.dim}, {audio_doc.id!r} has {audio_doc.dim}"
        )
    w = iou_matrix(text_doc.intervals, audio_doc.intervals)
    if not np.any(w > 0.0):
        return IRRELEVANT
    c = np.clip(text_doc.unit_vectors @ audio_doc.unit_vectors.T, -1.0, 1.0)
    # fsum is exactly rounded, so the result does not depend on part order
    return math.fsum((w * c).ravel()) / math.fsum(w.ravel())


def score_matrix(text_docs: Sequence[SegmentDoc], audio_docs: Sequence[SegmentDoc]) -> ScoreMatrix:
    if not text_docs or not audio_docs:
        raise ValueError("score_matrix needs at least one text doc and one audio doc")
    dims = {d.dim for d in text_docs} | {d.dim for d in audio_docs}
    if len(dims) != 1:
        raise DimensionMismatchError(f"documents mix embedding dims {sorted(dims)}")
    scores = np.empty((len(text_docs), len(audio_docs)), dtype=np.float64)
    for q, t in enumerate(text_docs):
        for i, a in enumerate(audio_docs):
            scores[q, i] = pair_score(t, a)
    return ScoreMatrix(tuple(d.id for d in text_docs), tuple(d.id for d in audio_docs), scores)


def rank_items(m: ScoreMatrix, query_id: str) -> RankedList:
    """Descending score, ties by ascending item id; -inf (irrelevant) sorts last."""
    row = m.row(query_id)
    order = sorted(range(len(m.items)), key=lambda i: (-row[i], m.items[i]))
    return RankedList(query_id, tuple((m.items[i], float(row[i])) for i in order))


def rank_all(m: ScoreMatrix) -> list[RankedList]:
    return [rank_items(m, q) for q in m.queries]


# -- I/O --------------------------------------------------------------------

def _doc_from_record(obj, include_global: bool, window_s: float) -> SegmentDoc:
    if not isinstance(obj, dict) or not isinstance(obj.get("id"), str):
        raise ValueError("record must be an object with a string 'id'")
    parts = []
    if "parts" in obj:
        for p in obj["parts"]:
            parts.append((TimeInterval(p["start"], p["end"]), EmbeddingVector(p["embedding"])))
    elif "windows" in obj:
        windows = obj["windows"]
        intervals = uniform_windows(float(obj["duration_s"]), window_s)
        if len(intervals) != len(windows):
            raise ValueError(
                f"doc {obj['id']!r}: {len(windows)} window embeddings for {len(intervals)} windows"
            )
        parts = [(iv, EmbeddingVector(v)) for iv, v in zip(intervals, windows)]
    else:
        raise ValueError(f"doc {obj['id']!r}: needs 'parts' or 'windows'")
    if include_global and obj.get("global_embedding") is not None:
        parts.append((TimeInterval(0.0, 1.0), EmbeddingVector(obj["global_embedding"])))
    for _, v in parts:
        if not np.all(np.isfinite(v.values)) or not np.any(v.values):
            raise ValueError(f"doc {obj['id']!r}: embeddings must be finite and nonzero")
    return SegmentDoc(obj["id"], tuple(parts))


def load_segment_docs(
    path: str | Path, include_global: bool = False, window_s: float = DEFAULT_WINDOW_S
) -> list[SegmentDoc]:
    """Read SegmentDoc JSONL.

    Each line has ``id`` and either ``parts`` (``[{start, end, embedding}]``)
    or ``duration_s`` + ``windows`` (one embedding per uniform window).  An
    optional ``global_embedding`` becomes a full-span part when
    ``include_global`` is set.
    """
    docs = []
    seen = set()
    for lineno, obj in iter_jsonl(path):
        try:
            doc = _doc_from_record(obj, include_global, window_s)
        except (ValueError, KeyError, TypeError) as e:
            raise CorpusError(str(e), lineno, str(path)) from None
        if doc.id in seen:
            raise CorpusError(f"duplicate id {doc.id!r}", lineno, str(path))
        seen.add(doc.id)
        docs.append(doc)
    if not docs:
        raise CorpusError("no documents", path=str(path))
    return docs


def doc_to_record(doc: SegmentDoc) -> dict:
    return {
        "id": doc.id,
        "parts": [{"start": iv.start, "end": iv.end, "embedding": v.values} for iv, v in doc.parts],
    }


def write_segment_docs(docs: Iterable[SegmentDoc], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as f:
        for d in docs:
            f.write(dumps(doc_to_record(d)) + "\n")


def _score_token(s: float):
    return IRRELEVANT_TOKEN if s == IRRELEVANT else float(s)


def ranking_to_record(r: RankedList) -> dict:
    return {"query": r.query_id, "ranking": [{"id": i, "score": _score_token(s)} for i, s in r.entries]}


def ranking_from_record(obj: Mapping) -> RankedList:
    entries = []
    for e in obj["ranking"]:
        s = e["score"]
        entries.append((e["id"], IRRELEVANT if s == IRRELEVANT_TOKEN else float(s)))
    return RankedList(obj["query"], tuple(entries))


def matrix_to_record(m: ScoreMatrix) -> dict:
    return {
        "queries": list(m.queries),
        "items": list(m.items),
        "scores": [[_score_token(s) for s in row] for row in m.scores],
    }
