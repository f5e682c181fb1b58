"""Domain types, embedding math and clip-corpus ingestion.

Embeddings are supplied as data; nothing here runs a model.  All types are
immutable once built, so a corpus can be shared freely between readers.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

DEFAULT_DIM = 384


class CorpusError(ValueError):
    """Raised when a corpus file cannot be ingested.

    ``line`` is the 1-based line number of the offending record, when known.
    """

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class DimensionMismatchError(ValueError):
    pass


class ZeroNormError(ValueError):
    pass


class EmbeddingVector:
    """A read-only, finite-or-not float64 vector.

    Construction never rejects values; ingestion and :func:`validate_corpus`
    decide what is acceptable.
    """

    __slots__ = ("values",)

    def __init__(self, values: Iterable[float] | np.ndarray):
        arr = np.array(values, dtype=np.float64).reshape(-1)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("EmbeddingVector is immutable")

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def __len__(self) -> int:
        return self.dim

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingVector):
            return NotImplemented
        return self.values.shape == other.values.shape and bool(
            np.array_equal(self.values, other.values, equal_nan=True)
        )

    def __hash__(self) -> int:
        return hash(self.values.tobytes())

    def __repr__(self) -> str:
        return f"EmbeddingVector(dim={self.dim})"


def as_array(v: EmbeddingVector | Sequence[float] | np.ndarray) -> np.ndarray:
    if isinstance(v, EmbeddingVector):
        return v.values
    return np.asarray(v, dtype=np.float64).reshape(-1)


def cosine(a, b) -> float:
    """Cosine similarity of two vectors of equal dimension.

    Raises :class:`DimensionMismatchError` or :class:`ZeroNormError`.
    """
    x = as_array(a)
    y = as_array(b)
    if x.shape != y.shape:
        raise DimensionMismatchError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    nx = float(np.linalg.norm(x))
    ny = float(np.linalg.norm(y))
    if nx == 0.0 or ny == 0.0:
        raise ZeroNormError("cosine undefined for a zero-norm vector")
    c = float(np.dot(x, y)) / (nx * ny)
    # rounding can push |c| a hair above 1
    return min(1.0, max(-1.0, c))


def normalize_rows(m: np.ndarray) -> np.ndarray:
    """Row-normalize a 2-D array; zero rows raise :class:`ZeroNormError`."""
    m = np.asarray(m, dtype=np.float64)
    norms = np.linalg.norm(m, axis=1)
    if np.any(norms == 0.0):
        raise ZeroNormError("cosine undefined for a zero-norm vector")
    return m / norms[:, None]


@dataclass(frozen=True)
class TimeInterval:
    """A relative time span, both ends expressed as fractions of the track."""

    start: float
    end: float

    def __post_init__(self):
        s, e = float(self.start), float(self.end)
        if not (math.isfinite(s) and math.isfinite(e)):
            raise ValueError(f"interval bounds must be finite, got [{s}, {e}]")
        if not (0.0 <= s < e <= 1.0):
            raise ValueError(f"invalid interval [{s}, {e}]: need 0 <= start < end <= 1")
        object.__setattr__(self, "start", s)
        object.__setattr__(self, "end", e)

    @classmethod
    def from_seconds(cls, start_s: float, end_s: float, duration_s: float) -> "TimeInterval":
        if not duration_s > 0:
            raise ValueError("duration must be positive")
        end = 1.0 if end_s >= duration_s else end_s / duration_s
        return cls(max(0.0, start_s / duration_s), end)

    @property
    def length(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class ClipRecord:
    id: str
    caption: str
    duration_s: float
    embedding: EmbeddingVector


@dataclass(frozen=True)
class ClipCorpus:
    clips: tuple[ClipRecord, ...]
    dim: int
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "clips", tuple(self.clips))

    def __len__(self) -> int:
        return len(self.clips)

    def __iter__(self):
        return iter(self.clips)

    def __getitem__(self, i: int) -> ClipRecord:
        return self.clips[i]

    @cached_property
    def index(self) -> dict[str, int]:
        return {c.id: i for i, c in enumerate(self.clips)}

    @cached_property
    def unit_embeddings(self) -> np.ndarray:
        """(N, dim) matrix of L2-normalized clip embeddings."""
        m = normalize_rows(np.stack([c.embedding.values for c in self.clips]))
        m.setflags(write=False)
        return m

    def get(self, clip_id: str) -> ClipRecord:
        try:
            return self.clips[self.index[clip_id]]
        except KeyError:
            raise KeyError(f"unknown clip id {clip_id!r}") from None


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[tuple[str, str], ...] = ()

    @property
    def ok(self) -> bool:
        return not self.issues


def validate_corpus(c: ClipCorpus) -> ValidationReport:
    """Collect every invariant violation in ``c`` without raising."""
    issues: list[tuple[str, str]] = []
    if len(c.clips) == 0:
        issues.append(("", "empty corpus"))
    if not (isinstance(c.dim, int) and c.dim > 0):
        issues.append(("", f"invalid dimension {c.dim!r}"))
    seen: set[str] = set()
    for clip in c.clips:
        cid = clip.id
        if not isinstance(cid, str) or not cid:
            issues.append((str(cid), "id must be a non-empty string"))
        elif cid in seen:
            issues.append((cid, "duplicate id"))
        seen.add(cid)
        if not isinstance(clip.caption, str) or not clip.caption.strip():
            issues.append((cid, "empty caption"))
        d = clip.duration_s
        if not (isinstance(d, (int, float)) and math.isfinite(d) and d > 0):
            issues.append((cid, f"duration_s must be finite and positive, got {d!r}"))
        v = clip.embedding.values
        if v.shape[0] != c.dim:
            issues.append((cid, f"embedding dim {v.shape[0]} != corpus dim {c.dim}"))
        if not np.all(np.isfinite(v)):
            issues.append((cid, "embedding has non-finite values"))
        elif not np.any(v):
            issues.append((cid, "embedding has zero norm"))
    return ValidationReport(tuple(issues))


# -- JSONL ------------------------------------------------------------------

def format_float(x: float) -> str:
    """17 significant digits; enough for an exact float64 round trip."""
    return format(float(x), ".17g")


def dumps(obj: Any) -> str:
    """Compact JSON where every float is written with 17 significant digits."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            raise ValueError(f"cannot serialize non-finite number {obj!r}")
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, Mapping):
        return "{" + ",".join(f"{json.dumps(str(k), ensure_ascii=False)}:{dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def iter_jsonl(path: str | Path):
    """Yield ``(line_number, object)`` for non-blank lines; bad JSON raises CorpusError."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusError(f"malformed JSON: {e.msg}", lineno, str(path)) from None


def _record_to_clip(obj: Any) -> ClipRecord:
    if not isinstance(obj, dict):
        raise ValueError("record must be a JSON object")
    missing = [k for k in ("id", "caption", "duration_s", "embedding") if k not in obj]
    if missing:
        raise ValueError(f"missing keys: {', '.join(missing)}")
    cid, caption, dur, emb = obj["id"], obj["caption"], obj["duration_s"], obj["embedding"]
    if not isinstance(cid, str) or not cid:
        raise ValueError("id must be a non-empty string")
    if not isinstance(caption, str) or not caption.strip():
        raise ValueError(f"clip {cid!r}: caption must be a non-empty string")
    if isinstance(dur, bool) or not isinstance(dur, (int, float)) or not math.isfinite(dur) or dur <= 0:
        raise ValueError(f"clip {cid!r}: duration_s must be a positive number")
    arr = np.array(emb) if isinstance(emb, list) else None
    if arr is None or arr.ndim != 1 or arr.size == 0 or arr.dtype.kind not in "iuf":
        raise ValueError(f"clip {cid!r}: embedding must be a non-empty array of numbers")
    vec = EmbeddingVector(arr)
    if not np.all(np.isfinite(vec.values)):
        raise ValueError(f"clip {cid!r}: embedding has non-finite values")
    if not np.any(vec.values):
        raise ValueError(f"clip {cid!r}: embedding has zero norm")
    return ClipRecord(cid, caption, float(dur), vec)


def load_clip_corpus(path: str | Path, metadata: Mapping[str, Any] | None = None) -> ClipCorpus:
    """Read a clip corpus from JSONL, one clip per line.

    The embedding dimension is taken from the first record and enforced for
    the rest.  Any bad record raises :class:`CorpusError` naming its line.
    """
    clips: list[ClipRecord] = []
    seen: set[str] = set()
    dim = None
    for lineno, obj in iter_jsonl(path):
        try:
            clip = _record_to_clip(obj)
        except ValueError as e:
            raise CorpusError(str(e), lineno, str(path)) from None
        if dim is None:
            dim = clip.embedding.dim
        elif clip.embedding.dim != dim:
            raise CorpusError(
                f"clip {clip.id!r}: embedding dim {clip.embedding.dim} != {dim}", lineno, str(path)
            )
        if clip.id in seen:
            raise CorpusError(f"duplicate id {clip.id!r}", lineno, str(path))
        seen.add(clip.id)
        clips.append(clip)
    if not clips:
        raise CorpusError("empty corpus", path=str(path))
    return ClipCorpus(tuple(clips), dim, dict(metadata or {}))


def clip_to_record(clip: ClipRecord) -> dict:
    return {
        "id": clip.id,
        "caption": clip.caption,
        "duration_s": float(clip.duration_s),
        "embedding": clip.embedding.values,
    }


def write_clip_corpus(corpus: ClipCorpus, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as f:
        for clip in corpus.clips:
            f.write(dumps(clip_to_record(clip)) + "\n")


def make_corpus(records: Iterable[Mapping[str, Any]], metadata: Mapping[str, Any] | None = None) -> ClipCorpus:
    """Build a corpus from in-memory dicts without any validation."""
    clips = tuple(
        ClipRecord(r["id"], r["caption"], r["duration_s"], EmbeddingVector(r["embedding"])) for r in records
    )
    dim = clips[0].embedding.dim if clips else 0
    return ClipCorpus(clips, dim, dict(metadata or {}))
