"""Synthetic full-song composition.

A seed clip picks companion clips by softmax over caption-embedding cosine
similarity.  Each member gets a random length in [6, 10] s and the lengths
are turned into relative boundaries on [0, 1].

Randomness comes from :func:`make_rng`, a NumPy ``Generator`` over the PCG64
bit generator.  PCG64 output for a given 64-bit seed is specified and
identical on every platform, so a seed fully reproduces a run.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ClipCorpus

MIN_MEMBERS = 3
MAX_MEMBERS = 5
MIN_LENGTH_S = 6.0
MAX_LENGTH_S = 10.0


class SamplingError(ValueError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class CompositionPlan:
    seed_id: str
    members: tuple[tuple[str, float], ...]
    boundaries: tuple[float, ...]

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(length for _, length in self.members)

    def to_record(self) -> dict:
        return {
            "seed_id": self.seed_id,
            "members": [{"id": cid, "length_s": length} for cid, length in self.members],
            "boundaries": list(self.boundaries),
        }

    @classmethod
    def from_record(cls, obj: dict) -> "CompositionPlan":
        return cls(
            obj["seed_id"],
            tuple((m["id"], float(m["length_s"])) for m in obj["members"]),
            tuple(float(b) for b in obj["boundaries"]),
        )


@dataclass(frozen=True)
class TemplatedCaption:
    """Ordered (start, end, caption) triples tiling [0, 1]."""

    entries: tuple[tuple[float, float, str], ...]

    def __post_init__(self):
        entries = tuple((float(s), float(e), t) for s, e, t in self.entries)
        if not entries:
            raise ValueError("templated caption needs at least one entry")
        if entries[0][0] != 0.0 or entries[-1][1] != 1.0:
            raise ValueError("templated caption must start at 0 and end at 1")
        for (s, e, _), nxt in zip(entries, entries[1:] + ((None, None, None),)):
            if not s < e:
                raise ValueError(f"entry [{s}, {e}] is empty or reversed")
            if nxt[0] is not None and nxt[0] != e:
                raise ValueError(f"entries not contiguous at {e} / {nxt[0]}")
        object.__setattr__(self, "entries", entries)


def _check_temperature(temperature: float) -> None:
    if not (temperature > 0 and math.isfinite(temperature)):
        raise ValueError(f"temperature must be positive, got {temperature!r}")


def _softmax_similarities(sims: np.ndarray, seed_index: int, temperature: float) -> np.ndarray:
    sims = np.clip(sims, -1.0, 1.0)
    sims[seed_index] = 1.0
    logits = sims / temperature
    logits -= logits.max()
    w = np.exp(logits)
    return w / w.sum()


def similarity_weights(corpus: ClipCorpus, seed_index: int, temperature: float = 1.0) -> np.ndarray:
    """Softmax of cosine similarity to the seed clip, over the whole corpus.

    The seed itself is included and, having cosine 1, gets the largest weight.
    """
    if not (0 <= seed_index < len(corpus)):
        raise IndexError(f"seed_index {seed_index} out of range for corpus of {len(corpus)}")
    _check_temperature(temperature)
    unit = corpus.unit_embeddings
    return _softmax_similarities(unit @ unit[seed_index], seed_index, temperature)


def draw_without_replacement(weights: np.ndarray, n: int, rng: np.random.Generator) -> list[int]:
    """Sequential draws, renormalizing over the remaining items after each one.

    Each draw consumes exactly one ``rng.random()`` value.
    """
    w = np.array(weights, dtype=np.float64)
    if n > np.count_nonzero(w):
        raise SamplingError(f"cannot draw {n} distinct items from {np.count_nonzero(w)} with positive weight")
    picked = []
    for _ in range(n):
        cdf = np.cumsum(w)
        u = rng.random() * cdf[-1]
        j = int(np.searchsorted(cdf, u, side="right"))
        # guard against u landing on the float top edge or a zero-weight tail
        j = min(j, len(w) - 1)
        while w[j] == 0.0:
            j -= 1
        picked.append(j)
        w[j] = 0.0
    return picked


def relative_boundaries(lengths: Sequence[float]) -> list[float]:
    """Cumulative fractions ``[0, l1/L, (l1+l2)/L, ..., 1]`` with the last pinned to 1."""
    if len(lengths) == 0:
        raise ValueError("lengths must be non-empty")
    ls = [float(x) for x in lengths]
    if any(not (x > 0 and math.isfinite(x)) for x in ls):
        raise ValueError("all lengths must be positive and finite")
    total = math.fsum(ls)
    out = [0.0]
    acc = 0.0
    for x in ls[:-1]:
        acc += x
        out.append(acc / total)
    out.append(1.0)
    return out


def sample_composition(
    corpus: ClipCorpus,
    seed_index: int,
    rng: np.random.Generator,
    temperature: float = 1.0,
    force_include_seed: bool = False,
) -> CompositionPlan:
    """Compose one synthetic song around ``corpus[seed_index]``.

    Draw order from ``rng``: member count, member picks, then lengths.  With
    ``force_include_seed`` the seed becomes the first member and the others
    are drawn from the remaining clips.
    """
    if len(corpus) < MIN_MEMBERS:
        raise SamplingError(f"corpus has {len(corpus)} clips; composition needs at least {MIN_MEMBERS}")
    weights = similarity_weights(corpus, seed_index, temperature)
    return _compose(corpus, seed_index, weights, rng, force_include_seed)


def _compose(corpus, seed_index, weights, rng, force_include_seed) -> CompositionPlan:
    n = min(int(rng.integers(MIN_MEMBERS, MAX_MEMBERS + 1)), len(corpus))
    if force_include_seed:
        rest = weights.copy()
        rest[seed_index] = 0.0
        picked = [seed_index] + draw_without_replacement(rest, n - 1, rng)
    else:
        picked = draw_without_replacement(weights, n, rng)
    lengths = rng.uniform(MIN_LENGTH_S, MAX_LENGTH_S, size=n)
    members = tuple((corpus.clips[j].id, float(length)) for j, length in zip(picked, lengths))
    return CompositionPlan(corpus.clips[seed_index].id, members, tuple(relative_boundaries(lengths)))


def render_template(plan: CompositionPlan, corpus: ClipCorpus) -> TemplatedCaption:
    entries = []
    for j, (cid, _) in enumerate(plan.members):
        if cid not in corpus.index:
            raise KeyError(f"unknown clip id {cid!r}")
        entries.append((plan.boundaries[j], plan.boundaries[j + 1], corpus.get(cid).caption))
    return TemplatedCaption(tuple(entries))


def compose_corpus(
    corpus: ClipCorpus,
    count: int,
    seed: int,
    temperature: float = 1.0,
    force_include_seed: bool = False,
    block: int = 512,
) -> list[CompositionPlan]:
    """``count`` plans from one ``make_rng(seed)`` stream.

    Seeds cycle through the clips in corpus order.  Similarities are computed
    ``block`` seeds at a time with one matrix product.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    if len(corpus) < MIN_MEMBERS:
        raise SamplingError(f"corpus has {len(corpus)} clips; composition needs at least {MIN_MEMBERS}")
    _check_temperature(temperature)
    rng = make_rng(seed)
    unit = corpus.unit_embeddings
    seeds = [i % len(corpus) for i in range(count)]
    plans = []
    for lo in range(0, count, block):
        chunk = seeds[lo:lo + block]
        sims = unit @ unit[chunk].T
        for col, k in enumerate(chunk):
            weights = _softmax_similarities(sims[:, col].copy(), k, temperature)
            plans.append(_compose(corpus, k, weights, rng, force_include_seed))
    return plans
