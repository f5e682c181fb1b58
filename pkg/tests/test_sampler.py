import itertools
import math

import numpy as np
import pytest
from scipy import stats

from tempocap.core import make_corpus
from tempocap.sampler import (
    compose_corpus,
    CompositionPlan,
    SamplingError,
    TemplatedCaption,
    draw_without_replacement,
    make_rng,
    relative_boundaries,
    render_template,
    sample_composition,
    similarity_weights,
)

from conftest import random_corpus


def _corpus(embs, captions=None):
    captions = captions or [f"cap {i}" for i in range(len(embs))]
    return make_corpus({"id": chr(65 + i), "caption": c, "duration_s": 10.0, "embedding": e}
                       for i, (e, c) in enumerate(zip(embs, captions)))


def test_weights_identical_embeddings_uniform():
    w = similarity_weights(_corpus([[1.0, 2.0]] * 4), 0)
    np.testing.assert_allclose(w, [0.25] * 4, atol=1e-15)


def test_weights_hand_softmax():
    # cosines to seed: [1, 0, 0]
    w = similarity_weights(_corpus([[1, 0, 0], [0, 1, 0], [0, 0, 1]]), 0)
    e = math.e
    np.testing.assert_allclose(w, [e / (e + 2), 1 / (e + 2), 1 / (e + 2)], atol=1e-12)
    np.testing.assert_allclose(w, [0.5761, 0.2119, 0.2119], atol=1e-4)


def test_weights_high_temperature_uniform(corpus10):
    w = similarity_weights(corpus10, 3, temperature=1e6)
    np.testing.assert_allclose(w, np.full(10, 0.1), atol=1e-6)


def test_weights_seed_is_max_and_normalized(corpus10):
    for k in range(10):
        w = similarity_weights(corpus10, k)
        assert w.argmax() == k
        assert abs(w.sum() - 1) <= 1e-9 and np.all(w >= 0)


def test_weights_errors(corpus10):
    with pytest.raises(IndexError):
        similarity_weights(corpus10, 10)
    with pytest.raises(ValueError):
        similarity_weights(corpus10, 0, temperature=0)


@pytest.mark.parametrize("lengths, expected", [
    ([6, 8, 6], [0, 0.3, 0.7, 1.0]),
    ([10], [0, 1.0]),
    ([7, 7, 7, 7], [0, 0.25, 0.5, 0.75, 1.0]),
])
def test_relative_boundaries(lengths, expected):
    b = relative_boundaries(lengths)
    np.testing.assert_allclose(b, expected, atol=1e-15)
    assert b[0] == 0.0 and b[-1] == 1.0


@pytest.mark.parametrize("bad", [[], [1, 0], [2, -1]])
def test_relative_boundaries_errors(bad):
    with pytest.raises(ValueError):
        relative_boundaries(bad)


def test_compose_clamps_to_three():
    c = random_corpus(3)
    for seed in range(20):
        plan = sample_composition(c, 0, make_rng(seed))
        assert len(plan.members) == 3
        assert len({m for m, _ in plan.members}) == 3


def test_compose_rejects_tiny_corpus():
    with pytest.raises(SamplingError):
        sample_composition(random_corpus(2), 0, make_rng(0))


def test_compose_ranges(corpus10):
    rng = make_rng(123)
    for i in range(500):
        plan = sample_composition(corpus10, i % 10, rng)
        assert 3 <= len(plan.members) <= 5
        assert all(6.0 <= l <= 10.0 for l in plan.lengths)
        assert len(plan.boundaries) == len(plan.members) + 1
        assert plan.boundaries[0] == 0.0 and plan.boundaries[-1] == 1.0
        assert all(a < b for a, b in zip(plan.boundaries, plan.boundaries[1:]))
        assert len({m for m, _ in plan.members}) == len(plan.members)


def test_compose_deterministic(corpus10):
    a = [sample_composition(corpus10, 4, make_rng(99)) for _ in range(3)]
    assert a[0] == a[1] == a[2]
    assert sample_composition(corpus10, 4, make_rng(100)) != a[0]


def test_force_include_seed(corpus10):
    rng = make_rng(5)
    for _ in range(100):
        plan = sample_composition(corpus10, 2, rng, force_include_seed=True)
        assert plan.members[0][0] == corpus10[2].id
        assert len({m for m, _ in plan.members}) == len(plan.members)


def test_pcg64_stream_is_pinned():
    # guards the documented generator choice; a change here breaks reproducibility
    rng = make_rng(42)
    assert rng.random() == 0.7739560485559633
    assert int(rng.integers(0, 2**32)) == 2811363265


def _inclusion_oracle(weights, n):
    """Exact inclusion probabilities of sequential without-replacement draws, by enumeration."""
    incl = np.zeros(len(weights))
    for seq in itertools.permutations(range(len(weights)), n):
        p, left = 1.0, 1.0
        for j in seq:
            p *= weights[j] / left
            left -= weights[j]
        for j in seq:
            incl[j] += p
    return incl


def test_without_replacement_matches_enumeration():
    w = np.array([0.4, 0.3, 0.2, 0.1])
    expected = _inclusion_oracle(w, 2)
    assert expected.sum() == pytest.approx(2.0)
    rng = make_rng(17)
    draws = 40_000
    counts = np.zeros(4)
    for _ in range(draws):
        for j in draw_without_replacement(w, 2, rng):
            counts[j] += 1
    _, p = stats.chisquare(counts, expected * draws)
    assert p > 0.01


def test_draw_skips_zero_weights():
    rng = make_rng(3)
    for _ in range(200):
        picked = draw_without_replacement(np.array([0.0, 1.0, 0.0, 2.0]), 2, rng)
        assert sorted(picked) == [1, 3]
    with pytest.raises(SamplingError):
        draw_without_replacement(np.array([0.0, 1.0]), 2, rng)


def test_render_template_examples():
    c = _corpus([[1, 0], [0, 1], [1, 1]], ["a", "b", "c"])
    plan = CompositionPlan("A", (("A", 6.0), ("B", 8.0), ("C", 6.0)), tuple(relative_boundaries([6, 8, 6])))
    t = render_template(plan, c)
    assert [e[2] for e in t.entries] == ["a", "b", "c"]
    np.testing.assert_allclose([e[:2] for e in t.entries], [(0, 0.3), (0.3, 0.7), (0.7, 1.0)], atol=1e-15)

    single = CompositionPlan("A", (("A", 7.0),), (0.0, 1.0))
    assert render_template(single, c).entries == ((0.0, 1.0, "a"),)

    missing = CompositionPlan("A", (("A", 6.0), ("Z", 6.0)), (0.0, 0.5, 1.0))
    with pytest.raises(KeyError, match="Z"):
        render_template(missing, c)


def test_templated_caption_invariants():
    with pytest.raises(ValueError):
        TemplatedCaption(((0.0, 0.5, "a"), (0.6, 1.0, "b")))
    with pytest.raises(ValueError):
        TemplatedCaption(((0.5, 1.0, "b"), (0.0, 0.5, "a")))
    with pytest.raises(ValueError):
        TemplatedCaption(())


def test_sample_then_render_contiguous(corpus10):
    rng = make_rng(8)
    for i in range(300):
        t = render_template(sample_composition(corpus10, i % 10, rng), corpus10)
        assert t.entries[0][0] == 0.0 and t.entries[-1][1] == 1.0
        assert all(a[1] == b[0] for a, b in zip(t.entries, t.entries[1:]))


def test_plan_record_round_trip(corpus10):
    plan = sample_composition(corpus10, 1, make_rng(1))
    assert CompositionPlan.from_record(plan.to_record()) == plan


def test_batched_compose_matches_single_calls():
    c = random_corpus(40, dim=32, seed=6)
    rng = make_rng(77)
    single = [sample_composition(c, i % 40, rng) for i in range(120)]
    assert compose_corpus(c, 120, 77, block=16) == single
