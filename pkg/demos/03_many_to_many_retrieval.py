"""
Many-to-many text-to-audio retrieval
====================================

A song's caption is several time-bounded text segments; the audio is split
into 10-second windows.  Every (text segment, audio window) pair contributes
its cosine similarity weighted by the IoU of the two time spans.
"""

# %%
import numpy as np

from tempocap import SegmentDoc, TimeInterval, pair_score, rank_items, score_matrix, uniform_windows
from tempocap.metrics import median_rank, recall_at_k

rng = np.random.default_rng(1)
dim = 32


def song(song_id, duration_s, n_sections):
    """Audio windows and caption segments sharing one latent per section."""
    windows = uniform_windows(duration_s)
    cuts = np.linspace(0, 1, n_sections + 1)
    latents = rng.normal(size=(n_sections, dim))
    def section(x):
        return min(int(np.searchsorted(cuts, x, side="right")) - 1, n_sections - 1)
    audio = SegmentDoc(song_id, tuple(
        (w, latents[section((w.start + w.end) / 2)] + 2.5 * rng.normal(size=dim)) for w in windows))
    text = SegmentDoc(song_id, tuple(
        (TimeInterval(a, b), latents[k] + 2.5 * rng.normal(size=dim))
        for k, (a, b) in enumerate(zip(cuts, cuts[1:]))))
    return text, audio


songs = [song(f"song{i:02d}", float(rng.uniform(120, 300)), int(rng.integers(3, 6))) for i in range(20)]
texts = [t for t, _ in songs]
audios = [a for _, a in songs]
print(len(audios[0].parts), "audio windows,", len(texts[0].parts), "caption segments for song00")

# %%
print("matching pair:", round(pair_score(texts[0], audios[0]), 3))
print("other song:   ", round(pair_score(texts[0], audios[1]), 3))

# %%
m = score_matrix(texts, audios)
ranked = [rank_items(m, q) for q in m.queries]
truth = {d.id: d.id for d in texts}
for k in (1, 5, 10):
    print(f"R@{k} = {recall_at_k(ranked, truth, k):.2f}")
print("MedR =", median_rank(ranked, truth))
