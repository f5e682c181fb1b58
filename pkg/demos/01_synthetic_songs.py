"""
Composing synthetic songs from short clips
==========================================

Short captioned clips are stitched into song-length compositions.  Each
composition starts from a seed clip and picks companions with probability
proportional to exp(cosine similarity) of their caption embeddings.

Real embeddings would come from a sentence encoder; here they are random
vectors with a little cluster structure so the weights are visibly uneven.
"""

# %%
import numpy as np

from tempocap import (
    compose_corpus,
    make_rng,
    render_paraphrase_prompt,
    render_template,
    sample_composition,
    serialize_caption,
    similarity_weights,
    templated_to_caption,
)
from tempocap.core import make_corpus

rng = np.random.default_rng(0)
centers = rng.normal(size=(3, 384))
captions = [
    "A mellow acoustic guitar strums over soft brushed drums.",
    "Fingerpicked guitar with a hushed female vocal.",
    "A warm folk tune with harmonica and tambourine.",
    "Aggressive distorted guitars and double-kick drums.",
    "A heavy metal riff with screamed vocals.",
    "Fast thrash drums and shredding lead guitar.",
    "Bright synth arpeggios over a four-on-the-floor beat.",
    "A pulsing EDM drop with sidechained bass.",
    "Airy pads and a chopped vocal sample over house drums.",
]
corpus = make_corpus(
    {"id": f"clip{i}", "caption": c, "duration_s": 10.0,
     "embedding": centers[i // 3] + 0.8 * rng.normal(size=384)}
    for i, c in enumerate(captions)
)

# %%
# Sampling weights around the first clip.  Temperature 1 keeps them close to
# uniform because cosines live in [-1, 1]; a lower temperature sharpens them.
for t in (1.0, 0.1):
    w = similarity_weights(corpus, 0, temperature=t)
    print(f"temperature {t}:", np.round(w, 3))

# %%
# One composition: 3 to 5 members, each 6 to 10 seconds long, with boundaries
# expressed as fractions of the whole song.
plan = sample_composition(corpus, 0, make_rng(42), temperature=0.1)
for cid, length in plan.members:
    print(f"{cid:6s} {length:5.2f}s")
print("boundaries:", [round(b, 3) for b in plan.boundaries])

# %%
# The templated caption, in the segmented-caption text format, and the prompt
# an LLM would receive to turn it into a natural description.
template = render_template(plan, corpus)
print(serialize_caption(templated_to_caption(template)))
print()
print(render_paraphrase_prompt(template))

# %%
# A batch of compositions, one per seed clip in turn.  The same seed always
# gives the same batch.
plans = compose_corpus(corpus, count=9, seed=42, temperature=0.1)
print([len(p.members) for p in plans])
assert plans == compose_corpus(corpus, count=9, seed=42, temperature=0.1)
