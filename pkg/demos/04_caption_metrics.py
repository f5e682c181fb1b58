"""
Caption quality metrics
=======================

BLEU, ROUGE-L, METEOR (exact + stem matching), BERTScore over supplied token
embeddings, and the CLAP-style audio-text cosine.
"""

# %%
import numpy as np

from tempocap import bert_score, bleu, clap_score, meteor_lite, rouge_l, tokenize
from tempocap.metrics import corpus_bleu

ref = tokenize("A slow piano ballad with soft strings and a gentle female vocal.")
hyp = tokenize("A gentle piano ballad with soft strings and a female vocal singing.")
print("BLEU-4 ", round(bleu(hyp, [ref]), 4))
print("BLEU-1 ", round(bleu(hyp, [ref], max_n=1), 4))
print("ROUGE-L", round(rouge_l(hyp, ref), 4))
print("METEOR ", round(meteor_lite(hyp, ref), 4))

# %%
# Corpus BLEU pools n-gram counts over all captions before combining.
print(corpus_bleu([hyp, tokenize("drums and bass")], [[ref], [tokenize("drums and bass guitar")]]))

# %%
# BERTScore takes contextual token embeddings from outside; random ones here.
rng = np.random.default_rng(0)
ref_emb = rng.normal(size=(len(ref), 64))
hyp_emb = ref_emb[: len(hyp) - 2] + 0.1 * rng.normal(size=(len(hyp) - 2, 64))
print("BERTScore P/R/F", np.round(bert_score(hyp_emb, ref_emb), 3))

# %%
audio, text = rng.normal(size=512), rng.normal(size=512)
print("CLAP score", round(clap_score(audio, text), 4), round(clap_score(audio, audio + 0.2 * text), 4))
