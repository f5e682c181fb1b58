"""Temporally structured music-caption tooling.

Synthetic song composition from clip embeddings, a segmented-caption text
format, IoU-weighted many-to-many retrieval and caption/retrieval metrics.
"""
from .captionfmt import (
    ChangeEntry,
    SegmentEntry,
    SegmentedCaption,
    parse_caption,
    render_paraphrase_prompt,
    render_pseudolabel_prompt,
    serialize_caption,
    templated_to_caption,
)
from .core import (
    ClipCorpus,
    ClipRecord,
    EmbeddingVector,
    TimeInterval,
    ValidationReport,
    cosine,
    load_clip_corpus,
    validate_corpus,
    write_clip_corpus,
)
from .metrics import (
    bert_score,
    bleu,
    clap_score,
    corpus_bleu,
    corpus_stats,
    median_rank,
    meteor_lite,
    recall_at_k,
    rouge_l,
    tokenize,
)
from .retrieval import (
    IRRELEVANT,
    RankedList,
    ScoreMatrix,
    SegmentDoc,
    interval_iou,
    pair_score,
    rank_items,
    score_matrix,
    uniform_windows,
)
from .sampler import (
    CompositionPlan,
    TemplatedCaption,
    compose_corpus,
    make_rng,
    relative_boundaries,
    render_template,
    sample_composition,
    similarity_weights,
)

__version__ = "0.1.0"
