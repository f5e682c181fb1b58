"""``tempocap`` command line.

Data goes to ``--out`` files; diagnostics go to stderr.  Exit status is 0 on
success, 1 on a data or domain error, 2 on a usage error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence

from . import captionfmt, core, metrics, retrieval, sampler
from .captionfmt import SegmentedCaption
from .core import TimeInterval

SEED_ENV = "TEMPOCAP_SEED"
DEFAULT_COUNT = 5000

METRIC_ALIASES = {
    "bleu": "bleu",
    "rouge": "rouge_l",
    "rouge_l": "rouge_l",
    "meteor": "meteor_lite",
    "meteor_lite": "meteor_lite",
    "bertscore": "bert_score",
    "bert_score": "bert_score",
}


class UsageError(Exception):
    pass


def _parse_ks(text: str) -> list[int]:
    try:
        ks = sorted({int(k) for k in text.split(",") if k.strip()})
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid K list {text!r}") from None
    if not ks or ks[0] < 1:
        raise argparse.ArgumentTypeError("K values must be positive integers")
    return ks


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0 or v == float("inf"):
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1: {text!r}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def _resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return _seed(env)
    except argparse.ArgumentTypeError as e:
        raise UsageError(f"{SEED_ENV}: {e}") from None


def _write_lines(path: str, lines: Sequence[str]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line + "\n")


def _load_captions(path: str) -> list[tuple[str, SegmentedCaption]]:
    """Caption JSONL: each line is ``{id?, text}`` in caption text format or ``{id?, global, segments, changes}``."""
    out = []
    for lineno, obj in core.iter_jsonl(path):
        if not isinstance(obj, dict):
            raise core.CorpusError("record must be a JSON object", lineno, path)
        cid = str(obj.get("id", len(out)))
        try:
            if "text" in obj:
                cap = captionfmt.parse_caption(obj["text"])
            else:
                cap = SegmentedCaption.from_record(obj)
        except captionfmt.CaptionParseError as e:
            raise core.CorpusError(f"caption {cid!r}: {e}", lineno, path) from None
        except (ValueError, KeyError, TypeError) as e:
            raise core.CorpusError(f"caption {cid!r}: {e}", lineno, path) from None
        out.append((cid, cap))
    if not out:
        raise core.CorpusError("no captions", path=path)
    return out


def _load_truth(path: str) -> dict[str, str]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        obj = None
    if isinstance(obj, dict) and not {"query", "item"} <= obj.keys():
        return {str(k): str(v) for k, v in obj.items()}
    truth = {}
    for _, rec in core.iter_jsonl(path):
        truth[str(rec["query"])] = str(rec["item"])
    return truth


# -- commands ---------------------------------------------------------------

def cmd_validate(args) -> int:
    corpus = core.load_clip_corpus(args.clips)
    report = core.validate_corpus(corpus)
    for cid, msg in report.issues:
        print(f"{args.clips}: {cid}: {msg}", file=sys.stderr)
    if args.out:
        record = {"ok": report.ok, "clips": len(corpus), "dim": corpus.dim,
                  "issues": [{"id": i, "message": m} for i, m in report.issues]}
        _write_lines(args.out, [core.dumps(record)])
    return 0 if report.ok else 1


def run_compose(args) -> int:
    corpus = core.load_clip_corpus(args.clips)
    plans = sampler.compose_corpus(
        corpus, args.count, _resolve_seed(args.seed), args.temperature, args.force_include_seed
    )
    lines = []
    for plan in plans:
        t = sampler.render_template(plan, corpus)
        record = plan.to_record()
        record["template"] = [[s, e, text] for s, e, text in t.entries]
        record["caption"] = captionfmt.serialize_caption(captionfmt.templated_to_caption(t))
        lines.append(core.dumps(record))
    _write_lines(args.out, lines)
    return 0


def cmd_render_prompt(args) -> int:
    lines = []
    for lineno, obj in core.iter_jsonl(args.input):
        try:
            if args.pseudolabel:
                segs = [
                    (TimeInterval(s["start"], s["end"]), s.get("label"))
                    for s in obj.get("segments", [])
                ]
                prompt = captionfmt.render_pseudolabel_prompt(obj["genre"], obj["bpm"], segs)
                key = {"id": obj.get("id", str(lineno))}
            else:
                t = sampler.TemplatedCaption(tuple(tuple(e) for e in obj["template"]))
                prompt = captionfmt.render_paraphrase_prompt(t)
                key = {"seed_id": obj.get("seed_id", str(lineno))}
        except (ValueError, KeyError, TypeError) as e:
            raise core.CorpusError(str(e), lineno, args.input) from None
        lines.append(core.dumps({**key, "prompt": prompt}))
    _write_lines(args.out, lines)
    return 0


def cmd_parse(args) -> int:
    lines = []
    for path in args.inputs:
        text = Path(path).read_text(encoding="utf-8")
        try:
            cap = captionfmt.parse_caption(text)
        except captionfmt.CaptionParseError as e:
            raise core.CorpusError(str(e), path=path) from None
        lines.append(core.dumps({"id": Path(path).stem, **cap.to_record()}))
    _write_lines(args.out, lines)
    return 0


def _retrieval_metrics(rankings, truth, ks, items) -> dict[str, float]:
    known = set(items)
    for q in (r.query_id for r in rankings):
        if q not in truth:
            raise KeyError(f"truth has no item for query {q!r}")
        if truth[q] not in known:
            raise KeyError(f"truth item {truth[q]!r} (query {q!r}) is not among the audio items")
    return metrics.retrieval_report(rankings, truth, ks)


def run_retrieve(args) -> int:
    text_docs = retrieval.load_segment_docs(args.text_docs, args.include_global, args.window_s)
    audio_docs = retrieval.load_segment_docs(args.audio_docs, False, args.window_s)
    m = retrieval.score_matrix(text_docs, audio_docs)
    rankings = retrieval.rank_all(m)
    report: dict = {"rankings": [retrieval.ranking_to_record(r) for r in rankings]}
    if args.matrix:
        report["matrix"] = retrieval.matrix_to_record(m)
    if args.truth:
        report["metrics"] = _retrieval_metrics(rankings, _load_truth(args.truth), args.k, m.items)
    _write_lines(args.out, [core.dumps(report)])
    return 0


def cmd_eval_retrieval(args) -> int:
    with open(args.input, encoding="utf-8") as f:
        obj = json.load(f)
    rankings = [retrieval.ranking_from_record(r) for r in obj["rankings"]]
    items = {i for r in rankings for i, _ in r.entries}
    result = _retrieval_metrics(rankings, _load_truth(args.truth), args.k, items)
    _write_lines(args.out, [core.dumps({"metrics": result})])
    return 0


def _caption_text(cap: SegmentedCaption, mode: str) -> str:
    if mode == "global":
        return cap.global_text
    return " ".join(cap.texts)


def _load_token_embeddings(path: str) -> dict[str, list]:
    out = {}
    for lineno, obj in core.iter_jsonl(path):
        try:
            out[str(obj["id"])] = obj["embeddings"]
        except (KeyError, TypeError):
            raise core.CorpusError("token-embedding record needs 'id' and 'embeddings'", lineno, path) from None
    return out


def run_eval_captions(args) -> int:
    names = []
    for raw in args.metrics.split(","):
        raw = raw.strip().lower()
        if raw not in METRIC_ALIASES:
            raise UsageError(f"unknown metric {raw!r}; choose from {', '.join(sorted(METRIC_ALIASES))}")
        if METRIC_ALIASES[raw] not in names:
            names.append(METRIC_ALIASES[raw])
    if "bert_score" in names and not (args.hyp_emb and args.ref_emb):
        raise UsageError("bertscore needs --hyp-emb and --ref-emb token-embedding files")

    hyps = dict(_load_captions(args.hyp))
    refs = dict(_load_captions(args.ref))
    missing = sorted(set(hyps) - set(refs))
    if missing:
        raise KeyError(f"no reference caption for id {missing[0]!r}")
    ids = sorted(hyps)
    hyp_tok = {i: metrics.tokenize(_caption_text(hyps[i], args.mode)) for i in ids}
    ref_tok = {i: metrics.tokenize(_caption_text(refs[i], args.mode)) for i in ids}

    reports = []
    for name in names:
        if name == "bleu":
            per = {i: metrics.bleu(hyp_tok[i], [ref_tok[i]]) for i in ids}
            reports.append(metrics.mean_report("bleu", per))
            corpus = metrics.corpus_bleu([hyp_tok[i] for i in ids], [[ref_tok[i]] for i in ids])
            reports.append(metrics.MetricReport("bleu_corpus", metrics.VARIANTS["bleu_corpus"], corpus, tuple(per.items())))
        elif name == "rouge_l":
            reports.append(metrics.mean_report(name, {i: metrics.rouge_l(hyp_tok[i], ref_tok[i]) for i in ids}))
        elif name == "meteor_lite":
            reports.append(metrics.mean_report(name, {i: metrics.meteor_lite(hyp_tok[i], ref_tok[i]) for i in ids}))
        elif name == "bert_score":
            he, re_ = _load_token_embeddings(args.hyp_emb), _load_token_embeddings(args.ref_emb)
            per = {}
            for i in ids:
                if i not in he or i not in re_:
                    raise KeyError(f"no token embeddings for caption {i!r}")
                per[i] = metrics.bert_score(he[i], re_[i])[2]
            reports.append(metrics.mean_report(name, per))
    lines = []
    for r in reports:
        rec = r.to_record()
        rec["mode"] = args.mode
        lines.append(core.dumps(rec))
    _write_lines(args.out, lines)
    return 0


def cmd_stats(args) -> int:
    caps = [c for _, c in _load_captions(args.input)]
    s = metrics.corpus_stats(caps)
    _write_lines(args.out, [core.dumps(s.__dict__)])
    return 0


# -- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tempocap", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check a clip corpus")
    s.add_argument("--clips", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("compose", help="sample synthetic songs from a clip corpus")
    s.add_argument("--clips", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=_seed)
    s.add_argument("--count", type=_positive_int, default=DEFAULT_COUNT)
    s.add_argument("--temperature", type=_positive_float, default=1.0)
    s.add_argument("--force-include-seed", action="store_true")
    s.set_defaults(func=run_compose)

    s = sub.add_parser("render-prompt", help="render LLM prompts from compose output or pseudo-label specs")
    s.add_argument("input")
    s.add_argument("--out", required=True)
    s.add_argument("--pseudolabel", action="store_true",
                   help="input lines are {genre, bpm, segments: [{start, end, label}]}")
    s.set_defaults(func=cmd_render_prompt)

    s = sub.add_parser("parse", help="parse caption text files into JSONL")
    s.add_argument("inputs", nargs="+")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_parse)

    s = sub.add_parser("retrieve", help="IoU-weighted text-to-audio ranking")
    s.add_argument("--text-docs", required=True)
    s.add_argument("--audio-docs", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--truth")
    s.add_argument("--k", type=_parse_ks, default=list(metrics.DEFAULT_KS))
    s.add_argument("--window-s", type=_positive_float, default=retrieval.DEFAULT_WINDOW_S)
    s.add_argument("--include-global", action="store_true",
                   help="add a text doc's global_embedding as a full-span part")
    s.add_argument("--matrix", action="store_true", help="also write the full score matrix")
    s.set_defaults(func=run_retrieve)

    s = sub.add_parser("eval-captions", help="BLEU / ROUGE-L / METEOR / BERTScore")
    s.add_argument("--hyp", required=True)
    s.add_argument("--ref", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--metrics", default="bleu,rouge,meteor")
    s.add_argument("--mode", choices=("global", "complete"), default="complete")
    s.add_argument("--hyp-emb")
    s.add_argument("--ref-emb")
    s.set_defaults(func=run_eval_captions)

    s = sub.add_parser("eval-retrieval", help="Recall@K and MedR from a retrieve report")
    s.add_argument("input")
    s.add_argument("--truth", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--k", type=_parse_ks, default=list(metrics.DEFAULT_KS))
    s.set_defaults(func=cmd_eval_retrieval)

    s = sub.add_parser("stats", help="caption corpus statistics")
    s.add_argument("input")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_stats)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"tempocap {args.command}: usage error: {e}", file=sys.stderr)
        return 2
    except KeyError as e:
        print(f"tempocap {args.command}: error: {e.args[0] if e.args else e}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as e:
        print(f"tempocap {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
