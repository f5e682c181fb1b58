"""Line-oriented text format for time-segmented captions, plus prompt rendering.

Format::

    <global caption, any number of lines>
    [S%-E%] [tag:] segment description
    ...
    -> i: description of the change after segment i (1-based)

Everything before the first ``[`` line is the global caption.  Boundaries
accept up to four fractional digits and are written back with one.  An
untagged description that would otherwise read as ``tag: text`` (or that
starts with a backslash) is written with a leading backslash, which the
parser strips.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Sequence

from .core import TimeInterval
from .sampler import TemplatedCaption

CONVENTIONAL_TAGS = ("intro", "verse", "chorus", "bridge", "outro", "instrumental")

_NUM = r"(\d{1,3}(?:\.\d{1,4})?)"
_MARKER_RE = re.compile(r"\[\s*" + _NUM + r"\s*%\s*-\s*" + _NUM + r"\s*%\s*\]")
_TAG_RE = re.compile(r"([A-Za-z][A-Za-z0-9_-]*):[ \t]+(\S.*)")
_TAG_NAME_RE = re.compile(r"[A-Za-z][A-Za-z0-9_-]*")
_CHANGE_RE = re.compile(r"->\s*(\d+)\s*:\s*(.*)")


class CaptionError(ValueError):
    pass


class CaptionParseError(CaptionError):
    def __init__(self, message: str, line: int, column: int = 1):
        self.line = line
        self.column = column
        self.message = message
        super().__init__(f"line {line}, column {column}: {message}")


def _check_line_text(text: str, what: str) -> None:
    if not isinstance(text, str) or not text:
        raise CaptionError(f"{what} must be non-empty")
    if "\n" in text or "\r" in text:
        raise CaptionError(f"{what} must be a single line")
    if text != text.strip():
        raise CaptionError(f"{what} must not have surrounding whitespace")


@dataclass(frozen=True)
class SegmentEntry:
    interval: TimeInterval
    text: str
    function_tag: str | None = None

    def __post_init__(self):
        _check_line_text(self.text, "segment text")
        if self.function_tag is not None and not _TAG_NAME_RE.fullmatch(self.function_tag):
            raise CaptionError(f"invalid function tag {self.function_tag!r}")


@dataclass(frozen=True)
class ChangeEntry:
    after_segment: int
    text: str

    def __post_init__(self):
        if not isinstance(self.after_segment, int) or self.after_segment < 0:
            raise CaptionError("after_segment must be a non-negative integer")
        _check_line_text(self.text, "change text")


@dataclass(frozen=True)
class SegmentedCaption:
    """Global caption, ordered non-overlapping segments and musical changes.

    ``changes[i].after_segment`` is 0-based: 0 is the transition between the
    first and second segment.
    """

    global_text: str
    segments: tuple[SegmentEntry, ...]
    changes: tuple[ChangeEntry, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "changes", tuple(self.changes))
        if not self.segments:
            raise CaptionError("a caption needs at least one segment")
        for prev, cur in zip(self.segments, self.segments[1:]):
            if cur.interval.start < prev.interval.end:
                raise CaptionError("segments overlap or are out of order")
        for ch in self.changes:
            if ch.after_segment >= len(self.segments) - 1:
                raise CaptionError(
                    f"change after segment {ch.after_segment + 1} but only {len(self.segments)} segments"
                )
        if self.global_text:
            for line in self.global_text.split("\n"):
                if not line or line != line.strip():
                    raise CaptionError("global caption lines must be non-blank and stripped")
                if line.startswith("[") or line.startswith("->"):
                    raise CaptionError("global caption lines cannot start with '[' or '->'")

    @property
    def texts(self) -> list[str]:
        """Global, segment and change texts in document order (global omitted when empty)."""
        out = [self.global_text] if self.global_text else []
        out += [s.text for s in self.segments]
        out += [c.text for c in self.changes]
        return out

    def to_record(self) -> dict:
        return {
            "global": self.global_text,
            "segments": [
                {"start": s.interval.start, "end": s.interval.end, "tag": s.function_tag, "text": s.text}
                for s in self.segments
            ],
            "changes": [{"after": c.after_segment, "text": c.text} for c in self.changes],
        }

    @classmethod
    def from_record(cls, obj: dict) -> "SegmentedCaption":
        return cls(
            obj.get("global", ""),
            tuple(
                SegmentEntry(TimeInterval(s["start"], s["end"]), s["text"], s.get("tag"))
                for s in obj["segments"]
            ),
            tuple(ChangeEntry(int(c["after"]), c["text"]) for c in obj.get("changes", [])),
        )


def format_percent(fraction: float) -> str:
    """``0.3`` -> ``"30.0%"``, rounded half-even at one decimal."""
    pct = (Decimal(repr(float(fraction))) * 100).quantize(Decimal("0.1"), rounding=ROUND_HALF_EVEN)
    return f"{pct}%"


def format_interval(interval: TimeInterval) -> str:
    return f"[{format_percent(interval.start)}-{format_percent(interval.end)}]"


def _percent_to_fraction(s: str) -> float:
    return float(Decimal(s) / Decimal(100))


def _segment_body(seg: SegmentEntry) -> str:
    if seg.function_tag is not None:
        return f"{seg.function_tag}: {seg.text}"
    if _TAG_RE.fullmatch(seg.text) or seg.text.startswith("\\"):
        return "\\" + seg.text
    return seg.text


def serialize_caption(cap: SegmentedCaption) -> str:
    lines = [cap.global_text] if cap.global_text else []
    for seg in cap.segments:
        lines.append(f"{format_interval(seg.interval)} {_segment_body(seg)}")
    for ch in cap.changes:
        lines.append(f"-> {ch.after_segment + 1}: {ch.text}")
    return "\n".join(lines)


def _parse_segment(line: str, lineno: int) -> SegmentEntry:
    m = _MARKER_RE.match(line)
    if m is None:
        raise CaptionParseError("malformed boundary marker", lineno, 1)
    start, end = _percent_to_fraction(m.group(1)), _percent_to_fraction(m.group(2))
    if end > 1.0:
        raise CaptionParseError("boundary above 100%", lineno, m.start(2) + 1)
    if end <= start:
        raise CaptionParseError("segment end must be greater than start", lineno, m.start(2) + 1)
    body = line[m.end():].strip()
    col = m.end() + 1
    if not body:
        raise CaptionParseError("empty segment text", lineno, col)
    if body.startswith("\\"):
        text, tag = body[1:].strip(), None
    else:
        tm = _TAG_RE.fullmatch(body)
        text, tag = (tm.group(2).strip(), tm.group(1)) if tm else (body, None)
    if not text:
        raise CaptionParseError("empty segment text", lineno, col)
    return SegmentEntry(TimeInterval(start, end), text, tag)


def parse_caption(text: str) -> SegmentedCaption:
    """Parse the caption text format; errors carry 1-based line and column."""
    if not text or not text.strip():
        raise CaptionParseError("empty input", 1, 1)
    global_lines: list[str] = []
    segments: list[SegmentEntry] = []
    changes: list[tuple[int, int, str]] = []
    for lineno, raw in enumerate(text.split("\n"), 1):
        line = raw.strip()
        if not line:
            continue
        indent = len(raw) - len(raw.lstrip())
        if line.startswith("["):
            if changes:
                raise CaptionParseError("segment line after change lines", lineno, indent + 1)
            try:
                seg = _parse_segment(line, lineno)
            except CaptionParseError as e:
                raise CaptionParseError(e.message, lineno, e.column + indent) from None
            if segments and seg.interval.start < segments[-1].interval.end:
                raise CaptionParseError(
                    "segment overlaps or precedes the previous segment", lineno, indent + 1
                )
            segments.append(seg)
        elif line.startswith("->"):
            if not segments:
                raise CaptionParseError("change line before any segment", lineno, indent + 1)
            m = _CHANGE_RE.fullmatch(line)
            if m is None:
                raise CaptionParseError("malformed change line, expected '-> i: text'", lineno, indent + 1)
            body = m.group(2).strip()
            if not body:
                raise CaptionParseError("empty change text", lineno, indent + m.start(2) + 1)
            changes.append((lineno, int(m.group(1)), body))
        elif segments:
            raise CaptionParseError("expected a segment or change line", lineno, indent + 1)
        else:
            global_lines.append(line)
    if not segments:
        raise CaptionParseError("no segment lines", lineno, 1)
    parsed_changes = []
    for lineno, idx, body in changes:
        if not 1 <= idx < len(segments):
            raise CaptionParseError(
                f"change index {idx} out of range for {len(segments)} segments", lineno, 1
            )
        parsed_changes.append(ChangeEntry(idx - 1, body))
    return SegmentedCaption("\n".join(global_lines), tuple(segments), tuple(parsed_changes))


def templated_to_caption(t: TemplatedCaption) -> SegmentedCaption:
    """One untagged segment per template entry; internal whitespace runs collapse to one space."""
    segs = tuple(SegmentEntry(TimeInterval(s, e), " ".join(text.split())) for s, e, text in t.entries)
    return SegmentedCaption("", segs, ())


# -- prompts ----------------------------------------------------------------

CONTEXT_PREFIX = "Music Analysis"
CONTEXT_NOTE = (
    "This is a music analysis of a song. Note that the numbers indicate the "
    "time-boundaries of functional segments in this song."
)
PARAPHRASE_INSTRUCTION = (
    "Paraphrase the music analysis to make it sound like a coherent song, instead of a remix. "
    "Additionally, remove any mention of sound quality."
)
GLOBAL_CAPTION_INSTRUCTION = "Start with a general description of the song focusing on subjectivity."
MUSICAL_CHANGE_INSTRUCTION = "Describe the song in detail and explain transitions between parts of the song."
MUSIC_STRUCTURE_INSTRUCTION = (
    "Remember to indicate the temporal annotations and music structures when talking about "
    "a specific part of the song."
)

PSEUDOLABEL_TEMPLATE = (
    "This is a {genre} music of {bpm} beat-per-minute (BPM). "
    "Describe the music in general, in terms of mood, theme, tempo, melody, instruments, and chord progression. "
    "Then provide a detailed music analysis by describing each functional segment and its time boundary. "
    "Please note that the music boundaries are {segments}."
)


def render_template_entries(t: TemplatedCaption) -> str:
    return "\n".join(f"[{format_percent(s)}-{format_percent(e)}] {text}" for s, e, text in t.entries)


def render_paraphrase_prompt(t: TemplatedCaption) -> str:
    """Context block with the templated caption, then the four instructions."""
    blocks = [
        f"{CONTEXT_PREFIX}\n{render_template_entries(t)}\n{CONTEXT_NOTE}",
        PARAPHRASE_INSTRUCTION,
        GLOBAL_CAPTION_INSTRUCTION,
        MUSICAL_CHANGE_INSTRUCTION,
        MUSIC_STRUCTURE_INSTRUCTION,
    ]
    return "\n\n".join(blocks)


def _format_bpm(bpm: float) -> str:
    return format(float(bpm), "g") if float(bpm) != int(bpm) else str(int(bpm))


def render_pseudolabel_prompt(
    genre: str, bpm: float, segments: Sequence[tuple[TimeInterval, str | None]]
) -> str:
    if not isinstance(genre, str) or not genre.strip():
        raise ValueError("genre must be non-empty")
    if isinstance(bpm, bool) or not isinstance(bpm, (int, float)) or not (0 < bpm < float("inf")):
        raise ValueError(f"bpm must be a positive number, got {bpm!r}")
    ordered = sorted(segments, key=lambda s: (s[0].start, s[0].end))
    for (a, _), (b, _) in zip(ordered, ordered[1:]):
        if b.start < a.end:
            raise ValueError(f"segments {format_interval(a)} and {format_interval(b)} overlap")
    parts = []
    for interval, label in segments:
        parts.append(f"{format_interval(interval)} {label}" if label else format_interval(interval))
    return PSEUDOLABEL_TEMPLATE.format(genre=genre.strip(), bpm=_format_bpm(bpm), segments=", ".join(parts))
