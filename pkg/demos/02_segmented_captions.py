"""
Segmented captions: parsing, rewriting and statistics
=====================================================

A caption is a global description, time-bounded segment lines and optional
notes on how the music changes between segments.
"""

# %%
from tempocap import TimeInterval, corpus_stats, parse_caption, render_pseudolabel_prompt, serialize_caption

text = """An energetic pop-rock track driven by crunchy guitars and a confident lead vocal.
[0%-12.5%] intro: muted guitar chugs and a filtered drum loop
[12.5%-45%] verse: vocals enter over bass and tight hi-hats
[45%-80%] chorus: full band, stacked harmonies, open cymbals
[80%-100%] outro: the band drops out leaving a ringing guitar chord
-> 1: the drum loop opens up into a live kit
-> 2: a snare fill launches the chorus
"""
cap = parse_caption(text)
print(cap.global_text)
for seg in cap.segments:
    print(seg.function_tag, seg.interval, seg.text)
for ch in cap.changes:
    print("after segment", ch.after_segment, "->", ch.text)

# %%
# Canonical output always uses one decimal for percentages.
print(serialize_caption(cap))

# %%
# Errors carry line and column.
try:
    parse_caption("[0%-50%] verse\n[40%-100%] chorus")
except ValueError as e:
    print(e)

# %%
# Prompt for describing a song whose genre, tempo and structure are known.
print(render_pseudolabel_prompt(
    "pop rock", 128, [(s.interval, s.function_tag) for s in cap.segments]))

# %%
# Corpus statistics: tokens per caption, vocabulary, segments and changes.
print(corpus_stats([cap, parse_caption("Quiet piano.\n[0%-100%] one long slow phrase")]))
