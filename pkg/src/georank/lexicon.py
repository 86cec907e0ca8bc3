"""Word lists and sentence splitting shared by the parser, masker and weighting."""
from __future__ import annotations

import re

SPATIAL_CUES = frozenset(
    ["near", "along", "within", "in", "around", "close", "walk", "block", "radius", "exit", "route"]
)
_CUE_SUFFIXES = ("", "s", "es", "ing", "ed", "er", "r", "est", "st", "by")

ROUTE_PATTERN = re.compile(r"\b(?:route|routes|path|paths|between|along)\b|\bfrom\b.+?\bto\b", re.I | re.S)

# Target-type keywords for the restaurant / hotel / attraction classifier.
RESTAURANT_TERMS = frozenset(
    """restaurant restaurants food foods eat eating dining dine meal meals cuisine
    chinese thai mexican italian sushi japanese indian french korean vietnamese
    pizza burger burgers steak seafood vegan vegetarian ramen tapas diner bistro
    breakfast lunch dinner brunch menu dishes dish chef reservation reservations
    cafe café coffee bakery""".split()
)
HOTEL_TERMS = frozenset(
    "hotel hotels motel stay accommodation accommodations room rooms book booking hostel".split()
)
ATTRACTION_TERMS = frozenset(
    """visit see tour tours explore museum museums park parks gallery galleries theater
    theatre sightseeing show shows performance attraction attractions landmark""".split()
)

STOPWORDS = frozenset(
    """a an the and or but if of for to from at by on with without into onto over under
    is are was were be been being am do does did have has had i we you he she it they me us
    my our your his her its their them this that these those there here what which who whom
    whose when where why how so too very just also any some all each every no not only
    can could would should will shall may might must let lets please thanks thank as than
    then up down out off about again one""".split()
)

_WORD = re.compile(r"[^\W_]+", re.UNICODE)
_SENTENCE_BREAK = re.compile(r"(?<=[.!?;])\s+|\n+")


def words(text: str) -> list[str]:
    """Lowercased word unigrams."""
    return _WORD.findall(text.lower())


def split_sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENTENCE_BREAK.split(text or "") if s and s.strip()]


def is_spatial_cue(token: str) -> bool:
    token = token.lower()
    for suffix in _CUE_SUFFIXES:
        if suffix and not token.endswith(suffix):
            continue
        stem = token[: len(token) - len(suffix)] if suffix else token
        if stem in SPATIAL_CUES:
            return True
    return False


def has_spatial_cue(sentence: str) -> bool:
    return any(is_spatial_cue(w) for w in words(sentence))


def split_by_cue(text: str) -> tuple[str, str]:
    """Partition sentences into (spatial, semantic) by the spatial cue lexicon."""
    spatial, semantic = [], []
    for s in split_sentences(text):
        (spatial if has_spatial_cue(s) else semantic).append(s)
    return " ".join(spatial), " ".join(semantic)


def spatial_cue_count(text: str) -> int:
    return sum(1 for w in words(text) if is_spatial_cue(w))


def semantic_cue_count(text: str) -> int:
    """Content words: not a stopword, not a spatial cue, not a bare number."""
    return sum(
        1 for w in words(text) if w not in STOPWORDS and not is_spatial_cue(w) and not w.isdigit()
    )


def has_route_cue(text: str) -> bool:
    return ROUTE_PATTERN.search(text or "") is not None
