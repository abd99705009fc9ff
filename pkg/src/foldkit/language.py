"""Instruction parsing: folding language -> ordered fold-stage sequence.

Matching is lexical and deterministic: text is normalized (lowercase,
punctuation stripped, synonyms collapsed), segmented on ordering cues and
conjunctions, and each segment is matched to the lexicon pattern with the
largest keyword overlap. Output order follows textual order. A text that
only names the garment maps to the category's default stage sequence.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources

from .errors import CategoryMismatchError, UnknownInstructionError
from .garments import ALL_STAGES, CATEGORIES, CATEGORY_STAGES

JACCARD_THRESHOLD = 0.34  # single-keyword matches with one synonym pass

# token-level synonym normalization
SYNONYMS = {
    "arm": "sleeve",
    "arms": "sleeve",
    "sleeves": "sleeve",
    "hem": "bottom",
    "lower": "bottom",
    "legs": "leg",
    "upward": "up",
    "upwards": "up",
    "trousers": "pants",
    "jeans": "pants",
    "tee": "tshirt",
    "lefthand": "left",
    "righthand": "right",
}

STOPWORDS = {"the", "a", "an", "of", "to", "on", "onto", "in", "it", "its",
             "please", "now", "my", "your", "this", "that"}

ORDER_CUES = ("after that", "and then", "first", "then", "next", "finally",
              "lastly", "and")

# garment nouns -> categories they may refer to
GARMENT_NOUNS = {
    "vest": ("no_sleeve",),
    "tank": ("no_sleeve",),
    "tshirt": ("short_sleeve", "long_sleeve"),
    "shirt": ("short_sleeve", "long_sleeve"),
    "top": ("no_sleeve", "short_sleeve", "long_sleeve"),
    "sweater": ("long_sleeve",),
    "pants": ("pants",),
    "garment": CATEGORIES,
    "clothes": CATEGORIES,
    "clothing": CATEGORIES,
    "cloth": CATEGORIES,
}

GENERIC_TOKENS = {"fold", "up", "half", "over"}


@dataclass
class Instruction:
    raw: str
    parsed: list[str]
    category: str | None = None


@dataclass
class ParaphraseMatch:
    phrase: str
    stage_id: str
    score: float

    @property
    def accepted(self) -> bool:
        return self.score >= JACCARD_THRESHOLD


class Lexicon:
    """Ordered pattern -> stage-id table. Patterns are lowercase and
    punctuation-free; a pattern may not map to two stage ids."""

    def __init__(self, entries: list[tuple[str, str]]):
        seen: dict[str, str] = {}
        for pattern, stage in entries:
            if stage not in ALL_STAGES:
                raise ValueError(f"lexicon: unknown stage id {stage!r}")
            if pattern in seen and seen[pattern] != stage:
                raise ValueError(f"lexicon: pattern {pattern!r} maps to two stages")
            seen[pattern] = stage
        self.entries = entries
        self._tokens = [(frozenset(normalize_tokens(p)), s) for p, s in entries]

    @classmethod
    def load(cls, path) -> "Lexicon":
        entries = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                pattern, stage = line.split("\t")
                entries.append((pattern.strip(), stage.strip()))
        return cls(entries)

    @classmethod
    def default(cls) -> "Lexicon":
        ref = resources.files("foldkit").joinpath("data/lexicon.tsv")
        with resources.as_file(ref) as path:
            return cls.load(path)

    def canonical_for(self, stage_id: str) -> str:
        for pattern, stage in self.entries:
            if stage == stage_id:
                return pattern
        raise KeyError(stage_id)

    def descriptions(self, stage_id: str) -> list[str]:
        return [p for p, s in self.entries if s == stage_id]


_DEFAULT_LEXICON: Lexicon | None = None


def default_lexicon() -> Lexicon:
    global _DEFAULT_LEXICON
    if _DEFAULT_LEXICON is None:
        _DEFAULT_LEXICON = Lexicon.default()
    return _DEFAULT_LEXICON


def normalize_tokens(text: str) -> list[str]:
    """Lowercase, strip punctuation, drop stopwords, collapse synonyms."""
    text = text.lower()
    text = text.replace("t-shirt", "tshirt")
    text = re.sub(r"[^\w\s]", " ", text)
    out = []
    for tok in text.split():
        tok = SYNONYMS.get(tok, tok)
        if tok not in STOPWORDS:
            out.append(tok)
    return out


def _segments(text: str) -> list[str]:
    text = text.lower().replace("t-shirt", "tshirt")
    text = re.sub(r"[^\w\s]", " , ", text)
    pattern = "|".join(rf"\b{re.escape(c)}\b" for c in ORDER_CUES)
    parts = re.split(rf"(?:{pattern})|,", text)
    return [p.strip() for p in parts if p and p.strip()]


def _garment_only(tokens: list[str]) -> str | None:
    """If the tokens only name a garment plus generic fold words, return the
    mentioned noun (or 'garment' when no noun appears at all)."""
    noun = None
    for tok in tokens:
        if tok in GARMENT_NOUNS:
            noun = noun or tok
        elif tok not in GENERIC_TOKENS:
            return None
    return noun or "garment"


def parse(text: str, category: str, lexicon: Lexicon | None = None) -> Instruction:
    """Match instruction text to an ordered stage-id list.

    Raises UnknownInstructionError for segments matching no description and
    CategoryMismatchError when a matched stage (or named garment) does not
    belong to the category.
    """
    if not text or not text.strip():
        raise UnknownInstructionError([], "empty instruction")
    if category not in CATEGORY_STAGES:
        raise CategoryMismatchError(f"unknown category {category!r}")
    lex = lexicon or default_lexicon()

    whole = normalize_tokens(text)
    noun = _garment_only(whole)
    if noun is not None:
        if category not in GARMENT_NOUNS[noun]:
            raise CategoryMismatchError(
                f"instruction names {noun!r}, garment is {category}"
            )
        return Instruction(raw=text, parsed=list(CATEGORY_STAGES[category]),
                           category=category)

    stages: list[str] = []
    unmatched: list[str] = []
    for segment in _segments(text):
        tokens = set(normalize_tokens(segment))
        tokens -= set(GARMENT_NOUNS)
        if not tokens or not (tokens - GENERIC_TOKENS):
            continue  # connective or garment-only fragment
        best = None  # (overlap, jaccard, -index)
        best_stage = None
        for idx, (ptokens, stage) in enumerate(lex._tokens):
            overlap = len(tokens & ptokens)
            discriminative = len((tokens & ptokens) - GENERIC_TOKENS)
            if overlap == 0 or discriminative == 0:
                continue
            jac = overlap / len(tokens | ptokens)
            key = (overlap, jac, -idx)
            if best is None or key > best:
                best = key
                best_stage = stage
        if best_stage is None:
            unmatched.append(segment)
        else:
            stages.append(best_stage)
    if unmatched:
        raise UnknownInstructionError(unmatched)
    if not stages:
        raise UnknownInstructionError([text])
    for stage in stages:
        if stage not in CATEGORY_STAGES[category]:
            raise CategoryMismatchError(f"{stage} is not a {category} fold")
    return Instruction(raw=text, parsed=stages, category=category)


def canonical_text(stage_ids: list[str], lexicon: Lexicon | None = None) -> str:
    lex = lexicon or default_lexicon()
    return ", then ".join(lex.canonical_for(s) for s in stage_ids)


def paraphrase_match(text: str, lexicon: Lexicon | None = None) -> ParaphraseMatch:
    """Best predefined description by token-set Jaccard similarity.

    Scores below JACCARD_THRESHOLD mean rejection; the match is still
    returned so callers can inspect near misses.
    """
    lex = lexicon or default_lexicon()
    tokens = frozenset(normalize_tokens(text))
    best_score = -1.0
    best = None
    for (ptokens, stage), (pattern, _s) in zip(lex._tokens, lex.entries):
        union = tokens | ptokens
        score = len(tokens & ptokens) / len(union) if union else 0.0
        if score > best_score:
            best_score = score
            best = (pattern, stage)
    return ParaphraseMatch(phrase=best[0], stage_id=best[1], score=best_score)
