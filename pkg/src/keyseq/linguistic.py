"""Per-token linguistic annotations: POS (L1) and phrase (L2) tags.

Quality annotations come from sidecar files produced by a real parser
(`<id>.tags`, one `surface<TAB>L1<TAB>L2` line per token, token order
identical to the tokenizer's stream). The bundled fallback tagger is
deliberately crude: closed-class lexicon, a few suffix rules, capitalized
non-initial tokens as proper nouns, default NN, and a coarse chunk mapping.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from .corpus import TokenSequence

log = logging.getLogger(__name__)

UNK = "UNK"

POS_TAGS = frozenset({
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD",
    "NN", "NNS", "NNP", "NNPS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR",
    "RBS", "RP", "SYM", "TO", "UH", "VB", "VBD", "VBG", "VBN", "VBP",
    "VBZ", "WDT", "WP", "WP$", "WRB",
    ".", ",", ":", "``", "''", "#", "$", "-LRB-", "-RRB-", "HYPH",
})

PHRASE_TAGS = frozenset({
    "NP", "VP", "PP", "ADJP", "ADVP", "SBAR", "SBARQ", "SINV", "SQ", "S",
    "PRT", "INTJ", "CONJP", "LST", "UCP", "QP", "NX", "WHNP", "WHPP",
    "WHADJP", "WHADVP", "X", "FRAG", "PRN", "RRC", "NAC", "O",
})


@dataclass
class ParseTags:
    doc_id: str
    l1: list[str]
    l2: list[str]

    def __len__(self) -> int:
        return len(self.l1)


def load_tag_sidecar(path: str | Path, seq: TokenSequence) -> ParseTags:
    """Parse a `surface<TAB>L1<TAB>L2` sidecar for seq.

    Token count must match; unknown tags map to UNK with a warning.
    """
    path = Path(path)
    l1: list[str] = []
    l2: list[str] = []
    unknown: set[str] = set()
    for lineno, line in enumerate(path.read_text("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) < 3:
            raise ValueError(f"{path.name}:{lineno}: expected 3 tab-separated fields, got {len(fields)}")
        tag1, tag2 = fields[1].strip(), fields[2].strip()
        if tag1 not in POS_TAGS and tag1 != UNK:
            unknown.add(tag1)
            tag1 = UNK
        if tag2 not in PHRASE_TAGS and tag2 != UNK:
            unknown.add(tag2)
            tag2 = UNK
        l1.append(tag1)
        l2.append(tag2)
    if len(l1) != len(seq):
        raise ValueError(
            f"tag sidecar for {seq.doc_id}: {len(l1)} tag lines for {len(seq)} tokens"
        )
    if unknown:
        log.warning("%s: unknown tags mapped to UNK: %s", path.name, sorted(unknown))
    return ParseTags(seq.doc_id, l1, l2)


_LEXICON = {
    "the": "DT", "a": "DT", "an": "DT", "this": "DT", "that": "DT",
    "these": "DT", "those": "DT", "each": "DT", "every": "DT", "some": "DT",
    "any": "DT", "no": "DT", "either": "DT", "neither": "DT",
    "of": "IN", "in": "IN", "on": "IN", "at": "IN", "by": "IN", "for": "IN",
    "with": "IN", "from": "IN", "about": "IN", "against": "IN",
    "between": "IN", "into": "IN", "through": "IN", "during": "IN",
    "before": "IN", "after": "IN", "above": "IN", "below": "IN",
    "under": "IN", "over": "IN", "since": "IN", "without": "IN",
    "within": "IN", "along": "IN", "across": "IN", "behind": "IN",
    "beyond": "IN", "among": "IN", "amongst": "IN", "around": "IN",
    "upon": "IN", "toward": "IN", "towards": "IN", "via": "IN", "per": "IN",
    "as": "IN", "than": "IN",
    "to": "TO",
    "and": "CC", "or": "CC", "but": "CC", "nor": "CC", "yet": "CC",
    "i": "PRP", "you": "PRP", "he": "PRP", "she": "PRP", "it": "PRP",
    "we": "PRP", "they": "PRP", "me": "PRP", "him": "PRP", "her": "PRP",
    "us": "PRP", "them": "PRP",
    "my": "PRP$", "your": "PRP$", "his": "PRP$", "its": "PRP$",
    "our": "PRP$", "their": "PRP$",
    "can": "MD", "could": "MD", "may": "MD", "might": "MD", "must": "MD",
    "shall": "MD", "should": "MD", "will": "MD", "would": "MD",
    "is": "VBZ", "are": "VBP", "was": "VBD", "were": "VBD", "be": "VB",
    "been": "VBN", "being": "VBG", "am": "VBP",
    "has": "VBZ", "have": "VBP", "had": "VBD",
    "do": "VBP", "does": "VBZ", "did": "VBD",
    "which": "WDT", "what": "WP", "who": "WP", "whom": "WP", "whose": "WP$",
    "when": "WRB", "where": "WRB", "why": "WRB", "how": "WRB",
    "not": "RB", "never": "RB", "also": "RB", "very": "RB", "too": "RB",
    "often": "RB", "there": "EX",
}

_NOUN_SUFFIXES = ("tion", "sion", "ment", "ness", "ity", "ism", "ance", "ence", "ship")
_ADJ_SUFFIXES = ("ical", "al", "ive", "ous", "able", "ible", "ic", "ful", "less", "ary", "ant", "ent")


def _tag_one(norm: str, capitalized: bool, sentence_initial: bool) -> str:
    if not norm:
        return UNK
    if norm in _LEXICON:
        return _LEXICON[norm]
    if norm.isdigit():
        return "CD"
    if capitalized and not sentence_initial:
        return "NNP"
    if len(norm) > 2 and norm.endswith("ss"):
        return "NN"
    if len(norm) > 3 and norm.endswith("s") and not norm.endswith(("us", "is")):
        return "NNS"
    if len(norm) > 4 and norm.endswith("ing"):
        return "VBG"
    if len(norm) > 3 and norm.endswith("ed"):
        return "VBN"
    if len(norm) > 3 and norm.endswith("ly"):
        return "RB"
    for suf in _NOUN_SUFFIXES:
        if len(norm) > len(suf) + 1 and norm.endswith(suf):
            return "NN"
    for suf in _ADJ_SUFFIXES:
        if len(norm) > len(suf) + 1 and norm.endswith(suf):
            return "JJ"
    return "NN"


def _chunk_of(pos: str) -> str:
    if pos == UNK:
        return UNK
    if pos in ("NN", "NNS", "NNP", "NNPS", "JJ", "JJR", "JJS"):
        return "NP"
    if pos.startswith("VB") or pos == "MD":
        return "VP"
    if pos in ("IN", "TO"):
        return "PP"
    return "O"


def fallback_tag(seq: TokenSequence) -> ParseTags:
    """Heuristic tagger used when no sidecar is available. Total and
    deterministic; accuracy is intentionally modest."""
    l1: list[str] = []
    prev_sentence = -1
    for tok in seq:
        sentence_initial = tok.sentence_index != prev_sentence
        prev_sentence = tok.sentence_index
        l1.append(_tag_one(tok.normalized, tok.is_capitalized, sentence_initial))
    l2 = [_chunk_of(p) for p in l1]
    return ParseTags(seq.doc_id, l1, l2)
