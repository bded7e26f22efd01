"""Corpus handling: dataset IO, tokenization, gold-phrase alignment, folds.

A document's labeled token stream is the title (sentence 0) followed by the
abstract body (sentences 1..). Tokens are split on whitespace; the normalized
form is lowercased with punctuation characters removed. Gold keyphrases are
aligned by exact normalized-token subsequence match within one sentence.
"""

from __future__ import annotations

import csv
import logging
import random
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .porter import stem as porter_stem

log = logging.getLogger(__name__)

KP = "KP"
O = "O"
LABELS = (KP, O)


def _load_stopwords() -> frozenset[str]:
    text = resources.files("keyseq").joinpath("data/stopwords-en-v1.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


STOPWORDS = _load_stopwords()

# Guard list applied before declaring a sentence boundary at "<word>." — the
# pre-period word, lowercased, is looked up here. Deliberately short; single
# capital letters are not guarded ("A. B" splits).
_ABBREVIATIONS = frozenset({
    "e.g", "i.e", "cf", "al", "et", "vs", "etc", "fig", "figs", "eq", "eqs",
    "sec", "secs", "no", "dr", "mr", "mrs", "ms", "prof", "resp", "ref",
    "refs", "approx", "ca", "incl",
})

_OPENERS = "([{\"'«“"
_CLOSERS = ")]}\"'»”"


def _is_punct_char(c: str) -> bool:
    cat = unicodedata.category(c)
    return cat.startswith("P") or cat.startswith("S")


def normalize_token(surface: str) -> str:
    """Lowercase and strip punctuation/symbol characters."""
    return "".join(c for c in surface.lower() if not _is_punct_char(c))


@dataclass(frozen=True)
class Token:
    surface: str
    normalized: str
    sentence_index: int
    position: int
    is_capitalized: bool
    is_stopword: bool
    is_all_punct: bool
    is_sentence_final: bool
    in_title: bool


@dataclass
class Document:
    id: str
    title: str
    body: str
    gold_phrases: list[str] = field(default_factory=list)


@dataclass
class TokenSequence:
    doc_id: str
    tokens: list[Token]

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def normalized(self) -> list[str]:
        return [t.normalized for t in self.tokens]

    def sentence_ids(self) -> list[int]:
        return [t.sentence_index for t in self.tokens]


@dataclass
class LabelSequence:
    doc_id: str
    labels: list[str]

    def __len__(self) -> int:
        return len(self.labels)


def _sentence_ends_at(raw: list[str], i: int) -> bool:
    tok = raw[i].rstrip(_CLOSERS)
    if not tok or tok[-1] not in ".!?":
        return False
    base = tok.rstrip(".!?").lstrip(_OPENERS).lower()
    if base in _ABBREVIATIONS:
        return False
    if i == len(raw) - 1:
        return True
    return raw[i + 1][:1].isupper()


def split_sentences(text: str) -> list[list[str]]:
    """Whitespace-tokenize, then break after .!? followed by an uppercase
    token or end of text, guarding a short abbreviation list."""
    raw = text.split()
    sentences: list[list[str]] = []
    current: list[str] = []
    for i, tok in enumerate(raw):
        current.append(tok)
        if _sentence_ends_at(raw, i):
            sentences.append(current)
            current = []
    if current:
        sentences.append(current)
    return sentences


def tokenize(doc: Document) -> TokenSequence:
    title_raw = doc.title.split()
    title_types = {normalize_token(t) for t in title_raw} - {""}

    sentences: list[list[str]] = []
    if title_raw:
        sentences.append(title_raw)
    sentences.extend(split_sentences(doc.body))

    tokens: list[Token] = []
    pos = 0
    for s_idx, sent in enumerate(sentences):
        last = len(sent) - 1
        for j, surf in enumerate(sent):
            norm = normalize_token(surf)
            first_alpha = next((c for c in surf if c.isalpha()), None)
            tokens.append(Token(
                surface=surf,
                normalized=norm,
                sentence_index=s_idx,
                position=pos,
                is_capitalized=first_alpha is not None and first_alpha.isupper(),
                is_stopword=norm in STOPWORDS,
                is_all_punct=norm == "",
                is_sentence_final=j == last,
                in_title=norm != "" and norm in title_types,
            ))
            pos += 1
    return TokenSequence(doc.id, tokens)


def normalize_phrase(phrase: str, stem: bool = False) -> list[str]:
    parts = [normalize_token(w) for w in phrase.split()]
    parts = [p for p in parts if p]
    if stem:
        parts = [porter_stem(p) for p in parts]
    return parts


def phrase_occurrences(
    norm_tokens: list[str], sentence_ids: list[int], phrase: list[str]
) -> list[tuple[int, int]]:
    """All (start, end) spans where phrase occurs as a contiguous normalized
    token subsequence inside one sentence. end is exclusive."""
    n = len(phrase)
    if n == 0 or n > len(norm_tokens):
        return []
    spans = []
    for s in range(len(norm_tokens) - n + 1):
        if norm_tokens[s:s + n] == phrase and sentence_ids[s] == sentence_ids[s + n - 1]:
            spans.append((s, s + n))
    return spans


def align_gold_labels(
    seq: TokenSequence, gold_phrases: list[str], stem: bool = False
) -> tuple[LabelSequence, list[str]]:
    """Label every within-sentence occurrence of each gold phrase as KP.

    Returns the label sequence and the retained gold list (normalized phrase
    strings with at least one occurrence; overlapping matches simply merge).
    """
    norm = seq.normalized()
    if stem:
        norm = [porter_stem(t) if t else t for t in norm]
    sids = seq.sentence_ids()
    labels = [O] * len(norm)
    retained: list[str] = []
    seen: set[str] = set()
    for phrase in gold_phrases:
        parts = normalize_phrase(phrase, stem=stem)
        if not parts:
            continue
        spans = phrase_occurrences(norm, sids, parts)
        if not spans:
            continue
        for s, e in spans:
            labels[s:e] = [KP] * (e - s)
        key = " ".join(parts)
        if key not in seen:
            seen.add(key)
            retained.append(key)
    return LabelSequence(seq.doc_id, labels), retained


@dataclass
class FoldAssignment:
    k: int
    assignments: dict[str, int]

    def ids_in_fold(self, fold: int) -> list[str]:
        return sorted(d for d, f in self.assignments.items() if f == fold)

    def ids_outside_fold(self, fold: int) -> list[str]:
        return sorted(d for d, f in self.assignments.items() if f != fold)


def split_folds(docs: list[Document], k: int, seed: int) -> FoldAssignment:
    """Seeded shuffle of sorted ids, then round-robin fold assignment."""
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    ids = sorted(d.id for d in docs)
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate document ids")
    if k > len(ids):
        raise ValueError(f"cannot split {len(ids)} documents into {k} folds")
    rng = random.Random(seed)
    rng.shuffle(ids)
    return FoldAssignment(k, {doc_id: i % k for i, doc_id in enumerate(ids)})


def save_folds(folds: FoldAssignment, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["doc_id", "fold"])
        for doc_id in sorted(folds.assignments):
            writer.writerow([doc_id, folds.assignments[doc_id]])


def load_folds(path: str | Path) -> FoldAssignment:
    assignments: dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["doc_id", "fold"]:
            raise ValueError(f"{path}: expected 'doc_id,fold' header, got {header}")
        for row in reader:
            if len(row) != 2:
                raise ValueError(f"{path}: malformed row {row!r}")
            assignments[row[0]] = int(row[1])
    if not assignments:
        raise ValueError(f"{path}: empty fold file")
    return FoldAssignment(max(assignments.values()) + 1, assignments)


def load_dataset(root: str | Path) -> list[Document]:
    """Read <id>.txt (line 1 = title, rest = abstract) + <id>.kp pairs.

    Malformed documents are skipped with a warning; the run continues.
    """
    root = Path(root)
    if not root.is_dir():
        raise ValueError(f"dataset root {root} is not a directory")
    docs: list[Document] = []
    for txt in sorted(root.glob("*.txt")):
        doc_id = txt.stem
        kp_path = txt.with_suffix(".kp")
        try:
            raw = txt.read_text("utf-8")
        except UnicodeDecodeError:
            log.warning("skipping %s: not valid UTF-8", txt.name)
            continue
        lines = raw.splitlines()
        title = lines[0].strip() if lines else ""
        body = "\n".join(lines[1:]).strip()
        if not title or not body:
            log.warning("skipping %s: empty title or body", txt.name)
            continue
        if not kp_path.exists():
            log.warning("skipping %s: missing keyphrase file %s", txt.name, kp_path.name)
            continue
        try:
            gold = [l.strip() for l in kp_path.read_text("utf-8").splitlines() if l.strip()]
        except UnicodeDecodeError:
            log.warning("skipping %s: keyphrase file not valid UTF-8", txt.name)
            continue
        docs.append(Document(doc_id, title, body, gold))
    return docs
