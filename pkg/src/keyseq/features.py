"""Per-position features and template expansion for the sequence labelers.

Feature names are flat strings: the bare normalized term (or `allPunct`),
`L1-<tag>`, `L2-<tag>`, `isCapitalized`/`noCap`, `isStopword`/`notStop`,
`EOL`, `isInTitle`/`notInTitle`, per-extractor flags `TFIDF`/`TR`/`SR`/`ER`
with aggregates `NoUKP`/`AtleastOneUKP`/`AtleastTwoUKP`/`allUKP`. Templates
pair same-type features of neighboring positions (`BIG-1-`, `BIG1-`,
`SKIP-1-` with `_` joining the pair) and configured type pairs at the same
position (`CMPD-`). Naming stays injective because normalized terms are
lowercase and punctuation-free while every flag or tag name carries an
uppercase character.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse

from .corpus import TokenSequence, phrase_occurrences
from .linguistic import UNK, ParseTags

TERM = "term"
L1 = "l1"
L2 = "l2"
CAP = "cap"
STOP = "stop"
TITLE = "title"
UKP = "ukp"

TEMPLATE_TYPES = (TERM, L1, L2, CAP, STOP, TITLE, UKP)

UKP_METHODS = ("TFIDF", "TR", "SR", "ER")

DEFAULT_COMPOUND_PAIRS = (
    (L1, L2), (L2, TITLE), (L2, CAP), (STOP, UKP), (TITLE, UKP),
)

FEATURE_SETS = ("basic", "basic+title", "basic+title+ukp")
TEMPLATE_LEVELS = ("unigram", "bigram", "skipgram", "compound")


@dataclass(frozen=True)
class TemplateConfig:
    neighbors: bool = True
    bigrams: bool = True
    skipgrams: bool = True
    compounds: bool = True
    compound_pairs: tuple[tuple[str, str], ...] = DEFAULT_COMPOUND_PAIRS


def template_level(name: str) -> TemplateConfig:
    """Cumulative template selector: each level adds one template family."""
    if name not in TEMPLATE_LEVELS:
        raise ValueError(f"unknown template level {name!r} (expected one of {TEMPLATE_LEVELS})")
    rank = TEMPLATE_LEVELS.index(name)
    return TemplateConfig(
        neighbors=True,
        bigrams=rank >= 1,
        skipgrams=rank >= 2,
        compounds=rank >= 3,
    )


@dataclass(frozen=True)
class PositionFeatures:
    """Typed per-position features; template expansion pairs by type."""
    term: str
    l1: str | None
    l2: str | None
    cap: str
    stop: str
    title: str | None = None
    ukp: tuple[str, ...] = ()
    extras: tuple[str, ...] = ()

    def typed(self, ftype: str) -> tuple[str, ...]:
        if ftype == TERM:
            return (self.term,)
        if ftype == L1:
            return (self.l1,) if self.l1 else ()
        if ftype == L2:
            return (self.l2,) if self.l2 else ()
        if ftype == CAP:
            return (self.cap,)
        if ftype == STOP:
            return (self.stop,)
        if ftype == TITLE:
            return (self.title,) if self.title else ()
        if ftype == UKP:
            return self.ukp
        raise ValueError(f"unknown feature type {ftype!r}")

    def names(self) -> set[str]:
        out = {self.term, self.cap, self.stop}
        if self.l1:
            out.add(self.l1)
        if self.l2:
            out.add(self.l2)
        if self.title:
            out.add(self.title)
        out.update(self.ukp)
        out.update(self.extras)
        return out


def base_features(seq: TokenSequence, tags: ParseTags) -> list[PositionFeatures]:
    """Term, L1/L2 tag, capitalization flag, stopword flag, and EOL features.
    UNK tags emit no L1/L2 feature; punctuation-only tokens get `allPunct`."""
    if len(tags) != len(seq):
        raise ValueError(f"{seq.doc_id}: {len(tags)} tags for {len(seq)} tokens")
    out = []
    for i, tok in enumerate(seq.tokens):
        out.append(PositionFeatures(
            term=tok.normalized if tok.normalized else "allPunct",
            l1=f"L1-{tags.l1[i]}" if tags.l1[i] != UNK else None,
            l2=f"L2-{tags.l2[i]}" if tags.l2[i] != UNK else None,
            cap="isCapitalized" if tok.is_capitalized else "noCap",
            stop="isStopword" if tok.is_stopword else "notStop",
            extras=("EOL",) if tok.is_sentence_final else (),
        ))
    return out


def _ukp_parts(
    seq: TokenSequence, rankings: dict[str, set[str] | list[str]]
) -> list[tuple[str, tuple[str, ...], tuple[str, ...]]]:
    """Per position: (title flag, per-method UKP flags or NoUKP, aggregates)."""
    norm = seq.normalized()
    sids = seq.sentence_ids()
    n = len(norm)
    covered: dict[str, np.ndarray] = {}
    for method in UKP_METHODS:
        mask = np.zeros(n, dtype=bool)
        for phrase in rankings.get(method, ()):  # phrases are normalized strings
            parts = phrase.split(" ")
            for s, e in phrase_occurrences(norm, sids, parts):
                mask[s:e] = True
        covered[method] = mask

    out = []
    for i, tok in enumerate(seq.tokens):
        title_flag = "isInTitle" if tok.in_title else "notInTitle"
        hits = tuple(m for m in UKP_METHODS if covered[m][i])
        flags = hits if hits else ("NoUKP",)
        aggregates = []
        if hits:
            aggregates.append("AtleastOneUKP")
            if len(hits) >= 2:
                aggregates.append("AtleastTwoUKP")
            if len(hits) == len(UKP_METHODS):
                aggregates.append("allUKP")
        out.append((title_flag, flags, tuple(aggregates)))
    return out


def title_and_ukp_features(
    seq: TokenSequence, rankings: dict[str, set[str] | list[str]]
) -> list[set[str]]:
    """Flat per-position name sets for the title flag, per-method UKP flags,
    and the UKP aggregates."""
    out = []
    for title_flag, flags, aggregates in _ukp_parts(seq, rankings):
        names = {title_flag}
        names.update(f for f in flags if f != "NoUKP")
        if flags == ("NoUKP",):
            names.add("NoUKP")
        names.update(aggregates)
        out.append(names)
    return out


def add_title_and_ukp(
    positions: list[PositionFeatures],
    seq: TokenSequence,
    rankings: dict[str, set[str] | list[str]] | None,
    include_title: bool = True,
    include_ukp: bool = True,
) -> list[PositionFeatures]:
    """Merge title/UKP layers into base features (ablation-selectable)."""
    if not include_title and not include_ukp:
        return positions
    parts = _ukp_parts(seq, rankings or {})
    out = []
    for pf, (title_flag, flags, aggregates) in zip(positions, parts):
        out.append(replace(
            pf,
            title=title_flag if include_title else pf.title,
            ukp=flags if include_ukp else pf.ukp,
            extras=pf.extras + aggregates if include_ukp else pf.extras,
        ))
    return out


@dataclass
class FeatureVectorSequence:
    doc_id: str
    vectors: list[set[str]]

    def __len__(self) -> int:
        return len(self.vectors)


def apply_templates(
    positions: list[PositionFeatures],
    config: TemplateConfig = TemplateConfig(),
    doc_id: str = "",
) -> FeatureVectorSequence:
    """Expand typed per-position features into flat feature-name sets.

    Neighbor unigrams are prefixed PREV-/NEXT-; bigrams pair same-type
    features of (i-1, i) as `BIG-1-<a>_<b>` and (i, i+1) as `BIG1-<a>_<b>`;
    skipgrams pair (i-1, i+1) as `SKIP-1-<a>_<b>`; compounds pair configured
    type pairs at position i as `CMPD-<a>_<b>`. Boundary positions omit
    templates that would fall outside the document.
    """
    n = len(positions)
    vectors: list[set[str]] = []
    for i, cur in enumerate(positions):
        names = cur.names()
        prev = positions[i - 1] if i > 0 else None
        nxt = positions[i + 1] if i < n - 1 else None
        if config.neighbors:
            if prev is not None:
                for t in TEMPLATE_TYPES:
                    names.update(f"PREV-{f}" for f in prev.typed(t))
            if nxt is not None:
                for t in TEMPLATE_TYPES:
                    names.update(f"NEXT-{f}" for f in nxt.typed(t))
        if config.bigrams:
            if prev is not None:
                for t in TEMPLATE_TYPES:
                    for a in prev.typed(t):
                        for b in cur.typed(t):
                            names.add(f"BIG-1-{a}_{b}")
            if nxt is not None:
                for t in TEMPLATE_TYPES:
                    for a in cur.typed(t):
                        for b in nxt.typed(t):
                            names.add(f"BIG1-{a}_{b}")
        if config.skipgrams and prev is not None and nxt is not None:
            for t in TEMPLATE_TYPES:
                for a in prev.typed(t):
                    for b in nxt.typed(t):
                        names.add(f"SKIP-1-{a}_{b}")
        if config.compounds:
            for ta, tb in config.compound_pairs:
                for a in cur.typed(ta):
                    for b in cur.typed(tb):
                        names.add(f"CMPD-{a}_{b}")
        vectors.append(names)
    return FeatureVectorSequence(doc_id, vectors)


def extract_features(
    seq: TokenSequence,
    tags: ParseTags,
    rankings: dict[str, set[str] | list[str]] | None = None,
    feature_set: str = "basic+title+ukp",
    templates: TemplateConfig | str = "compound",
) -> FeatureVectorSequence:
    """Full per-document feature pipeline: base layer, optional title/UKP
    layers, then template expansion."""
    if feature_set not in FEATURE_SETS:
        raise ValueError(f"unknown feature set {feature_set!r} (expected one of {FEATURE_SETS})")
    if isinstance(templates, str):
        templates = template_level(templates)
    positions = base_features(seq, tags)
    include_title = feature_set in ("basic+title", "basic+title+ukp")
    include_ukp = feature_set == "basic+title+ukp"
    positions = add_title_and_ukp(positions, seq, rankings, include_title, include_ukp)
    return apply_templates(positions, templates, seq.doc_id)


class Alphabet:
    """Frozen bijection between feature names and contiguous indices.
    Lookups of unseen names after freezing return None (feature dropped)."""

    labels = ("KP", "O")
    KP_INDEX = 0
    O_INDEX = 1

    def __init__(self) -> None:
        self._index: dict[str, int] = {}
        self._names: list[str] = []
        self._frozen = False

    def __len__(self) -> int:
        return len(self._names)

    @property
    def frozen(self) -> bool:
        return self._frozen

    def freeze(self) -> "Alphabet":
        self._frozen = True
        return self

    def add(self, name: str) -> int:
        existing = self._index.get(name)
        if existing is not None:
            return existing
        if self._frozen:
            raise ValueError(f"alphabet is frozen; cannot add {name!r}")
        idx = len(self._names)
        self._index[name] = idx
        self._names.append(name)
        return idx

    def index_of(self, name: str) -> int | None:
        return self._index.get(name)

    def name_of(self, idx: int) -> str:
        return self._names[idx]

    def names(self) -> list[str]:
        return list(self._names)


def build_alphabet(
    sequences: list[FeatureVectorSequence], min_count: int = 1
) -> Alphabet:
    """Count feature occurrences over the training split and index the names
    meeting the cutoff, in sorted order (deterministic regardless of input
    order)."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter = Counter()
    for fvs in sequences:
        for names in fvs.vectors:
            counts.update(names)
    alphabet = Alphabet()
    for name in sorted(n for n, c in counts.items() if c >= min_count):
        alphabet.add(name)
    return alphabet.freeze()


@dataclass
class IndexedSequence:
    doc_id: str
    indices: list[np.ndarray]  # per position, sorted feature indices

    def __len__(self) -> int:
        return len(self.indices)


def index_sequence(fvs: FeatureVectorSequence, alphabet: Alphabet) -> IndexedSequence:
    """Map feature names to indices; unseen names are dropped silently."""
    if not alphabet.frozen:
        raise ValueError("cannot index against an unfrozen alphabet")
    rows = []
    for names in fvs.vectors:
        idx = [alphabet.index_of(n) for n in sorted(names)]
        rows.append(np.array(sorted(i for i in idx if i is not None), dtype=np.int32))
    return IndexedSequence(fvs.doc_id, rows)


def indices_to_csr(rows: list[np.ndarray], n_features: int) -> sparse.csr_matrix:
    """Stack per-position index arrays into a binary CSR design matrix."""
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    for i, r in enumerate(rows):
        indptr[i + 1] = indptr[i] + len(r)
    indices = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int32)
    data = np.ones(len(indices))
    return sparse.csr_matrix((data, indices, indptr), shape=(len(rows), n_features))


def write_feature_dump(path, fvs_list: list[FeatureVectorSequence], labels_list) -> None:
    """Golden-test dump: `doc_id<TAB>pos<TAB>label<TAB>space-joined sorted names`."""
    with open(path, "w", encoding="utf-8") as fh:
        for fvs, labels in zip(fvs_list, labels_list):
            for pos, names in enumerate(fvs.vectors):
                fh.write(f"{fvs.doc_id}\t{pos}\t{labels.labels[pos]}\t{' '.join(sorted(names))}\n")
