"""Phrase-level evaluation and experiment orchestration.

Label sequences become phrase sets (maximal within-sentence runs of KP);
phrase sets are scored against retained gold with exact normalized match
(optionally stemmed on both sides) and macro-averaged per document.
Experiment drivers cover k-fold cross validation, cross-dataset transfer,
and the top-k sweep for the unsupervised extractors. Corpus statistics for
a test document are always computed over the training split plus that one
document, never over other test documents.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .baselines import flatten, train_maxent, train_nb
from .corpus import (KP, Document, LabelSequence, TokenSequence,
                     align_gold_labels, split_folds, tokenize)
from .crf import train_crf
from .features import (Alphabet, FeatureVectorSequence, build_alphabet,
                       extract_features, index_sequence)
from .linguistic import ParseTags
from .porter import stem as porter_stem
from .unsup import (METHOD_ABBREV, METHODS, CorpusStats, augment_stats,
                    build_corpus_stats, rank_document, similar_documents,
                    top_k)

MODELS = ("crf", "maxent", "nb")


@dataclass(frozen=True)
class PhraseSet:
    doc_id: str
    phrases: frozenset[str]


def extract_phrases(seq: TokenSequence, labels: LabelSequence) -> PhraseSet:
    """Maximal runs of KP within one sentence, joined as normalized strings.
    Punctuation-only tokens inside a run are dropped from the joined phrase
    (the run itself is not split); runs of only punctuation vanish."""
    if len(labels.labels) != len(seq):
        raise ValueError(f"{seq.doc_id}: {len(labels.labels)} labels for {len(seq)} tokens")
    phrases: set[str] = set()
    run: list[str] = []

    def close() -> None:
        if run:
            text = " ".join(t for t in run if t)
            if text:
                phrases.add(text)
            run.clear()

    prev_sid = None
    for tok, lab in zip(seq.tokens, labels.labels):
        if lab != KP or (run and tok.sentence_index != prev_sid):
            close()
        if lab == KP:
            run.append(tok.normalized)
            prev_sid = tok.sentence_index
    close()
    return PhraseSet(seq.doc_id, frozenset(phrases))


def stem_phrase(phrase: str) -> str:
    return " ".join(porter_stem(t) for t in phrase.split(" "))


def score(predicted, gold, stem_match: bool = False) -> tuple[float, float, float]:
    """Exact-match precision/recall/F1 over phrase sets; 0/0 ratios are 0."""
    pred = set(predicted)
    gold_set = set(gold)
    if stem_match:
        pred = {stem_phrase(p) for p in pred}
        gold_set = {stem_phrase(g) for g in gold_set}
    correct = len(pred & gold_set)
    precision = correct / len(pred) if pred else 0.0
    recall = correct / len(gold_set) if gold_set else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


@dataclass(frozen=True)
class DocMetrics:
    doc_id: str
    fold: str
    precision: float
    recall: float
    f1: float
    n_predicted: int
    n_gold: int
    n_correct: int


@dataclass
class MetricsReport:
    method: str
    dataset: str
    rows: list[DocMetrics] = field(default_factory=list)
    excluded_docs: int = 0  # documents with zero retained gold, left out

    def _mean(self, attr: str) -> float:
        if not self.rows:
            return 0.0
        return sum(getattr(r, attr) for r in self.rows) / len(self.rows)

    @property
    def macro_precision(self) -> float:
        return self._mean("precision")

    @property
    def macro_recall(self) -> float:
        return self._mean("recall")

    @property
    def macro_f1(self) -> float:
        return self._mean("f1")

    def micro(self) -> tuple[float, float, float]:
        """Diagnostic pooled-counts averages."""
        n_pred = sum(r.n_predicted for r in self.rows)
        n_gold = sum(r.n_gold for r in self.rows)
        n_corr = sum(r.n_correct for r in self.rows)
        p = n_corr / n_pred if n_pred else 0.0
        r = n_corr / n_gold if n_gold else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        return p, r, f1

    def fold_macros(self) -> list[tuple[str, float, float, float]]:
        folds: dict[str, list[DocMetrics]] = {}
        for row in self.rows:
            folds.setdefault(row.fold, []).append(row)
        out = []
        for fold in sorted(folds):
            rows = folds[fold]
            out.append((
                fold,
                sum(r.precision for r in rows) / len(rows),
                sum(r.recall for r in rows) / len(rows),
                sum(r.f1 for r in rows) / len(rows),
            ))
        return out


def score_document(
    doc_id: str, fold: str, predicted, gold, stem_match: bool = False
) -> DocMetrics:
    pred = set(predicted)
    gold_set = set(gold)
    if stem_match:
        pred = {stem_phrase(p) for p in pred}
        gold_set = {stem_phrase(g) for g in gold_set}
    p, r, f1 = score(pred, gold_set, stem_match=False)
    return DocMetrics(doc_id, fold, p, r, f1,
                      len(pred), len(gold_set), len(pred & gold_set))


def alignment_merge_report(
    seq: TokenSequence, gold_phrases, stem_match: bool = False
) -> tuple[int, PhraseSet, list[str]]:
    """Sanity identity for gold alignment: labeling gold occurrences and
    re-extracting phrases should give back the retained gold, except where
    adjacent gold phrases merged into one longer run; returns the count of
    retained phrases lost to such merges."""
    labels, retained = align_gold_labels(seq, gold_phrases, stem=stem_match)
    extracted = extract_phrases(seq, labels)
    missing = [g for g in retained if g not in extracted.phrases]
    return len(missing), extracted, retained


# ---------------------------------------------------------------------------
# Pipeline configuration and shared stages
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineConfig:
    model: str = "crf"                       # crf | maxent | nb
    feature_set: str = "basic+title+ukp"     # see features.FEATURE_SETS
    templates: str = "compound"              # cumulative template level
    sigma: float = 10.0
    max_iterations: int = 300
    tol: float = 1e-5
    min_count: int = 1
    ukp_top_k: int = 10
    window: int = 10
    damping: float = 0.85
    neighbors: int = 5
    max_phrase_len: int = 4
    stem_match: bool = False

    def needs_rankings(self) -> bool:
        return self.feature_set == "basic+title+ukp"


def doc_rankings(
    seq: TokenSequence,
    tags: ParseTags,
    stats: CorpusStats,
    all_seqs: dict[str, TokenSequence],
    config: PipelineConfig,
) -> dict[str, list[str]]:
    """Top-k phrases from each of the four extractors, keyed by the feature
    flag name; ExpandRank neighbors are resolved within `stats`."""
    out: dict[str, list[str]] = {}
    for method in METHODS:
        neighbors = None
        if method == "ExpandRank":
            neighbors = [
                (all_seqs[other_id], sim)
                for other_id, sim in similar_documents(seq.doc_id, stats, config.neighbors)
            ]
        ranked = rank_document(
            method, seq, tags, stats=stats, neighbors=neighbors,
            window=config.window, damping=config.damping,
            max_len=config.max_phrase_len)
        out[METHOD_ABBREV[method]] = top_k(ranked, config.ukp_top_k)
    return out


def split_rankings(
    train_seqs: dict[str, TokenSequence],
    test_seqs: dict[str, TokenSequence],
    tags_map: dict[str, ParseTags],
    config: PipelineConfig,
) -> dict[str, dict[str, list[str]]]:
    """Rankings for every train and test document. Training documents use
    statistics over the training split; each test document uses statistics
    over the training split plus itself only."""
    train_stats = build_corpus_stats(list(train_seqs.values()))
    rankings: dict[str, dict[str, list[str]]] = {}
    for doc_id, seq in train_seqs.items():
        rankings[doc_id] = doc_rankings(seq, tags_map[doc_id], train_stats,
                                        train_seqs, config)
    for doc_id, seq in test_seqs.items():
        stats = augment_stats(train_stats, seq)
        pool = dict(train_seqs)
        pool[doc_id] = seq
        rankings[doc_id] = doc_rankings(seq, tags_map[doc_id], stats, pool, config)
    return rankings


def features_for(
    seqs: dict[str, TokenSequence],
    tags_map: dict[str, ParseTags],
    rankings: dict[str, dict[str, list[str]]] | None,
    config: PipelineConfig,
) -> list[FeatureVectorSequence]:
    out = []
    for doc_id in sorted(seqs):
        r = rankings.get(doc_id) if rankings else None
        out.append(extract_features(seqs[doc_id], tags_map[doc_id], r,
                                    config.feature_set, config.templates))
    return out


def train_model(
    config: PipelineConfig,
    train_fvs: list[FeatureVectorSequence],
    train_labels: list[LabelSequence],
    alphabet: Alphabet,
):
    """Fit the configured model; every model exposes decode(IndexedSequence)."""
    if config.model == "crf":
        indexed = [index_sequence(f, alphabet) for f in train_fvs]
        model, _ = train_crf(indexed, train_labels, alphabet,
                             sigma=config.sigma,
                             max_iterations=config.max_iterations,
                             tol=config.tol)
        return model
    if config.model == "maxent":
        examples = flatten(train_fvs, train_labels)
        model, _ = train_maxent(examples, l2_sigma=config.sigma,
                                max_iter=config.max_iterations,
                                tol=config.tol, alphabet=alphabet)
        return model
    if config.model == "nb":
        return train_nb(flatten(train_fvs, train_labels), alphabet=alphabet)
    raise ValueError(f"unknown model {config.model!r} (expected one of {MODELS})")


@dataclass
class PreparedDocs:
    """Tokenized documents with aligned gold labels and retained phrases."""
    seqs: dict[str, TokenSequence]
    labels: dict[str, LabelSequence]
    retained: dict[str, list[str]]


def prepare_docs(docs: list[Document], stem_match: bool = False) -> PreparedDocs:
    seqs, labels, retained = {}, {}, {}
    for doc in docs:
        seq = tokenize(doc)
        lab, ret = align_gold_labels(seq, doc.gold_phrases, stem=stem_match)
        seqs[doc.id] = seq
        labels[doc.id] = lab
        retained[doc.id] = ret
    return PreparedDocs(seqs, labels, retained)


def _evaluate_split(
    config: PipelineConfig,
    prepared: PreparedDocs,
    tags_map: dict[str, ParseTags],
    train_ids: list[str],
    test_ids: list[str],
    fold: str,
    report: MetricsReport,
) -> None:
    train_seqs = {d: prepared.seqs[d] for d in train_ids}
    test_seqs = {d: prepared.seqs[d] for d in test_ids}
    rankings = None
    if config.needs_rankings():
        rankings = split_rankings(train_seqs, test_seqs, tags_map, config)
    train_fvs = features_for(train_seqs, tags_map, rankings, config)
    test_fvs = features_for(test_seqs, tags_map, rankings, config)
    train_labels = [prepared.labels[f.doc_id] for f in train_fvs]
    alphabet = build_alphabet(train_fvs, config.min_count)
    model = train_model(config, train_fvs, train_labels, alphabet)
    for fvs in test_fvs:
        gold = prepared.retained[fvs.doc_id]
        if not gold:
            report.excluded_docs += 1
            continue
        predicted = model.decode(index_sequence(fvs, alphabet))
        phrases = extract_phrases(prepared.seqs[fvs.doc_id], predicted)
        report.rows.append(score_document(fvs.doc_id, fold, phrases.phrases,
                                          gold, config.stem_match))


def cross_validate(
    docs: list[Document],
    k: int,
    seed: int,
    config: PipelineConfig,
    tags_map: dict[str, ParseTags],
    dataset: str = "",
) -> MetricsReport:
    """k-fold CV: per fold, the alphabet, corpus statistics, and model are
    built from the training folds only; macro averages pool the per-document
    scores of every fold's test documents."""
    prepared = prepare_docs(docs, config.stem_match)
    folds = split_folds(docs, k, seed)
    report = MetricsReport(method=config.model, dataset=dataset)
    for fold in range(k):
        _evaluate_split(config, prepared, tags_map,
                        folds.ids_outside_fold(fold), folds.ids_in_fold(fold),
                        str(fold), report)
    return report


def cross_dataset(
    train_docs: list[Document],
    test_docs: list[Document],
    config: PipelineConfig,
    train_tags: dict[str, ParseTags],
    test_tags: dict[str, ParseTags],
    dataset: str = "",
) -> MetricsReport:
    """Train on all of one corpus, evaluate on all of another."""
    overlap = {d.id for d in train_docs} & {d.id for d in test_docs}
    if overlap:
        raise ValueError(f"train and test corpora share document ids: {sorted(overlap)[:3]}")
    prepared_train = prepare_docs(train_docs, config.stem_match)
    prepared_test = prepare_docs(test_docs, config.stem_match)
    prepared = PreparedDocs(
        seqs={**prepared_train.seqs, **prepared_test.seqs},
        labels={**prepared_train.labels, **prepared_test.labels},
        retained={**prepared_train.retained, **prepared_test.retained},
    )
    tags_map = {**train_tags, **test_tags}
    report = MetricsReport(method=config.model, dataset=dataset)
    _evaluate_split(config, prepared, tags_map,
                    sorted(prepared_train.seqs), sorted(prepared_test.seqs),
                    "transfer", report)
    return report


def unsup_eval(
    docs: list[Document],
    tags_map: dict[str, ParseTags],
    method: str,
    ks,
    config: PipelineConfig = PipelineConfig(),
    dataset: str = "",
) -> list[tuple[int, MetricsReport]]:
    """Top-k sweep for one unsupervised extractor: for each k, the top-k
    ranked phrases are the prediction set. Statistics cover all documents."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r} (expected one of {METHODS})")
    prepared = prepare_docs(docs, config.stem_match)
    stats = build_corpus_stats(list(prepared.seqs.values()))
    ranked: dict[str, list[str]] = {}
    for doc_id in sorted(prepared.seqs):
        seq = prepared.seqs[doc_id]
        neighbors = None
        if method == "ExpandRank":
            neighbors = [
                (prepared.seqs[other_id], sim)
                for other_id, sim in similar_documents(doc_id, stats, config.neighbors)
            ]
        ranked[doc_id] = top_k(
            rank_document(method, seq, tags_map[doc_id], stats=stats,
                          neighbors=neighbors, window=config.window,
                          damping=config.damping,
                          max_len=config.max_phrase_len),
            max(k for k in ks) if ks else 0)

    out = []
    for k in ks:
        report = MetricsReport(method=f"{method}@{k}", dataset=dataset)
        for doc_id in sorted(prepared.seqs):
            gold = prepared.retained[doc_id]
            if not gold:
                report.excluded_docs += 1
                continue
            report.rows.append(score_document(doc_id, "all", ranked[doc_id][:k],
                                              gold, config.stem_match))
        out.append((k, report))
    return out
