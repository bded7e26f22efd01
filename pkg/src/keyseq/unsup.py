"""Unsupervised keyphrase extractors: TFIDF, TextRank, SingleRank, ExpandRank.

All four share the candidate-phrase definition (within-sentence n-grams of
non-stopword noun/adjective tokens whose final token is a noun) and score a
candidate as the sum of its component term scores. The graph methods run
weighted PageRank over term co-occurrence graphs; ExpandRank adds a target
document's co-occurrence counts from its most similar neighbor documents,
scaled by cosine similarity of TFIDF vectors.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .corpus import TokenSequence
from .linguistic import ParseTags

NOUN_TAGS = frozenset({"NN", "NNS", "NNP", "NNPS"})
CANDIDATE_TAGS = NOUN_TAGS | {"JJ"}

METHODS = ("TFIDF", "TextRank", "SingleRank", "ExpandRank")
METHOD_ABBREV = {"TFIDF": "TFIDF", "TextRank": "TR", "SingleRank": "SR", "ExpandRank": "ER"}

DEFAULT_WINDOW = 10
DEFAULT_DAMPING = 0.85
DEFAULT_NEIGHBORS = 5
DEFAULT_MAX_PHRASE_LEN = 4


@dataclass
class CorpusStats:
    num_documents: int
    document_frequency: dict[str, int]
    term_counts: dict[str, Counter]
    tfidf_vectors: dict[str, dict[str, float]] = field(default_factory=dict)


def _doc_terms(seq: TokenSequence) -> Counter:
    """Counts of normalized non-stopword terms in one document."""
    counts: Counter = Counter()
    for tok in seq:
        if tok.normalized and not tok.is_stopword:
            counts[tok.normalized] += 1
    return counts


def _vectors_from_counts(
    term_counts: dict[str, Counter], document_frequency: dict[str, int], n_docs: int
) -> dict[str, dict[str, float]]:
    idf = {t: math.log(n_docs / df) for t, df in document_frequency.items()}
    return {
        doc_id: {t: tf * idf[t] for t, tf in counts.items()}
        for doc_id, counts in term_counts.items()
    }


def build_corpus_stats(seqs: list[TokenSequence]) -> CorpusStats:
    term_counts: dict[str, Counter] = {}
    df: dict[str, int] = {}
    for seq in seqs:
        if seq.doc_id in term_counts:
            raise ValueError(f"duplicate doc_id {seq.doc_id}")
        counts = _doc_terms(seq)
        term_counts[seq.doc_id] = counts
        for term in counts:
            df[term] = df.get(term, 0) + 1
    n = len(term_counts)
    vectors = _vectors_from_counts(term_counts, df, n) if n else {}
    return CorpusStats(n, df, term_counts, vectors)


def augment_stats(stats: CorpusStats, seq: TokenSequence) -> CorpusStats:
    """Stats over the given collection plus one extra document (used for
    held-out documents: idf and neighbors come from train + that one doc)."""
    if seq.doc_id in stats.term_counts:
        raise ValueError(f"{seq.doc_id} already in corpus stats")
    counts = _doc_terms(seq)
    df = dict(stats.document_frequency)
    for term in counts:
        df[term] = df.get(term, 0) + 1
    term_counts = dict(stats.term_counts)
    term_counts[seq.doc_id] = counts
    n = stats.num_documents + 1
    return CorpusStats(n, df, term_counts, _vectors_from_counts(term_counts, df, n))


@dataclass(frozen=True)
class PhraseOccurrence:
    start: int
    end: int  # exclusive
    phrase: str


def _eligible(tok, tag: str) -> bool:
    return bool(tok.normalized) and not tok.is_stopword and tag in CANDIDATE_TAGS


def candidate_phrases(
    seq: TokenSequence, tags: ParseTags, max_len: int = DEFAULT_MAX_PHRASE_LEN
) -> list[PhraseOccurrence]:
    """Within-sentence n-grams (1..max_len) of eligible tokens whose final
    token is tagged as a noun (adjectives may not end a phrase)."""
    if len(tags) != len(seq):
        raise ValueError(f"{seq.doc_id}: {len(tags)} tags for {len(seq)} tokens")
    toks = seq.tokens
    out: list[PhraseOccurrence] = []
    n = len(toks)
    for start in range(n):
        if not _eligible(toks[start], tags.l1[start]):
            continue
        sentence = toks[start].sentence_index
        for end in range(start + 1, min(start + max_len, n) + 1):
            last = end - 1
            if toks[last].sentence_index != sentence:
                break
            if not _eligible(toks[last], tags.l1[last]):
                break
            if tags.l1[last] in NOUN_TAGS:
                out.append(PhraseOccurrence(
                    start, end, " ".join(t.normalized for t in toks[start:end])
                ))
    return out


@dataclass
class TermGraph:
    nodes: set[str]
    edges: dict[tuple[str, str], float]  # key is (min, max); weights > 0

    def add_edge(self, u: str, v: str, w: float) -> None:
        if u == v or w <= 0:
            return
        key = (u, v) if u < v else (v, u)
        self.edges[key] = self.edges.get(key, 0.0) + w


def _eligible_positions(seq: TokenSequence, tags: ParseTags) -> list[tuple[int, str]]:
    return [
        (i, tok.normalized)
        for i, tok in enumerate(seq.tokens)
        if _eligible(tok, tags.l1[i])
    ]


def _cooccurrence_counts(
    positions: list[tuple[int, str]], window: int, nodes: set[str] | None = None
) -> Counter:
    """Unordered co-occurrence counts of term pairs within `window` token
    positions (|i - j| <= window - 1), optionally restricted to `nodes`."""
    counts: Counter = Counter()
    m = len(positions)
    for a in range(m):
        ia, ta = positions[a]
        if nodes is not None and ta not in nodes:
            continue
        for b in range(a + 1, m):
            ib, tb = positions[b]
            if ib - ia > window - 1:
                break
            if ta == tb:
                continue
            if nodes is not None and tb not in nodes:
                continue
            key = (ta, tb) if ta < tb else (tb, ta)
            counts[key] += 1
    return counts


def build_graph(
    seq: TokenSequence,
    tags: ParseTags,
    method: str = "SingleRank",
    window: int = DEFAULT_WINDOW,
    neighbors: list[tuple[TokenSequence, float]] | None = None,
) -> TermGraph:
    """Term co-occurrence graph for one document.

    TextRank is the SingleRank graph restricted to window 2 with unit edge
    weights. ExpandRank adds similarity-scaled co-occurrence counts from
    neighbor documents, restricted to the target document's node set.
    """
    if method not in ("TextRank", "SingleRank", "ExpandRank"):
        raise ValueError(f"unknown graph method {method!r}")
    positions = _eligible_positions(seq, tags)
    nodes = {t for _, t in positions}
    graph = TermGraph(nodes, {})
    if method == "TextRank":
        for key in _cooccurrence_counts(positions, window=2):
            graph.edges[key] = 1.0
        return graph
    for key, c in _cooccurrence_counts(positions, window).items():
        graph.edges[key] = float(c)
    if method == "ExpandRank":
        for other, sim in neighbors or []:
            if sim <= 0:
                continue
            other_positions = [
                (i, tok.normalized)
                for i, tok in enumerate(other.tokens)
                if tok.normalized in nodes
            ]
            for key, c in _cooccurrence_counts(other_positions, window, nodes).items():
                graph.add_edge(key[0], key[1], sim * c)
    return graph


def _pagerank_arrays(
    graph: TermGraph, damping: float, tol: float, max_iter: int
) -> tuple[list[str], np.ndarray, int, bool]:
    nodes = sorted(graph.nodes)
    n = len(nodes)
    index = {t: i for i, t in enumerate(nodes)}
    W = np.zeros((n, n))
    for (u, v), w in graph.edges.items():
        W[index[u], index[v]] = w
        W[index[v], index[u]] = w
    totals = W.sum(axis=1)
    # Rows with zero total weight distribute nothing (isolated nodes keep
    # only teleport mass); renormalize to hold the distribution invariant.
    P = np.divide(W, totals[:, None], out=np.zeros_like(W), where=totals[:, None] > 0)
    scores = np.full(n, 1.0 / n)
    teleport = (1.0 - damping) / n
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        new = teleport + damping * (P.T @ scores)
        new /= new.sum()
        delta = np.abs(new - scores).sum()
        scores = new
        if delta < tol:
            converged = True
            break
    return nodes, scores, iterations, converged


def pagerank(
    graph: TermGraph,
    damping: float = DEFAULT_DAMPING,
    tol: float = 1e-6,
    max_iter: int = 100,
) -> dict[str, float]:
    """Weighted PageRank with uniform teleport; scores sum to 1."""
    if not graph.nodes:
        raise ValueError("pagerank requires a nonempty graph")
    nodes, scores, _, _ = _pagerank_arrays(graph, damping, tol, max_iter)
    return dict(zip(nodes, scores.tolist()))


@dataclass
class RankedPhrases:
    doc_id: str
    method: str
    phrases: list[tuple[str, float]]  # (normalized phrase, score), best first


def score_and_rank(
    seq: TokenSequence,
    tags: ParseTags,
    term_scores: dict[str, float],
    method: str = "",
    max_len: int = DEFAULT_MAX_PHRASE_LEN,
    agg: str = "sum",
) -> RankedPhrases:
    """Score each distinct candidate phrase by the sum (or mean) of its
    component term scores; ties break on the phrase string ascending."""
    if agg not in ("sum", "mean"):
        raise ValueError(f"unknown aggregation {agg!r}")
    scores: dict[str, float] = {}
    for occ in candidate_phrases(seq, tags, max_len):
        if occ.phrase in scores:
            continue
        parts = occ.phrase.split(" ")
        total = sum(term_scores.get(t, 0.0) for t in parts)
        scores[occ.phrase] = total / len(parts) if agg == "mean" else total
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return RankedPhrases(seq.doc_id, method, ranked)


def similar_documents(
    doc_id: str, stats: CorpusStats, m: int = DEFAULT_NEIGHBORS
) -> list[tuple[str, float]]:
    """Top-m most similar other documents by cosine of TFIDF vectors.
    Ties break on doc_id ascending; m larger than the corpus returns all."""
    if doc_id not in stats.tfidf_vectors:
        raise ValueError(f"unknown document {doc_id}")
    target = stats.tfidf_vectors[doc_id]
    t_norm = math.sqrt(sum(w * w for w in target.values()))
    sims: list[tuple[str, float]] = []
    for other_id, vec in stats.tfidf_vectors.items():
        if other_id == doc_id:
            continue
        if t_norm == 0:
            sims.append((other_id, 0.0))
            continue
        o_norm = math.sqrt(sum(w * w for w in vec.values()))
        if o_norm == 0:
            sims.append((other_id, 0.0))
            continue
        smaller, larger = (target, vec) if len(target) <= len(vec) else (vec, target)
        dot = sum(w * larger.get(t, 0.0) for t, w in smaller.items())
        sims.append((other_id, dot / (t_norm * o_norm)))
    sims.sort(key=lambda kv: (-kv[1], kv[0]))
    return sims[:m]


def top_k(ranked: RankedPhrases, k: int) -> list[str]:
    if k < 0:
        raise ValueError("k must be nonnegative")
    return [p for p, _ in ranked.phrases[:k]]


def rank_document(
    method: str,
    seq: TokenSequence,
    tags: ParseTags,
    stats: CorpusStats | None = None,
    neighbors: list[tuple[TokenSequence, float]] | None = None,
    window: int = DEFAULT_WINDOW,
    damping: float = DEFAULT_DAMPING,
    tol: float = 1e-6,
    max_iter: int = 100,
    max_len: int = DEFAULT_MAX_PHRASE_LEN,
    agg: str = "sum",
) -> RankedPhrases:
    """Run one extractor end to end for a single document."""
    if method == "TFIDF":
        if stats is None or seq.doc_id not in stats.tfidf_vectors:
            raise ValueError("TFIDF needs corpus stats covering the document")
        term_scores = stats.tfidf_vectors[seq.doc_id]
    elif method in ("TextRank", "SingleRank", "ExpandRank"):
        effective_window = 2 if method == "TextRank" else window
        graph = build_graph(seq, tags, method, effective_window, neighbors)
        term_scores = (
            pagerank(graph, damping, tol, max_iter) if graph.nodes else {}
        )
    else:
        raise ValueError(f"unknown method {method!r}")
    return score_and_rank(seq, tags, term_scores, method, max_len, agg)
