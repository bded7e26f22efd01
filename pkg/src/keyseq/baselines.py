"""Per-token classification baselines over the same feature vectors as the
sequence model: a multinomial logistic-regression classifier (MaxEnt) trained
with the shared L-BFGS wrapper, and a Naive Bayes classifier with add-one
smoothing scored over present features only."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import KP, LABELS, O, LabelSequence
from .crf import (CRF, DEFAULT_MAX_ITERATIONS, DEFAULT_SIGMA, DEFAULT_TOL,
                  LABEL_TO_INDEX, N_LABELS)
from .features import (Alphabet, FeatureVectorSequence, IndexedSequence,
                       build_alphabet, indices_to_csr)
from .optimize import MinimizeResult, minimize

MAXENT_TAG = "keyseq-maxent"
NB_TAG = "keyseq-nb"
MODEL_VERSION = "v1"


@dataclass(frozen=True)
class Example:
    """One per-position training example with provenance for reassembly."""
    doc_id: str
    position: int
    features: frozenset[str]
    label: str


def flatten(
    fvs_list: list[FeatureVectorSequence], label_seqs: list[LabelSequence]
) -> list[Example]:
    """Break labeled sequences into independent per-position examples."""
    if len(fvs_list) != len(label_seqs):
        raise ValueError(f"{len(fvs_list)} feature sequences for {len(label_seqs)} label sequences")
    out = []
    for fvs, lseq in zip(fvs_list, label_seqs):
        if len(fvs.vectors) != len(lseq.labels):
            raise ValueError(
                f"{fvs.doc_id}: {len(lseq.labels)} labels for {len(fvs.vectors)} positions")
        for pos, (names, label) in enumerate(zip(fvs.vectors, lseq.labels)):
            if label not in LABELS:
                raise ValueError(f"{fvs.doc_id}: unknown label {label!r}")
            out.append(Example(fvs.doc_id, pos, frozenset(names), label))
    return out


def reassemble(
    examples: list[Example],
) -> tuple[list[FeatureVectorSequence], list[LabelSequence]]:
    """Positional inverse of flatten (documents in first-seen order)."""
    by_doc: dict[str, list[Example]] = {}
    for ex in examples:
        by_doc.setdefault(ex.doc_id, []).append(ex)
    fvs_list, label_seqs = [], []
    for doc_id, exs in by_doc.items():
        exs.sort(key=lambda e: e.position)
        if [e.position for e in exs] != list(range(len(exs))):
            raise ValueError(f"{doc_id}: positions are not contiguous from 0")
        fvs_list.append(FeatureVectorSequence(doc_id, [set(e.features) for e in exs]))
        label_seqs.append(LabelSequence(doc_id, [e.label for e in exs]))
    return fvs_list, label_seqs


def _design_from_examples(examples: list[Example], alphabet: Alphabet):
    rows = []
    gold = np.empty(len(examples), dtype=np.int64)
    for i, ex in enumerate(examples):
        idx = [alphabet.index_of(n) for n in ex.features]
        rows.append(np.array(sorted(j for j in idx if j is not None), dtype=np.int32))
        gold[i] = LABEL_TO_INDEX[ex.label]
    return indices_to_csr(rows, len(alphabet)), gold


def _alphabet_from_examples(examples: list[Example]) -> Alphabet:
    fvs_list, _ = reassemble(examples)
    return build_alphabet(fvs_list)


# ---------------------------------------------------------------------------
# Maximum entropy (multinomial logistic regression)
# ---------------------------------------------------------------------------

@dataclass
class MaxEntModel:
    alphabet: Alphabet
    weights: np.ndarray  # (F, 2) per (feature, label)
    sigma: float = DEFAULT_SIGMA
    iterations_run: int = 0

    def scores(self, indexed: IndexedSequence) -> np.ndarray:
        out = np.zeros((len(indexed), N_LABELS))
        for t, idx in enumerate(indexed.indices):
            if len(idx):
                out[t] = self.weights[idx].sum(axis=0)
        return out

    def decode(self, indexed: IndexedSequence) -> LabelSequence:
        scores = self.scores(indexed)
        labels = [O if scores[t, 1] >= scores[t, 0] else KP for t in range(len(indexed))]
        return LabelSequence(indexed.doc_id, labels)


def make_maxent_objective(design, gold: np.ndarray, sigma: float):
    """(penalized NLL, gradient) closure for flat (F*2,) weights."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    n, n_features = design.shape
    inv_var = 1.0 / (sigma * sigma)
    onehot = np.zeros((n, N_LABELS))
    onehot[np.arange(n), gold] = 1.0

    def objective_and_grad(w: np.ndarray) -> tuple[float, np.ndarray]:
        weights = w.reshape(n_features, N_LABELS)
        scores = np.asarray(design @ weights)
        log_norm = np.logaddexp(scores[:, 0], scores[:, 1])
        nll = float(log_norm.sum() - scores[np.arange(n), gold].sum())
        posterior = np.exp(scores - log_norm[:, None])
        grad = np.asarray(design.T @ (posterior - onehot)) + weights * inv_var
        return nll + 0.5 * inv_var * float(w @ w), grad.ravel()

    return objective_and_grad


def train_maxent(
    examples: list[Example],
    l2_sigma: float = DEFAULT_SIGMA,
    max_iter: int = DEFAULT_MAX_ITERATIONS,
    tol: float = DEFAULT_TOL,
    alphabet: Alphabet | None = None,
) -> tuple[MaxEntModel, MinimizeResult]:
    if not examples:
        raise ValueError("cannot train on an empty example list")
    if alphabet is None:
        alphabet = _alphabet_from_examples(examples)
    design, gold = _design_from_examples(examples, alphabet)
    objective = make_maxent_objective(design, gold, l2_sigma)
    result = minimize(objective, N_LABELS * len(alphabet), max_iterations=max_iter, tol=tol)
    model = MaxEntModel(alphabet=alphabet,
                        weights=result.weights.reshape(len(alphabet), N_LABELS).copy(),
                        sigma=l2_sigma, iterations_run=result.iterations)
    return model, result


def maxent_posterior(model: MaxEntModel, features) -> np.ndarray:
    """P(label | features) over (KP, O); unseen feature names are dropped."""
    idx = [model.alphabet.index_of(n) for n in features]
    idx = [i for i in idx if i is not None]
    scores = model.weights[idx].sum(axis=0) if idx else np.zeros(N_LABELS)
    log_norm = np.logaddexp(scores[0], scores[1])
    return np.exp(scores - log_norm)


def predict_maxent(model: MaxEntModel, features) -> str:
    post = maxent_posterior(model, features)
    return O if post[1] >= post[0] else KP


def maxent_to_crf(model: MaxEntModel) -> CRF:
    """Equivalent sequence model with zero transition weights; per-position
    decoding then matches predict_maxent exactly."""
    return CRF(alphabet=model.alphabet,
               transitions=np.zeros((N_LABELS, N_LABELS)),
               emissions=model.weights.copy(),
               sigma=model.sigma, iterations_run=model.iterations_run)


# ---------------------------------------------------------------------------
# Naive Bayes with add-one smoothing, scored over present features only
# ---------------------------------------------------------------------------

@dataclass
class NaiveBayesModel:
    alphabet: Alphabet
    log_priors: np.ndarray       # (2,)
    log_likelihoods: np.ndarray  # (F, 2): log P(feature | label)

    def scores(self, indexed: IndexedSequence) -> np.ndarray:
        out = np.tile(self.log_priors, (len(indexed), 1))
        for t, idx in enumerate(indexed.indices):
            if len(idx):
                out[t] += self.log_likelihoods[idx].sum(axis=0)
        return out

    def decode(self, indexed: IndexedSequence) -> LabelSequence:
        scores = self.scores(indexed)
        labels = [O if scores[t, 1] >= scores[t, 0] else KP for t in range(len(indexed))]
        return LabelSequence(indexed.doc_id, labels)


def train_nb(
    examples: list[Example], alphabet: Alphabet | None = None
) -> NaiveBayesModel:
    if not examples:
        raise ValueError("cannot train on an empty example list")
    label_counts = np.zeros(N_LABELS)
    for ex in examples:
        label_counts[LABEL_TO_INDEX[ex.label]] += 1
    if (label_counts == 0).any():
        missing = LABELS[int(np.argmax(label_counts == 0))]
        raise ValueError(f"training data contains no {missing} examples")
    if alphabet is None:
        alphabet = _alphabet_from_examples(examples)

    feature_counts = np.zeros((len(alphabet), N_LABELS))
    for ex in examples:
        y = LABEL_TO_INDEX[ex.label]
        for name in ex.features:
            idx = alphabet.index_of(name)
            if idx is not None:
                feature_counts[idx, y] += 1

    log_priors = np.log(label_counts / label_counts.sum())
    log_likelihoods = np.log((feature_counts + 1.0) / (label_counts[None, :] + 2.0))
    return NaiveBayesModel(alphabet=alphabet, log_priors=log_priors,
                           log_likelihoods=log_likelihoods)


def nb_scores(model: NaiveBayesModel, features) -> np.ndarray:
    """Log prior plus summed log likelihoods of the present, known features."""
    scores = model.log_priors.copy()
    for name in features:
        idx = model.alphabet.index_of(name)
        if idx is not None:
            scores += model.log_likelihoods[idx]
    return scores


def predict_nb(model: NaiveBayesModel, features) -> str:
    scores = nb_scores(model, features)
    return O if scores[1] >= scores[0] else KP


# ---------------------------------------------------------------------------
# Persistence (same line-based scheme as the sequence model)
# ---------------------------------------------------------------------------

def save_maxent(model: MaxEntModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{MAXENT_TAG} {MODEL_VERSION} {model.sigma:.17g} {model.iterations_run}\n")
        fh.write(f"F {len(model.alphabet)}\n")
        for f in range(len(model.alphabet)):
            name = model.alphabet.name_of(f)
            for y in range(N_LABELS):
                fh.write(f"E {name} {LABELS[y]} {model.weights[f, y]:.17g}\n")


def save_nb(model: NaiveBayesModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{NB_TAG} {MODEL_VERSION}\n")
        for y in range(N_LABELS):
            fh.write(f"PRIOR {LABELS[y]} {model.log_priors[y]:.17g}\n")
        fh.write(f"F {len(model.alphabet)}\n")
        for f in range(len(model.alphabet)):
            name = model.alphabet.name_of(f)
            for y in range(N_LABELS):
                fh.write(f"E {name} {LABELS[y]} {model.log_likelihoods[f, y]:.17g}\n")


def _read_emission_block(fh, n_features: int, path) -> tuple[Alphabet, np.ndarray]:
    alphabet = Alphabet()
    table = np.zeros((n_features, N_LABELS))
    seen = np.zeros((n_features, N_LABELS), dtype=bool)
    for line in fh:
        parts = line.split()
        if len(parts) != 4 or parts[0] != "E":
            raise ValueError(f"{path}: malformed emission line {line!r}")
        name, label_text, weight = parts[1], parts[2], float(parts[3])
        if label_text not in LABEL_TO_INDEX:
            raise ValueError(f"{path}: unknown label {label_text!r}")
        idx = alphabet.index_of(name)
        if idx is None:
            idx = alphabet.add(name)
        if idx >= n_features:
            raise ValueError(f"{path}: more features than declared ({n_features})")
        y = LABEL_TO_INDEX[label_text]
        if seen[idx, y]:
            raise ValueError(f"{path}: duplicate emission for {name!r} {label_text}")
        seen[idx, y] = True
        table[idx, y] = weight
    if len(alphabet) != n_features or not seen.all():
        raise ValueError(f"{path}: emission lines do not cover {n_features} features x {N_LABELS} labels")
    return alphabet.freeze(), table


def load_maxent(path) -> MaxEntModel:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != MAXENT_TAG or header[1] != MODEL_VERSION:
            raise ValueError(f"{path}: not a {MAXENT_TAG} {MODEL_VERSION} model file")
        sigma, iterations = float(header[2]), int(header[3])
        count_line = fh.readline().split()
        if len(count_line) != 2 or count_line[0] != "F":
            raise ValueError(f"{path}: missing feature-count line")
        alphabet, weights = _read_emission_block(fh, int(count_line[1]), path)
    return MaxEntModel(alphabet=alphabet, weights=weights, sigma=sigma,
                       iterations_run=iterations)


def load_nb(path) -> NaiveBayesModel:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != NB_TAG or header[1] != MODEL_VERSION:
            raise ValueError(f"{path}: not a {NB_TAG} {MODEL_VERSION} model file")
        log_priors = np.zeros(N_LABELS)
        for _ in range(N_LABELS):
            parts = fh.readline().split()
            if len(parts) != 3 or parts[0] != "PRIOR" or parts[1] not in LABEL_TO_INDEX:
                raise ValueError(f"{path}: malformed prior line {parts!r}")
            log_priors[LABEL_TO_INDEX[parts[1]]] = float(parts[2])
        count_line = fh.readline().split()
        if len(count_line) != 2 or count_line[0] != "F":
            raise ValueError(f"{path}: missing feature-count line")
        alphabet, table = _read_emission_block(fh, int(count_line[1]), path)
    if not math.isclose(float(np.exp(log_priors).sum()), 1.0, rel_tol=0, abs_tol=1e-9):
        raise ValueError(f"{path}: priors do not form a distribution")
    return NaiveBayesModel(alphabet=alphabet, log_priors=log_priors,
                           log_likelihoods=table)
