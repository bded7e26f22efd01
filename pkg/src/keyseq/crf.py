"""Linear-chain conditional random field over the two-label {KP, O} scheme.

Parameters are per-(feature, label) emission weights and a 2x2 matrix of
label-transition weights; there are no special begin/end parameters. All
dynamic programs run in the log domain. Training minimizes the L2-penalized
negative log-likelihood with a shared L-BFGS configuration; the training
path is batched over padded arrays for speed, while the single-sequence
forward/backward/Viterbi functions below are kept as an independent,
loop-based route that tests compare against the batched one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .corpus import KP, LABELS, O, LabelSequence
from .features import Alphabet, IndexedSequence, indices_to_csr
from .optimize import MinimizeResult, minimize

N_LABELS = 2
LABEL_TO_INDEX = {KP: 0, O: 1}

MODEL_TAG = "keyseq-crf"
MODEL_VERSION = "v1"

DEFAULT_SIGMA = 10.0
DEFAULT_MAX_ITERATIONS = 300
DEFAULT_TOL = 1e-5


def labels_to_indices(labels) -> np.ndarray:
    out = np.empty(len(labels), dtype=np.int64)
    for i, lab in enumerate(labels):
        idx = LABEL_TO_INDEX.get(lab)
        if idx is None:
            raise ValueError(f"unknown label {lab!r} (expected one of {LABELS})")
        out[i] = idx
    return out


def indices_to_label_strings(indices) -> list[str]:
    return [LABELS[i] for i in indices]


# ---------------------------------------------------------------------------
# Single-sequence dynamic programs (loop-based reference route)
# ---------------------------------------------------------------------------

def position_scores(indexed: IndexedSequence, emissions: np.ndarray) -> np.ndarray:
    """Per-position label scores: sum of emission weights of active features."""
    scores = np.zeros((len(indexed), N_LABELS))
    for t, idx in enumerate(indexed.indices):
        if len(idx):
            scores[t] = emissions[idx].sum(axis=0)
    return scores


def sequence_score(scores: np.ndarray, transitions: np.ndarray, labels: np.ndarray) -> float:
    """Unnormalized log-score of one labeling."""
    n = scores.shape[0]
    if len(labels) != n:
        raise ValueError(f"{len(labels)} labels for {n} positions")
    total = float(scores[np.arange(n), labels].sum())
    if n > 1:
        total += float(transitions[labels[:-1], labels[1:]].sum())
    return total


def forward(scores: np.ndarray, transitions: np.ndarray) -> tuple[np.ndarray, float]:
    """Log-domain forward recursion; returns (alpha, log partition)."""
    n = scores.shape[0]
    if n == 0:
        raise ValueError("cannot run forward on an empty sequence")
    alpha = np.zeros((n, N_LABELS))
    alpha[0] = scores[0]
    for t in range(1, n):
        for y in range(N_LABELS):
            alpha[t, y] = scores[t, y] + np.logaddexp(
                alpha[t - 1, 0] + transitions[0, y],
                alpha[t - 1, 1] + transitions[1, y],
            )
    log_z = float(np.logaddexp(alpha[n - 1, 0], alpha[n - 1, 1]))
    return alpha, log_z


def backward(scores: np.ndarray, transitions: np.ndarray) -> np.ndarray:
    """Log-domain backward recursion; beta at the last position is zero."""
    n = scores.shape[0]
    if n == 0:
        raise ValueError("cannot run backward on an empty sequence")
    beta = np.zeros((n, N_LABELS))
    for t in range(n - 2, -1, -1):
        for y in range(N_LABELS):
            beta[t, y] = np.logaddexp(
                transitions[y, 0] + scores[t + 1, 0] + beta[t + 1, 0],
                transitions[y, 1] + scores[t + 1, 1] + beta[t + 1, 1],
            )
    return beta


def forward_backward(
    scores: np.ndarray, transitions: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    """Posterior node marginals (n, 2), edge marginals (n-1, 2, 2), and logZ."""
    n = scores.shape[0]
    alpha, log_z = forward(scores, transitions)
    beta = backward(scores, transitions)
    marginals = np.exp(alpha + beta - log_z)
    pair = np.zeros((max(n - 1, 0), N_LABELS, N_LABELS))
    for t in range(n - 1):
        for y in range(N_LABELS):
            for y2 in range(N_LABELS):
                pair[t, y, y2] = np.exp(
                    alpha[t, y] + transitions[y, y2]
                    + scores[t + 1, y2] + beta[t + 1, y2] - log_z
                )
    return marginals, pair, log_z


def viterbi(scores: np.ndarray, transitions: np.ndarray) -> tuple[np.ndarray, float]:
    """Best labeling; exact ties at any comparison resolve toward O."""
    n = scores.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64), 0.0
    delta = np.zeros((n, N_LABELS))
    back = np.zeros((n, N_LABELS), dtype=np.int64)
    delta[0] = scores[0]
    for t in range(1, n):
        for y in range(N_LABELS):
            from_kp = delta[t - 1, 0] + transitions[0, y]
            from_o = delta[t - 1, 1] + transitions[1, y]
            best = 1 if from_o >= from_kp else 0
            back[t, y] = best
            delta[t, y] = scores[t, y] + (from_o if best else from_kp)
    last = 1 if delta[n - 1, 1] >= delta[n - 1, 0] else 0
    path = np.zeros(n, dtype=np.int64)
    path[n - 1] = last
    for t in range(n - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, float(delta[n - 1, last])


# ---------------------------------------------------------------------------
# Batched L2-penalized negative log-likelihood (training route)
# ---------------------------------------------------------------------------

@dataclass
class TrainingDesign:
    """Stacked training split: binary CSR design over all positions, gold
    label indices, and per-sequence lengths (flat layout, sequence-major)."""
    design: sparse.csr_matrix
    gold: np.ndarray
    lengths: np.ndarray

    @property
    def n_features(self) -> int:
        return self.design.shape[1]


def build_training_design(
    indexed: list[IndexedSequence],
    label_seqs: list[LabelSequence],
    n_features: int,
) -> TrainingDesign:
    if len(indexed) != len(label_seqs):
        raise ValueError(f"{len(indexed)} feature sequences for {len(label_seqs)} label sequences")
    if not indexed:
        raise ValueError("cannot train on an empty split")
    rows: list[np.ndarray] = []
    gold: list[np.ndarray] = []
    lengths = []
    for iseq, lseq in zip(indexed, label_seqs):
        if len(iseq) == 0:
            raise ValueError(f"{iseq.doc_id}: empty sequence")
        if len(iseq) != len(lseq.labels):
            raise ValueError(
                f"{iseq.doc_id}: {len(lseq.labels)} labels for {len(iseq)} positions")
        rows.extend(iseq.indices)
        gold.append(labels_to_indices(lseq.labels))
        lengths.append(len(iseq))
    return TrainingDesign(
        design=indices_to_csr(rows, n_features),
        gold=np.concatenate(gold),
        lengths=np.array(lengths, dtype=np.int64),
    )


def unpack_params(w: np.ndarray, n_features: int) -> tuple[np.ndarray, np.ndarray]:
    """Split the flat parameter vector into (transitions (2,2), emissions (F,2))."""
    if w.shape != (4 + N_LABELS * n_features,):
        raise ValueError(f"parameter vector has shape {w.shape}, expected ({4 + N_LABELS * n_features},)")
    return w[:4].reshape(N_LABELS, N_LABELS), w[4:].reshape(n_features, N_LABELS)


def pack_params(transitions: np.ndarray, emissions: np.ndarray) -> np.ndarray:
    return np.concatenate([transitions.ravel(), emissions.ravel()])


def make_objective(design: TrainingDesign, sigma: float):
    """Closure computing (penalized NLL, gradient) for the flat parameters.

    Sequences are padded to a common length; padded positions carry zero
    emission scores and are masked to -inf before any exponentiation so
    they contribute nothing to marginals or expected counts.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = design.design
    gold = design.gold
    lengths = design.lengths
    n_pos, n_features = x.shape
    n_seqs = len(lengths)
    max_n = int(lengths.max())
    inv_var = 1.0 / (sigma * sigma)

    pad_rows = np.repeat(np.arange(n_seqs), lengths)
    pad_cols = np.concatenate([np.arange(n) for n in lengths])
    mask = np.arange(max_n)[None, :] < lengths[:, None]

    gold_onehot = np.zeros((n_pos, N_LABELS))
    gold_onehot[np.arange(n_pos), gold] = 1.0
    empirical_emissions = np.asarray(x.T @ gold_onehot)
    empirical_transitions = np.zeros((N_LABELS, N_LABELS))
    offsets = np.concatenate([[0], np.cumsum(lengths)])
    for b in range(n_seqs):
        seg = gold[offsets[b]:offsets[b + 1]]
        np.add.at(empirical_transitions, (seg[:-1], seg[1:]), 1.0)

    def objective_and_grad(w: np.ndarray) -> tuple[float, np.ndarray]:
        transitions, emissions = unpack_params(w, n_features)
        scores_flat = np.asarray(x @ emissions)
        scores = np.zeros((n_seqs, max_n, N_LABELS))
        scores[pad_rows, pad_cols] = scores_flat

        alpha = np.empty((n_seqs, max_n, N_LABELS))
        alpha[:, 0] = scores[:, 0]
        for t in range(1, max_n):
            prev = alpha[:, t - 1]
            alpha[:, t] = scores[:, t] + np.logaddexp(
                prev[:, :1] + transitions[0], prev[:, 1:] + transitions[1])
        final = alpha[np.arange(n_seqs), lengths - 1]
        log_z = np.logaddexp(final[:, 0], final[:, 1])

        beta = np.zeros((n_seqs, max_n, N_LABELS))
        for t in range(max_n - 2, -1, -1):
            nxt = scores[:, t + 1] + beta[:, t + 1]
            cand = np.logaddexp(transitions[:, 0] + nxt[:, :1],
                                transitions[:, 1] + nxt[:, 1:])
            beta[:, t] = np.where((t < lengths - 1)[:, None], cand, 0.0)

        log_marginals = alpha + beta - log_z[:, None, None]
        marginals = np.exp(np.where(mask[:, :, None], log_marginals, -np.inf))

        expected_transitions = np.zeros((N_LABELS, N_LABELS))
        for t in range(max_n - 1):
            valid = t + 1 < lengths
            if not valid.any():
                break
            val = (alpha[:, t, :, None] + transitions[None, :, :]
                   + (scores[:, t + 1] + beta[:, t + 1])[:, None, :]
                   - log_z[:, None, None])
            val = np.where(valid[:, None, None], val, -np.inf)
            expected_transitions += np.exp(val).sum(axis=0)

        if not np.isfinite(log_z).all():
            bad = int(np.argmin(np.isfinite(log_z)))
            raise FloatingPointError(
                f"non-finite log partition for training sequence {bad} "
                f"(length {int(lengths[bad])})")
        gold_score = float((scores_flat * gold_onehot).sum()
                           + (empirical_transitions * transitions).sum())
        nll = float(log_z.sum()) - gold_score
        penalty = 0.5 * inv_var * float(w @ w)

        grad_e = np.asarray(x.T @ (marginals[pad_rows, pad_cols] - gold_onehot))
        grad_e += emissions * inv_var
        grad_t = expected_transitions - empirical_transitions + transitions * inv_var
        return nll + penalty, np.concatenate([grad_t.ravel(), grad_e.ravel()])

    return objective_and_grad


# ---------------------------------------------------------------------------
# Model object, training, persistence
# ---------------------------------------------------------------------------

@dataclass
class CRF:
    """Trained model. The in-memory training metadata (final objective and
    the converged flag) is informational and not serialized; predictions
    depend only on the weights and alphabet."""
    alphabet: Alphabet
    transitions: np.ndarray  # (2, 2) indexed [from, to]
    emissions: np.ndarray    # (F, 2) indexed [feature, label]
    sigma: float = DEFAULT_SIGMA
    iterations_run: int = 0
    final_objective: float = float("nan")
    converged: bool = True

    def scores(self, indexed: IndexedSequence) -> np.ndarray:
        return position_scores(indexed, self.emissions)

    def decode(self, indexed: IndexedSequence) -> LabelSequence:
        path, _ = viterbi(self.scores(indexed), self.transitions)
        return LabelSequence(indexed.doc_id, indices_to_label_strings(path))

    def marginal_probabilities(self, indexed: IndexedSequence) -> np.ndarray:
        marginals, _, _ = forward_backward(self.scores(indexed), self.transitions)
        return marginals

    def log_likelihood(self, indexed: IndexedSequence, labels: LabelSequence) -> float:
        scores = self.scores(indexed)
        gold = labels_to_indices(labels.labels)
        _, log_z = forward(scores, self.transitions)
        return sequence_score(scores, self.transitions, gold) - log_z


def train_crf(
    indexed: list[IndexedSequence],
    label_seqs: list[LabelSequence],
    alphabet: Alphabet,
    sigma: float = DEFAULT_SIGMA,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    tol: float = DEFAULT_TOL,
) -> tuple[CRF, MinimizeResult]:
    """Fit from a zero start; deterministic for fixed inputs and settings."""
    design = build_training_design(indexed, label_seqs, len(alphabet))
    objective = make_objective(design, sigma)
    result = minimize(objective, 4 + N_LABELS * len(alphabet),
                      max_iterations=max_iterations, tol=tol)
    transitions, emissions = unpack_params(result.weights, len(alphabet))
    model = CRF(alphabet=alphabet, transitions=transitions.copy(),
                emissions=emissions.copy(), sigma=sigma,
                iterations_run=result.iterations,
                final_objective=result.objective, converged=result.converged)
    return model, result


def save_crf(model: CRF, path) -> None:
    """Text format: header line, feature count, 4 transition lines, then one
    line per (feature, label) emission weight at full double precision."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{MODEL_TAG} {MODEL_VERSION} {model.sigma:.17g} {model.iterations_run}\n")
        fh.write(f"F {len(model.alphabet)}\n")
        for a in range(N_LABELS):
            for b in range(N_LABELS):
                fh.write(f"T {LABELS[a]} {LABELS[b]} {model.transitions[a, b]:.17g}\n")
        for f in range(len(model.alphabet)):
            name = model.alphabet.name_of(f)
            for y in range(N_LABELS):
                fh.write(f"E {name} {LABELS[y]} {model.emissions[f, y]:.17g}\n")


def _parse_label(text: str, path) -> int:
    idx = LABEL_TO_INDEX.get(text)
    if idx is None:
        raise ValueError(f"{path}: unknown label {text!r}")
    return idx


def load_crf(path) -> CRF:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != MODEL_TAG or header[1] != MODEL_VERSION:
            raise ValueError(f"{path}: not a {MODEL_TAG} {MODEL_VERSION} model file")
        sigma = float(header[2])
        iterations = int(header[3])
        count_line = fh.readline().split()
        if len(count_line) != 2 or count_line[0] != "F":
            raise ValueError(f"{path}: missing feature-count line")
        n_features = int(count_line[1])

        transitions = np.zeros((N_LABELS, N_LABELS))
        seen_t = np.zeros((N_LABELS, N_LABELS), dtype=bool)
        for _ in range(N_LABELS * N_LABELS):
            parts = fh.readline().split()
            if len(parts) != 4 or parts[0] != "T":
                raise ValueError(f"{path}: malformed transition line {parts!r}")
            a = _parse_label(parts[1], path)
            b = _parse_label(parts[2], path)
            if seen_t[a, b]:
                raise ValueError(f"{path}: duplicate transition {parts[1]}->{parts[2]}")
            seen_t[a, b] = True
            transitions[a, b] = float(parts[3])

        alphabet = Alphabet()
        emissions = np.zeros((n_features, N_LABELS))
        seen_e = np.zeros((n_features, N_LABELS), dtype=bool)
        for line in fh:
            parts = line.split()
            if len(parts) != 4 or parts[0] != "E":
                raise ValueError(f"{path}: malformed emission line {line!r}")
            name, label_text, weight = parts[1], parts[2], float(parts[3])
            idx = alphabet.index_of(name)
            if idx is None:
                idx = alphabet.add(name)
            if idx >= n_features:
                raise ValueError(f"{path}: more features than declared ({n_features})")
            y = _parse_label(label_text, path)
            if seen_e[idx, y]:
                raise ValueError(f"{path}: duplicate emission for {name!r} {label_text}")
            seen_e[idx, y] = True
            emissions[idx, y] = weight
    if len(alphabet) != n_features or not seen_e.all():
        raise ValueError(f"{path}: emission lines do not cover {n_features} features x {N_LABELS} labels")
    return CRF(alphabet=alphabet.freeze(), transitions=transitions,
               emissions=emissions, sigma=sigma, iterations_run=iterations)
