"""Linear-chain model: scoring, inference, gradients, training, persistence."""

import math

import numpy as np
import pytest

from keyseq.corpus import Document, LabelSequence, tokenize
from keyseq.crf import (
    CRF,
    build_training_design,
    forward,
    forward_backward,
    load_crf,
    make_objective,
    pack_params,
    position_scores,
    save_crf,
    sequence_score,
    train_crf,
    unpack_params,
    viterbi,
)
from keyseq.features import Alphabet, IndexedSequence, build_alphabet, index_sequence
from keyseq.linguistic import ParseTags
from oracles import (
    brute_best_labeling,
    brute_edge_marginals,
    brute_log_partition,
    brute_node_marginals,
    enumerate_labelings,
    finite_difference_gradient,
    labeling_score,
    max_relative_error,
)


def random_instance(rng, max_n=10, max_features=50):
    """Random (indexed sequence, transitions, emissions) triple."""
    n = rng.integers(1, max_n + 1)
    n_features = rng.integers(1, max_features + 1)
    rows = []
    for _ in range(n):
        k = rng.integers(0, min(n_features, 6) + 1)
        rows.append(np.sort(rng.choice(n_features, size=k, replace=False)).astype(np.int32))
    indexed = IndexedSequence(doc_id="r", indices=rows)
    transitions = rng.normal(scale=1.5, size=(2, 2))
    emissions = rng.normal(scale=1.5, size=(n_features, 2))
    return indexed, transitions, emissions


def toy_training_set(n_docs=6, length=5):
    """Separable data: feature "hot" appears exactly on KP positions."""
    alphabet = Alphabet()
    alphabet.add("hot")
    alphabet.add("cold")
    alphabet.freeze()
    indexed, labels = [], []
    for d in range(n_docs):
        rows, labs = [], []
        for t in range(length):
            if (t + d) % 2 == 0:
                rows.append(np.array([0], dtype=np.int32))
                labs.append("KP")
            else:
                rows.append(np.array([1], dtype=np.int32))
                labs.append("O")
        indexed.append(IndexedSequence(doc_id=f"t{d}", indices=rows))
        labels.append(LabelSequence(f"t{d}", labs))
    return alphabet, indexed, labels


# ---------------------------------------------------------------------------
# Labeling scores
# ---------------------------------------------------------------------------

def test_zero_weights_score_zero():
    scores = np.zeros((4, 2))
    transitions = np.zeros((2, 2))
    for lab in enumerate_labelings(4):
        assert sequence_score(scores, transitions, np.array(lab)) == 0.0


def test_single_feature_shifts_kp_start_labelings():
    scores = np.zeros((3, 2))
    scores[0, 0] = 1.0  # one feature, weight 1, fires for KP at position 0
    transitions = np.zeros((2, 2))
    for tail in enumerate_labelings(2):
        kp_first = sequence_score(scores, transitions, np.array((0,) + tail))
        o_first = sequence_score(scores, transitions, np.array((1,) + tail))
        assert kp_first == pytest.approx(o_first + 1.0)


def test_sequence_score_matches_direct_sum():
    rng = np.random.default_rng(0)
    for _ in range(20):
        indexed, transitions, emissions = random_instance(rng, max_n=6)
        scores = position_scores(indexed, emissions)
        for lab in enumerate_labelings(len(indexed)):
            expected = labeling_score(scores, transitions, lab)
            got = sequence_score(scores, transitions, np.array(lab))
            assert got == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_sequence_score_length_mismatch():
    with pytest.raises(ValueError):
        sequence_score(np.zeros((3, 2)), np.zeros((2, 2)), np.array([0, 1]))


# ---------------------------------------------------------------------------
# Forward-backward
# ---------------------------------------------------------------------------

def test_single_position_uniform():
    scores = np.zeros((1, 2))
    transitions = np.zeros((2, 2))
    _, log_z = forward(scores, transitions)
    assert log_z == pytest.approx(math.log(2), abs=1e-12)
    marginals, _, _ = forward_backward(scores, transitions)
    assert marginals[0] == pytest.approx([0.5, 0.5], abs=1e-12)


def test_forward_empty_sequence_rejected():
    with pytest.raises(ValueError):
        forward(np.zeros((0, 2)), np.zeros((2, 2)))


def test_inference_matches_enumeration():
    rng = np.random.default_rng(1)
    for _ in range(40):
        indexed, transitions, emissions = random_instance(rng, max_n=8)
        scores = position_scores(indexed, emissions)
        marginals, edges, log_z = forward_backward(scores, transitions)
        assert log_z == pytest.approx(
            brute_log_partition(scores, transitions), rel=1e-10)
        np.testing.assert_allclose(
            marginals, brute_node_marginals(scores, transitions), atol=1e-10)
        np.testing.assert_allclose(
            edges, brute_edge_marginals(scores, transitions), atol=1e-10)


def test_zero_transitions_marginals_are_position_softmax():
    rng = np.random.default_rng(2)
    scores = rng.normal(size=(6, 2))
    marginals, _, _ = forward_backward(scores, np.zeros((2, 2)))
    expected = np.exp(scores)
    expected /= expected.sum(axis=1, keepdims=True)
    np.testing.assert_allclose(marginals, expected, atol=1e-12)


def test_log_partition_dominates_any_labeling():
    rng = np.random.default_rng(3)
    for _ in range(10):
        indexed, transitions, emissions = random_instance(rng, max_n=7)
        scores = position_scores(indexed, emissions)
        _, log_z = forward(scores, transitions)
        for lab in enumerate_labelings(len(indexed)):
            assert log_z >= labeling_score(scores, transitions, lab) - 1e-9


def test_emission_shift_invariance():
    rng = np.random.default_rng(4)
    scores = rng.normal(size=(5, 2))
    transitions = rng.normal(size=(2, 2))
    marginals, _, log_z = forward_backward(scores, transitions)
    path, _ = viterbi(scores, transitions)

    shifted = scores.copy()
    shifted[2, :] += 3.7
    marginals2, _, log_z2 = forward_backward(shifted, transitions)
    path2, _ = viterbi(shifted, transitions)

    assert log_z2 == pytest.approx(log_z + 3.7, rel=1e-12)
    np.testing.assert_allclose(marginals2, marginals, atol=1e-12)
    assert np.array_equal(path, path2)


# ---------------------------------------------------------------------------
# Viterbi
# ---------------------------------------------------------------------------

def test_viterbi_zero_weights_all_o():
    path, score = viterbi(np.zeros((6, 2)), np.zeros((2, 2)))
    assert path.tolist() == [1] * 6
    assert score == 0.0


def test_viterbi_matches_brute_argmax():
    rng = np.random.default_rng(5)
    for _ in range(40):
        indexed, transitions, emissions = random_instance(rng, max_n=8)
        scores = position_scores(indexed, emissions)
        path, score = viterbi(scores, transitions)
        best, best_score = brute_best_labeling(scores, transitions)
        assert np.array_equal(path, best)
        assert score == pytest.approx(best_score, rel=1e-10, abs=1e-10)


def test_viterbi_tie_break_with_integer_scores():
    # integer-valued scores force exact ties; the O-preferring rule must
    # match the tuple-maximum oracle on every instance
    rng = np.random.default_rng(6)
    for _ in range(60):
        n = rng.integers(1, 6)
        scores = rng.integers(-1, 2, size=(n, 2)).astype(float)
        transitions = rng.integers(-1, 2, size=(2, 2)).astype(float)
        path, _ = viterbi(scores, transitions)
        best, _ = brute_best_labeling(scores, transitions)
        assert np.array_equal(path, best)


def test_viterbi_empty_sequence():
    path, score = viterbi(np.zeros((0, 2)), np.zeros((2, 2)))
    assert path.tolist() == [] and score == 0.0


# ---------------------------------------------------------------------------
# Objective and gradient
# ---------------------------------------------------------------------------

def random_design(rng, n_seqs=3, max_n=6, n_features=8):
    indexed, labels = [], []
    for d in range(n_seqs):
        n = int(rng.integers(1, max_n + 1))
        rows = [np.sort(rng.choice(n_features, size=int(rng.integers(0, 4)),
                                   replace=False)).astype(np.int32)
                for _ in range(n)]
        indexed.append(IndexedSequence(doc_id=f"d{d}", indices=rows))
        labels.append(LabelSequence(
            f"d{d}", [("KP", "O")[int(b)] for b in rng.integers(0, 2, size=n)]))
    return build_training_design(indexed, labels, n_features)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    for _ in range(8):
        design = random_design(rng)
        objective = make_objective(design, sigma=2.0)
        w = rng.normal(scale=0.5, size=4 + 2 * design.n_features)
        _, analytic = objective(w)
        numeric = finite_difference_gradient(lambda x: objective(x)[0], w)
        assert max_relative_error(analytic, numeric) < 1e-5


def test_transition_gradient_zero_on_balanced_single_positions():
    alphabet = Alphabet()
    alphabet.add("f")
    alphabet.freeze()
    indexed = [IndexedSequence("a", [np.array([0], dtype=np.int32)]),
               IndexedSequence("b", [np.array([0], dtype=np.int32)])]
    labels = [LabelSequence("a", ["KP"]), LabelSequence("b", ["O"])]
    design = build_training_design(indexed, labels, 1)
    objective = make_objective(design, sigma=10.0)
    _, grad = objective(np.zeros(6))
    transitions_grad = grad[:4]
    np.testing.assert_allclose(transitions_grad, 0.0, atol=1e-12)


def test_objective_value_matches_per_sequence_route():
    """Batched objective equals the sum of single-sequence NLL terms
    computed through the loop-based forward recursion."""
    rng = np.random.default_rng(8)
    n_features = 8
    indexed, labels = [], []
    for d in range(4):
        n = int(rng.integers(1, 7))
        rows = [np.sort(rng.choice(n_features, size=int(rng.integers(0, 4)),
                                   replace=False)).astype(np.int32)
                for _ in range(n)]
        indexed.append(IndexedSequence(doc_id=f"d{d}", indices=rows))
        labels.append(LabelSequence(
            f"d{d}", [("KP", "O")[int(b)] for b in rng.integers(0, 2, size=n)]))
    design = build_training_design(indexed, labels, n_features)
    sigma = 3.0
    w = rng.normal(scale=0.7, size=4 + 2 * n_features)
    value, _ = make_objective(design, sigma)(w)

    transitions, emissions = unpack_params(w, n_features)
    expected = 0.5 * float(w @ w) / sigma**2
    for iseq, lseq in zip(indexed, labels):
        scores = position_scores(iseq, emissions)
        gold = np.array([0 if lab == "KP" else 1 for lab in lseq.labels])
        _, log_z = forward(scores, transitions)
        expected += log_z - sequence_score(scores, transitions, gold)
    assert value == pytest.approx(expected, rel=1e-10)


def test_objective_invariant_under_sequence_permutation():
    rng = np.random.default_rng(9)
    n_features = 6
    indexed, labels = [], []
    for d in range(5):
        n = int(rng.integers(1, 6))
        rows = [np.sort(rng.choice(n_features, size=int(rng.integers(0, 3)),
                                   replace=False)).astype(np.int32)
                for _ in range(n)]
        indexed.append(IndexedSequence(doc_id=f"d{d}", indices=rows))
        labels.append(LabelSequence(
            f"d{d}", [("KP", "O")[int(b)] for b in rng.integers(0, 2, size=n)]))
    w = rng.normal(size=4 + 2 * n_features)
    forward_order = make_objective(
        build_training_design(indexed, labels, n_features), 5.0)(w)[0]
    reverse_order = make_objective(
        build_training_design(indexed[::-1], labels[::-1], n_features), 5.0)(w)[0]
    assert forward_order == pytest.approx(reverse_order, rel=1e-12)


def test_non_finite_objective_names_sequence():
    rng = np.random.default_rng(10)
    design = random_design(rng, n_seqs=2, n_features=3)
    objective = make_objective(design, sigma=10.0)
    huge = np.full(4 + 2 * 3, 1e308)
    with pytest.raises(FloatingPointError, match="training sequence"):
        objective(huge)


def test_pack_unpack_round_trip():
    rng = np.random.default_rng(11)
    transitions = rng.normal(size=(2, 2))
    emissions = rng.normal(size=(5, 2))
    t2, e2 = unpack_params(pack_params(transitions, emissions), 5)
    np.testing.assert_array_equal(transitions, t2)
    np.testing.assert_array_equal(emissions, e2)
    with pytest.raises(ValueError):
        unpack_params(np.zeros(7), 5)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def test_training_fits_separable_data():
    alphabet, indexed, labels = toy_training_set()
    model, result = train_crf(indexed, labels, alphabet)
    assert result.converged
    for iseq, lseq in zip(indexed, labels):
        assert model.decode(iseq).labels == lseq.labels


def test_training_objective_monotone_over_iterations():
    alphabet, indexed, labels = toy_training_set(n_docs=3)
    values = []
    for max_iter in range(1, 9):
        _, result = train_crf(indexed, labels, alphabet,
                              max_iterations=max_iter)
        values.append(result.objective)
    for earlier, later in zip(values, values[1:]):
        assert later <= earlier + 1e-9


def test_training_deterministic():
    alphabet, indexed, labels = toy_training_set()
    model_a, _ = train_crf(indexed, labels, alphabet)
    model_b, _ = train_crf(indexed, labels, alphabet)
    np.testing.assert_array_equal(model_a.transitions, model_b.transitions)
    np.testing.assert_array_equal(model_a.emissions, model_b.emissions)


def test_strong_prior_shrinks_weights():
    alphabet, indexed, labels = toy_training_set()
    tight, _ = train_crf(indexed, labels, alphabet, sigma=1e-3)
    loose, _ = train_crf(indexed, labels, alphabet, sigma=10.0)
    assert np.abs(tight.emissions).max() < 1e-3
    assert np.abs(tight.emissions).max() < np.abs(loose.emissions).max()


def test_training_rejects_empty_split():
    with pytest.raises(ValueError):
        build_training_design([], [], 3)


def test_training_reproduces_reference_labels():
    doc = Document(id="ref", title="",
                   body="Keyword extraction for social snippets",
                   gold_phrases=["keyword extraction", "social snippets"])
    seq = tokenize(doc)
    tags = ParseTags("ref", ["VB", "NN", "IN", "JJ", "NNS"],
                     ["VP", "NP", "PP", "NP", "NP"])
    from keyseq.corpus import align_gold_labels
    from keyseq.features import extract_features
    labels, _ = align_gold_labels(seq, doc.gold_phrases)
    assert labels.labels == ["KP", "KP", "O", "KP", "KP"]
    fvs = extract_features(seq, tags, None, feature_set="basic",
                           templates="compound")
    alphabet = build_alphabet([fvs])
    indexed = index_sequence(fvs, alphabet)
    model, _ = train_crf([indexed], [labels], alphabet)
    assert model.decode(indexed).labels == ["KP", "KP", "O", "KP", "KP"]


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def trained_toy_model():
    alphabet, indexed, labels = toy_training_set()
    model, _ = train_crf(indexed, labels, alphabet)
    return model, indexed


def test_save_load_round_trip(tmp_path):
    model, indexed = trained_toy_model()
    path = tmp_path / "model.crf"
    save_crf(model, path)
    loaded = load_crf(path)
    np.testing.assert_array_equal(model.transitions, loaded.transitions)
    np.testing.assert_array_equal(model.emissions, loaded.emissions)
    assert loaded.sigma == model.sigma
    held_out = IndexedSequence(
        "h", [np.array([0], dtype=np.int32), np.array([1], dtype=np.int32),
              np.array([], dtype=np.int32)])
    assert model.decode(held_out).labels == loaded.decode(held_out).labels
    # feature names map to the same columns after reload
    for name in ("hot", "cold"):
        assert loaded.alphabet.index_of(name) == model.alphabet.index_of(name)


def test_load_truncated_file(tmp_path):
    model, _ = trained_toy_model()
    path = tmp_path / "model.crf"
    save_crf(model, path)
    text = path.read_text("utf-8")
    path.write_text(text[: len(text) // 2].rsplit("\n", 1)[0], encoding="utf-8")
    with pytest.raises(ValueError):
        load_crf(path)


def test_load_rejects_bad_header(tmp_path):
    path = tmp_path / "model.crf"
    path.write_text("something-else v1 10 5\nF 0\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_crf(path)


def test_zero_feature_model_round_trip(tmp_path):
    alphabet = Alphabet()
    alphabet.freeze()
    model = CRF(alphabet=alphabet, transitions=np.zeros((2, 2)),
                emissions=np.zeros((0, 2)))
    path = tmp_path / "empty.crf"
    save_crf(model, path)
    loaded = load_crf(path)
    seq = IndexedSequence("z", [np.array([], dtype=np.int32)] * 4)
    assert loaded.decode(seq).labels == ["O"] * 4


def test_weights_survive_text_round_trip_exactly(tmp_path):
    rng = np.random.default_rng(12)
    alphabet = Alphabet()
    for i in range(3):
        alphabet.add(f"feat{i}")
    alphabet.freeze()
    model = CRF(alphabet=alphabet,
                transitions=rng.normal(size=(2, 2)) * math.pi,
                emissions=rng.normal(size=(3, 2)) / math.e)
    path = tmp_path / "pi.crf"
    save_crf(model, path)
    loaded = load_crf(path)
    np.testing.assert_array_equal(model.transitions, loaded.transitions)
    np.testing.assert_array_equal(model.emissions, loaded.emissions)
