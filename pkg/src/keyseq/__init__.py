"""keyseq: keyphrase extraction as {KP, O} sequence labeling.

Submodules: corpus (tokenization, gold alignment, folds), linguistic (tag
sidecars + fallback tagger), unsup (TFIDF/TextRank/SingleRank/ExpandRank),
features (per-position features and templates), crf (linear-chain tagger),
baselines (MaxEnt and Naive Bayes), evaluation (phrase scoring and
experiment drivers), synth (synthetic corpora), store (artifact formats),
cli (command-line surface).
"""

__version__ = "0.1.0"

from . import (baselines, cli, corpus, crf, evaluation, features, linguistic,
               optimize, porter, store, synth, unsup)

__all__ = [
    "__version__", "baselines", "cli", "corpus", "crf", "evaluation",
    "features", "linguistic", "optimize", "porter", "store", "synth", "unsup",
]
