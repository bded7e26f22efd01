"""Deterministic synthetic corpora for end-to-end checks.

Two generators share one capitalized-word pool, partitioned per document so
that within a document keyphrase strings never collide with distractor
strings, while across documents every word plays both roles (word identity
carries no global signal).

- Trigger corpus: a capitalized word pair is a keyphrase exactly when it
  follows the token "propose". The second word of a pair sees only its
  local window, which is identically distributed for keyphrase and
  distractor pairs, so a per-token classifier cannot recover the rule
  without knowing the previous label; a sequence model can.
- Title corpus: a capitalized word pair is a keyphrase exactly when both
  words appear in the document title, so the in-title feature layer is the
  only separating signal.
"""

from __future__ import annotations

import random
from pathlib import Path

from .corpus import Document

CAP_POOL = (
    "Anchor", "Basalt", "Cobalt", "Dunite", "Ember", "Falcon",
    "Garnet", "Harbor", "Indigo", "Jasper", "Krypton", "Lumen",
    "Marble", "Nickel", "Onyx", "Pyrite", "Quartz", "Rubin",
    "Saffron", "Topaz", "Umber", "Vortex", "Willow", "Zircon",
)

FILLERS = (
    "analysis", "corpus", "dataset", "feature", "graphs", "kernel",
    "labels", "margin", "matrix", "metric", "models", "network",
    "pipeline", "sample", "signal", "tensor", "tokens", "vector",
    "window", "zones",
)

TRIGGER = "propose"
DECOY_INTROS = ("study", "examines", "reports")
PAIR_INTROS = ("covers", "includes", "presents")
LONE_INTRO = "mentions"


def _sentence(words: list[str]) -> str:
    return " ".join(words[:-1] + [words[-1] + "."])


def _fill(rng: random.Random, n: int) -> list[str]:
    return [rng.choice(FILLERS) for _ in range(n)]


def make_trigger_corpus(n_docs: int = 500, seed: int = 13) -> list[Document]:
    """Keyphrase rule: capitalized pair immediately after "propose"."""
    rng = random.Random(seed)
    docs = []
    for i in range(n_docs):
        words = rng.sample(CAP_POOL, 8)
        trig_pairs = [(words[0], words[1]), (words[2], words[3])]
        decoy_pairs = [(words[4], words[5]), (words[6], words[7])]
        f = lambda: rng.choice(FILLERS)  # noqa: E731

        sentences = [
            _sentence(["The", f(), f(), TRIGGER, *trig_pairs[0], f(), f()]),
            _sentence(["The", f(), f(), TRIGGER, *trig_pairs[1], f()]),
            _sentence(["The", f(), f(), rng.choice(DECOY_INTROS), *decoy_pairs[0], f()]),
            _sentence(["The", f(), rng.choice(DECOY_INTROS), *decoy_pairs[1], f()]),
            _sentence(["The", f(), LONE_INTRO, words[0], "over", f()]),
            _sentence(["The", f(), TRIGGER, f(), f()]),
        ]
        rng.shuffle(sentences)
        docs.append(Document(
            id=f"syn{i:04d}",
            title=" ".join(["The"] + _fill(rng, 3)),
            body="\n".join(sentences),
            gold_phrases=[" ".join(p) for p in trig_pairs],
        ))
    return docs


def make_title_corpus(n_docs: int = 150, seed: int = 13) -> list[Document]:
    """Keyphrase rule: capitalized pair whose words appear in the title."""
    rng = random.Random(seed)
    docs = []
    for i in range(n_docs):
        words = rng.sample(CAP_POOL, 8)
        title_pairs = [(words[0], words[1]), (words[2], words[3])]
        decoy_pairs = [(words[4], words[5]), (words[6], words[7])]
        f = lambda: rng.choice(FILLERS)  # noqa: E731

        pair_sentences = [
            _sentence(["The", f(), rng.choice(PAIR_INTROS), *pair, "and", f()])
            for pair in title_pairs + decoy_pairs
        ]
        rng.shuffle(pair_sentences)
        sentences = pair_sentences + [_sentence(["The", f(), f(), f(), f()])]
        docs.append(Document(
            id=f"ttl{i:04d}",
            title=" ".join(["The", *title_pairs[0], "of", *title_pairs[1], "study"]),
            body="\n".join(sentences),
            gold_phrases=[" ".join(p) for p in title_pairs],
        ))
    return docs


def write_dataset(docs: list[Document], root) -> None:
    """Materialize documents in the on-disk dataset layout: `<id>.txt` with
    the title on line one and body lines after it, plus `<id>.kp` with one
    gold phrase per line."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for doc in docs:
        (root / f"{doc.id}.txt").write_text(
            doc.title + "\n" + doc.body + "\n", encoding="utf-8")
        (root / f"{doc.id}.kp").write_text(
            "".join(g + "\n" for g in doc.gold_phrases), encoding="utf-8")
