"""Shared fixtures.

The "golden" document is small enough to derive every expected value by hand:

    title:  Social snippets
    body:   Keyword extraction for social snippets

Token stream (title is sentence 0, body sentence 1):

    pos  surface     norm        L1   L2   sent
    0    Social      social      JJ   NP   0
    1    snippets    snippets    NNS  NP   0
    2    Keyword     keyword     VB   VP   1
    3    extraction  extraction  NN   NP   1
    4    for         for         IN   PP   1
    5    social      social      JJ   NP   1
    6    snippets    snippets    NNS  NP   1

Gold phrases "keyword extraction" and "social snippets" align at spans
(2,4), (0,2) and (5,7), so labels are KP KP KP KP O KP KP. All four
unsupervised methods are stubbed to rank "social snippets" first, which puts
positions 0, 1, 5, 6 inside a ranked phrase and leaves 2, 3, 4 uncovered.
"""

from __future__ import annotations

import pytest

from keyseq.corpus import Document
from keyseq.linguistic import ParseTags


@pytest.fixture()
def golden_doc() -> Document:
    return Document(
        id="golden",
        title="Social snippets",
        body="Keyword extraction for social snippets",
        gold_phrases=["keyword extraction", "social snippets"],
    )


@pytest.fixture()
def golden_tags() -> ParseTags:
    return ParseTags(
        "golden",
        ["JJ", "NNS", "VB", "NN", "IN", "JJ", "NNS"],
        ["NP", "NP", "VP", "NP", "PP", "NP", "NP"],
    )


@pytest.fixture()
def golden_rankings() -> dict[str, list[str]]:
    return {
        "TFIDF": ["social snippets"],
        "TR": ["social snippets"],
        "SR": ["social snippets"],
        "ER": ["social snippets"],
    }


@pytest.fixture()
def golden_labels() -> list[str]:
    return ["KP", "KP", "KP", "KP", "O", "KP", "KP"]
