"""File formats connecting the pipeline stages.

Every artifact is plain text and written deterministically (documents sorted
by id, JSON keys sorted) so reruns on unchanged inputs are byte-identical:

- corpus archive: JSON lines with id, title, body, gold, tokens, labels,
  retained — the output of prepare and the input of every later stage;
- tags: JSON lines with id, l1, l2;
- rankings: CSV `doc_id,method,rank,phrase,score`;
- predictions: JSON lines with id, labels;
- metrics: CSV `method,dataset,fold,doc_id,precision,recall,f1` with MACRO
  summary rows (and an optional MICRO diagnostic row);
- config: `key=value` lines, `#` comments.
"""

from __future__ import annotations

import csv
import json

from .corpus import Document, LabelSequence, tokenize
from .evaluation import MetricsReport
from .linguistic import ParseTags
from .unsup import METHODS


def _write_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True, ensure_ascii=True) + "\n")


def _read_jsonl(path):
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: invalid JSON ({exc})") from None


# ---------------------------------------------------------------------------
# Corpus archive
# ---------------------------------------------------------------------------

def write_corpus_archive(path, docs: list[Document], labels: dict[str, LabelSequence],
                         retained: dict[str, list[str]]) -> None:
    records = []
    for doc in sorted(docs, key=lambda d: d.id):
        seq = tokenize(doc)
        records.append({
            "id": doc.id,
            "title": doc.title,
            "body": doc.body,
            "gold": list(doc.gold_phrases),
            "tokens": [t.surface for t in seq.tokens],
            "labels": list(labels[doc.id].labels),
            "retained": list(retained[doc.id]),
        })
    _write_jsonl(path, records)


def read_corpus_archive(
    path,
) -> tuple[list[Document], dict[str, LabelSequence], dict[str, list[str]]]:
    """Load the archive; tokens are re-derived from title/body and verified
    against the stored surfaces so stored labels always align."""
    docs, labels, retained = [], {}, {}
    for rec in _read_jsonl(path):
        try:
            doc = Document(id=rec["id"], title=rec["title"], body=rec["body"],
                           gold_phrases=list(rec["gold"]))
            stored_tokens = rec["tokens"]
            stored_labels = rec["labels"]
            stored_retained = rec["retained"]
        except KeyError as exc:
            raise ValueError(f"{path}: record missing field {exc}") from None
        seq = tokenize(doc)
        if [t.surface for t in seq.tokens] != stored_tokens:
            raise ValueError(f"{path}: tokenization of {doc.id} does not match the archive")
        if len(stored_labels) != len(seq):
            raise ValueError(f"{path}: {doc.id} has {len(stored_labels)} labels for {len(seq)} tokens")
        docs.append(doc)
        labels[doc.id] = LabelSequence(doc.id, list(stored_labels))
        retained[doc.id] = list(stored_retained)
    if not docs:
        raise ValueError(f"{path}: empty corpus archive")
    return docs, labels, retained


def write_corpus_stats(path, dataset: str, documents: int,
                       retained_keyphrases: int, total_terms: int) -> None:
    write_csv(path, ["dataset", "documents", "retained_keyphrases", "total_terms"],
              [[dataset, documents, retained_keyphrases, total_terms]])


# ---------------------------------------------------------------------------
# Tags
# ---------------------------------------------------------------------------

def write_tags(path, tags: dict[str, ParseTags]) -> None:
    _write_jsonl(path, ({"id": doc_id, "l1": list(t.l1), "l2": list(t.l2)}
                        for doc_id, t in sorted(tags.items())))


def read_tags(path) -> dict[str, ParseTags]:
    out = {}
    for rec in _read_jsonl(path):
        try:
            tags = ParseTags(rec["id"], list(rec["l1"]), list(rec["l2"]))
        except KeyError as exc:
            raise ValueError(f"{path}: record missing field {exc}") from None
        if len(tags.l1) != len(tags.l2):
            raise ValueError(f"{path}: {tags.doc_id} has {len(tags.l1)} L1 tags for {len(tags.l2)} L2 tags")
        out[tags.doc_id] = tags
    return out


# ---------------------------------------------------------------------------
# Rankings
# ---------------------------------------------------------------------------

def write_rankings(path, rankings: dict[str, dict[str, list[tuple[str, float]]]]) -> None:
    """rankings: doc_id -> method name -> [(phrase, score)] best first."""
    rows = []
    for doc_id in sorted(rankings):
        for method in METHODS:
            for rank, (phrase, score) in enumerate(rankings[doc_id].get(method, []), 1):
                rows.append([doc_id, method, rank, phrase, f"{score:.17g}"])
    write_csv(path, ["doc_id", "method", "rank", "phrase", "score"], rows)


def read_rankings(path) -> dict[str, dict[str, list[tuple[str, float]]]]:
    out: dict[str, dict[str, list[tuple[str, float]]]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["doc_id", "method", "rank", "phrase", "score"]:
            raise ValueError(f"{path}: unexpected rankings header {header}")
        for row in reader:
            if len(row) != 5:
                raise ValueError(f"{path}: malformed rankings row {row}")
            doc_id, method, rank, phrase, score = row
            if method not in METHODS:
                raise ValueError(f"{path}: unknown method {method!r}")
            bucket = out.setdefault(doc_id, {}).setdefault(method, [])
            if int(rank) != len(bucket) + 1:
                raise ValueError(f"{path}: ranks for {doc_id}/{method} are not consecutive from 1")
            bucket.append((phrase, float(score)))
    return out


# ---------------------------------------------------------------------------
# Predictions
# ---------------------------------------------------------------------------

def write_predictions(path, predictions: dict[str, LabelSequence]) -> None:
    _write_jsonl(path, ({"id": doc_id, "labels": list(p.labels)}
                        for doc_id, p in sorted(predictions.items())))


def read_predictions(path) -> dict[str, LabelSequence]:
    out = {}
    for rec in _read_jsonl(path):
        try:
            out[rec["id"]] = LabelSequence(rec["id"], list(rec["labels"]))
        except KeyError as exc:
            raise ValueError(f"{path}: record missing field {exc}") from None
    return out


# ---------------------------------------------------------------------------
# Metrics and generic CSV
# ---------------------------------------------------------------------------

def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


METRICS_HEADER = ["method", "dataset", "fold", "doc_id",
                  "precision", "recall", "f1"]


def metrics_rows(report: MetricsReport, micro: bool = False) -> list[list[str]]:
    def fmt(v: float) -> str:
        return f"{v:.6f}"

    rows = [[report.method, report.dataset, r.fold, r.doc_id,
             fmt(r.precision), fmt(r.recall), fmt(r.f1)] for r in report.rows]
    for fold, p, r, f1 in report.fold_macros():
        if fold == "all":
            # the overall MACRO row below already covers this fold
            continue
        rows.append([report.method, report.dataset, fold, "MACRO",
                     fmt(p), fmt(r), fmt(f1)])
    rows.append([report.method, report.dataset, "all", "MACRO",
                 fmt(report.macro_precision), fmt(report.macro_recall),
                 fmt(report.macro_f1)])
    if micro:
        p, r, f1 = report.micro()
        rows.append([report.method, report.dataset, "all", "MICRO",
                     fmt(p), fmt(r), fmt(f1)])
    return rows


def write_metrics_csv(path, reports: list[MetricsReport], micro: bool = False) -> None:
    rows = []
    for report in reports:
        rows.extend(metrics_rows(report, micro))
    write_csv(path, METRICS_HEADER, rows)


def format_metrics_table(report: MetricsReport) -> str:
    """Compact human-readable summary for standard output."""
    lines = [
        f"method={report.method} dataset={report.dataset} "
        f"docs={len(report.rows)} excluded_zero_gold={report.excluded_docs}",
        f"{'fold':>8}  {'precision':>9}  {'recall':>9}  {'f1':>9}",
    ]
    fold_rows = report.fold_macros()
    if len(fold_rows) > 1 or (fold_rows and fold_rows[0][0] != "all"):
        for fold, p, r, f1 in fold_rows:
            lines.append(f"{fold:>8}  {p:9.4f}  {r:9.4f}  {f1:9.4f}")
    lines.append(f"{'all':>8}  {report.macro_precision:9.4f}  "
                 f"{report.macro_recall:9.4f}  {report.macro_f1:9.4f}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------

def read_config(path) -> dict[str, str]:
    """`key=value` lines; blank lines and `#` comments ignored."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out
