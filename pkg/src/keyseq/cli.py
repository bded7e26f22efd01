"""Command-line surface for the pipeline.

Stages compose via files only: `prepare` builds a corpus archive from a
dataset directory, `tag` attaches linguistic tags (parser sidecars or the
built-in fallback), `unsup` writes ranked phrases from the four
unsupervised extractors, `train`/`predict`/`eval` handle single models, and
`cv`/`cross`/`report` run the experiment suites. Exit codes: 0 success,
1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .corpus import load_dataset, tokenize
from .crf import CRF, load_crf, save_crf
from .baselines import (MaxEntModel, NaiveBayesModel, load_maxent, load_nb,
                        save_maxent, save_nb)
from .evaluation import (MetricsReport, PipelineConfig, cross_dataset,
                         cross_validate, extract_phrases, prepare_docs,
                         score_document, train_model, unsup_eval)
from .features import (FEATURE_SETS, TEMPLATE_LEVELS, build_alphabet,
                       extract_features, index_sequence)
from .linguistic import fallback_tag, load_tag_sidecar
from .store import (format_metrics_table, read_config, read_corpus_archive,
                    read_predictions, read_rankings, read_tags,
                    write_corpus_archive, write_corpus_stats, write_csv,
                    write_metrics_csv, write_predictions, write_rankings,
                    write_tags)
from .unsup import (METHOD_ABBREV, METHODS, build_corpus_stats, rank_document,
                    similar_documents)

MODEL_CHOICES = ("crf", "maxent", "nb")


class UsageError(Exception):
    """Invalid flag combination or argument value (exit code 2)."""


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(
        model=getattr(args, "model", "crf"),
        feature_set=args.feature_set,
        templates=args.templates,
        sigma=args.sigma,
        max_iterations=args.iterations,
        tol=args.tol,
        min_count=args.min_count,
        ukp_top_k=args.top,
        window=args.window,
        damping=args.damping,
        neighbors=args.neighbors,
        max_phrase_len=args.max_phrase_len,
        stem_match=args.stem,
    )


def _load_corpus_and_tags(corpus_path, tags_path):
    docs, labels, retained = read_corpus_archive(corpus_path)
    tags_map = read_tags(tags_path)
    missing = [d.id for d in docs if d.id not in tags_map]
    if missing:
        raise ValueError(f"{tags_path}: no tags for documents {missing[:5]}"
                         + (" ..." if len(missing) > 5 else ""))
    return docs, labels, retained, tags_map


def _rankings_features(rankings_path, top: int) -> dict[str, dict[str, list[str]]] | None:
    """Rankings file -> per-doc {flag name: top phrases} for the feature layer."""
    if rankings_path is None:
        return None
    raw = read_rankings(rankings_path)
    return {
        doc_id: {METHOD_ABBREV[m]: [p for p, _ in ranked[:top]]
                 for m, ranked in methods.items()}
        for doc_id, methods in raw.items()
    }


def _doc_features(docs, tags_map, rankings, config: PipelineConfig):
    seqs = {d.id: tokenize(d) for d in docs}
    if config.needs_rankings() and rankings is None:
        raise UsageError("feature set basic+title+ukp requires --rankings")
    fvs = []
    for doc_id in sorted(seqs):
        per_doc = rankings.get(doc_id) if rankings else None
        if config.needs_rankings() and per_doc is None:
            raise ValueError(f"rankings file has no entries for document {doc_id}")
        fvs.append(extract_features(seqs[doc_id], tags_map[doc_id], per_doc,
                                    config.feature_set, config.templates))
    return seqs, fvs


def _load_any_model(path) -> CRF | MaxEntModel | NaiveBayesModel:
    with open(path, "r", encoding="utf-8") as fh:
        tag = fh.readline().split()[:1]
    if tag == ["keyseq-crf"]:
        return load_crf(path)
    if tag == ["keyseq-maxent"]:
        return load_maxent(path)
    if tag == ["keyseq-nb"]:
        return load_nb(path)
    raise ValueError(f"{path}: unrecognized model file")


def _print_report(report: MetricsReport) -> None:
    print(format_metrics_table(report))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_prepare(args) -> int:
    docs = load_dataset(args.root)
    if not docs:
        raise ValueError(f"no documents found under {args.root}")
    prepared = prepare_docs(docs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_corpus_archive(out / "corpus.jsonl", docs, prepared.labels,
                         prepared.retained)
    dataset = args.dataset or Path(args.root).name
    n_retained = sum(len(v) for v in prepared.retained.values())
    n_terms = sum(len(s) for s in prepared.seqs.values())
    write_corpus_stats(out / "stats.csv", dataset, len(docs), n_retained, n_terms)
    print(f"dataset={dataset} documents={len(docs)} "
          f"retained_keyphrases={n_retained} total_terms={n_terms}")
    return 0


def cmd_tag(args) -> int:
    docs, _, _ = read_corpus_archive(args.corpus)
    tags = {}
    for doc in docs:
        seq = tokenize(doc)
        if args.fallback:
            tags[doc.id] = fallback_tag(seq)
        else:
            sidecar = Path(args.sidecars) / f"{doc.id}.tags"
            if not sidecar.exists():
                raise ValueError(f"missing sidecar {sidecar}")
            tags[doc.id] = load_tag_sidecar(sidecar, seq)
    write_tags(args.out, tags)
    print(f"tagged {len(tags)} documents "
          f"({'fallback tagger' if args.fallback else 'sidecars'})")
    return 0


def cmd_unsup(args) -> int:
    docs, _, _, tags_map = _load_corpus_and_tags(args.corpus, args.tags)
    seqs = {d.id: tokenize(d) for d in docs}
    stats = build_corpus_stats(list(seqs.values()))
    methods = METHODS if args.method == "all" else (args.method,)
    rankings: dict[str, dict[str, list[tuple[str, float]]]] = {}
    for doc_id in sorted(seqs):
        per_doc = {}
        for method in methods:
            neighbors = None
            if method == "ExpandRank":
                neighbors = [(seqs[other], sim) for other, sim in
                             similar_documents(doc_id, stats, args.neighbors)]
            ranked = rank_document(method, seqs[doc_id], tags_map[doc_id],
                                   stats=stats, neighbors=neighbors,
                                   window=args.window, damping=args.damping,
                                   max_len=args.max_phrase_len)
            per_doc[method] = ranked.phrases[:args.top]
        rankings[doc_id] = per_doc
    write_rankings(args.out, rankings)
    print(f"ranked {len(rankings)} documents with {len(methods)} method(s)")
    return 0


def cmd_train(args) -> int:
    docs, labels, _, tags_map = _load_corpus_and_tags(args.corpus, args.tags)
    config = _pipeline_config(args)
    rankings = _rankings_features(args.rankings, args.top)
    _, fvs = _doc_features(docs, tags_map, rankings, config)
    train_labels = [labels[f.doc_id] for f in fvs]
    alphabet = build_alphabet(fvs, config.min_count)
    model = train_model(config, fvs, train_labels, alphabet)
    if config.model == "crf":
        save_crf(model, args.out)
    elif config.model == "maxent":
        save_maxent(model, args.out)
    else:
        save_nb(model, args.out)
    print(f"trained {config.model} on {len(fvs)} documents "
          f"({len(alphabet)} features) -> {args.out}")
    return 0


def cmd_predict(args) -> int:
    model = _load_any_model(args.model_file)
    docs, _, _, tags_map = _load_corpus_and_tags(args.corpus, args.tags)
    config = _pipeline_config(args)
    rankings = _rankings_features(args.rankings, args.top)
    _, fvs = _doc_features(docs, tags_map, rankings, config)
    predictions = {f.doc_id: model.decode(index_sequence(f, model.alphabet))
                   for f in fvs}
    write_predictions(args.out, predictions)
    print(f"predicted {len(predictions)} documents -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    docs, _, retained = read_corpus_archive(args.corpus)
    predictions = read_predictions(args.predictions)
    seqs = {d.id: tokenize(d) for d in docs}
    report = MetricsReport(method=args.method_name, dataset=args.dataset)
    for doc_id in sorted(predictions):
        if doc_id not in seqs:
            raise ValueError(f"predictions reference unknown document {doc_id}")
        if not retained[doc_id]:
            report.excluded_docs += 1
            continue
        phrases = extract_phrases(seqs[doc_id], predictions[doc_id])
        report.rows.append(score_document(doc_id, "all", phrases.phrases,
                                          retained[doc_id], args.stem))
    write_metrics_csv(args.out, [report], micro=args.micro)
    _print_report(report)
    return 0


def cmd_cv(args) -> int:
    docs, _, _, tags_map = _load_corpus_and_tags(args.corpus, args.tags)
    config = _pipeline_config(args)
    report = cross_validate(docs, args.k, args.seed, config, tags_map,
                            dataset=args.dataset)
    write_metrics_csv(args.out, [report], micro=args.micro)
    _print_report(report)
    return 0


def cmd_cross(args) -> int:
    train_docs, _, _, train_tags = _load_corpus_and_tags(args.train_corpus,
                                                         args.train_tags)
    test_docs, _, _, test_tags = _load_corpus_and_tags(args.test_corpus,
                                                       args.test_tags)
    config = _pipeline_config(args)
    report = cross_dataset(train_docs, test_docs, config, train_tags,
                           test_tags, dataset=args.dataset)
    write_metrics_csv(args.out, [report], micro=args.micro)
    _print_report(report)
    return 0


def cmd_report(args) -> int:
    docs, _, _, tags_map = _load_corpus_and_tags(args.corpus, args.tags)
    base = _pipeline_config(args)

    if args.experiment == "features":
        rows = []
        for feature_set in FEATURE_SETS:
            config = dataclasses.replace(base, feature_set=feature_set)
            report = cross_validate(docs, args.k, args.seed, config, tags_map,
                                    dataset=args.dataset)
            rows.append([feature_set, config.model,
                         f"{report.macro_precision:.6f}",
                         f"{report.macro_recall:.6f}",
                         f"{report.macro_f1:.6f}"])
            print(f"{feature_set}: f1={report.macro_f1:.4f}")
        write_csv(args.out, ["feature_set", "model", "precision", "recall", "f1"], rows)
    elif args.experiment == "templates":
        rows = []
        for level in TEMPLATE_LEVELS:
            config = dataclasses.replace(base, templates=level)
            report = cross_validate(docs, args.k, args.seed, config, tags_map,
                                    dataset=args.dataset)
            rows.append([level, config.model,
                         f"{report.macro_precision:.6f}",
                         f"{report.macro_recall:.6f}",
                         f"{report.macro_f1:.6f}"])
            print(f"{level}: f1={report.macro_f1:.4f}")
        write_csv(args.out, ["templates", "model", "precision", "recall", "f1"], rows)
    else:  # unsup sweep
        rows = []
        for method in METHODS:
            for k, report in unsup_eval(docs, tags_map, method,
                                        list(range(1, args.top + 1)), base,
                                        dataset=args.dataset):
                rows.append([method, k,
                             f"{report.macro_precision:.6f}",
                             f"{report.macro_recall:.6f}",
                             f"{report.macro_f1:.6f}"])
            print(f"{method}: swept k=1..{args.top}")
        write_csv(args.out, ["method", "k", "precision", "recall", "f1"], rows)
    return 0


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=13, help="random seed")
    parser.add_argument("--out", required=True, help="output file or directory")
    parser.add_argument("--config", default=None,
                        help="key=value file providing flag defaults")


def _add_unsup_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--top", type=int, default=10,
                        help="ranked phrases kept per method")
    parser.add_argument("--window", type=int, default=10)
    parser.add_argument("--damping", type=float, default=0.85)
    parser.add_argument("--neighbors", type=int, default=5)
    parser.add_argument("--max-phrase-len", type=int, default=4)


def _add_pipeline_flags(parser: argparse.ArgumentParser, with_model: bool = True) -> None:
    if with_model:
        parser.add_argument("--model", choices=MODEL_CHOICES, default="crf")
    parser.add_argument("--feature-set", choices=FEATURE_SETS,
                        default="basic+title+ukp")
    parser.add_argument("--templates", choices=TEMPLATE_LEVELS,
                        default="compound")
    parser.add_argument("--sigma", type=float, default=10.0)
    parser.add_argument("--iterations", type=int, default=300)
    parser.add_argument("--tol", type=float, default=1e-5)
    parser.add_argument("--min-count", type=int, default=1)
    parser.add_argument("--stem", action="store_true",
                        help="Porter-stem both sides of phrase matching")
    _add_unsup_flags(parser)


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="keyseq",
        description="Keyphrase extraction as {KP, O} sequence labeling.")
    subparsers = parser.add_subparsers(dest="command", required=True)
    subs: dict[str, argparse.ArgumentParser] = {}

    p = subs["prepare"] = subparsers.add_parser(
        "prepare", help="tokenize and label a dataset directory")
    p.add_argument("root", help="directory of <id>.txt / <id>.kp files")
    p.add_argument("--dataset", default=None, help="dataset name for reports")
    _add_common(p)
    p.set_defaults(func=cmd_prepare)

    p = subs["tag"] = subparsers.add_parser(
        "tag", help="attach per-token linguistic tags")
    p.add_argument("corpus", help="corpus archive from prepare")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--sidecars", default=None,
                        help="directory of <id>.tags parser sidecar files")
    source.add_argument("--fallback", action="store_true",
                        help="use the built-in crude tagger")
    _add_common(p)
    p.set_defaults(func=cmd_tag)

    p = subs["unsup"] = subparsers.add_parser(
        "unsup", help="rank phrases with the unsupervised extractors")
    p.add_argument("corpus")
    p.add_argument("tags")
    p.add_argument("--method", choices=("all",) + METHODS, default="all")
    _add_unsup_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_unsup)

    p = subs["train"] = subparsers.add_parser("train", help="fit one model")
    p.add_argument("corpus")
    p.add_argument("tags")
    p.add_argument("--rankings", default=None,
                   help="rankings.csv from unsup (required for the ukp feature set)")
    _add_pipeline_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = subs["predict"] = subparsers.add_parser(
        "predict", help="label a corpus with a saved model")
    p.add_argument("model_file")
    p.add_argument("corpus")
    p.add_argument("tags")
    p.add_argument("--rankings", default=None)
    _add_pipeline_flags(p, with_model=False)
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = subs["eval"] = subparsers.add_parser(
        "eval", help="score predictions against retained gold")
    p.add_argument("corpus")
    p.add_argument("predictions")
    p.add_argument("--method-name", default="model")
    p.add_argument("--dataset", default="")
    p.add_argument("--stem", action="store_true")
    p.add_argument("--micro", action="store_true",
                   help="also emit the pooled-counts diagnostic row")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = subs["cv"] = subparsers.add_parser(
        "cv", help="k-fold cross validation")
    p.add_argument("corpus")
    p.add_argument("tags")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--dataset", default="")
    p.add_argument("--micro", action="store_true")
    _add_pipeline_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_cv)

    p = subs["cross"] = subparsers.add_parser(
        "cross", help="train on one corpus, evaluate on another")
    p.add_argument("train_corpus")
    p.add_argument("train_tags")
    p.add_argument("test_corpus")
    p.add_argument("test_tags")
    p.add_argument("--dataset", default="")
    p.add_argument("--micro", action="store_true")
    _add_pipeline_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_cross)

    p = subs["report"] = subparsers.add_parser(
        "report", help="experiment suites emitting figure-style CSVs")
    p.add_argument("experiment", choices=("features", "templates", "unsup"))
    p.add_argument("corpus")
    p.add_argument("tags")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--dataset", default="")
    _add_pipeline_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_report)

    return parser, subs


_TRUE_STRINGS = ("1", "true", "yes", "on")
_FALSE_STRINGS = ("0", "false", "no", "off")


def _apply_config_defaults(sub: argparse.ArgumentParser, config: dict[str, str]) -> None:
    actions = {a.dest: a for a in sub._actions}
    for key, value in config.items():
        action = actions.get(key)
        if action is None:
            raise UsageError(f"config key {key!r} is not a flag of this command")
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            lowered = value.lower()
            if lowered not in _TRUE_STRINGS + _FALSE_STRINGS:
                raise UsageError(f"config key {key!r}: boolean value expected, got {value!r}")
            action.default = lowered in _TRUE_STRINGS
            continue
        try:
            action.default = action.type(value) if action.type else value
        except (TypeError, ValueError):
            raise UsageError(f"config key {key!r}: invalid value {value!r}") from None
        if action.choices is not None and action.default not in action.choices:
            raise UsageError(f"config key {key!r}: {value!r} is not one of "
                             f"{tuple(action.choices)}")


def _scan_config_path(argv: list[str]) -> str | None:
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if token.startswith("--config="):
            return token.partition("=")[2]
    return None


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser, subs = build_parser()
    try:
        config_path = _scan_config_path(argv)
        if config_path is not None and argv and argv[0] in subs:
            _apply_config_defaults(subs[argv[0]], read_config(config_path))
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
