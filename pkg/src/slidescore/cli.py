"""Command-line interface.

Verbs: fit, score, metrics, stats, project2d. Every flag can also come
from a JSON config file (--config); explicit flags win. Exit codes:
0 success, 2 usage error, 3 data error, 4 model error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from .embeddings import ProviderConfig
from .errors import (
    ChecksumMismatch,
    DimensionMismatch,
    EmptyDeck,
    LabelMismatch,
    ModelLoadError,
    ModelVersionMismatch,
    ParseError,
    SlideScoreError,
)
from .forest import ForestParams
from .imaging import compute_metrics, decode_image
from .latent import project2d
from .model_io import load_model, save_model
from .stats import RatingsMatrix, correlate_scores, cronbach_alpha, icc_2k, kendall_w

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_MODEL = 4

_MODEL_ERRORS = (ModelVersionMismatch, ChecksumMismatch, ModelLoadError, DimensionMismatch)

_DEFAULTS = {
    "provider": "stub",
    "dim": 512,
    "scorer": "forest",
    "method": "spearman",
    "trees": ForestParams().trees,
    "psi": ForestParams().subsample,
    "contamination": ForestParams().contamination,
    "seed": ForestParams().seed,
    "pca_k": 64,
}


def _add_provider_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--provider", choices=["runtime-model", "precomputed-file", "stub"], default=None
    )
    parser.add_argument("--provider-path", default=None, help="model or embedding file")
    parser.add_argument("--dim", type=int, default=None, help="embedding dimensionality")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slidescore",
        description="Score slides by anomaly distance from a reference corpus.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a quality model on a reference corpus")
    p_fit.add_argument("--corpus", required=True, help="root directory of slide images")
    p_fit.add_argument("--out", required=True, help="model file to write")
    p_fit.add_argument("--trees", type=int, default=None)
    p_fit.add_argument("--psi", type=int, default=None, help="per-tree subsample size")
    p_fit.add_argument("--contamination", type=float, default=None)
    p_fit.add_argument("--seed", type=int, default=None)
    p_fit.add_argument("--pca-k", type=int, default=None, help="kept PCA components")
    p_fit.add_argument("--deck-map", default=None, help="optional key,deck override CSV")
    _add_provider_flags(p_fit)

    p_score = sub.add_parser("score", help="score a deck against a fitted model")
    p_score.add_argument("--deck", required=True, help="directory of deck images")
    p_score.add_argument("--model", required=True)
    p_score.add_argument("--scorer", choices=["forest", "centroid"], default=None)
    p_score.add_argument("--out", required=True, help="per-slide CSV to write")
    _add_provider_flags(p_score)

    p_metrics = sub.add_parser("metrics", help="design-cue metrics only, no model")
    p_metrics.add_argument("--deck", required=True)
    p_metrics.add_argument("--out", required=True)

    p_stats = sub.add_parser("stats", help="correlation / reliability statistics")
    p_stats.add_argument("--scores", default=None, help="deck,score CSV (correlate mode)")
    p_stats.add_argument("--ratings", required=True, help="deck,rater... CSV matrix")
    p_stats.add_argument("--mode", choices=["correlate", "reliability"], required=True)
    p_stats.add_argument("--method", choices=["pearson", "spearman"], default=None)
    p_stats.add_argument("--out", required=True)

    p_proj = sub.add_parser("project2d", help="2-d latent projection with metrics")
    p_proj.add_argument("--corpus", required=True)
    p_proj.add_argument("--model", required=True)
    p_proj.add_argument("--out", required=True)
    _add_provider_flags(p_proj)

    for sp in (p_fit, p_score, p_metrics, p_stats, p_proj):
        sp.add_argument("--config", default=None, help="JSON file mirroring the flags")
    return parser


def _apply_config(args: argparse.Namespace) -> None:
    """Fill unset flags from the config file, then from the hard defaults."""
    if getattr(args, "config", None):
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ParseError(f"config {args.config} must hold a JSON object")
        for key, value in raw.items():
            dest = key.replace("-", "_")
            if hasattr(args, dest) and getattr(args, dest) is None:
                setattr(args, dest, value)
    for key, value in _DEFAULTS.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, value)


def _provider_config(args: argparse.Namespace) -> ProviderConfig:
    kind = args.provider
    path = args.provider_path
    return ProviderConfig(
        kind=kind,
        model_path=path if kind == "runtime-model" else None,
        file_path=path if kind == "precomputed-file" else None,
        dim=int(args.dim),
    )


def cmd_fit(args: argparse.Namespace) -> int:
    params = ForestParams(
        trees=int(args.trees),
        subsample=int(args.psi),
        contamination=float(args.contamination),
        seed=int(args.seed),
    )
    deck_map = corpus_mod.load_deck_map(args.deck_map) if args.deck_map else None
    model, manifest = corpus_mod.fit_model(
        args.corpus,
        _provider_config(args),
        params=params,
        pca_k=int(args.pca_k),
        deck_map=deck_map,
    )
    save_model(model, args.out)
    print(
        f"fitted on {manifest.count} slides across {len(manifest.decks)} decks: "
        f"k={model.pca.k}, psi={params.subsample}, trees={params.trees}, "
        f"flag_threshold={model.forest.flag_threshold:.6f}"
    )
    print(f"model written to {args.out}")
    return EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    report, metrics, manifest = corpus_mod.score_directory(
        args.deck, model, _provider_config(args), scorer=args.scorer
    )
    corpus_mod.write_score_csv(args.out, report, metrics)
    print(f"scored {manifest.count} slides; deck mean {report.deck_score:.6f}")
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace) -> int:
    try:
        manifest = corpus_mod.scan_corpus(args.deck)
    except corpus_mod.EmptyCorpus as exc:
        raise EmptyDeck(str(exc)) from exc
    keys, rows, failures = [], [], []
    for entry in manifest.entries:
        try:
            image = decode_image(entry.path.read_bytes())
            rows.append(compute_metrics(image))
            keys.append(entry.key)
        except SlideScoreError as exc:
            failures.append((entry.key, str(exc)))
    corpus_mod.write_metrics_csv(args.out, keys, rows)
    for key, message in failures:
        print(f"error: {key}: {message}", file=sys.stderr)
    print(f"wrote metrics for {len(keys)} slides to {args.out}")
    return EXIT_DATA if failures else EXIT_OK


def _read_scores_csv(path: str) -> tuple[list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["deck", "score"]:
            raise ParseError(f"{path}: expected header 'deck,score'")
        decks, values = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                decks.append(row[0])
                values.append(float(row[1]))
            except (IndexError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return decks, np.array(values)


def _read_ratings_csv(path: str) -> tuple[list[str], list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not header or header[0] != "deck" or len(header) < 3:
            raise ParseError(f"{path}: expected header 'deck,<rater>,...'")
        raters = header[1:]
        decks, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            decks.append(row[0])
    if not rows:
        raise ParseError(f"{path}: no rating rows")
    return decks, raters, np.array(rows)


def cmd_stats(args: argparse.Namespace) -> int:
    decks_r, raters, ratings = _read_ratings_csv(args.ratings)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if args.mode == "reliability":
            matrix = RatingsMatrix(ratings, subjects=tuple(decks_r), raters=tuple(raters))
            writer.writerow(["cronbach_alpha", "icc_2k", "kendall_w"])
            writer.writerow(
                [
                    corpus_mod.fmt_float(cronbach_alpha(matrix)),
                    corpus_mod.fmt_float(icc_2k(matrix)),
                    corpus_mod.fmt_float(kendall_w(matrix)),
                ]
            )
        else:
            if not args.scores:
                raise ParseError("correlate mode requires --scores")
            decks_s, scores = _read_scores_csv(args.scores)
            if sorted(decks_s) != sorted(decks_r):
                raise LabelMismatch(
                    f"deck labels differ between {args.scores} and {args.ratings}"
                )
            order = {deck: i for i, deck in enumerate(decks_r)}
            means = ratings.mean(axis=1)
            aligned = np.array([means[order[deck]] for deck in decks_s])
            result = correlate_scores(scores, aligned, method=args.method)
            writer.writerow(["method", "n", "coefficient", "p_value", "ci_low", "ci_high"])
            writer.writerow(
                [
                    result.method,
                    result.n,
                    corpus_mod.fmt_float(result.coefficient),
                    corpus_mod.fmt_float(result.p_value),
                    corpus_mod.fmt_float(result.ci_low),
                    corpus_mod.fmt_float(result.ci_high),
                ]
            )
    print(f"wrote {args.mode} report to {args.out}")
    return EXIT_OK


def cmd_project2d(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    provider_cfg = _provider_config(args)
    provider = corpus_mod.make_provider(provider_cfg)
    corpus_mod.check_provider_compatibility(model, provider)
    manifest = corpus_mod.scan_corpus(args.corpus)
    metrics, embeddings = corpus_mod.process_entries(manifest.entries, provider)
    projected = project2d(model.pca, embeddings)
    keys = [entry.key for entry in manifest.entries]
    corpus_mod.write_projection_csv(args.out, keys, projected, metrics)
    print(f"wrote 2-d projection for {manifest.count} slides to {args.out}")
    return EXIT_OK


_COMMANDS = {
    "fit": cmd_fit,
    "score": cmd_score,
    "metrics": cmd_metrics,
    "stats": cmd_stats,
    "project2d": cmd_project2d,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args)
        return _COMMANDS[args.command](args)
    except _MODEL_ERRORS as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (SlideScoreError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
