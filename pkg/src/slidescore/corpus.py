"""Corpus ingestion and the end-to-end fit/score pipelines.

A corpus is a directory tree of PNG/JPEG slides; the top-level
subdirectory names the deck (loose files at the root form deck "_root").
Per-slide work (decode, metrics, embed) fans out to a bounded thread pool
with results reassembled in input order, so runs stay deterministic.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import ProviderConfig, make_provider
from .errors import (
    DimensionMismatch,
    EmptyCorpus,
    EmptyDeck,
    SlideScoreError,
    UnreadableDirectory,
)
from .forest import (
    AnomalyReport,
    ForestParams,
    centroid_fit,
    forest_fit,
    score_deck,
)
from .imaging import METRIC_NAMES, MetricVector, compute_metrics, decode_image
from .latent import fuse, pca_fit, pca_project, scaler_apply, scaler_fit
from .model_io import ProviderFingerprint, QualityModel, utc_timestamp

IMAGE_EXTENSIONS = frozenset({".png", ".jpg", ".jpeg"})
ROOT_DECK = "_root"
DEFAULT_WORKERS = 8
FLOAT_FORMAT = ".17g"


@dataclass(frozen=True)
class CorpusEntry:
    key: str
    deck: str
    path: Path


@dataclass(frozen=True)
class CorpusManifest:
    root: Path
    entries: tuple[CorpusEntry, ...]

    @property
    def count(self) -> int:
        return len(self.entries)

    @property
    def decks(self) -> tuple[str, ...]:
        seen = dict.fromkeys(entry.deck for entry in self.entries)
        return tuple(seen)


def scan_corpus(
    root: str | Path,
    extensions: frozenset[str] = IMAGE_EXTENSIONS,
    deck_map: dict[str, str] | None = None,
) -> CorpusManifest:
    """Recursively list corpus images in deterministic lexicographic order.

    Keys are corpus-relative POSIX paths; an optional deck_map overrides
    the directory-derived deck id per key.
    """
    root = Path(root)
    if not root.is_dir():
        raise UnreadableDirectory(f"{root} is not a readable directory")
    entries = []
    for path in sorted(root.rglob("*")):
        if not path.is_file() or path.suffix.lower() not in extensions:
            continue
        rel = path.relative_to(root)
        key = rel.as_posix()
        deck = rel.parts[0] if len(rel.parts) > 1 else ROOT_DECK
        if deck_map and key in deck_map:
            deck = deck_map[key]
        entries.append(CorpusEntry(key=key, deck=deck, path=path))
    if not entries:
        raise EmptyCorpus(f"no images under {root}")
    return CorpusManifest(root=root, entries=tuple(entries))


def load_deck_map(path: str | Path) -> dict[str, str]:
    """Read a `key,deck` override CSV."""
    mapping = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["key", "deck"]:
            raise SlideScoreError(f"{path}: expected header 'key,deck'")
        for row in reader:
            if len(row) >= 2:
                mapping[row[0]] = row[1]
    return mapping


def _process_slide(entry: CorpusEntry, provider) -> tuple[MetricVector, np.ndarray]:
    try:
        image = decode_image(entry.path.read_bytes())
        metrics = compute_metrics(image)
        embedding = provider.embed(image, key=entry.key)
    except SlideScoreError as exc:
        raise type(exc)(f"{entry.key}: {exc}") from exc
    if embedding.dim != provider.dim:
        raise DimensionMismatch(
            f"{entry.key}: provider returned {embedding.dim}-d, expected {provider.dim}"
        )
    return metrics, embedding.values


def process_entries(
    entries, provider, workers: int = DEFAULT_WORKERS
) -> tuple[list[MetricVector], np.ndarray]:
    """Decode, measure, and embed slides concurrently, preserving order."""
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(lambda e: _process_slide(e, provider), entries))
    metrics = [m for m, _ in results]
    embeddings = np.array([v for _, v in results])
    return metrics, embeddings


def fit_model(
    corpus_root: str | Path,
    provider_cfg: ProviderConfig,
    params: ForestParams | None = None,
    pca_k: int = 64,
    deck_map: dict[str, str] | None = None,
    workers: int = DEFAULT_WORKERS,
) -> tuple[QualityModel, CorpusManifest]:
    """Fit PCA, scaler, forest, and centroid on a reference corpus."""
    params = params or ForestParams()
    manifest = scan_corpus(corpus_root, deck_map=deck_map)
    provider = make_provider(provider_cfg)
    metrics, embeddings = process_entries(manifest.entries, provider, workers)
    pca = pca_fit(embeddings, k=pca_k)
    raw = np.array(
        [fuse(pca_project(pca, emb), met) for emb, met in zip(embeddings, metrics)]
    )
    scaler = scaler_fit(raw)
    descriptors = np.array([scaler_apply(scaler, row) for row in raw])
    forest = forest_fit(descriptors, params)
    centroid = centroid_fit(descriptors)
    fingerprint = ProviderFingerprint(*provider.fingerprint())
    model = QualityModel(
        pca=pca,
        scaler=scaler,
        forest=forest,
        centroid=centroid,
        provider=fingerprint,
        created=utc_timestamp(),
    )
    return model, manifest


def describe_slides(
    entries, model: QualityModel, provider, workers: int = DEFAULT_WORKERS
) -> tuple[list[MetricVector], np.ndarray, np.ndarray]:
    """Metrics, embeddings, and standardized descriptors for a slide list."""
    metrics, embeddings = process_entries(entries, provider, workers)
    descriptors = np.array(
        [
            scaler_apply(model.scaler, fuse(pca_project(model.pca, emb), met))
            for emb, met in zip(embeddings, metrics)
        ]
    )
    return metrics, embeddings, descriptors


def check_provider_compatibility(model: QualityModel, provider) -> None:
    """Fail fast when the configured provider cannot feed this model."""
    if provider.dim != model.provider.dim:
        raise DimensionMismatch(
            f"provider dim {provider.dim} != model fingerprint dim {model.provider.dim}"
        )


def score_directory(
    deck_root: str | Path,
    model: QualityModel,
    provider_cfg: ProviderConfig,
    scorer: str = "forest",
    workers: int = DEFAULT_WORKERS,
) -> tuple[AnomalyReport, list[MetricVector], CorpusManifest]:
    """Score every slide in a directory with the forest or centroid scorer."""
    if scorer not in ("forest", "centroid"):
        raise ValueError(f"unknown scorer: {scorer!r}")
    provider = make_provider(provider_cfg)
    check_provider_compatibility(model, provider)
    try:
        manifest = scan_corpus(deck_root)
    except EmptyCorpus as exc:
        raise EmptyDeck(str(exc)) from exc
    metrics, _, descriptors = describe_slides(manifest.entries, model, provider, workers)
    scoring_model = model.forest if scorer == "forest" else model.centroid
    keys = [entry.key for entry in manifest.entries]
    report = score_deck(scoring_model, descriptors, keys)
    return report, metrics, manifest


def fmt_float(value: float) -> str:
    return format(value, FLOAT_FORMAT)


def write_score_csv(path: str | Path, report: AnomalyReport, metrics) -> None:
    """Per-slide scores plus metrics, ending with the deck-mean summary row."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["key", "anomaly", "flagged"] + list(METRIC_NAMES))
        for slide, metric in zip(report.slides, metrics):
            flagged = "" if slide.flagged is None else str(int(slide.flagged))
            writer.writerow(
                [slide.key, fmt_float(slide.anomaly), flagged]
                + [fmt_float(v) for v in metric.as_array()]
            )
        writer.writerow(
            ["DECK_MEAN", fmt_float(report.deck_score), ""] + [""] * len(METRIC_NAMES)
        )


def write_metrics_csv(path: str | Path, keys, metrics) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["key"] + list(METRIC_NAMES))
        for key, metric in zip(keys, metrics):
            writer.writerow([key] + [fmt_float(v) for v in metric.as_array()])


def write_projection_csv(path: str | Path, keys, projected, metrics) -> None:
    """The 2-d latent projection colored by each metric, ready for plotting."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["key", "pc1", "pc2"] + list(METRIC_NAMES))
        for key, point, metric in zip(keys, projected, metrics):
            writer.writerow(
                [key, fmt_float(point[0]), fmt_float(point[1])]
                + [fmt_float(v) for v in metric.as_array()]
            )
