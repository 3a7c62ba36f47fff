"""Slide embedding providers.

Three interchangeable sources produce a unit-norm vector per slide: a
runtime neural model (ONNX), a precomputed-embedding table (CSV), and a
deterministic stub that needs no weights at all. Providers are immutable
after construction and safe to share across workers.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    EmbeddingLookupMiss,
    ModelLoadError,
    ParseError,
)
from .imaging import SlideImage, _resize_bilinear

THUMBNAIL_SIZE = 224
DEFAULT_DIM = 512
MIN_STUB_DIM = 8

PROVIDER_KINDS = ("runtime-model", "precomputed-file", "stub")


@dataclass(frozen=True)
class Embedding:
    """Unit-norm embedding vector."""

    values: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ProviderConfig:
    """Which embedding source to use and what dimensionality to expect."""

    kind: str
    model_path: str | None = None
    file_path: str | None = None
    dim: int = DEFAULT_DIM

    def __post_init__(self):
        if self.kind not in PROVIDER_KINDS:
            raise ValueError(f"unknown provider kind: {self.kind!r}")
        if self.kind == "runtime-model" and not self.model_path:
            raise ValueError("runtime-model provider requires model_path")
        if self.kind == "precomputed-file" and not self.file_path:
            raise ValueError("precomputed-file provider requires file_path")
        if self.dim < 1:
            raise ValueError("dim must be positive")


def thumbnail(img: SlideImage, size: int = THUMBNAIL_SIZE) -> np.ndarray:
    """Square 8-bit thumbnail, aspect ratio ignored (plain squash)."""
    resized = np.clip(_resize_bilinear(img.pixels, size, size), 0.0, 1.0)
    return np.round(resized * 255.0).astype(np.uint8)


def _normalize(values: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(values))
    if norm == 0.0:
        raise ParseError("zero vector cannot be normalized")
    return values / norm


def stub_embed(img: SlideImage, dim: int = DEFAULT_DIM) -> Embedding:
    """Deterministic pseudo-embedding that needs no model weights.

    The 224 px thumbnail bytes are hashed (blake2b, 64-bit digest) and the
    digest seeds a PCG64 generator that draws `dim` standard normals, which
    are then L2-normalized. Identical thumbnails give identical vectors.
    """
    if dim < MIN_STUB_DIM:
        raise ValueError(f"stub dim must be >= {MIN_STUB_DIM}")
    digest = hashlib.blake2b(thumbnail(img).tobytes(), digest_size=8).digest()
    seed = int.from_bytes(digest, "big")
    rng = np.random.Generator(np.random.PCG64(seed))
    return Embedding(_normalize(rng.standard_normal(dim)))


def load_precomputed(file_path: str | Path) -> dict[str, np.ndarray]:
    """Load a key -> unit vector table from a `key,v0,...` CSV file."""
    path = Path(file_path)
    table: dict[str, np.ndarray] = {}
    dim: int | None = None
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or header[0] != "key":
                raise ParseError(f"{path}: expected header starting with 'key'")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                key, raw = row[0], row[1:]
                if dim is None:
                    dim = len(raw)
                    if dim == 0:
                        raise ParseError(f"{path}:{lineno}: row has no vector values")
                elif len(raw) != dim:
                    raise DimensionMismatch(
                        f"{path}:{lineno}: row length {len(raw)} != {dim}"
                    )
                try:
                    values = np.array([float(v) for v in raw])
                except ValueError as exc:
                    raise ParseError(f"{path}:{lineno}: {exc}") from exc
                if not np.all(np.isfinite(values)):
                    raise ParseError(f"{path}:{lineno}: non-finite value")
                table[key] = _normalize(values)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not table:
        raise ParseError(f"{path}: no embedding rows")
    return table


def _file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class StubProvider:
    """Hash-seeded pseudo-embeddings; the default for model-free runs."""

    kind = "stub"

    def __init__(self, dim: int = DEFAULT_DIM):
        self.dim = dim

    def embed(self, img: SlideImage, key: str | None = None) -> Embedding:
        return stub_embed(img, self.dim)

    def fingerprint(self) -> tuple[str, int, str]:
        return (self.kind, self.dim, "")


class PrecomputedProvider:
    """Embeddings looked up by slide key from a CSV table."""

    kind = "precomputed-file"

    def __init__(self, file_path: str | Path, dim: int = DEFAULT_DIM):
        self._path = Path(file_path)
        self._table = load_precomputed(self._path)
        table_dim = next(iter(self._table.values())).shape[0]
        if table_dim != dim:
            raise DimensionMismatch(
                f"precomputed table holds {table_dim}-d vectors, expected {dim}"
            )
        self.dim = dim
        self._hash = _file_sha256(self._path)

    def embed(self, img: SlideImage, key: str | None = None) -> Embedding:
        if key is None or key not in self._table:
            raise EmbeddingLookupMiss(f"no precomputed embedding for key {key!r}")
        return Embedding(self._table[key].copy())

    def fingerprint(self) -> tuple[str, int, str]:
        return (self.kind, self.dim, self._hash)


class OnnxProvider:
    """Runtime inference over a serialized ONNX image encoder.

    A sidecar manifest `<model>.json` supplies the graph input name, the
    per-channel normalization mean/std, and the output dimensionality, so
    the engine stays agnostic of any particular checkpoint.
    """

    kind = "runtime-model"

    def __init__(self, model_path: str | Path, dim: int | None = None):
        self._path = Path(model_path)
        manifest_path = Path(str(self._path) + ".json")
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            self._input_name = manifest["input_name"]
            self._mean = np.array(manifest["mean"], dtype=np.float32).reshape(3, 1, 1)
            self._std = np.array(manifest["std"], dtype=np.float32).reshape(3, 1, 1)
            self.dim = int(manifest["dim"]) if dim is None else dim
        except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
            raise ModelLoadError(f"cannot read sidecar manifest {manifest_path}: {exc}") from exc
        try:
            import onnxruntime
        except ImportError as exc:
            raise ModelLoadError(
                "onnxruntime is required for the runtime-model provider"
            ) from exc
        try:
            self._session = onnxruntime.InferenceSession(
                str(self._path), providers=["CPUExecutionProvider"]
            )
        except Exception as exc:
            raise ModelLoadError(f"cannot load model {self._path}: {exc}") from exc
        self._hash = _file_sha256(self._path)

    def embed(self, img: SlideImage, key: str | None = None) -> Embedding:
        thumb = thumbnail(img).astype(np.float32) / 255.0
        chw = (thumb.transpose(2, 0, 1) - self._mean) / self._std
        outputs = self._session.run(None, {self._input_name: chw[None]})
        values = np.asarray(outputs[0], dtype=np.float64).reshape(-1)
        if values.shape[0] != self.dim:
            raise DimensionMismatch(
                f"model produced {values.shape[0]}-d output, expected {self.dim}"
            )
        return Embedding(_normalize(values))

    def fingerprint(self) -> tuple[str, int, str]:
        return (self.kind, self.dim, self._hash)


def make_provider(cfg: ProviderConfig):
    """Instantiate the provider a config describes."""
    if cfg.kind == "stub":
        return StubProvider(cfg.dim)
    if cfg.kind == "precomputed-file":
        return PrecomputedProvider(cfg.file_path, cfg.dim)
    provider = OnnxProvider(cfg.model_path, dim=cfg.dim)
    return provider


def embed(img: SlideImage, cfg: ProviderConfig, key: str | None = None) -> Embedding:
    """One-shot embed through a fresh provider; prefer make_provider for batches."""
    result = make_provider(cfg).embed(img, key)
    if result.dim != cfg.dim:
        raise DimensionMismatch(f"provider returned {result.dim}-d, expected {cfg.dim}")
    return result
