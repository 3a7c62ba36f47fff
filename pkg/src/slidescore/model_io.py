"""Persistence for the fitted quality model.

The artifact of a fit is a single JSON document: PCA basis, z-scaler,
isolation forest, centroid, provider fingerprint, and a content checksum.
JSON keeps the file inspectable; floats round-trip exactly at this scale.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ChecksumMismatch, DimensionMismatch, ModelVersionMismatch, ParseError
from .forest import ForestParams, IsolationForest, IsoTree
from .imaging import METRIC_NAMES
from .latent import PcaModel, ZScaler

FORMAT_VERSION = 1


@dataclass(frozen=True)
class ProviderFingerprint:
    """Identity of the embedding source a model was fitted with."""

    kind: str
    dim: int
    model_hash: str


@dataclass(frozen=True)
class QualityModel:
    """Everything needed to score a slide the way the training run did."""

    pca: PcaModel
    scaler: ZScaler
    forest: IsolationForest
    centroid: np.ndarray
    provider: ProviderFingerprint
    created: str

    def __post_init__(self):
        expected = self.pca.k + len(METRIC_NAMES)
        if not (
            expected == self.scaler.m == self.forest.n_features == self.centroid.shape[0]
        ):
            raise DimensionMismatch(
                "inconsistent sub-model dimensions: "
                f"pca.k+7={expected}, scaler={self.scaler.m}, "
                f"forest={self.forest.n_features}, centroid={self.centroid.shape[0]}"
            )

    @property
    def descriptor_dim(self) -> int:
        return self.scaler.m


def _tree_payload(tree: IsoTree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "size": tree.size.tolist(),
    }


def _tree_from_payload(data: dict, n_features: int) -> IsoTree:
    return IsoTree(
        feature=np.array(data["feature"], dtype=np.int32),
        threshold=np.array(data["threshold"], dtype=np.float64),
        left=np.array(data["left"], dtype=np.int32),
        right=np.array(data["right"], dtype=np.int32),
        size=np.array(data["size"], dtype=np.int32),
        n_features=n_features,
    )


def _checksum(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def save_model(model: QualityModel, path: str | Path) -> None:
    """Write the versioned, checksummed model document."""
    params = model.forest.params
    payload = {
        "pca": {
            "mean": model.pca.mean.tolist(),
            "components": model.pca.components.tolist(),
            "explained_variance": model.pca.explained_variance.tolist(),
        },
        "scaler": {
            "mean": model.scaler.mean.tolist(),
            "std": model.scaler.std.tolist(),
        },
        "forest": {
            "params": {
                "trees": params.trees,
                "subsample": params.subsample,
                "contamination": params.contamination,
                "seed": params.seed,
                "height_limit": params.height_limit,
            },
            "c_psi": model.forest.c_psi,
            "flag_threshold": model.forest.flag_threshold,
            "n_features": model.forest.n_features,
            "trees_nodes": [_tree_payload(t) for t in model.forest.trees],
        },
        "centroid": model.centroid.tolist(),
        "provider": {
            "kind": model.provider.kind,
            "dim": model.provider.dim,
            "model_hash": model.provider.model_hash,
        },
        "created": model.created,
    }
    document = {
        "format_version": FORMAT_VERSION,
        "payload": payload,
        "checksum": _checksum(payload),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(document, fh, indent=1)
        fh.write("\n")


def load_model(path: str | Path) -> QualityModel:
    """Read a model document back; never yields a partial model."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            document = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(document, dict) or "format_version" not in document:
        raise ParseError(f"{path} is not a model document")
    version = document["format_version"]
    if version != FORMAT_VERSION:
        raise ModelVersionMismatch(f"unsupported format_version {version}")
    try:
        payload = document["payload"]
        if _checksum(payload) != document["checksum"]:
            raise ChecksumMismatch(f"{path} failed its integrity check")
        pca = PcaModel(
            mean=np.array(payload["pca"]["mean"], dtype=float),
            components=np.array(payload["pca"]["components"], dtype=float),
            explained_variance=np.array(payload["pca"]["explained_variance"], dtype=float),
        )
        scaler = ZScaler(
            mean=np.array(payload["scaler"]["mean"], dtype=float),
            std=np.array(payload["scaler"]["std"], dtype=float),
        )
        raw_forest = payload["forest"]
        params = ForestParams(**raw_forest["params"])
        n_features = int(raw_forest["n_features"])
        forest = IsolationForest(
            trees=tuple(
                _tree_from_payload(t, n_features) for t in raw_forest["trees_nodes"]
            ),
            params=params,
            c_psi=float(raw_forest["c_psi"]),
            flag_threshold=float(raw_forest["flag_threshold"]),
            n_features=n_features,
        )
        provider = ProviderFingerprint(
            kind=payload["provider"]["kind"],
            dim=int(payload["provider"]["dim"]),
            model_hash=payload["provider"]["model_hash"],
        )
        return QualityModel(
            pca=pca,
            scaler=scaler,
            forest=forest,
            centroid=np.array(payload["centroid"], dtype=float),
            provider=provider,
            created=payload["created"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path} is structurally invalid: {exc}") from exc
