import importlib.util
import json
import socket

import numpy as np
import pytest

from clip_export.exporter import (
    DownloadError,
    ExportShapeMismatch,
    ExportSpec,
    bundled_test_image,
    load_checkpoint,
    preprocess,
    write_manifest,
)

_HAS_ONNX = importlib.util.find_spec("onnx") is not None
_HAS_ONNXRUNTIME = importlib.util.find_spec("onnxruntime") is not None


def _hub_reachable() -> bool:
    try:
        socket.getaddrinfo("huggingface.co", 443)
        return True
    except OSError:
        return False


_CAN_EXPORT = _HAS_ONNX and _HAS_ONNXRUNTIME and _hub_reachable()


def test_export_spec_defaults(tmp_path):
    spec = ExportSpec(output_path=tmp_path / "clip.onnx")
    assert spec.model_id == "openai/clip-vit-base-patch32"
    assert spec.expected_dim == 512
    assert str(spec.manifest_path).endswith("clip.onnx.json")


def test_export_spec_validation(tmp_path):
    with pytest.raises(ValueError):
        ExportSpec(output_path=tmp_path / "m.onnx", expected_dim=0)
    with pytest.raises(ValueError):
        ExportSpec(output_path=tmp_path / "m.onnx", opset=3)


def test_bundled_test_image_exists():
    path = bundled_test_image()
    assert path.exists()
    batch = preprocess(path, [0.5, 0.5, 0.5], [0.25, 0.25, 0.25])
    assert batch.shape == (1, 3, 224, 224)
    assert batch.dtype == np.float32


def test_preprocess_normalization(tmp_path):
    from PIL import Image

    Image.new("RGB", (10, 10), (255, 255, 255)).save(tmp_path / "white.png")
    batch = preprocess(tmp_path / "white.png", [0.5, 0.5, 0.5], [0.5, 0.5, 0.5])
    assert np.allclose(batch, 1.0)


def test_write_manifest_matches_runtime_provider_contract(tmp_path):
    manifest_path = tmp_path / "clip.onnx.json"
    write_manifest(
        manifest_path,
        mean=[0.48145466, 0.4578275, 0.40821073],
        std=[0.26862954, 0.26130258, 0.27577711],
        dim=512,
        model_id="openai/clip-vit-base-patch32",
        weights_hash="deadbeef",
        opset=17,
    )
    manifest = json.loads(manifest_path.read_text())
    # the scoring engine's runtime provider reads exactly these keys
    assert manifest["input_name"] == "pixel_values"
    assert len(manifest["mean"]) == 3 and len(manifest["std"]) == 3
    assert manifest["dim"] == 512
    assert manifest["checkpoint_sha256"] == "deadbeef"


@pytest.mark.skipif(_hub_reachable(), reason="model hub reachable; download works here")
def test_download_error_when_hub_unreachable():
    with pytest.raises(DownloadError):
        load_checkpoint("openai/clip-vit-base-patch32")


@pytest.mark.skipif(
    not _CAN_EXPORT,
    reason="requires onnx, onnxruntime, and model-hub network access "
    "(unavailable in this environment)",
)
def test_full_export_smoke(tmp_path):
    from clip_export.exporter import export_model

    spec = ExportSpec(output_path=tmp_path / "clip-vit-b32.onnx")
    result = export_model(spec)
    assert result.model_path.exists()
    manifest = json.loads(result.manifest_path.read_text())
    assert manifest["dim"] == 512
    assert result.smoke_cosine >= 0.999

    # re-export reproducibility: embeddings of the test image agree
    again = export_model(ExportSpec(output_path=tmp_path / "again.onnx"))
    from clip_export.exporter import onnx_embedding

    batch = preprocess(bundled_test_image(), manifest["mean"], manifest["std"])
    first = onnx_embedding(result.model_path, batch).reshape(-1)
    second = onnx_embedding(again.model_path, batch).reshape(-1)
    cosine = float(first @ second / (np.linalg.norm(first) * np.linalg.norm(second)))
    assert cosine >= 0.999


@pytest.mark.skipif(
    not _CAN_EXPORT,
    reason="requires onnx, onnxruntime, and model-hub network access "
    "(unavailable in this environment)",
)
def test_wrong_expected_dim_raises(tmp_path):
    from clip_export.exporter import export_model

    with pytest.raises(ExportShapeMismatch):
        export_model(ExportSpec(output_path=tmp_path / "bad.onnx", expected_dim=768))
