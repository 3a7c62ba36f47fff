"""Export a CLIP image encoder to ONNX with a preprocessing manifest.

The exported graph takes a 1x3x224x224 float input and yields the image
embedding (image branch only; the text tower is not exported). A JSON
sidecar manifest written next to the model file records the graph input
name, the normalization mean/std, and the output dimensionality, which
is exactly the contract the scoring engine's runtime-model provider
reads. A smoke inference on a bundled test image compares the exported
graph against the original torch stack.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from PIL import Image

DEFAULT_MODEL_ID = "openai/clip-vit-base-patch32"
DEFAULT_OPSET = 17
DEFAULT_DIM = 512
INPUT_NAME = "pixel_values"
OUTPUT_NAME = "embedding"
IMAGE_SIZE = 224
SMOKE_COSINE_MIN = 0.999


class ExportError(Exception):
    """Base class for export failures."""


class DownloadError(ExportError):
    """Checkpoint could not be retrieved."""


class ExportShapeMismatch(ExportError):
    """Exported graph I/O does not match the expected shape."""


@dataclass(frozen=True)
class ExportSpec:
    """What to export and where to put it."""

    output_path: Path
    model_id: str = DEFAULT_MODEL_ID
    opset: int = DEFAULT_OPSET
    expected_dim: int = DEFAULT_DIM

    def __post_init__(self):
        object.__setattr__(self, "output_path", Path(self.output_path))
        if self.expected_dim < 1:
            raise ValueError("expected_dim must be positive")
        if self.opset < 9:
            raise ValueError("opset must be >= 9")

    @property
    def manifest_path(self) -> Path:
        return Path(str(self.output_path) + ".json")


@dataclass(frozen=True)
class ExportResult:
    model_path: Path
    manifest_path: Path
    smoke_cosine: float


def bundled_test_image() -> Path:
    """The deterministic test image shipped with the package."""
    return Path(resources.files("clip_export").joinpath("assets/test_image.png"))


def load_checkpoint(model_id: str):
    """Fetch the vision tower with projection plus its preprocessing config."""
    import torch
    from transformers import CLIPImageProcessor, CLIPVisionModelWithProjection

    try:
        model = CLIPVisionModelWithProjection.from_pretrained(model_id)
        processor = CLIPImageProcessor.from_pretrained(model_id)
    except Exception as exc:
        raise DownloadError(f"cannot retrieve checkpoint {model_id!r}: {exc}") from exc
    model.eval()
    for param in model.parameters():
        param.requires_grad_(False)
    torch.set_grad_enabled(False)
    return model, processor


def checkpoint_hash(model) -> str:
    """SHA-256 over the checkpoint weights, in sorted parameter-name order."""
    digest = hashlib.sha256()
    state = model.state_dict()
    for name in sorted(state):
        digest.update(name.encode("utf-8"))
        digest.update(state[name].cpu().numpy().tobytes())
    return digest.hexdigest()


def preprocess(image_path: str | Path, mean, std) -> np.ndarray:
    """224x224 bilinear squash then per-channel normalization, NCHW float32.

    Matches the scoring engine's runtime-model provider so the smoke test
    exercises the exact tensors the engine will feed the graph.
    """
    img = Image.open(image_path).convert("RGB").resize(
        (IMAGE_SIZE, IMAGE_SIZE), Image.BILINEAR
    )
    arr = np.asarray(img, dtype=np.float32) / 255.0
    mean = np.asarray(mean, dtype=np.float32).reshape(3, 1, 1)
    std = np.asarray(std, dtype=np.float32).reshape(3, 1, 1)
    return ((arr.transpose(2, 0, 1) - mean) / std)[None]


def export_to_onnx(model, output_path: Path, opset: int) -> None:
    """Serialize the image branch; the wrapper keeps only pixel -> embedding."""
    import torch

    class ImageBranch(torch.nn.Module):
        def __init__(self, inner):
            super().__init__()
            self.inner = inner

        def forward(self, pixel_values):
            return self.inner(pixel_values=pixel_values).image_embeds

    wrapper = ImageBranch(model).eval()
    dummy = torch.zeros(1, 3, IMAGE_SIZE, IMAGE_SIZE)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    try:
        torch.onnx.export(
            wrapper,
            dummy,
            str(output_path),
            input_names=[INPUT_NAME],
            output_names=[OUTPUT_NAME],
            opset_version=opset,
            dynamo=False,
        )
    except Exception as exc:
        raise ExportError(f"onnx serialization failed: {exc}") from exc


def validate_graph(model_path: Path, expected_dim: int) -> None:
    """Shape-infer the exported graph and check its 1x3x224x224 -> 1xdim contract."""
    try:
        import onnx
        from onnx import shape_inference
    except ImportError as exc:
        raise ExportError("the onnx package is required for validation") from exc
    graph = shape_inference.infer_shapes(onnx.load(str(model_path)))
    onnx.checker.check_model(graph)

    def dims(value_info):
        return [
            d.dim_value if d.HasField("dim_value") else None
            for d in value_info.type.tensor_type.shape.dim
        ]

    inputs = {vi.name: dims(vi) for vi in graph.graph.input}
    outputs = {vi.name: dims(vi) for vi in graph.graph.output}
    if inputs.get(INPUT_NAME) != [1, 3, IMAGE_SIZE, IMAGE_SIZE]:
        raise ExportShapeMismatch(f"graph input is {inputs}, expected 1x3x224x224")
    out_dims = outputs.get(OUTPUT_NAME)
    if out_dims != [1, expected_dim]:
        raise ExportShapeMismatch(
            f"graph output is {out_dims}, expected [1, {expected_dim}]"
        )


def write_manifest(
    manifest_path: Path,
    mean,
    std,
    dim: int,
    model_id: str,
    weights_hash: str,
    opset: int,
) -> None:
    manifest = {
        "input_name": INPUT_NAME,
        "mean": [float(v) for v in mean],
        "std": [float(v) for v in std],
        "dim": int(dim),
        "model_id": model_id,
        "checkpoint_sha256": weights_hash,
        "opset": int(opset),
    }
    manifest_path.write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = a.reshape(-1).astype(np.float64)
    b = b.reshape(-1).astype(np.float64)
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def reference_embedding(model, batch: np.ndarray) -> np.ndarray:
    """Torch-stack embedding of an already-preprocessed batch (the oracle)."""
    import torch

    with torch.no_grad():
        out = model(pixel_values=torch.from_numpy(batch)).image_embeds
    return out.cpu().numpy()


def onnx_embedding(model_path: Path, batch: np.ndarray) -> np.ndarray:
    try:
        import onnxruntime
    except ImportError as exc:
        raise ExportError("onnxruntime is required for the smoke inference") from exc
    session = onnxruntime.InferenceSession(
        str(model_path), providers=["CPUExecutionProvider"]
    )
    return session.run(None, {INPUT_NAME: batch})[0]


def smoke_test(model_path: Path, manifest_path: Path, model, image_path: Path) -> float:
    """Cosine similarity between the exported graph and the torch oracle."""
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    batch = preprocess(image_path, manifest["mean"], manifest["std"])
    exported = onnx_embedding(model_path, batch)
    if exported.reshape(-1).shape[0] != manifest["dim"]:
        raise ExportShapeMismatch(
            f"smoke inference returned {exported.shape}, expected dim {manifest['dim']}"
        )
    return _cosine(exported, reference_embedding(model, batch))


def export_model(spec: ExportSpec) -> ExportResult:
    """Download, export, validate, write the manifest, and smoke-test."""
    model, processor = load_checkpoint(spec.model_id)
    actual_dim = int(model.config.projection_dim)
    if actual_dim != spec.expected_dim:
        raise ExportShapeMismatch(
            f"checkpoint projects to {actual_dim}-d, expected {spec.expected_dim}"
        )
    export_to_onnx(model, spec.output_path, spec.opset)
    validate_graph(spec.output_path, spec.expected_dim)
    write_manifest(
        spec.manifest_path,
        processor.image_mean,
        processor.image_std,
        spec.expected_dim,
        spec.model_id,
        checkpoint_hash(model),
        spec.opset,
    )
    cosine = smoke_test(spec.output_path, spec.manifest_path, model, bundled_test_image())
    if cosine < SMOKE_COSINE_MIN:
        raise ExportError(
            f"smoke cosine {cosine:.6f} below {SMOKE_COSINE_MIN}; export unusable"
        )
    return ExportResult(spec.output_path, spec.manifest_path, cosine)
