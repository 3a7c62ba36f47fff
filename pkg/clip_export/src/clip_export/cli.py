"""One-off command-line exporter: checkpoint -> ONNX + manifest."""

from __future__ import annotations

import argparse
import sys

from .exporter import DEFAULT_DIM, DEFAULT_MODEL_ID, DEFAULT_OPSET, ExportError, ExportSpec, export_model


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clip-export",
        description="Export a CLIP image encoder to ONNX plus its preprocessing manifest.",
    )
    parser.add_argument("--model", default=DEFAULT_MODEL_ID, help="checkpoint identifier")
    parser.add_argument("--out", required=True, help="ONNX file to write")
    parser.add_argument("--dim", type=int, default=DEFAULT_DIM, help="expected output dim")
    parser.add_argument("--opset", type=int, default=DEFAULT_OPSET)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = ExportSpec(
        output_path=args.out,
        model_id=args.model,
        opset=args.opset,
        expected_dim=args.dim,
    )
    try:
        result = export_model(spec)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {result.model_path} and {result.manifest_path}")
    print(f"smoke cosine vs reference stack: {result.smoke_cosine:.6f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
