"""Command line entry point.

Exit codes match the downstream tool: 0 success, 1 usage error, 2 data or
configuration error, 3 internal error.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from pathlib import Path

from prospect_exporter.encoders import EncoderLoadError
from prospect_exporter.export import ExportJob, export

_SUFFIXES = {
    "text": (".txt",),
    "image": (".png", ".jpg", ".jpeg", ".bmp", ".gif", ".tif", ".tiff"),
    "structure": (".csv", ".pdb", ".ent"),
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="prospect-export",
        description="Encode raw inputs into map-graph datum files.",
    )
    parser.add_argument("inputs", nargs="+", help="input files, or directories to scan")
    parser.add_argument("--kind", required=True, choices=sorted(_SUFFIXES))
    parser.add_argument("--labels", required=True, help="CSV manifest with header id,label")
    parser.add_argument("--output", required=True, help="directory for emitted datum files")
    parser.add_argument(
        "--annotations", default=None, help="CSV manifest with header id,vertex_id"
    )
    parser.add_argument("--encoder", default="hash:64", help="hash:<dim> or module:attribute")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--hop", type=int, default=2, help="text: chain reach in sentences")
    parser.add_argument("--patch-size", type=int, default=224, help="image: patch side in px")
    parser.add_argument("--connectivity", type=int, default=8, choices=(4, 8),
                        help="image: grid neighbors per patch")
    parser.add_argument("--epsilon", type=float, default=8.0,
                        help="structure: contact distance cutoff")
    parser.add_argument("--sidecar", action="store_true",
                        help="write embeddings as float32 .bin files instead of inline JSON")
    return parser


def _collect_inputs(raw: list[str], kind: str) -> tuple[Path, ...]:
    found: list[Path] = []
    for entry in raw:
        path = Path(entry)
        if path.is_dir():
            matches = sorted(
                p for p in path.iterdir()
                if p.is_file() and p.suffix.lower() in _SUFFIXES[kind]
            )
            if not matches:
                raise ValueError(f"{path}: no {kind} inputs found")
            found.extend(matches)
        elif path.is_file():
            found.append(path)
        else:
            raise FileNotFoundError(f"{path}: no such file or directory")
    return tuple(found)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        job = ExportJob(
            inputs=_collect_inputs(args.inputs, args.kind),
            kind=args.kind,
            labels_path=Path(args.labels),
            output_dir=Path(args.output),
            encoder_name=args.encoder,
            annotations_path=Path(args.annotations) if args.annotations else None,
            batch_size=args.batch_size,
            hop=args.hop,
            patch_size=args.patch_size,
            connectivity=args.connectivity,
            epsilon=args.epsilon,
            sidecar=args.sidecar,
        )
        written = export(job)
    except (EncoderLoadError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 3
    print(f"exported {len(written)} data to {job.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
