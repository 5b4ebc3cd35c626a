"""modfuse-export: emit MFX1 SSL-embedding files for the pipeline."""

import argparse
import sys

from .errors import ExportError
from .export import DEFAULT_MODEL, ExportJob, export_embeddings, export_synthetic


def build_parser():
    p = argparse.ArgumentParser(
        prog="modfuse-export",
        description="export SSL embeddings (or synthetic stand-ins) as MFX1 files",
    )
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--synthetic", action="store_true",
                   help="emit class-conditioned Gaussian matrices instead of "
                        "running the SSL model")
    p.add_argument("--seed", type=int, default=0, help="synthetic-mode seed")
    p.add_argument("--offset", type=float, default=0.4,
                   help="synthetic-mode class mean offset")
    p.add_argument("--model", default=DEFAULT_MODEL,
                   help="model identifier or local path")
    p.add_argument("--layer", type=int, default=-1,
                   help="hidden-state index to export (-1 = final layer)")
    p.add_argument("--device", default="cpu")
    p.add_argument("--batch-size", type=int, default=4)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.synthetic:
            hashes = export_synthetic(args.manifest, args.out, seed=args.seed,
                                      offset=args.offset)
        else:
            hashes = export_embeddings(ExportJob(
                manifest=args.manifest, out_dir=args.out, model=args.model,
                device=args.device, batch_size=args.batch_size,
                layer=args.layer,
            ))
    except (ExportError, OSError) as exc:
        print(f"modfuse-export: {exc}", file=sys.stderr)
        return 2
    print(f"exported {len(hashes)} embedding file(s) -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
