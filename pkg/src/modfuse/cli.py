"""Command-line surface: modfuse extract|synth|train|score|eval|report.

Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import checkpoint, config, metrics, protocol, reporting, synthdata, trainer
from .errors import DataError, NumericError


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; this tool reserves 2 for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _load_run_config(args) -> config.RunConfig:
    base = config.desk_preset() if args.preset == "desk" else config.RunConfig()
    cfg = config.load_config(args.config, base=base) if args.config else base
    if args.seed is not None:
        import dataclasses
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _read_manifest(path):
    return protocol.parse_manifest(path)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="modfuse",
                description="modulation-spectrogram / SSL fusion "
                            "fake-speech detection pipeline")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    px = sub.add_parser("extract", help="cache modulation-spectrogram features")
    px.add_argument("--manifest", required=True)
    px.add_argument("--out", required=True, help="cache directory")
    px.add_argument("--window", default="hann", choices=["hann", "hamming", "rect"])
    px.add_argument("--force", action="store_true")

    ps = sub.add_parser("synth", help="generate the synthetic desk dataset")
    ps.add_argument("--out", required=True)
    ps.add_argument("--train", type=int, default=200)
    ps.add_argument("--dev", type=int, default=80)
    ps.add_argument("--eval", type=int, default=80)
    ps.add_argument("--seed", type=int, default=7)

    pt = sub.add_parser("train", help="train the fusion front-end and head")
    pt.add_argument("--train-manifest", required=True)
    pt.add_argument("--dev-manifest", required=True)
    pt.add_argument("--out", required=True, help="checkpoint directory")
    pt.add_argument("--config", help="TOML config file")
    pt.add_argument("--seed", type=int)
    pt.add_argument("--preset", choices=["full", "desk"], default="full")

    pc = sub.add_parser("score", help="score a manifest with a checkpoint")
    pc.add_argument("--checkpoint", required=True)
    pc.add_argument("--manifest", required=True)
    pc.add_argument("--out", required=True, help="score TSV path")

    pe = sub.add_parser("eval", help="EER report from a score file")
    pe.add_argument("--scores", required=True)
    pe.add_argument("--out", required=True, help="report directory")
    pe.add_argument("--min-count", type=int, default=100)
    pe.add_argument("--bins", type=int, default=30)
    pe.add_argument("--bandwidth", type=float)

    pr = sub.add_parser("report", help="checkpoint summary and attention export")
    pr.add_argument("--checkpoint", required=True)
    pr.add_argument("--utt", help="utterance to export attention weights for")
    pr.add_argument("--manifest", help="manifest resolving --utt")
    pr.add_argument("--out", help="directory for attention CSVs")
    return p


def _cmd_extract(args) -> int:
    entries = _read_manifest(args.manifest)
    result = trainer.extract_features(entries, args.out, window=args.window,
                                      force=args.force)
    print(f"extract: {len(result['written'])} written, "
          f"{len(result['skipped'])} skipped -> {args.out}")
    return 0


def _cmd_synth(args) -> int:
    manifests = synthdata.build_synthetic_dataset(
        args.out, n_train=args.train, n_dev=args.dev, n_eval=args.eval,
        seed=args.seed,
    )
    for split, path in manifests.items():
        print(f"synth: {split} manifest -> {path}")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_run_config(args)
    train_entries = _read_manifest(args.train_manifest)
    dev_entries = _read_manifest(args.dev_manifest)
    os.makedirs(args.out, exist_ok=True)

    def progress(epoch, train_loss, dev_loss):
        print(f"epoch {epoch:3d}  train {train_loss:.6f}  dev {dev_loss:.6f}")

    result = trainer.train(cfg, train_entries, dev_entries, progress=progress)
    best_path = os.path.join(args.out, "best.ckpt")
    last_path = os.path.join(args.out, "last.ckpt")
    checkpoint.save_checkpoint(best_path, result.best)
    checkpoint.save_checkpoint(last_path, result.last)
    print(f"best dev loss {result.best.best_dev_loss:.6f} at epoch "
          f"{result.best.epoch} -> {best_path}")
    return 0


def _cmd_score(args) -> int:
    bundle = checkpoint.load_checkpoint(args.checkpoint)
    entries = _read_manifest(args.manifest)
    failures = []
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\t".join(metrics.SCORE_HEADER) + "\n")
        for record, failure in trainer.score_stream(bundle, entries):
            if failure is not None:
                failures.append(failure)
                continue
            fh.write(f"{record.utt_id}\t{record.label}\t"
                     f"{record.group or ''}\t{record.score!r}\n")
    print(f"score: {len(entries) - len(failures)} scored -> {args.out}")
    for utt, message in failures:
        print(f"score: FAILED {utt}: {message}", file=sys.stderr)
    return 2 if failures else 0


def _cmd_eval(args) -> int:
    records = metrics.read_scores(args.scores)
    report = reporting.evaluate_scores(
        records, args.out, min_count=args.min_count, bins=args.bins,
        bandwidth=args.bandwidth,
    )
    print(f"pooled EER: {100.0 * report.pooled.eer:.2f}% "
          f"({report.pooled.n_bonafide} bonafide / {report.pooled.n_fake} fake)")
    if report.grouped is not None:
        for g, r in report.grouped.per_group.items():
            print(f"  {g}: {100.0 * r.eer:.2f}%")
        for g, n in sorted(report.grouped.skipped.items()):
            print(f"  {g}: skipped ({n} fakes < {args.min_count})")
    return 0


def _cmd_report(args) -> int:
    bundle = checkpoint.load_checkpoint(args.checkpoint)
    print(f"checkpoint epoch {bundle.epoch}, "
          f"best dev loss {bundle.best_dev_loss:.6f}")
    print(f"config: seed {bundle.config.seed}, lr {bundle.config.learning_rate}, "
          f"heads {bundle.config.heads}, model dim {bundle.config.model_dim}")
    for name, p in bundle.named_parameters().items():
        print(f"  {name}: {p.data.shape[0]}x{p.data.shape[1]}")
    if args.utt:
        if not (args.manifest and args.out):
            print("report: --utt needs --manifest and --out", file=sys.stderr)
            return 1
        entries = [e for e in _read_manifest(args.manifest)
                   if e.utt_id == args.utt]
        if not entries:
            raise DataError(f"{args.utt!r} not in {args.manifest}")
        paths = reporting.export_attention(bundle, entries[0], args.out)
        for path in paths:
            print(f"attention -> {path}")
    return 0


_COMMANDS = {
    "extract": _cmd_extract,
    "synth": _cmd_synth,
    "train": _cmd_train,
    "score": _cmd_score,
    "eval": _cmd_eval,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except NumericError as exc:
        print(f"modfuse: numeric failure: {exc}", file=sys.stderr)
        return 3
    except (DataError, OSError) as exc:
        print(f"modfuse: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
