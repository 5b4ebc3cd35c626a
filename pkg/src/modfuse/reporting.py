"""Evaluation reports and attention introspection files.

eval emits four artifacts into a directory:
  report.txt   human-readable summary
  eer.tsv      machine-readable pooled + per-group rows
  radar.csv    group,eer pairs ready for radar plotting
  density.csv  bin_center,density_bonafide,density_fake
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .checkpoint import CheckpointBundle
from .errors import EmptyResultError
from .fusion import fuse_sequences
from .metrics import (
    DensityTable,
    EerResult,
    GroupedEer,
    compute_eer,
    density_export,
    grouped_eer,
)
from .tensor_nn import constant
from .trainer import _load_embedding, resolve_examples


@dataclass
class EvalReport:
    pooled: EerResult
    grouped: GroupedEer | None
    density: DensityTable


def evaluate_scores(records, out_dir: str, group: bool = True,
                    min_count: int = 100, bins: int = 30,
                    bandwidth: float | None = None) -> EvalReport:
    os.makedirs(out_dir, exist_ok=True)
    pooled = compute_eer(records)
    grouped_result = None
    if group:
        try:
            grouped_result = grouped_eer(records, min_count=min_count)
        except EmptyResultError:
            grouped_result = None
    density = density_export(records, n_bins=bins, bandwidth=bandwidth)

    with open(os.path.join(out_dir, "eer.tsv"), "w", encoding="utf-8") as fh:
        fh.write("group\teer\tthreshold\tn_bonafide\tn_fake\tstatus\n")
        fh.write(f"__pooled__\t{pooled.eer!r}\t{pooled.threshold!r}\t"
                 f"{pooled.n_bonafide}\t{pooled.n_fake}\tok\n")
        if grouped_result is not None:
            for g, r in grouped_result.per_group.items():
                fh.write(f"{g}\t{r.eer!r}\t{r.threshold!r}\t"
                         f"{r.n_bonafide}\t{r.n_fake}\tok\n")
            for g, n in sorted(grouped_result.skipped.items()):
                fh.write(f"{g}\t\t\t\t{n}\tskipped\n")

    with open(os.path.join(out_dir, "radar.csv"), "w", encoding="utf-8") as fh:
        fh.write("group,eer\n")
        if grouped_result is not None:
            for g, r in grouped_result.per_group.items():
                fh.write(f"{g},{100.0 * r.eer:.4f}\n")

    with open(os.path.join(out_dir, "density.csv"), "w", encoding="utf-8") as fh:
        header = "bin_center,density_bonafide,density_fake"
        cols = [density.bin_centers, density.density_bonafide,
                density.density_fake]
        if density.smoothed_bonafide is not None:
            header += ",smoothed_bonafide,smoothed_fake"
            cols += [density.smoothed_bonafide, density.smoothed_fake]
        fh.write(header + "\n")
        for row in np.column_stack(cols):
            fh.write(",".join(f"{v:.10g}" for v in row) + "\n")

    lines = [
        "detection evaluation",
        "====================",
        f"records: {pooled.n_bonafide} bonafide, {pooled.n_fake} fake",
        f"pooled EER: {100.0 * pooled.eer:.4f}% at threshold "
        f"{pooled.threshold:.6g}",
    ]
    if density.degenerate:
        lines.append("WARNING: all scores identical; density is a single bin")
    if grouped_result is not None:
        lines.append("")
        lines.append(f"per-group EER (groups with >= {min_count} fakes):")
        for g, r in grouped_result.per_group.items():
            lines.append(f"  {g:<16s} {100.0 * r.eer:8.4f}%  ({r.n_fake} fakes)")
        for g, n in sorted(grouped_result.skipped.items()):
            lines.append(f"  {g:<16s}  skipped ({n} fakes < {min_count})")
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

    return EvalReport(pooled=pooled, grouped=grouped_result, density=density)


def export_attention(bundle: CheckpointBundle, entry, out_dir: str) -> list[str]:
    """Write one CSV of softmax weights per attention head for one
    utterance, from the same forward pass scoring uses."""
    os.makedirs(out_dir, exist_ok=True)
    (ex,) = resolve_examples([entry], bundle.config)
    emb = _load_embedding(ex, bundle.fusion)
    feat = np.log1p(ex.feature) if bundle.config.feature_log1p else ex.feature
    heads: list[np.ndarray] = []
    fuse_sequences(constant(feat), constant(emb), bundle.fusion,
                   collect_weights=heads)
    paths = []
    for i, w in enumerate(heads):
        path = os.path.join(out_dir, f"{ex.utt_id}.attn_head{i}.csv")
        np.savetxt(path, w, delimiter=",", fmt="%.10g")
        paths.append(path)
    return paths
