"""Detection analytics: EER, per-group EER, and score-density export.

Conventions, fixed globally:
  * higher score means more bonafide;
  * P_fa(tau) = fraction of fake scores >= tau (ties count as false
    alarms), P_miss(tau) = fraction of bonafide scores < tau;
  * the EER is the value where the two rates cross. On the threshold
    grid (every distinct score plus +-inf) the rates are step functions;
    where they cross between grid points the two rates are linearly
    interpolated and the common value at the intersection is reported,
    together with the two bracketing operating points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DataError,
    DegenerateClassError,
    EmptyResultError,
    ParameterError,
    ParseError,
    UndefinedImprovementError,
)
from .protocol import LABEL_BONAFIDE, LABEL_FAKE

DEFAULT_MIN_GROUP_FAKES = 100


@dataclass
class ScoreRecord:
    utt_id: str
    label: str
    score: float
    group: str | None = None

    def __post_init__(self):
        if self.label not in (LABEL_BONAFIDE, LABEL_FAKE):
            raise DataError(f"bad label {self.label!r}")
        if not math.isfinite(self.score):
            raise DataError(f"non-finite score for {self.utt_id!r}")


@dataclass
class OperatingPoint:
    threshold: float
    p_fa: float
    p_miss: float


@dataclass
class EerResult:
    eer: float
    threshold: float
    n_bonafide: int
    n_fake: int
    # the two grid points whose interpolation produced the EER; equal
    # when the crossing lands exactly on the grid
    bracket: tuple[OperatingPoint, OperatingPoint] | None = None


@dataclass
class GroupedEer:
    per_group: dict[str, EerResult]
    skipped: dict[str, int]   # group -> fake count below min_count


@dataclass
class DensityTable:
    bin_centers: np.ndarray
    density_bonafide: np.ndarray
    density_fake: np.ndarray
    smoothed_bonafide: np.ndarray | None = None
    smoothed_fake: np.ndarray | None = None
    degenerate: bool = False


def _split_scores(records):
    bona = np.array([r.score for r in records if r.label == LABEL_BONAFIDE])
    fake = np.array([r.score for r in records if r.label == LABEL_FAKE])
    if bona.size == 0 or fake.size == 0:
        raise DegenerateClassError(
            f"EER needs both classes, got {bona.size} bonafide / {fake.size} fake"
        )
    return bona, fake


def compute_eer(records) -> EerResult:
    bona, fake = _split_scores(records)
    grid = np.concatenate((
        [-np.inf], np.unique(np.concatenate((bona, fake))), [np.inf],
    ))
    bona_sorted = np.sort(bona)
    fake_sorted = np.sort(fake)
    # fake >= tau / bona < tau via binary search on the sorted arrays
    p_fa = (fake.size - np.searchsorted(fake_sorted, grid, side="left")) / fake.size
    p_miss = np.searchsorted(bona_sorted, grid, side="left") / bona.size

    diff = p_fa - p_miss        # starts at +1, ends at -1, non-increasing
    idx = int(np.argmax(diff <= 0.0))
    a, b = idx - 1, idx
    pt_a = OperatingPoint(float(grid[a]), float(p_fa[a]), float(p_miss[a]))
    pt_b = OperatingPoint(float(grid[b]), float(p_fa[b]), float(p_miss[b]))

    if diff[idx] == 0.0:
        eer = float(p_fa[idx])
        threshold = float(grid[idx])
        bracket = (pt_b, pt_b)
    else:
        t = diff[a] / (diff[a] - diff[b])
        eer = float((1 - t) * p_fa[a] + t * p_fa[b])
        if np.isfinite(grid[a]) and np.isfinite(grid[b]):
            threshold = float(grid[a] + t * (grid[b] - grid[a]))
        else:
            # bracket touches +-inf; report the finite end
            threshold = float(grid[a] if np.isfinite(grid[a]) else grid[b])
        bracket = (pt_a, pt_b)
    return EerResult(
        eer=eer, threshold=threshold,
        n_bonafide=int(bona.size), n_fake=int(fake.size),
        bracket=bracket,
    )


def grouped_eer(records, min_count: int = DEFAULT_MIN_GROUP_FAKES) -> GroupedEer:
    """Per-group EER: each group's fake scores against *all* bonafide
    scores. Groups with fewer than min_count fakes are skipped, not
    silently dropped."""
    bona_records = [r for r in records if r.label == LABEL_BONAFIDE]
    if not bona_records:
        raise DegenerateClassError("no bonafide records")
    fakes_by_group: dict[str, list[ScoreRecord]] = {}
    for r in records:
        if r.label == LABEL_FAKE and r.group is not None:
            fakes_by_group.setdefault(r.group, []).append(r)

    per_group: dict[str, EerResult] = {}
    skipped: dict[str, int] = {}
    for group in sorted(fakes_by_group):
        fakes = fakes_by_group[group]
        if len(fakes) < min_count:
            skipped[group] = len(fakes)
            continue
        per_group[group] = compute_eer(bona_records + fakes)
    if not per_group:
        raise EmptyResultError(
            f"no group reaches {min_count} fake records "
            f"(saw {sorted(skipped) or 'none'})"
        )
    return GroupedEer(per_group=per_group, skipped=skipped)


def density_export(records, n_bins: int, bandwidth: float | None = None) -> DensityTable:
    """Per-label score densities on shared bin edges.

    Histograms are normalized to unit area. With a bandwidth, a
    Gaussian-kernel smoothed density is also sampled at the bin centers.
    All-identical scores degrade to a single unit-width bin and set the
    degenerate flag.
    """
    if n_bins < 2:
        raise ParameterError("need at least 2 bins")
    bona, fake = _split_scores(records)
    allscores = np.concatenate((bona, fake))
    lo, hi = float(allscores.min()), float(allscores.max())
    degenerate = lo == hi
    if degenerate:
        edges = np.array([lo - 0.5, lo + 0.5])
    else:
        edges = np.linspace(lo, hi, n_bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    dens_b, _ = np.histogram(bona, bins=edges, density=True)
    dens_f, _ = np.histogram(fake, bins=edges, density=True)

    smooth_b = smooth_f = None
    if bandwidth is not None:
        if bandwidth <= 0:
            raise ParameterError("bandwidth must be positive")

        def kde(samples):
            z = (centers[:, None] - samples[None, :]) / bandwidth
            k = np.exp(-0.5 * z * z) / (bandwidth * np.sqrt(2 * np.pi))
            return k.mean(axis=1)

        smooth_b, smooth_f = kde(bona), kde(fake)

    return DensityTable(
        bin_centers=centers,
        density_bonafide=dens_b,
        density_fake=dens_f,
        smoothed_bonafide=smooth_b,
        smoothed_fake=smooth_f,
        degenerate=degenerate,
    )


def relative_improvement(baseline_eer: float, proposed_eer: float) -> float:
    """100 * (baseline - proposed) / baseline."""
    if baseline_eer == 0:
        raise UndefinedImprovementError("relative improvement over a zero baseline")
    return 100.0 * (baseline_eer - proposed_eer) / baseline_eer


# -- score files ------------------------------------------------------------

SCORE_HEADER = ("utt_id", "label", "group", "score")


def write_scores(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(SCORE_HEADER) + "\n")
        for r in records:
            fh.write(f"{r.utt_id}\t{r.label}\t{r.group or ''}\t{r.score!r}\n")


def read_scores(path) -> list[ScoreRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if line_no == 1:
                if tuple(line.split("\t")) != SCORE_HEADER:
                    raise ParseError(
                        f"bad score-file header {line!r}", line_no=1, path=path
                    )
                continue
            if not line.strip():
                continue
            cells = line.split("\t")
            if len(cells) != 4:
                raise ParseError(
                    f"expected 4 cells, got {len(cells)}", line_no=line_no, path=path
                )
            utt, label, group, score_text = cells
            try:
                score = float(score_text)
            except ValueError:
                raise ParseError(
                    f"bad score {score_text!r}", line_no=line_no, path=path
                ) from None
            try:
                records.append(ScoreRecord(
                    utt_id=utt, label=label, score=score, group=group or None,
                ))
            except DataError as exc:
                raise ParseError(str(exc), line_no=line_no, path=path) from None
    return records
