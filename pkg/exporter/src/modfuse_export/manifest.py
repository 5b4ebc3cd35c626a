"""Reader for the pipeline's native manifest TSV (external interface):
header utt_id/label/language/audio_path/embedding_path, "#" comments,
relative paths resolved against the manifest directory."""

import os
from dataclasses import dataclass

from .errors import ManifestError

_REQUIRED = ("utt_id", "label", "language", "audio_path", "embedding_path")


@dataclass
class ManifestRow:
    utt_id: str
    label: str
    audio_path: str | None


def read_manifest(path) -> list[ManifestRow]:
    base = os.path.dirname(os.path.abspath(path))
    rows = []
    header = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cells = line.split("\t")
            if header is None:
                header = {name.strip(): i for i, name in enumerate(cells)}
                missing = [c for c in _REQUIRED if c not in header]
                if missing:
                    raise ManifestError(
                        f"{path}:{line_no}: missing column(s) {missing}"
                    )
                continue
            if len(cells) != len(header):
                raise ManifestError(
                    f"{path}:{line_no}: {len(cells)} cells, expected {len(header)}"
                )
            audio = cells[header["audio_path"]].strip()
            if audio and not os.path.isabs(audio):
                audio = os.path.normpath(os.path.join(base, audio))
            rows.append(ManifestRow(
                utt_id=cells[header["utt_id"]].strip(),
                label=cells[header["label"]].strip(),
                audio_path=audio or None,
            ))
    if header is None:
        raise ManifestError(f"{path}: empty manifest")
    return rows
