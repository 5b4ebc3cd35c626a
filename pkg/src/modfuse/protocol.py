"""Protocol and manifest parsing.

Two grammars are understood:

* ASVspoof CM protocol lines, whitespace-separated:
      SPEAKER UTT - ATTACK KEY          KEY in {bonafide, spoof}
  The dataset word "spoof" is normalized to "fake" right here; internal
  code uses one word.

* The native manifest: UTF-8 TSV with header
      utt_id  label  language  audio_path  embedding_path
  "#" lines are comments, empty optional fields mean "absent", relative
  paths resolve against the manifest's directory.

Parsing is total: every line yields an entry or an error naming the line.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .errors import (
    DegenerateClassError,
    DuplicateUttError,
    EmptyInputError,
    LabelError,
    ParseError,
    SchemaError,
)

LABEL_BONAFIDE = "bonafide"
LABEL_FAKE = "fake"

_KEY_TO_LABEL = {"bonafide": LABEL_BONAFIDE, "spoof": LABEL_FAKE, "fake": LABEL_FAKE}

_MANIFEST_COLUMNS = ("utt_id", "label", "language", "audio_path", "embedding_path")


@dataclass
class ProtocolEntry:
    utt_id: str
    label: str
    speaker_id: str = ""
    attack_id: str | None = None
    language: str | None = None
    audio_path: str | None = None
    embedding_path: str | None = None

    def __post_init__(self):
        if not self.utt_id:
            raise ParseError("empty utt_id")
        if self.label not in (LABEL_BONAFIDE, LABEL_FAKE):
            raise LabelError(f"label must be bonafide or fake, got {self.label!r}")


def parse_asvspoof_protocol(path) -> list[ProtocolEntry]:
    entries: list[ProtocolEntry] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            fields = line.split()
            if len(fields) != 5:
                raise ParseError(
                    f"expected 5 whitespace-separated fields, got {len(fields)}",
                    line_no=line_no, path=path,
                )
            speaker, utt, _unused, attack, key = fields
            if key not in _KEY_TO_LABEL:
                raise LabelError(
                    f"unknown key {key!r} (expected bonafide or spoof)",
                    line_no=line_no, path=path,
                )
            if utt in seen:
                raise DuplicateUttError(
                    f"duplicate utt_id {utt!r}", line_no=line_no, path=path
                )
            seen.add(utt)
            entries.append(ProtocolEntry(
                utt_id=utt,
                label=_KEY_TO_LABEL[key],
                speaker_id=speaker,
                attack_id=None if attack == "-" else attack,
            ))
    return entries


def _resolve(base_dir: str, p: str) -> str:
    if os.path.isabs(p):
        return p
    return os.path.normpath(os.path.join(base_dir, p))


def parse_manifest(path) -> list[ProtocolEntry]:
    base_dir = os.path.dirname(os.path.abspath(path))
    entries: list[ProtocolEntry] = []
    seen: set[str] = set()
    header: dict[str, int] | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cells = line.split("\t")
            if header is None:
                header = {name.strip(): i for i, name in enumerate(cells)}
                missing = [c for c in _MANIFEST_COLUMNS if c not in header]
                if missing:
                    raise SchemaError(
                        f"{path}:{line_no}: manifest header missing "
                        f"column(s) {', '.join(missing)}"
                    )
                continue
            if len(cells) != len(header):
                raise ParseError(
                    f"row has {len(cells)} cells, header has {len(header)}",
                    line_no=line_no, path=path,
                )
            get = lambda col: cells[header[col]].strip()
            utt = get("utt_id")
            if not utt:
                raise ParseError("empty utt_id", line_no=line_no, path=path)
            if utt in seen:
                raise DuplicateUttError(
                    f"duplicate utt_id {utt!r}", line_no=line_no, path=path
                )
            seen.add(utt)
            key = get("label")
            if key not in _KEY_TO_LABEL:
                raise LabelError(
                    f"unknown label {key!r}", line_no=line_no, path=path
                )
            lang = get("language")
            audio = get("audio_path")
            emb = get("embedding_path")
            entries.append(ProtocolEntry(
                utt_id=utt,
                label=_KEY_TO_LABEL[key],
                language=lang.lower() or None,
                audio_path=_resolve(base_dir, audio) if audio else None,
                embedding_path=_resolve(base_dir, emb) if emb else None,
            ))
    if header is None:
        raise EmptyInputError(f"{path}: empty manifest")
    return entries


def write_manifest(path, entries):
    """Inverse of parse_manifest for entries carrying absolute (or no)
    paths: parse(write(entries)) == entries."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(_MANIFEST_COLUMNS) + "\n")
        for e in entries:
            fh.write("\t".join([
                e.utt_id,
                e.label,
                e.language or "",
                e.audio_path or "",
                e.embedding_path or "",
            ]) + "\n")


def class_weights(entries) -> tuple[float, float]:
    """(w_fake, w_bonafide) proportional to inverse class counts,
    normalized to sum to 2."""
    n_fake = sum(1 for e in entries if e.label == LABEL_FAKE)
    n_bona = sum(1 for e in entries if e.label == LABEL_BONAFIDE)
    if n_fake == 0 or n_bona == 0:
        raise DegenerateClassError(
            f"both classes required, got {n_fake} fake / {n_bona} bonafide"
        )
    inv_f, inv_b = 1.0 / n_fake, 1.0 / n_bona
    s = inv_f + inv_b
    return 2.0 * inv_f / s, 2.0 * inv_b / s
