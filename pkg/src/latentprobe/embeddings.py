"""Loading, validating, and joining latent embedding sets with feature tables."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, JoinError, ValidationError
from .features import FeatureTable

log = logging.getLogger(__name__)


@dataclass
class EmbeddingSet:
    """Per-utterance latent vectors for one task, with style labels."""

    task: str
    dim: int
    rows: dict[str, np.ndarray] = field(default_factory=dict)
    labels: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        bad = []
        for utt_id, vec in self.rows.items():
            vec = np.asarray(vec, dtype=np.float64)
            self.rows[utt_id] = vec
            if vec.shape != (self.dim,):
                raise ValidationError(
                    f"task {self.task!r}: id {utt_id!r} has dim {vec.shape} "
                    f"but expected ({self.dim},)"
                )
            if not np.all(np.isfinite(vec)):
                bad.append(utt_id)
        if bad:
            raise ValidationError(
                f"task {self.task!r}: non-finite embedding values for ids {bad[:5]}"
            )
        missing = set(self.rows) - set(self.labels)
        if missing:
            raise ValidationError(
                f"task {self.task!r}: missing style labels for {sorted(missing)[:5]}"
            )

    def __len__(self) -> int:
        return len(self.rows)

    def ids(self) -> list[str]:
        return sorted(self.rows)

    def matrix(self, ids: list[str] | None = None) -> np.ndarray:
        ids = ids if ids is not None else self.ids()
        return np.stack([self.rows[i] for i in ids]) if ids else np.empty((0, self.dim))


@dataclass
class JoinedDataset:
    """Row-aligned embeddings, features, and style labels for one task."""

    task: str
    utterance_ids: list[str]
    embeddings: np.ndarray  # N x dim
    features: np.ndarray  # N x F
    feature_names: list[str]
    styles: list[str]

    def __post_init__(self) -> None:
        n = len(self.utterance_ids)
        if n < 1:
            raise JoinError(f"task {self.task!r}: joined dataset is empty")
        if not (len(self.embeddings) == len(self.features) == len(self.styles) == n):
            raise ValidationError(f"task {self.task!r}: misaligned joined arrays")

    def __len__(self) -> int:
        return len(self.utterance_ids)


def _parse_embedding_header(header: list[str], path: str) -> int:
    if len(header) < 3 or header[:2] != ["utterance_id", "style"]:
        raise FormatError(f"{path}: expected header utterance_id,style,e0,...")
    dim = len(header) - 2
    expected = [f"e{i}" for i in range(dim)]
    if header[2:] != expected:
        raise FormatError(
            f"{path}: embedding columns must be e0..e{dim - 1}, got {header[2:][:4]}"
        )
    return dim


def load_embeddings(path: str, task: str) -> EmbeddingSet:
    """Reads an embedding file (CSV or JSON-lines) into a validated set.

    CSV needs a `utterance_id,style,e0,...` header; JSONL rows carry the same
    fields. Dimensionality is inferred, duplicate ids and non-numeric or
    non-finite values are rejected with the offending ids named.
    """
    rows: dict[str, np.ndarray] = {}
    labels: dict[str, str] = {}
    dim: int | None = None

    def add(utt_id: str, style: str, vec: list[float], where: str) -> None:
        if utt_id in rows:
            raise ValidationError(f"{path}: duplicate utterance_id {utt_id!r}")
        arr = np.asarray(vec, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"{path}: non-finite value at {where} (id {utt_id!r})")
        rows[utt_id] = arr
        labels[utt_id] = style

    if path.endswith((".jsonl", ".ndjson")):
        with open(path, encoding="utf-8") as fh:
            for ln, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise FormatError(f"{path}:{ln}: bad JSON: {exc}") from exc
                try:
                    utt_id = rec["utterance_id"]
                    style = rec["style"]
                    vec = [float(rec[f"e{i}"]) for i in range(len(rec) - 2)]
                except (KeyError, TypeError, ValueError) as exc:
                    raise FormatError(f"{path}:{ln}: missing or bad field: {exc}") from exc
                if dim is None:
                    dim = len(vec)
                elif len(vec) != dim:
                    raise FormatError(f"{path}:{ln}: ragged row ({len(vec)} != {dim})")
                add(utt_id, style, vec, f"line {ln}")
    else:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise FormatError(f"{path}: empty file")
            dim = _parse_embedding_header([h.strip() for h in header], path)
            for ln, row in enumerate(reader, 2):
                if not row:
                    continue
                if len(row) != dim + 2:
                    raise FormatError(f"{path}:{ln}: ragged row ({len(row)} cells)")
                try:
                    vec = [float(c) for c in row[2:]]
                except ValueError as exc:
                    raise ValidationError(f"{path}:{ln}: non-numeric cell: {exc}") from exc
                add(row[0], row[1], vec, f"line {ln}")
    if dim is None or not rows:
        raise FormatError(f"{path}: no embedding rows")
    return EmbeddingSet(task=task, dim=dim, rows=rows, labels=labels)


def save_embeddings(emb: EmbeddingSet, path: str) -> None:
    """Writes an EmbeddingSet back to CSV with full-precision values."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["utterance_id", "style"] + [f"e{i}" for i in range(emb.dim)])
        for utt_id in emb.ids():
            writer.writerow(
                [utt_id, emb.labels[utt_id]]
                + [repr(float(v)) for v in emb.rows[utt_id]]
            )


def join(emb: EmbeddingSet, feats: FeatureTable) -> JoinedDataset:
    """Inner-joins embeddings with features on utterance id, sorted by id.

    Utterances present on only one side, and rows with any missing feature
    value, are dropped with a logged count. Style labels present on both
    sides must agree.
    """
    feat_index = {utt_id: i for i, utt_id in enumerate(feats.ids)}
    shared = sorted(set(emb.rows) & set(feat_index))
    if not shared:
        raise JoinError(
            f"task {emb.task!r}: no common utterance ids between embeddings "
            f"({len(emb)}) and features ({len(feats.ids)})"
        )
    kept, dropped = [], 0
    for utt_id in shared:
        i = feat_index[utt_id]
        style_f = feats.styles[i]
        style_e = emb.labels[utt_id]
        if style_e != style_f:
            raise ValidationError(
                f"task {emb.task!r}: id {utt_id!r} labeled {style_e!r} in embeddings "
                f"but {style_f!r} in features"
            )
        if np.all(np.isfinite(feats.values[i])):
            kept.append(utt_id)
        else:
            dropped += 1
    skipped_ids = len(emb) + len(feats.ids) - 2 * len(shared)
    if dropped or skipped_ids:
        log.info(
            "join(%s): kept %d rows, dropped %d with missing features, "
            "%d ids unmatched", emb.task, len(kept), dropped, skipped_ids,
        )
    if not kept:
        raise JoinError(f"task {emb.task!r}: all joined rows had missing features")
    idx = [feat_index[u] for u in kept]
    return JoinedDataset(
        task=emb.task,
        utterance_ids=kept,
        embeddings=emb.matrix(kept),
        features=feats.values[idx],
        feature_names=list(feats.names),
        styles=[feats.styles[i] for i in idx],
    )
