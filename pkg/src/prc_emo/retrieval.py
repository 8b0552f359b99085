"""The demonstration retrieval repository: build, persist, query.

Every labeled utterance from the source corpora becomes one entry carrying
its text, label, origin (source dataset, dialogue id, position) and an
embedding vector. Queries run an exact cosine scan over the whole store --
at the tens of thousands of entries this repository holds, a linear scan
answers well under a second and stays oracle-testable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .corpus import Corpus
from .errors import DataError, ServiceError


@dataclass(frozen=True, eq=False)
class RepoEntry:
    text: str
    label: str
    source: str
    dialogue_id: str
    position: int
    vector: np.ndarray


@dataclass(frozen=True)
class RetrievalResult:
    entry: RepoEntry
    score: float
    index: int  # insertion index within the repository (tie-break order)


class Repository:
    """Immutable ordered store of embedded demonstration entries."""

    def __init__(self, entries: Sequence[RepoEntry], embed_dim: int, embedder_id: str):
        keys: set[tuple[str, str, int]] = set()
        for entry in entries:
            if entry.vector.shape != (embed_dim,):
                raise DataError(
                    f"entry ({entry.source!r}, {entry.dialogue_id!r}, {entry.position}) "
                    f"has dimension {entry.vector.shape}, expected ({embed_dim},)"
                )
            if not np.linalg.norm(entry.vector) > 0:
                raise DataError(
                    f"entry ({entry.source!r}, {entry.dialogue_id!r}, {entry.position}) "
                    "has a zero-norm vector"
                )
            key = (entry.source, entry.dialogue_id, entry.position)
            if key in keys:
                raise DataError(f"duplicate repository entry {key}")
            keys.add(key)
        self.entries: tuple[RepoEntry, ...] = tuple(entries)
        self.embed_dim = embed_dim
        self.embedder_id = embedder_id
        self._unit_matrix: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.entries)

    def unit_matrix(self) -> np.ndarray:
        """Row-normalized matrix of all entry vectors (built once)."""
        if self._unit_matrix is None:
            if not self.entries:
                self._unit_matrix = np.zeros((0, self.embed_dim), dtype=np.float64)
            else:
                matrix = np.vstack([e.vector for e in self.entries]).astype(np.float64)
                norms = np.linalg.norm(matrix, axis=1, keepdims=True)
                self._unit_matrix = matrix / norms
        return self._unit_matrix


def build_repository(
    corpora: Sequence[Corpus], embedder, *, batch_size: int = 64
) -> Repository:
    """Embed every utterance of every corpus, one entry per utterance.

    Entry order follows corpus order, so repeated builds with the same
    embedder are identical. All utterances must carry labels.
    """
    texts: list[str] = []
    meta: list[tuple[str, str, str, int]] = []
    for corpus in corpora:
        for conv in corpus.conversations:
            for u in conv.utterances:
                if u.label is None:
                    raise DataError(
                        f"corpus {corpus.name!r} conversation {conv.id!r}: "
                        f"utterance {u.index} is unlabeled"
                    )
                texts.append(u.text)
                meta.append((u.label, corpus.name, conv.id, u.index))

    if not texts:
        return Repository((), embed_dim=embedder.dim, embedder_id=embedder.embedder_id)

    blocks: list[np.ndarray] = []
    dim: Optional[int] = None
    for start in range(0, len(texts), batch_size):
        batch = texts[start : start + batch_size]
        try:
            block = np.asarray(embedder.embed(batch), dtype=np.float64)
        except (DataError, ServiceError) as exc:
            raise type(exc)(
                f"embedding batch starting at entry {start} failed: {exc}"
            ) from exc
        if block.shape[0] != len(batch):
            raise DataError(
                f"embedder returned {block.shape[0]} vectors for a batch of {len(batch)}"
            )
        if dim is None:
            dim = int(block.shape[1])
        elif block.shape[1] != dim:
            raise DataError(
                f"embedding dimension changed from {dim} to {block.shape[1]} "
                f"in batch starting at entry {start}"
            )
        blocks.append(block)

    matrix = np.vstack(blocks)
    matrix.setflags(write=False)
    entries = [
        RepoEntry(
            text=texts[i],
            label=meta[i][0],
            source=meta[i][1],
            dialogue_id=meta[i][2],
            position=meta[i][3],
            vector=matrix[i],
        )
        for i in range(len(texts))
    ]
    return Repository(entries, embed_dim=int(matrix.shape[1]), embedder_id=embedder.embedder_id)


# Scores are ranked and reported at this granularity so that mathematically
# equal cosines tie deterministically regardless of summation order.
SCORE_DECIMALS = 12


def retrieve_top_k(
    repo: Repository,
    query_text: str,
    k: int,
    embedder,
    exclusion: Optional[Iterable[tuple[str, str]]] = None,
) -> list[RetrievalResult]:
    """Exact top-k cosine retrieval over the repository.

    Scores are the cosine similarity rounded to SCORE_DECIMALS places;
    results are sorted by score descending with ties broken by insertion
    index. Entries whose (source, dialogue_id) is in ``exclusion`` never
    appear, which keeps a query from retrieving its own dialogue.
    """
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    excluded = set(exclusion) if exclusion else set()
    eligible = [
        i
        for i, entry in enumerate(repo.entries)
        if (entry.source, entry.dialogue_id) not in excluded
    ]
    if not eligible:
        raise DataError("no eligible repository entries after exclusion")

    query = np.asarray(embedder.embed([query_text]), dtype=np.float64)[0]
    if query.shape != (repo.embed_dim,):
        raise DataError(
            f"query embedding dimension {query.shape[0]} does not match "
            f"repository dimension {repo.embed_dim}"
        )
    norm = np.linalg.norm(query)
    if not norm > 0:
        raise DataError("query embedded to a zero-norm vector")
    raw = repo.unit_matrix()[eligible] @ (query / norm)
    scored = [
        (round(min(1.0, max(-1.0, float(s))), SCORE_DECIMALS), eligible[j])
        for j, s in enumerate(raw)
    ]
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [
        RetrievalResult(entry=repo.entries[index], score=score, index=index)
        for score, index in scored[:k]
    ]


def _nine_sig_digits(x: float) -> float:
    return float(f"{x:.9g}")


def save_repository(repo: Repository, path: str | Path) -> None:
    """Write one JSON entry per line; vectors as 9-significant-digit decimals.

    Saving a loaded repository reproduces the file byte for byte.
    """
    lines = []
    for entry in repo.entries:
        record = {
            "text": entry.text,
            "label": entry.label,
            "source": entry.source,
            "dialogue_id": entry.dialogue_id,
            "position": entry.position,
            "vector": [_nine_sig_digits(v) for v in entry.vector.tolist()],
        }
        lines.append(json.dumps(record, ensure_ascii=False))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_repository(path: str | Path, *, embedder_id: str = "unknown") -> Repository:
    path = Path(path)
    try:
        raw_lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read repository file {path}: {exc}") from exc

    rows: list[dict] = []
    dim: Optional[int] = None
    for lineno, line in enumerate(raw_lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
        vector = record.get("vector")
        if not isinstance(vector, list) or not vector:
            raise DataError(f"{path}:{lineno}: missing or empty vector")
        if dim is None:
            dim = len(vector)
        elif len(vector) != dim:
            raise DataError(
                f"{path}:{lineno}: vector dimension {len(vector)} does not match {dim}"
            )
        rows.append(record)

    if not rows:
        return Repository((), embed_dim=0, embedder_id=embedder_id)

    matrix = np.asarray([r["vector"] for r in rows], dtype=np.float64)
    matrix.setflags(write=False)
    entries = []
    for i, record in enumerate(rows):
        try:
            entries.append(
                RepoEntry(
                    text=str(record["text"]),
                    label=str(record["label"]),
                    source=str(record["source"]),
                    dialogue_id=str(record["dialogue_id"]),
                    position=int(record["position"]),
                    vector=matrix[i],
                )
            )
        except KeyError as exc:
            raise DataError(f"{path}: entry {i} is missing field {exc}") from exc
    return Repository(entries, embed_dim=int(matrix.shape[1]), embedder_id=embedder_id)
