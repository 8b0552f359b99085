"""Dialogue corpus model and JSONL ingestion.

Every downstream stage consumes the one normalized conversation schema
defined here: one conversation per JSONL line, utterances indexed from 0,
labels lowercased at ingestion. Upstream dataset releases are reduced to
this format by per-source converters (see the stubs at the bottom).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .errors import DataError

SPLITS = ("train", "val", "test", "none")


def normalize_label(label: str) -> str:
    return label.strip().lower()


@dataclass(frozen=True)
class Utterance:
    """A single speaker turn. ``label`` is None for unlabeled turns."""

    index: int
    speaker: str
    text: str
    label: Optional[str] = None

    def __post_init__(self) -> None:
        if self.index < 0:
            raise DataError(f"utterance index must be >= 0, got {self.index}")
        if not self.speaker:
            raise DataError("utterance speaker id must be non-empty")
        if not self.text.strip():
            raise DataError(f"utterance {self.index} has empty text")


@dataclass(frozen=True)
class Conversation:
    """An ordered sequence of utterances by one or more speakers."""

    id: str
    utterances: tuple[Utterance, ...]
    domain: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "utterances", tuple(self.utterances))
        if not self.id:
            raise DataError("conversation id must be non-empty")
        if not self.utterances:
            raise DataError(f"conversation {self.id!r} has no utterances")
        indices = [u.index for u in self.utterances]
        if indices != list(range(len(indices))):
            raise DataError(
                f"conversation {self.id!r}: utterance indices must be contiguous "
                f"from 0, got {indices}"
            )

    @property
    def speakers(self) -> tuple[str, ...]:
        """Distinct speaker ids in order of first appearance."""
        seen: dict[str, None] = {}
        for u in self.utterances:
            seen.setdefault(u.speaker, None)
        return tuple(seen)

    @property
    def speaker_set(self) -> frozenset[str]:
        return frozenset(u.speaker for u in self.utterances)

    def fully_labeled(self) -> bool:
        return all(u.label is not None for u in self.utterances)


@dataclass(frozen=True)
class Corpus:
    """A named set of conversations sharing one emotion label set."""

    name: str
    label_set: tuple[str, ...]
    conversations: tuple[Conversation, ...]
    split: str = "none"

    def __post_init__(self) -> None:
        object.__setattr__(self, "label_set", tuple(self.label_set))
        object.__setattr__(self, "conversations", tuple(self.conversations))
        if not self.label_set:
            raise DataError("corpus label_set must be non-empty")
        if len(set(self.label_set)) != len(self.label_set):
            raise DataError("corpus label_set contains duplicates")
        if self.split not in SPLITS:
            raise DataError(f"split must be one of {SPLITS}, got {self.split!r}")
        seen_ids: set[str] = set()
        allowed = set(self.label_set)
        for conv in self.conversations:
            if conv.id in seen_ids:
                raise DataError(f"duplicate conversation id {conv.id!r}")
            seen_ids.add(conv.id)
            for u in conv.utterances:
                if u.label is not None and u.label not in allowed:
                    raise DataError(
                        f"conversation {conv.id!r} utterance {u.index}: "
                        f"label {u.label!r} not in corpus label set"
                    )

    def utterance_count(self) -> int:
        return sum(len(c.utterances) for c in self.conversations)


@dataclass(frozen=True)
class CorpusStats:
    conversations: int
    utterances: int
    label_counts: Mapping[str, int]
    domain_label_counts: Mapping[str, Mapping[str, int]] = field(default_factory=dict)


def load_label_manifest(path: str | Path) -> tuple[str, tuple[str, ...]]:
    """Read a ``{"name": ..., "labels": [...]}`` manifest."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read label manifest {path}: {exc}") from exc
    if not isinstance(data, dict) or "labels" not in data:
        raise DataError(f"label manifest {path} must contain a 'labels' array")
    labels = tuple(normalize_label(str(x)) for x in data["labels"])
    return str(data.get("name", "")), labels


def load_corpus(
    path: str | Path,
    expected_label_set: Optional[Sequence[str]] = None,
    *,
    name: Optional[str] = None,
    split: str = "none",
) -> Corpus:
    """Load a corpus from the one-conversation-per-line JSONL format.

    Labels are lowercased and trimmed. When ``expected_label_set`` is given,
    any other label is rejected with the offending line number; otherwise the
    label set is inferred in order of first appearance.
    """
    path = Path(path)
    expected = (
        tuple(normalize_label(x) for x in expected_label_set)
        if expected_label_set is not None
        else None
    )
    conversations: list[Conversation] = []
    seen_ids: set[str] = set()
    observed: dict[str, None] = {}
    dataset_name: Optional[str] = None

    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read corpus file {path}: {exc}") from exc

    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
        try:
            conv = _conversation_from_record(record)
        except DataError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        if dataset_name is None:
            dataset_name = str(record.get("dataset", "")) or None
        for u in conv.utterances:
            if u.label is None:
                continue
            if expected is not None and u.label not in expected:
                raise DataError(
                    f"{path}:{lineno}: unknown label {u.label!r} for utterance "
                    f"{u.index} of conversation {conv.id!r}"
                )
            observed.setdefault(u.label, None)
        if conv.id in seen_ids:
            raise DataError(f"{path}:{lineno}: duplicate conversation id {conv.id!r}")
        seen_ids.add(conv.id)
        conversations.append(conv)

    label_set = expected if expected is not None else tuple(observed)
    if not label_set:
        raise DataError(
            f"{path}: no labels present and no expected_label_set given; "
            "pass a label manifest"
        )
    return Corpus(
        name=name or dataset_name or "corpus",
        label_set=label_set,
        conversations=tuple(conversations),
        split=split,
    )


def _conversation_from_record(record: object) -> Conversation:
    if not isinstance(record, dict):
        raise DataError("conversation record must be a JSON object")
    conv_id = record.get("dialogue_id")
    if not isinstance(conv_id, str) or not conv_id:
        raise DataError("missing or empty 'dialogue_id'")
    raw_utts = record.get("utterances")
    if not isinstance(raw_utts, list):
        raise DataError(f"conversation {conv_id!r}: 'utterances' must be an array")
    utterances = []
    for u in raw_utts:
        if not isinstance(u, dict):
            raise DataError(f"conversation {conv_id!r}: utterance must be an object")
        label = u.get("label")
        utterances.append(
            Utterance(
                index=int(u.get("index", -1)),
                speaker=str(u.get("speaker", "")),
                text=str(u.get("text", "")),
                label=normalize_label(str(label)) if label is not None else None,
            )
        )
    domain = record.get("domain")
    return Conversation(
        id=conv_id,
        utterances=tuple(utterances),
        domain=str(domain) if domain is not None else None,
    )


def save_corpus(corpus: Corpus, path: str | Path, *, dataset: Optional[str] = None) -> None:
    """Write a corpus in the JSONL conversation format (deterministic bytes)."""
    path = Path(path)
    out = []
    for conv in corpus.conversations:
        record: dict = {"dialogue_id": conv.id, "dataset": dataset or corpus.name}
        if conv.domain is not None:
            record["domain"] = conv.domain
        record["utterances"] = [
            {"index": u.index, "speaker": u.speaker, "text": u.text, "label": u.label}
            for u in conv.utterances
        ]
        out.append(json.dumps(record, ensure_ascii=False))
    path.write_text("\n".join(out) + ("\n" if out else ""), encoding="utf-8")


def history_window(
    conv: Conversation, target_index: int, w: int
) -> list[tuple[str, str]]:
    """The last min(w, target_index+1) turns ending at the target, in order.

    Returns (speaker_id, text) pairs; the final pair is always the target.
    """
    if w < 1:
        raise DataError(f"history window must be >= 1, got {w}")
    if not 0 <= target_index < len(conv.utterances):
        raise DataError(
            f"target_index {target_index} out of range for conversation "
            f"{conv.id!r} with {len(conv.utterances)} utterances"
        )
    start = max(0, target_index - w + 1)
    return [(u.speaker, u.text) for u in conv.utterances[start : target_index + 1]]


def corpus_stats(corpus: Corpus) -> CorpusStats:
    """Per-label counts plus utterance/conversation totals.

    Label counts cover labeled utterances only; labels with no occurrences
    report zero. Conversations carrying a domain are tallied separately.
    """
    label_counts = {label: 0 for label in corpus.label_set}
    domain_counts: dict[str, dict[str, int]] = {}
    utterances = 0
    for conv in corpus.conversations:
        per_domain = None
        if conv.domain is not None:
            per_domain = domain_counts.setdefault(
                conv.domain, {label: 0 for label in corpus.label_set}
            )
        for u in conv.utterances:
            utterances += 1
            if u.label is not None:
                label_counts[u.label] += 1
                if per_domain is not None:
                    per_domain[u.label] += 1
    return CorpusStats(
        conversations=len(corpus.conversations),
        utterances=utterances,
        label_counts=label_counts,
        domain_label_counts=domain_counts,
    )


def merge_corpora(name: str, corpora: Sequence[Corpus], *, split: str = "none") -> Corpus:
    """Concatenate corpora that share a label set universe into one corpus."""
    labels: dict[str, None] = {}
    conversations: list[Conversation] = []
    for corpus in corpora:
        for label in corpus.label_set:
            labels.setdefault(label, None)
        conversations.extend(corpus.conversations)
    return Corpus(name=name, label_set=tuple(labels), conversations=tuple(conversations), split=split)


# -- converter stubs ---------------------------------------------------------
#
# Licensing prevents bundling IEMOCAP/MELD/EmoryNLP; these document the entry
# points for reducing the upstream releases to the normalized JSONL schema.


def convert_iemocap(raw_dir: str | Path, out_path: str | Path) -> None:
    """Convert an IEMOCAP release directory to normalized JSONL."""
    raise NotImplementedError(
        "obtain the licensed IEMOCAP release and emit the JSONL conversation "
        "schema documented in this module"
    )


def convert_meld(raw_dir: str | Path, out_path: str | Path) -> None:
    """Convert a MELD release directory to normalized JSONL."""
    raise NotImplementedError(
        "obtain the MELD release and emit the JSONL conversation schema "
        "documented in this module"
    )


def convert_emorynlp(raw_dir: str | Path, out_path: str | Path) -> None:
    """Convert an EmoryNLP release directory to normalized JSONL."""
    raise NotImplementedError(
        "obtain the EmoryNLP release and emit the JSONL conversation schema "
        "documented in this module"
    )
