"""Conversation difficulty and the easy-to-hard training schedule.

Difficulty of a conversation is the smoothed ratio

    DIF = (WES_same + WES_diff + N_sp) / (N_u + N_sp)

where WES_same accumulates weighted shifts along each speaker's own emotion
sequence, WES_diff accumulates them over adjacent utterance pairs spoken by
different speakers, N_u is the utterance count and the speaker count N_sp
acts as a smoothing factor. Conversations are then sorted by DIF, split into
n contiguous buckets, and epochs accumulate buckets easy-to-hard before
finishing on the full set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import Conversation, Corpus
from .errors import DataError
from .geometry import EmotionWheel, WesParams, similarity, wes

# Cross-speaker accounting: count a pair only when the emotion changes, or
# count every adjacent cross-speaker pair regardless.
SHIFT_REQUIRED = "shift_required"
ALWAYS = "always"
DIFF_SPEAKER_MODES = (SHIFT_REQUIRED, ALWAYS)


@dataclass(frozen=True)
class DifficultyReport:
    """Per-conversation difficulty decomposition."""

    conversation_id: str
    wes_same: float
    wes_diff: float
    n_sp: int
    n_u: int
    n_shift_same: int
    n_shift_diff: int
    dif: float


@dataclass(frozen=True)
class CurriculumPlan:
    """Difficulty-ordered buckets plus (optionally) the per-epoch sets."""

    buckets: tuple[tuple[str, ...], ...]
    dif: Mapping[str, float]
    epochs: tuple[tuple[str, ...], ...] = ()

    @property
    def n(self) -> int:
        return len(self.buckets)

    @property
    def t(self) -> int:
        return len(self.epochs)


def conversation_difficulty(
    conv: Conversation,
    wheel: EmotionWheel,
    params: WesParams,
    diff_speaker_mode: str = SHIFT_REQUIRED,
) -> DifficultyReport:
    """Score one fully labeled conversation.

    Same-speaker shifts are read off each speaker's emotion sequence and
    contribute only when the emotion changes. Cross-speaker contributions
    follow ``diff_speaker_mode``.
    """
    if diff_speaker_mode not in DIFF_SPEAKER_MODES:
        raise DataError(
            f"diff_speaker_mode must be one of {DIFF_SPEAKER_MODES}, "
            f"got {diff_speaker_mode!r}"
        )
    for u in conv.utterances:
        if u.label is None:
            raise DataError(
                f"conversation {conv.id!r}: utterance {u.index} is unlabeled"
            )
        if u.label not in wheel:
            raise DataError(
                f"conversation {conv.id!r}: label {u.label!r} is not on the wheel"
            )

    sequences: dict[str, list[str]] = {}
    for u in conv.utterances:
        sequences.setdefault(u.speaker, []).append(u.label)  # type: ignore[arg-type]

    wes_same = 0.0
    n_shift_same = 0
    for labels in sequences.values():
        for a, b in zip(labels, labels[1:]):
            if a != b:
                wes_same += wes(params, similarity(wheel, a, b))
                n_shift_same += 1

    wes_diff = 0.0
    n_shift_diff = 0
    for u, v in zip(conv.utterances, conv.utterances[1:]):
        if u.speaker == v.speaker:
            continue
        if diff_speaker_mode == SHIFT_REQUIRED and u.label == v.label:
            continue
        wes_diff += wes(params, similarity(wheel, u.label, v.label))  # type: ignore[arg-type]
        n_shift_diff += 1

    n_sp = len(sequences)
    n_u = len(conv.utterances)
    dif = (wes_same + wes_diff + n_sp) / (n_u + n_sp)
    return DifficultyReport(
        conversation_id=conv.id,
        wes_same=wes_same,
        wes_diff=wes_diff,
        n_sp=n_sp,
        n_u=n_u,
        n_shift_same=n_shift_same,
        n_shift_diff=n_shift_diff,
        dif=dif,
    )


def difficulty_reports(
    corpus: Corpus,
    wheel: EmotionWheel,
    params: WesParams,
    diff_speaker_mode: str = SHIFT_REQUIRED,
) -> list[DifficultyReport]:
    """Score every fully labeled conversation; unlabeled ones are skipped
    (difficulty needs gold labels, so the curriculum covers training data only)."""
    return [
        conversation_difficulty(conv, wheel, params, diff_speaker_mode)
        for conv in corpus.conversations
        if conv.fully_labeled()
    ]


def partition_buckets(reports: Sequence[DifficultyReport], n: int) -> CurriculumPlan:
    """Sort by (dif, id) and split into n contiguous near-equal buckets.

    Sizes differ by at most one; earlier buckets take the extra item, so the
    boundary law max(dif of bucket i) <= min(dif of bucket i+1) holds.
    """
    if n < 1:
        raise DataError(f"bucket count must be >= 1, got {n}")
    if n > len(reports):
        raise DataError(
            f"bucket count {n} exceeds the {len(reports)} available conversations"
        )
    ids = [r.conversation_id for r in reports]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate conversation ids in difficulty reports")

    ordered = sorted(reports, key=lambda r: (r.dif, r.conversation_id))
    base, extra = divmod(len(ordered), n)
    buckets: list[tuple[str, ...]] = []
    pos = 0
    for i in range(n):
        size = base + (1 if i < extra else 0)
        buckets.append(tuple(r.conversation_id for r in ordered[pos : pos + size]))
        pos += size
    return CurriculumPlan(
        buckets=tuple(buckets),
        dif={r.conversation_id: r.dif for r in ordered},
    )


def epoch_schedule(plan: CurriculumPlan, t: int) -> CurriculumPlan:
    """Fill in the per-epoch conversation sets for t epochs.

    Epoch e (1-based) trains on buckets 1..e while e <= n; every later epoch
    trains on the full set.
    """
    if t < plan.n:
        raise DataError(f"epochs ({t}) must be >= bucket count ({plan.n})")
    epochs: list[tuple[str, ...]] = []
    for e in range(1, t + 1):
        take = min(e, plan.n)
        epoch_ids: list[str] = []
        for bucket in plan.buckets[:take]:
            epoch_ids.extend(bucket)
        epochs.append(tuple(epoch_ids))
    return replace(plan, epochs=tuple(epochs))


def emit_manifest(plan: CurriculumPlan, path: str | Path) -> None:
    """Write one JSONL record per epoch for an external training harness.

    Output bytes are deterministic for identical inputs.
    """
    if not plan.epochs:
        raise DataError("schedule has no epochs; run epoch_schedule first")
    lines = []
    for e, ids in enumerate(plan.epochs, start=1):
        record = {
            "epoch": e,
            "conversations": list(ids),
            "dif": {cid: plan.dif[cid] for cid in ids},
        }
        lines.append(json.dumps(record, ensure_ascii=False))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_manifest(path: str | Path) -> list[dict]:
    """Read back an epoch manifest written by emit_manifest."""
    records = []
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: malformed manifest line: {exc}") from exc
    return records
