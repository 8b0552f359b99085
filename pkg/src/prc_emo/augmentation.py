"""Synthetic dialogue augmentation with label masking and human verification.

Dialogues are generated in two stages (subtopics first, then a labeled
two-person dialogue per subtopic), their labels are masked, and two
annotators judge every utterance independently. A sample is accepted only
when both verdicts equal the hidden original label. Generation is steered
toward the emotions still short of their target counts and hard-stops after
three rounds, whatever deficit remains.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .client import ChatClient, ChatRequest
from .corpus import Conversation, Corpus, Utterance
from .errors import DataError
from .prompting import load_template

FIVE_EMOTIONS = ("happiness", "neutral", "fear", "sadness", "anger")
DOMAINS = (
    "healthcare",
    "workplace",
    "education",
    "family",
    "social",
    "entertainment",
    "comprehensive",
)

MAX_ROUNDS = 3

PENDING = "pending"
ACCEPTED = "accepted"
REJECTED = "rejected"

# Emotion-by-domain composition of the shipped self-built reference corpus.
REFERENCE_DISTRIBUTION: dict[str, dict[str, int]] = {
    "healthcare": {"happiness": 171, "neutral": 421, "fear": 345, "sadness": 381, "anger": 307},
    "workplace": {"happiness": 155, "neutral": 550, "fear": 398, "sadness": 459, "anger": 300},
    "education": {"happiness": 486, "neutral": 324, "fear": 245, "sadness": 276, "anger": 406},
    "family": {"happiness": 147, "neutral": 562, "fear": 392, "sadness": 451, "anger": 463},
    "social": {"happiness": 518, "neutral": 341, "fear": 320, "sadness": 312, "anger": 297},
    "entertainment": {"happiness": 613, "neutral": 332, "fear": 281, "sadness": 267, "anger": 175},
    "comprehensive": {"happiness": 623, "neutral": 779, "fear": 642, "sadness": 652, "anger": 618},
}


@dataclass(frozen=True)
class ScenarioSpec:
    """A generation target: one domain plus the emotions to foreground."""

    domain: str
    emotion_targets: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "emotion_targets", tuple(self.emotion_targets))
        if self.domain not in DOMAINS:
            raise DataError(f"unknown domain {self.domain!r}; expected one of {DOMAINS}")
        if not self.emotion_targets:
            raise DataError("emotion_targets must be non-empty")
        bad = set(self.emotion_targets) - set(FIVE_EMOTIONS)
        if bad:
            raise DataError(f"emotion targets outside the five-category set: {sorted(bad)}")


@dataclass
class AnnotationSample:
    """One masked utterance awaiting two independent verdicts.

    ``original_label`` stays server-side; annotator-facing payloads are built
    by ``queue_view`` and never include it.
    """

    sample_id: str
    dialogue_id: str
    index: int
    text: str
    original_label: str
    domain: Optional[str] = None
    verdicts: dict[str, str] = field(default_factory=dict)
    status: str = PENDING


@dataclass(frozen=True)
class AugmentationRound:
    round_index: int
    deficit: Mapping[str, int]
    generated_dialogues: int
    samples_enqueued: int
    accepted: int
    rejected: int
    accepted_by_emotion: Mapping[str, int]


def sample_id_for(dialogue_id: str, index: int) -> str:
    return f"{dialogue_id}#{index}"


class AnnotationStore:
    """Thread-safe sample store behind the annotation service.

    Verdict writes are atomic per (sample_id, annotator); the status
    resolution happens under the same lock as the second verdict, so
    concurrent annotators cannot race an acceptance decision.
    """

    def __init__(self, targets: Optional[Mapping[str, int]] = None, round_index: int = 1):
        self._lock = threading.Lock()
        self.samples: dict[str, AnnotationSample] = {}
        self.contexts: dict[str, list[tuple[str, str]]] = {}
        self.targets = dict(targets or {})
        self.round_index = round_index

    def add_dialogue(self, conv: Conversation) -> list[AnnotationSample]:
        """Mask a labeled dialogue into pending samples (idempotent by id)."""
        created: list[AnnotationSample] = []
        with self._lock:
            if conv.id not in self.contexts:
                self.contexts[conv.id] = [(u.speaker, u.text) for u in conv.utterances]
            for u in conv.utterances:
                if u.label is None:
                    raise DataError(
                        f"dialogue {conv.id!r} utterance {u.index} has no label to mask"
                    )
                sid = sample_id_for(conv.id, u.index)
                if sid in self.samples:
                    continue
                sample = AnnotationSample(
                    sample_id=sid,
                    dialogue_id=conv.id,
                    index=u.index,
                    text=u.text,
                    original_label=u.label,
                    domain=conv.domain,
                )
                self.samples[sid] = sample
                created.append(sample)
        return created

    def queue_view(self, sample: AnnotationSample) -> dict:
        """Annotator-facing payload: context plus label choices, never the
        original label."""
        context = [
            {"speaker": speaker, "text": text, "target": i == sample.index}
            for i, (speaker, text) in enumerate(self.contexts.get(sample.dialogue_id, []))
        ]
        return {
            "sample_id": sample.sample_id,
            "dialogue_id": sample.dialogue_id,
            "index": sample.index,
            "text": sample.text,
            "domain": sample.domain,
            "context": context,
            "labels": list(FIVE_EMOTIONS),
        }

    def pending_for(self, annotator: str) -> list[dict]:
        """Pending samples this annotator has not judged yet, in enqueue order."""
        with self._lock:
            return [
                self.queue_view(s)
                for s in self.samples.values()
                if s.status == PENDING and annotator not in s.verdicts
            ]

    def record_verdict(self, sample_id: str, annotator: str, label: str) -> AnnotationSample:
        if not annotator:
            raise DataError("annotator id must be non-empty")
        if label not in FIVE_EMOTIONS:
            raise DataError(
                f"label {label!r} is not one of the five categories {FIVE_EMOTIONS}"
            )
        with self._lock:
            sample = self.samples.get(sample_id)
            if sample is None:
                raise DataError(f"unknown sample {sample_id!r}")
            if sample.status != PENDING:
                if sample.verdicts.get(annotator) == label:
                    return sample  # idempotent re-submit after resolution
                # covers both a changed verdict and a third distinct annotator:
                # two verdicts always resolve, so a pending sample has at most one
                raise DataError(f"sample {sample_id!r} is already {sample.status}")
            sample.verdicts[annotator] = label
            if len(sample.verdicts) == 2:
                sample.status = (
                    ACCEPTED
                    if all(v == sample.original_label for v in sample.verdicts.values())
                    else REJECTED
                )
            return sample

    def _tally(self, samples: Iterable[AnnotationSample], by: str) -> dict[str, dict[str, int]]:
        out: dict[str, dict[str, int]] = {}
        for s in samples:
            key = s.original_label if by == "emotion" else (s.domain or "unknown")
            bucket = out.setdefault(key, {PENDING: 0, ACCEPTED: 0, REJECTED: 0})
            bucket[s.status] += 1
        return out

    def progress(self) -> dict:
        with self._lock:
            samples = list(self.samples.values())
            by_status = {PENDING: 0, ACCEPTED: 0, REJECTED: 0}
            per_annotator: dict[str, int] = {}
            for s in samples:
                by_status[s.status] += 1
                for annotator in s.verdicts:
                    per_annotator[annotator] = per_annotator.get(annotator, 0) + 1
            return {
                "pending": by_status[PENDING],
                "accepted": by_status[ACCEPTED],
                "rejected": by_status[REJECTED],
                "per_emotion": self._tally(samples, "emotion"),
                "per_domain": self._tally(samples, "domain"),
                "per_annotator": per_annotator,
                "round": self.round_index,
            }

    def agreement(self) -> dict:
        with self._lock:
            samples = list(self.samples.values())
            accepted_by_emotion = {emo: 0 for emo in FIVE_EMOTIONS}
            for s in samples:
                if s.status == ACCEPTED:
                    accepted_by_emotion[s.original_label] += 1
            deficit = {
                emo: max(0, target - accepted_by_emotion.get(emo, 0))
                for emo, target in sorted(self.targets.items())
            }
            per_emotion = {
                emo: {ACCEPTED: counts[ACCEPTED], REJECTED: counts[REJECTED]}
                for emo, counts in self._tally(samples, "emotion").items()
            }
            per_domain = {
                domain: {ACCEPTED: counts[ACCEPTED], REJECTED: counts[REJECTED]}
                for domain, counts in self._tally(samples, "domain").items()
            }
            return {
                "per_emotion": per_emotion,
                "per_domain": per_domain,
                "targets": dict(sorted(self.targets.items())),
                "deficit": deficit,
                "round": self.round_index,
            }

    def accepted_samples(self) -> list[AnnotationSample]:
        with self._lock:
            return [s for s in self.samples.values() if s.status == ACCEPTED]


def mask_and_enqueue(store: AnnotationStore, dialogues: Iterable[Conversation]) -> list[AnnotationSample]:
    """One pending sample per utterance; repeated dialogues are no-ops."""
    created: list[AnnotationSample] = []
    for conv in dialogues:
        created.extend(store.add_dialogue(conv))
    return created


def record_verdict(
    store: AnnotationStore, sample_id: str, annotator_id: str, label: str
) -> AnnotationSample:
    return store.record_verdict(sample_id, annotator_id, label)


# -- generation --------------------------------------------------------------

_SUBTOPIC_LINE = re.compile(r"^\s*\d+[.)]\s*(.+?)\s*$")
_DIALOGUE_LINE = re.compile(r"^Speaker ([A-Z]) \[([a-z]+)\]: (.+)$")


def generate_subtopics(
    scenario: ScenarioSpec,
    client: ChatClient,
    *,
    count: int = 30,
    exclude: Sequence[str] = (),
    model_id: str = "stub-chat",
    max_attempts: int = 4,
) -> list[str]:
    """Ask the model for ``count`` unique subtopics, topping up as needed."""
    collected: dict[str, str] = {}
    known = {s.strip().lower() for s in exclude}
    for _ in range(max_attempts):
        missing = count - len(collected)
        if missing <= 0:
            break
        exclusion_lines = [f"- {s}" for s in list(exclude) + list(collected.values())]
        exclusions = (
            "Do not repeat any of these existing subtopics:\n" + "\n".join(exclusion_lines)
            if exclusion_lines
            else ""
        )
        prompt = load_template("subtopics").format(
            count=missing,
            domain=scenario.domain,
            emotions=", ".join(scenario.emotion_targets),
            exclusions=exclusions,
        )
        response = client.chat(ChatRequest(user_text=prompt, model_id=model_id)).text
        for line in response.splitlines():
            match = _SUBTOPIC_LINE.match(line)
            if not match:
                continue
            subtopic = match.group(1)
            key = subtopic.strip().lower()
            if key and key not in known and key not in collected:
                collected[key] = subtopic
            if len(collected) >= count:
                break
    if len(collected) < count:
        raise DataError(
            f"could not collect {count} unique subtopics for {scenario.domain!r} "
            f"(got {len(collected)} after {max_attempts} attempts)"
        )
    return list(collected.values())


def generate_dialogue(
    subtopic: str,
    scenario: ScenarioSpec,
    client: ChatClient,
    *,
    model_id: str = "stub-chat",
) -> Conversation:
    """Generate one labeled two-person dialogue; parsing is strict.

    Any unparsable non-empty line, a label outside the five categories, a
    single-speaker output, or fewer than two utterances aborts the dialogue.
    """
    prompt = load_template("dialogue").format(
        domain=scenario.domain,
        subtopic=subtopic,
        labels=", ".join(FIVE_EMOTIONS),
        emotions=", ".join(scenario.emotion_targets),
    )
    response = client.chat(ChatRequest(user_text=prompt, model_id=model_id)).text
    utterances: list[Utterance] = []
    for lineno, line in enumerate(response.splitlines(), start=1):
        if not line.strip():
            continue
        match = _DIALOGUE_LINE.match(line)
        if not match:
            raise DataError(f"unparsable dialogue line {lineno}: {line!r}")
        speaker, label, text = match.groups()
        if label not in FIVE_EMOTIONS:
            raise DataError(f"dialogue line {lineno}: label {label!r} outside the five categories")
        utterances.append(
            Utterance(index=len(utterances), speaker=speaker, text=text, label=label)
        )
    if len(utterances) < 2:
        raise DataError("generated dialogue has fewer than two utterances")
    speakers = {u.speaker for u in utterances}
    if len(speakers) != 2:
        raise DataError(f"generated dialogue must have exactly 2 speakers, got {len(speakers)}")
    digest = hashlib.sha256(f"{scenario.domain}\x00{subtopic}".encode("utf-8")).hexdigest()[:10]
    return Conversation(
        id=f"aug-{scenario.domain}-{digest}",
        utterances=tuple(utterances),
        domain=scenario.domain,
    )


# -- round control -----------------------------------------------------------

Annotator = tuple[str, Callable[[dict], str]]


def keyword_annotator(view: dict) -> str:
    """Offline auto-verdict: pick the emotion word mentioned in the text."""
    text = view["text"].lower()
    for emotion in FIVE_EMOTIONS:
        if re.search(rf"\b{emotion}\b", text):
            return emotion
    return "neutral"


def emotion_deficits(corpus: Optional[Corpus], targets: Mapping[str, int]) -> dict[str, int]:
    counts = {emo: 0 for emo in FIVE_EMOTIONS}
    if corpus is not None:
        for conv in corpus.conversations:
            for u in conv.utterances:
                if u.label in counts:
                    counts[u.label] += 1
    out = {}
    for emotion, target in targets.items():
        if emotion not in FIVE_EMOTIONS:
            raise DataError(f"target emotion {emotion!r} outside the five categories")
        out[emotion] = max(0, int(target) - counts[emotion])
    return out


def _empty_augmented_corpus() -> Corpus:
    return Corpus(name="augmented", label_set=FIVE_EMOTIONS, conversations=(), split="none")


def round_controller(
    corpus_so_far: Optional[Corpus],
    targets: Mapping[str, int],
    client: ChatClient,
    *,
    round_index: int,
    annotators: Sequence[Annotator],
    store: Optional[AnnotationStore] = None,
    used_subtopics: Optional[dict[str, list[str]]] = None,
    max_dialogues: int = 140,
    expected_yield: int = 4,
    model_id: str = "stub-chat",
) -> tuple[AugmentationRound, Corpus]:
    """Run one generate -> mask -> annotate -> ingest round.

    Generation volume is steered by the per-emotion deficits; with no deficit
    the round is a no-op. Partially accepted dialogues are ingested with
    their accepted utterances reindexed into a contiguous conversation.
    """
    if not 1 <= round_index <= MAX_ROUNDS:
        raise DataError(f"round_index must be in 1..{MAX_ROUNDS}, got {round_index}")
    if len(annotators) != 2 or annotators[0][0] == annotators[1][0]:
        raise DataError("exactly two distinct annotators are required")

    corpus = corpus_so_far if corpus_so_far is not None else _empty_augmented_corpus()
    deficits = emotion_deficits(corpus, targets)
    needed = {emo: n for emo, n in deficits.items() if n > 0}
    if not needed:
        report = AugmentationRound(
            round_index=round_index,
            deficit=deficits,
            generated_dialogues=0,
            samples_enqueued=0,
            accepted=0,
            rejected=0,
            accepted_by_emotion={},
        )
        return report, corpus

    focus = tuple(sorted(needed, key=lambda e: (-needed[e], e)))
    total_needed = sum(needed.values())
    planned = min(max_dialogues, max(1, math.ceil(total_needed / expected_yield)))

    if store is None:
        store = AnnotationStore(targets=targets, round_index=round_index)
    if used_subtopics is None:
        used_subtopics = {}

    existing_ids = {c.id for c in corpus.conversations}
    dialogues: list[Conversation] = []
    subtopic_pools: dict[str, list[str]] = {}
    for i in range(planned):
        domain = DOMAINS[i % len(DOMAINS)]
        if domain not in subtopic_pools:
            scenario = ScenarioSpec(domain=domain, emotion_targets=focus)
            subtopic_pools[domain] = generate_subtopics(
                scenario, client, exclude=used_subtopics.get(domain, []), model_id=model_id
            )
        pool = subtopic_pools[domain]
        if not pool:
            continue
        subtopic = pool.pop(0)
        used_subtopics.setdefault(domain, []).append(subtopic)
        scenario = ScenarioSpec(domain=domain, emotion_targets=focus)
        conv = generate_dialogue(subtopic, scenario, client, model_id=model_id)
        if conv.id in existing_ids or any(d.id == conv.id for d in dialogues):
            continue
        dialogues.append(conv)

    enqueued = mask_and_enqueue(store, dialogues)
    for annotator_id, judge in annotators:
        for view in store.pending_for(annotator_id):
            store.record_verdict(view["sample_id"], annotator_id, judge(view))

    accepted_by_emotion: dict[str, int] = {}
    accepted_count = 0
    rejected_count = 0
    new_conversations: list[Conversation] = []
    for conv in dialogues:
        kept: list[Utterance] = []
        for u in conv.utterances:
            sample = store.samples[sample_id_for(conv.id, u.index)]
            if sample.status == ACCEPTED:
                kept.append(
                    Utterance(index=len(kept), speaker=u.speaker, text=u.text, label=u.label)
                )
                accepted_count += 1
                accepted_by_emotion[u.label] = accepted_by_emotion.get(u.label, 0) + 1  # type: ignore[index]
            elif sample.status == REJECTED:
                rejected_count += 1
        if kept:
            new_conversations.append(
                Conversation(id=conv.id, utterances=tuple(kept), domain=conv.domain)
            )

    updated = Corpus(
        name=corpus.name,
        label_set=corpus.label_set,
        conversations=tuple(corpus.conversations) + tuple(new_conversations),
        split=corpus.split,
    )
    report = AugmentationRound(
        round_index=round_index,
        deficit=deficits,
        generated_dialogues=len(dialogues),
        samples_enqueued=len(enqueued),
        accepted=accepted_count,
        rejected=rejected_count,
        accepted_by_emotion=accepted_by_emotion,
    )
    return report, updated


def run_augmentation(
    targets: Mapping[str, int],
    client: ChatClient,
    annotators: Sequence[Annotator],
    *,
    seed_corpus: Optional[Corpus] = None,
    max_dialogues_per_round: int = 140,
    model_id: str = "stub-chat",
) -> tuple[Corpus, list[AugmentationRound]]:
    """Run up to three generate-and-filter rounds toward the targets.

    Any deficit remaining after round three is reported, never chased
    further.
    """
    corpus = seed_corpus if seed_corpus is not None else _empty_augmented_corpus()
    used_subtopics: dict[str, list[str]] = {}
    rounds: list[AugmentationRound] = []
    for round_index in range(1, MAX_ROUNDS + 1):
        report, corpus = round_controller(
            corpus,
            targets,
            client,
            round_index=round_index,
            annotators=annotators,
            used_subtopics=used_subtopics,
            max_dialogues=max_dialogues_per_round,
            model_id=model_id,
        )
        rounds.append(report)
    return corpus, rounds


# -- reference fixture -------------------------------------------------------


def build_reference_corpus(*, utterances_per_dialogue: int = 8) -> Corpus:
    """Synthesize a corpus matching REFERENCE_DISTRIBUTION exactly.

    Deterministic stand-in for the shipped self-built augmentation set:
    same emotion-by-domain marginals, synthetic text.
    """
    conversations: list[Conversation] = []
    for domain in DOMAINS:
        labels: list[str] = []
        for emotion in FIVE_EMOTIONS:
            labels.extend([emotion] * REFERENCE_DISTRIBUTION[domain][emotion])
        for chunk_start in range(0, len(labels), utterances_per_dialogue):
            chunk = labels[chunk_start : chunk_start + utterances_per_dialogue]
            conv_index = chunk_start // utterances_per_dialogue
            utterances = tuple(
                Utterance(
                    index=i,
                    speaker="A" if i % 2 == 0 else "B",
                    text=f"{domain} sample {chunk_start + i:05d} voicing {label}",
                    label=label,
                )
                for i, label in enumerate(chunk)
            )
            conversations.append(
                Conversation(
                    id=f"ref-{domain}-{conv_index:04d}",
                    utterances=utterances,
                    domain=domain,
                )
            )
    return Corpus(
        name="augmented",
        label_set=FIVE_EMOTIONS,
        conversations=tuple(conversations),
        split="none",
    )


def rounds_to_json(rounds: Sequence[AugmentationRound]) -> str:
    return json.dumps(
        [
            {
                "round": r.round_index,
                "deficit": dict(r.deficit),
                "generated_dialogues": r.generated_dialogues,
                "samples_enqueued": r.samples_enqueued,
                "accepted": r.accepted,
                "rejected": r.rejected,
                "accepted_by_emotion": dict(r.accepted_by_emotion),
            }
            for r in rounds
        ],
        ensure_ascii=False,
        indent=2,
    )
