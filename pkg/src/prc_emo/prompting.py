"""Prompt construction: interpretation, speaker, and recognition templates.

Templates live as versioned resource files with named placeholders and LF
line endings; rendering is deterministic, so identical inputs always yield
byte-identical prompts. The recognition prompt carries five sections in a
fixed order, each introduced by a unique ``### `` delimiter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Mapping, Optional, Sequence

from .corpus import Conversation, Utterance, history_window
from .errors import DataError

SECTION_INSTRUCTION = "### Instruction"
SECTION_HISTORY = "### Historical Content"
SECTION_KNOWLEDGE = "### External Knowledge"
SECTION_DEMOS = "### Demonstration Retrieval"
SECTION_LABELS = "### Label Statement"
SECTION_ORDER = (
    SECTION_INSTRUCTION,
    SECTION_HISTORY,
    SECTION_KNOWLEDGE,
    SECTION_DEMOS,
    SECTION_LABELS,
)

NO_DEMOS_SENTINEL = "(no demonstrations retrieved)"
NO_KNOWLEDGE_SENTINEL = "(no external knowledge available)"

EXPLICIT = "explicit"
IMPLICIT = "implicit"

MAX_DEMONSTRATIONS = 3


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    """Read a bundled template resource (UTF-8, LF line endings)."""
    return (
        resources.files("prc_emo")
        .joinpath(f"templates/{name}.txt")
        .read_text(encoding="utf-8")
    )


_template = load_template


def _oneline(text: str) -> str:
    # prompts are parsed line-wise; utterance text must not inject newlines
    return text.replace("\r", " ").replace("\n", " ")


def render_history(history: Sequence[tuple[str, str]]) -> str:
    return "\n".join(f"{speaker}: {_oneline(text)}" for speaker, text in history)


@dataclass(frozen=True)
class ExternalKnowledge:
    """Model-extracted context injected into the recognition prompt."""

    speaker_traits: Mapping[str, str] = field(default_factory=dict)
    explicit_interpretation: Optional[str] = None
    implicit_interpretation: Optional[str] = None

    def __post_init__(self) -> None:
        for speaker, trait in self.speaker_traits.items():
            if not trait.strip():
                raise DataError(f"empty speaker trait for {speaker!r}")
        for name, value in (
            ("explicit_interpretation", self.explicit_interpretation),
            ("implicit_interpretation", self.implicit_interpretation),
        ):
            if value is not None and not value.strip():
                raise DataError(f"{name} present but empty")


@dataclass(frozen=True)
class PromptBundle:
    """The five recognition-prompt components plus their rendered text."""

    instruction: str
    history_lines: tuple[str, ...]
    knowledge_block: str
    demonstrations: tuple[tuple[str, str], ...]
    label_statement: str
    target_marker: str
    text: str


def build_interpretation_prompt(
    history: Sequence[tuple[str, str]], target: Utterance, kind: str
) -> str:
    """Prompt for the emotion a speaker expresses (explicit) or actually
    feels without saying (implicit) in the final windowed utterance."""
    if kind not in (EXPLICIT, IMPLICIT):
        raise DataError(f"kind must be '{EXPLICIT}' or '{IMPLICIT}', got {kind!r}")
    if not history:
        raise DataError("interpretation prompt needs a non-empty history")
    last_speaker, last_text = history[-1]
    if last_speaker != target.speaker or last_text != target.text:
        raise DataError("history must end at the target utterance")
    template = _template(f"interpretation_{kind}")
    return template.format(history=render_history(history), speaker=target.speaker)


def build_speaker_prompt(conv: Conversation, speaker: str) -> str:
    """Prompt for a characteristic description of one speaker, judged from
    the entire dialogue."""
    if speaker not in conv.speaker_set:
        raise DataError(f"speaker {speaker!r} does not appear in conversation {conv.id!r}")
    full = [(u.speaker, u.text) for u in conv.utterances]
    return _template("speaker").format(history=render_history(full), speaker=speaker)


def _demo_pairs(demos: Sequence) -> list[tuple[str, str]]:
    pairs = []
    for demo in demos:
        entry = getattr(demo, "entry", None)
        if entry is not None:
            pairs.append((entry.text, entry.label))
        else:
            text, label = demo
            pairs.append((str(text), str(label)))
    return pairs


def render_knowledge(knowledge: ExternalKnowledge, speaker_order: Sequence[str]) -> str:
    lines = []
    for speaker in speaker_order:
        trait = knowledge.speaker_traits.get(speaker)
        if trait is not None:
            lines.append(f"Speaker {speaker}: {_oneline(trait)}")
    if knowledge.explicit_interpretation is not None:
        lines.append(f"Explicit emotion reading: {_oneline(knowledge.explicit_interpretation)}")
    if knowledge.implicit_interpretation is not None:
        lines.append(f"Implicit emotion reading: {_oneline(knowledge.implicit_interpretation)}")
    return "\n".join(lines) if lines else NO_KNOWLEDGE_SENTINEL


def assemble_recognition_prompt(
    conv: Conversation,
    target_index: int,
    w: int,
    knowledge: ExternalKnowledge,
    demos: Sequence,
    label_set: Sequence[str],
) -> PromptBundle:
    """Compose the five-component recognition prompt for one target utterance.

    ``demos`` may be RetrievalResult objects or plain (text, label) pairs,
    at most three. The label statement lists ``label_set`` verbatim in its
    given order; the target's own gold label is never rendered.
    """
    labels = list(label_set)
    if not labels:
        raise DataError("label set must be non-empty")
    pairs = _demo_pairs(demos)
    if len(pairs) > MAX_DEMONSTRATIONS:
        raise DataError(f"at most {MAX_DEMONSTRATIONS} demonstrations allowed, got {len(pairs)}")
    unknown = set(knowledge.speaker_traits) - conv.speaker_set
    if unknown:
        raise DataError(f"speaker traits for unknown speakers: {sorted(unknown)}")

    history = history_window(conv, target_index, w)
    history_lines = tuple(f"{speaker}: {_oneline(text)}" for speaker, text in history)
    knowledge_block = render_knowledge(knowledge, conv.speakers)
    if pairs:
        demo_block = "\n".join(
            f'Utterance: "{_oneline(text)}" -> Label: {label}' for text, label in pairs
        )
    else:
        demo_block = NO_DEMOS_SENTINEL

    target = conv.utterances[target_index]
    target_marker = f'{target.speaker}: "{_oneline(target.text)}"'
    label_list = ", ".join(labels)

    template = _template("recognition")
    text = template.format(
        history="\n".join(history_lines),
        knowledge=knowledge_block,
        demos=demo_block,
        target=target_marker,
        labels=label_list,
    )
    instruction = _section_body(text, SECTION_INSTRUCTION, SECTION_HISTORY)
    label_statement = _section_body(text, SECTION_LABELS, None)
    return PromptBundle(
        instruction=instruction,
        history_lines=history_lines,
        knowledge_block=knowledge_block,
        demonstrations=tuple(pairs),
        label_statement=label_statement,
        target_marker=target_marker,
        text=text,
    )


def _section_body(text: str, start: str, end: Optional[str]) -> str:
    begin = text.index(start) + len(start)
    stop = text.index(end) if end else len(text)
    return text[begin:stop].strip("\n")


def split_sections(text: str) -> dict[str, str]:
    """Split a rendered recognition prompt into its five component bodies.

    Raises when a delimiter is missing or out of order, which makes the
    component-order invariant machine-checkable.
    """
    positions = []
    for marker in SECTION_ORDER:
        pos = text.find(marker)
        if pos < 0:
            raise DataError(f"missing prompt section {marker!r}")
        positions.append(pos)
    if positions != sorted(positions):
        raise DataError("prompt sections are out of order")
    bodies: dict[str, str] = {}
    for i, marker in enumerate(SECTION_ORDER):
        begin = positions[i] + len(marker)
        stop = positions[i + 1] if i + 1 < len(SECTION_ORDER) else len(text)
        bodies[marker] = text[begin:stop].strip("\n")
    return bodies
