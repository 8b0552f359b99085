"""Prediction parsing, accuracy / weighted-F1 scoring, and the experiment loop.

Weighted F1 averages the per-class F1 scores with class supports as weights,
the field's default metric for utterance-level emotion recognition. Raw model
output that names no label (or more than one) counts as wrong for every class
and is reported through ``invalid_count``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .client import ChatClient, ChatRequest
from .corpus import Corpus, history_window
from .errors import DataError, ServiceError
from .prompting import (
    EXPLICIT,
    IMPLICIT,
    ExternalKnowledge,
    assemble_recognition_prompt,
    build_interpretation_prompt,
    build_speaker_prompt,
)
from .retrieval import Repository, retrieve_top_k

INVALID = "__invalid__"


@dataclass(frozen=True)
class Prediction:
    conversation_id: str
    index: int
    raw_output: str
    parsed_label: str  # a label or INVALID
    gold_label: str


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    weighted_f1: float
    per_class: Mapping[str, ClassScores]
    invalid_count: int
    n: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "weighted_f1": self.weighted_f1,
            "per_class": {
                label: {
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "support": s.support,
                }
                for label, s in self.per_class.items()
            },
            "invalid_count": self.invalid_count,
            "n": self.n,
        }


def parse_prediction(raw: str, label_set: Sequence[str]) -> str:
    """Map raw model output to a label, or INVALID.

    A lowercase-trimmed exact match wins; otherwise a unique whole-word
    containment match wins; anything else (including ambiguous mentions of
    several labels) is INVALID.
    """
    labels = [label.strip().lower() for label in label_set]
    norm = raw.strip().lower()
    if norm in labels:
        return norm
    found = [
        label
        for label in labels
        if re.search(rf"\b{re.escape(label)}\b", norm) is not None
    ]
    if len(found) == 1:
        return found[0]
    return INVALID


def score(predictions: Sequence[Prediction], label_set: Sequence[str]) -> EvalReport:
    """Accuracy plus support-weighted F1 over the prediction list.

    Convention: a class with zero predicted positives has precision 0; a
    class with zero support contributes nothing to the weighted sum.
    """
    if not predictions:
        raise DataError("cannot score an empty prediction list")
    labels = list(label_set)
    allowed = set(labels)
    for p in predictions:
        if p.gold_label not in allowed:
            raise DataError(
                f"gold label {p.gold_label!r} (conversation {p.conversation_id!r}, "
                f"index {p.index}) is not in the label set"
            )

    n = len(predictions)
    correct = 0
    tp = {label: 0 for label in labels}
    fp = {label: 0 for label in labels}
    fn = {label: 0 for label in labels}
    invalid = 0
    for p in predictions:
        if p.parsed_label == INVALID:
            invalid += 1
        if p.parsed_label == p.gold_label:
            correct += 1
            tp[p.gold_label] += 1
        else:
            fn[p.gold_label] += 1
            if p.parsed_label in allowed:
                fp[p.parsed_label] += 1

    per_class: dict[str, ClassScores] = {}
    weighted = 0.0
    for label in labels:
        predicted = tp[label] + fp[label]
        support = tp[label] + fn[label]
        precision = tp[label] / predicted if predicted else 0.0
        recall = tp[label] / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[label] = ClassScores(precision, recall, f1, support)
        weighted += support * f1
    return EvalReport(
        accuracy=correct / n,
        weighted_f1=weighted / n,
        per_class=per_class,
        invalid_count=invalid,
        n=n,
    )


def extract_knowledge(
    conv, target_index: int, w: int, chat: ChatClient, model_id: str,
    prompt_log: Optional[list] = None,
) -> ExternalKnowledge:
    """Run the interpretation and speaker prompts for one target utterance."""
    target = conv.utterances[target_index]
    window = history_window(conv, target_index, w)

    def ask(prompt: str, kind: str) -> str:
        if prompt_log is not None:
            prompt_log.append(
                {"dialogue_id": conv.id, "index": target_index, "kind": kind, "prompt": prompt}
            )
        return chat.chat(ChatRequest(user_text=prompt, model_id=model_id)).text

    explicit = ask(build_interpretation_prompt(window, target, EXPLICIT), "explicit")
    implicit = ask(build_interpretation_prompt(window, target, IMPLICIT), "implicit")
    traits = {
        speaker: ask(build_speaker_prompt(conv, speaker), f"speaker:{speaker}")
        for speaker in conv.speakers
    }
    return ExternalKnowledge(
        speaker_traits=traits,
        explicit_interpretation=explicit,
        implicit_interpretation=implicit,
    )


def run_predictions(
    corpus: Corpus,
    chat: ChatClient,
    embedder,
    repo: Optional[Repository],
    *,
    w: int = 5,
    retrieval_k: int = 3,
    model_id: str = "stub-chat",
    prompt_log: Optional[list] = None,
) -> list[Prediction]:
    """Run the full per-utterance pipeline and collect predictions.

    Knowledge extraction -> demonstration retrieval (the query's own dialogue
    excluded) -> recognition prompt -> chat -> parse. Deterministic end to
    end with the stub backends.
    """
    predictions: list[Prediction] = []
    for conv in corpus.conversations:
        for u in conv.utterances:
            try:
                predictions.append(
                    _predict_one(
                        corpus, conv, u, chat, embedder, repo,
                        w=w, retrieval_k=retrieval_k, model_id=model_id,
                        prompt_log=prompt_log,
                    )
                )
            except (DataError, ServiceError) as exc:
                # carry utterance provenance on every propagated failure
                raise type(exc)(
                    f"conversation {conv.id!r} utterance {u.index}: {exc}"
                ) from exc
    return predictions


def _predict_one(
    corpus: Corpus, conv, u, chat: ChatClient, embedder, repo,
    *, w: int, retrieval_k: int, model_id: str, prompt_log: Optional[list],
) -> Prediction:
    knowledge = extract_knowledge(conv, u.index, w, chat, model_id, prompt_log=prompt_log)
    demos: Sequence = ()
    if repo is not None and len(repo):
        demos = retrieve_top_k(
            repo,
            u.text,
            retrieval_k,
            embedder,
            exclusion={(corpus.name, conv.id)},
        )
    bundle = assemble_recognition_prompt(
        conv, u.index, w, knowledge, demos, corpus.label_set
    )
    if prompt_log is not None:
        prompt_log.append(
            {
                "dialogue_id": conv.id,
                "index": u.index,
                "kind": "recognition",
                "prompt": bundle.text,
            }
        )
    raw = chat.chat(ChatRequest(user_text=bundle.text, model_id=model_id)).text
    return Prediction(
        conversation_id=conv.id,
        index=u.index,
        raw_output=raw,
        parsed_label=parse_prediction(raw, corpus.label_set),
        gold_label=u.label if u.label is not None else "",
    )


def write_prediction_log(predictions: Sequence[Prediction], path: str | Path) -> None:
    lines = [
        json.dumps(
            {
                "dialogue_id": p.conversation_id,
                "index": p.index,
                "raw": p.raw_output,
                "parsed": p.parsed_label,
                "gold": p.gold_label or None,
            },
            ensure_ascii=False,
        )
        for p in predictions
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def write_prompt_log(prompt_log: Sequence[dict], path: str | Path) -> None:
    lines = [json.dumps(rec, ensure_ascii=False) for rec in prompt_log]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def run_experiment(
    corpus: Corpus,
    chat: ChatClient,
    embedder,
    repo: Optional[Repository],
    out_dir: str | Path,
    *,
    w: int = 5,
    retrieval_k: int = 3,
    model_id: str = "stub-chat",
    seed: int = 0,
) -> EvalReport:
    """Predict every utterance of a gold-labeled corpus, score, and log.

    Writes prompts.jsonl, predictions.jsonl, and report.json under out_dir.
    ``seed`` only tags the report; the pipeline itself is deterministic with
    stub backends.
    """
    for conv in corpus.conversations:
        if not conv.fully_labeled():
            raise DataError(
                f"conversation {conv.id!r} has unlabeled utterances; "
                "evaluation needs gold labels"
            )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prompt_log: list[dict] = []
    predictions = run_predictions(
        corpus,
        chat,
        embedder,
        repo,
        w=w,
        retrieval_k=retrieval_k,
        model_id=model_id,
        prompt_log=prompt_log,
    )
    report = score(predictions, corpus.label_set)
    write_prompt_log(prompt_log, out_dir / "prompts.jsonl")
    write_prediction_log(predictions, out_dir / "predictions.jsonl")
    payload = report.to_dict()
    payload["seed"] = seed
    (out_dir / "report.json").write_text(
        json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    return report


def aggregate_reports(reports: Mapping[int, EvalReport]) -> dict:
    """Mean accuracy / weighted F1 over seed-tagged runs."""
    if not reports:
        raise DataError("no reports to aggregate")
    seeds = sorted(reports)
    return {
        "seeds": seeds,
        "per_seed": {
            str(seed): {
                "accuracy": reports[seed].accuracy,
                "weighted_f1": reports[seed].weighted_f1,
            }
            for seed in seeds
        },
        "mean_accuracy": sum(r.accuracy for r in reports.values()) / len(reports),
        "mean_weighted_f1": sum(r.weighted_f1 for r in reports.values()) / len(reports),
    }
