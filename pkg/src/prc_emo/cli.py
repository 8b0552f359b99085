"""Command-line entry point wiring the modules into workflows.

Exit codes: 0 success, 2 usage, 3 data error, 4 upstream-service error.
Errors print one machine-readable JSON object to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import augmentation, curriculum, evaluation, retrieval
from .client import (
    ChatClient,
    HttpChatBackend,
    HttpEmbedder,
    ResponseCache,
    StubChatBackend,
    StubEmbedder,
)
from .config import RunConfig, load_config_file, resolve_config
from .corpus import (
    Corpus,
    corpus_stats,
    load_corpus,
    load_label_manifest,
    save_corpus,
)
from .errors import DataError, ServiceError
from .geometry import EmotionWheel, WesParams, default_wheel
from .prompting import ExternalKnowledge, assemble_recognition_prompt

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_SERVICE = 4


def _fail(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    file_values = load_config_file(args.config) if getattr(args, "config", None) else None
    flag_values = {
        name: getattr(args, name)
        for name in RunConfig().to_dict()
        if hasattr(args, name)
    }
    config = resolve_config(file_values, flag_values)
    if getattr(args, "verbose", False):
        sys.stderr.write("resolved config: " + json.dumps(config.to_dict(), sort_keys=True) + "\n")
    return config


def _wheel_for(config: RunConfig, corpus: Optional[Corpus] = None) -> EmotionWheel:
    wheel = EmotionWheel.from_config(config.wheel) if config.wheel else default_wheel()
    if corpus is not None:
        wheel = wheel.subset(corpus.label_set)
    return wheel


def _chat_client(config: RunConfig) -> ChatClient:
    backend = StubChatBackend() if config.chat == "stub" else HttpChatBackend()
    cache = ResponseCache(config.cache) if config.cache else None
    return ChatClient(
        backend,
        cache,
        max_retries=config.max_retries,
        max_concurrency=config.concurrency,
    )


def _embedder(config: RunConfig):
    if config.embedder == "stub":
        return StubEmbedder(dim=config.embed_dim)
    return HttpEmbedder(model=config.embed_model, max_retries=config.max_retries)


def _load(args: argparse.Namespace, path: str, split: str = "none") -> Corpus:
    labels = None
    if getattr(args, "labels", None):
        _, labels = load_label_manifest(args.labels)
    return load_corpus(path, labels, split=split)


# -- subcommands --------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> int:
    _config_from_args(args)
    corpus = _load(args, args.corpus)
    if args.out:
        save_corpus(corpus, args.out)
    stats = corpus_stats(corpus)
    print(
        json.dumps(
            {
                "name": corpus.name,
                "conversations": stats.conversations,
                "utterances": stats.utterances,
                "labels": stats.label_counts,
            },
            ensure_ascii=False,
        )
    )
    return EXIT_OK


def cmd_difficulty(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    corpus = _load(args, args.corpus)
    wheel = _wheel_for(config, corpus)
    reports = curriculum.difficulty_reports(
        corpus, wheel, WesParams(config.k, config.b), config.mode
    )
    lines = [
        json.dumps(
            {
                "conversation_id": r.conversation_id,
                "dif": r.dif,
                "wes_same": r.wes_same,
                "wes_diff": r.wes_diff,
                "n_sp": r.n_sp,
                "n_u": r.n_u,
                "n_shift_same": r.n_shift_same,
                "n_shift_diff": r.n_shift_diff,
            },
            ensure_ascii=False,
        )
        for r in reports
    ]
    output = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        Path(args.out).write_text(output, encoding="utf-8")
    else:
        sys.stdout.write(output)
    return EXIT_OK


def cmd_plan(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    corpus = _load(args, args.corpus)
    wheel = _wheel_for(config, corpus)
    reports = curriculum.difficulty_reports(
        corpus, wheel, WesParams(config.k, config.b), config.mode
    )
    plan = curriculum.partition_buckets(reports, config.buckets)
    plan = curriculum.epoch_schedule(plan, config.epochs)
    curriculum.emit_manifest(plan, args.out)
    print(json.dumps({"epochs": plan.t, "buckets": plan.n, "manifest": args.out}))
    return EXIT_OK


def cmd_build_repo(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    corpora = [_load(args, path) for path in args.corpus]
    repo = retrieval.build_repository(corpora, _embedder(config))
    retrieval.save_repository(repo, args.out)
    print(json.dumps({"entries": len(repo), "embed_dim": repo.embed_dim, "out": args.out}))
    return EXIT_OK


def cmd_retrieve(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    repo = retrieval.load_repository(args.repo)
    results = retrieval.retrieve_top_k(repo, args.query, args.k, _embedder(config))
    for result in results:
        print(
            json.dumps(
                {
                    "text": result.entry.text,
                    "label": result.entry.label,
                    "source": result.entry.source,
                    "dialogue_id": result.entry.dialogue_id,
                    "position": result.entry.position,
                    "score": result.score,
                },
                ensure_ascii=False,
            )
        )
    return EXIT_OK


def _find_conversation(corpus: Corpus, dialogue_id: str):
    for conv in corpus.conversations:
        if conv.id == dialogue_id:
            return conv
    raise DataError(f"dialogue {dialogue_id!r} not found in corpus")


def cmd_knowledge(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    corpus = _load(args, args.corpus)
    conv = _find_conversation(corpus, args.dialogue)
    chat = _chat_client(config)
    knowledge = evaluation.extract_knowledge(
        conv, args.index, config.window, chat, config.chat_model
    )
    print(
        json.dumps(
            {
                "speaker_traits": dict(knowledge.speaker_traits),
                "explicit": knowledge.explicit_interpretation,
                "implicit": knowledge.implicit_interpretation,
            },
            ensure_ascii=False,
        )
    )
    return EXIT_OK


def cmd_render_prompt(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    corpus = _load(args, args.corpus)
    conv = _find_conversation(corpus, args.dialogue)
    if args.knowledge:
        data = json.loads(Path(args.knowledge).read_text(encoding="utf-8"))
        knowledge = ExternalKnowledge(
            speaker_traits=data.get("speaker_traits", {}),
            explicit_interpretation=data.get("explicit"),
            implicit_interpretation=data.get("implicit"),
        )
    else:
        chat = _chat_client(config)
        knowledge = evaluation.extract_knowledge(
            conv, args.index, config.window, chat, config.chat_model
        )
    demos: Sequence = ()
    if args.repo:
        repo = retrieval.load_repository(args.repo)
        demos = retrieval.retrieve_top_k(
            repo,
            conv.utterances[args.index].text,
            config.retrieval_k,
            _embedder(config),
            exclusion={(corpus.name, conv.id)},
        )
    bundle = assemble_recognition_prompt(
        conv, args.index, config.window, knowledge, demos, corpus.label_set
    )
    sys.stdout.write(bundle.text)
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    corpus = _load(args, args.corpus)
    repo = retrieval.load_repository(args.repo) if args.repo else None
    chat = _chat_client(config)
    predictions = evaluation.run_predictions(
        corpus,
        chat,
        _embedder(config),
        repo,
        w=config.window,
        retrieval_k=config.retrieval_k,
        model_id=config.chat_model,
    )
    evaluation.write_prediction_log(predictions, args.out)
    print(json.dumps({"predictions": len(predictions), "out": args.out}))
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    corpus = _load(args, args.corpus, split=args.split)
    repo = retrieval.load_repository(args.repo) if args.repo else None
    chat = _chat_client(config)
    out_dir = Path(args.out)
    reports = {}
    for seed in range(config.seeds):
        reports[seed] = evaluation.run_experiment(
            corpus,
            chat,
            _embedder(config),
            repo,
            out_dir / f"seed-{seed}",
            w=config.window,
            retrieval_k=config.retrieval_k,
            model_id=config.chat_model,
            seed=seed,
        )
    summary = evaluation.aggregate_reports(reports)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "summary.json").write_text(
        json.dumps(summary, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    print(json.dumps(summary, ensure_ascii=False))
    return EXIT_OK


def _parse_targets(raw: str) -> dict:
    if raw.lstrip().startswith("{"):
        data = json.loads(raw)
    else:
        data = json.loads(Path(raw).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise DataError("targets must be a JSON object of emotion -> count")
    return {str(k): int(v) for k, v in data.items()}


def cmd_augment(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    targets = _parse_targets(args.targets)
    chat = _chat_client(config)
    annotators = [
        ("auto-1", augmentation.keyword_annotator),
        ("auto-2", augmentation.keyword_annotator),
    ]
    corpus, rounds = augmentation.run_augmentation(
        targets, chat, annotators, model_id=config.chat_model
    )
    save_corpus(corpus, args.out, dataset="augmented")
    if args.report:
        Path(args.report).write_text(
            augmentation.rounds_to_json(rounds) + "\n", encoding="utf-8"
        )
    stats = corpus_stats(corpus)
    print(
        json.dumps(
            {"utterances": stats.utterances, "labels": stats.label_counts, "out": args.out},
            ensure_ascii=False,
        )
    )
    return EXIT_OK


def cmd_serve_annotation(args: argparse.Namespace) -> int:
    from .service import serve

    _config_from_args(args)
    targets = _parse_targets(args.targets) if args.targets else {}
    store = augmentation.AnnotationStore(targets=targets, round_index=args.round)
    if args.corpus:
        corpus = _load(args, args.corpus)
        augmentation.mask_and_enqueue(store, corpus.conversations)
    serve(store, host=args.host, port=args.port, ui_dir=args.ui)
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--verbose", action="store_true", help="echo the resolved config")


def _add_curriculum_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--wheel", help="wheel config JSON (default: bundled wheel)")
    p.add_argument("--k", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    p.add_argument("--mode", choices=["shift_required", "always"], default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prc-emo",
        description="Curriculum scheduling, demonstration retrieval, and prompt "
        "pipeline for conversational emotion recognition.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate/normalize a corpus and print stats")
    p.add_argument("--corpus", required=True)
    p.add_argument("--labels", help="label-set manifest JSON")
    p.add_argument("--out", help="write the normalized corpus here")
    _add_config_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("difficulty", help="score per-conversation difficulty")
    p.add_argument("--corpus", required=True)
    p.add_argument("--labels")
    p.add_argument("--out")
    _add_curriculum_flags(p)
    _add_config_flags(p)
    p.set_defaults(func=cmd_difficulty)

    p = sub.add_parser("plan", help="emit the curriculum epoch manifest")
    p.add_argument("--corpus", required=True)
    p.add_argument("--labels")
    p.add_argument("--buckets", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--out", required=True)
    _add_curriculum_flags(p)
    _add_config_flags(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("build-repo", help="embed corpora into a retrieval repository")
    p.add_argument("--corpus", action="append", required=True)
    p.add_argument("--labels")
    p.add_argument("--embedder", choices=["stub", "http"], default=None)
    p.add_argument("--embed-dim", dest="embed_dim", type=int, default=None)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_build_repo)

    p = sub.add_parser("retrieve", help="top-k cosine retrieval from a repository")
    p.add_argument("--repo", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--embedder", choices=["stub", "http"], default=None)
    p.add_argument("--embed-dim", dest="embed_dim", type=int, default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("knowledge", help="extract interpretations and speaker traits")
    p.add_argument("--corpus", required=True)
    p.add_argument("--labels")
    p.add_argument("--dialogue", required=True)
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--chat", choices=["stub", "http"], default=None)
    p.add_argument("--cache")
    p.add_argument("--window", type=int, default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_knowledge)

    p = sub.add_parser("render-prompt", help="print the recognition prompt for one utterance")
    p.add_argument("--corpus", required=True)
    p.add_argument("--labels")
    p.add_argument("--dialogue", required=True)
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--repo")
    p.add_argument("--knowledge", help="knowledge JSON from the knowledge subcommand")
    p.add_argument("--chat", choices=["stub", "http"], default=None)
    p.add_argument("--cache")
    p.add_argument("--window", type=int, default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_render_prompt)

    p = sub.add_parser("predict", help="run the pipeline and write a prediction log")
    p.add_argument("--corpus", required=True)
    p.add_argument("--labels")
    p.add_argument("--repo")
    p.add_argument("--out", required=True)
    p.add_argument("--chat", choices=["stub", "http"], default=None)
    p.add_argument("--embedder", choices=["stub", "http"], default=None)
    p.add_argument("--cache")
    p.add_argument("--window", type=int, default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="run the pipeline and score it")
    p.add_argument("--corpus", required=True)
    p.add_argument("--labels")
    p.add_argument("--split", choices=["train", "val", "test", "none"], default="test")
    p.add_argument("--repo")
    p.add_argument("--out", required=True)
    p.add_argument("--seeds", type=int, default=None)
    p.add_argument("--chat", choices=["stub", "http"], default=None)
    p.add_argument("--embedder", choices=["stub", "http"], default=None)
    p.add_argument("--cache")
    p.add_argument("--window", type=int, default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("augment", help="run generate-and-verify augmentation rounds")
    p.add_argument("--targets", required=True, help="JSON object or path: emotion -> count")
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="write per-round tallies here")
    p.add_argument("--chat", choices=["stub", "http"], default=None)
    p.add_argument("--cache")
    _add_config_flags(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("serve-annotation", help="run the annotation HTTP service")
    p.add_argument("--corpus", help="labeled dialogues to mask and enqueue")
    p.add_argument("--labels")
    p.add_argument("--targets", help="JSON object or path: emotion -> count")
    p.add_argument("--round", type=int, default=1)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8700)
    p.add_argument("--ui", help="directory of built frontend assets")
    _add_config_flags(p)
    p.set_defaults(func=cmd_serve_annotation)

    return parser


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.func(args)
    except DataError as exc:
        _fail("data", str(exc))
        return EXIT_DATA
    except ServiceError as exc:
        _fail("service", str(exc))
        return EXIT_SERVICE


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
