"""Curriculum scheduling, demonstration retrieval, and prompt pipeline for
emotion recognition in conversation."""

from .corpus import (
    Conversation,
    Corpus,
    CorpusStats,
    Utterance,
    corpus_stats,
    history_window,
    load_corpus,
    save_corpus,
)
from .curriculum import (
    CurriculumPlan,
    DifficultyReport,
    conversation_difficulty,
    emit_manifest,
    epoch_schedule,
    partition_buckets,
)
from .errors import DataError, PrcEmoError, ServiceError, TransientServiceError
from .evaluation import EvalReport, Prediction, parse_prediction, run_experiment, score
from .geometry import EmotionWheel, WesParams, default_wheel, label_vector, similarity, wes
from .prompting import (
    ExternalKnowledge,
    PromptBundle,
    assemble_recognition_prompt,
    build_interpretation_prompt,
    build_speaker_prompt,
)
from .retrieval import (
    RepoEntry,
    Repository,
    RetrievalResult,
    build_repository,
    load_repository,
    retrieve_top_k,
    save_repository,
)

__version__ = "0.1.0"

__all__ = [
    "Conversation",
    "Corpus",
    "CorpusStats",
    "CurriculumPlan",
    "DataError",
    "DifficultyReport",
    "EmotionWheel",
    "EvalReport",
    "ExternalKnowledge",
    "Prediction",
    "PrcEmoError",
    "PromptBundle",
    "RepoEntry",
    "Repository",
    "RetrievalResult",
    "ServiceError",
    "TransientServiceError",
    "Utterance",
    "WesParams",
    "assemble_recognition_prompt",
    "build_interpretation_prompt",
    "build_repository",
    "build_speaker_prompt",
    "conversation_difficulty",
    "corpus_stats",
    "default_wheel",
    "emit_manifest",
    "epoch_schedule",
    "history_window",
    "label_vector",
    "load_corpus",
    "load_repository",
    "parse_prediction",
    "partition_buckets",
    "retrieve_top_k",
    "run_experiment",
    "save_corpus",
    "save_repository",
    "score",
    "similarity",
    "wes",
]
