import json

import pytest

from prc_emo import DataError, Utterance, corpus_stats, history_window, load_corpus, save_corpus
from prc_emo.corpus import Conversation, Corpus, load_label_manifest, merge_corpora

from conftest import make_conversation, make_corpus


def write_jsonl(path, records):
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")


def conv_record(conv_id, turns, dataset="demo", domain=None):
    record = {"dialogue_id": conv_id, "dataset": dataset}
    if domain is not None:
        record["domain"] = domain
    record["utterances"] = [
        {"index": i, "speaker": s, "text": t, "label": lab}
        for i, (s, t, lab) in enumerate(turns)
    ]
    return record


class TestLoadCorpus:
    def test_single_conversation_single_utterance(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [conv_record("only", [("A", "hello there", "happy")])])
        corpus = load_corpus(path)
        assert len(corpus.conversations) == 1
        assert corpus.utterance_count() == 1
        assert corpus.name == "demo"
        assert corpus.label_set == ("happy",)

    def test_order_preserved_and_labels_normalized(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(
            path,
            [
                conv_record("x2", [("A", "one", " Happy "), ("B", "two", "SAD")]),
                conv_record("x1", [("A", "three", "sad")]),
            ],
        )
        corpus = load_corpus(path)
        assert [c.id for c in corpus.conversations] == ["x2", "x1"]
        assert corpus.conversations[0].utterances[0].label == "happy"
        assert corpus.label_set == ("happy", "sad")

    def test_unknown_label_names_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(
            path,
            [
                conv_record("ok", [("A", "fine", "happy")]),
                conv_record("bad", [("A", "whee", "joyful")]),
            ],
        )
        with pytest.raises(DataError, match=r"c\.jsonl:2.*joyful"):
            load_corpus(path, expected_label_set=["happy", "sad"])

    def test_malformed_json_reports_line_number(self, tmp_path):
        path = tmp_path / "c.jsonl"
        good = json.dumps(conv_record("a", [("A", "hello", "happy")]))
        path.write_text(good + "\n{not json}\n", encoding="utf-8")
        with pytest.raises(DataError, match=r"c\.jsonl:2"):
            load_corpus(path)

    def test_duplicate_conversation_id(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(
            path,
            [
                conv_record("dup", [("A", "one", "happy")]),
                conv_record("dup", [("A", "two", "happy")]),
            ],
        )
        with pytest.raises(DataError, match="duplicate conversation id"):
            load_corpus(path)

    def test_non_contiguous_indices(self, tmp_path):
        path = tmp_path / "c.jsonl"
        record = {
            "dialogue_id": "gap",
            "dataset": "demo",
            "utterances": [
                {"index": 0, "speaker": "A", "text": "one", "label": "happy"},
                {"index": 2, "speaker": "A", "text": "two", "label": "happy"},
            ],
        }
        write_jsonl(path, [record])
        with pytest.raises(DataError, match="contiguous"):
            load_corpus(path)

    def test_empty_text_rejected(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [conv_record("e", [("A", "   ", "happy")])])
        with pytest.raises(DataError, match="empty text"):
            load_corpus(path)

    def test_unlabeled_corpus_needs_manifest(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [conv_record("u", [("A", "hello", None)])])
        with pytest.raises(DataError, match="label"):
            load_corpus(path)
        corpus = load_corpus(path, expected_label_set=["happy", "sad"])
        assert corpus.conversations[0].utterances[0].label is None

    def test_synthetic_file_at_dataset_scale(self, tmp_path):
        # same shape as a train+val file: 120 dialogues, 5810 utterances
        sizes = [48] * 70 + [49] * 50
        assert sum(sizes) == 5810 and len(sizes) == 120
        records = []
        for ci, size in enumerate(sizes):
            turns = [
                ("A" if i % 2 == 0 else "B", f"turn {ci}-{i}", "happy" if i % 3 else "sad")
                for i in range(size)
            ]
            records.append(conv_record(f"dia{ci:03d}", turns, dataset="synthetic"))
        path = tmp_path / "big.jsonl"
        write_jsonl(path, records)
        corpus = load_corpus(path)
        assert len(corpus.conversations) == 120
        assert corpus.utterance_count() == 5810


class TestRoundTrip:
    def test_save_then_load_structurally_equal(self, tmp_path, demo_corpus):
        path = tmp_path / "out.jsonl"
        save_corpus(demo_corpus, path)
        loaded = load_corpus(path, expected_label_set=demo_corpus.label_set)
        assert loaded.label_set == demo_corpus.label_set
        assert len(loaded.conversations) == len(demo_corpus.conversations)
        for a, b in zip(loaded.conversations, demo_corpus.conversations):
            assert a.id == b.id and a.domain == b.domain
            assert a.utterances == b.utterances

    def test_saved_bytes_deterministic(self, tmp_path, demo_corpus):
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_corpus(demo_corpus, p1)
        save_corpus(demo_corpus, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_domain_round_trips(self, tmp_path):
        conv = make_conversation("d", [("A", "hi there", "happiness")], domain="healthcare")
        corpus = make_corpus("augmented", ("happiness",), [conv])
        path = tmp_path / "aug.jsonl"
        save_corpus(corpus, path)
        assert json.loads(path.read_text().splitlines()[0])["domain"] == "healthcare"
        assert load_corpus(path).conversations[0].domain == "healthcare"


class TestHistoryWindow:
    def test_middle_window(self):
        conv = make_conversation(
            "h", [("A", f"u{i}", "happy") for i in range(10)]
        )
        window = history_window(conv, 7, 5)
        assert [t for _, t in window] == ["u3", "u4", "u5", "u6", "u7"]

    def test_clipped_at_start(self):
        conv = make_conversation("h", [("A", f"u{i}", "happy") for i in range(10)])
        assert [t for _, t in history_window(conv, 0, 7)] == ["u0"]
        assert [t for _, t in history_window(conv, 2, 5)] == ["u0", "u1", "u2"]

    @pytest.mark.parametrize("target,w", [(0, 1), (3, 2), (9, 100), (5, 5)])
    def test_length_law_and_target_last(self, target, w):
        conv = make_conversation("h", [("A", f"u{i}", "happy") for i in range(10)])
        window = history_window(conv, target, w)
        assert len(window) == min(w, target + 1)
        assert window[-1][1] == f"u{target}"

    def test_out_of_range(self):
        conv = make_conversation("h", [("A", "u0", "happy")])
        with pytest.raises(DataError):
            history_window(conv, 1, 3)
        with pytest.raises(DataError):
            history_window(conv, -1, 3)
        with pytest.raises(DataError):
            history_window(conv, 0, 0)


class TestCorpusStats:
    def test_counts(self, demo_corpus):
        stats = corpus_stats(demo_corpus)
        assert stats.conversations == 3
        assert stats.utterances == 9
        assert sum(stats.label_counts.values()) == 9
        assert stats.label_counts["happy"] == 4

    def test_all_unlabeled_counts_zero(self):
        conv = make_conversation("u", [("A", "one", None), ("B", "two", None)])
        corpus = make_corpus("x", ("happy", "sad"), [conv])
        stats = corpus_stats(corpus)
        assert stats.utterances == 2
        assert all(v == 0 for v in stats.label_counts.values())

    def test_permutation_invariant(self, demo_corpus):
        reversed_corpus = make_corpus(
            demo_corpus.name, demo_corpus.label_set, demo_corpus.conversations[::-1]
        )
        assert corpus_stats(reversed_corpus).label_counts == corpus_stats(demo_corpus).label_counts


def test_label_manifest(tmp_path):
    path = tmp_path / "labels.json"
    path.write_text('{"name": "demo", "labels": ["Happy", "sad"]}', encoding="utf-8")
    name, labels = load_label_manifest(path)
    assert name == "demo"
    assert labels == ("happy", "sad")


def test_merge_corpora(demo_corpus):
    other = make_corpus("aug", ("fear",), [make_conversation("f1", [("A", "eek", "fear")])])
    merged = merge_corpora("all", [demo_corpus, other])
    assert merged.utterance_count() == 10
    assert set(merged.label_set) == {"happy", "sad", "neutral", "fear"}


def test_speaker_set_derivation():
    conv = make_conversation("s", [("B", "one", None), ("A", "two", None), ("B", "three", None)])
    assert conv.speakers == ("B", "A")
    assert conv.speaker_set == frozenset({"A", "B"})
