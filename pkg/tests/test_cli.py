import json

import pytest

from prc_emo import save_corpus
from prc_emo.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, dispatch
from prc_emo.curriculum import load_manifest

from conftest import make_conversation, make_corpus


@pytest.fixture
def corpus_file(tmp_path, demo_corpus):
    path = tmp_path / "train.jsonl"
    save_corpus(demo_corpus, path)
    return str(path)


@pytest.fixture
def labels_file(tmp_path):
    path = tmp_path / "labels.json"
    path.write_text('{"name": "demo", "labels": ["happy", "sad", "neutral"]}', encoding="utf-8")
    return str(path)


def run(capsys, argv):
    code = dispatch(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestDispatch:
    def test_no_subcommand_is_usage_error(self, capsys):
        code, _, _ = run(capsys, [])
        assert code == EXIT_USAGE

    def test_unknown_subcommand(self, capsys):
        code, _, _ = run(capsys, ["frobnicate"])
        assert code == EXIT_USAGE

    def test_data_error_exit_code_and_json_stderr(self, capsys, tmp_path):
        code, _, err = run(capsys, ["ingest", "--corpus", str(tmp_path / "missing.jsonl")])
        assert code == EXIT_DATA
        payload = json.loads(err.strip().splitlines()[-1])
        assert payload["error"] == "data"


class TestIngest:
    def test_stats_printed(self, capsys, corpus_file):
        code, out, _ = run(capsys, ["ingest", "--corpus", corpus_file])
        assert code == EXIT_OK
        stats = json.loads(out)
        assert stats["utterances"] == 9
        assert stats["conversations"] == 3

    def test_normalized_output_written(self, capsys, corpus_file, tmp_path):
        out_path = tmp_path / "normalized.jsonl"
        code, _, _ = run(capsys, ["ingest", "--corpus", corpus_file, "--out", str(out_path)])
        assert code == EXIT_OK
        assert len(out_path.read_text().splitlines()) == 3


class TestPlan:
    def test_manifest_epochs(self, capsys, corpus_file, tmp_path):
        manifest = tmp_path / "manifest.jsonl"
        code, out, _ = run(
            capsys,
            [
                "plan",
                "--corpus", corpus_file,
                "--buckets", "2",
                "--epochs", "4",
                "--out", str(manifest),
            ],
        )
        assert code == EXIT_OK
        records = load_manifest(manifest)
        assert [r["epoch"] for r in records] == [1, 2, 3, 4]
        assert len(records[0]["conversations"]) < len(records[1]["conversations"])
        assert records[1]["conversations"] == records[3]["conversations"]

    def test_flag_beats_config_file(self, capsys, corpus_file, tmp_path):
        config = tmp_path / "config.json"
        config.write_text('{"buckets": 1, "epochs": 2}', encoding="utf-8")
        manifest = tmp_path / "m.jsonl"
        code, _, err = run(
            capsys,
            [
                "plan",
                "--corpus", corpus_file,
                "--config", str(config),
                "--buckets", "3",
                "--epochs", "3",
                "--out", str(manifest),
                "--verbose",
            ],
        )
        assert code == EXIT_OK
        resolved = json.loads(err.splitlines()[0].split("resolved config: ", 1)[1])
        assert resolved["buckets"] == 3  # flag wins
        assert resolved["epochs"] == 3
        assert resolved["window"] == 5  # built-in default survives

    def test_config_file_beats_default(self, capsys, corpus_file, tmp_path):
        config = tmp_path / "config.json"
        config.write_text('{"buckets": 1}', encoding="utf-8")
        manifest = tmp_path / "m.jsonl"
        code, _, err = run(
            capsys,
            [
                "plan",
                "--corpus", corpus_file,
                "--config", str(config),
                "--epochs", "4",
                "--out", str(manifest),
                "--verbose",
            ],
        )
        assert code == EXIT_OK
        resolved = json.loads(err.splitlines()[0].split("resolved config: ", 1)[1])
        assert resolved["buckets"] == 1


class TestRepoAndRetrieve:
    def test_build_then_retrieve(self, capsys, corpus_file, tmp_path):
        repo_path = tmp_path / "repo.jsonl"
        code, out, _ = run(
            capsys, ["build-repo", "--corpus", corpus_file, "--out", str(repo_path)]
        )
        assert code == EXIT_OK
        assert json.loads(out)["entries"] == 9

        code, out, _ = run(
            capsys,
            ["retrieve", "--repo", str(repo_path), "--query", "I feel a little better", "--k", "3"],
        )
        assert code == EXIT_OK
        results = [json.loads(line) for line in out.strip().splitlines()]
        assert len(results) == 3
        assert all(-1.0 <= r["score"] <= 1.0 for r in results)


class TestPromptCommands:
    def test_knowledge_json(self, capsys, corpus_file):
        code, out, _ = run(
            capsys,
            ["knowledge", "--corpus", corpus_file, "--dialogue", "d1", "--index", "2"],
        )
        assert code == EXIT_OK
        knowledge = json.loads(out)
        assert set(knowledge) == {"speaker_traits", "explicit", "implicit"}
        assert set(knowledge["speaker_traits"]) == {"A", "B"}

    def test_render_prompt_sections(self, capsys, corpus_file, tmp_path):
        repo_path = tmp_path / "repo.jsonl"
        run(capsys, ["build-repo", "--corpus", corpus_file, "--out", str(repo_path)])
        code, out, _ = run(
            capsys,
            [
                "render-prompt",
                "--corpus", corpus_file,
                "--dialogue", "d2",
                "--index", "3",
                "--repo", str(repo_path),
            ],
        )
        assert code == EXIT_OK
        for marker in (
            "### Instruction",
            "### Historical Content",
            "### External Knowledge",
            "### Demonstration Retrieval",
            "### Label Statement",
        ):
            assert marker in out


class TestPredictEvaluate:
    def test_predict_writes_log(self, capsys, corpus_file, tmp_path):
        log = tmp_path / "pred.jsonl"
        code, out, _ = run(
            capsys, ["predict", "--corpus", corpus_file, "--out", str(log)]
        )
        assert code == EXIT_OK
        assert len(log.read_text().splitlines()) == 9

    def test_evaluate_summary(self, capsys, corpus_file, tmp_path):
        out_dir = tmp_path / "eval"
        code, out, _ = run(
            capsys,
            ["evaluate", "--corpus", corpus_file, "--out", str(out_dir), "--seeds", "2"],
        )
        assert code == EXIT_OK
        summary = json.loads(out)
        assert summary["seeds"] == [0, 1]
        assert (out_dir / "seed-0" / "report.json").exists()
        assert (out_dir / "summary.json").exists()


class TestAugment:
    def test_augment_roundtrip(self, capsys, tmp_path):
        out_path = tmp_path / "aug.jsonl"
        report_path = tmp_path / "rounds.json"
        code, out, _ = run(
            capsys,
            [
                "augment",
                "--targets", '{"anger": 6}',
                "--out", str(out_path),
                "--report", str(report_path),
            ],
        )
        assert code == EXIT_OK
        assert json.loads(out)["labels"]["anger"] >= 6
        rounds = json.loads(report_path.read_text())
        assert [r["round"] for r in rounds] == [1, 2, 3]

    def test_bad_targets(self, capsys, tmp_path):
        code, _, err = run(
            capsys,
            ["augment", "--targets", '{"joy": 5}', "--out", str(tmp_path / "x.jsonl")],
        )
        assert code == EXIT_DATA


class TestOfflineDeterminism:
    def test_stub_subcommands_are_reproducible(self, capsys, corpus_file, tmp_path):
        for name in ("a", "b"):
            run(
                capsys,
                ["build-repo", "--corpus", corpus_file, "--out", str(tmp_path / f"{name}.jsonl")],
            )
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
