from __future__ import annotations

import json

import pytest

from tibbe.cli import main
from tibbe.config import packaged_sample_corpus, packaged_sample_dataset

from conftest import build_eval_fixture, write_corpus_file, write_script


def _echo_config(tmp_path) -> str:
    path = tmp_path / "echo.ini"
    path.write_text(
        "[harness]\nparallelism = 1\n\n"
        "[embedder]\nprovider = deterministic-local\ndim = 64\n\n"
        "[retrieval]\nk = 2\nscore_threshold = 0.05\nmin_tokens = 5\n\n"
        "[backend.demo]\nrole = base\nkind = echo\n",
        encoding="utf-8",
    )
    return str(path)


# --- ingest -------------------------------------------------------------------

def test_ingest_happy_path(tmp_path, capsys):
    index = tmp_path / "sample.idx"
    code = main(["ingest", "--corpus", str(packaged_sample_corpus()), "--index", str(index)])
    assert code == 0
    assert index.exists()
    out = capsys.readouterr().out
    assert "passages" in out and "dim 64" in out


def test_ingest_missing_corpus_exits_3(tmp_path, capsys):
    code = main(["ingest", "--corpus", str(tmp_path / "absent"), "--index",
                 str(tmp_path / "x.idx")])
    assert code == 3
    assert "MissingPath" in capsys.readouterr().err


def test_ingest_unwritable_index_exits_4(tmp_path, capsys):
    code = main(["ingest", "--corpus", str(packaged_sample_corpus()), "--index",
                 str(tmp_path / "no" / "dir" / "x.idx")])
    assert code == 4


def test_ingest_bad_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[mystery]\nkey = 1\n", encoding="utf-8")
    code = main(["ingest", "--corpus", str(packaged_sample_corpus()), "--index",
                 str(tmp_path / "x.idx"), "--config", str(bad)])
    assert code == 2


# --- ask ----------------------------------------------------------------------

def test_ask_direct_echo_prints_prompt_content(tmp_path, capsys):
    code = main(["ask", "--question", "What helps a sore throat?", "--mode", "direct",
                 "--config", _echo_config(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "Question: What helps a sore throat?" in out


def test_ask_rag_without_index_exits_2(tmp_path, capsys):
    code = main(["ask", "--question", "q", "--mode", "rag",
                 "--config", _echo_config(tmp_path)])
    assert code == 2


def test_ask_rag_prints_citations(tmp_path, capsys):
    index = tmp_path / "s.idx"
    assert main(["ingest", "--corpus", str(packaged_sample_corpus()),
                 "--index", str(index)]) == 0
    capsys.readouterr()
    code = main(["ask", "--question", "What Prophetic remedy is recommended for kidney stones?",
                 "--mode", "rag", "--index", str(index), "--config", _echo_config(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "Citations:" in out
    assert "[1]" in out


def test_ask_agentic_show_draft_prints_both_sections(tmp_path, capsys):
    index = tmp_path / "s.idx"
    assert main(["ingest", "--corpus", str(packaged_sample_corpus()),
                 "--index", str(index)]) == 0
    capsys.readouterr()
    code = main(["ask", "--question", "What Prophetic remedy is recommended for minor burns?",
                 "--mode", "agentic", "--show-draft", "--index", str(index),
                 "--config", _echo_config(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "=== draft ===" in out
    assert "=== final ===" in out


def test_ask_backend_failure_exits_5(tmp_path, capsys):
    fixtures = tmp_path / "fx"
    write_script(fixtures, [])  # empty script: immediate FixtureMiss
    config = tmp_path / "c.ini"
    config.write_text(
        "[backend.s]\nrole = base\nkind = scripted\nfixtures_dir = fx\n",
        encoding="utf-8",
    )
    code = main(["ask", "--question", "q", "--mode", "direct", "--config", str(config)])
    assert code == 5


# --- eval ----------------------------------------------------------------------

def test_eval_end_to_end(tmp_path, capsys):
    fixture = build_eval_fixture(tmp_path / "fx")
    out = tmp_path / "run"
    code = main(["eval", "--dataset", str(fixture["dataset"]),
                 "--index", str(fixture["index"]), "--out", str(out),
                 "--config", str(fixture["config"])])
    assert code == 0
    captured = capsys.readouterr()
    assert "scored 30 samples" in captured.out
    assert (out / "run.json").exists()
    assert (out / "answers" / "base-x.jsonl").exists()
    assert (out / "scores" / "base-x__judge-x.jsonl").exists()
    answers = [json.loads(line) for line in
               (out / "answers" / "base-x.jsonl").read_text().splitlines()]
    assert len(answers) == 40


def test_eval_unreadable_dataset_exits_3(tmp_path):
    fixture = build_eval_fixture(tmp_path / "fx")
    code = main(["eval", "--dataset", str(tmp_path / "none.tibbeqa.jsonl"),
                 "--index", str(fixture["index"]), "--out", str(tmp_path / "run"),
                 "--config", str(fixture["config"])])
    assert code == 3


def test_eval_without_judges_exits_2(tmp_path):
    code = main(["eval", "--dataset", str(packaged_sample_dataset()),
                 "--out", str(tmp_path / "run"), "--modes", "direct",
                 "--config", _echo_config(tmp_path)])
    assert code == 2


def test_eval_majority_failures_exit_5(tmp_path, capsys):
    fixture = build_eval_fixture(tmp_path / "fx")
    write_script(tmp_path / "fx" / "fixtures" / "judge", [])  # every judge call misses
    out = tmp_path / "run"
    code = main(["eval", "--dataset", str(fixture["dataset"]),
                 "--index", str(fixture["index"]), "--out", str(out),
                 "--config", str(fixture["config"])])
    assert code == 5
    assert (out / "run.json").exists()  # partial results still written
    manifest = json.loads((out / "run.json").read_text())
    assert manifest["counts"]["failed_cells"] == 30


# --- report ----------------------------------------------------------------------

def _completed_run(tmp_path) -> str:
    fixture = build_eval_fixture(tmp_path / "fx")
    out = tmp_path / "run"
    assert main(["eval", "--dataset", str(fixture["dataset"]),
                 "--index", str(fixture["index"]), "--out", str(out),
                 "--config", str(fixture["config"])]) == 0
    return str(out)


def test_report_writes_all_artifacts(tmp_path, capsys):
    run_dir = _completed_run(tmp_path)
    code = main(["report", "--in", run_dir])
    assert code == 0
    from pathlib import Path
    names = {p.name for p in Path(run_dir).iterdir()}
    assert {"grid.md", "grid.csv", "gains.csv", "criteria.csv",
            "grid.png", "gains.png"} <= names


def test_report_csv_only(tmp_path):
    run_dir = _completed_run(tmp_path)
    code = main(["report", "--in", run_dir, "--format", "csv"])
    assert code == 0
    from pathlib import Path
    names = {p.name for p in Path(run_dir).iterdir()}
    assert "grid.csv" in names and "gains.csv" in names
    assert "grid.md" not in names


def test_report_missing_run_exits_3(tmp_path):
    assert main(["report", "--in", str(tmp_path / "nothing")]) == 3


def test_report_missing_mode_warns_and_omits_gains(tmp_path, capsys):
    fixture = build_eval_fixture(tmp_path / "fx")
    # direct-only eval: gains need all three modes
    entries = [{"response": f"direct answer {qid}"} for qid in fixture["question_ids"]]
    write_script(tmp_path / "fx" / "fixtures" / "base", entries)
    judge_entries = [{"response": json.dumps({
        "correctness": 1, "completeness": 0, "conciseness": 3, "helpfulness": 3,
        "harmlessness": 1, "honesty": 3, "rationale": "d"})} for _ in range(10)]
    write_script(tmp_path / "fx" / "fixtures" / "judge", judge_entries)
    out = tmp_path / "run"
    assert main(["eval", "--dataset", str(fixture["dataset"]), "--modes", "direct",
                 "--out", str(out), "--config", str(fixture["config"])]) == 0
    capsys.readouterr()
    code = main(["report", "--in", str(out)])
    assert code == 0
    captured = capsys.readouterr()
    assert "gains omitted" in captured.err
    assert not (out / "gains.csv").exists()
    assert (out / "grid.md").exists()


def test_eval_twice_report_artifacts_byte_identical(tmp_path):
    from pathlib import Path
    blobs = []
    for name in ("one", "two"):
        fixture = build_eval_fixture(tmp_path / name / "fx")
        out = tmp_path / name / "run"
        assert main(["eval", "--dataset", str(fixture["dataset"]),
                     "--index", str(fixture["index"]), "--out", str(out),
                     "--config", str(fixture["config"])]) == 0
        assert main(["report", "--in", str(out)]) == 0
        tree = {}
        for path in sorted(Path(out).rglob("*")):
            if path.is_file() and path.suffix != ".png" and path.name != "run.json":
                tree[str(path.relative_to(out))] = path.read_bytes()
        blobs.append(tree)
    assert blobs[0] == blobs[1]


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["--version"])
    assert excinfo.value.code == 0
    assert "tibbe" in capsys.readouterr().out
