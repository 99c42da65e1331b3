from __future__ import annotations

import json

import pytest

from agriworld.cli import EXIT_IO, EXIT_OK, EXIT_VALIDATION, main


@pytest.fixture(scope="module")
def bench(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["gen-world", "--seed", "5", "--out", str(d / "world"), "--parcels", "12"]) == EXIT_OK
    assert main(["gen-tasks", "--world", str(d / "world"), "--out", str(d / "tasks"), "--per-family", "3"]) == EXIT_OK
    return d


def test_run_and_report(bench, capsys):
    out = bench / "run.json"
    assert main(["run", "--world", str(bench / "world"), "--tasks", str(bench / "tasks"), "--policy", "scripted", "--budget", "1", "--out", str(out), "--traces", str(bench / "traces")]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["aggregates"]["overall_accuracy"] == 1.0
    assert len(list((bench / "traces").glob("*.json"))) == 12
    capsys.readouterr()
    assert main(["report", "--in", str(out), "--format", "json"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["aggregates"] == doc["aggregates"]
    assert main(["report", "--in", str(out)]) == EXIT_OK
    assert "overall_accuracy = 1.0000" in capsys.readouterr().out


def test_report_recomputes_tampered_aggregates(bench, capsys):
    out = bench / "run2.json"
    main(["run", "--world", str(bench / "world"), "--tasks", str(bench / "tasks"), "--budget", "1", "--out", str(out)])
    doc = json.loads(out.read_text())
    doc["aggregates"]["overall_accuracy"] = 0.0
    out.write_text(json.dumps(doc))
    capsys.readouterr()
    main(["report", "--in", str(out), "--format", "json"])
    assert json.loads(capsys.readouterr().out)["aggregates"]["overall_accuracy"] == 1.0


def test_check_answers(bench, capsys):
    from agriworld.protocol import load_tasks

    tasks = load_tasks(bench / "tasks")
    entries = [{"task_id": t.task_id, "plan": t.reference_plan.to_json()} for t in tasks]
    entries.append({"task_id": tasks[0].task_id, "answer": {"value": 1}})
    (bench / "answers.json").write_text(json.dumps(entries))
    res = bench / "checked.json"
    capsys.readouterr()
    assert main(["check", "--world", str(bench / "world"), "--tasks", str(bench / "tasks"), "--answers", str(bench / "answers.json"), "--out", str(res)]) == EXIT_OK
    zs = [r["z"] for r in json.loads(res.read_text())["results"]]
    assert zs == [1] * len(tasks) + [0]
    assert f"{len(tasks)}/{len(tasks) + 1} answers pass" in capsys.readouterr().out


def test_ablate(bench):
    out = bench / "abl.json"
    assert main(["ablate", "--world", str(bench / "world"), "--tasks", str(bench / "tasks"), "--variants", "full,one_shot", "--out", str(out)]) == EXIT_OK
    rows = json.loads(out.read_text())["rows"]
    assert [r["variant"] for r in rows] == ["full", "one_shot"]
    assert main(["report", "--in", str(out)]) == EXIT_OK


def test_validation_exit_code(bench):
    assert main(["ablate", "--world", str(bench / "world"), "--tasks", str(bench / "tasks"), "--variants", "warp", "--out", str(bench / "x.json")]) == EXIT_VALIDATION
    assert main(["gen-world", "--seed", "1", "--out", str(bench / "w2"), "--cloud-prob", "1.5"]) == EXIT_VALIDATION
    assert main(["run", "--world", str(bench / "world"), "--tasks", str(bench / "tasks"), "--policy", "greedy", "--out", str(bench / "x.json")]) == EXIT_VALIDATION
    (bench / "bad.json").write_text("{not json")
    assert main(["report", "--in", str(bench / "bad.json")]) == EXIT_VALIDATION


def test_io_exit_code(bench):
    assert main(["run", "--world", str(bench / "missing"), "--tasks", str(bench / "tasks"), "--out", str(bench / "x.json")]) == EXIT_IO
    assert main(["report", "--in", str(bench / "missing.json")]) == EXIT_IO
