import json
import subprocess
import sys

import pytest

from kgqa_env.cli import main
from kgqa_env.data import TOY_ALIASES, TOY_KG, TOY_QA, TOY_WEB_CORPUS


def run(capsys, *argv):
    rc = main(list(argv))
    out = capsys.readouterr()
    return rc, out.out, out.err


class TestBuildKg:
    def test_stats_and_normalized_copy(self, capsys, tmp_path):
        out = tmp_path / "kg.tsv"
        rc, stdout, _ = run(capsys, "build-kg", "--triples", str(TOY_KG),
                            "--aliases", str(TOY_ALIASES), "--out", str(out))
        assert rc == 0
        stats = json.loads(stdout)
        assert stats["triples"] == 96
        lines = out.read_text().splitlines()
        assert len(lines) == 96
        assert lines == sorted(lines)

    def test_malformed_file_reports_error(self, capsys, tmp_path):
        bad = tmp_path / "bad.tsv"
        bad.write_text("only\ttwo\n")
        rc, _, stderr = run(capsys, "build-kg", "--triples", str(bad))
        assert rc == 1
        assert "line 1" in stderr


class TestPipeline:
    @pytest.fixture
    def workdir(self, tmp_path, capsys):
        """Run sample-ikg + rollout over the toy suite once."""
        ikg_kg = tmp_path / "ikg.tsv"
        ikg_log = tmp_path / "ikg.jsonl"
        rc, stdout, _ = run(capsys, "sample-ikg", "--triples", str(TOY_KG), "--aliases", str(TOY_ALIASES),
                            "--qa", str(TOY_QA), "--fraction", "0.4", "--seed", "1",
                            "--out-kg", str(ikg_kg), "--out-log", str(ikg_log))
        assert rc == 0
        traj = tmp_path / "traj.jsonl"
        masks = tmp_path / "masks.jsonl"
        rc, _, _ = run(capsys, "rollout", "--kg", str(ikg_kg), "--aliases", str(TOY_ALIASES),
                       "--qa", str(TOY_QA), "--policy", "scripted", "--web", "offline",
                       "--web-corpus", str(TOY_WEB_CORPUS), "--out", str(traj), "--masks", str(masks))
        assert rc == 0
        return tmp_path

    def test_rollout_file_schema(self, workdir):
        lines = [json.loads(l) for l in (workdir / "traj.jsonl").read_text().splitlines()]
        assert len(lines) == 25
        assert all(set(rec) == {"id", "text"} for rec in lines)
        masks = [json.loads(l) for l in (workdir / "masks.jsonl").read_text().splitlines()]
        assert all(set(rec) == {"id", "masked_spans"} for rec in masks)
        assert all(isinstance(s, list) and len(s) == 2 for rec in masks for s in rec["masked_spans"])

    def test_score_advantages_filter_eval(self, workdir, capsys):
        scores = workdir / "scores.jsonl"
        rc, _, _ = run(capsys, "score", "--traj", str(workdir / "traj.jsonl"), "--qa", str(TOY_QA),
                       "--ikg-log", str(workdir / "ikg.jsonl"), "--out", str(scores))
        assert rc == 0
        recs = [json.loads(l) for l in scores.read_text().splitlines()]
        assert len(recs) == 25
        expected_keys = {"id", "format_ok", "r_ans", "R_acc", "R_graph", "R_web", "R_over", "coverage"}
        assert all(set(r) == expected_keys for r in recs)
        assert all(r["coverage"] == "IKG" for r in recs)  # every toy question loses a triple at 0.4

        adv = workdir / "adv.jsonl"
        rc, _, _ = run(capsys, "advantages", "--scores", str(scores), "--group-size", "8", "--out", str(adv))
        assert rc == 0
        groups = [json.loads(l) for l in adv.read_text().splitlines()]
        assert all(set(g) == {"id", "group", "rewards", "advantages"} for g in groups)
        assert all(len(g["rewards"]) == len(g["advantages"]) for g in groups)

        sft = workdir / "sft.jsonl"
        rc, stdout, _ = run(capsys, "filter-sft", "--traj", str(workdir / "traj.jsonl"), "--qa", str(TOY_QA),
                            "--ikg-log", str(workdir / "ikg.jsonl"), "--judge", "rule", "--out", str(sft))
        assert rc == 0
        summary = json.loads(stdout)
        assert summary["kept"] + summary["dropped"] == 25
        kept = [json.loads(l) for l in sft.read_text().splitlines()]
        assert all(set(r) == {"prompt", "completion", "masked_spans"} for r in kept)

        report_path = workdir / "report.json"
        rc, stdout, _ = run(capsys, "eval", "--traj", str(workdir / "traj.jsonl"), "--qa", str(TOY_QA),
                            "--out", str(report_path))
        assert rc == 0
        report = json.loads(report_path.read_text())
        assert report["hits_at_1"] == 1.0
        assert report["web_search_ratio"] == 0.4
        assert report["n_questions"] == 25

    def test_score_requires_coverage_for_every_question(self, workdir, capsys):
        empty_log = workdir / "empty.jsonl"
        empty_log.write_text("")
        rc, _, stderr = run(capsys, "score", "--traj", str(workdir / "traj.jsonl"), "--qa", str(TOY_QA),
                            "--ikg-log", str(empty_log), "--out", str(workdir / "x.jsonl"))
        assert rc == 1
        assert "coverage" in stderr


class TestConfigFile:
    def test_config_supplies_defaults_and_flags_win(self, capsys, tmp_path):
        config = tmp_path / "run.conf"
        config.write_text("# pipeline defaults\nfraction=0.4\nseed=7\nignored-key=5\n")
        out_kg, out_log = tmp_path / "kg.tsv", tmp_path / "log.jsonl"
        rc, stdout, _ = run(capsys, "sample-ikg", "--triples", str(TOY_KG), "--qa", str(TOY_QA),
                            "--config", str(config), "--out-kg", str(out_kg), "--out-log", str(out_log))
        assert rc == 0
        assert json.loads(stdout)["fraction"] == 0.4
        assert json.loads(stdout)["seed"] == 7

        rc, stdout, _ = run(capsys, "sample-ikg", "--triples", str(TOY_KG), "--qa", str(TOY_QA),
                            "--config", str(config), "--fraction", "0.2",
                            "--out-kg", str(out_kg), "--out-log", str(out_log))
        assert rc == 0
        assert json.loads(stdout)["fraction"] == 0.2
        assert json.loads(stdout)["seed"] == 7

    def test_malformed_config_line(self, capsys, tmp_path):
        config = tmp_path / "bad.conf"
        config.write_text("this is not a pair\n")
        rc, _, stderr = run(capsys, "build-kg", "--triples", str(TOY_KG), "--config", str(config))
        assert rc == 1
        assert "config" in stderr


class TestRolloutFlags:
    def test_offline_web_requires_corpus(self, capsys, tmp_path):
        rc, _, stderr = run(capsys, "rollout", "--kg", str(TOY_KG), "--qa", str(TOY_QA),
                            "--out", str(tmp_path / "t.jsonl"))
        assert rc == 1
        assert "web-corpus" in stderr


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "kgqa_env", "build-kg", "--triples", str(TOY_KG)],
        capture_output=True, text=True, timeout=60,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["triples"] == 96
