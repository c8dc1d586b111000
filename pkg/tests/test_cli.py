import json

import pytest

from kgstory import ranker, weaklabel
from kgstory.cli import main

from conftest import TOY_KB
from oracles import naive_distinct4, naive_repeat4


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "kb.tsv").write_text(TOY_KB, encoding="utf-8")
    (tmp_path / "firsts.txt").write_text(
        "there was rain .\nthere was sunshine .\nthe dog was driving .\n", encoding="utf-8"
    )
    (tmp_path / "stories.tsv").write_text(
        "there was rain .\tthe flood came .\tthe damage was bad .\tthe repair needed a tool .\tthe smile returned .\n",
        encoding="utf-8",
    )
    (tmp_path / "antonyms.tsv").write_text("rain\tsunshine\ndriving\twalking\n", encoding="utf-8")
    return tmp_path


def run(args):
    return main([str(a) for a in args])


def test_generate_is_byte_identical_for_fixed_seed(workdir):
    args = lambda out: [
        "generate", "--kb", workdir / "kb.tsv", "--input", workdir / "firsts.txt",
        "--mock", "--seed", "7", "--out", out,
    ]
    assert run(args(workdir / "a.tsv")) == 0
    assert run(args(workdir / "b.tsv")) == 0
    a = (workdir / "a.tsv").read_bytes()
    assert a == (workdir / "b.tsv").read_bytes()
    assert run([
        "generate", "--kb", workdir / "kb.tsv", "--input", workdir / "firsts.txt",
        "--mock", "--seed", "8", "--out", workdir / "c.tsv",
    ]) == 0
    assert a != (workdir / "c.tsv").read_bytes()
    stories = a.decode().splitlines()
    assert len(stories) == 3 and all(len(line.split("\t")) == 5 for line in stories)


def test_generate_writes_plan_log_and_logprobs(workdir):
    assert run([
        "generate", "--kb", workdir / "kb.tsv", "--input", workdir / "firsts.txt",
        "--mock", "--seed", "1", "--out", workdir / "out.tsv",
        "--plan-log", workdir / "plan.tsv", "--logprobs", workdir / "lp.tsv",
    ]) == 0
    plan = (workdir / "plan.tsv").read_text()
    assert plan.startswith("# story 0\n1\t\t\n")
    assert all(len(line.split("\t")) == 3 for line in plan.splitlines() if not line.startswith("#"))
    rows = (workdir / "lp.tsv").read_text().splitlines()
    assert len(rows) == 3


def test_generate_static_mode_runs(workdir):
    assert run([
        "generate", "--kb", workdir / "kb.tsv", "--input", workdir / "firsts.txt",
        "--mock", "--mode", "static", "--out", workdir / "static.tsv",
    ]) == 0
    assert len((workdir / "static.tsv").read_text().splitlines()) == 3


def test_generate_requires_backends(workdir):
    code = run([
        "generate", "--kb", workdir / "kb.tsv", "--input", workdir / "firsts.txt",
        "--out", workdir / "x.tsv",
    ])
    assert code == 1


def test_unknown_command_is_usage_error():
    assert run(["frobnicate"]) == 1


def test_missing_kb_file_is_usage_error(workdir):
    # click path validation treats a nonexistent path as a usage problem
    code = run([
        "generate", "--kb", workdir / "nope.tsv", "--input", workdir / "firsts.txt",
        "--mock", "--out", workdir / "x.tsv",
    ])
    assert code == 1


def test_malformed_kb_is_data_error(workdir):
    bad = workdir / "bad.tsv"
    bad.write_text("not a triple\n", encoding="utf-8")
    code = run([
        "generate", "--kb", bad, "--input", workdir / "firsts.txt",
        "--mock", "--out", workdir / "x.tsv",
    ])
    assert code == 2


def test_backend_error_exit_code(workdir):
    code = run([
        "generate", "--kb", workdir / "kb.tsv", "--input", workdir / "firsts.txt",
        "--embed-url", "http://127.0.0.1:9", "--kw-url", "http://127.0.0.1:9",
        "--gen-url", "http://127.0.0.1:9", "--out", workdir / "x.tsv",
    ])
    assert code == 3


def test_backend_urls_fall_back_to_environment(workdir, monkeypatch):
    monkeypatch.setenv("CNTRL_EMBED_URL", "http://127.0.0.1:9")
    monkeypatch.setenv("CNTRL_KW_URL", "http://127.0.0.1:9")
    monkeypatch.setenv("CNTRL_GEN_URL", "http://127.0.0.1:9")
    code = run([
        "generate", "--kb", workdir / "kb.tsv", "--input", workdir / "firsts.txt",
        "--out", workdir / "x.tsv",
    ])
    # endpoints resolved from the environment (and then found unreachable)
    assert code == 3


def test_index_build_writes_postings(workdir):
    out = workdir / "index.json"
    assert run(["index", "build", "--kb", workdir / "kb.tsv", "--out", out]) == 0
    payload = json.loads(out.read_text())
    assert payload["postings"]["rain"] == [0]
    assert payload["sentences"][0]["text"] == "rain causes flood"


def test_label_build_dump_round_trips(workdir):
    out = workdir / "labels.tsv"
    assert run([
        "label", "build", "--kb", workdir / "kb.tsv", "--stories", workdir / "stories.tsv",
        "--mock", "--n", "2", "--out", out,
    ]) == 0
    labels = weaklabel.load_labels(out.read_text())
    assert len(labels) == 5
    for label in labels:
        assert set(label.positives) <= set(label.candidates)
        assert len(label.positives) <= 2


def test_ranker_train_writes_checkpoint_and_report(workdir, capsys):
    heads_path = workdir / "heads.json"
    report_path = workdir / "report.tsv"
    assert run([
        "ranker", "train", "--kb", workdir / "kb.tsv", "--stories", workdir / "stories.tsv",
        "--mock", "--n", "1", "--epochs", "3", "--pairs", "5", "--heads", heads_path,
        "--report", report_path,
    ]) == 0
    heads = ranker.load_heads(heads_path)
    assert heads.margin == 5.0 and heads.d_in == 16
    lines = report_path.read_text().splitlines()
    assert len(lines) == 3 and lines[0].startswith("1\t")


def test_eval_metrics_matches_naive_oracle(workdir, capsys):
    stories_file = workdir / "metric_stories.tsv"
    stories_file.write_text(
        "a b c d e a b c d\tx\ty\tz\tw\n" "p q r s\tt\tu\tv\tw\n", encoding="utf-8"
    )
    assert run(["eval", "metrics", "--stories", stories_file]) == 0
    out = capsys.readouterr().out.strip()
    repeat_str, distinct_str, ppl_str, count = out.split("\t")
    tokenized = [
        "a b c d e a b c d x y z w".split(),
        "p q r s t u v w".split(),
    ]
    assert float(repeat_str) == naive_repeat4(tokenized)
    assert float(distinct_str) == pytest.approx(naive_distinct4(tokenized), abs=5e-5)
    assert ppl_str == "NA" and count == "2"


def test_eval_metrics_with_logprobs(workdir, capsys):
    stories_file = workdir / "s.tsv"
    stories_file.write_text("a b c d e\tf\tg\th\ti\n", encoding="utf-8")
    lp_file = workdir / "lp.tsv"
    lp_file.write_text("0\t0.0 0.0\n", encoding="utf-8")
    assert run(["eval", "metrics", "--stories", stories_file, "--logprobs", lp_file]) == 0
    assert capsys.readouterr().out.strip().split("\t")[2] == "1.0000"


def test_generated_stories_feed_eval_metrics(workdir, capsys):
    out = workdir / "gen.tsv"
    assert run([
        "generate", "--kb", workdir / "kb.tsv", "--input", workdir / "firsts.txt",
        "--mock", "--seed", "2", "--out", out, "--logprobs", workdir / "gl.tsv",
    ]) == 0
    capsys.readouterr()
    assert run(["eval", "metrics", "--stories", out, "--logprobs", workdir / "gl.tsv"]) == 0
    fields = capsys.readouterr().out.strip().split("\t")
    assert len(fields) == 4 and fields[3] == "3"
    assert fields[2] != "NA"


def test_control_antonym_report(workdir):
    report = workdir / "control.tsv"
    assert run([
        "control", "antonym", "--kb", workdir / "kb.tsv", "--input", workdir / "firsts.txt",
        "--lexicon", workdir / "antonyms.tsv", "--mock", "--seed", "0",
        "--out", report, "--controlled-out", workdir / "controlled.tsv",
    ]) == 0
    lines = report.read_text().splitlines()
    assert len(lines) == 3
    for line in lines:
        story_id, pivot_step, keyword, antonym, changed = line.split("\t")
        assert changed == "false"
        if pivot_step != "-1":
            assert int(pivot_step) >= 2 and keyword and antonym
    # the rain and driving stories are controllable with this lexicon
    pivots = [line.split("\t")[1] for line in lines]
    assert pivots.count("-1") <= 1
