"""Config parsing, command round-trips, resume, and the latency bench."""

import os

import pytest

from ngm.bench import BenchReport, BenchRow, lifelong_corpus, run_bench
from ngm.checkpoint import model_from_text, model_to_text
from ngm.cli import main
from ngm.config import (RunConfig, coerce, format_run_config,
                        make_run_config, parse_config_text)
from ngm.errors import ConfigError


def test_config_text_parsing_and_comments():
    pairs = parse_config_text("a = 1\n\n# whole-line comment\nb=2 # tail\n")
    assert pairs == {"a": "1", "b": "2"}
    with pytest.raises(ConfigError, match=":3:"):
        parse_config_text("a = 1\n\nnot a pair\n")


def test_config_unknown_key_and_coercion():
    with pytest.raises(ConfigError, match="unknown config key"):
        make_run_config({"tusk": "1"})
    with pytest.raises(ConfigError, match="bad value"):
        make_run_config({"seed": "zero"})
    cfg = make_run_config({"stages": "1,2,3", "use_ae": "false",
                           "lr": "0.5", "out": "x"})
    assert cfg.stages == (1, 2, 3) and cfg.use_ae is False
    assert cfg.lr == 0.5 and cfg.out == "x"
    assert coerce("resume", "YES") is True


def test_config_flags_win_and_echo_roundtrip():
    cfg = make_run_config({"seed": "1", "task": "2"}, {"seed": "7"})
    assert cfg.seed == 7 and cfg.task == 2
    echoed = parse_config_text(format_run_config(cfg))
    assert make_run_config(echoed) == cfg


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_generate_counts_and_determinism(tmp_path, capsys):
    code, out = run_cli(capsys, "generate", "--task", "1",
                        "--examples", "20", "--story_length", "3")
    assert code == 0
    assert sum(1 for line in out.splitlines() if "\t" in line) == 20
    code2, out2 = run_cli(capsys, "generate", "--task", "1",
                          "--examples", "20", "--story_length", "3")
    assert out2 == out


def test_generate_unsupported_task(capsys):
    code = main(["generate", "--task", "3"])
    err = capsys.readouterr().err
    assert code == 1
    assert "error:" in err


def test_config_file_merges_under_flags(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("task = 1\nexamples = 5\nstory_length = 3\n")
    code, out = run_cli(capsys, "generate", "--config", str(cfg),
                        "--examples", "2")
    assert code == 0
    assert sum(1 for line in out.splitlines() if "\t" in line) == 2


TRAIN_FLAGS = ["--stages", "1,1,0", "--seed", "4", "--zn_samples", "4",
               "--prog_beam", "8", "--examples", "8"]


@pytest.fixture(scope="module")
def trained_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "t1.txt"
    out = root / "run"
    assert main(["generate", "--task", "1", "--examples", "8",
                 "--story_length", "3", "--seed", "0",
                 "--out", str(data)]) == 0
    assert main(["train", "--data", str(data), "--out", str(out),
                 *TRAIN_FLAGS]) == 0
    return data, out


def test_train_outputs_and_checkpoint_roundtrip(trained_run):
    data, out = trained_run
    metrics = (out / "metrics.tsv").read_text().splitlines()
    assert len(metrics) == 2
    assert metrics[0].startswith("1\t1\t") and metrics[1].startswith("2\t1\t")
    for name in ("encoder.ckpt", "decoder.ckpt", "programmer.ckpt"):
        text = (out / name).read_text()
        assert text.startswith("ngm-ckpt v1\n")
        assert model_to_text(model_from_text(text)) == text
    echoed = parse_config_text((out / "config.txt").read_text())
    assert make_run_config(echoed).stages == (1, 1, 0)


def test_train_byte_identical_reruns(trained_run, tmp_path):
    data, out = trained_run
    again = tmp_path / "again"
    assert main(["train", "--data", str(data), "--out", str(again),
                 *TRAIN_FLAGS]) == 0
    assert (again / "metrics.tsv").read_bytes() \
        == (out / "metrics.tsv").read_bytes()
    for name in ("encoder.ckpt", "decoder.ckpt", "programmer.ckpt",
                 "vocab.txt"):
        assert (again / name).read_bytes() == (out / name).read_bytes()


def test_train_resume_continues_metrics(trained_run, tmp_path):
    data, _ = trained_run
    out = tmp_path / "resume"
    head = ["train", "--data", str(data), "--out", str(out), "--seed", "4",
            "--zn_samples", "4", "--prog_beam", "8"]
    assert main(head + ["--stages", "1,0,0"]) == 0
    assert main(head + ["--stages", "3,0,0", "--resume", "true"]) == 0
    stages_epochs = [line.split("\t")[:2]
                     for line in (out / "metrics.tsv").read_text().splitlines()]
    assert stages_epochs == [["1", "1"], ["1", "2"], ["1", "3"]]


def test_eval_report_fields(trained_run, capsys):
    data, out = trained_run
    code, text = run_cli(capsys, "eval", "--data", str(data),
                         "--checkpoint", str(out), "--zn_samples", "4")
    assert code == 0
    header, row = text.splitlines()
    assert header == "task\tn\taccuracy\tstrict_acc\tset_f1"
    task, n, acc, strict, f1 = row.split("\t")
    assert n == "8"
    assert 0.0 <= float(strict) <= float(acc) <= 1.0
    assert 0.0 <= float(f1) <= 1.0


def test_eval_missing_checkpoint(trained_run, tmp_path, capsys):
    data, _ = trained_run
    code = main(["eval", "--data", str(data),
                 "--checkpoint", str(tmp_path / "nowhere")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_answer_repeatable_and_unk_question(trained_run, tmp_path, capsys):
    _, out = trained_run
    story = tmp_path / "story.txt"
    story.write_text("1 Mary went to the kitchen.\n2 John went to the garden.\n")
    argv = ["answer", "--checkpoint", str(out), "--story", str(story),
            "--question", "where is john?"]
    code, first = run_cli(capsys, *argv)
    assert code == 0
    assert first.startswith("program\t") and "answers\t" in first
    code, second = run_cli(capsys, *argv)
    assert second == first
    code, unk = run_cli(capsys, "answer", "--checkpoint", str(out),
                        "--story", str(story),
                        "--question", "where is zorblatt?")
    assert code == 0
    assert "answers\t-" in unk
    assert "outside vocabulary: zorblatt" in unk


def test_inspect_table_shape(trained_run, tmp_path, capsys):
    _, out = trained_run
    story = tmp_path / "story.txt"
    story.write_text("1 Mary went to the kitchen.\n")
    code, text = run_cli(capsys, "inspect", "--checkpoint", str(out),
                         "--story", str(story))
    assert code == 0
    lines = text.splitlines()
    assert lines[0].split("\t") == ["sentence", "rank", "g1", "g2", "g3",
                                    "encoder_logp", "reconstruction_ll"]
    assert 1 <= len(lines) - 1 <= 2  # one sentence, beam width 2
    for line in lines[1:]:
        fields = line.split("\t")
        assert len(fields) == 7
        assert float(fields[5]) <= 0.0 and float(fields[6]) <= 0.0
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    code, text = run_cli(capsys, "inspect", "--checkpoint", str(out),
                         "--story", str(empty))
    assert code == 0
    assert text.splitlines()[1:] == []


def test_lifelong_corpus_shapes():
    sentences, questions = lifelong_corpus(1, 50, 7, seed=0)
    assert len(sentences) == 50 and len(questions) == 7
    assert all(len(s) >= 3 for s in sentences)


def test_bench_report_invariants_and_small_run(capsys):
    report = run_bench([400, 100], probes=20, seed=0)
    assert [r.length for r in report.rows] == [100, 400]
    with pytest.raises(ConfigError):
        BenchReport((BenchRow(10, 0, 0, 0, 0, 0, 0),
                     BenchRow(5, 0, 0, 0, 0, 0, 0)))
    code, text = run_cli(capsys, "bench", "--lengths", "150",
                         "--probes", "10")
    lines = text.splitlines()
    assert code == 0 and len(lines) == 2
    assert lines[0].split("\t")[0] == "length"
    assert lines[1].split("\t")[0] == "150"


def test_bench_rejects_bad_probes():
    with pytest.raises(ConfigError):
        run_bench([100], probes=0)
