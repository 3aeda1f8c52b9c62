from __future__ import annotations

import io
import json

import pytest

from tokenmark import corpus
from tokenmark.cli import main


@pytest.fixture()
def vocab_file(tmp_path):
    path = tmp_path / "vocab.tsv"
    with open(path, "w", encoding="utf-8") as fp:
        corpus.build_demo_vocab().save(fp)
    return str(path)


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestEmbedDetect:
    def test_embed_then_detect_round_trip(self, vocab_file, tmp_path, capsys):
        out_file = tmp_path / "code.py"
        trace_file = tmp_path / "trace.jsonl"
        code, _, err = run(
            [
                "embed", "--vocab", vocab_file, "--user-id", "2871",
                "--provider", "code-template", "--provider-seed", "7",
                "--out", str(out_file), "--trace", str(trace_file),
            ],
            capsys,
        )
        assert code == 0
        assert "status=complete" in err
        assert trace_file.exists()
        report = tmp_path / "report.json"
        code, out, _ = run(
            ["detect", "--vocab", vocab_file, str(out_file), "--report", str(report)],
            capsys,
        )
        assert code == 0
        assert "user_id=2871" in out
        data = json.loads(report.read_text())
        assert data["detected"] and data["user_id"] == 2871

    def test_small_budget_exits_one(self, vocab_file, tmp_path, capsys):
        code, _, err = run(
            [
                "embed", "--vocab", vocab_file, "--user-id", "1",
                "--provider", "code-template", "--max-new-tokens", "10",
                "--out", str(tmp_path / "c.py"),
            ],
            capsys,
        )
        assert code == 1
        assert "status=" in err

    def test_missing_vocab_exits_two(self, capsys):
        code, _, err = run(["embed", "--user-id", "1"], capsys)
        assert code == 2 and "vocabulary" in err

    def test_nonexistent_vocab_exits_two(self, capsys):
        code, _, err = run(
            ["embed", "--vocab", "/nonexistent.tsv", "--user-id", "1"], capsys
        )
        assert code == 2

    def test_payload_bits_flag(self, vocab_file, tmp_path, capsys):
        bits = "101100110111"
        out_file = tmp_path / "c.py"
        code, _, err = run(
            [
                "embed", "--vocab", vocab_file, "--payload-bits", bits,
                "--provider", "code-template", "--out", str(out_file),
            ],
            capsys,
        )
        assert code == 0
        code, out, _ = run(["detect", "--vocab", vocab_file, str(out_file)], capsys)
        assert code == 0 and f"user_bits={bits}" in out

    def test_wrong_length_payload_bits_rejected(self, vocab_file, capsys):
        code, _, err = run(
            ["embed", "--vocab", vocab_file, "--payload-bits", "101"], capsys
        )
        assert code == 2

    def test_detect_random_text_exits_one(self, vocab_file, tmp_path, capsys):
        f = tmp_path / "plain.py"
        f.write_text("import os\nimport sys\n", encoding="utf-8")
        code, out, _ = run(["detect", "--vocab", vocab_file, str(f)], capsys)
        assert code == 1
        assert "not-detected" in out

    def test_detect_wrong_seed_exits_one(self, vocab_file, tmp_path, capsys):
        out_file = tmp_path / "c.py"
        run(
            [
                "embed", "--vocab", vocab_file, "--user-id", "9",
                "--provider", "code-template", "--out", str(out_file),
            ],
            capsys,
        )
        code, out, _ = run(
            ["detect", "--vocab", vocab_file, str(out_file), "--seed", "1"], capsys
        )
        # A wrong seed may still "detect" a garbage id from a single round
        # (one round is returned directly); it must never recover user 9.
        assert code == 1 or "user_id=9 " not in out + " "

    def test_scripted_provider_from_flag(self, vocab_file, tmp_path, capsys):
        vocab = corpus.build_demo_vocab()
        newline = vocab.id_of("\n")
        plain = [vocab.id_of(t) for t in ("fetch", "url", "data", "load", "queue")]
        script = [newline] + plain * 12
        code, _, err = run(
            [
                "embed", "--vocab", vocab_file, "--user-id", "3", "--x", "8",
                "--provider", "scripted",
                "--script", ",".join(map(str, script)),
                "--out", str(tmp_path / "c.py"),
            ],
            capsys,
        )
        assert code == 0, err


class TestReproducibility:
    def test_identical_runs_produce_identical_artifacts(self, vocab_file, tmp_path, capsys):
        outs = []
        for tag in ("a", "b"):
            code_path = tmp_path / f"code-{tag}.py"
            trace_path = tmp_path / f"trace-{tag}.jsonl"
            code, _, _ = run(
                [
                    "embed", "--vocab", vocab_file, "--user-id", "777",
                    "--provider", "code-template", "--provider-seed", "3",
                    "--out", str(code_path), "--trace", str(trace_path),
                ],
                capsys,
            )
            assert code == 0
            outs.append((code_path.read_bytes(), trace_path.read_bytes()))
        assert outs[0] == outs[1]

    def test_eval_table_is_deterministic(self, tmp_path, capsys):
        tables = []
        for tag in ("a", "b"):
            out = tmp_path / f"t-{tag}.tsv"
            code, _, _ = run(
                ["eval", "--mode", "gamma", "--tasks", "3", "--grid", "0.5",
                 "--out", str(out)],
                capsys,
            )
            assert code == 0
            tables.append(out.read_bytes())
        assert tables[0] == tables[1]


class TestConfigFile:
    def test_config_supplies_defaults_flags_override(self, vocab_file, tmp_path, capsys):
        cfg = tmp_path / "run.ini"
        cfg.write_text(
            f"[run]\nvocab = {vocab_file}\nuser-id = 55\nprovider = code-template\n"
            f"x = 16\n\n[patterns]\nset_a = def, class\n",
            encoding="utf-8",
        )
        out_file = tmp_path / "c.py"
        code, _, err = run(
            ["embed", "--config", str(cfg), "--out", str(out_file)], capsys
        )
        assert code == 0
        code, out, _ = run(
            ["detect", "--config", str(cfg), str(out_file)], capsys
        )
        assert code == 0 and "user_id=55" in out

    def test_pattern_overrides_must_match_between_embed_and_detect(
        self, vocab_file, tmp_path, capsys
    ):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[patterns]\nset_a = fetch\n", encoding="utf-8")
        out_file = tmp_path / "c.py"
        code, _, _ = run(
            [
                "embed", "--vocab", vocab_file, "--config", str(cfg),
                "--user-id", "5", "--provider", "code-template",
                "--out", str(out_file),
            ],
            capsys,
        )
        assert code == 0
        code, _, _ = run(
            ["detect", "--vocab", vocab_file, "--config", str(cfg), str(out_file)],
            capsys,
        )
        assert code == 0

    def test_bad_config_exits_two(self, tmp_path, capsys):
        cfg = tmp_path / "broken.ini"
        cfg.write_text("[run\nvocab =", encoding="utf-8")
        code, _, err = run(["embed", "--config", str(cfg), "--user-id", "1"], capsys)
        assert code == 2


class TestAttackCommand:
    def test_attack_pipes_stdin_to_stdout(self, vocab_file, tmp_path, capsys, monkeypatch):
        source = "import os\n# retry on failure\nfetch(url)\n"
        monkeypatch.setattr("sys.stdin", io.StringIO(source))
        code, out, err = run(["attack", "--kind", "add-comments", "--seed", "4"], capsys)
        assert code == 0
        assert len(out) > len(source)

    def test_attack_noop_reports_to_stderr(self, capsys, monkeypatch):
        monkeypatch.setattr("sys.stdin", io.StringIO("plain\n"))
        code, out, err = run(["attack", "--kind", "modify-comments", "--seed", "1"], capsys)
        assert code == 0
        assert out == "plain\n"
        assert "no-op" in err


class TestEvalCommand:
    def test_hash_mode_table(self, tmp_path, capsys):
        out_file = tmp_path / "hash.tsv"
        code, _, _ = run(
            ["eval", "--mode", "hash", "--tasks", "4", "--out", str(out_file)], capsys
        )
        assert code == 0
        lines = out_file.read_text().strip().splitlines()
        assert lines[0] == "knob\tvalue\tembed_success\tdetect_success\ttasks"
        assert lines[1].startswith("hash_mode\tchained")
        assert lines[2].startswith("hash_mode\tfixed")

    def test_gamma_mode_custom_grid(self, capsys):
        code, out, _ = run(
            ["eval", "--mode", "gamma", "--tasks", "2", "--grid", "0.5,0.625"], capsys
        )
        assert code == 0
        assert out.count("gamma\t") == 2

    def test_length_mode(self, capsys):
        code, out, _ = run(
            ["eval", "--mode", "length", "--tasks", "2", "--grid", "120,200"], capsys
        )
        assert code == 0
        assert "max_new_tokens\t120" in out

    def test_hash_mode_rejects_grid(self, capsys):
        code, _, err = run(
            ["eval", "--mode", "hash", "--grid", "1,2", "--tasks", "2"], capsys
        )
        assert code == 2

    def test_attacks_mode(self, capsys):
        code, out, _ = run(
            ["eval", "--mode", "attacks", "--tasks", "2", "--trials", "1"], capsys
        )
        assert code == 0
        assert out.startswith("kind\tsurvived")


class TestVocabCommand:
    def test_demo_writes_loadable_vocab(self, tmp_path, capsys):
        out_file = tmp_path / "demo.tsv"
        template = tmp_path / "template.py"
        code, _, _ = run(
            ["vocab", "demo", "--out", str(out_file), "--template-out", str(template)],
            capsys,
        )
        assert code == 0
        from tokenmark.vocab import load_vocabulary

        with open(out_file, encoding="utf-8") as fp:
            vocab = load_vocabulary(fp)
        assert vocab.texts == corpus.build_demo_vocab().texts
        assert template.read_text(encoding="utf-8") == corpus.DEMO_TEMPLATE

    def test_inspect_reports_stats(self, vocab_file, capsys):
        code, out, _ = run(["vocab", "inspect", "--vocab", vocab_file], capsys)
        assert code == 0
        assert "prefix_free\tTrue" in out
        assert "trigger_keyword" in out
