"""Command-line client, run in-process against the service app."""

import re
from types import SimpleNamespace

import numpy as np
import pytest
from click.testing import CliRunner
from conftest import TINY_RUN_CFG

from mirnet import __version__
from mirnet.cli import main
from mirnet.frontend import save_wav, synth_speaker
from mirnet.trainer import LOG_HEADER


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    """Tiny corpus plus one CLI-trained checkpoint, shared across tests."""
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "run.cfg"
    cfg.write_text(TINY_RUN_CFG, encoding="utf-8")
    for name, profile in (("x.wav", 0), ("y.wav", 5)):
        save_wav(root / name, synth_speaker(profile, 0.45, np.random.default_rng(profile)))
    runner = CliRunner()
    result = runner.invoke(main, [
        "train", "--config", str(cfg), "--data", str(root / "corpus"),
        "--out", str(root / "model.ckpt"), "--synth", "4",
    ])
    assert result.exit_code == 0, result.output
    return SimpleNamespace(root=root, cfg=cfg, runner=runner,
                           corpus=root / "corpus", ckpt=root / "model.ckpt",
                           train_output=result.output)


def test_help_lists_subcommands():
    result = CliRunner().invoke(main, ["--help"])
    assert result.exit_code == 0
    for name in ("mix", "train", "embed", "eval-eer", "gradcheck", "serve"):
        assert name in result.output


def test_version():
    result = CliRunner().invoke(main, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


# ---------------------------------------------------------------------------
# mix


def test_mix_is_seed_deterministic(ws):
    args = ["mix", "--a", str(ws.root / "x.wav"), "--b", str(ws.root / "y.wav"),
            "--seconds", "0.2", "--seed", "9"]
    out1, out2 = ws.root / "m1.wav", ws.root / "m2.wav"
    r1 = ws.runner.invoke(main, args + ["--out", str(out1)])
    r2 = ws.runner.invoke(main, args + ["--out", str(out2)])
    assert r1.exit_code == 0, r1.output
    assert r1.output.splitlines()[0] == r2.output.splitlines()[0]
    assert re.fullmatch(r"offset_a=\d+ offset_b=\d+", r1.output.splitlines()[0])
    assert r1.output.splitlines()[1] == f"wrote {out1}"
    assert out1.read_bytes() == out2.read_bytes()


def test_mix_seed_changes_offsets(ws):
    outputs = []
    for seed in ("0", "1"):
        out = ws.root / f"seed{seed}.wav"
        r = ws.runner.invoke(main, [
            "mix", "--a", str(ws.root / "x.wav"), "--b", str(ws.root / "y.wav"),
            "--out", str(out), "--seconds", "0.2", "--seed", seed])
        assert r.exit_code == 0
        outputs.append(r.output.splitlines()[0])
    assert outputs[0] != outputs[1]


def test_mix_missing_file_fails_cleanly(ws):
    r = ws.runner.invoke(main, [
        "mix", "--a", str(ws.root / "nope.wav"), "--b", str(ws.root / "y.wav"),
        "--out", str(ws.root / "o.wav")])
    assert r.exit_code == 1
    assert "Error" in r.output and "nope.wav" in r.output


# ---------------------------------------------------------------------------
# train


def test_train_prints_log_and_checkpoint(ws):
    lines = ws.train_output.splitlines()
    assert lines[0] == LOG_HEADER
    assert re.fullmatch(r"1\t\d+\.\d{6}\t\d+\.\d{6}\t\d+\.\d{4}", lines[1])
    assert lines[2] == f"checkpoint={ws.ckpt} best=epoch001"
    assert ws.ckpt.is_file()
    assert (ws.root / "model.ckpt.log").is_file()


def test_train_rerun_reproduces_log(ws):
    result = ws.runner.invoke(main, [
        "train", "--config", str(ws.cfg), "--data", str(ws.corpus),
        "--out", str(ws.root / "again.ckpt"),
    ])
    assert result.exit_code == 0, result.output
    assert result.output.splitlines()[:2] == ws.train_output.splitlines()[:2]
    assert (ws.root / "again.ckpt").read_bytes() == ws.ckpt.read_bytes()


def test_train_set_overrides_config(ws, tmp_path):
    result = ws.runner.invoke(main, [
        "train", "--config", str(ws.cfg), "--data", str(ws.corpus),
        "--out", str(tmp_path / "e0.ckpt"), "--set", "epochs=0",
        "--log", str(tmp_path / "run.log"),
    ])
    assert result.exit_code == 0, result.output
    assert result.output.splitlines()[-1].endswith("best=init")
    assert (tmp_path / "run.log").read_text(encoding="utf-8") == LOG_HEADER + "\n"


def test_train_set_requires_key_value(ws):
    r = ws.runner.invoke(main, [
        "train", "--data", str(ws.corpus), "--out", "x.ckpt", "--set", "epochs"])
    assert r.exit_code == 1
    assert "--set expects KEY=VALUE" in r.output


def test_train_unknown_key_fails(ws, tmp_path):
    r = ws.runner.invoke(main, [
        "train", "--data", str(ws.corpus), "--out", str(tmp_path / "x.ckpt"),
        "--set", "nope=1"])
    assert r.exit_code == 1
    assert "unknown config key" in r.output


# ---------------------------------------------------------------------------
# embed


def test_embed_writes_csv(ws):
    out = ws.root / "emb.csv"
    r = ws.runner.invoke(main, [
        "embed", "--ckpt", str(ws.ckpt), "--wav",
        str(ws.corpus / "s001" / "u000.wav"), "--out", str(out)])
    assert r.exit_code == 0, r.output
    assert r.output.strip() == f"wrote {out} (8-dim embeddings, 2 slots)"
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 3
    assert lines[0].split(",") == ["utterance_id", "slot"] + [f"e_{i}" for i in range(1, 9)]
    for line in lines[1:]:
        cols = line.split(",")
        assert len(cols) == 10
        assert all(np.isfinite(float(v)) for v in cols[2:])


def test_embed_bad_checkpoint_fails(ws):
    r = ws.runner.invoke(main, [
        "embed", "--ckpt", str(ws.root / "x.wav"), "--wav", str(ws.root / "x.wav"),
        "--out", str(ws.root / "no.csv")])
    assert r.exit_code == 1
    assert "magic" in r.output


# ---------------------------------------------------------------------------
# eval-eer


def test_eval_eer_prints_summary(ws):
    r = ws.runner.invoke(main, [
        "eval-eer", "--ckpt", str(ws.ckpt), "--data", str(ws.corpus),
        "--trials", "12", "--seed", "1",
        "--trials-out", str(ws.root / "trials.tsv")])
    assert r.exit_code == 0, r.output
    assert re.fullmatch(r"seen_eer=\d+\.\d{2} unseen_eer=\d+\.\d{2} trials=12",
                        r.output.strip())
    assert len((ws.root / "trials.tsv").read_text("utf-8").splitlines()) == 24


def test_eval_eer_default_trials_path(ws):
    r = ws.runner.invoke(main, [
        "eval-eer", "--ckpt", str(ws.ckpt), "--data", str(ws.corpus),
        "--trials", "5"])
    assert r.exit_code == 0, r.output
    assert (ws.root / "model.ckpt.trials.tsv").is_file()


# ---------------------------------------------------------------------------
# gradcheck


def test_gradcheck_quick_passes(ws):
    r = ws.runner.invoke(main, ["gradcheck", "--quick"])
    assert r.exit_code == 0, r.output
    lines = r.output.splitlines()
    assert re.fullmatch(r"\S+: \d\.\d{3}e[+-]\d{2} \(\d+ coords\)", lines[0])
    assert any(line.startswith("max_rel_error=") for line in lines)
    assert lines[-1] == "PASS: within tolerance 0.0001"


def test_unknown_command_fails():
    r = CliRunner().invoke(main, ["frobnicate"])
    assert r.exit_code == 2
