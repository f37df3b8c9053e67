"""Command implementations shared by the HTTP service and the CLI client.

Each function performs one complete run (mix, train, embed, eval-eer,
gradcheck) and returns a plain dict that the service layer exposes as a
response model.  Everything is deterministic given the seeds involved.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import trainer as trainer_mod
from .checkpoint import load_checkpoint, save_checkpoint
from .config import (RunConfig, apply_overrides, feature_config, load_config,
                     model_config, serialize_config)
from .corpus import UtteranceCache, ensure_synthetic_corpus, index_corpus
from .errors import CorpusError
from .evalproto import build_trials, compute_eer, export_trials, score_trials
from .frontend import features_of, load_wav, mix, sample_segment, save_wav
from .gradchecks import TOLERANCE, run_suite
from .model import MirnetModel


def run_mix(a: str, b: str, out: str, seconds: float | None = None,
            seed: int = 0) -> dict:
    wav_a = load_wav(a)
    wav_b = load_wav(b)
    wav_a.utterance_id = Path(a).stem
    wav_b.utterance_id = Path(b).stem
    if seconds is None:
        # default to the longest fully overlapped cut both files support
        seconds = min(wav_a.seconds, wav_b.seconds)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    seg_a, off_a = sample_segment(wav_a, seconds, rng)
    seg_b, off_b = sample_segment(wav_b, seconds, rng)
    sample = mix(seg_a, seg_b, offsets=(off_a, off_b), seed=int(seed))
    save_wav(out, sample.mixture)
    return {
        "out": str(out),
        "offset_a": off_a,
        "offset_b": off_b,
        "bins": sample.spectrogram.bins,
        "frames": sample.spectrogram.frames,
    }


def run_train(data: str, out: str, config: str | None = None,
              synth: int | None = None, overrides: dict[str, str] | None = None,
              log: str | None = None) -> dict:
    cfg = load_config(config) if config else RunConfig()
    if overrides:
        apply_overrides(cfg, overrides)
    if synth is not None:
        ensure_synthetic_corpus(
            data, synth, n_utterances=cfg.synth_utterances,
            seconds=cfg.synth_seconds, seed=cfg.synth_seed,
            unseen_speakers=cfg.synth_unseen_speakers)
    index = index_corpus(data)
    train_speakers = index.split_speakers("train")
    if not train_speakers:
        raise CorpusError(f"corpus {data} has no train split (train.txt)")
    model = MirnetModel(model_config(cfg, len(train_speakers)), seed=cfg.seed)
    report, best_values = trainer_mod.train(
        index, model, trainer_mod.TrainConfig.from_run(cfg),
        features=feature_config(cfg))
    cfg.num_classes = len(train_speakers)
    cfg.train_speakers = ",".join(train_speakers)
    save_checkpoint(best_values, serialize_config(cfg), out)
    log_path = log or f"{out}.log"
    Path(log_path).write_text("\n".join(report.log_lines()) + "\n",
                              encoding="utf-8")
    last = report.epochs[-1] if report.epochs else None
    return {
        "checkpoint": str(out),
        "log": str(log_path),
        "log_lines": report.log_lines(),
        "epochs": len(report.epochs),
        "best_epoch": report.best_epoch,
        "checkpoint_id": report.checkpoint_id,
        "final_val_loss": last.val_loss if last else None,
        "final_val_accuracy": last.val_accuracy if last else None,
        "best_val_accuracy": max((r.val_accuracy for r in report.epochs),
                                 default=None),
        "wall_clock_seconds": report.wall_clock_seconds,
        "train_speakers": train_speakers,
    }


def load_model_from_checkpoint(path) -> tuple[MirnetModel, RunConfig]:
    from .config import parse_config  # local to avoid a cycle at import time

    ck = load_checkpoint(path)
    cfg = parse_config(ck.config_text)
    model = MirnetModel(model_config(cfg), seed=0)
    try:
        model.params.load_values(ck.params)
    except ValueError as e:
        raise CorpusError(f"checkpoint {path} does not match its config: {e}") from e
    return model, cfg


def run_embed(ckpt: str, wav: str, out: str | None = None) -> dict:
    model, cfg = load_model_from_checkpoint(ckpt)
    waveform = load_wav(wav)
    waveform.utterance_id = Path(wav).stem
    spec = features_of(waveform, feature_config(cfg))
    e1, e2 = model.identity_pair(spec)
    dim = e1.shape[0]
    header = "utterance_id,slot," + ",".join(f"e_{i+1}" for i in range(dim))
    rows = [header]
    for slot, vec in ((1, e1), (2, e2)):
        rows.append(",".join([waveform.utterance_id, str(slot),
                              *(repr(float(v)) for v in vec)]))
    csv_text = "\n".join(rows) + "\n"
    if out:
        Path(out).write_text(csv_text, encoding="utf-8")
    return {
        "utterance_id": waveform.utterance_id,
        "embed_dim": dim,
        "slot1": [float(v) for v in e1],
        "slot2": [float(v) for v in e2],
        "csv": str(out) if out else None,
        "csv_text": csv_text,
    }


def run_eval_eer(ckpt: str, data: str, trials: int = 200, seed: int = 1,
                 trials_out: str | None = None) -> dict:
    model, cfg = load_model_from_checkpoint(ckpt)
    features = feature_config(cfg)
    index = index_corpus(data)
    cache = UtteranceCache()
    train_set = set(filter(None, cfg.train_speakers.split(",")))

    def pool_for(split: str, manifest: str):
        group = index.splits.get(split, {})
        if not group:
            raise CorpusError(f"corpus {data} has no {split} split ({manifest})")
        return cache.pool(group)

    seen_pool = pool_for("eval_seen", "eval-seen.txt")
    unseen_pool = pool_for("eval_unseen", "eval-unseen.txt")
    if train_set:
        stray = sorted(set(seen_pool) - train_set)
        if stray:
            raise CorpusError(
                f"eval-seen speakers not seen during training: {stray}")
        overlap = sorted(set(unseen_pool) & train_set)
        if overlap:
            raise CorpusError(
                f"eval-unseen speakers were seen during training: {overlap}")

    def scenario(pool, key: int):
        rng = np.random.default_rng(
            np.random.SeedSequence(int(seed), spawn_key=(key,)))
        ts = build_trials(pool, trials, rng, features=features,
                          seconds=cfg.segment_seconds)
        d_p, d_n = score_trials(model.identity_pair, ts)
        return ts, compute_eer(d_p, d_n)

    seen_trials, seen = scenario(seen_pool, 10)
    unseen_trials, unseen = scenario(unseen_pool, 11)
    trials_path = trials_out or f"{ckpt}.trials.tsv"
    export_trials(seen_trials + unseen_trials, trials_path)
    summary = (f"seen_eer={100.0 * seen.eer:.2f} "
               f"unseen_eer={100.0 * unseen.eer:.2f} trials={trials}")
    return {
        "seen_eer": seen.eer,
        "unseen_eer": unseen.eer,
        "seen_threshold": seen.threshold,
        "unseen_threshold": unseen.threshold,
        "trials": trials,
        "trials_out": str(trials_path),
        "summary": summary,
    }


def run_gradcheck(quick: bool = False, seed: int = 0) -> dict:
    results, max_err = run_suite(quick=quick, seed=seed)
    return {
        "checks": [{"name": r.name, "rel_error": r.rel_error, "coords": r.coords}
                   for r in results],
        "max_rel_error": max_err,
        "tolerance": TOLERANCE,
        "passed": bool(max_err < TOLERANCE),
    }
