"""Permutation-invariant training loop with seeded, reproducible sampling.

Each epoch draws one mixture per unordered pair of training speakers, with
fresh utterance choices and segment offsets every epoch.  Validation uses a
mixture list fixed at startup.  The best-validation-loss parameters are
retained, and training stops early once validation has not improved for
`patience` epochs.  All randomness flows from a single seed through spawn
keys, so a rerun reproduces losses, the log, and the checkpoint exactly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import numerics as nx
from .config import RunConfig
from .corpus import CorpusIndex, UtteranceCache
from .errors import CorpusError, TrainingError
from .frontend import FeatureConfig, MixtureSample, make_mixture
from .model import MirnetModel
from .pit import pit_loss

LOG_HEADER = "epoch\ttrain_loss\tval_loss\tval_acc"


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 8
    epochs: int = 50
    seed: int = 1
    optimizer: str = "adam"
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    val_fraction: float = 0.1
    patience: int = 10
    segment_seconds: float = 3.0

    @classmethod
    def from_run(cls, run: RunConfig) -> "TrainConfig":
        return cls(learning_rate=run.learning_rate, batch_size=run.batch_size,
                   epochs=run.epochs, seed=run.seed, optimizer=run.optimizer,
                   momentum=run.momentum, val_fraction=run.val_fraction,
                   patience=run.patience, segment_seconds=run.segment_seconds)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainReport:
    epochs: list[EpochRecord] = field(default_factory=list)
    wall_clock_seconds: float = 0.0
    best_epoch: int = 0
    checkpoint_id: str = "init"

    def log_lines(self) -> list[str]:
        lines = [LOG_HEADER]
        for r in self.epochs:
            lines.append(f"{r.epoch}\t{r.train_loss:.6f}\t{r.val_loss:.6f}"
                         f"\t{r.val_accuracy:.4f}")
        return lines


@dataclass(frozen=True)
class PairSpec:
    speaker_a: str
    utt_a: Path
    speaker_b: str
    utt_b: Path
    seed: int


# ---------------------------------------------------------------------------
# optimizers


class Sgd:
    """SGD with classical momentum: v = mu*v + g; w -= lr*v."""

    def __init__(self, store: nx.ParameterStore, lr: float, momentum: float = 0.9):
        self.store = store
        self.lr = float(lr)
        self.momentum = float(momentum)
        self._velocity = {p.name: np.zeros_like(p.value) for p in store}

    def step(self) -> None:
        for p in self.store:
            v = self._velocity[p.name]
            v *= self.momentum
            v += p.grad
            p.tensor.data -= self.lr * v


class Adam:
    """Adam with bias correction (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(self, store: nx.ParameterStore, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.store = store
        self.lr = float(lr)
        self.beta1, self.beta2, self.eps = float(beta1), float(beta2), float(eps)
        self.t = 0
        self._m = {p.name: np.zeros_like(p.value) for p in store}
        self._v = {p.name: np.zeros_like(p.value) for p in store}

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p in self.store:
            g = p.grad
            m = self._m[p.name]
            v = self._v[p.name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.tensor.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(cfg: TrainConfig, store: nx.ParameterStore):
    if cfg.optimizer == "sgd":
        return Sgd(store, cfg.learning_rate, cfg.momentum)
    if cfg.optimizer == "adam":
        return Adam(store, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)
    raise ValueError(f"unknown optimizer {cfg.optimizer!r}")


# ---------------------------------------------------------------------------
# epoch sampling


def epoch_pairs(split: dict[str, list[Path]], rng: np.random.Generator) -> list[PairSpec]:
    """One mixture spec per unordered speaker pair, in shuffled order.

    Utterances and mixing seeds are drawn from the rng, so every epoch sees
    fresh segments of fresh utterance pairs.
    """
    speakers = sorted(split)
    if len(speakers) < 2:
        raise CorpusError(
            f"mixture training needs at least 2 speakers, got {len(speakers)}"
        )
    pairs = []
    for i in range(len(speakers)):
        for j in range(i + 1, len(speakers)):
            sa, sb = speakers[i], speakers[j]
            ua = split[sa][int(rng.integers(len(split[sa])))]
            ub = split[sb][int(rng.integers(len(split[sb])))]
            pairs.append(PairSpec(sa, ua, sb, ub, int(rng.integers(2**31 - 1))))
    order = rng.permutation(len(pairs))
    return [pairs[int(k)] for k in order]


def realize_pair(spec: PairSpec, cache: UtteranceCache, features: FeatureConfig,
                 seconds: float, class_map: dict[str, int]) -> MixtureSample:
    a = cache.get(spec.speaker_a, spec.utt_a)
    b = cache.get(spec.speaker_b, spec.utt_b)
    return make_mixture(a, b, seconds=seconds, seed=spec.seed, features=features,
                        label_a=class_map[spec.speaker_a],
                        label_b=class_map[spec.speaker_b], pad_short=True)


def _carve_validation(train_split: dict[str, list[Path]], fraction: float):
    """Deterministically hold out a fraction of utterances per speaker."""
    train, val = {}, {}
    for speaker, paths in sorted(train_split.items()):
        paths = sorted(paths)
        if len(paths) < 2:
            train[speaker] = paths
            continue
        k = max(1, round(fraction * len(paths)))
        k = min(k, len(paths) - 1)
        train[speaker] = paths[:-k]
        val[speaker] = paths[-k:]
    if len(val) < 2:
        raise CorpusError(
            "cannot carve a validation split: need at least 2 speakers with "
            "2 or more training utterances (or provide val.txt)"
        )
    return train, val


# ---------------------------------------------------------------------------
# evaluation of one mixture


def assignment_outcome(model: MirnetModel, sample: MixtureSample):
    """(pit loss value, both-slots-correct) for one labelled mixture."""
    with nx.no_grad():
        out = model.forward_mixture(sample.spectrogram)
        labels = (sample.label_a, sample.label_b)
        pit = pit_loss([out.logits_1, out.logits_2], labels)
        preds = (int(np.argmax(out.logits_1.data)), int(np.argmax(out.logits_2.data)))
        correct = all(preds[i] == labels[pit.mapping[i]] for i in range(2))
    return pit.loss.item(), bool(correct)


def validate(model: MirnetModel, mixtures: list[MixtureSample]) -> tuple[float, float]:
    """Mean PIT loss and assignment accuracy over a fixed mixture list.

    A mixture counts as correct when, under the winning PIT assignment, both
    argmax predictions equal their assigned labels.
    """
    if not mixtures:
        raise ValueError("validation needs at least one mixture")
    losses, correct = 0.0, 0
    for sample in mixtures:
        loss, ok = assignment_outcome(model, sample)
        losses += loss
        correct += int(ok)
    return losses / len(mixtures), correct / len(mixtures)


# ---------------------------------------------------------------------------
# the loop


def _max_grad_param(store: nx.ParameterStore) -> str:
    worst, worst_name = -1.0, "<none>"
    for p in store:
        m = float(np.abs(p.grad).max()) if p.grad.size else 0.0
        if not np.isfinite(m):
            return p.name
        if m > worst:
            worst, worst_name = m, p.name
    return worst_name


def train(index: CorpusIndex, model: MirnetModel, cfg: TrainConfig,
          features: FeatureConfig | None = None,
          cache: UtteranceCache | None = None):
    """Train on the corpus train split; returns (report, best_param_values).

    Early stopping keeps the parameters of the epoch with the lowest
    validation loss; with epochs=0 the initial parameters are returned
    untouched.
    """
    if features is None:
        features = FeatureConfig()
    if cache is None:
        cache = UtteranceCache()
    train_split = index.splits.get("train", {})
    if not train_split:
        raise CorpusError(f"corpus {index.root} has no train split")
    val_split = index.splits.get("val", {})
    if not val_split:
        train_split, val_split = _carve_validation(train_split, cfg.val_fraction)
    class_map = {s: i for i, s in enumerate(sorted(train_split))}
    unknown = sorted(set(val_split) - set(class_map))
    if unknown:
        raise CorpusError(f"validation speakers missing from train split: {unknown}")
    if model.config.num_classes != len(class_map):
        raise CorpusError(
            f"model has {model.config.num_classes} classes but the train split "
            f"has {len(class_map)} speakers"
        )

    def seeded(*key: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=key))

    val_mixtures = [
        realize_pair(spec, cache, features, cfg.segment_seconds, class_map)
        for spec in epoch_pairs(val_split, seeded(2))
    ]

    report = TrainReport()
    best_values = model.params.copy_values()
    best_loss = np.inf
    since_best = 0
    opt = make_optimizer(cfg, model.params)
    started = time.monotonic()

    for epoch in range(1, cfg.epochs + 1):
        pairs = epoch_pairs(train_split, seeded(1, epoch))
        loss_sum, seen = 0.0, 0
        for b0 in range(0, len(pairs), cfg.batch_size):
            batch = pairs[b0 : b0 + cfg.batch_size]
            losses = []
            for spec in batch:
                sample = realize_pair(spec, cache, features, cfg.segment_seconds,
                                      class_map)
                out = model.forward_mixture(sample.spectrogram)
                pit = pit_loss([out.logits_1, out.logits_2],
                               (sample.label_a, sample.label_b))
                losses.append(pit.loss)
            batch_loss = nx.scale(nx.add_n(losses), 1.0 / len(losses))
            value = batch_loss.item()
            if not np.isfinite(value):
                raise TrainingError(
                    f"non-finite loss in epoch {epoch}, batch {b0 // cfg.batch_size + 1}; "
                    f"largest gradient on {_max_grad_param(model.params)!r}"
                )
            model.params.zero_grad()
            nx.backward(batch_loss)
            opt.step()
            loss_sum += value * len(losses)
            seen += len(losses)
        val_loss, val_acc = validate(model, val_mixtures)
        report.epochs.append(EpochRecord(epoch, loss_sum / seen, val_loss, val_acc))
        if val_loss < best_loss:
            best_loss = val_loss
            best_values = model.params.copy_values()
            report.best_epoch = epoch
            report.checkpoint_id = f"epoch{epoch:03d}"
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break

    report.wall_clock_seconds = time.monotonic() - started
    return report, best_values
