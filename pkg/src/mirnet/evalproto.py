"""Mixture verification protocol: trials, pair distances, and EER.

A trial consists of three two-speaker mixtures: an anchor A+B, a positive
A'+C (a different utterance of A, plus a fresh speaker C), and a negative
C'+D (a different utterance of C, plus a fresh speaker D).  Each mixture
yields two identity embeddings; the distance between two mixtures is the
minimum Euclidean distance over the four cross-mixture embedding pairs.  The
positive distance d_p compares anchor and positive (they share speaker A),
the negative distance d_n compares anchor and negative (no shared speaker).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CorpusError
from .frontend import FeatureConfig, MixtureSample, Waveform, make_mixture
from .parallel import parallel_map
from .pit import assign


@dataclass
class Trial:
    anchor: MixtureSample
    positive: MixtureSample
    negative: MixtureSample
    anchor_speakers: tuple[str, str]
    positive_speakers: tuple[str, str]
    negative_speakers: tuple[str, str]
    d_p: float | None = None
    d_n: float | None = None


@dataclass(frozen=True)
class TrialSpec:
    """Speaker and utterance selections for one trial, before any audio work.

    Utterances are (speaker_id, index-into-pool) pairs; mixing seeds make the
    segment offsets reproducible.
    """

    anchor: tuple[tuple[str, int], tuple[str, int]]    # (A, u1), (B, u)
    positive: tuple[tuple[str, int], tuple[str, int]]  # (A, u2), (C, u1)
    negative: tuple[tuple[str, int], tuple[str, int]]  # (C, u2), (D, u)
    seeds: tuple[int, int, int]


@dataclass
class EERResult:
    eer: float
    threshold: float
    num_positive: int
    num_negative: int


def min_pair_distance(pair_a, pair_b) -> float:
    """Minimum Euclidean distance over the four cross-pair combinations."""
    dists = [float(np.linalg.norm(np.asarray(a, dtype=np.float64)
                                  - np.asarray(b, dtype=np.float64)))
             for a in pair_a for b in pair_b]
    if len(dists) != 4:
        raise ValueError("each argument must hold exactly two embeddings")
    return min(dists)


def decide_identity_labels(anchor_pair, reference_pair) -> tuple[int, ...]:
    """Match the two anchor embeddings to the two reference embeddings.

    Returns the minimum-total-distance assignment as (j for anchor slot 0,
    j for anchor slot 1).
    """
    cost = np.empty((2, 2))
    for i, a in enumerate(anchor_pair):
        for j, r in enumerate(reference_pair):
            cost[i, j] = np.linalg.norm(np.asarray(a, float) - np.asarray(r, float))
    return assign(cost)


# ---------------------------------------------------------------------------
# trial construction


def _pick(rng: np.random.Generator, items: list[str]) -> str:
    return items[int(rng.integers(len(items)))]


def sample_trial_spec(counts: dict[str, int], rng: np.random.Generator) -> TrialSpec:
    """Draw speakers A, B, C, D and utterance indices for one trial.

    A and C need two distinct utterances each; B and D need one.  The anchor
    and negative share no speaker, the anchor and positive share exactly A.
    """
    speakers = sorted(counts)
    if len(speakers) < 4:
        raise CorpusError(f"trial construction needs at least 4 speakers, "
                          f"got {len(speakers)}")
    multi = [s for s in speakers if counts[s] >= 2]
    if len(multi) < 2:
        raise CorpusError(
            f"trial construction needs at least 2 speakers with 2 or more "
            f"utterances, got {len(multi)}"
        )
    a = _pick(rng, multi)
    c = _pick(rng, [s for s in multi if s != a])
    b = _pick(rng, [s for s in speakers if s not in (a, c)])
    d = _pick(rng, [s for s in speakers if s not in (a, b, c)])
    a1, a2 = (int(i) for i in rng.choice(counts[a], size=2, replace=False))
    c1, c2 = (int(i) for i in rng.choice(counts[c], size=2, replace=False))
    bu = int(rng.integers(counts[b]))
    du = int(rng.integers(counts[d]))
    seeds = tuple(int(s) for s in rng.integers(0, 2**31 - 1, size=3))
    return TrialSpec(
        anchor=((a, a1), (b, bu)),
        positive=((a, a2), (c, c1)),
        negative=((c, c2), (d, du)),
        seeds=seeds,
    )


def audit_trial_spec(spec: TrialSpec) -> None:
    """Raise unless the trial satisfies the protocol invariants."""
    anchor = {s for s, _ in spec.anchor}
    positive = {s for s, _ in spec.positive}
    negative = {s for s, _ in spec.negative}
    if anchor & negative:
        raise ValueError(f"anchor and negative share speakers: {anchor & negative}")
    shared = anchor & positive
    if len(shared) != 1:
        raise ValueError(f"anchor and positive must share exactly one speaker, "
                         f"share {shared}")
    sp = shared.pop()
    anchor_utt = dict(spec.anchor)[sp]
    positive_utt = dict(spec.positive)[sp]
    if anchor_utt == positive_utt:
        raise ValueError(
            f"positive must use a different utterance of {sp}, both use "
            f"index {anchor_utt}"
        )


def realize_trial(pool: dict[str, list[Waveform]], spec: TrialSpec, *,
                  features: FeatureConfig, seconds: float) -> Trial:
    def build(pair, seed):
        (sa, ua), (sb, ub) = pair
        return make_mixture(pool[sa][ua], pool[sb][ub], seconds=seconds,
                            seed=seed, features=features, pad_short=True)

    audit_trial_spec(spec)
    return Trial(
        anchor=build(spec.anchor, spec.seeds[0]),
        positive=build(spec.positive, spec.seeds[1]),
        negative=build(spec.negative, spec.seeds[2]),
        anchor_speakers=tuple(s for s, _ in spec.anchor),
        positive_speakers=tuple(s for s, _ in spec.positive),
        negative_speakers=tuple(s for s, _ in spec.negative),
    )


def build_trials(pool: dict[str, list[Waveform]], n_per_scenario: int = 200,
                 rng: np.random.Generator | None = None, *,
                 features: FeatureConfig | None = None,
                 seconds: float = 3.0) -> list[Trial]:
    """Sample n trials from a pool of utterances grouped by speaker."""
    if rng is None:
        rng = np.random.default_rng()
    if features is None:
        features = FeatureConfig()
    counts = {s: len(u) for s, u in pool.items()}
    return [
        realize_trial(pool, sample_trial_spec(counts, rng),
                      features=features, seconds=seconds)
        for _ in range(n_per_scenario)
    ]


def score_trials(embed_fn, trials) -> tuple[list[float], list[float]]:
    """Fill d_p and d_n on every trial; returns the two distance lists.

    `embed_fn` maps a Spectrogram to a pair of embedding vectors.  Trials are
    independent, so the map may run on worker threads (MIRNET_THREADS).
    """

    def one(trial: Trial):
        anc = embed_fn(trial.anchor.spectrogram)
        pos = embed_fn(trial.positive.spectrogram)
        neg = embed_fn(trial.negative.spectrogram)
        return min_pair_distance(anc, pos), min_pair_distance(anc, neg)

    scored = parallel_map(one, trials)
    for trial, (dp, dn) in zip(trials, scored):
        trial.d_p = dp
        trial.d_n = dn
    return [dp for dp, _ in scored], [dn for _, dn in scored]


def export_trials(trials, path) -> None:
    """Tab-separated rows: anchor utts, positive utts, negative utts, d_p, d_n."""
    with open(path, "w", encoding="utf-8") as f:
        for t in trials:
            cols = (t.anchor.mixture.utterance_id,
                    t.positive.mixture.utterance_id,
                    t.negative.mixture.utterance_id,
                    repr(float(t.d_p)) if t.d_p is not None else "",
                    repr(float(t.d_n)) if t.d_n is not None else "")
            f.write("\t".join(cols) + "\n")


# ---------------------------------------------------------------------------
# equal error rate


def compute_eer(positive_distances, negative_distances) -> EERResult:
    """Equal error rate of the distance-threshold decision rule.

    Accept when distance <= threshold.  FRR(t) is the fraction of positive
    distances above t, FAR(t) the fraction of negative distances at or below
    t.  The sweep visits every distinct observed distance; if no threshold
    makes the rates exactly equal, the crossing is linearly interpolated
    between the two neighbouring thresholds.
    """
    p = np.asarray(positive_distances, dtype=np.float64)
    q = np.asarray(negative_distances, dtype=np.float64)
    if p.size == 0 or q.size == 0:
        raise ValueError(
            f"both distance lists must be non-empty, got {p.size} positive "
            f"and {q.size} negative"
        )
    if not (np.isfinite(p).all() and np.isfinite(q).all()):
        raise ValueError("distances must be finite")
    ps = np.sort(p)
    qs = np.sort(q)
    cand = np.unique(np.concatenate([ps, qs]))
    frr = 1.0 - np.searchsorted(ps, cand, side="right") / p.size
    far = np.searchsorted(qs, cand, side="right") / q.size
    diff = far - frr  # non-decreasing in t; reaches +? >= 0 at the maximum
    k = int(np.argmax(diff >= 0.0))
    if diff[k] == 0.0:
        eer = 0.5 * (far[k] + frr[k])
        threshold = float(cand[k])
    else:
        if k == 0:
            far1, frr1, t1 = 0.0, 1.0, float(cand[0])
        else:
            far1, frr1, t1 = float(far[k - 1]), float(frr[k - 1]), float(cand[k - 1])
        far2, frr2, t2 = float(far[k]), float(frr[k]), float(cand[k])
        denom = (far2 - far1) + (frr1 - frr2)
        alpha = (frr1 - far1) / denom
        eer = far1 + alpha * (far2 - far1)
        threshold = t1 + alpha * (t2 - t1)
    return EERResult(float(eer), float(threshold), int(p.size), int(q.size))
