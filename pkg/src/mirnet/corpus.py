"""Corpus layout, split manifests, and the deterministic synthetic corpus.

Layout: `ROOT/<speaker_id>/<utterance>.wav` with four optional manifest files
at the root (train.txt, val.txt, eval-seen.txt, eval-unseen.txt), each a
plain-text list of paths relative to the root.  Indexing validates every
listed file as 16 kHz mono PCM and reports all failures at once, and rejects
any speaker that appears in both train and eval-unseen.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CorpusError
from .frontend import Waveform, load_wav, save_wav, synth_speaker

SPLIT_FILES = {
    "train": "train.txt",
    "val": "val.txt",
    "eval_seen": "eval-seen.txt",
    "eval_unseen": "eval-unseen.txt",
}


@dataclass
class CorpusIndex:
    root: Path
    speakers: dict[str, list[Path]]
    splits: dict[str, dict[str, list[Path]]] = field(default_factory=dict)

    def split_speakers(self, split: str) -> list[str]:
        return sorted(self.splits.get(split, {}))

    def class_map(self) -> dict[str, int]:
        """Class index per training speaker, in sorted speaker order."""
        return {s: i for i, s in enumerate(self.split_speakers("train"))}


def index_corpus(root, validate_audio: bool = True) -> CorpusIndex:
    root = Path(root)
    problems: list[str] = []
    if not root.is_dir():
        raise CorpusError(f"corpus root {root} is not a directory")

    speakers: dict[str, list[Path]] = {}
    for child in sorted(root.iterdir()):
        if child.is_dir():
            wavs = sorted(child.glob("*.wav"))
            if wavs:
                speakers[child.name] = wavs

    splits: dict[str, dict[str, list[Path]]] = {}
    for split, fname in SPLIT_FILES.items():
        manifest = root / fname
        grouped: dict[str, list[Path]] = {}
        if manifest.is_file():
            for lineno, line in enumerate(
                    manifest.read_text(encoding="utf-8").splitlines(), start=1):
                rel = line.strip()
                if not rel or rel.startswith("#"):
                    continue
                path = root / rel
                parts = Path(rel).parts
                if len(parts) != 2:
                    problems.append(
                        f"{fname}:{lineno}: entry {rel!r} is not "
                        f"<speaker_id>/<utterance>.wav"
                    )
                    continue
                if not path.is_file():
                    problems.append(f"{fname}:{lineno}: missing file {rel}")
                    continue
                grouped.setdefault(parts[0], []).append(path)
        splits[split] = grouped

    if validate_audio:
        checked: set[Path] = set()
        for grouped in splits.values():
            for paths in grouped.values():
                for path in paths:
                    if path in checked:
                        continue
                    checked.add(path)
                    try:
                        load_wav(path)
                    except Exception as e:
                        problems.append(str(e))

    overlap = set(splits["train"]) & set(splits["eval_unseen"])
    if overlap:
        problems.append(
            f"speakers present in both train and eval-unseen: {sorted(overlap)}"
        )

    if problems:
        raise CorpusError(
            f"corpus validation failed with {len(problems)} problem(s):\n"
            + "\n".join(problems)
        )
    return CorpusIndex(root=root, speakers=speakers, splits=splits)


class UtteranceCache:
    """Loads utterances once; tags each waveform with speaker and utterance id."""

    def __init__(self):
        self._cache: dict[Path, Waveform] = {}

    def get(self, speaker_id: str, path: Path) -> Waveform:
        wav = self._cache.get(path)
        if wav is None:
            wav = load_wav(path)
            wav.speaker_id = speaker_id
            wav.utterance_id = f"{speaker_id}/{Path(path).stem}"
            self._cache[path] = wav
        return wav

    def pool(self, grouped: dict[str, list[Path]]) -> dict[str, list[Waveform]]:
        return {
            speaker: [self.get(speaker, p) for p in paths]
            for speaker, paths in sorted(grouped.items())
        }


# ---------------------------------------------------------------------------
# synthetic corpus


def _seen_split_sizes(n_utterances: int) -> tuple[int, int, int]:
    """(train, val, eval_seen) utterance counts per seen speaker."""
    if n_utterances >= 10:
        val, seen = 2, 3
    elif n_utterances >= 6:
        val, seen = 1, 2
    elif n_utterances >= 4:
        val, seen = 1, 0
    else:
        val, seen = 0, 0
    return n_utterances - val - seen, val, seen


def generate_synthetic_corpus(root, n_speakers: int, n_utterances: int = 20,
                              seconds: float = 3.5, seed: int = 7,
                              unseen_speakers: int = 4,
                              unseen_utterances: int = 6) -> Path:
    """Write a deterministic synthetic corpus with all four split manifests.

    Seen speakers use profile ids 0..n-1 and split their utterances into
    train/val/eval-seen; unseen speakers continue the id range and are listed
    only under eval-unseen.  Identical arguments produce identical bytes.
    """
    if n_speakers < 2:
        raise CorpusError(f"synthetic corpus needs at least 2 speakers, got {n_speakers}")
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    n_train, n_val, n_seen = _seen_split_sizes(n_utterances)
    manifests: dict[str, list[str]] = {s: [] for s in SPLIT_FILES}

    def write_speaker(profile_id: int, count: int, assign):
        speaker = f"s{profile_id:03d}"
        (root / speaker).mkdir(exist_ok=True)
        for u in range(count):
            rng = np.random.default_rng(
                np.random.SeedSequence(seed, spawn_key=(profile_id, u)))
            wav = synth_speaker(profile_id, seconds, rng)
            rel = f"{speaker}/u{u:03d}.wav"
            save_wav(root / rel, wav)
            manifests[assign(u)].append(rel)

    for pid in range(n_speakers):
        def assign(u, n_train=n_train, n_val=n_val):
            if u < n_train:
                return "train"
            if u < n_train + n_val:
                return "val"
            return "eval_seen"
        write_speaker(pid, n_utterances, assign)

    for j in range(unseen_speakers):
        write_speaker(n_speakers + j, unseen_utterances, lambda u: "eval_unseen")

    for split, fname in SPLIT_FILES.items():
        lines = manifests[split]
        (root / fname).write_text(
            "".join(line + "\n" for line in lines), encoding="utf-8")
    return root


def ensure_synthetic_corpus(root, n_speakers: int, **kwargs) -> Path:
    """Generate the corpus only when the manifests are not already present."""
    root = Path(root)
    if all((root / f).is_file() for f in SPLIT_FILES.values()):
        return root
    return generate_synthetic_corpus(root, n_speakers, **kwargs)
