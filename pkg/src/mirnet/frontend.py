"""Audio I/O, mixing, and log-magnitude spectrogram features.

All audio is mono 16-bit PCM WAV at 16 kHz.  Samples are held as float64 in
[-1, 1] (int16 / 32768).  Features are natural-log STFT magnitudes with a
32 ms analysis frame every 10 ms and a 512-point FFT by default, giving 257
frequency bins.
"""

from __future__ import annotations

import struct
import wave
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import AudioFormatError

LOG_EPS = 1e-6
MIX_PEAK = 0.9


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int = 16000
    speaker_id: str | None = None
    utterance_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise AudioFormatError(
                f"waveform must be 1-D, got shape {self.samples.shape}"
            )

    @property
    def seconds(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class Spectrogram:
    values: np.ndarray  # [bins, frames], natural-log magnitude

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"spectrogram must be [bins, frames], got {self.values.shape}")

    @property
    def bins(self) -> int:
        return self.values.shape[0]

    @property
    def frames(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate: int = 16000
    frame_ms: float = 32.0
    hop_ms: float = 10.0
    nfft: int = 512

    @property
    def win_length(self) -> int:
        return round(self.sample_rate * self.frame_ms / 1000.0)

    @property
    def hop_length(self) -> int:
        return round(self.sample_rate * self.hop_ms / 1000.0)

    @property
    def bins(self) -> int:
        return self.nfft // 2 + 1


@dataclass
class MixtureSample:
    """A two-speaker mixture plus everything needed to reproduce it."""

    mixture: Waveform
    spectrogram: Spectrogram
    label_a: int | None
    label_b: int | None
    offsets: tuple[int, int] = (0, 0)
    seed: int = 0


# ---------------------------------------------------------------------------
# WAV I/O


def load_wav(path, expected_rate: int = 16000) -> Waveform:
    """Read a mono 16-bit PCM WAV file and scale samples by 1/32768."""
    try:
        with wave.open(str(path), "rb") as wf:
            channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            comp = wf.getcomptype()
            nframes = wf.getnframes()
            raw = wf.readframes(nframes)
    except (wave.Error, EOFError, struct.error) as e:
        raise AudioFormatError(f"{path}: not a readable RIFF/WAVE file ({e})") from e
    except OSError as e:
        raise AudioFormatError(f"{path}: cannot read WAV file ({e})") from e
    if comp != "NONE":
        raise AudioFormatError(f"{path}: compressed WAV ({comp}) is not supported")
    if channels != 1:
        raise AudioFormatError(f"{path}: mono audio required, got {channels} channels")
    if width != 2:
        raise AudioFormatError(f"{path}: 16-bit PCM required, got {8 * width}-bit samples")
    if rate != expected_rate:
        raise AudioFormatError(
            f"{path}: sample rate {expected_rate} Hz required, got {rate} Hz"
        )
    ints = np.frombuffer(raw, dtype="<i2")
    return Waveform(ints.astype(np.float64) / 32768.0, sample_rate=rate)


def save_wav(path, wav: Waveform) -> None:
    """Write 16-bit PCM; samples are clamped to [-1, 1] and scaled by 32767.

    Quantization rounds half away from zero, so +/-1.0 maps to +/-32767.
    """
    x = np.clip(wav.samples, -1.0, 1.0) * 32767.0
    q = np.copysign(np.floor(np.abs(x) + 0.5), x).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(wav.sample_rate)
        wf.writeframes(q.tobytes())


# ---------------------------------------------------------------------------
# segmentation and mixing


def sample_segment(wav: Waveform, seconds: float = 3.0,
                   rng: np.random.Generator | None = None) -> tuple[Waveform, int]:
    """Cut a fixed-length segment at a uniformly random offset.

    Returns the segment and the chosen offset in samples.  The offset is drawn
    from the rng, so a seeded generator reproduces the cut exactly.
    """
    n = round(seconds * wav.sample_rate)
    total = len(wav.samples)
    if n <= 0:
        raise ValueError(f"segment length must be positive, got {seconds} s")
    if total < n:
        raise ValueError(
            f"utterance {wav.utterance_id or '<unnamed>'} is too short: "
            f"{total} samples, need {n}"
        )
    if rng is None:
        rng = np.random.default_rng()
    offset = int(rng.integers(0, total - n + 1))
    seg = Waveform(wav.samples[offset : offset + n].copy(), wav.sample_rate,
                   speaker_id=wav.speaker_id, utterance_id=wav.utterance_id)
    return seg, offset


def pad_to_length(wav: Waveform, n: int) -> Waveform:
    """Zero-pad at the end up to n samples (no-op when already long enough)."""
    if len(wav.samples) >= n:
        return wav
    padded = np.zeros(n, dtype=np.float64)
    padded[: len(wav.samples)] = wav.samples
    return Waveform(padded, wav.sample_rate, speaker_id=wav.speaker_id,
                    utterance_id=wav.utterance_id)


def mix(a: Waveform, b: Waveform, features: FeatureConfig | None = None,
        label_a: int | None = None, label_b: int | None = None,
        offsets: tuple[int, int] = (0, 0), seed: int = 0) -> MixtureSample:
    """Sum two equal-length signals and peak-normalize the result to 0.9.

    Returns the mixture together with its log-magnitude spectrogram and the
    provenance fields (labels, segment offsets, seed).
    """
    if a.sample_rate != b.sample_rate:
        raise ValueError(
            f"sample rate mismatch: {a.sample_rate} vs {b.sample_rate}"
        )
    if len(a.samples) != len(b.samples):
        raise ValueError(
            f"length mismatch: {len(a.samples)} vs {len(b.samples)} samples"
        )
    if label_a is not None and label_b is not None and label_a == label_b:
        raise ValueError(f"mixture requires two distinct labels, got {label_a} twice")
    if features is None:
        features = FeatureConfig(sample_rate=a.sample_rate)
    summed = a.samples + b.samples
    peak = np.abs(summed).max()
    if peak > 0.0:
        summed = summed * (MIX_PEAK / peak)
    name_a = a.utterance_id or "a"
    name_b = b.utterance_id or "b"
    wav = Waveform(summed, a.sample_rate, utterance_id=f"{name_a}+{name_b}")
    spec = stft_log_magnitude(wav, frame_ms=features.frame_ms,
                              hop_ms=features.hop_ms, nfft=features.nfft)
    return MixtureSample(wav, spec, label_a, label_b, tuple(offsets), int(seed))


def make_mixture(a: Waveform, b: Waveform, *, seconds: float, seed: int,
                 features: FeatureConfig, label_a: int | None = None,
                 label_b: int | None = None, pad_short: bool = False) -> MixtureSample:
    """Segment two utterances with a seeded rng, then mix them.

    The rng is derived from `seed` alone, so the same seed reproduces the same
    offsets and therefore the same mixture bit for bit.
    """
    for w in (a, b):
        if w.sample_rate != features.sample_rate:
            raise ValueError(
                f"utterance {w.utterance_id!r} has rate {w.sample_rate}, "
                f"features expect {features.sample_rate}"
            )
    n = round(seconds * features.sample_rate)
    if pad_short:
        a = pad_to_length(a, n)
        b = pad_to_length(b, n)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    seg_a, off_a = sample_segment(a, seconds, rng)
    seg_b, off_b = sample_segment(b, seconds, rng)
    return mix(seg_a, seg_b, features, label_a=label_a, label_b=label_b,
               offsets=(off_a, off_b), seed=int(seed))


# ---------------------------------------------------------------------------
# features


def stft_log_magnitude(wav: Waveform, frame_ms: float = 32.0,
                       hop_ms: float = 10.0, nfft: int = 512) -> Spectrogram:
    """Natural-log STFT magnitude, shape [nfft//2 + 1, frames].

    Frames start every hop and must fit entirely inside the signal:
    frames = floor((n - win) / hop) + 1.  A Hann window is applied before the
    FFT and magnitudes are offset by 1e-6 to keep the log finite.
    """
    rate = wav.sample_rate
    win = round(rate * frame_ms / 1000.0)
    hop = round(rate * hop_ms / 1000.0)
    if win <= 0 or hop <= 0:
        raise ValueError(f"frame ({frame_ms} ms) and hop ({hop_ms} ms) must be positive")
    if nfft < win:
        raise ValueError(f"nfft ({nfft}) must be at least the frame length ({win})")
    n = len(wav.samples)
    if n < win:
        raise ValueError(f"audio too short for one frame: {n} samples, frame is {win}")
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(win) / win)
    frames = sliding_window_view(wav.samples, win)[::hop] * window
    mag = np.abs(np.fft.rfft(frames, n=nfft, axis=1))
    return Spectrogram(np.log(mag + LOG_EPS).T)


def features_of(wav: Waveform, config: FeatureConfig) -> Spectrogram:
    if wav.sample_rate != config.sample_rate:
        raise ValueError(
            f"waveform rate {wav.sample_rate} does not match feature config "
            f"rate {config.sample_rate}"
        )
    return stft_log_magnitude(wav, config.frame_ms, config.hop_ms, config.nfft)


def normalize_log_spectrogram(spec: Spectrogram) -> Spectrogram:
    """Standardize by the global scalar mean and std of the spectrogram.

    A single scalar pair keeps the static spectral envelope intact, which is
    what separates speakers; per-bin statistics would erase it.
    """
    v = spec.values
    std = v.std()
    if std < 1e-12:
        return Spectrogram(np.zeros_like(v))
    return Spectrogram((v - v.mean()) / std)


# ---------------------------------------------------------------------------
# synthetic speakers


@dataclass(frozen=True)
class SpeakerProfile:
    f0: float
    resonances: tuple[float, float]
    gains: tuple[float, float] = (1.0, 0.7)
    tilt: float = -0.8
    burst: tuple[float, float] = (0.18, 0.42)
    pause: tuple[float, float] = (0.08, 0.28)


def speaker_profile(speaker_id: int) -> SpeakerProfile:
    """Deterministic voice profile: fundamental, two resonance peaks, tilt,
    and a speaking rhythm (burst/pause second ranges, shared defaults).

    The multipliers 5 and 7 are coprime with 12, so ids 0..11 get pairwise
    distinct resonance pairs on top of distinct fundamentals and rolloffs;
    3 and 5 are coprime with 7 and spread the rhythm grid the same way.
    """
    sid = int(speaker_id)
    if sid < 0:
        raise ValueError(f"speaker_id must be non-negative, got {speaker_id}")
    f0 = 90.0 + 26.0 * sid
    r1 = 350.0 + 230.0 * ((sid * 5) % 12)
    r2 = 2400.0 + 310.0 * ((sid * 7) % 12)
    g1 = 1.0 + 0.1 * ((sid * 3) % 5)
    g2 = 0.6 + 0.1 * ((sid * 11) % 5)
    tilt = -0.55 - 0.09 * ((sid * 7) % 5)
    return SpeakerProfile(f0, (r1, r2), (g1, g2), tilt)


def _burst_envelope(n: int, rate: int, rng: np.random.Generator,
                    burst: tuple[float, float] = (0.18, 0.42),
                    pause: tuple[float, float] = (0.08, 0.28)) -> np.ndarray:
    """Alternating voiced bursts and pauses with raised-cosine ramps."""
    env = np.zeros(n, dtype=np.float64)
    ramp = round(0.025 * rate)
    pos = 0
    voiced = bool(rng.random() < 0.7)
    while pos < n:
        if voiced:
            length = round(rate * rng.uniform(*burst))
            stop = min(pos + length, n)
            seg = np.ones(stop - pos)
            r = min(ramp, len(seg) // 2)
            if r > 0:
                edge = 0.5 - 0.5 * np.cos(np.pi * np.arange(r) / r)
                seg[:r] *= edge
                seg[-r:] *= edge[::-1]
            env[pos:stop] = seg
            pos = stop
        else:
            pos += round(rate * rng.uniform(*pause))
        voiced = not voiced
    if not env.any():
        env[:] = 1.0
    return env


def synth_speaker(speaker_id: int, seconds: float = 3.0,
                  rng: np.random.Generator | None = None,
                  sample_rate: int = 16000) -> Waveform:
    """Synthesize one utterance of a deterministic artificial speaker.

    The fundamental frequency is a fixed function of the id; the rng only
    jitters phases, per-harmonic gains, and the burst envelope, so utterances
    of one speaker differ while sharing the same f0 and resonance profile.
    """
    if seconds <= 0:
        raise ValueError(f"duration must be positive, got {seconds}")
    if rng is None:
        rng = np.random.default_rng(10_000 + int(speaker_id))
    prof = speaker_profile(speaker_id)
    n = round(seconds * sample_rate)
    t = np.arange(n, dtype=np.float64) / sample_rate
    limit = min(0.475 * sample_rate, 7600.0)
    count = max(1, min(60, int(limit / prof.f0)))
    k = np.arange(1, count + 1, dtype=np.float64)
    freqs = k * prof.f0
    r1, r2 = prof.resonances
    g1, g2 = prof.gains
    amps = k ** prof.tilt * (
        0.12
        + g1 * np.exp(-0.5 * ((freqs - r1) / 180.0) ** 2)
        + g2 * np.exp(-0.5 * ((freqs - r2) / 260.0) ** 2)
    )
    amps = amps * (1.0 + 0.1 * rng.uniform(-1.0, 1.0, size=count))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=count)
    sig = (amps[:, None] * np.sin(2.0 * np.pi * freqs[:, None] * t[None, :]
                                  + phases[:, None])).sum(axis=0)
    sig *= _burst_envelope(n, sample_rate, rng, prof.burst, prof.pause)
    peak = np.abs(sig).max()
    if peak > 0.0:
        sig *= MIX_PEAK / peak
    return Waveform(sig, sample_rate, speaker_id=str(int(speaker_id)))
