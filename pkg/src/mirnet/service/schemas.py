"""Request and response models for the service endpoints."""

from __future__ import annotations

from pydantic import BaseModel, Field


class MixRequest(BaseModel):
    a: str
    b: str
    out: str
    seconds: float | None = None  # default: longest cut both inputs support
    seed: int = 0


class MixResponse(BaseModel):
    out: str
    offset_a: int
    offset_b: int
    bins: int
    frames: int


class TrainRequest(BaseModel):
    data: str
    out: str
    config: str | None = None
    synth: int | None = Field(default=None, ge=2)
    overrides: dict[str, str] = Field(default_factory=dict)
    log: str | None = None


class TrainResponse(BaseModel):
    checkpoint: str
    log: str
    log_lines: list[str]
    epochs: int
    best_epoch: int
    checkpoint_id: str
    final_val_loss: float | None
    final_val_accuracy: float | None
    best_val_accuracy: float | None
    wall_clock_seconds: float
    train_speakers: list[str]


class EmbedRequest(BaseModel):
    ckpt: str
    wav: str
    out: str | None = None


class EmbedResponse(BaseModel):
    utterance_id: str
    embed_dim: int
    slot1: list[float]
    slot2: list[float]
    csv: str | None
    csv_text: str


class EvalEerRequest(BaseModel):
    ckpt: str
    data: str
    trials: int = Field(default=200, ge=1)
    seed: int = 1
    trials_out: str | None = None


class EvalEerResponse(BaseModel):
    seen_eer: float
    unseen_eer: float
    seen_threshold: float
    unseen_threshold: float
    trials: int
    trials_out: str
    summary: str


class GradcheckRequest(BaseModel):
    quick: bool = False
    seed: int = 0


class GradcheckEntry(BaseModel):
    name: str
    rel_error: float
    coords: int


class GradcheckResponse(BaseModel):
    checks: list[GradcheckEntry]
    max_rel_error: float
    tolerance: float
    passed: bool


class HealthResponse(BaseModel):
    status: str
    version: str
