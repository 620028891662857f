"""Request/response models for the HTTP service.

All paths are interpreted on the machine the service runs on; the CLI
runs the service in-process by default, so for local use they are the
same filesystem.  Floating-point report values that may be infinite
(mean PSNR) travel as strings, matching the text report format, so
responses stay strict JSON.
"""

from __future__ import annotations

from pydantic import BaseModel, Field

from .. import DEFAULT_SEED


class PairRequest(BaseModel):
    clear_dir: str
    depth_dir: str
    out_path: str
    n: int = 1
    seed: int = DEFAULT_SEED
    strict: bool = False
    aligned: bool = False
    test_count: int = 0
    a_set: list[float] | None = None
    beta_set: list[float] | None = None


class PairResponse(BaseModel):
    manifest_path: str
    seed: int
    n: int
    corpus_size: int
    record_count: int
    train_count: int
    test_count: int
    fixed_points: int
    violations: list[str] = Field(default_factory=list)


class SynthesizeRequest(BaseModel):
    out_dir: str
    manifest_path: str | None = None
    # Aligned mode builds a depth-aligned manifest internally instead
    # of consuming an existing one.
    aligned: bool = False
    clear_dir: str | None = None
    depth_dir: str | None = None
    seed: int = DEFAULT_SEED
    workers: int = 1
    depth_scale: float | None = None
    a_set: list[float] | None = None
    beta_set: list[float] | None = None


class FailureItem(BaseModel):
    pair_id: str
    message: str


class SynthesizeResponse(BaseModel):
    out_dir: str
    manifest_path: str
    seed: int
    successes: int
    failures: list[FailureItem]
    wall_time_s: float


class SetPair(BaseModel):
    restored_dir: str
    gt_dir: str
    name: str | None = None


class EvaluateRequest(BaseModel):
    sets: list[SetPair]


class SetResultModel(BaseModel):
    set_name: str
    mean_psnr: str  # decimal or "inf"
    mean_ssim: float
    count: int
    infinite_psnr_count: int


class EvaluateResponse(BaseModel):
    results: list[SetResultModel]
    discrepancy: float | None = None
    report: str


class FusionBenchRequest(BaseModel):
    seed: int = DEFAULT_SEED
    steps: int = 60


class FusionRowModel(BaseModel):
    fusion: str
    params: int
    flops: int
    grad_check_max_rel_err: float
    final_demo_loss: float


class FusionBenchResponse(BaseModel):
    seed: int
    rows: list[FusionRowModel]
    report: str


class DiffRequest(BaseModel):
    a_dir: str
    b_dir: str
    out_dir: str


class DiffResponse(BaseModel):
    out_dir: str
    count: int


class ErrorBody(BaseModel):
    kind: str
    message: str
