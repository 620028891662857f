"""Batch haze synthesis driven by a manifest.

Every record is self-contained — its paths and parameters are all in
the manifest — so records can be processed in any order or in parallel
without changing a single output byte.  Failures are collected per
record and reported; one bad file never aborts the batch.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .asm import compose_haze, transmission
from .errors import DahazeError, UsageError
from .imaging import load_depth, load_image, resize_bilinear, save_image
from .manifest import DatasetManifest, PairRecord


@dataclass
class SynthesisReport:
    """Outcome of one batch run."""

    successes: int
    failures: list[tuple[str, str]] = field(default_factory=list)
    wall_time_s: float = 0.0
    out_dir: str = ""


def synthesize_record(
    record: PairRecord,
    base_dir,
    out_dir,
    depth_scale: float | None = None,
) -> Path:
    """Synthesize one hazy image: load, pair, compose, save.

    The depth map is resized bilinearly to the clear image's dimensions
    when they differ (shuffled depths come from other scenes).  Returns
    the output path ``out_dir/<pair_id>.png``.
    """
    base = Path(base_dir)
    clear = load_image(base / record.clear_path)
    depth = load_depth(base / record.depth_path, scale=depth_scale)
    if (depth.width, depth.height) != (clear.width, clear.height):
        depth = resize_bilinear(depth, clear.width, clear.height)
    t = transmission(depth, record.beta)
    hazy = compose_haze(clear, t, record.A)
    out_path = Path(out_dir) / f"{record.pair_id}.png"
    save_image(hazy, out_path)
    return out_path


def synthesize_dataset(
    manifest: DatasetManifest,
    base_dir,
    out_dir,
    workers: int = 1,
    depth_scale: float | None = None,
) -> SynthesisReport:
    """Synthesize every record of a manifest into ``out_dir``.

    ``base_dir`` anchors the manifest's relative paths (normally the
    directory the manifest file lives in).  ``workers`` bounds the
    thread pool; output bytes are identical for any worker count.
    """
    if not manifest.records:
        raise UsageError("manifest has no records to synthesize")
    if workers < 1:
        raise UsageError(f"workers must be >= 1, got {workers}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    start = time.monotonic()
    failures: list[tuple[str, str]] = []
    successes = 0

    def run(record: PairRecord):
        synthesize_record(record, base_dir, out, depth_scale=depth_scale)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [(r.pair_id, pool.submit(run, r)) for r in manifest.records]
        for pair_id, future in futures:
            try:
                future.result()
                successes += 1
            except DahazeError as exc:
                failures.append((pair_id, exc.message))
            except Exception as exc:  # defensive: report, don't abort the batch
                failures.append((pair_id, f"{type(exc).__name__}: {exc}"))

    return SynthesisReport(
        successes=successes,
        failures=failures,
        wall_time_s=time.monotonic() - start,
        out_dir=str(out),
    )
