"""HTTP service wrapping the toolkit's batch operations.

One endpoint per workflow: manifest pairing, batch synthesis, metric
evaluation, the fusion benchmark, and difference-image emission.  The
CLI is a thin client of this app (in-process by default); the same
endpoints serve remote callers under uvicorn.

Toolkit errors map to status codes by kind: usage 400, io 404,
invariant 409, with a JSON body ``{"kind": ..., "message": ...}``.
"""

from __future__ import annotations

import math
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..asm import DEFAULT_A_SET, DEFAULT_BETA_SET
from ..bench import format_bench_report, run_fusion_bench
from ..errors import HTTP_STATUS, DahazeError, IOFailure, UsageError
from ..imaging import diff_image, load_image, save_image
from ..manifest import (
    CLEAR_SUFFIXES,
    DEPTH_SUFFIXES,
    build_manifest,
    read_manifest,
    scan_catalog,
    verify_manifest,
    write_manifest,
)
from ..metrics import discrepancy, evaluate_set, format_report
from ..synth import synthesize_dataset
from . import schemas


def _build_and_write_manifest(
    clear_dir: str,
    depth_dir: str,
    out_path: str,
    n: int,
    seed: int,
    strict: bool,
    aligned: bool,
    test_count: int,
    a_set,
    beta_set,
):
    out = Path(out_path)
    base = out.parent if str(out.parent) else Path(".")
    clear_catalog = scan_catalog(clear_dir, CLEAR_SUFFIXES, base=base)
    depth_catalog = scan_catalog(depth_dir, DEPTH_SUFFIXES, base=base)
    m = build_manifest(
        clear_catalog,
        depth_catalog,
        n,
        seed,
        test_count=test_count,
        strict=strict,
        aligned=aligned,
        a_set=tuple(a_set) if a_set else DEFAULT_A_SET,
        beta_set=tuple(beta_set) if beta_set else DEFAULT_BETA_SET,
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    write_manifest(m, out)
    return m


def create_app() -> FastAPI:
    app = FastAPI(title="dahaze", version=__version__)

    @app.exception_handler(DahazeError)
    async def dahaze_error_handler(_request: Request, exc: DahazeError):
        return JSONResponse(
            status_code=HTTP_STATUS[exc.kind],
            content=schemas.ErrorBody(kind=exc.kind, message=exc.message).model_dump(),
        )

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/pair", response_model=schemas.PairResponse)
    def pair(req: schemas.PairRequest):
        m = _build_and_write_manifest(
            req.clear_dir,
            req.depth_dir,
            req.out_path,
            req.n,
            req.seed,
            req.strict,
            req.aligned,
            req.test_count,
            req.a_set,
            req.beta_set,
        )
        return schemas.PairResponse(
            manifest_path=str(Path(req.out_path)),
            seed=m.seed,
            n=m.scale_factor,
            corpus_size=m.corpus_size,
            record_count=len(m.records),
            train_count=sum(1 for r in m.records if r.split == "train"),
            test_count=sum(1 for r in m.records if r.split == "test"),
            fixed_points=m.fixed_points,
            violations=verify_manifest(m),
        )

    @app.post("/synthesize", response_model=schemas.SynthesizeResponse)
    def synthesize(req: schemas.SynthesizeRequest):
        if req.aligned:
            if not req.clear_dir or not req.depth_dir:
                raise UsageError(
                    "aligned synthesis needs clear_dir and depth_dir"
                )
            manifest_path = str(Path(req.out_dir) / "aligned-manifest.tsv")
            manifest = _build_and_write_manifest(
                req.clear_dir,
                req.depth_dir,
                manifest_path,
                1,
                req.seed,
                False,
                True,
                0,
                req.a_set,
                req.beta_set,
            )
            base_dir = Path(manifest_path).parent
        else:
            if not req.manifest_path:
                raise UsageError(
                    "synthesis needs a manifest_path (or aligned mode with catalogs)"
                )
            manifest = read_manifest(req.manifest_path)
            manifest_path = req.manifest_path
            base_dir = Path(req.manifest_path).parent
        report = synthesize_dataset(
            manifest,
            base_dir,
            req.out_dir,
            workers=req.workers,
            depth_scale=req.depth_scale,
        )
        return schemas.SynthesizeResponse(
            out_dir=report.out_dir,
            manifest_path=manifest_path,
            seed=manifest.seed,
            successes=report.successes,
            failures=[
                schemas.FailureItem(pair_id=pid, message=msg)
                for pid, msg in report.failures
            ],
            wall_time_s=report.wall_time_s,
        )

    @app.post("/evaluate", response_model=schemas.EvaluateResponse)
    def evaluate(req: schemas.EvaluateRequest):
        if not req.sets:
            raise UsageError("evaluate needs at least one set")
        results = [
            evaluate_set(s.restored_dir, s.gt_dir, set_name=s.name)
            for s in req.sets
        ]
        var = None
        if len(results) >= 2:
            var = discrepancy([r.mean_psnr for r in results])
        return schemas.EvaluateResponse(
            results=[
                schemas.SetResultModel(
                    set_name=r.set_name,
                    mean_psnr="inf" if math.isinf(r.mean_psnr) else repr(r.mean_psnr),
                    mean_ssim=r.mean_ssim,
                    count=r.count,
                    infinite_psnr_count=r.infinite_psnr_count,
                )
                for r in results
            ],
            discrepancy=var,
            report=format_report(results),
        )

    @app.post("/fusion-bench", response_model=schemas.FusionBenchResponse)
    def fusion_bench(req: schemas.FusionBenchRequest):
        if req.steps < 0:
            raise UsageError(f"steps must be >= 0, got {req.steps}")
        rows = run_fusion_bench(req.seed, steps=req.steps)
        return schemas.FusionBenchResponse(
            seed=req.seed,
            rows=[
                schemas.FusionRowModel(
                    fusion=r.fusion,
                    params=r.params,
                    flops=r.flops,
                    grad_check_max_rel_err=r.grad_check_max_rel_err,
                    final_demo_loss=r.final_demo_loss,
                )
                for r in rows
            ],
            report=format_bench_report(rows, req.seed),
        )

    @app.post("/diff", response_model=schemas.DiffResponse)
    def diff(req: schemas.DiffRequest):
        a_dir = Path(req.a_dir)
        b_dir = Path(req.b_dir)
        if not a_dir.is_dir():
            raise IOFailure(f"directory not found: {a_dir}")
        if not b_dir.is_dir():
            raise IOFailure(f"directory not found: {b_dir}")
        a_names = {f.name for f in a_dir.iterdir() if f.suffix.lower() == ".png"}
        b_names = {f.name for f in b_dir.iterdir() if f.suffix.lower() == ".png"}
        names = sorted(a_names & b_names)
        if not names:
            raise IOFailure(f"no matching image filenames between {a_dir} and {b_dir}")
        out = Path(req.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name in names:
            d = diff_image(load_image(a_dir / name), load_image(b_dir / name))
            save_image(d, out / name)
        return schemas.DiffResponse(out_dir=str(out), count=len(names))

    return app


app = create_app()
