"""Fusion benchmark: cost accounting, gradient checks, demo training.

Produces one row per fusion mode with its cost-model counts, the worst
relative error of its gradients against finite differences, and the
final loss of the seeded toy training run.  Everything is driven by a
single seed, so two runs with the same seed emit identical reports.
"""

from __future__ import annotations

from dataclasses import dataclass

from .fusion import (
    DEFAULT_COST_CONFIG,
    FUSION_MODES,
    count_cost,
    gradient_check,
    train_fusion_demo,
)

DEFAULT_BENCH_STEPS = 60
DEFAULT_GRAD_TRIALS = 10


@dataclass(frozen=True)
class FusionBenchRow:
    fusion: str
    params: int
    flops: int
    grad_check_max_rel_err: float
    final_demo_loss: float


def run_fusion_bench(
    seed: int,
    steps: int = DEFAULT_BENCH_STEPS,
    grad_trials: int = DEFAULT_GRAD_TRIALS,
) -> list[FusionBenchRow]:
    """Run the three fusion modes and collect one row each."""
    grad_err = gradient_check(seed, trials=grad_trials)
    rows = []
    for mode in FUSION_MODES:
        params, flops = count_cost(mode, **DEFAULT_COST_CONFIG)
        result = train_fusion_demo(seed, mode, steps)
        rows.append(
            FusionBenchRow(
                fusion=mode,
                params=params,
                flops=flops,
                grad_check_max_rel_err=grad_err,
                final_demo_loss=result.trace[-1],
            )
        )
    return rows


def format_bench_report(rows: list[FusionBenchRow], seed: int) -> str:
    """Tab-separated bench table, prefixed with the effective seed."""
    lines = [
        f"# seed={seed}",
        "fusion\tparams\tflops\tgrad_check_max_rel_err\tfinal_demo_loss",
    ]
    for r in rows:
        lines.append(
            f"{r.fusion}\t{r.params}\t{r.flops}\t"
            f"{r.grad_check_max_rel_err!r}\t{r.final_demo_loss!r}"
        )
    return "\n".join(lines) + "\n"
