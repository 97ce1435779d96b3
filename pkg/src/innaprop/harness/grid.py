"""(alpha, beta) grid search and the initial-learning-rate sweep.

Cells run concurrently but independently: all cells share the same
seed-keyed data, parameter init and batch order, so differences between
cells come from (alpha, beta) alone and a grid rerun is byte-stable
regardless of scheduling. A diverged cell is recorded and never aborts its
siblings.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

from ..errors import ConfigError
from .config import RunConfig, build_schedule, validate_config
from .runner import RunRow, row_at_step, run_experiment, snapshot_step
from ..schedulers import stays_below

# Default tuning grid for the inertial pair.
DEFAULT_GRID = (0.1, 0.5, 0.9, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0)

# Default initial-learning-rate candidates for the sweep.
DEFAULT_LR_SWEEP = (1e-4, 5e-4, 1e-3, 5e-3, 1e-2)

GRID_CSV_HEADER = (
    "alpha,beta,short_train_loss,short_test_metric,"
    "final_train_loss,final_test_metric,best_test_metric,status"
)


@dataclass(frozen=True)
class GridCell:
    alpha: float
    beta: float
    short_train_loss: Optional[float]
    short_test_metric: Optional[float]
    final_train_loss: Optional[float]
    final_test_metric: Optional[float]
    best_test_metric: Optional[float]
    status: str


@dataclass(frozen=True)
class GridResult:
    cells: tuple
    short_step: int
    steps: int

    def to_csv(self) -> str:
        def fmt(v):
            return "" if v is None else repr(float(v))

        lines = [GRID_CSV_HEADER]
        for c in self.cells:
            lines.append(
                ",".join(
                    [repr(float(c.alpha)), repr(float(c.beta)), fmt(c.short_train_loss),
                     fmt(c.short_test_metric), fmt(c.final_train_loss),
                     fmt(c.final_test_metric), fmt(c.best_test_metric), c.status]
                )
            )
        return "\n".join(lines) + "\n"


def _summarize_cell(alpha, beta, rows: list[RunRow], summary, short_step) -> GridCell:
    short = row_at_step(rows, short_step)
    ok_rows = [r for r in rows if r.status == "ok"]
    final_metric = ok_rows[-1].test_metric if ok_rows else None
    return GridCell(
        alpha=alpha,
        beta=beta,
        short_train_loss=short.train_loss if short else None,
        short_test_metric=short.test_metric if short else None,
        final_train_loss=summary.final_train_loss,
        final_test_metric=final_metric,
        best_test_metric=summary.best_test_metric,
        status=summary.status,
    )


def grid_search(base_config: RunConfig, alphas=None, betas=None, workers: int = 4,
                out_dir=None) -> GridResult:
    """One run per (alpha, beta) cell; rows sorted by (alpha, beta).

    Every cell must be well-posed against the schedule up front; unstable
    cells that diverge at run time are recorded with their step index.
    """
    alphas = tuple(alphas) if alphas is not None else DEFAULT_GRID
    betas = tuple(betas) if betas is not None else DEFAULT_GRID
    if not alphas or not betas:
        raise ConfigError("grid needs at least one alpha and one beta")

    schedule = build_schedule(base_config)
    for b in betas:
        if not stays_below(schedule, b):
            raise ConfigError(
                f"grid cell beta={b} is not well-posed against gamma0={schedule.gamma0}"
            )

    cells = [(a, b) for a in alphas for b in betas]
    configs = [replace(base_config, alpha=a, beta=b) for a, b in cells]
    for cfg in configs:
        validate_config(cfg)
    short_step = snapshot_step(base_config)

    def run_cell(idx):
        a, b = cells[idx]
        tag = f"cell_a{a:g}_b{b:g}"
        rows, summary = run_experiment(
            configs[idx], out_dir=out_dir, tag=tag if out_dir else "run"
        )
        return _summarize_cell(a, b, rows, summary, short_step)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_cell, range(len(cells))))
    else:
        results = [run_cell(i) for i in range(len(cells))]

    results.sort(key=lambda c: (c.alpha, c.beta))
    grid = GridResult(cells=tuple(results), short_step=short_step, steps=base_config.steps)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "grid.csv").write_text(grid.to_csv(), encoding="utf-8")
    return grid


@dataclass(frozen=True)
class SweepRow:
    lr: float
    final_train_loss: Optional[float]
    test_metric: Optional[float]
    status: str


def lr_sweep(base_config: RunConfig, lrs=None, out_dir=None) -> list[SweepRow]:
    """One run per candidate initial learning rate."""
    lrs = tuple(lrs) if lrs is not None else DEFAULT_LR_SWEEP
    if len(set(lrs)) != len(lrs):
        raise ConfigError("duplicate learning rates in sweep list")
    if any(not v > 0 for v in lrs):
        raise ConfigError("learning rates must be positive")
    configs = [replace(base_config, lr=v) for v in lrs]
    for cfg in configs:
        validate_config(cfg)

    rows = []
    for cfg in configs:
        run_rows, summary = run_experiment(cfg)
        ok = [r for r in run_rows if r.status == "ok"]
        last_metric = ok[-1].test_metric if ok else None
        rows.append(SweepRow(lr=cfg.lr, final_train_loss=summary.final_train_loss,
                             test_metric=last_metric, status=summary.status))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["lr,final_train_loss,test_metric,status"]
        for r in rows:
            lines.append(",".join([
                repr(float(r.lr)),
                "" if r.final_train_loss is None else repr(float(r.final_train_loss)),
                "" if r.test_metric is None else repr(float(r.test_metric)),
                r.status,
            ]))
        (out / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return rows
