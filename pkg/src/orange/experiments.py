"""Hyper-parameter sweeps and ablation runs over a fixed log."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path

from .pipeline import ABLATIONS, RunConfig, RunReport, run

logger = logging.getLogger(__name__)

SWEEPABLE = ("shots", "tau")


@dataclass(frozen=True)
class SweepRow:
    value: float
    ex: float | None
    units_retained: int


def cmd_sweep(param: str, values: list[float], config: RunConfig) -> list[SweepRow]:
    """One full run per value, everything else held fixed.

    Duplicate values are dropped with a warning. Each run writes into its own
    subdirectory of the configured run directory, and the returned rows are
    a plot-ready (value, EX, retained units) table.
    """
    if param not in SWEEPABLE:
        raise ValueError(f"sweepable parameters are {SWEEPABLE}, got {param!r}")
    if not values:
        raise ValueError("sweep needs at least one value")
    unique: list[float] = []
    for value in values:
        if value in unique:
            logger.warning("duplicate sweep value %r dropped", value)
            continue
        unique.append(value)

    base_dir = Path(config.run_dir)
    rows: list[SweepRow] = []
    for value in unique:
        label = f"{value:g}".replace(".", "_")
        sub = replace(config, run_dir=str(base_dir / f"sweep-{param}-{label}"), memory_dir=None)
        if param == "shots":
            sub = replace(sub, shots=int(value))
        else:
            sub = replace(sub, tau=float(value))
        report = run(sub)
        rows.append(
            SweepRow(
                value=value,
                ex=report.aggregate.get("ex"),
                units_retained=report.aggregate.get("units_inserted_total", 0),
            )
        )
    return rows


def cmd_ablate(which: str, config: RunConfig) -> RunReport:
    """Run with one mechanism removed; see the pipeline for what each does."""
    if which not in ABLATIONS:
        raise ValueError(f"ablations are {ABLATIONS}, got {which!r}")
    sub = replace(
        config,
        ablation=which,
        run_dir=str(Path(config.run_dir) / f"ablate-{which}"),
        memory_dir=None,
    )
    return run(sub)
