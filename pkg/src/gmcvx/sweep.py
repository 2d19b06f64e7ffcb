"""Two-parameter region maps and boundary thresholds for checker verdicts.

A sweep evaluates selected checkers over a rectangular parameter grid,
cell by cell with no state shared between cells, and writes the region as
deterministic CSV (``param1,param2,checker,status,margin``, shortest
round-trip floats, LF endings). Cells whose template produces a
non-PSD target covariance cannot carry a Gaussian law at all and are
reported as failing with the offending eigenvalue as margin.

:func:`boundary_bisect` locates a verdict flip along one scalar parameter.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import psdfeas
from .conditions import (
    InvalidProblem,
    MixtureProblem,
    SearchConfig,
    Status,
    Verdict,
    check_dominated_by_single,
    check_inecov,
    check_inecovf,
    check_inegsqrt,
    find_correl_certificate,
)
from .utils import thread_cap

CHECKER_NAMES = ("inegsqrt", "inecov", "inecovf", "correl", "dominates")


class BracketNotSeparating(RuntimeError):
    """Both bracket ends give the same verdict."""


@dataclass(frozen=True)
class Axis:
    name: str
    start: float
    stop: float
    step: float

    def __post_init__(self):
        if not (self.step > 0 and np.isfinite([self.start, self.stop, self.step]).all()):
            raise ValueError("axis needs finite bounds and a positive step")

    def values(self) -> np.ndarray:
        count = int(round((self.stop - self.start) / self.step)) + 1
        return self.start + self.step * np.arange(max(count, 1))


@dataclass
class SweepSpec:
    """Problem template over two axes plus the checkers to run."""

    template: Callable[[float, float], MixtureProblem]
    axis1: Axis
    axis2: Axis
    checkers: tuple[str, ...] = ("inegsqrt",)
    seed: int = 0

    def __post_init__(self):
        for name in self.checkers:
            if name not in CHECKER_NAMES:
                raise ValueError(f"unknown checker {name!r}")


@dataclass(frozen=True)
class RegionCell:
    v1: float
    v2: float
    checker: str
    status: str
    margin: float


def _evaluate_cell(spec: SweepSpec, v1: float, v2: float, search_cfg, engine_cfg) -> list[RegionCell]:
    try:
        prob = spec.template(v1, v2)
    except InvalidProblem as exc:
        # no Gaussian law carries this target covariance: every condition fails
        margin = float(getattr(exc, "lmin", -np.inf))
        return [
            RegionCell(v1, v2, name, Status.FAILS.value, margin) for name in spec.checkers
        ]
    cells = []
    v5: Verdict | None = None
    if any(name in ("inegsqrt", "inecov", "inecovf") for name in spec.checkers):
        v5 = check_inegsqrt(prob, search_cfg)
    for name in spec.checkers:
        if name == "inegsqrt":
            verdict = v5
        elif name == "inecov":
            verdict = check_inecov(prob, engine_cfg, search_cfg, inegsqrt_verdict=v5, seed=spec.seed)
        elif name == "inecovf":
            verdict = check_inecovf(prob, engine_cfg, search_cfg, inegsqrt_verdict=v5, seed=spec.seed)
        elif name == "correl":
            verdict = find_correl_certificate(prob, seed=spec.seed)
        else:
            verdict = check_dominated_by_single(prob)
        cells.append(RegionCell(v1, v2, name, verdict.status.value, float(verdict.margin)))
    return cells


def run_sweep(
    spec: SweepSpec,
    search_cfg: SearchConfig | None = None,
    engine_cfg: psdfeas.EngineConfig | None = None,
    threads: int | None = None,
) -> list[RegionCell]:
    """Evaluate the grid; cells are independent and ordered by (row, col)."""
    grid = [(v1, v2) for v1 in spec.axis1.values() for v2 in spec.axis2.values()]
    workers = threads if threads is not None else thread_cap()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(
                pool.map(lambda vv: _evaluate_cell(spec, vv[0], vv[1], search_cfg, engine_cfg), grid)
            )
    else:
        chunks = [_evaluate_cell(spec, v1, v2, search_cfg, engine_cfg) for v1, v2 in grid]
    return [cell for chunk in chunks for cell in chunk]


def write_region_csv(cells: list[RegionCell], path) -> None:
    """Deterministic CSV: identical spec and seed give identical bytes."""
    lines = ["param1,param2,checker,status,margin"]
    for cell in cells:
        lines.append(
            f"{float(cell.v1)!r},{float(cell.v2)!r},{cell.checker},{cell.status},{float(cell.margin)!r}"
        )
    data = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(data)


def boundary_bisect(
    template: Callable[[float], MixtureProblem],
    checker,
    lo: float,
    hi: float,
    xtol: float = 1e-4,
    seed: int = 0,
    search_cfg: SearchConfig | None = None,
    engine_cfg: psdfeas.EngineConfig | None = None,
) -> float:
    """Bisect a scalar parameter for the point where a verdict flips.

    ``checker`` is a registered name or a callable mapping a problem to a
    :class:`Verdict`. The caller asserts the verdict is monotone on the
    bracket; ends must disagree (Unknown at an end raises
    :class:`BracketNotSeparating`).
    """
    if not callable(checker) and checker not in CHECKER_NAMES:
        raise ValueError(f"unknown checker {checker!r}")

    def status_at(value: float) -> Status:
        prob = template(value)
        if callable(checker):
            return checker(prob).status
        if checker == "inegsqrt":
            return check_inegsqrt(prob, search_cfg).status
        if checker == "inecov":
            return check_inecov(prob, engine_cfg, search_cfg, seed=seed).status
        if checker == "inecovf":
            return check_inecovf(prob, engine_cfg, search_cfg, seed=seed).status
        if checker == "correl":
            return find_correl_certificate(prob, seed=seed).status
        return check_dominated_by_single(prob).status

    s_lo = status_at(lo)
    s_hi = status_at(hi)
    if s_lo == s_hi or Status.UNKNOWN in (s_lo, s_hi):
        raise BracketNotSeparating(f"verdicts at bracket ends: {s_lo.value}, {s_hi.value}")
    a, b = float(lo), float(hi)
    while b - a > xtol:
        mid = 0.5 * (a + b)
        if status_at(mid) == s_lo:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)
