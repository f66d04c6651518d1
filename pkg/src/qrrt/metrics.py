"""Trial instrumentation: records, heatmaps, calls-per-node fits, exports.

All exports are deterministic byte-for-byte for fixed inputs (floats are
written with repr round-tripping); the wall-clock column of a record CSV is
the single exception and comparisons must exclude it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import parallel as _parallel
from . import planner as _planner
from .dynamics import LinearSystem
from .env import Environment
from .records import TrialRecord

__all__ = [
    "TrialRecord",
    "AlgorithmConfig",
    "Heatmap",
    "HeatmapSpec",
    "accumulate_heatmap",
    "cutoff_run",
    "run_trial",
    "count_in_region",
    "oracle_efficiency",
    "slope_fit",
    "mean_edge_length",
    "RECORD_CSV_COLUMNS",
    "records_to_csv_lines",
    "write_records_csv",
    "write_heatmap_csv",
    "write_heatmap_pgm",
]

ALGORITHMS = ("rrt", "qrrt", "qda", "prrt", "pqrrt-shared", "pqrrt-unshared")


@dataclass(frozen=True)
class AlgorithmConfig:
    """Everything needed to run one planner variant on an environment.

    mode is "optimal" or a fixed iteration count; schedule is required for
    qda; pool is required for the pooled variants.
    """

    name: str
    n: int = 8
    mode: object = "optimal"
    schedule: _planner.TemperatureSchedule | None = None
    pool: _parallel.WorkerPool | None = None
    max_steps: int = 100_000

    def __post_init__(self):
        if self.name not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.name!r}, expected one of {ALGORITHMS}")
        if self.name == "qda" and self.schedule is None:
            raise ValueError("qda needs a temperature schedule")
        if self.name in ("prrt", "pqrrt-shared", "pqrrt-unshared") and self.pool is None:
            raise ValueError(f"{self.name} needs a worker pool")
        expected_mode = {"prrt": "classical", "pqrrt-shared": "shared", "pqrrt-unshared": "unshared"}
        if self.pool is not None and self.name in expected_mode:
            if self.pool.mode != expected_mode[self.name]:
                raise ValueError(
                    f"{self.name} needs a pool in mode {expected_mode[self.name]!r}, "
                    f"got {self.pool.mode!r}"
                )


def run_trial(
    algo: AlgorithmConfig,
    env: Environment,
    sys: LinearSystem,
    seed: int,
    *,
    cutoff: int | None = None,
    target_nodes: int | None = None,
) -> _planner.PlanResult:
    """One seeded planning trial of the configured algorithm."""
    rng = np.random.default_rng(seed)
    if algo.name == "rrt":
        return _planner.rrt_plan(
            env, sys, algo.max_steps, rng, target_nodes=target_nodes, cutoff=cutoff, seed=seed
        )
    if algo.name in ("qrrt", "qda"):
        return _planner.qrrt_plan(
            env,
            sys,
            algo.n,
            algo.mode,
            algo.max_steps,
            rng,
            schedule=algo.schedule,
            target_nodes=target_nodes,
            cutoff=cutoff,
            algorithm=algo.name,
            seed=seed,
        )
    config = _parallel.ParallelPlanConfig(
        pool=algo.pool, n=algo.n, mode=algo.mode, max_steps=algo.max_steps
    )
    return _parallel.run_parallel_plan(
        env, sys, config, seed, target_nodes=target_nodes, cutoff=cutoff
    )


def cutoff_run(
    algo: AlgorithmConfig,
    env: Environment,
    sys: LinearSystem,
    oracle_call_cutoff: int,
    seed: int,
) -> TrialRecord:
    """Run until goal capture or the cutoff-counted budget is exhausted.

    The budget counts amplification + classical calls (finalizer excluded).
    Single-call classical steps exhaust it exactly; a multi-call amplified
    step may overshoot by its own cost, which is inherent to stepwise
    accounting and accepted.
    """
    if oracle_call_cutoff < 1:
        raise ValueError(f"cutoff must be >= 1, got {oracle_call_cutoff}")
    return run_trial(algo, env, sys, seed, cutoff=oracle_call_cutoff).record


@dataclass(frozen=True)
class HeatmapSpec:
    """Grid geometry for node-placement histograms (default 100 x 100)."""

    bounds: tuple[float, float, float, float]
    nx: int = 100
    ny: int = 100

    def __post_init__(self):
        b = self.bounds
        if not (b[2] > b[0] and b[3] > b[1]):
            raise ValueError(f"heatmap bounds must have positive area: {b}")
        if not (self.nx >= 1 and self.ny >= 1):
            raise ValueError("heatmap needs at least one cell per axis")


@dataclass(frozen=True)
class Heatmap:
    """counts[iy, ix] histogram over the HeatmapSpec grid; total mass is conserved."""

    spec: HeatmapSpec
    counts: np.ndarray  # (ny, nx) int64


def _bin_axis(values: np.ndarray, lo: float, hi: float, cells: int) -> np.ndarray:
    """Cell index per value; values exactly on an interior cell boundary go to
    the lower-index cell, and both outer boundaries are valid."""
    if np.any(values < lo) or np.any(values > hi):
        raise ValueError("node position outside heatmap bounds")
    scaled = (values - lo) * (cells / (hi - lo))
    idx = np.ceil(scaled).astype(np.int64) - 1
    return np.clip(idx, 0, cells - 1)


def accumulate_heatmap(records: list[TrialRecord], spec: HeatmapSpec) -> Heatmap:
    """Histogram every node placement of every record onto the grid."""
    counts = np.zeros((spec.ny, spec.nx), dtype=np.int64)
    positions = [pos for rec in records for pos in rec.node_positions]
    if positions:
        pts = np.asarray(positions, dtype=float)
        b = spec.bounds
        ix = _bin_axis(pts[:, 0], b[0], b[2], spec.nx)
        iy = _bin_axis(pts[:, 1], b[1], b[3], spec.ny)
        np.add.at(counts, (iy, ix), 1)
    return Heatmap(spec=spec, counts=counts)


def count_in_region(records: list[TrialRecord], region) -> int:
    """Total node placements inside the closed rectangle region."""
    r = np.asarray(region, dtype=float).reshape(4)
    total = 0
    for rec in records:
        for x, y in rec.node_positions:
            if r[0] <= x <= r[2] and r[1] <= y <= r[3]:
                total += 1
    return total


def oracle_efficiency(records: list[TrialRecord]) -> float:
    """Admitted nodes per oracle call, all three categories included."""
    calls = sum(rec.total_calls() for rec in records)
    nodes = sum(rec.nodes_admitted for rec in records)
    if calls == 0:
        raise ValueError("oracle efficiency undefined for zero calls")
    return nodes / calls


def slope_fit(points) -> tuple[float, float]:
    """Ordinary least squares (slope, intercept) for (x, y) pairs.

    Needs at least two distinct x values; two exact points reproduce the
    line through them.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] < 2:
        raise ValueError("slope fit needs at least two points")
    x = pts[:, 0]
    y = pts[:, 1]
    xbar = x.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    if sxx == 0.0:
        raise ValueError("slope fit needs at least two distinct x values")
    slope = float(np.sum((x - xbar) * (y - y.mean())) / sxx)
    return slope, float(y.mean() - slope * xbar)


def mean_edge_length(tree: _planner.Tree) -> float:
    """Mean parent-to-node distance over all non-root nodes."""
    if len(tree) < 2:
        raise ValueError("tree has no edges")
    coords = tree.coords
    parents = np.asarray(tree.parents[1:], dtype=int)
    diffs = coords[1:] - coords[parents]
    return float(np.mean(np.hypot(diffs[:, 0], diffs[:, 1])))


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------

RECORD_CSV_COLUMNS = (
    "algorithm",
    "seed",
    "calls_amp",
    "calls_final",
    "calls_classical",
    "nodes",
    "duplicates",
    "wall_s",
)


def records_to_csv_lines(records: list[TrialRecord]) -> list[str]:
    lines = [",".join(RECORD_CSV_COLUMNS)]
    for rec in records:
        lines.append(
            ",".join(
                [
                    rec.algorithm,
                    repr(rec.seed),
                    repr(rec.calls_amplification),
                    repr(rec.calls_finalizer),
                    repr(rec.calls_classical),
                    repr(rec.nodes_admitted),
                    repr(rec.duplicates_discarded),
                    repr(rec.wall_time_s),
                ]
            )
        )
    return lines


def write_records_csv(records: list[TrialRecord], path) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(records_to_csv_lines(records)) + "\n")


def write_heatmap_csv(heatmap: Heatmap, path) -> None:
    """Row-major counts, one grid row per line, iy = 0 (ymin edge) first."""
    with open(path, "w") as fh:
        for row in heatmap.counts:
            fh.write(",".join(str(v) for v in row.tolist()) + "\n")


def write_heatmap_pgm(heatmap: Heatmap, path) -> None:
    """Binary PGM (P5), counts scaled linearly so the max count maps to 255."""
    counts = heatmap.counts
    peak = int(counts.max())
    if peak == 0:
        gray = np.zeros_like(counts, dtype=np.uint8)
    else:
        gray = np.floor(counts * (255.0 / peak)).astype(np.uint8)
    header = f"P5\n{counts.shape[1]} {counts.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(gray.tobytes())


def wilson_hilferty_chi2_quantile(dof: int, z: float) -> float:
    """Approximate upper chi-square quantile via the Wilson-Hilferty cube.

    Used by tests as an independent acceptance threshold for goodness-of-fit
    statistics; z is the standard-normal quantile (z = 3.09 ~ 99.9%).
    """
    h = 2.0 / (9.0 * dof)
    return dof * (1.0 - h + z * math.sqrt(h)) ** 3
