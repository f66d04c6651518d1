"""Tree-based planners over sampled databases: RRT, q-RRT and annealed q-RRT.

One q-RRT step builds a database of 2^n (target, nearest-parent) pairs,
tags each pair with the reachability oracle, amplifies the tagged subset,
measures one index, re-verifies it classically (the finalizer) and admits
the surviving node. Classical RRT is the one-sample special case: draw,
connect to the nearest node, verify, admit.

Database annealing replaces free placement with ring placement: each raw
sample keeps only its direction from the chosen parent while the distance
is redrawn inside the current temperature stage's [r_min, r_max] band. The
temperature schedule advances one unit per admitted node, with stage
boundaries at the cumulative stage durations. Constrained targets may land
outside the bounds or inside obstacles; the tagging oracle simply marks
them bad.

Admission rules shared by every planner in the package:

* a candidate whose coordinates already sit in the tree is discarded as a
  duplicate;
* a candidate within delta of the goal is snapped onto the goal point,
  after the snapped edge is re-verified (an extra finalizer call); if the
  re-verification fails the node is admitted unmoved, and if the goal
  already sits in the tree no snap is attempted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import qsim
from .dynamics import LinearSystem, reachable, reachable_batch
from .env import Environment, sample_uniform_batch
from .records import ADDED, DUPLICATE, FAILED, StepResult, StopWatch, TrialRecord

__all__ = [
    "Tree",
    "Database",
    "TemperatureSchedule",
    "PlanResult",
    "nearest",
    "build_database",
    "build_database_annealed",
    "tag_database",
    "advance_temperature",
    "resolve_iterations",
    "qrrt_step",
    "rrt_step",
    "qrrt_plan",
    "rrt_plan",
    "extract_path",
    "extract_path_indices",
]

MAX_DATABASE_EXPONENT = qsim.MAX_DATABASE_QUBITS


class Tree:
    """Planning tree: packed coordinates, parent indices, goal bookkeeping.

    Coordinate lookup for duplicate detection is exact float equality via a
    dict, matching the admission rule.
    """

    def __init__(self, root):
        root = np.asarray(root, dtype=float).reshape(2)
        self._coords = np.zeros((64, 2))
        self._coords[0] = root
        self._size = 1
        self.parents: list[int | None] = [None]
        self._lookup: dict[tuple[float, float], int] = {(root[0], root[1]): 0}
        self.goal_index: int | None = None

    def __len__(self) -> int:
        return self._size

    @property
    def coords(self) -> np.ndarray:
        return self._coords[: self._size]

    def node(self, index: int) -> np.ndarray:
        return self._coords[index].copy()

    def has_point(self, point) -> bool:
        point = np.asarray(point, dtype=float).reshape(2)
        return (point[0], point[1]) in self._lookup

    def add(self, point, parent_index: int) -> int:
        point = np.asarray(point, dtype=float).reshape(2)
        if not (0 <= parent_index < self._size):
            raise IndexError(f"parent index {parent_index} outside tree of size {self._size}")
        key = (float(point[0]), float(point[1]))
        if key in self._lookup:
            raise ValueError(f"point {key} already in tree")
        if self._size == self._coords.shape[0]:
            grown = np.zeros((2 * self._size, 2))
            grown[: self._size] = self._coords[: self._size]
            self._coords = grown
        idx = self._size
        self._coords[idx] = point
        self._size += 1
        self.parents.append(int(parent_index))
        self._lookup[key] = idx
        return idx

    def nearest(self, point) -> int:
        point = np.asarray(point, dtype=float).reshape(2)
        d = self.coords - point
        return int(np.argmin(np.einsum("ij,ij->i", d, d)))

    def nearest_batch(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        diff = pts[:, None, :] - self.coords[None, :, :]
        d2 = np.einsum("kij,kij->ki", diff, diff)
        return np.argmin(d2, axis=1)


def nearest(tree: Tree, point) -> int:
    """Index of the closest tree node; ties resolve to the lowest index."""
    return tree.nearest(point)


@dataclass(frozen=True)
class Database:
    """2^n candidate (target, parent) pairs built against one tree snapshot.

    parent_points snapshots the parent coordinates at build time, so the
    database stays valid even while the tree keeps growing; good_mask/m are
    None until tag_database has run.
    """

    n: int
    points: np.ndarray  # (2^n, 2)
    parent_index: np.ndarray  # (2^n,)
    parent_points: np.ndarray  # (2^n, 2)
    good_mask: np.ndarray | None = None
    m: int | None = None


def _check_exponent(n: int) -> int:
    n = int(n)
    if not (0 <= n <= MAX_DATABASE_EXPONENT):
        raise ValueError(f"database exponent must be in [0, {MAX_DATABASE_EXPONENT}], got {n}")
    return n


def build_database(env: Environment, tree: Tree, n: int, rng: np.random.Generator) -> Database:
    """Uniform targets paired with their nearest tree nodes.

    A sample landing exactly on an existing node would create a zero-length
    edge, so such rows are redrawn.
    """
    n = _check_exponent(n)
    size = 2**n
    pts = sample_uniform_batch(env, rng, size)
    for _ in range(64):
        pidx = tree.nearest_batch(pts)
        ppts = tree.coords[pidx]
        coincide = np.all(pts == ppts, axis=1)
        if not coincide.any():
            break
        pts[coincide] = sample_uniform_batch(env, rng, int(coincide.sum()))
    else:
        raise RuntimeError("could not draw database samples clear of existing nodes")
    return Database(n=n, points=pts, parent_index=pidx, parent_points=ppts.copy())


def build_database_annealed(
    env: Environment,
    tree: Tree,
    n: int,
    schedule: "TemperatureSchedule",
    rng: np.random.Generator,
) -> Database:
    """Ring-constrained targets: direction kept, distance redrawn per stage.

    Draw order is fixed for reproducibility: raw samples first, then radii,
    then replacement angles for samples that landed exactly on their parent
    (whose direction is undefined). Constrained targets are allowed to leave
    free space; tagging marks them bad.
    """
    n = _check_exponent(n)
    size = 2**n
    raw = sample_uniform_batch(env, rng, size)
    pidx = tree.nearest_batch(raw)
    ppts = tree.coords[pidx].copy()
    r_min, r_max = schedule.current_stage()
    radii = rng.uniform(r_min, r_max, size)
    vec = raw - ppts
    norms = np.hypot(vec[:, 0], vec[:, 1])
    degenerate = norms == 0.0
    if degenerate.any():
        angles = rng.uniform(0.0, 2.0 * math.pi, int(degenerate.sum()))
        vec[degenerate, 0] = np.cos(angles)
        vec[degenerate, 1] = np.sin(angles)
        norms[degenerate] = 1.0
    unit = vec / norms[:, None]
    pts = ppts + unit * radii[:, None]
    return Database(n=n, points=pts, parent_index=pidx, parent_points=ppts)


def tag_database(env: Environment, sys: LinearSystem, db: Database) -> Database:
    """Run the reachability oracle over every entry; fills good_mask and m."""
    mask = reachable_batch(env, sys, db.parent_points, db.points)
    return replace(db, good_mask=mask, m=int(mask.sum()))


@dataclass(frozen=True)
class TemperatureSchedule:
    """Piecewise-constant radius bands indexed by admitted-node count h.

    stages is a tuple of (duration_nodes, r_min, r_max); the band for h is
    the stage whose cumulative duration interval contains h, and past the
    last boundary the final stage persists.
    """

    stages: tuple[tuple[int, float, float], ...]
    h: int = 0

    def __post_init__(self):
        if not self.stages:
            raise ValueError("schedule needs at least one stage")
        norm = []
        for stage in self.stages:
            dur, r_min, r_max = stage
            if int(dur) < 1:
                raise ValueError(f"stage duration must be >= 1, got {dur}")
            if not (0.0 < float(r_min) <= float(r_max)):
                raise ValueError(f"stage radii must satisfy 0 < r_min <= r_max, got {stage}")
            norm.append((int(dur), float(r_min), float(r_max)))
        object.__setattr__(self, "stages", tuple(norm))
        if int(self.h) < 0:
            raise ValueError(f"h must be >= 0, got {self.h}")
        object.__setattr__(self, "h", int(self.h))

    def current_stage(self) -> tuple[float, float]:
        cumulative = 0
        for dur, r_min, r_max in self.stages:
            cumulative += dur
            if self.h < cumulative:
                return (r_min, r_max)
        last = self.stages[-1]
        return (last[1], last[2])

    @classmethod
    def from_config(cls, stages) -> "TemperatureSchedule":
        return cls(stages=tuple((int(d), float(a), float(b)) for d, a, b in stages))


def advance_temperature(schedule: TemperatureSchedule) -> TemperatureSchedule:
    """Schedule advanced by one admitted node."""
    return replace(schedule, h=schedule.h + 1)


def resolve_iterations(mode, n: int, m: int) -> int:
    """Amplification iteration count for a tagged database.

    mode is either the string "optimal" (closed-form optimum for the exact
    m) or a fixed non-negative integer.
    """
    if mode == "optimal":
        return qsim.optimal_iterations(n, m)
    k = int(mode)
    if k < 0:
        raise ValueError(f"fixed iteration count must be >= 0, got {mode}")
    return k


def _admit_candidate(
    env: Environment,
    sys: LinearSystem,
    tree: Tree,
    point: np.ndarray,
    parent_index: int,
    record: TrialRecord,
) -> StepResult:
    """Duplicate rejection, goal snap and the actual tree insertion."""
    point = np.asarray(point, dtype=float).reshape(2).copy()
    if tree.has_point(point):
        record.duplicates_discarded += 1
        return StepResult(DUPLICATE)
    snapped = False
    if tree.goal_index is None and not tree.has_point(env.xG):
        if float(np.hypot(*(point - env.xG))) < env.delta:
            record.calls_finalizer += 1
            if reachable(env, sys, tree.coords[parent_index], env.xG):
                point = env.xG.copy()
                snapped = True
    idx = tree.add(point, parent_index)
    record.log_admission(point)
    if snapped:
        tree.goal_index = idx
    return StepResult(ADDED, idx)


def _qaa_admit_step(
    env: Environment,
    sys: LinearSystem,
    tree: Tree,
    db: Database,
    mode,
    rng: np.random.Generator,
    record: TrialRecord,
) -> StepResult:
    """Amplify a tagged database, measure, finalize, admit."""
    if db.m is None:
        raise ValueError("database must be tagged before amplification")
    record.per_step_m.append(db.m)
    k = resolve_iterations(mode, db.n, db.m)
    state = qsim.amplify(qsim.init_uniform(db.n, db.good_mask), k)
    record.calls_amplification += state.oracle_calls
    idx = qsim.measure(state, rng)
    record.calls_finalizer += 1
    if not reachable(env, sys, db.parent_points[idx], db.points[idx]):
        return StepResult(FAILED)
    return _admit_candidate(env, sys, tree, db.points[idx], int(db.parent_index[idx]), record)


def qrrt_step(
    env: Environment,
    sys: LinearSystem,
    tree: Tree,
    n: int,
    mode,
    rng: np.random.Generator,
    record: TrialRecord,
    schedule: TemperatureSchedule | None = None,
) -> StepResult:
    """One amplified planning step; with a schedule, targets are ring-constrained."""
    if n < 1:
        raise ValueError(f"amplified steps need n >= 1, got {n}")
    if schedule is None:
        db = build_database(env, tree, n, rng)
    else:
        db = build_database_annealed(env, tree, n, schedule, rng)
    db = tag_database(env, sys, db)
    return _qaa_admit_step(env, sys, tree, db, mode, rng, record)


def rrt_step(
    env: Environment,
    sys: LinearSystem,
    tree: Tree,
    rng: np.random.Generator,
    record: TrialRecord,
) -> StepResult:
    """Classical step: one sample, nearest parent, one oracle call."""
    for _ in range(64):
        point = sample_uniform_batch(env, rng, 1)[0]
        if not tree.has_point(point):
            break
    else:
        raise RuntimeError("could not draw a sample clear of existing nodes")
    parent_index = tree.nearest(point)
    record.calls_classical += 1
    if not reachable(env, sys, tree.coords[parent_index], point):
        return StepResult(FAILED)
    return _admit_candidate(env, sys, tree, point, parent_index, record)


@dataclass
class PlanResult:
    """Path (possibly empty), instrumentation record and the grown tree."""

    path: list[tuple[float, float]]
    record: TrialRecord
    tree: Tree

    @property
    def goal_found(self) -> bool:
        return bool(self.path)


def _stop(record: TrialRecord, tree: Tree, steps, max_steps, target_nodes, cutoff) -> bool:
    if tree.goal_index is not None or steps >= max_steps:
        return True
    if target_nodes is not None and record.nodes_admitted >= target_nodes:
        return True
    if cutoff is not None and record.cutoff_calls() >= cutoff:
        return True
    return False


def qrrt_plan(
    env: Environment,
    sys: LinearSystem,
    n: int,
    mode,
    max_steps: int,
    rng: np.random.Generator,
    *,
    schedule: TemperatureSchedule | None = None,
    target_nodes: int | None = None,
    cutoff: int | None = None,
    algorithm: str | None = None,
    seed: int = -1,
) -> PlanResult:
    """Amplified steps until goal capture or a budget (steps, nodes, calls) runs out."""
    if max_steps < 1:
        raise ValueError(f"max_steps must be >= 1, got {max_steps}")
    label = algorithm or ("qda" if schedule is not None else "qrrt")
    record = TrialRecord(algorithm=label, seed=seed)
    tree = Tree(env.x0)
    sched = schedule
    with StopWatch(record):
        if np.array_equal(env.x0, env.xG):
            tree.goal_index = 0
        steps = 0
        while not _stop(record, tree, steps, max_steps, target_nodes, cutoff):
            result = qrrt_step(env, sys, tree, n, mode, rng, record, schedule=sched)
            if sched is not None and result.outcome == ADDED:
                sched = advance_temperature(sched)
            steps += 1
    path = extract_path(tree) if tree.goal_index is not None else []
    return PlanResult(path=path, record=record, tree=tree)


def rrt_plan(
    env: Environment,
    sys: LinearSystem,
    max_steps: int,
    rng: np.random.Generator,
    *,
    target_nodes: int | None = None,
    cutoff: int | None = None,
    seed: int = -1,
) -> PlanResult:
    """Classical RRT loop with the same stop conditions as qrrt_plan."""
    if max_steps < 1:
        raise ValueError(f"max_steps must be >= 1, got {max_steps}")
    record = TrialRecord(algorithm="rrt", seed=seed)
    tree = Tree(env.x0)
    with StopWatch(record):
        if np.array_equal(env.x0, env.xG):
            tree.goal_index = 0
        steps = 0
        while not _stop(record, tree, steps, max_steps, target_nodes, cutoff):
            rrt_step(env, sys, tree, rng, record)
            steps += 1
    path = extract_path(tree) if tree.goal_index is not None else []
    return PlanResult(path=path, record=record, tree=tree)


def extract_path_indices(tree: Tree) -> list[int]:
    """Node indices root -> goal; requires a captured goal."""
    if tree.goal_index is None:
        raise ValueError("tree has not captured the goal")
    chain = []
    idx: int | None = tree.goal_index
    while idx is not None:
        chain.append(idx)
        idx = tree.parents[idx]
    chain.reverse()
    return chain


def extract_path(tree: Tree) -> list[tuple[float, float]]:
    """Node coordinates root -> goal; requires a captured goal."""
    return [tuple(tree.coords[i]) for i in extract_path_indices(tree)]
