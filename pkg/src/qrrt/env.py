"""Planar configuration space: rectangular bounds, rectangular obstacles, sampling.

Conventions used throughout the package:

* a point is a length-2 float array (anything ``np.asarray`` accepts);
* a rectangle is ``(xmin, ymin, xmax, ymax)``;
* obstacles are closed sets, so touching an obstacle boundary counts as a
  collision, while the workspace bounds are also closed, so lying exactly on
  the outer boundary still counts as inside.

Segment tests are exact slab (Liang-Barsky) interval intersections, not
sampled approximations, and are vectorized over (segment, obstacle) pairs so
whole sample databases can be screened at once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Environment",
    "EnvGenerationError",
    "GeneratorSpec",
    "CorridorSpec",
    "point_free",
    "points_free",
    "segment_free",
    "segments_free",
    "sample_uniform",
    "sample_uniform_batch",
    "generate_random_env",
    "corridor_region",
    "save_environment",
    "load_environment",
]


class EnvGenerationError(RuntimeError):
    """Raised when random environment generation cannot satisfy its spec."""


def _as_rect(r) -> np.ndarray:
    rect = np.asarray(r, dtype=float).reshape(4)
    if not np.all(np.isfinite(rect)):
        raise ValueError(f"rectangle has non-finite entries: {rect!r}")
    return rect


def _as_point(p) -> np.ndarray:
    pt = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(pt)):
        raise ValueError(f"point has non-finite entries: {pt!r}")
    return pt


@dataclass(frozen=True)
class Environment:
    """Workspace bounds, obstacle set, start/goal and the goal radius delta.

    Invariants are checked at construction: positive-area bounds, obstacles
    with positive extent lying inside the bounds, delta > 0, and free start
    and goal points.
    """

    bounds: np.ndarray
    obstacles: np.ndarray  # shape (O, 4), possibly O == 0
    x0: np.ndarray
    xG: np.ndarray
    delta: float
    rng_seed: int = 0

    def __post_init__(self):
        bounds = _as_rect(self.bounds)
        obstacles = np.asarray(self.obstacles, dtype=float).reshape(-1, 4)
        if not np.all(np.isfinite(obstacles)):
            raise ValueError("obstacles contain non-finite entries")
        x0 = _as_point(self.x0)
        xG = _as_point(self.xG)
        if not (bounds[2] > bounds[0] and bounds[3] > bounds[1]):
            raise ValueError(f"bounds must have positive area: {bounds.tolist()}")
        if obstacles.size:
            if not np.all((obstacles[:, 2] > obstacles[:, 0]) & (obstacles[:, 3] > obstacles[:, 1])):
                raise ValueError("every obstacle needs positive width and height")
            inside = (
                (obstacles[:, 0] >= bounds[0])
                & (obstacles[:, 1] >= bounds[1])
                & (obstacles[:, 2] <= bounds[2])
                & (obstacles[:, 3] <= bounds[3])
            )
            if not np.all(inside):
                raise ValueError("obstacles must lie inside the bounds")
        if not float(self.delta) > 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "obstacles", obstacles)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "xG", xG)
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "rng_seed", int(self.rng_seed))
        for arr in (bounds, obstacles, x0, xG):
            arr.setflags(write=False)
        if not point_free(self, x0):
            raise ValueError("start point x0 is not in free space")
        if not point_free(self, xG):
            raise ValueError("goal point xG is not in free space")


def points_free(env: Environment, points) -> np.ndarray:
    """Vector of booleans: inside the closed bounds and outside every closed obstacle."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    b = env.bounds
    ok = (pts[:, 0] >= b[0]) & (pts[:, 0] <= b[2]) & (pts[:, 1] >= b[1]) & (pts[:, 1] <= b[3])
    ok &= np.all(np.isfinite(pts), axis=1)
    if env.obstacles.size:
        o = env.obstacles
        inside_any = (
            (pts[:, 0:1] >= o[None, :, 0])
            & (pts[:, 0:1] <= o[None, :, 2])
            & (pts[:, 1:2] >= o[None, :, 1])
            & (pts[:, 1:2] <= o[None, :, 3])
        ).any(axis=1)
        ok &= ~inside_any
    return ok


def point_free(env: Environment, point) -> bool:
    return bool(points_free(env, _as_point(point))[0])


def _segments_hit_rects(a: np.ndarray, b: np.ndarray, rects: np.ndarray) -> np.ndarray:
    """True per segment if the closed segment a->b meets any closed rectangle.

    Slab test on the parametrization a + t (b - a), t in [0, 1]. Axis-parallel
    segments (zero direction component) degenerate to a containment test on
    that axis; comparisons are closed so grazing contact counts as a hit.
    """
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    if rects.size == 0:
        return np.zeros(a.shape[0], dtype=bool)
    d = b - a
    lo = rects[None, :, (0, 1)]  # (1, O, 2)
    hi = rects[None, :, (2, 3)]
    a_ = a[:, None, :]
    d_ = d[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - a_) / d_
        t2 = (hi - a_) / d_
    tmin = np.minimum(t1, t2)
    tmax = np.maximum(t1, t2)
    parallel = d_ == 0.0
    in_slab = (a_ >= lo) & (a_ <= hi)
    tmin = np.where(parallel, np.where(in_slab, -np.inf, np.inf), tmin)
    tmax = np.where(parallel, np.where(in_slab, np.inf, -np.inf), tmax)
    enter = np.maximum(np.maximum(tmin[..., 0], tmin[..., 1]), 0.0)
    exit_ = np.minimum(np.minimum(tmax[..., 0], tmax[..., 1]), 1.0)
    return (enter <= exit_).any(axis=1)


def segments_free(env: Environment, a, b) -> np.ndarray:
    """Vectorized segment_free over paired endpoint arrays of shape (K, 2).

    A segment is free iff both endpoints lie in the closed bounds (the bounds
    rectangle is convex, so the whole segment then does) and it intersects no
    obstacle.
    """
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    bd = env.bounds
    ok = np.all(np.isfinite(a), axis=1) & np.all(np.isfinite(b), axis=1)
    for pts in (a, b):
        ok &= (pts[:, 0] >= bd[0]) & (pts[:, 0] <= bd[2]) & (pts[:, 1] >= bd[1]) & (pts[:, 1] <= bd[3])
    hit = _segments_hit_rects(a, b, env.obstacles)
    return ok & ~hit


def segment_free(env: Environment, a, b) -> bool:
    return bool(segments_free(env, _as_point(a), _as_point(b))[0])


def sample_uniform_batch(env: Environment, rng: np.random.Generator, count: int) -> np.ndarray:
    """count points uniform over the bounds rectangle (free or not)."""
    b = env.bounds
    return rng.uniform((b[0], b[1]), (b[2], b[3]), size=(count, 2))


def sample_uniform(env: Environment, rng: np.random.Generator) -> np.ndarray:
    return sample_uniform_batch(env, rng, 1)[0]


@dataclass(frozen=True)
class CorridorSpec:
    """A vertical wall split by a gap of the given width.

    The wall is centered at wall_x (bounds center when None) with the given
    thickness; the gap is centered at gap_center_y (bounds center when None).
    """

    width: float
    thickness: float = 1.0
    wall_x: float | None = None
    gap_center_y: float | None = None


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters for seeded random environment generation.

    obstacle_count counts the scattered obstacles; a corridor adds its two
    wall pieces on top. Explicit x0/xG are used verbatim, otherwise both are
    rejection-sampled in free space (on opposite sides of the wall when a
    corridor is present).
    """

    bounds: tuple[float, float, float, float]
    obstacle_count: int = 0
    size_range: tuple[float, float] = (0.5, 2.0)
    delta: float = 0.5
    corridor: CorridorSpec | None = None
    x0: tuple[float, float] | None = None
    xG: tuple[float, float] | None = None
    max_retries: int = 10_000


def _corridor_walls(spec: GeneratorSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    b = _as_rect(spec.bounds)
    c = spec.corridor
    cx = 0.5 * (b[0] + b[2]) if c.wall_x is None else float(c.wall_x)
    cy = 0.5 * (b[1] + b[3]) if c.gap_center_y is None else float(c.gap_center_y)
    half_t = 0.5 * float(c.thickness)
    half_w = 0.5 * float(c.width)
    if not (c.width > 0 and c.thickness > 0):
        raise ValueError("corridor width and thickness must be positive")
    lower = np.array([cx - half_t, b[1], cx + half_t, cy - half_w])
    upper = np.array([cx - half_t, cy + half_w, cx + half_t, b[3]])
    gap = np.array([cx - half_t, cy - half_w, cx + half_t, cy + half_w])
    if not (lower[3] > lower[1] and upper[3] > upper[1]):
        raise ValueError("corridor gap leaves no room for wall pieces")
    return lower, upper, gap


def corridor_region(spec: GeneratorSpec) -> np.ndarray:
    """The gap rectangle of the corridor, derived deterministically from the generator parameters."""
    if spec.corridor is None:
        raise ValueError("spec has no corridor")
    return _corridor_walls(spec)[2]


def _rects_overlap(r1: np.ndarray, r2: np.ndarray) -> bool:
    return bool(r1[0] <= r2[2] and r2[0] <= r1[2] and r1[1] <= r2[3] and r2[1] <= r1[3])


def generate_random_env(spec: GeneratorSpec, seed: int) -> Environment:
    """Seeded environment: scattered axis-aligned obstacles, optional corridor.

    Scattered obstacles fit inside the bounds; with a corridor present they
    are rejection-sampled to avoid the gap rectangle so the passage always
    stays open. Start/goal sampling retries at most spec.max_retries times.
    """
    rng = np.random.default_rng(seed)
    b = _as_rect(spec.bounds)
    lo_s, hi_s = spec.size_range
    if not (0 < lo_s <= hi_s):
        raise ValueError(f"invalid obstacle size range: {spec.size_range}")
    obstacles: list[np.ndarray] = []
    gap = None
    if spec.corridor is not None:
        lower, upper, gap = _corridor_walls(spec)
        obstacles.extend([lower, upper])

    keep_clear = [np.asarray(p, dtype=float) for p in (spec.x0, spec.xG) if p is not None]

    def _rejected(rect: np.ndarray) -> bool:
        if gap is not None and _rects_overlap(rect, gap):
            return True
        # Explicit start/goal points must stay free, so obstacles avoid them.
        for pt in keep_clear:
            if rect[0] <= pt[0] <= rect[2] and rect[1] <= pt[1] <= rect[3]:
                return True
        return False

    tries = 0
    while len(obstacles) < spec.obstacle_count + (2 if gap is not None else 0):
        w, h = rng.uniform(lo_s, hi_s, size=2)
        if b[0] > b[2] - w or b[1] > b[3] - h:
            raise EnvGenerationError("obstacle size exceeds bounds")
        x = rng.uniform(b[0], b[2] - w)
        y = rng.uniform(b[1], b[3] - h)
        rect = np.array([x, y, x + w, y + h])
        if _rejected(rect):
            tries += 1
            if tries > spec.max_retries:
                raise EnvGenerationError("could not place obstacles clear of the corridor")
            continue
        obstacles.append(rect)

    obs = np.array(obstacles).reshape(-1, 4)

    # Start/goal sampling needs a free-point test before the Environment
    # object exists, so run it against the raw bounds/obstacle arrays.
    def _free(pt: np.ndarray) -> bool:
        if not (b[0] <= pt[0] <= b[2] and b[1] <= pt[1] <= b[3]):
            return False
        if obs.size:
            inside = (
                (pt[0] >= obs[:, 0]) & (pt[0] <= obs[:, 2]) & (pt[1] >= obs[:, 1]) & (pt[1] <= obs[:, 3])
            )
            if inside.any():
                return False
        return True

    def _draw(side: str | None, fixed) -> np.ndarray:
        if fixed is not None:
            return _as_point(fixed)
        for _ in range(spec.max_retries):
            if side == "left":
                x = rng.uniform(b[0], gap[0])
            elif side == "right":
                x = rng.uniform(gap[2], b[2])
            else:
                x = rng.uniform(b[0], b[2])
            y = rng.uniform(b[1], b[3])
            pt = np.array([x, y])
            if _free(pt):
                return pt
        raise EnvGenerationError("no free start/goal placement found within retry budget")

    if gap is not None:
        x0 = _draw("left", spec.x0)
        xG = _draw("right", spec.xG)
    else:
        x0 = _draw(None, spec.x0)
        xG = _draw(None, spec.xG)
    return Environment(bounds=b, obstacles=obs, x0=x0, xG=xG, delta=spec.delta, rng_seed=seed)


def save_environment(env: Environment, path) -> None:
    payload = {
        "bounds": env.bounds.tolist(),
        "obstacles": env.obstacles.tolist(),
        "x0": env.x0.tolist(),
        "xG": env.xG.tolist(),
        "delta": env.delta,
        "seed": env.rng_seed,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_environment(path) -> Environment:
    with open(path) as fh:
        payload = json.load(fh)
    try:
        return Environment(
            bounds=payload["bounds"],
            obstacles=payload.get("obstacles", []),
            x0=payload["x0"],
            xG=payload["xG"],
            delta=payload["delta"],
            rng_seed=payload.get("seed", 0),
        )
    except KeyError as exc:
        raise ValueError(f"environment file {path} is missing key {exc}") from exc
