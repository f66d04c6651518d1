"""Discrete-time closed-loop tracking dynamics and the reachability oracle.

A node target t is tracked from a parent node P by the error recursion
e(k+1) = (A - B K) e(k) with e(0) = P - t, giving the state trajectory
x(k) = t + e(k). The pair (t, P) is *reachable* when

* t itself lies in free space,
* every trajectory segment x(k) -> x(k+1) is collision-free, and
* the state enters the capture ball ||x(k) - t|| <= capture_radius within
  the configured horizon.

Stability of A - B K (spectral radius < 1) is enforced when a LinearSystem
is constructed; configs that fail the check are rejected with the offending
eigenvalues in the diagnostic, never silently accepted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .env import Environment, points_free, segments_free

__all__ = [
    "LinearSystem",
    "UnstableGainError",
    "closed_loop_step",
    "reachable",
    "reachable_batch",
    "spectral_radius",
    "default_system",
    "system_from_config",
    "load_system",
    "DEFAULT_A",
    "DEFAULT_B",
    "DEFAULT_GAIN",
    "UNSTABLE_EXAMPLE_GAIN",
]

# Open-loop plant used across the shipped configs and benches.
DEFAULT_A = ((-1.5, -2.0), (1.0, 3.0))
DEFAULT_B = ((0.5, 0.25), (0.0, 1.0))

# Gain placing the closed-loop poles at 0.5 and 0.6 (A - B K = diag(0.5, 0.6)),
# solved from K = B^-1 (A - A_cl).
DEFAULT_GAIN = ((-4.5, -5.2), (1.0, 2.4))

# A published-looking gain for the same plant that yields closed-loop poles
# -2.7 and -4.0: wildly unstable in discrete time. Shipped so the stability
# guard has a concrete config to reject.
UNSTABLE_EXAMPLE_GAIN = ((1.9, -7.5), (1.0, 7.0))


class UnstableGainError(ValueError):
    """Raised when A - B K has spectral radius >= 1."""


def spectral_radius(m) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(m, dtype=float)))))


def _as_matrix(m, name: str) -> np.ndarray:
    arr = np.asarray(m, dtype=float)
    if arr.shape != (2, 2) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be a finite 2x2 matrix, got {arr!r}")
    return arr


@dataclass(frozen=True)
class LinearSystem:
    """Plant (A, B), feedback gain K, tracking horizon and capture radius.

    capture_radius None means "reuse the environment's goal radius delta".
    The closed-loop matrix a_cl = A - B K is precomputed and the spectral
    radius check runs once here, so every LinearSystem in existence is stable.
    """

    a: np.ndarray
    b: np.ndarray
    k: np.ndarray
    horizon: int = 50
    capture_radius: float | None = None

    def __post_init__(self):
        a = _as_matrix(self.a, "A")
        b = _as_matrix(self.b, "B")
        k = _as_matrix(self.k, "K")
        if not (int(self.horizon) >= 1):
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.capture_radius is not None and not (float(self.capture_radius) > 0):
            raise ValueError(f"capture_radius must be positive, got {self.capture_radius}")
        a_cl = a - b @ k
        eigs = np.linalg.eigvals(a_cl)
        rho = float(np.max(np.abs(eigs)))
        if rho >= 1.0:
            raise UnstableGainError(
                "closed-loop matrix A - B*K is not a discrete-time contraction: "
                f"eigenvalues {np.sort_complex(eigs).tolist()} give spectral radius "
                f"{rho:.6g} >= 1; choose K so all eigenvalues lie strictly inside "
                "the unit circle"
            )
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "horizon", int(self.horizon))
        object.__setattr__(
            self, "capture_radius", None if self.capture_radius is None else float(self.capture_radius)
        )
        # Derived attribute, set past the frozen guard; not a dataclass field.
        object.__setattr__(self, "a_cl", a_cl)
        for arr in (a, b, k, a_cl):
            arr.setflags(write=False)


def closed_loop_step(sys: LinearSystem, e) -> np.ndarray:
    """One step of the error recursion: (A - B K) e."""
    return sys.a_cl @ np.asarray(e, dtype=float).reshape(2)


def _capture_radius(env: Environment, sys: LinearSystem) -> float:
    return env.delta if sys.capture_radius is None else sys.capture_radius


def reachable_batch(env: Environment, sys: LinearSystem, parents, targets) -> np.ndarray:
    """Vectorized reachability over paired (parent, target) rows.

    Each row simulates the closed-loop trajectory from its parent toward its
    target; rows are retired as soon as they collide (False) or capture
    (True). Rows whose targets are not in free space are False outright,
    which also covers annealed targets reprojected outside the bounds.
    """
    parents = np.asarray(parents, dtype=float).reshape(-1, 2)
    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    if parents.shape != targets.shape:
        raise ValueError("parents and targets must pair up")
    count = parents.shape[0]
    rc = _capture_radius(env, sys)
    result = np.zeros(count, dtype=bool)

    active = points_free(env, targets)
    err = parents - targets
    x_prev = parents.copy()

    captured = np.einsum("ij,ij->i", err, err) <= rc * rc
    result[active & captured] = True
    active &= ~captured

    a_cl_t = sys.a_cl.T
    for _ in range(sys.horizon):
        if not active.any():
            break
        err_next = err @ a_cl_t
        x_next = targets + err_next
        idx = np.flatnonzero(active)
        seg_ok = segments_free(env, x_prev[idx], x_next[idx])
        collided = idx[~seg_ok]
        active[collided] = False
        alive = idx[seg_ok]
        captured_rows = alive[
            np.einsum("ij,ij->i", err_next[alive], err_next[alive]) <= rc * rc
        ]
        result[captured_rows] = True
        active[captured_rows] = False
        err = err_next
        x_prev = x_next
    return result


def reachable(env: Environment, sys: LinearSystem, parent, target) -> bool:
    """Single-pair reachability; the oracle behind every planner admission."""
    return bool(reachable_batch(env, sys, np.asarray(parent), np.asarray(target))[0])


def default_system(horizon: int = 50, capture_radius: float | None = None) -> LinearSystem:
    return LinearSystem(a=DEFAULT_A, b=DEFAULT_B, k=DEFAULT_GAIN, horizon=horizon, capture_radius=capture_radius)


def system_from_config(cfg: dict) -> LinearSystem:
    """Build a LinearSystem from a config mapping with keys A, B, K[, horizon, capture_radius]."""
    try:
        a = cfg["A"]
        b = cfg["B"]
        k = cfg["K"]
    except KeyError as exc:
        raise ValueError(f"system config is missing key {exc}") from exc
    return LinearSystem(
        a=a,
        b=b,
        k=k,
        horizon=cfg.get("horizon", 50),
        capture_radius=cfg.get("capture_radius"),
    )


def load_system(path) -> LinearSystem:
    with open(path) as fh:
        return system_from_config(json.load(fh))
