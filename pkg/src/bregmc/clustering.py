"""Bregman k-means variants over a dually flat space.

All variants run Lloyd iterations with deterministic, seeded
initialization (k-means++ by default) and deterministic tie-breaking
(lowest cluster index wins), so a run is a pure function of
(space, points, config).

* right-sided: assign to ``argmin_c B(x : center_c)``; the optimal
  center is the arithmetic mean of the member parameters.
* left-sided: assign to ``argmin_c B(center_c : x)``; the optimal
  center is the gradient-mean pulled back through the inverse gradient
  map (numerical inversion).
* mixed: one (left, right) center pair per cluster, assignment by the
  weighted two-sided divergence, both center updates as above.
* Jeffreys-via-skew: k-means under the symmetrized skew-Jensen
  surrogate of the Jeffreys divergence, which needs no gradients;
  centers are arithmetic means (exact Jeffreys centroids are out of
  scope).

Empty clusters are repaired by reseeding them with the point farthest
from its current center.  Costs are tracked per iteration; for the
sided and mixed variants Lloyd steps never increase the cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NoSolutionError
from .geometry import DuallyFlatSpace

__all__ = [
    "ClusterConfig",
    "ClusterResult",
    "right_sided_kmeans",
    "left_sided_kmeans",
    "mixed_kmeans",
    "jeffreys_kmeans_via_skew",
]


@dataclass(frozen=True)
class ClusterConfig:
    """Settings shared by every k-means variant."""

    k: int
    variant: str = "mixed"
    seeding: str = "kmeans++"
    max_iters: int = 100
    tol: float = 1e-10
    seed: int = 0
    mixed_weights: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.variant not in ("right", "left", "mixed"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.seeding not in ("kmeans++", "forgy"):
            raise ValueError(f"unknown seeding {self.seeding!r}")
        if self.max_iters < 1 or self.tol < 0:
            raise ValueError("max_iters must be >= 1 and tol >= 0")
        w = self.mixed_weights
        if len(w) != 2 or min(w) < 0 or sum(w) <= 0:
            raise ValueError("mixed_weights must be two nonnegative numbers")


@dataclass
class ClusterResult:
    """Outcome of a k-means run.

    ``centers`` is a (k, D) array for the sided variants and a
    ``(left, right)`` pair of (k, D) arrays for the mixed variant.
    ``cost_history`` holds the cost after each center update and is
    non-increasing for the sided and mixed variants.
    """

    assignments: np.ndarray
    centers: np.ndarray | tuple[np.ndarray, np.ndarray]
    cost_history: list[float] = field(default_factory=list)
    iterations: int = 0

    def to_dict(self) -> dict:
        if isinstance(self.centers, tuple):
            centers = {"left": self.centers[0].tolist(),
                       "right": self.centers[1].tolist()}
        else:
            centers = self.centers.tolist()
        return {"assignments": self.assignments.tolist(), "centers": centers,
                "cost_history": list(self.cost_history),
                "iterations": self.iterations}


def _as_points(space: DuallyFlatSpace, points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, float))
    if pts.size == 0:
        raise ValueError("empty point set")
    if pts.shape[1] != space.dim:
        raise ValueError(f"points must have {space.dim} coordinates, "
                         f"got {pts.shape[1]}")
    for p in pts:
        if not space.generator.domain.contains(p):
            raise ValueError(f"point {p!r} outside the generator domain")
    return pts


def _seed_centers(points: np.ndarray, k: int, rng: np.random.Generator,
                  seeding: str, div: Callable[[np.ndarray, np.ndarray], float],
                  ) -> np.ndarray:
    """Pick k seed points (indices into ``points``).

    k-means++ draws each next seed with probability proportional to its
    divergence to the closest already-chosen seed; degenerate all-zero
    weights (duplicated points) fall back to a uniform draw over the
    not-yet-chosen indices.
    """
    n = len(points)
    if seeding == "forgy":
        return points[rng.choice(n, size=k, replace=False)].copy()
    chosen = [int(rng.integers(n))]
    d = np.array([div(x, points[chosen[0]]) for x in points])
    while len(chosen) < k:
        total = d.sum()
        if total > 0:
            probs = d / total
            idx = int(rng.choice(n, p=probs))
        else:
            pool = np.setdiff1d(np.arange(n), chosen)
            idx = int(pool[rng.integers(len(pool))])
        chosen.append(idx)
        d = np.minimum(d, [div(x, points[idx]) for x in points])
    return points[chosen].copy()


class _Variant:
    """Divergence/update pair defining one k-means flavor.

    ``center_state`` is a (k, D) array for single-center variants and a
    pair of such arrays for the mixed variant; ``seed_state`` lifts the
    seed points to that representation.
    """

    def __init__(self, divergence, update, seed_state):
        self.divergence = divergence      # (x, state, c) -> float
        self.update = update              # (points, members, state, c) -> row
        self.seed_state = seed_state      # (k, D) seeds -> center state
        self.seed_div = None              # (x, y) points -> float, for seeding


def _mean_update(points, members, state, c):
    return points[members].mean(axis=0)


def _make_left_update(space: DuallyFlatSpace, grads: np.ndarray):
    def update(points, members, state, c):
        target = grads[members].mean(axis=0)
        try:
            theta = space.primal_coordinates(target,
                                             start=points[members].mean(axis=0))
        except NoSolutionError as err:
            raise NoSolutionError(
                f"left-sided center update failed for cluster {c}: "
                f"mean gradient {target!r} is not attainable",
                target=target, last_point=err.last_point,
                residual=err.residual) from err
        return space.generator.domain.project(theta, space.boundary_margin)
    return update


def _lloyd(space: DuallyFlatSpace, points: np.ndarray, cfg: ClusterConfig,
           variant: _Variant) -> ClusterResult:
    n = len(points)
    if cfg.k > n:
        raise ValueError(f"k = {cfg.k} exceeds the number of points {n}")
    rng = np.random.default_rng(cfg.seed)
    seeds = _seed_centers(points, cfg.k, rng, cfg.seeding, variant.seed_div)
    state = variant.seed_state(seeds)

    assignments = np.zeros(n, dtype=int)
    prev_assign = None
    cost_history: list[float] = []
    iterations = 0
    for iterations in range(1, cfg.max_iters + 1):
        # assignment step (ties go to the lowest cluster index)
        dmat = np.array([[variant.divergence(x, state, c)
                          for c in range(cfg.k)] for x in points])
        assignments = dmat.argmin(axis=1)
        # repair empty clusters with the farthest point that can be spared
        for c in range(cfg.k):
            if not np.any(assignments == c):
                counts = np.bincount(assignments, minlength=cfg.k)
                movable = counts[assignments] > 1
                current = np.where(movable, dmat[np.arange(n), assignments],
                                   -np.inf)
                assignments[int(np.argmax(current))] = c
        # center update
        state = _update_state(points, assignments, cfg.k, state, variant)
        dmat = np.array([[variant.divergence(x, state, c)
                          for c in range(cfg.k)] for x in points])
        cost = float(dmat[np.arange(n), assignments].sum())
        cost_history.append(cost)
        if prev_assign is not None and np.array_equal(assignments, prev_assign):
            break
        if len(cost_history) >= 2 and abs(cost_history[-2] - cost) < cfg.tol:
            break
        prev_assign = assignments.copy()
    return ClusterResult(assignments, state, cost_history, iterations)


def _update_state(points, assignments, k, state, variant):
    if isinstance(state, tuple):
        left, right = state[0].copy(), state[1].copy()
        for c in range(k):
            members = assignments == c
            newl, newr = variant.update(points, members, state, c)
            left[c], right[c] = newl, newr
        return (left, right)
    new = state.copy()
    for c in range(k):
        members = assignments == c
        new[c] = variant.update(points, members, state, c)
    return new


def right_sided_kmeans(space: DuallyFlatSpace, points,
                       cfg: ClusterConfig) -> ClusterResult:
    """Lloyd iterations under ``B(point : center)``; centers are the
    arithmetic means of their members."""
    pts = _as_points(space, points)
    v = _Variant(
        divergence=lambda x, state, c: space.bregman_divergence(x, state[c]),
        update=_mean_update,
        seed_state=lambda seeds: seeds)
    v.seed_div = lambda x, y: space.bregman_divergence(x, y)
    return _lloyd(space, pts, cfg, v)


def left_sided_kmeans(space: DuallyFlatSpace, points,
                      cfg: ClusterConfig) -> ClusterResult:
    """Lloyd iterations under ``B(center : point)``; the center of a
    cluster is the inverse gradient map applied to the mean of the
    members' gradients.  Inversion failures abort the run with the
    offending cluster's mean gradient attached."""
    pts = _as_points(space, points)
    grads = np.stack([space.gradient(p) for p in pts])
    v = _Variant(
        divergence=lambda x, state, c: space.bregman_divergence(state[c], x),
        update=_make_left_update(space, grads),
        seed_state=lambda seeds: seeds)
    v.seed_div = lambda x, y: space.bregman_divergence(y, x)
    return _lloyd(space, pts, cfg, v)


def mixed_kmeans(space: DuallyFlatSpace, points,
                 cfg: ClusterConfig) -> ClusterResult:
    """Two centers per cluster: assignment by
    ``w_l B(left_c : x) + w_r B(x : right_c)`` (weights default to 1/2),
    right centers updated as arithmetic means, left centers through the
    inverse gradient map.  Seeding evaluates the mixed divergence with
    the candidate point serving as both centers, so no centroid is ever
    computed during initialization."""
    pts = _as_points(space, points)
    wl, wr = cfg.mixed_weights
    s = wl + wr
    wl, wr = wl / s, wr / s
    grads = np.stack([space.gradient(p) for p in pts])
    left_update = _make_left_update(space, grads)

    def mixed_div(x, state, c):
        left, right = state
        return (wl * space.bregman_divergence(left[c], x)
                + wr * space.bregman_divergence(x, right[c]))

    def update(points_, members, state, c):
        return (left_update(points_, members, state[0], c),
                _mean_update(points_, members, state[1], c))

    v = _Variant(divergence=mixed_div, update=update,
                 seed_state=lambda seeds: (seeds.copy(), seeds.copy()))
    v.seed_div = lambda x, y: (wl * space.bregman_divergence(y, x)
                               + wr * space.bregman_divergence(x, y))
    return _lloyd(space, pts, cfg, v)


def jeffreys_kmeans_via_skew(space: DuallyFlatSpace, points,
                             cfg: ClusterConfig,
                             alpha: float = 1e-3) -> ClusterResult:
    """k-means under the skew-Jensen surrogate of the Jeffreys divergence
    ``J^a/a + J^{1-a}/(1-a)`` (gradient-free); centers are arithmetic
    means in primal coordinates."""
    if not 0.0 < alpha <= 0.5:
        raise ValueError(f"alpha must lie in (0, 1/2], got {alpha}")
    pts = _as_points(space, points)

    def surrogate(x, y):
        return space.jeffreys(x, y, mode="skew", alpha=alpha)

    v = _Variant(
        divergence=lambda x, state, c: surrogate(x, state[c]),
        update=_mean_update,
        seed_state=lambda seeds: seeds)
    v.seed_div = surrogate
    return _lloyd(space, pts, cfg, v)
