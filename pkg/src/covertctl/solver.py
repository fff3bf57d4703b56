"""Belief-simplex grid dynamic programming.

The continuous belief process is approximated by a finite Markov chain on a
lattice over the probability simplex: filter successors are projected to
their nearest grid point and value functions are computed by backward
induction with observation expectations taken over quadrature cells.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import ConfigMismatchError, ModelValidationError, SizeGuardError
from .hmm import Belief, ControlledHmm
from .quadrature import MeasurementQuadrature, check_quadrature

DEFAULT_GRID_GUARD = 2_000_000

RewardSpec = Union[Callable[[Belief, int], float], np.ndarray]


@dataclass(frozen=True)
class SimplexGrid:
    """Lattice of beliefs whose entries are multiples of ``resolution``.

    Points are ordered lexicographically descending (first coordinate
    largest first); index ties elsewhere break toward this order.
    """

    n_states: int
    resolution: float
    points: np.ndarray

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def belief(self, index: int) -> Belief:
        return Belief(self.points[index])


def simplex_point_count(n_states: int, resolution: float) -> int:
    """Number of lattice points without materialising them."""
    m = _steps(resolution)
    return math.comb(m + n_states - 1, n_states - 1)


def _steps(resolution: float) -> int:
    if resolution <= 0:
        raise ModelValidationError(f"resolution must be positive, got {resolution!r}")
    m = round(1.0 / resolution)
    if abs(m * resolution - 1.0) > 1e-9 or m < 1:
        raise ModelValidationError(
            f"1/resolution must be a positive integer, got resolution {resolution!r}"
        )
    return m


def build_grid(
    n_states: int, resolution: float, max_points: int = DEFAULT_GRID_GUARD
) -> SimplexGrid:
    """Enumerate the full lattice simplex at the requested resolution."""
    if n_states < 1:
        raise ModelValidationError(f"n_states must be positive, got {n_states}")
    m = _steps(resolution)
    count = simplex_point_count(n_states, resolution)
    if count > max_points:
        raise SizeGuardError(
            f"grid would contain {count} points, guard is {max_points}"
        )
    counts = np.array(list(_compositions(m, n_states)), dtype=float)
    points = counts / m
    points.setflags(write=False)
    return SimplexGrid(n_states=n_states, resolution=resolution, points=points)


def _compositions(total: int, parts: int):
    """All nonnegative integer compositions, lexicographically descending."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def project(grid: SimplexGrid, belief: Belief) -> int:
    """Index of the nearest grid point in Euclidean distance; ties to lowest index."""
    d2 = np.sum((grid.points - belief.probs[None, :]) ** 2, axis=1)
    return int(np.argmin(d2))


def _project_batch(grid: SimplexGrid, queries: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Nearest grid indices for a (M, n) batch of beliefs.

    Uses the expanded distance form with BLAS; the grid-point norm term is
    shared across queries so only the cross term is recomputed per chunk.
    """
    g = grid.points
    gg = np.einsum("ij,ij->i", g, g)
    out = np.empty(queries.shape[0], dtype=np.int64)
    for start in range(0, queries.shape[0], chunk):
        q = queries[start : start + chunk]
        scores = gg[None, :] - 2.0 * (q @ g.T)
        out[start : start + chunk] = np.argmin(scores, axis=1)
    return out


@dataclass(frozen=True)
class ValueTable:
    """Stage values on the grid; ``values[t, k]`` with the terminal row zero."""

    values: np.ndarray
    horizon: int


@dataclass(frozen=True)
class GridPolicy:
    """Per-stage control choice at every grid point; ``controls[t, k]``."""

    controls: np.ndarray


def backward_induction(
    hmm: ControlledHmm,
    grid: SimplexGrid,
    quadrature: MeasurementQuadrature,
    horizon: int,
    reward: RewardSpec,
):
    """Finite-horizon backward induction on the projected belief chain.

    ``reward`` is either a callable ``(belief, control) -> float`` or a
    pretabulated (n_points, n_controls) array. Returns ``(ValueTable,
    GridPolicy)``; control and projection ties break toward the lowest
    index. Successor dynamics are time-invariant, so filter successors and
    cell probabilities are computed once and reused at every stage.
    """
    check_quadrature(quadrature, hmm.emissions)
    if grid.n_states != hmm.n_states:
        raise ConfigMismatchError(
            f"grid covers {grid.n_states} states, model {hmm.n_states}"
        )
    if horizon < 0:
        raise ModelValidationError(f"horizon must be nonnegative, got {horizon}")

    n_points, n_controls = grid.n_points, hmm.n_controls
    reward_table = _reward_table(reward, grid, n_controls)

    cell_probs = np.empty((n_controls, n_points, quadrature.n_cells))
    successors = np.zeros((n_controls, n_points, quadrature.n_cells), dtype=np.int64)
    for u in range(n_controls):
        pred = grid.points @ hmm.transitions[u].T
        cell_probs[u] = pred @ quadrature.weights
        for c in range(quadrature.n_cells):
            lik = hmm.emissions.likelihood_vector(quadrature.values[c])
            un = pred * lik[None, :]
            s = un.sum(axis=1)
            ok = s > 0.0
            post = np.where(ok[:, None], un / np.where(ok[:, None], s[:, None], 1.0), 0.0)
            idx = _project_batch(grid, post)
            # zero-probability cells contribute nothing; point them anywhere valid
            successors[u, :, c] = np.where(ok, idx, 0)
            cell_probs[u, :, c] = np.where(ok, cell_probs[u, :, c], 0.0)

    values = np.zeros((horizon + 1, n_points))
    controls = np.zeros((max(horizon, 0), n_points), dtype=np.int64)
    for t in range(horizon - 1, -1, -1):
        q = np.empty((n_points, n_controls))
        for u in range(n_controls):
            future = np.sum(cell_probs[u] * values[t + 1][successors[u]], axis=1)
            q[:, u] = reward_table[:, u] + future
        controls[t] = np.argmax(q, axis=1)
        values[t] = q[np.arange(n_points), controls[t]]
    return ValueTable(values=values, horizon=horizon), GridPolicy(controls=controls)


def _reward_table(reward: RewardSpec, grid: SimplexGrid, n_controls: int) -> np.ndarray:
    if isinstance(reward, np.ndarray):
        if reward.shape != (grid.n_points, n_controls):
            raise ConfigMismatchError(
                f"reward table shape {reward.shape} does not match "
                f"({grid.n_points}, {n_controls})"
            )
        return reward
    table = np.empty((grid.n_points, n_controls))
    for k in range(grid.n_points):
        belief = grid.belief(k)
        for u in range(n_controls):
            table[k, u] = reward(belief, u)
    return table


def policy_lookup(policy: GridPolicy, grid: SimplexGrid, belief: Belief, t: int) -> int:
    """Stored control at the nearest grid point for stage ``t``."""
    if not 0 <= t < policy.controls.shape[0]:
        raise IndexError(
            f"stage {t} outside policy horizon {policy.controls.shape[0]}"
        )
    return int(policy.controls[t, project(grid, belief)])


# --- policy artifacts ---------------------------------------------------


@dataclass
class PolicyArtifact:
    """Solved value table and policy plus the header identifying the solve."""

    header: dict
    values: np.ndarray
    controls: np.ndarray
    _grid: Optional[SimplexGrid] = field(default=None, repr=False, compare=False)

    @property
    def grid(self) -> SimplexGrid:
        if self._grid is None:
            self._grid = build_grid(self.header["n_states"], self.header["resolution"])
        return self._grid

    @property
    def horizon(self) -> int:
        return int(self.header["horizon"])

    def value_at(self, belief: Belief) -> float:
        return float(self.values[0, project(self.grid, belief)])

    def control(self, belief: Belief, t: int) -> int:
        return policy_lookup(GridPolicy(self.controls), self.grid, belief, t)

    def save(self, path) -> None:
        doc = {
            "header": self.header,
            "values": self.values.tolist(),
            "controls": self.controls.tolist(),
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)

    @staticmethod
    def load(path) -> "PolicyArtifact":
        with open(path) as fh:
            doc = json.load(fh)
        try:
            header = doc["header"]
            values = np.asarray(doc["values"], dtype=float)
            controls = np.asarray(doc["controls"], dtype=np.int64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelValidationError(f"malformed policy artifact: {exc}") from exc
        horizon = int(header["horizon"])
        n_points = simplex_point_count(header["n_states"], header["resolution"])
        if values.shape != (horizon + 1, n_points) or controls.shape != (horizon, n_points):
            raise ModelValidationError(
                f"artifact tables {values.shape}/{controls.shape} do not match header "
                f"horizon {horizon} and grid size {n_points}"
            )
        if np.any(controls < 0) or np.any(controls >= int(header["n_controls"])):
            raise ModelValidationError("artifact contains out-of-range control indices")
        return PolicyArtifact(header=header, values=values, controls=controls)


def make_artifact(
    hmm: ControlledHmm,
    grid: SimplexGrid,
    quadrature: MeasurementQuadrature,
    horizon: int,
    reward_kind: str,
    gamma: float,
    value_table: ValueTable,
    policy: GridPolicy,
) -> PolicyArtifact:
    header = {
        "n_states": hmm.n_states,
        "n_controls": hmm.n_controls,
        "resolution": grid.resolution,
        "horizon": horizon,
        "reward_kind": reward_kind,
        "gamma": gamma,
        "quadrature": quadrature.descriptor,
    }
    return PolicyArtifact(
        header=header, values=value_table.values, controls=policy.controls, _grid=grid
    )
