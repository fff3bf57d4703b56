"""Shared fixtures and reference implementations used across the tests.

The brute-force dynamic-programming reference here enumerates every
measurement-feedback control assignment on the projected belief chain and
is deliberately independent of the solver's backward-induction code.
"""
import itertools

import numpy as np
import pytest

from covertctl import (
    Belief,
    ControlledHmm,
    DiscreteEmission,
    ScalarGaussianEmission,
    build_grid,
    filter_update,
    project,
)


@pytest.fixture
def two_state_hmm():
    """Small two-state, two-control, two-symbol model with full support."""
    transitions = np.array(
        [
            [[0.9, 0.3], [0.1, 0.7]],
            [[0.4, 0.6], [0.6, 0.4]],
        ]
    )
    emissions = DiscreteEmission(np.array([[0.8, 0.2], [0.25, 0.75]]))
    return ControlledHmm(transitions, emissions, Belief(np.array([0.6, 0.4])))


@pytest.fixture
def three_state_hmm():
    transitions = np.array(
        [
            [[0.8, 0.8, 0.1], [0.1, 0.1, 0.8], [0.1, 0.1, 0.1]],
            [[0.1, 0.1, 0.1], [0.8, 0.1, 0.1], [0.1, 0.8, 0.8]],
        ]
    )
    emissions = DiscreteEmission(
        np.array([[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]])
    )
    return ControlledHmm(transitions, emissions, Belief.uniform(3))


@pytest.fixture
def gaussian_hmm():
    transitions = np.array(
        [
            [[0.9, 0.2], [0.1, 0.8]],
            [[0.5, 0.5], [0.5, 0.5]],
        ]
    )
    emissions = ScalarGaussianEmission(np.array([0.0, 2.0]), 1.0)
    return ControlledHmm(transitions, emissions, Belief(np.array([0.5, 0.5])))


def projected_chain(hmm, grid, quadrature):
    """Transition data of the finite belief chain induced by projection.

    Returns ``(cell_probs, successors)`` with shapes (U, N, C): the
    probability of each observation cell from each grid belief under each
    control, and the grid index of the projected filter successor. Built
    with scalar operations only.
    """
    n_points, n_controls = grid.n_points, hmm.n_controls
    n_cells = quadrature.n_cells
    cell_probs = np.zeros((n_controls, n_points, n_cells))
    successors = np.zeros((n_controls, n_points, n_cells), dtype=int)
    for k in range(n_points):
        belief = grid.belief(k)
        for u in range(n_controls):
            pred = hmm.transition(u) @ belief.probs
            for c in range(n_cells):
                p = float(pred @ quadrature.weights[:, c])
                cell_probs[u, k, c] = p
                if p > 0.0:
                    post = filter_update(hmm, belief, u, quadrature.values[c])
                    successors[u, k, c] = project(grid, post)
    return cell_probs, successors


def brute_force_grid_values(hmm, grid, quadrature, horizon, reward_table):
    """Optimal values on the projected chain by exhaustive policy enumeration.

    Considers every assignment of a control to every (stage, grid point)
    pair and evaluates each by direct expectation, so it shares nothing
    with backward induction beyond the chain itself.
    """
    cell_probs, successors = projected_chain(hmm, grid, quadrature)
    n_points, n_controls = grid.n_points, hmm.n_controls

    def policy_value(assignment, start):
        # assignment: (horizon, n_points) control table
        dist = np.zeros(n_points)
        dist[start] = 1.0
        total = 0.0
        for t in range(horizon):
            for k in range(n_points):
                if dist[k] == 0.0:
                    continue
                total += dist[k] * reward_table[k, assignment[t, k]]
            new = np.zeros(n_points)
            for k in range(n_points):
                if dist[k] == 0.0:
                    continue
                u = assignment[t, k]
                for c in range(cell_probs.shape[2]):
                    new[successors[u, k, c]] += dist[k] * cell_probs[u, k, c]
            dist = new
        return total

    best = np.full(n_points, -np.inf)
    flat_size = horizon * n_points
    for combo in itertools.product(range(n_controls), repeat=flat_size):
        assignment = np.array(combo, dtype=int).reshape(horizon, n_points)
        for start in range(n_points):
            best[start] = max(best[start], policy_value(assignment, start))
    return best


@pytest.fixture
def coarse_grid():
    return build_grid(2, 0.25)
