"""Fixed-cell discretisations of the observation space.

Expectations over the next measurement are evaluated by summing over a
finite set of cells, each carrying a representative observation value and a
per-state cell probability. Discrete emissions get one exact cell per
symbol; Gaussian emissions get equal-width cells between the extreme means
(plus four standard deviations) and two tail cells, with cell probabilities
from the Gaussian CDF and representatives at cell midpoints.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ConfigMismatchError, ModelValidationError
from .hmm import ControlledHmm, DiscreteEmission, EmissionModel, ScalarGaussianEmission

DEFAULT_GAUSSIAN_CELLS = 60


@dataclass(frozen=True)
class MeasurementQuadrature:
    """Observation cells: representatives plus per-state cell probabilities.

    ``weights[i, c]`` is the probability that the observation falls in cell
    ``c`` given state ``i``; each row sums to one. ``exact`` marks the
    discrete case where the cells are the symbols themselves.
    """

    values: np.ndarray
    weights: np.ndarray
    exact: bool
    descriptor: dict

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if weights.ndim != 2 or weights.shape[1] != values.size:
            raise ModelValidationError(
                f"quadrature weights shape {weights.shape} does not match {values.size} cells"
            )
        rows = weights.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > 1e-10):
            i = int(np.argmax(np.abs(rows - 1.0)))
            raise ModelValidationError(
                f"quadrature weights for state {i} sum to {rows[i]!r}, expected 1"
            )
        values.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    @property
    def n_cells(self) -> int:
        return self.values.size

    @property
    def n_states(self) -> int:
        return self.weights.shape[0]


def exact_discrete_quadrature(emission: DiscreteEmission) -> MeasurementQuadrature:
    """One cell per observation symbol; expectations become exact sums."""
    return MeasurementQuadrature(
        values=np.arange(emission.n_obs, dtype=float),
        weights=emission.likelihood.copy(),
        exact=True,
        descriptor={"kind": "discrete", "n_obs": emission.n_obs},
    )


def gaussian_cell_quadrature(
    emission: ScalarGaussianEmission,
    n_cells: int = DEFAULT_GAUSSIAN_CELLS,
    span_sigmas: float = 4.0,
    tail_rep_sigmas: float = 4.5,
) -> MeasurementQuadrature:
    """Equal-width cells over [min mean - 4s, max mean + 4s] plus two tails.

    Cell probabilities come from the per-state Gaussian CDF, so each state's
    row sums to one including the tail cells.
    """
    if n_cells < 1:
        raise ModelValidationError(f"need at least one quadrature cell, got {n_cells}")
    means = emission.means
    sd = emission.std_dev
    lo = float(means.min() - span_sigmas * sd)
    hi = float(means.max() + span_sigmas * sd)
    edges = np.linspace(lo, hi, n_cells + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    values = np.concatenate(
        ([means.min() - tail_rep_sigmas * sd], mids, [means.max() + tail_rep_sigmas * sd])
    )
    # per-state CDF at the interior edges; tails absorb the remainder
    cdf = ndtr((edges[None, :] - means[:, None]) / sd)
    weights = np.empty((means.size, n_cells + 2))
    weights[:, 0] = cdf[:, 0]
    weights[:, 1:-1] = np.diff(cdf, axis=1)
    weights[:, -1] = 1.0 - cdf[:, -1]
    return MeasurementQuadrature(
        values=values,
        weights=weights,
        exact=False,
        descriptor={
            "kind": "gaussian",
            "n_cells": n_cells,
            "lo": lo,
            "hi": hi,
            "span_sigmas": span_sigmas,
            "tail_rep_sigmas": tail_rep_sigmas,
        },
    )


def quadrature_for(hmm: ControlledHmm, n_cells: int = DEFAULT_GAUSSIAN_CELLS) -> MeasurementQuadrature:
    """Default quadrature matching the model's emission type."""
    if isinstance(hmm.emissions, DiscreteEmission):
        return exact_discrete_quadrature(hmm.emissions)
    return gaussian_cell_quadrature(hmm.emissions, n_cells=n_cells)


def check_quadrature(quadrature: MeasurementQuadrature, emissions: EmissionModel) -> None:
    """Raise :class:`ConfigMismatchError` unless the quadrature fits the emissions."""
    if quadrature.n_states != emissions.n_states:
        raise ConfigMismatchError(
            f"quadrature covers {quadrature.n_states} states, emissions {emissions.n_states}"
        )
    if quadrature.exact and not isinstance(emissions, DiscreteEmission):
        raise ConfigMismatchError("exact quadrature requires discrete emissions")
    if quadrature.exact and quadrature.n_cells != emissions.n_obs:
        raise ConfigMismatchError(
            f"exact quadrature has {quadrature.n_cells} cells, emissions {emissions.n_obs} symbols"
        )
    if not quadrature.exact and isinstance(emissions, DiscreteEmission):
        raise ConfigMismatchError("discrete emissions require an exact quadrature")
