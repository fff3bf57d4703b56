"""Finite-state controlled hidden Markov models.

Beliefs (conditional state distributions), the Bayesian filter recursions
that propagate them, and the discrete entropy primitives built on top.
All operations are pure functions of immutable values.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (
    ConsistencyError,
    DegenerateMeasurementError,
    ModelValidationError,
)

_SUM_TOL = 1e-9


def _entropy(p: np.ndarray) -> float:
    """Shannon entropy in nats with the 0 ln 0 = 0 convention."""
    p = np.asarray(p, dtype=float)
    nz = p > 0.0
    return float(-np.sum(p[nz] * np.log(p[nz])))


@dataclass(frozen=True)
class Belief:
    """Probability vector over a finite state set.

    Entries are validated nonnegative and summing to one, then renormalised
    to machine precision so downstream arithmetic stays on the simplex.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ModelValidationError("belief must be a non-empty 1-d probability vector")
        if np.any(p < 0.0):
            i = int(np.argmin(p))
            raise ModelValidationError(f"belief entry {i} is negative ({p[i]!r})")
        s = float(p.sum())
        if abs(s - 1.0) > _SUM_TOL:
            raise ModelValidationError(f"belief entries sum to {s!r}, expected 1")
        p = p / s
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def n_states(self) -> int:
        return self.probs.size

    @staticmethod
    def uniform(n: int) -> "Belief":
        return Belief(np.full(n, 1.0 / n))

    @staticmethod
    def point_mass(state: int, n: int) -> "Belief":
        p = np.zeros(n)
        p[state] = 1.0
        return Belief(p)


@dataclass(frozen=True)
class DiscreteEmission:
    """Finite observation alphabet; ``likelihood[i, y] = p(y | x = i)``."""

    likelihood: np.ndarray

    def __post_init__(self):
        lik = np.asarray(self.likelihood, dtype=float)
        if lik.ndim != 2 or lik.size == 0:
            raise ModelValidationError("discrete emission table must be 2-d (n_states x n_obs)")
        bad = np.argwhere(lik < 0.0)
        if bad.size:
            i, y = bad[0]
            raise ModelValidationError(
                f"emission likelihood[{i}][{y}] is negative ({lik[i, y]!r})"
            )
        rows = lik.sum(axis=1)
        off = np.abs(rows - 1.0)
        if np.any(off > _SUM_TOL):
            i = int(np.argmax(off))
            raise ModelValidationError(
                f"emission row {i} sums to {rows[i]!r}, expected 1"
            )
        lik = lik / rows[:, None]
        lik.setflags(write=False)
        object.__setattr__(self, "likelihood", lik)

    @property
    def n_states(self) -> int:
        return self.likelihood.shape[0]

    @property
    def n_obs(self) -> int:
        return self.likelihood.shape[1]

    def likelihood_vector(self, y) -> np.ndarray:
        """Per-state likelihood of the observed symbol ``y``."""
        y = int(y)
        if not 0 <= y < self.n_obs:
            raise ModelValidationError(f"observation symbol {y} outside [0, {self.n_obs})")
        return self.likelihood[:, y]


@dataclass(frozen=True)
class ScalarGaussianEmission:
    """Real-valued observation, Gaussian about a per-state mean with shared std."""

    means: np.ndarray
    std_dev: float

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        if means.ndim != 1 or means.size == 0:
            raise ModelValidationError("emission means must be a non-empty 1-d vector")
        if not self.std_dev > 0.0:
            raise ModelValidationError(f"emission std_dev must be positive, got {self.std_dev!r}")
        means.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "std_dev", float(self.std_dev))

    @property
    def n_states(self) -> int:
        return self.means.size

    def likelihood_vector(self, y) -> np.ndarray:
        z = (float(y) - self.means) / self.std_dev
        return np.exp(-0.5 * z * z) / (self.std_dev * math.sqrt(2.0 * math.pi))


EmissionModel = Union[DiscreteEmission, ScalarGaussianEmission]


@dataclass(frozen=True)
class ControlledHmm:
    """Per-control column-stochastic transition matrices plus an emission model.

    ``transitions[u][i, j]`` is the probability of moving to state ``i`` from
    state ``j`` under control ``u``.
    """

    transitions: np.ndarray
    emissions: EmissionModel
    initial: Belief

    def __post_init__(self):
        trans = np.asarray(self.transitions, dtype=float)
        if trans.ndim != 3 or trans.shape[1] != trans.shape[2]:
            raise ModelValidationError(
                f"transitions must have shape (n_controls, n, n), got {trans.shape}"
            )
        bad = np.argwhere(trans < 0.0)
        if bad.size:
            u, i, j = bad[0]
            raise ModelValidationError(
                f"transition entry A({u})[{i}][{j}] is negative ({trans[u, i, j]!r})"
            )
        cols = trans.sum(axis=1)
        off = np.abs(cols - 1.0)
        if np.any(off > _SUM_TOL):
            u, j = np.unravel_index(int(np.argmax(off)), off.shape)
            raise ModelValidationError(
                f"column {j} of A({u}) sums to {cols[u, j]!r}, expected 1"
            )
        trans = trans / cols[:, None, :]
        n = trans.shape[1]
        if self.emissions.n_states != n:
            raise ModelValidationError(
                f"emission model covers {self.emissions.n_states} states, transitions {n}"
            )
        if self.initial.n_states != n:
            raise ModelValidationError(
                f"initial belief covers {self.initial.n_states} states, transitions {n}"
            )
        trans.setflags(write=False)
        object.__setattr__(self, "transitions", trans)

    @property
    def n_states(self) -> int:
        return self.transitions.shape[1]

    @property
    def n_controls(self) -> int:
        return self.transitions.shape[0]

    def transition(self, u: int) -> np.ndarray:
        if not 0 <= int(u) < self.n_controls:
            raise ModelValidationError(f"control index {u} outside [0, {self.n_controls})")
        return self.transitions[int(u)]


def predict_joint(hmm: ControlledHmm, belief: Belief, u: int) -> np.ndarray:
    """Joint table over (next state, current state) after applying control ``u``.

    Entry ``[i, j]`` equals ``A(u)[i, j] * belief[j]``; the table sums to one.
    """
    return hmm.transition(u) * belief.probs[None, :]


def predict_marginal(hmm: ControlledHmm, belief: Belief, u: int) -> Belief:
    """One-step predicted belief: the joint marginalised over the current state."""
    return Belief(hmm.transition(u) @ belief.probs)


def measurement_update(hmm: ControlledHmm, belief: Belief, y) -> Belief:
    """Bayes update of a belief with an observation, without a prediction step."""
    lik = hmm.emissions.likelihood_vector(y)
    unnorm = lik * belief.probs
    s = float(unnorm.sum())
    if s <= 0.0:
        raise DegenerateMeasurementError(
            f"all state likelihoods are zero at observation {y!r}"
        )
    return Belief(unnorm / s)


def filter_update(hmm: ControlledHmm, belief: Belief, u: int, y) -> Belief:
    """One full Bayesian filter step: predict with ``u``, then condition on ``y``."""
    pred = hmm.transition(u) @ belief.probs
    lik = hmm.emissions.likelihood_vector(y)
    unnorm = lik * pred
    s = float(unnorm.sum())
    if s <= 0.0:
        raise DegenerateMeasurementError(
            f"all state likelihoods are zero at observation {y!r} under control {u}"
        )
    return Belief(unnorm / s)


def measurement_likelihood(hmm: ControlledHmm, belief: Belief, u: int, y) -> float:
    """Density (or mass) of the next observation given the belief and control."""
    pred = hmm.transition(u) @ belief.probs
    return float(hmm.emissions.likelihood_vector(y) @ pred)


def discrete_entropy(belief: Belief) -> float:
    """Entropy of a belief in nats; lies in [0, ln n]."""
    return _entropy(belief.probs)


def conditional_entropy_of_joint(joint: np.ndarray, prev: Belief) -> float:
    """Entropy of the next state given the current one, from a joint table.

    ``joint[i, j]`` must marginalise (over ``i``) to ``prev``. Equals the
    belief-weighted entropy of the transition columns when the joint came
    from :func:`predict_joint`.
    """
    joint = np.asarray(joint, dtype=float)
    marg = joint.sum(axis=0)
    if np.max(np.abs(marg - prev.probs)) > 1e-10:
        raise ConsistencyError("joint table does not marginalise to the supplied belief")
    nz = joint > 0.0
    cols = np.broadcast_to(prev.probs[None, :], joint.shape)
    return float(-np.sum(joint[nz] * np.log(joint[nz] / cols[nz])))


# --- JSON serialisation -------------------------------------------------


def hmm_to_json(hmm: ControlledHmm) -> dict:
    """Plain-JSON document for a model; inverse of :func:`hmm_from_json`."""
    if isinstance(hmm.emissions, DiscreteEmission):
        emissions = {"type": "discrete", "likelihood": hmm.emissions.likelihood.tolist()}
    else:
        emissions = {
            "type": "scalar_gaussian",
            "means": hmm.emissions.means.tolist(),
            "std_dev": hmm.emissions.std_dev,
        }
    return {
        "n_states": hmm.n_states,
        "n_controls": hmm.n_controls,
        "transitions": [a.tolist() for a in hmm.transitions],
        "emissions": emissions,
        "initial": hmm.initial.probs.tolist(),
    }


def hmm_from_json(doc: dict) -> ControlledHmm:
    """Build and validate a model from a JSON document.

    Structural violations raise :class:`ModelValidationError` naming the
    first offending entry.
    """
    try:
        transitions = np.asarray(doc["transitions"], dtype=float)
        initial = np.asarray(doc["initial"], dtype=float)
        edoc = doc["emissions"]
        etype = edoc["type"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelValidationError(f"malformed model document: {exc}") from exc
    if etype == "discrete":
        emissions: EmissionModel = DiscreteEmission(np.asarray(edoc["likelihood"], dtype=float))
    elif etype == "scalar_gaussian":
        emissions = ScalarGaussianEmission(
            np.asarray(edoc["means"], dtype=float), float(edoc["std_dev"])
        )
    else:
        raise ModelValidationError(f"unknown emission type {etype!r}")
    hmm = ControlledHmm(transitions, emissions, Belief(initial))
    for key in ("n_states", "n_controls"):
        if key in doc and int(doc[key]) != getattr(hmm, key):
            raise ModelValidationError(
                f"declared {key}={doc[key]} disagrees with matrices ({getattr(hmm, key)})"
            )
    return hmm


def load_hmm(path) -> ControlledHmm:
    with open(path) as fh:
        return hmm_from_json(json.load(fh))


def save_hmm(hmm: ControlledHmm, path) -> None:
    with open(path, "w") as fh:
        json.dump(hmm_to_json(hmm), fh, indent=2)
