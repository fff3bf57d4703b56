"""Entropy stage rewards, the additive trajectory-entropy objective, and
the fixed-interval smoother with its enumeration oracles.

The central identity: the joint entropy of the state trajectory given all
measurements and controls equals the expected sum of per-step terms
``h_post - h_pred + h_trans`` computed from Bayesian filter quantities.
Everything here is a pure function; the enumeration routines are oracles
used for verification and stay independent of the recursive paths they
check.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import ModelValidationError, SizeGuardError
from .hmm import (
    Belief,
    ControlledHmm,
    DiscreteEmission,
    _entropy,
    conditional_entropy_of_joint,
    discrete_entropy,
    filter_update,
    measurement_update,
    predict_joint,
    predict_marginal,
)
from .quadrature import MeasurementQuadrature, check_quadrature

ENUMERATION_GUARD = 10_000_000

CostFunction = Callable[[int, int], float]


@dataclass(frozen=True)
class StageRewardBreakdown:
    """The three entropy terms of one realised stage reward (all in nats)."""

    h_post: float
    h_pred: float
    h_trans: float

    @property
    def r_tilde(self) -> float:
        return self.h_post - self.h_pred + self.h_trans


def stage_reward_tilde(
    hmm: ControlledHmm, prev_belief: Belief, u: int, y
) -> StageRewardBreakdown:
    """Realised stage reward for one (belief, control, observation) triple."""
    joint = predict_joint(hmm, prev_belief, u)
    pred = predict_marginal(hmm, prev_belief, u)
    post = filter_update(hmm, prev_belief, u, y)
    return StageRewardBreakdown(
        h_post=discrete_entropy(post),
        h_pred=discrete_entropy(pred),
        h_trans=conditional_entropy_of_joint(joint, prev_belief),
    )


def expected_stage_reward(
    hmm: ControlledHmm,
    belief: Belief,
    u: int,
    quadrature: MeasurementQuadrature,
    cost: Optional[CostFunction] = None,
    gamma: float = 0.0,
) -> float:
    """Expectation of the stage reward over the next observation, minus cost.

    The observation expectation runs over the quadrature cells (exact for
    discrete emissions); the cost expectation runs over the current belief.
    """
    check_quadrature(quadrature, hmm.emissions)
    pred = predict_marginal(hmm, belief, u)
    h_pred = discrete_entropy(pred)
    h_trans = conditional_entropy_of_joint(predict_joint(hmm, belief, u), belief)
    cell_probs = pred.probs @ quadrature.weights
    e_h_post = 0.0
    for c in range(quadrature.n_cells):
        if cell_probs[c] <= 0.0:
            continue
        post = filter_update(hmm, belief, u, quadrature.values[c])
        e_h_post += cell_probs[c] * discrete_entropy(post)
    value = e_h_post - h_pred + h_trans
    if gamma != 0.0 and cost is not None:
        value -= gamma * sum(
            belief.probs[i] * cost(i, u) for i in range(hmm.n_states)
        )
    return value


def min_info_gain_stage_reward(
    hmm: ControlledHmm, belief: Belief, u: int, quadrature: MeasurementQuadrature
) -> float:
    """Expected stage reward with the transition-entropy term dropped.

    This is the comparison objective that only discourages the information
    the next measurement provides about the state.
    """
    check_quadrature(quadrature, hmm.emissions)
    pred = predict_marginal(hmm, belief, u)
    h_pred = discrete_entropy(pred)
    cell_probs = pred.probs @ quadrature.weights
    e_h_post = 0.0
    for c in range(quadrature.n_cells):
        if cell_probs[c] <= 0.0:
            continue
        post = filter_update(hmm, belief, u, quadrature.values[c])
        e_h_post += cell_probs[c] * discrete_entropy(post)
    return e_h_post - h_pred


def expected_stage_reward_table(
    hmm: ControlledHmm,
    points: np.ndarray,
    quadrature: MeasurementQuadrature,
    kind: str = "smoothing-averse",
    cost: Optional[CostFunction] = None,
    gamma: float = 0.0,
) -> np.ndarray:
    """Vectorised expected stage reward at every belief in ``points``.

    ``points`` is (N, n_states); the result is (N, n_controls). Matches the
    scalar :func:`expected_stage_reward` / :func:`min_info_gain_stage_reward`
    to floating precision; used to tabulate rewards for grid solves.
    """
    check_quadrature(quadrature, hmm.emissions)
    if kind not in ("smoothing-averse", "min-info-gain"):
        raise ModelValidationError(f"unknown reward kind {kind!r}")
    points = np.asarray(points, dtype=float)
    n_points = points.shape[0]
    out = np.empty((n_points, hmm.n_controls))
    for u in range(hmm.n_controls):
        a = hmm.transitions[u]
        pred = points @ a.T  # (N, n) predicted beliefs
        h_pred = -np.sum(np.where(pred > 0.0, pred * np.log(np.where(pred > 0.0, pred, 1.0)), 0.0), axis=1)
        cell_probs = pred @ quadrature.weights  # (N, C)
        e_h_post = np.zeros(n_points)
        for c in range(quadrature.n_cells):
            lik = hmm.emissions.likelihood_vector(quadrature.values[c])
            un = pred * lik[None, :]
            s = un.sum(axis=1)
            ok = s > 0.0
            post = np.where(ok[:, None], un / np.where(ok[:, None], s[:, None], 1.0), 0.0)
            h_post = -np.sum(
                np.where(post > 0.0, post * np.log(np.where(post > 0.0, post, 1.0)), 0.0),
                axis=1,
            )
            e_h_post += np.where(ok, cell_probs[:, c] * h_post, 0.0)
        reward = e_h_post - h_pred
        if kind == "smoothing-averse":
            col_ent = np.array([_entropy(a[:, j]) for j in range(hmm.n_states)])
            reward = reward + points @ col_ent
        if gamma != 0.0 and cost is not None:
            cost_vec = np.array([cost(i, u) for i in range(hmm.n_states)])
            reward = reward - gamma * (points @ cost_vec)
        out[:, u] = reward
    return out


# --- realised objective and smoother ------------------------------------


def _check_lengths(controls: Sequence[int], observations: Sequence) -> int:
    horizon = len(controls)
    if len(observations) != horizon + 1:
        raise ModelValidationError(
            f"{len(controls)} controls require {len(controls) + 1} observations, "
            f"got {len(observations)}"
        )
    return horizon


def additive_objective_realisation(
    hmm: ControlledHmm, controls: Sequence[int], observations: Sequence
) -> float:
    """Realised sum of stage rewards along one (controls, observations) path.

    The first term is the entropy of the initial belief conditioned on the
    first observation only (no prediction step).
    """
    horizon = _check_lengths(controls, observations)
    belief = measurement_update(hmm, hmm.initial, observations[0])
    total = discrete_entropy(belief)
    for t in range(horizon):
        total += stage_reward_tilde(hmm, belief, controls[t], observations[t + 1]).r_tilde
        belief = filter_update(hmm, belief, controls[t], observations[t + 1])
    return total


def observation_sequence_probability(
    hmm: ControlledHmm, controls: Sequence[int], observations: Sequence
) -> float:
    """Probability mass of a full observation sequence under an open-loop plan."""
    _check_lengths(controls, observations)
    lik = hmm.emissions.likelihood_vector(observations[0])
    unnorm = lik * hmm.initial.probs
    prob = float(unnorm.sum())
    if prob <= 0.0:
        return 0.0
    belief = unnorm / prob
    for t, u in enumerate(controls):
        pred = hmm.transition(u) @ belief
        unnorm = hmm.emissions.likelihood_vector(observations[t + 1]) * pred
        s = float(unnorm.sum())
        prob *= s
        if s <= 0.0:
            return 0.0
        belief = unnorm / s
    return prob


def expected_additive_objective(hmm: ControlledHmm, controls: Sequence[int]) -> float:
    """Expectation of the realised additive objective over all observation paths.

    Requires discrete emissions; sums the realisation value against the exact
    observation-sequence distribution.
    """
    if not isinstance(hmm.emissions, DiscreteEmission):
        raise ModelValidationError("exact observation expectation requires discrete emissions")
    horizon = len(controls)
    n_obs = hmm.emissions.n_obs
    _guard(n_obs ** (horizon + 1))
    total = 0.0
    for obs in itertools.product(range(n_obs), repeat=horizon + 1):
        p = observation_sequence_probability(hmm, controls, obs)
        if p > 0.0:
            total += p * additive_objective_realisation(hmm, controls, obs)
    return total


@dataclass(frozen=True)
class SmoothedPosteriors:
    """Fixed-interval smoothing output for one realised episode.

    ``marginals[t]`` is the state distribution at time t given all
    observations; ``pairwise[t][i, j]`` is the joint probability of state i
    at time t and state j at time t+1 (one table per transition).
    """

    marginals: list
    pairwise: list


def forward_backward_smoother(
    hmm: ControlledHmm, controls: Sequence[int], observations: Sequence
) -> SmoothedPosteriors:
    """Standard forward-backward smoothing over one realised episode."""
    horizon = _check_lengths(controls, observations)
    filtered = [measurement_update(hmm, hmm.initial, observations[0])]
    for t, u in enumerate(controls):
        filtered.append(filter_update(hmm, filtered[-1], u, observations[t + 1]))

    n = hmm.n_states
    betas = [np.ones(n)]
    for t in range(horizon - 1, -1, -1):
        a = hmm.transition(controls[t])
        lik = hmm.emissions.likelihood_vector(observations[t + 1])
        beta = a.T @ (lik * betas[0])
        s = beta.sum()
        betas.insert(0, beta / s if s > 0 else beta)

    marginals = []
    for t in range(horizon + 1):
        unnorm = filtered[t].probs * betas[t]
        marginals.append(Belief(unnorm / unnorm.sum()))

    pairwise = []
    for t in range(horizon):
        a = hmm.transition(controls[t])
        lik = hmm.emissions.likelihood_vector(observations[t + 1])
        # [i, j] = p(x_t = i, x_{t+1} = j | all observations)
        table = filtered[t].probs[:, None] * a.T * (lik * betas[t + 1])[None, :]
        table /= table.sum()
        table.setflags(write=False)
        pairwise.append(table)
    return SmoothedPosteriors(marginals=marginals, pairwise=pairwise)


def trajectory_entropy(smoothed: SmoothedPosteriors) -> float:
    """Joint entropy of the state trajectory from smoothed posteriors.

    Backward chain rule over the posterior Markov chain: the final marginal
    entropy plus, per transition, the pairwise entropy minus the entropy of
    the later marginal. Exact for the finite-state model, linear in horizon.
    """
    horizon = len(smoothed.pairwise)
    total = discrete_entropy(smoothed.marginals[horizon])
    for t in range(horizon):
        total += _entropy(smoothed.pairwise[t].ravel()) - discrete_entropy(
            smoothed.marginals[t + 1]
        )
    return total


def map_error_rate(
    smoothed: SmoothedPosteriors, true_states: Sequence[int], t_range: Iterable[int]
) -> float:
    """Fraction of times the smoothed-marginal mode misses the true state.

    Argmax ties break toward the lowest state index.
    """
    times = list(t_range)
    if not times:
        return 0.0
    errors = 0
    for t in times:
        if int(np.argmax(smoothed.marginals[t].probs)) != int(true_states[t]):
            errors += 1
    return errors / len(times)


# --- enumeration oracles ------------------------------------------------


def _guard(count: int) -> None:
    if count > ENUMERATION_GUARD:
        raise SizeGuardError(
            f"enumeration would touch {count} terms, guard is {ENUMERATION_GUARD}"
        )


def enumerate_trajectory_posterior(
    hmm: ControlledHmm, controls: Sequence[int], observations: Sequence
):
    """All state trajectories with their posterior probabilities for one episode.

    Returns ``(sequences, probs)`` where ``sequences`` is (M, horizon + 1)
    and ``probs`` sums to one. Direct product-of-factors evaluation, no
    recursive filtering.
    """
    horizon = _check_lengths(controls, observations)
    n = hmm.n_states
    _guard(n ** (horizon + 1))
    seqs = np.array(list(itertools.product(range(n), repeat=horizon + 1)), dtype=int)
    probs = hmm.initial.probs[seqs[:, 0]] * hmm.emissions.likelihood_vector(observations[0])[
        seqs[:, 0]
    ]
    for t, u in enumerate(controls):
        a = hmm.transition(u)
        lik = hmm.emissions.likelihood_vector(observations[t + 1])
        probs = probs * a[seqs[:, t + 1], seqs[:, t]] * lik[seqs[:, t + 1]]
    total = probs.sum()
    if total <= 0.0:
        raise ModelValidationError("observation sequence has zero probability under the model")
    return seqs, probs / total


def exact_trajectory_entropy(
    hmm: ControlledHmm, controls: Sequence[int], observations: Sequence
) -> float:
    """Entropy of the trajectory posterior for one episode, by enumeration."""
    _, probs = enumerate_trajectory_posterior(hmm, controls, observations)
    return _entropy(probs)


def exact_smoother_entropy_enumeration(
    hmm: ControlledHmm, controls: Sequence[int]
) -> float:
    """Trajectory entropy averaged over every observation sequence, exactly.

    Requires discrete emissions; refuses instances beyond the enumeration
    guard. Accumulates in fixed lexicographic observation order.
    """
    if not isinstance(hmm.emissions, DiscreteEmission):
        raise ModelValidationError("enumeration requires discrete emissions")
    horizon = len(controls)
    n = hmm.n_states
    n_obs = hmm.emissions.n_obs
    _guard((n ** (horizon + 1)) * (n_obs ** (horizon + 1)))
    total = 0.0
    for obs in itertools.product(range(n_obs), repeat=horizon + 1):
        p_obs = observation_sequence_probability(hmm, controls, obs)
        if p_obs > 0.0:
            total += p_obs * exact_trajectory_entropy(hmm, controls, obs)
    return total
