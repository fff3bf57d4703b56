"""Three-state cloud-control privacy scenario: offline solve, Monte Carlo
episode simulation, and policy comparison metrics.

The scenario is a controlled three-state chain with scalar Gaussian
observations. A policy artifact solved on the belief grid is evaluated by
simulating closed-loop episodes and scoring, per episode, the exact joint
entropy of the trajectory posterior and the smoothed-MAP error rate.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Union

import numpy as np

from .errors import ConfigMismatchError, ModelValidationError
from .hmm import (
    Belief,
    ControlledHmm,
    DiscreteEmission,
    ScalarGaussianEmission,
    filter_update,
    hmm_from_json,
    hmm_to_json,
    measurement_update,
)
from .quadrature import DEFAULT_GAUSSIAN_CELLS, quadrature_for
from .rewards import (
    CostFunction,
    SmoothedPosteriors,
    additive_objective_realisation,
    expected_stage_reward_table,
    forward_backward_smoother,
    map_error_rate,
    trajectory_entropy,
)
from .solver import PolicyArtifact, backward_induction, build_grid, make_artifact

DEFAULT_RESOLUTION = 0.01

# Column-stochastic transition matrices of the default scenario:
# entry [i, j] is the probability of moving to state i from state j.
CLOUD_TRANSITIONS = np.array(
    [
        [[0.8, 0.8, 0.1], [0.1, 0.1, 0.8], [0.1, 0.1, 0.1]],
        [[0.1, 0.1, 0.1], [0.8, 0.1, 0.1], [0.1, 0.8, 0.8]],
        [[0.9, 0.05, 0.05], [0.05, 0.9, 0.05], [0.05, 0.05, 0.9]],
    ]
)
CLOUD_EMISSION_MEANS = np.array([1.0, 3.0, 5.0])


@dataclass(frozen=True)
class CloudScenario:
    hmm: ControlledHmm
    horizon: int = 10
    gamma: float = 0.0
    n_runs: int = 200

    @staticmethod
    def default() -> "CloudScenario":
        hmm = ControlledHmm(
            transitions=CLOUD_TRANSITIONS,
            emissions=ScalarGaussianEmission(CLOUD_EMISSION_MEANS, 1.0),
            initial=Belief.uniform(3),
        )
        return CloudScenario(hmm=hmm)

    def to_json(self) -> dict:
        return {
            "hmm": hmm_to_json(self.hmm),
            "horizon": self.horizon,
            "gamma": self.gamma,
            "n_runs": self.n_runs,
        }

    @staticmethod
    def from_json(doc: dict) -> "CloudScenario":
        try:
            return CloudScenario(
                hmm=hmm_from_json(doc["hmm"]),
                horizon=int(doc.get("horizon", 10)),
                gamma=float(doc.get("gamma", 0.0)),
                n_runs=int(doc.get("n_runs", 200)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelValidationError(f"malformed scenario document: {exc}") from exc

    @staticmethod
    def load(path) -> "CloudScenario":
        with open(path) as fh:
            return CloudScenario.from_json(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)


@dataclass(frozen=True)
class EpisodeRecord:
    """One closed-loop episode with its evaluation quantities."""

    states: np.ndarray
    controls: np.ndarray
    observations: np.ndarray
    beliefs: list
    realized_objective: float
    smoothed: SmoothedPosteriors
    trajectory_entropy: float
    map_errors: int


def check_artifact(scenario: CloudScenario, artifact: PolicyArtifact) -> None:
    header = artifact.header
    mismatches = []
    if int(header["n_states"]) != scenario.hmm.n_states:
        mismatches.append("n_states")
    if int(header["n_controls"]) != scenario.hmm.n_controls:
        mismatches.append("n_controls")
    if int(header["horizon"]) != scenario.horizon:
        mismatches.append("horizon")
    if mismatches:
        raise ConfigMismatchError(
            f"policy artifact does not match scenario: {', '.join(mismatches)}"
        )


def _sample_observation(rng: np.random.Generator, hmm: ControlledHmm, state: int):
    em = hmm.emissions
    if isinstance(em, DiscreteEmission):
        return int(rng.choice(em.n_obs, p=em.likelihood[state]))
    return float(rng.normal(em.means[state], em.std_dev))


def run_episode(
    scenario: CloudScenario,
    artifact: PolicyArtifact,
    seed: Union[int, np.random.SeedSequence],
) -> EpisodeRecord:
    """Simulate one closed-loop episode, fully determined by the seed.

    Draw order is fixed: initial state, first observation, then per stage
    the state transition followed by the observation.
    """
    check_artifact(scenario, artifact)
    hmm = scenario.hmm
    rng = np.random.default_rng(seed)
    horizon = scenario.horizon

    states = np.empty(horizon + 1, dtype=np.int64)
    controls = np.empty(horizon, dtype=np.int64)
    observations = np.empty(horizon + 1, dtype=object)

    states[0] = rng.choice(hmm.n_states, p=hmm.initial.probs)
    observations[0] = _sample_observation(rng, hmm, states[0])
    beliefs = [measurement_update(hmm, hmm.initial, observations[0])]
    for t in range(horizon):
        controls[t] = artifact.control(beliefs[t], t)
        a = hmm.transition(controls[t])
        states[t + 1] = rng.choice(hmm.n_states, p=a[:, states[t]])
        observations[t + 1] = _sample_observation(rng, hmm, states[t + 1])
        beliefs.append(filter_update(hmm, beliefs[t], controls[t], observations[t + 1]))

    obs = list(observations)
    realized = additive_objective_realisation(hmm, list(controls), obs)
    smoothed = forward_backward_smoother(hmm, list(controls), obs)
    t_range = range(1, horizon + 1)
    errors = round(map_error_rate(smoothed, states, t_range) * len(t_range))
    return EpisodeRecord(
        states=states,
        controls=controls,
        observations=observations,
        beliefs=beliefs,
        realized_objective=realized,
        smoothed=smoothed,
        trajectory_entropy=trajectory_entropy(smoothed),
        map_errors=int(errors),
    )


def evaluate_policies(
    scenario: CloudScenario,
    policies: Dict[str, PolicyArtifact],
    seeds: Sequence[Union[int, np.random.SeedSequence]],
) -> Dict[str, dict]:
    """Mean trajectory entropy and MAP error per policy over paired seeds.

    Episode ``i`` of every policy uses ``seeds[i]``, so comparisons share
    random draws. MAP errors are counted over stages 1..horizon.
    """
    if not seeds:
        raise ModelValidationError("need at least one seed per policy")
    out = {}
    for name, artifact in policies.items():
        entropies = []
        errors = []
        for seed in seeds:
            record = run_episode(scenario, artifact, seed)
            entropies.append(record.trajectory_entropy)
            errors.append(record.map_errors / scenario.horizon)
        out[name] = {
            "mean_entropy_nats": float(np.mean(entropies)),
            "map_error": float(np.mean(errors)),
            "n_runs": len(seeds),
        }
    return out


def solve_scenario(
    scenario: CloudScenario,
    reward_kind: str = "smoothing-averse",
    resolution: float = DEFAULT_RESOLUTION,
    n_cells: int = DEFAULT_GAUSSIAN_CELLS,
    cost: Optional[CostFunction] = None,
) -> PolicyArtifact:
    """Grid-solve the scenario for one reward kind and package the artifact."""
    hmm = scenario.hmm
    grid = build_grid(hmm.n_states, resolution)
    quadrature = quadrature_for(hmm, n_cells=n_cells)
    reward_table = expected_stage_reward_table(
        hmm, grid.points, quadrature, kind=reward_kind, cost=cost, gamma=scenario.gamma
    )
    value_table, policy = backward_induction(
        hmm, grid, quadrature, scenario.horizon, reward_table
    )
    return make_artifact(
        hmm, grid, quadrature, scenario.horizon, reward_kind, scenario.gamma,
        value_table, policy,
    )
