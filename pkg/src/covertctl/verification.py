"""Built-in oracle suite for the additive trajectory-entropy identity.

Each instance checks that the expectation of the realised additive
objective over all observation sequences equals the exact enumeration of
the trajectory-posterior entropy. The suite also cross-checks the
forward-backward smoother against trajectory enumeration.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .hmm import Belief, ControlledHmm, DiscreteEmission
from .rewards import (
    enumerate_trajectory_posterior,
    exact_smoother_entropy_enumeration,
    expected_additive_objective,
    forward_backward_smoother,
    observation_sequence_probability,
)

IDENTITY_TOL = 1e-9
SMOOTHER_TOL = 1e-10


@dataclass(frozen=True)
class CheckInstance:
    name: str
    hmm: ControlledHmm
    controls: tuple


@dataclass(frozen=True)
class CheckResult:
    name: str
    check: str
    discrepancy: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.discrepancy <= self.tolerance


def random_discrete_hmm(rng: np.random.Generator, n_states: int, n_obs: int,
                        n_controls: int) -> ControlledHmm:
    trans = rng.random((n_controls, n_states, n_states)) + 0.05
    trans /= trans.sum(axis=1, keepdims=True)
    lik = rng.random((n_states, n_obs)) + 0.05
    lik /= lik.sum(axis=1, keepdims=True)
    init = rng.random(n_states) + 0.05
    return ControlledHmm(trans, DiscreteEmission(lik), Belief(init / init.sum()))


def builtin_instances() -> List[CheckInstance]:
    rng = np.random.default_rng(20210901)
    instances = []
    configs = [
        ("boundary-T0", 2, 2, 2, 0),
        ("two-state-T3", 2, 2, 2, 3),
        ("three-state-T2", 3, 3, 2, 2),
        ("three-obs-T2", 2, 3, 3, 2),
        ("two-state-T4", 2, 2, 2, 4),
    ]
    for name, n_states, n_obs, n_controls, horizon in configs:
        hmm = random_discrete_hmm(rng, n_states, n_obs, n_controls)
        controls = tuple(int(c) for c in rng.integers(0, n_controls, size=horizon))
        instances.append(CheckInstance(name=name, hmm=hmm, controls=controls))
    return instances


def _smoother_discrepancy(hmm: ControlledHmm, controls: tuple) -> float:
    """Worst marginal gap between forward-backward and enumeration over the
    most likely observation sequence of the instance."""
    import itertools

    n_obs = hmm.emissions.n_obs
    horizon = len(controls)
    best_obs, best_p = None, -1.0
    for obs in itertools.product(range(n_obs), repeat=horizon + 1):
        p = observation_sequence_probability(hmm, controls, obs)
        if p > best_p:
            best_obs, best_p = obs, p
    seqs, probs = enumerate_trajectory_posterior(hmm, controls, best_obs)
    smoothed = forward_backward_smoother(hmm, controls, best_obs)
    worst = 0.0
    for t in range(horizon + 1):
        marg = np.zeros(hmm.n_states)
        np.add.at(marg, seqs[:, t], probs)
        worst = max(worst, float(np.max(np.abs(marg - smoothed.marginals[t].probs))))
    return worst


def run_verification(
    instances: Optional[List[CheckInstance]] = None,
    _corrupt: Optional[str] = None,
) -> List[CheckResult]:
    """Evaluate every oracle identity; returns one result per check.

    ``_corrupt`` is a test hook: for the named instance the enumeration side
    runs with its transition matrices rolled one control over, which must be
    detected as a failure.
    """
    if instances is None:
        instances = builtin_instances()
    results = []
    for inst in instances:
        hmm = inst.hmm
        enum_hmm = hmm
        if _corrupt == inst.name:
            corrupted = np.roll(hmm.transitions, shift=1, axis=0)
            enum_hmm = ControlledHmm(corrupted, hmm.emissions, hmm.initial)
        additive = expected_additive_objective(hmm, inst.controls)
        enumerated = exact_smoother_entropy_enumeration(enum_hmm, inst.controls)
        results.append(
            CheckResult(
                name=inst.name,
                check="additive-identity",
                discrepancy=abs(additive - enumerated),
                tolerance=IDENTITY_TOL,
            )
        )
        results.append(
            CheckResult(
                name=inst.name,
                check="smoother-marginals",
                discrepancy=_smoother_discrepancy(hmm, inst.controls),
                tolerance=SMOOTHER_TOL,
            )
        )
    return results
