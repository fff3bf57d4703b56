"""Cloud-control scenario: solving, episode simulation, and comparison."""
import numpy as np
import pytest

from covertctl import (
    Belief,
    ConfigMismatchError,
    ControlledHmm,
    DiscreteEmission,
    evaluate_policies,
    exact_trajectory_entropy,
    filter_update,
    measurement_update,
    run_episode,
    solve_scenario,
)
from covertctl.cloud import CLOUD_EMISSION_MEANS, CLOUD_TRANSITIONS, CloudScenario
from covertctl.seeding import episode_seed

COARSE = 0.1  # keeps unit-test solves fast; the acceptance suite uses 0.01


@pytest.fixture(scope="module")
def scenario():
    return CloudScenario.default()


@pytest.fixture(scope="module")
def coarse_artifact(scenario):
    return solve_scenario(scenario, resolution=COARSE)


def test_default_scenario_shape(scenario):
    hmm = scenario.hmm
    assert hmm.n_states == 3 and hmm.n_controls == 3
    assert np.allclose(hmm.transitions.sum(axis=1), 1.0)
    assert np.allclose(hmm.emissions.means, CLOUD_EMISSION_MEANS)
    assert hmm.emissions.std_dev == 1.0
    assert np.allclose(hmm.initial.probs, 1 / 3)
    assert scenario.horizon == 10
    # the third matrix holds each state with probability 0.9
    assert np.allclose(np.diag(CLOUD_TRANSITIONS[2]), 0.9)


def test_scenario_json_roundtrip(tmp_path, scenario):
    path = tmp_path / "scenario.json"
    scenario.save(path)
    back = CloudScenario.load(path)
    assert np.allclose(back.hmm.transitions, scenario.hmm.transitions)
    assert back.horizon == scenario.horizon
    assert back.n_runs == scenario.n_runs


def test_episode_deterministic(scenario, coarse_artifact):
    a = run_episode(scenario, coarse_artifact, episode_seed(1, 0))
    b = run_episode(scenario, coarse_artifact, episode_seed(1, 0))
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.controls, b.controls)
    assert all(x == y for x, y in zip(a.observations, b.observations))
    assert a.trajectory_entropy == b.trajectory_entropy
    c = run_episode(scenario, coarse_artifact, episode_seed(1, 1))
    assert not np.array_equal(a.observations, c.observations)


def test_episode_beliefs_replay_filter(scenario, coarse_artifact):
    rec = run_episode(scenario, coarse_artifact, episode_seed(2, 3))
    hmm = scenario.hmm
    belief = measurement_update(hmm, hmm.initial, rec.observations[0])
    assert np.max(np.abs(belief.probs - rec.beliefs[0].probs)) < 1e-12
    for t in range(scenario.horizon):
        belief = filter_update(hmm, belief, rec.controls[t], rec.observations[t + 1])
        assert np.max(np.abs(belief.probs - rec.beliefs[t + 1].probs)) < 1e-12
    assert len(rec.beliefs) == scenario.horizon + 1
    assert 0 <= rec.map_errors <= scenario.horizon


def test_chain_rule_entropy_vs_enumeration_short_horizons():
    """Discrete 3-symbol stand-in for the Gaussian channel at T <= 4."""
    lik = np.array([[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]])
    hmm = ControlledHmm(CLOUD_TRANSITIONS, DiscreteEmission(lik), Belief.uniform(3))
    for horizon in (1, 2, 3, 4):
        scenario = CloudScenario(hmm=hmm, horizon=horizon)
        artifact = solve_scenario(scenario, resolution=0.25)
        for i in range(5):
            rec = run_episode(scenario, artifact, episode_seed(40 + horizon, i))
            exact = exact_trajectory_entropy(
                hmm, list(rec.controls), list(rec.observations)
            )
            assert abs(rec.trajectory_entropy - exact) < 1e-9


def test_cost_dominance_pins_the_cheap_control(scenario):
    """With a huge action price on everything but one control, the solved
    policy uses the free control at every grid point and stage."""
    priced = CloudScenario(hmm=scenario.hmm, horizon=3, gamma=100.0)
    artifact = solve_scenario(
        priced, resolution=0.25, cost=lambda i, u: float(u != 2)
    )
    assert np.all(artifact.controls == 2)


def test_check_artifact_names_mismatches(scenario, coarse_artifact):
    other = CloudScenario(hmm=scenario.hmm, horizon=7)
    with pytest.raises(ConfigMismatchError, match="horizon"):
        run_episode(other, coarse_artifact, episode_seed(0, 0))


def test_evaluate_policies_paired(scenario, coarse_artifact):
    seeds = [episode_seed(9, i) for i in range(6)]
    out = evaluate_policies(
        scenario, {"a": coarse_artifact, "b": coarse_artifact}, seeds
    )
    assert out["a"] == out["b"]
    assert out["a"]["n_runs"] == 6
    assert 0.0 <= out["a"]["map_error"] <= 1.0
