"""Beliefs, filter recursions, entropies, and model serialisation."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covertctl import (
    Belief,
    ConsistencyError,
    ControlledHmm,
    DegenerateMeasurementError,
    DiscreteEmission,
    ModelValidationError,
    ScalarGaussianEmission,
    conditional_entropy_of_joint,
    discrete_entropy,
    filter_update,
    hmm_from_json,
    hmm_to_json,
    measurement_likelihood,
    measurement_update,
    predict_joint,
    predict_marginal,
)


def test_belief_validates_and_renormalises():
    b = Belief(np.array([0.5, 0.5 + 2e-10]))
    assert abs(b.probs.sum() - 1.0) < 1e-15
    with pytest.raises(ModelValidationError):
        Belief(np.array([0.7, -0.3, 0.6]))
    with pytest.raises(ModelValidationError):
        Belief(np.array([0.4, 0.4]))
    with pytest.raises(ModelValidationError):
        Belief(np.array([[0.5, 0.5]]))


def test_belief_constructors():
    assert np.allclose(Belief.uniform(4).probs, 0.25)
    pm = Belief.point_mass(2, 4)
    assert pm.probs[2] == 1.0 and pm.probs.sum() == 1.0
    assert not pm.probs.flags.writeable


def test_entropy_endpoints():
    assert discrete_entropy(Belief.point_mass(0, 5)) == 0.0
    assert abs(discrete_entropy(Belief.uniform(7)) - math.log(7)) < 1e-12


@given(
    raw=st.lists(st.floats(min_value=1e-3, max_value=1.0), min_size=2, max_size=6)
)
def test_entropy_bounds(raw):
    p = np.array(raw)
    b = Belief(p / p.sum())
    h = discrete_entropy(b)
    assert -1e-12 <= h <= math.log(b.n_states) + 1e-12


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000))
def test_filter_update_normalised_and_consistent(seed):
    rng = np.random.default_rng(seed)
    n, n_obs, n_ctrl = 3, 3, 2
    trans = rng.random((n_ctrl, n, n)) + 0.05
    trans /= trans.sum(axis=1, keepdims=True)
    lik = rng.random((n, n_obs)) + 0.05
    lik /= lik.sum(axis=1, keepdims=True)
    init = rng.random(n) + 0.05
    hmm = ControlledHmm(trans, DiscreteEmission(lik), Belief(init / init.sum()))
    belief = hmm.initial
    for u, y in [(0, 1), (1, 0), (0, 2)]:
        joint = predict_joint(hmm, belief, u)
        pred = predict_marginal(hmm, belief, u)
        # total probability: the joint marginalises both ways
        assert abs(joint.sum() - 1.0) < 1e-10
        assert np.max(np.abs(joint.sum(axis=0) - belief.probs)) < 1e-10
        assert np.max(np.abs(joint.sum(axis=1) - pred.probs)) < 1e-10
        post = filter_update(hmm, belief, u, y)
        assert abs(post.probs.sum() - 1.0) < 1e-12
        # Bayes: posterior proportional to likelihood times prediction
        manual = lik[:, y] * pred.probs
        assert np.allclose(post.probs, manual / manual.sum(), atol=1e-12)
        assert abs(
            measurement_likelihood(hmm, belief, u, y) - manual.sum()
        ) < 1e-12
        belief = post


def test_measurement_update_is_filter_without_prediction(two_state_hmm):
    hmm = two_state_hmm
    post = measurement_update(hmm, hmm.initial, 1)
    manual = hmm.emissions.likelihood[:, 1] * hmm.initial.probs
    assert np.allclose(post.probs, manual / manual.sum())


def test_degenerate_measurement_raises():
    trans = np.array([[[1.0, 0.0], [0.0, 1.0]]])
    emissions = DiscreteEmission(np.array([[1.0, 0.0], [1.0, 0.0]]))
    hmm = ControlledHmm(trans, emissions, Belief.uniform(2))
    with pytest.raises(DegenerateMeasurementError):
        filter_update(hmm, hmm.initial, 0, 1)
    with pytest.raises(DegenerateMeasurementError):
        measurement_update(hmm, hmm.initial, 1)


def test_conditional_entropy_of_joint(two_state_hmm):
    hmm = two_state_hmm
    belief = Belief(np.array([0.3, 0.7]))
    joint = predict_joint(hmm, belief, 0)
    h = conditional_entropy_of_joint(joint, belief)
    a = hmm.transition(0)
    expected = sum(
        belief.probs[j] * -sum(
            a[i, j] * math.log(a[i, j]) for i in range(2) if a[i, j] > 0
        )
        for j in range(2)
    )
    assert abs(h - expected) < 1e-12
    with pytest.raises(ConsistencyError):
        conditional_entropy_of_joint(joint, Belief(np.array([0.5, 0.5])))


def test_transition_validation_messages():
    bad = np.array([[[0.9, 0.3], [0.2, 0.7]]])  # column 0 sums to 1.1
    with pytest.raises(ModelValidationError, match=r"column 0 of A\(0\)"):
        ControlledHmm(bad, DiscreteEmission(np.eye(2)), Belief.uniform(2))
    neg = np.array([[[1.1, 0.3], [-0.1, 0.7]]])
    with pytest.raises(ModelValidationError, match="negative"):
        ControlledHmm(neg, DiscreteEmission(np.eye(2)), Belief.uniform(2))


def test_control_and_symbol_range_checks(two_state_hmm):
    hmm = two_state_hmm
    with pytest.raises(ModelValidationError):
        hmm.transition(2)
    with pytest.raises(ModelValidationError):
        hmm.emissions.likelihood_vector(5)


def test_gaussian_emission_likelihood():
    em = ScalarGaussianEmission(np.array([0.0, 2.0]), 1.0)
    lik = em.likelihood_vector(0.0)
    assert abs(lik[0] - 1.0 / math.sqrt(2 * math.pi)) < 1e-12
    assert lik[0] > lik[1]
    with pytest.raises(ModelValidationError):
        ScalarGaussianEmission(np.array([0.0]), 0.0)


def test_json_roundtrip_discrete(two_state_hmm):
    doc = hmm_to_json(two_state_hmm)
    back = hmm_from_json(doc)
    assert np.allclose(back.transitions, two_state_hmm.transitions)
    assert np.allclose(back.emissions.likelihood, two_state_hmm.emissions.likelihood)
    assert np.allclose(back.initial.probs, two_state_hmm.initial.probs)


def test_json_roundtrip_gaussian(gaussian_hmm):
    back = hmm_from_json(hmm_to_json(gaussian_hmm))
    assert np.allclose(back.emissions.means, gaussian_hmm.emissions.means)
    assert back.emissions.std_dev == gaussian_hmm.emissions.std_dev


def test_json_rejects_bad_documents(two_state_hmm):
    doc = hmm_to_json(two_state_hmm)
    doc["n_states"] = 5
    with pytest.raises(ModelValidationError, match="n_states"):
        hmm_from_json(doc)
    doc = hmm_to_json(two_state_hmm)
    doc["emissions"] = {"type": "mystery"}
    with pytest.raises(ModelValidationError, match="mystery"):
        hmm_from_json(doc)
    with pytest.raises(ModelValidationError):
        hmm_from_json({"transitions": "nope"})
