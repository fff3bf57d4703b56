"""Covert navigation scenario: unicycle robot, range-bearing landmark
measurements, EKF localisation, and a receding-horizon Monte Carlo planner.

The planner scores candidate turn rates by simulating short rollouts and
accumulating Gaussian-entropy stage rewards from the EKF covariances,
minus a weighted squared distance to the goal pose. The hot path is
batched over (candidate, rollout) pairs; the public per-step operations
delegate to the batched kernels with batch size one.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ModelValidationError, NumericalError

TWO_PI = 2.0 * math.pi
LOG_2PI_E = math.log(TWO_PI * math.e)


def wrap_angle(a):
    """Wrap an angle (scalar or array) into [-pi, pi)."""
    return (a + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class RobotState:
    """Planar pose; heading is wrapped into [-pi, pi) on construction."""

    x: float
    y: float
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "heading", float(wrap_angle(self.heading)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.heading])

    @staticmethod
    def from_array(v) -> "RobotState":
        return RobotState(float(v[0]), float(v[1]), float(v[2]))


def _check_cov(cov: np.ndarray, name: str, size: int) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (size, size):
        raise ModelValidationError(f"{name} must be {size}x{size}, got {cov.shape}")
    if np.max(np.abs(cov - cov.T)) > 1e-10:
        raise ModelValidationError(f"{name} is not symmetric")
    if np.min(np.linalg.eigvalsh(cov)) < -1e-12:
        raise ModelValidationError(f"{name} is not positive semidefinite")
    return cov


@dataclass(frozen=True)
class GaussianBelief:
    """EKF state estimate: mean pose and covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        if mean.shape != (3,):
            raise ModelValidationError(f"belief mean must be length 3, got {mean.shape}")
        cov = _check_cov(self.cov, "belief covariance", 3)
        mean = mean.copy()
        mean[2] = wrap_angle(mean[2])
        mean.setflags(write=False)
        cov = cov.copy()
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


# Two way-point beacons plus a cluster surrounding the goal, so that the
# exposure penalty bites exactly where the goal-cost differences between
# candidate turn rates are smallest (on final approach).
_DEFAULT_LANDMARKS = [
    [-30.0, 10.0],
    [-60.0, 45.0],
    [-150.0, 50.0],
    [-147.0, 53.0],
    [-153.0, 47.0],
]


@dataclass(frozen=True)
class RobotScenario:
    landmarks: np.ndarray = field(default_factory=lambda: np.array(_DEFAULT_LANDMARKS))
    process_noise_cov: np.ndarray = field(
        default_factory=lambda: np.diag([0.1**2, 0.1**2, (math.pi / 180.0) ** 2])
    )
    meas_noise_cov: np.ndarray = field(
        default_factory=lambda: np.diag([50.0**2, (math.pi / 18.0) ** 2])
    )
    dt: float = 1.0
    goal: np.ndarray = field(default_factory=lambda: np.array([-150.0, 50.0, 0.0]))
    gamma: float = 0.06
    rollout_count: int = 10
    rollout_horizon: int = 10
    speed: float = 1.0
    turn_candidates: int = 32
    initial_pose: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, math.pi / 2]))
    initial_cov: np.ndarray = field(
        default_factory=lambda: np.diag([1.0, 1.0, (math.pi / 18.0) ** 2])
    )
    step_budget: int = 200
    goal_radius: float = 5.0

    def __post_init__(self):
        lms = np.asarray(self.landmarks, dtype=float)
        if lms.ndim != 2 or lms.shape[1] != 2 or lms.shape[0] == 0:
            raise ModelValidationError(f"landmarks must be (k, 2), got {lms.shape}")
        if not self.dt > 0:
            raise ModelValidationError(f"dt must be positive, got {self.dt!r}")
        q = _check_cov(self.process_noise_cov, "process noise covariance", 3)
        r = _check_cov(self.meas_noise_cov, "measurement noise covariance", 2)
        goal = np.asarray(self.goal, dtype=float)
        pose = np.asarray(self.initial_pose, dtype=float)
        prior = _check_cov(self.initial_cov, "initial covariance", 3)
        for arr, name in ((lms, "landmarks"), (q, "process_noise_cov"),
                          (r, "meas_noise_cov"), (goal, "goal"),
                          (pose, "initial_pose"), (prior, "initial_cov")):
            arr = np.ascontiguousarray(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_landmarks(self) -> int:
        return self.landmarks.shape[0]

    def candidate_turn_rates(self) -> np.ndarray:
        k = self.turn_candidates
        return -math.pi + TWO_PI * np.arange(k) / k

    def to_json(self) -> dict:
        return {
            "landmarks": self.landmarks.tolist(),
            "process_noise_cov": self.process_noise_cov.tolist(),
            "meas_noise_cov": self.meas_noise_cov.tolist(),
            "dt": self.dt,
            "goal": self.goal.tolist(),
            "gamma": self.gamma,
            "rollout_count": self.rollout_count,
            "rollout_horizon": self.rollout_horizon,
            "speed": self.speed,
            "turn_candidates": self.turn_candidates,
            "initial_pose": self.initial_pose.tolist(),
            "initial_cov": self.initial_cov.tolist(),
            "step_budget": self.step_budget,
            "goal_radius": self.goal_radius,
        }

    @staticmethod
    def from_json(doc: dict) -> "RobotScenario":
        kwargs = {}
        array_keys = {"landmarks", "process_noise_cov", "meas_noise_cov", "goal",
                      "initial_pose", "initial_cov"}
        try:
            for key, value in doc.items():
                kwargs[key] = np.asarray(value, dtype=float) if key in array_keys else value
            return RobotScenario(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ModelValidationError(f"malformed robot scenario: {exc}") from exc

    @staticmethod
    def load(path) -> "RobotScenario":
        with open(path) as fh:
            return RobotScenario.from_json(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)


# --- motion and measurement models --------------------------------------


def _batch_step(states: np.ndarray, speed, turn, dt: float, noise=None) -> np.ndarray:
    """Propagate (B, 3) poses one step; displacement uses sin for x, cos for y."""
    out = states.copy()
    out[:, 0] += speed * dt * np.sin(states[:, 2])
    out[:, 1] += speed * dt * np.cos(states[:, 2])
    out[:, 2] += dt * turn
    if noise is not None:
        out += noise
    out[:, 2] = wrap_angle(out[:, 2])
    return out


def _batch_motion_jacobian(states: np.ndarray, speed, dt: float) -> np.ndarray:
    b = states.shape[0]
    f = np.broadcast_to(np.eye(3), (b, 3, 3)).copy()
    f[:, 0, 2] = speed * dt * np.cos(states[:, 2])
    f[:, 1, 2] = -speed * dt * np.sin(states[:, 2])
    return f


def unicycle_step(state: RobotState, u, noise_sample=None, dt: float = 1.0) -> RobotState:
    """One motion step with control ``u = (speed, turn rate)`` and optional noise."""
    speed, turn = float(u[0]), float(u[1])
    noise = None if noise_sample is None else np.asarray(noise_sample, float)[None, :]
    out = _batch_step(state.as_array()[None, :], speed, turn, dt, noise)
    return RobotState.from_array(out[0])


def _batch_measure(states: np.ndarray, landmarks: np.ndarray, noise=None) -> np.ndarray:
    """Range-bearing to every landmark for (B, 3) poses; returns (B, L, 2)."""
    dx = landmarks[None, :, 0] - states[:, None, 0]
    dy = landmarks[None, :, 1] - states[:, None, 1]
    z = np.empty((states.shape[0], landmarks.shape[0], 2))
    z[:, :, 0] = np.hypot(dx, dy)
    z[:, :, 1] = np.arctan2(dy, dx) - states[:, None, 2]
    if noise is not None:
        z += noise
    z[:, :, 1] = wrap_angle(z[:, :, 1])
    return z


def range_bearing(state: RobotState, landmark, noise_sample=None):
    """Range and bearing from a pose to one landmark; bearing in [-pi, pi)."""
    landmark = np.asarray(landmark, dtype=float)
    if np.hypot(landmark[0] - state.x, landmark[1] - state.y) <= 0.0:
        raise NumericalError("landmark coincides with the robot position")
    noise = None if noise_sample is None else np.asarray(noise_sample, float)[None, None, :]
    z = _batch_measure(state.as_array()[None, :], landmark[None, :], noise)
    return float(z[0, 0, 0]), float(z[0, 0, 1])


# --- EKF ----------------------------------------------------------------


def _batch_predict(means, covs, speed, turn, dt, q):
    f = _batch_motion_jacobian(means, speed, dt)
    new_means = _batch_step(means, speed, turn, dt)
    new_covs = f @ covs @ np.swapaxes(f, 1, 2) + q
    new_covs = 0.5 * (new_covs + np.swapaxes(new_covs, 1, 2))
    return new_means, new_covs


def _batch_update(means, covs, z, landmarks, r_cov):
    """Sequential per-landmark EKF updates on a (B, ...) batch."""
    eye = np.eye(3)
    for j in range(landmarks.shape[0]):
        dx = landmarks[j, 0] - means[:, 0]
        dy = landmarks[j, 1] - means[:, 1]
        r2 = dx * dx + dy * dy
        if np.any(r2 <= 1e-12):
            raise NumericalError("predicted pose coincides with a landmark")
        r = np.sqrt(r2)
        h = np.zeros((means.shape[0], 2, 3))
        h[:, 0, 0] = -dx / r
        h[:, 0, 1] = -dy / r
        h[:, 1, 0] = dy / r2
        h[:, 1, 1] = -dx / r2
        h[:, 1, 2] = -1.0
        pht = covs @ np.swapaxes(h, 1, 2)
        s = h @ pht + r_cov
        det = s[:, 0, 0] * s[:, 1, 1] - s[:, 0, 1] * s[:, 1, 0]
        if np.any(np.abs(det) < 1e-12):
            raise NumericalError("singular innovation covariance (ill-conditioned geometry)")
        s_inv = np.empty_like(s)
        s_inv[:, 0, 0] = s[:, 1, 1] / det
        s_inv[:, 1, 1] = s[:, 0, 0] / det
        s_inv[:, 0, 1] = -s[:, 0, 1] / det
        s_inv[:, 1, 0] = -s[:, 1, 0] / det
        gain = pht @ s_inv
        innov = np.empty((means.shape[0], 2))
        innov[:, 0] = z[:, j, 0] - r
        innov[:, 1] = wrap_angle(z[:, j, 1] - (np.arctan2(dy, dx) - means[:, 2]))
        means = means + (gain @ innov[:, :, None])[:, :, 0]
        means[:, 2] = wrap_angle(means[:, 2])
        covs = (eye - gain @ h) @ covs
        covs = 0.5 * (covs + np.swapaxes(covs, 1, 2))
    return means, covs


def ekf_predict(belief: GaussianBelief, u, scenario: RobotScenario) -> GaussianBelief:
    """EKF time update through the motion model at the current mean."""
    means, covs = _batch_predict(
        belief.mean[None, :].copy(), belief.cov[None, :, :].copy(),
        float(u[0]), float(u[1]), scenario.dt, scenario.process_noise_cov,
    )
    return GaussianBelief(means[0], covs[0])


def ekf_update(
    belief: GaussianBelief, measurements, scenario: RobotScenario
) -> GaussianBelief:
    """EKF measurement update with one (range, bearing) pair per landmark."""
    z = np.asarray(measurements, dtype=float)
    if z.shape != (scenario.n_landmarks, 2):
        raise ModelValidationError(
            f"expected {scenario.n_landmarks} (range, bearing) pairs, got shape {z.shape}"
        )
    means, covs = _batch_update(
        belief.mean[None, :].copy(), belief.cov[None, :, :].copy(),
        z[None, :, :], scenario.landmarks, scenario.meas_noise_cov,
    )
    return GaussianBelief(means[0], covs[0])


def motion_jacobian(state_or_mean, u, scenario: RobotScenario) -> np.ndarray:
    mean = state_or_mean.as_array() if isinstance(state_or_mean, RobotState) else np.asarray(state_or_mean, float)
    return _batch_motion_jacobian(mean[None, :], float(u[0]), scenario.dt)[0]


def measurement_jacobian(mean, landmark) -> np.ndarray:
    mean = np.asarray(mean, dtype=float)
    dx = landmark[0] - mean[0]
    dy = landmark[1] - mean[1]
    r2 = dx * dx + dy * dy
    r = math.sqrt(r2)
    return np.array([[-dx / r, -dy / r, 0.0], [dy / r2, -dx / r2, -1.0]])


def gaussian_entropy(cov) -> float:
    """Differential entropy of a Gaussian with the given covariance, in nats."""
    cov = np.asarray(cov, dtype=float)
    k = cov.shape[0]
    _check_cov(cov, "covariance", k)
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise NumericalError("covariance must be positive definite for finite entropy")
    return 0.5 * (k * LOG_2PI_E + logdet)


# --- receding-horizon planner -------------------------------------------


def _sample_gaussian(rng, mean, cov, count):
    vals, vecs = np.linalg.eigh(cov)
    root = vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None)))
    return mean[None, :] + rng.standard_normal((count, 3)) @ root.T


def rollout_scores(
    belief: GaussianBelief,
    scenario: RobotScenario,
    rng: np.random.Generator,
    candidates: Optional[np.ndarray] = None,
    true_state_hypothesis: Optional[RobotState] = None,
    include_process_entropy: bool = True,
) -> tuple:
    """Average rollout score for each candidate turn rate.

    Each candidate is held for the whole rollout horizon. State samples and
    noise draws are shared across candidates (common random numbers), so
    score differences are lower-variance than independent rollouts.
    Returns ``(candidates, scores)``.
    """
    if candidates is None:
        candidates = scenario.candidate_turn_rates()
    candidates = np.asarray(candidates, dtype=float)
    if candidates.size == 0:
        raise ModelValidationError("candidate turn-rate set is empty")
    n_cand = candidates.size
    n_roll = scenario.rollout_count
    horizon = scenario.rollout_horizon
    n_lm = scenario.n_landmarks
    q = scenario.process_noise_cov
    h_q = gaussian_entropy(q) if include_process_entropy else 0.0

    if true_state_hypothesis is None:
        starts = _sample_gaussian(rng, belief.mean, belief.cov, n_roll)
    else:
        starts = np.broadcast_to(true_state_hypothesis.as_array(), (n_roll, 3)).copy()
    starts[:, 2] = wrap_angle(starts[:, 2])
    q_vals, q_vecs = np.linalg.eigh(q)
    q_root = q_vecs @ np.diag(np.sqrt(np.clip(q_vals, 0.0, None)))
    w_noise = rng.standard_normal((horizon, n_roll, 3)) @ q_root.T
    v_std = np.sqrt(np.diag(scenario.meas_noise_cov))
    v_noise = rng.standard_normal((horizon, n_roll, n_lm, 2)) * v_std[None, None, None, :]

    batch = n_cand * n_roll
    turn = np.repeat(candidates, n_roll)
    true_states = np.tile(starts, (n_cand, 1))
    means = np.broadcast_to(belief.mean, (batch, 3)).copy()
    covs = np.broadcast_to(belief.cov, (batch, 3, 3)).copy()
    scores = np.zeros(batch)

    goal = scenario.goal
    for step in range(horizon):
        w = np.tile(w_noise[step], (n_cand, 1))
        v = np.tile(v_noise[step], (n_cand, 1, 1))
        true_states = _batch_step(true_states, scenario.speed, turn, scenario.dt, w)
        z = _batch_measure(true_states, scenario.landmarks, v)
        means, covs = _batch_predict(means, covs, scenario.speed, turn, scenario.dt, q)
        _, pred_logdet = np.linalg.slogdet(covs)
        means, covs = _batch_update(means, covs, z, scenario.landmarks, scenario.meas_noise_cov)
        _, post_logdet = np.linalg.slogdet(covs)
        diff = means - goal[None, :]
        diff[:, 2] = wrap_angle(diff[:, 2])
        scores += 0.5 * (post_logdet - pred_logdet) + h_q
        scores -= scenario.gamma * np.sum(diff * diff, axis=1)

    return candidates, scores.reshape(n_cand, n_roll).mean(axis=1)


def receding_horizon_control(
    belief: GaussianBelief,
    scenario: RobotScenario,
    rng: np.random.Generator,
    true_state_hypothesis: Optional[RobotState] = None,
) -> float:
    """Turn rate with the best average rollout score.

    Ties break toward the smallest magnitude, negative before positive.
    """
    candidates, scores = rollout_scores(
        belief, scenario, rng, true_state_hypothesis=true_state_hypothesis
    )
    order = sorted(
        range(candidates.size),
        key=lambda k: (-scores[k], abs(candidates[k]), 0.0 if candidates[k] < 0 else 1.0),
    )
    return float(candidates[order[0]])


# --- episodes -----------------------------------------------------------


@dataclass(frozen=True)
class RobotEpisode:
    """One navigation run: true poses, applied turn rates, EKF beliefs, and
    per-step entropy terms (posterior, predicted, process noise)."""

    poses: np.ndarray
    controls: np.ndarray
    beliefs: list
    rewards: np.ndarray
    reached_goal: bool

    @property
    def steps(self) -> int:
        return self.controls.size


def run_navigation(scenario: RobotScenario, seed) -> RobotEpisode:
    """Closed-loop navigation episode, deterministic given the seed.

    Runs until the true pose is within the goal radius or the step budget
    is exhausted.
    """
    rng = np.random.default_rng(seed)
    true = RobotState.from_array(scenario.initial_pose)
    belief = GaussianBelief(scenario.initial_pose, scenario.initial_cov)
    q = scenario.process_noise_cov
    h_q = gaussian_entropy(q)
    q_vals, q_vecs = np.linalg.eigh(q)
    q_root = q_vecs @ np.diag(np.sqrt(np.clip(q_vals, 0.0, None)))
    v_std = np.sqrt(np.diag(scenario.meas_noise_cov))

    poses = [true.as_array()]
    controls = []
    beliefs = [belief]
    rewards = []
    reached = False
    for _ in range(scenario.step_budget):
        turn = receding_horizon_control(belief, scenario, rng)
        w = q_root @ rng.standard_normal(3)
        true = unicycle_step(true, (scenario.speed, turn), w)
        v = rng.standard_normal((scenario.n_landmarks, 2)) * v_std[None, :]
        z = _batch_measure(true.as_array()[None, :], scenario.landmarks, v[None, :, :])[0]
        pred = ekf_predict(belief, (scenario.speed, turn), scenario)
        belief = ekf_update(pred, z, scenario)
        poses.append(true.as_array())
        controls.append(turn)
        beliefs.append(belief)
        rewards.append(
            [gaussian_entropy(belief.cov), gaussian_entropy(pred.cov), h_q]
        )
        if math.hypot(true.x - scenario.goal[0], true.y - scenario.goal[1]) < scenario.goal_radius:
            reached = True
            break
    return RobotEpisode(
        poses=np.array(poses),
        controls=np.array(controls),
        beliefs=beliefs,
        rewards=np.array(rewards).reshape(len(controls), 3),
        reached_goal=reached,
    )


def trajectory_stats(records: Sequence[RobotEpisode], scenario: RobotScenario) -> dict:
    """Batch statistics over episodes; shorter episodes hold their final pose."""
    if not records:
        raise ModelValidationError("trajectory statistics require a non-empty batch")
    length = max(r.poses.shape[0] for r in records)
    padded = np.empty((len(records), length, 2))
    for i, rec in enumerate(records):
        n = rec.poses.shape[0]
        padded[i, :n] = rec.poses[:, :2]
        padded[i, n:] = rec.poses[-1, :2]
    final = np.array([r.poses[-1, :2] for r in records])
    goal = scenario.goal[:2]
    min_lm = []
    for rec in records:
        d = np.hypot(
            rec.poses[:, None, 0] - scenario.landmarks[None, :, 0],
            rec.poses[:, None, 1] - scenario.landmarks[None, :, 1],
        )
        min_lm.append(d.min())
    return {
        "mean_path": padded.mean(axis=0),
        "std_path": padded.std(axis=0),
        "mean_final_goal_distance": float(np.mean(np.hypot(*(final - goal).T))),
        "mean_min_landmark_distance": float(np.mean(min_lm)),
        "reached_fraction": float(np.mean([r.reached_goal for r in records])),
        "mean_steps": float(np.mean([r.steps for r in records])),
        "n_episodes": len(records),
    }
