"""50 Hz tracking-control stand-in: reference interpolation, observation
assembly, per-joint PD control on a decoupled inertia+damping plant,
reward evaluation, domain-randomization sampling, and curriculum
termination.

The plant is deliberately simple (fixed root, no coupling, no contact) so
every rollout is deterministic and fast; it exists to exercise the control
plumbing, not to model physics.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .retarget import NUM_ROBOT_JOINTS, RobotDescriptor, RobotTrajectory

OBS_DIM = 129
OBS_OFFSETS = (0, 13, 42, 71, 100)


class SimError(Exception):
    pass


class NumericFaultError(SimError):
    pass


_DEFAULT_DESC = None


def _default_desc() -> RobotDescriptor:
    global _DEFAULT_DESC
    if _DEFAULT_DESC is None:
        _DEFAULT_DESC = RobotDescriptor.default()
    return _DEFAULT_DESC


def _vec(x, n, name):
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.size == 1:
        arr = np.full(n, float(arr[0]))
    if arr.shape != (n,):
        raise SimError(f"{name} must be scalar or length {n}")
    if not np.all(np.isfinite(arr)):
        raise SimError(f"{name} has non-finite entries")
    return arr


@dataclass
class RobotState:
    root_position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    root_quaternion: np.ndarray = field(default_factory=lambda: np.array([1.0, 0, 0, 0]))  # w,x,y,z
    root_linvel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    root_angvel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q: np.ndarray = field(default_factory=lambda: np.zeros(NUM_ROBOT_JOINTS))
    qdot: np.ndarray = field(default_factory=lambda: np.zeros(NUM_ROBOT_JOINTS))

    def __post_init__(self):
        self.root_position = _vec(self.root_position, 3, "root_position")
        self.root_quaternion = np.asarray(self.root_quaternion, dtype=np.float64).reshape(4)
        self.root_linvel = _vec(self.root_linvel, 3, "root_linvel")
        self.root_angvel = _vec(self.root_angvel, 3, "root_angvel")
        self.q = _vec(self.q, NUM_ROBOT_JOINTS, "q")
        self.qdot = _vec(self.qdot, NUM_ROBOT_JOINTS, "qdot")
        norm = float(np.linalg.norm(self.root_quaternion))
        if abs(norm - 1.0) > 1e-9:
            raise SimError(f"quaternion norm {norm} != 1")
        if not np.all(np.isfinite(self.root_quaternion)):
            raise SimError("quaternion has non-finite entries")

    def copy(self) -> "RobotState":
        return RobotState(
            self.root_position.copy(),
            self.root_quaternion.copy(),
            self.root_linvel.copy(),
            self.root_angvel.copy(),
            self.q.copy(),
            self.qdot.copy(),
        )

    @classmethod
    def rest(cls, desc: RobotDescriptor | None = None, base_height: float = 0.78) -> "RobotState":
        desc = desc if desc is not None else _default_desc()
        return cls(root_position=np.array([0.0, 0.0, base_height]), q=desc.defaults.copy())


@dataclass(frozen=True)
class PDGains:
    kp: np.ndarray = 60.0
    kd: np.ndarray = 2.0

    def __post_init__(self):
        object.__setattr__(self, "kp", _vec(self.kp, NUM_ROBOT_JOINTS, "kp"))
        object.__setattr__(self, "kd", _vec(self.kd, NUM_ROBOT_JOINTS, "kd"))
        if np.any(self.kp < 0) or np.any(self.kd < 0):
            raise SimError("gains must be nonnegative")


@dataclass(frozen=True)
class RewardWeights:
    joint_pos_tracking: float = 1.25
    alive: float = 0.25
    action_rate: float = -0.05
    joint_limits: float = -5.0
    orientation: float = -5.0
    base_height: float = -10.0
    feet_sliding: float = -0.2
    undesired_contacts: float = -1.0
    tracking_sigma: float = 0.5

    def __post_init__(self):
        if self.tracking_sigma <= 0:
            raise SimError("tracking_sigma must be positive")


@dataclass(frozen=True)
class RandomizationRanges:
    external_force: float = 3.0  # +- N on the base
    external_torque: float = 0.5  # +- N*m on the base
    friction: tuple = (0.3, 1.0)
    base_mass: tuple = (-1.0, 3.0)  # delta kg
    angular_velocity: float = 0.2  # +- rad/s initial root
    joint_position: float = 0.01  # +- rad initial noise
    joint_velocity: float = 1.5  # +- rad/s initial noise
    reference_state_init: bool = True


@dataclass(frozen=True)
class SimConfig:
    control_rate: float = 50.0
    inertia: float = 0.05  # kg*m^2 per joint; must exceed dt*(kd+damping)/2 for stability
    damping: float = 0.01  # N*m*s/rad per joint; small so short free accelerations stay near-ballistic
    torque_limit: float = 80.0
    episode_length: int | None = None  # ticks; None = run the whole trajectory
    nominal_base_mass: float = 15.0
    nominal_friction: float = 0.65
    nominal_base_height: float = 0.78

    def __post_init__(self):
        if self.inertia <= 0 or self.control_rate <= 0 or self.torque_limit <= 0:
            raise SimError("inertia, control_rate, torque_limit must be positive")


@dataclass(frozen=True)
class PerturbationRecord:
    external_force: np.ndarray
    external_torque: np.ndarray
    friction: float
    base_mass_delta: float
    angular_velocity: np.ndarray
    joint_position: np.ndarray
    joint_velocity: np.ndarray
    start_frame: int
    rng_seed: int

    def inertia_scale(self, cfg: SimConfig) -> float:
        return 1.0 + self.base_mass_delta / cfg.nominal_base_mass

    def damping_scale(self, cfg: SimConfig) -> float:
        return self.friction / cfg.nominal_friction


# ---------------------------------------------------------------------------
# Reference interpolation


def interpolate_reference(traj: RobotTrajectory, tick: int, control_rate: float = 50.0) -> np.ndarray:
    """Target angles at a control tick: linear between bracketing planner
    frames, held at the final pose past the end."""
    if len(traj) == 0:
        raise SimError("empty trajectory")
    if tick < 0:
        raise SimError("tick must be >= 0")
    pos = tick * traj.fps / control_rate
    k = int(math.floor(pos))
    if k >= len(traj) - 1:
        return traj.angles[-1].copy()
    frac = pos - k
    return (1.0 - frac) * traj.angles[k] + frac * traj.angles[k + 1]


# ---------------------------------------------------------------------------
# Observation


def assemble_observation(state: RobotState, a_prev, y_ref) -> np.ndarray:
    a_prev = _vec(a_prev, NUM_ROBOT_JOINTS, "a_prev")
    y_ref = _vec(y_ref, NUM_ROBOT_JOINTS, "y_ref")
    obs = np.concatenate(
        [
            state.root_position,
            state.root_quaternion,
            state.root_linvel,
            state.root_angvel,
            state.q,
            state.qdot,
            a_prev,
            y_ref,
        ]
    )
    assert obs.shape == (OBS_DIM,)
    return obs


def unpack_observation(obs: np.ndarray):
    """Inverse of assemble_observation: (state, a_prev, y_ref)."""
    obs = np.asarray(obs, dtype=np.float64).reshape(OBS_DIM)
    state = RobotState(
        root_position=obs[0:3],
        root_quaternion=obs[3:7],
        root_linvel=obs[7:10],
        root_angvel=obs[10:13],
        q=obs[13:42],
        qdot=obs[42:71],
    )
    return state, obs[71:100].copy(), obs[100:129].copy()


# ---------------------------------------------------------------------------
# Control and plant


def pd_control(target, state: RobotState, gains: PDGains, cfg: SimConfig) -> np.ndarray:
    target = _vec(target, NUM_ROBOT_JOINTS, "target")
    torque = gains.kp * (target - state.q) - gains.kd * state.qdot
    return np.clip(torque, -cfg.torque_limit, cfg.torque_limit)


def step_sim(
    state: RobotState,
    torques,
    cfg: SimConfig,
    dt: float,
    desc: RobotDescriptor | None = None,
) -> RobotState:
    """One plant step: q'' = (tau - damping*qdot)/inertia, semi-implicit
    Euler, root held fixed, limit contact zeroes velocity."""
    if dt <= 0:
        raise SimError("dt must be positive")
    desc = desc if desc is not None else _default_desc()
    torques = _vec(torques, NUM_ROBOT_JOINTS, "torques")
    qddot = (torques - cfg.damping * state.qdot) / cfg.inertia
    qdot = state.qdot + dt * qddot
    q = state.q + dt * qdot
    low_hit = q < desc.lower
    high_hit = q > desc.upper
    q = np.clip(q, desc.lower, desc.upper)
    qdot = np.where(low_hit | high_hit, 0.0, qdot)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qdot))):
        raise NumericFaultError("plant state became non-finite")
    out = state.copy()
    out.q = q
    out.qdot = qdot
    return out


# ---------------------------------------------------------------------------
# Reward

REWARD_TERMS = (
    "joint_pos_tracking",
    "alive",
    "action_rate",
    "joint_limits",
    "orientation",
    "base_height",
    "feet_sliding",
    "undesired_contacts",
)


def _tilt_angle(quat_wxyz: np.ndarray) -> float:
    """Angle between the body z-axis and world z."""
    w, x, y, z = quat_wxyz
    # third column of the rotation matrix, dotted with world z
    cos_tilt = 1.0 - 2.0 * (x * x + y * y)
    return math.acos(max(-1.0, min(1.0, cos_tilt)))


def compute_reward(
    state: RobotState,
    y_ref,
    action,
    a_prev,
    weights: RewardWeights | None = None,
    desc: RobotDescriptor | None = None,
    nominal_base_height: float = 0.78,
):
    """Total reward and per-term breakdown (term values already weighted)."""
    w = weights if weights is not None else RewardWeights()
    desc = desc if desc is not None else _default_desc()
    y_ref = _vec(y_ref, NUM_ROBOT_JOINTS, "y_ref")
    action = _vec(action, NUM_ROBOT_JOINTS, "action")
    a_prev = _vec(a_prev, NUM_ROBOT_JOINTS, "a_prev")

    err = state.q - y_ref
    terms = {
        "joint_pos_tracking": w.joint_pos_tracking
        * math.exp(-float(err @ err) / (w.tracking_sigma**2)),
        "alive": w.alive,
        "action_rate": w.action_rate * float(np.sum((action - a_prev) ** 2)),
        "joint_limits": w.joint_limits
        * float(
            np.sum(np.maximum(0.0, state.q - desc.upper) ** 2)
            + np.sum(np.maximum(0.0, desc.lower - state.q) ** 2)
        ),
        "orientation": w.orientation * _tilt_angle(state.root_quaternion) ** 2,
        "base_height": w.base_height * (float(state.root_position[2]) - nominal_base_height) ** 2,
        # zero under the fixed-root plant; wired so the breakdown keeps its shape
        "feet_sliding": w.feet_sliding * 0.0,
        "undesired_contacts": w.undesired_contacts * 0.0,
    }
    return sum(terms.values()), terms


# ---------------------------------------------------------------------------
# Randomization


def sample_randomization(
    ranges: RandomizationRanges | None = None,
    rng_seed: int = 0,
    n_frames: int | None = None,
) -> PerturbationRecord:
    r = ranges if ranges is not None else RandomizationRanges()
    rng = np.random.default_rng(rng_seed)
    start_frame = 0
    if r.reference_state_init and n_frames is not None and n_frames > 1:
        start_frame = int(rng.integers(0, n_frames))
    return PerturbationRecord(
        external_force=rng.uniform(-r.external_force, r.external_force, size=3),
        external_torque=rng.uniform(-r.external_torque, r.external_torque, size=3),
        friction=float(rng.uniform(r.friction[0], r.friction[1])),
        base_mass_delta=float(rng.uniform(r.base_mass[0], r.base_mass[1])),
        angular_velocity=rng.uniform(-r.angular_velocity, r.angular_velocity, size=3),
        joint_position=rng.uniform(-r.joint_position, r.joint_position, size=NUM_ROBOT_JOINTS),
        joint_velocity=rng.uniform(-r.joint_velocity, r.joint_velocity, size=NUM_ROBOT_JOINTS),
        start_frame=start_frame,
        rng_seed=rng_seed,
    )


def apply_randomization(cfg: SimConfig, state: RobotState, record: PerturbationRecord):
    """Perturbed copies: mass delta scales inertia, friction scales damping,
    noise lands on the initial state."""
    new_cfg = replace(
        cfg,
        inertia=cfg.inertia * record.inertia_scale(cfg),
        damping=cfg.damping * record.damping_scale(cfg),
    )
    new_state = state.copy()
    new_state.q = new_state.q + record.joint_position
    new_state.qdot = new_state.qdot + record.joint_velocity
    new_state.root_angvel = new_state.root_angvel + record.angular_velocity
    return new_cfg, new_state


# ---------------------------------------------------------------------------
# Curriculum


def curriculum_check(tracking_error: float, eps_term: float) -> bool:
    """True = terminate the episode (strict threshold)."""
    if not (math.isfinite(tracking_error) and math.isfinite(eps_term)) or eps_term <= 0:
        raise SimError("tracking_error must be finite and eps_term positive")
    return tracking_error > eps_term


@dataclass(frozen=True)
class EpsSchedule:
    """Termination-threshold schedule over training progress in [0, 1].

    Default tightens 0.5 -> 0.15 rad; set start < end for a loosening
    schedule if that reading is ever wanted.
    """

    start: float = 0.5
    end: float = 0.15

    def __post_init__(self):
        if self.start <= 0 or self.end <= 0:
            raise SimError("schedule endpoints must be positive")

    def __call__(self, progress: float) -> float:
        p = max(0.0, min(1.0, float(progress)))
        return self.start + (self.end - self.start) * p


# ---------------------------------------------------------------------------
# Rollout


@dataclass
class TrackingReport:
    rms_error: float
    max_error: float
    rewards: list  # per-step dicts of weighted terms
    reward_total: float
    terminated_early: bool
    steps: int
    ticks: np.ndarray
    targets: np.ndarray  # (steps, 29)
    positions: np.ndarray  # (steps, 29)
    torques: np.ndarray  # (steps, 29)

    def summary(self) -> dict:
        return {
            "rms_error": self.rms_error,
            "max_error": self.max_error,
            "reward_total": self.reward_total,
            "reward_mean": self.reward_total / self.steps if self.steps else 0.0,
            "terminated_early": self.terminated_early,
            "steps": self.steps,
        }

    def to_json(self, path) -> None:
        doc = self.summary()
        doc["reward_terms_mean"] = {
            name: float(np.mean([r[name] for r in self.rewards])) if self.rewards else 0.0
            for name in REWARD_TERMS
        }
        Path(path).write_text(json.dumps(doc, indent=2))

    def to_csv(self, path) -> None:
        header = (
            ["tick"]
            + [f"target_{j}" for j in range(NUM_ROBOT_JOINTS)]
            + [f"q_{j}" for j in range(NUM_ROBOT_JOINTS)]
            + [f"torque_{j}" for j in range(NUM_ROBOT_JOINTS)]
            + list(REWARD_TERMS)
        )
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(self.steps):
                row = (
                    [int(self.ticks[i])]
                    + self.targets[i].tolist()
                    + self.positions[i].tolist()
                    + self.torques[i].tolist()
                    + [self.rewards[i][name] for name in REWARD_TERMS]
                )
                writer.writerow(row)


def run_tracking(
    traj: RobotTrajectory,
    gains: PDGains | None = None,
    cfg: SimConfig | None = None,
    randomization: PerturbationRecord | None = None,
    desc: RobotDescriptor | None = None,
    weights: RewardWeights | None = None,
    eps_term: float | None = None,
    initial_state: RobotState | None = None,
) -> TrackingReport:
    """Interpolate -> PD -> plant at the control rate over the whole
    trajectory; per-step tracking error is the max absolute joint error."""
    if len(traj) == 0:
        raise SimError("empty trajectory")
    gains = gains if gains is not None else PDGains()
    cfg = cfg if cfg is not None else SimConfig()
    desc = desc if desc is not None else _default_desc()
    weights = weights if weights is not None else RewardWeights()

    start_frame = randomization.start_frame if randomization is not None else 0
    start_frame = min(start_frame, len(traj) - 1)
    if initial_state is None:
        state = RobotState.rest(desc, cfg.nominal_base_height)
        state.q = traj.angles[start_frame].copy()
    else:
        state = initial_state.copy()
    if randomization is not None:
        cfg, state = apply_randomization(cfg, state, randomization)

    dt = 1.0 / cfg.control_rate
    ratio = cfg.control_rate / traj.fps
    total_ticks = int(round((len(traj) - start_frame) * ratio))
    if cfg.episode_length is not None:
        total_ticks = min(total_ticks, cfg.episode_length)
    first_tick = int(round(start_frame * ratio))

    a_prev = traj.angles[start_frame].copy()
    sq_sum = 0.0
    max_err = 0.0
    rewards = []
    reward_total = 0.0
    ticks = np.zeros(total_ticks, dtype=np.int64)
    targets = np.zeros((total_ticks, NUM_ROBOT_JOINTS))
    positions = np.zeros((total_ticks, NUM_ROBOT_JOINTS))
    torques_log = np.zeros((total_ticks, NUM_ROBOT_JOINTS))
    terminated = False
    steps = 0

    for i in range(total_ticks):
        tick = first_tick + i
        y_ref = interpolate_reference(traj, tick, cfg.control_rate)
        torque = pd_control(y_ref, state, gains, cfg)
        state = step_sim(state, torque, cfg, dt, desc)
        err = state.q - y_ref
        step_err = float(np.max(np.abs(err)))
        sq_sum += float(err @ err)
        max_err = max(max_err, step_err)
        total, terms = compute_reward(
            state, y_ref, y_ref, a_prev, weights, desc, cfg.nominal_base_height
        )
        rewards.append(terms)
        reward_total += total
        ticks[i] = tick
        targets[i] = y_ref
        positions[i] = state.q
        torques_log[i] = torque
        a_prev = y_ref
        steps = i + 1
        if eps_term is not None and curriculum_check(step_err, eps_term):
            terminated = True
            break

    rms = math.sqrt(sq_sum / (steps * NUM_ROBOT_JOINTS)) if steps else 0.0
    return TrackingReport(
        rms_error=rms,
        max_error=max_err,
        rewards=rewards,
        reward_total=reward_total,
        terminated_early=terminated,
        steps=steps,
        ticks=ticks[:steps],
        targets=targets[:steps],
        positions=positions[:steps],
        torques=torques_log[:steps],
    )
