"""Desk-scale bounded-workspace navigation with static circular obstacles,
Rankine-vortex flow disturbances, and LiDAR-style frontal range sensing.

The vehicle applies discrete motion commands (speed up/down, turn
left/right, hold) while the superposed vortex field drifts it off course.
Episodes end on reaching the goal disk, colliding with an obstacle or wall,
or hitting the step cap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

SUCCESS = "success"
COLLISION = "collision"
TIMEOUT = "timeout"

ACTION_ACCELERATE = 0
ACTION_DECELERATE = 1
ACTION_TURN_LEFT = 2
ACTION_TURN_RIGHT = 3
ACTION_HOLD = 4
N_ACTIONS = 5


@dataclass(frozen=True)
class Obstacle:
    x: float
    y: float
    radius: float


@dataclass(frozen=True)
class Vortex:
    x: float
    y: float
    circulation: float
    core_radius: float


@dataclass(frozen=True)
class Layout:
    """One evaluation/training arena: geometry plus start and goal."""

    obstacles: tuple[Obstacle, ...]
    vortices: tuple[Vortex, ...]
    start: tuple[float, float]
    goal: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "obstacles": [[o.x, o.y, o.radius] for o in self.obstacles],
            "vortices": [[v.x, v.y, v.circulation, v.core_radius] for v in self.vortices],
            "start": list(self.start),
            "goal": list(self.goal),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Layout":
        return cls(
            obstacles=tuple(Obstacle(*row) for row in d["obstacles"]),
            vortices=tuple(Vortex(*row) for row in d["vortices"]),
            start=tuple(d["start"]),
            goal=tuple(d["goal"]),
        )


def save_layouts(path, layouts: list[Layout]) -> None:
    with open(path, "w") as fh:
        json.dump([lay.to_dict() for lay in layouts], fh, indent=2)


def load_layouts(path) -> list[Layout]:
    with open(path) as fh:
        return [Layout.from_dict(d) for d in json.load(fh)]


@dataclass(frozen=True)
class NavConfig:
    bounds: tuple[float, float] = (25.0, 25.0)
    n_obstacles: int = 6
    obstacle_radius_range: tuple[float, float] = (1.0, 2.0)
    n_vortices: int = 4
    vortex_circulation_range: tuple[float, float] = (4.0, 9.0)
    vortex_core_range: tuple[float, float] = (1.0, 2.0)
    obstacles: tuple[Obstacle, ...] | None = None
    vortices: tuple[Vortex, ...] | None = None
    max_speed: float = 1.2
    accel: float = 0.3
    turn_rate: float = 0.6
    dt: float = 0.1
    vehicle_radius: float = 0.4
    lidar_rays: int = 16
    lidar_range: float = 8.0
    lidar_fov: float = math.pi
    episode_cap: int = 400
    goal_radius: float = 1.0
    reward_progress: float = 1.0
    reward_collision: float = 50.0
    reward_step: float = 0.01
    reward_goal: float = 20.0
    layout_seed: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.lidar_rays < 1:
            raise ValueError(f"need at least one LiDAR ray, got {self.lidar_rays}")
        if self.goal_radius <= 0 or self.vehicle_radius <= 0:
            raise ValueError("goal and vehicle radii must be positive")

    @property
    def obs_dim(self) -> int:
        # body-frame goal vector (2), speed (1), heading cos/sin (2),
        # lidar rays, nearest-obstacle distance (1)
        return 6 + self.lidar_rays


def vortex_velocity(position, vortices) -> np.ndarray:
    """Superposed Rankine flow: solid-body rotation inside each core,
    circulation/(2*pi*r) tangential decay outside, counterclockwise for
    positive circulation."""
    pos = np.asarray(position, dtype=np.float64)
    vel = np.zeros(2)
    for v in vortices:
        dx, dy = pos[0] - v.x, pos[1] - v.y
        r = math.hypot(dx, dy)
        if r == 0.0:
            continue
        if r <= v.core_radius:
            speed = v.circulation * r / (2.0 * math.pi * v.core_radius**2)
        else:
            speed = v.circulation / (2.0 * math.pi * r)
        vel[0] += speed * (-dy / r)
        vel[1] += speed * (dx / r)
    return vel


def lidar_scan(pose, cfg: NavConfig, obstacles) -> np.ndarray:
    """Smallest positive ray hit against obstacles and workspace walls per
    frontal ray, clamped to the maximum range."""
    x, y, heading = pose
    offsets = (
        np.linspace(-cfg.lidar_fov / 2.0, cfg.lidar_fov / 2.0, cfg.lidar_rays)
        if cfg.lidar_rays > 1
        else np.zeros(1)
    )
    angles = heading + offsets
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)

    hits = np.full(cfg.lidar_rays, np.inf)
    # workspace walls: exit distance of each ray from the bounding box
    with np.errstate(divide="ignore"):
        tx = np.where(dirs[:, 0] > 0, (cfg.bounds[0] - x) / dirs[:, 0],
                      np.where(dirs[:, 0] < 0, -x / dirs[:, 0], np.inf))
        ty = np.where(dirs[:, 1] > 0, (cfg.bounds[1] - y) / dirs[:, 1],
                      np.where(dirs[:, 1] < 0, -y / dirs[:, 1], np.inf))
    hits = np.minimum(hits, np.maximum(np.minimum(tx, ty), 0.0))

    for ob in obstacles:
        oc = np.array([x - ob.x, y - ob.y])
        b = dirs @ oc
        disc = b * b - (oc @ oc - ob.radius**2)
        valid = disc >= 0.0
        if not np.any(valid):
            continue
        root = np.sqrt(np.where(valid, disc, 0.0))
        t_near = -b - root
        t_far = -b + root
        t = np.where(t_near > 0.0, t_near, np.where(t_far > 0.0, t_far, np.inf))
        hits = np.where(valid, np.minimum(hits, t), hits)

    return np.minimum(hits, cfg.lidar_range)


def sample_layout(cfg: NavConfig, rng: np.random.Generator) -> Layout:
    """Random arena: start/goal well separated, obstacles clear of both."""
    w, h = cfg.bounds
    margin = 2.5
    min_sep = 0.5 * min(w, h)
    for _ in range(1000):
        start = (rng.uniform(margin, w - margin), rng.uniform(margin, h - margin))
        goal = (rng.uniform(margin, w - margin), rng.uniform(margin, h - margin))
        if math.dist(start, goal) >= min_sep:
            break
    else:
        raise RuntimeError("could not sample a start/goal pair; workspace too small")

    if cfg.obstacles is not None:
        obstacles = tuple(cfg.obstacles)
    else:
        obstacles = []
        attempts = 0
        while len(obstacles) < cfg.n_obstacles and attempts < 2000:
            attempts += 1
            r = rng.uniform(*cfg.obstacle_radius_range)
            c = (rng.uniform(margin + r, w - margin - r), rng.uniform(margin + r, h - margin - r))
            if math.dist(c, start) < r + 3.0 or math.dist(c, goal) < r + 3.0:
                continue
            obstacles.append(Obstacle(c[0], c[1], r))
        obstacles = tuple(obstacles)

    if cfg.vortices is not None:
        vortices = tuple(cfg.vortices)
    else:
        vortices = tuple(
            Vortex(
                rng.uniform(margin, w - margin),
                rng.uniform(margin, h - margin),
                float(rng.choice([-1.0, 1.0])) * rng.uniform(*cfg.vortex_circulation_range),
                rng.uniform(*cfg.vortex_core_range),
            )
            for _ in range(cfg.n_vortices)
        )

    return Layout(obstacles=obstacles, vortices=vortices, start=start, goal=goal)


@dataclass
class Observation:
    """Feature vector for the agent plus the raw nearest-obstacle distance
    used by the adaptive CVaR distortion."""

    vector: np.ndarray
    nearest_obstacle_distance: float


@dataclass
class EpisodeOutcome:
    kind: str
    episode_return: float
    elapsed_s: float
    energy: float


@dataclass
class _Vehicle:
    x: float
    y: float
    heading: float
    speed: float


class NavEnv:
    """Bounded-workspace navigation; all randomness flows through the
    injected generator (layout and start/goal sampling only -- the dynamics
    are deterministic)."""

    n_actions = N_ACTIONS

    def __init__(self, cfg: NavConfig, rng: np.random.Generator | None = None):
        self.cfg = cfg
        self.rng = rng if rng is not None else np.random.default_rng(cfg.layout_seed)
        self.layout: Layout | None = None
        self._vehicle: _Vehicle | None = None
        self._steps = 0
        self._return = 0.0
        self._energy = 0.0
        self._outcome: EpisodeOutcome | None = None

    @property
    def obs_dim(self) -> int:
        return self.cfg.obs_dim

    def reset(self, layout: Layout | None = None) -> Observation:
        self.layout = layout if layout is not None else sample_layout(self.cfg, self.rng)
        sx, sy = self.layout.start
        gx, gy = self.layout.goal
        self._vehicle = _Vehicle(x=sx, y=sy, heading=math.atan2(gy - sy, gx - sx), speed=0.0)
        self._steps = 0
        self._return = 0.0
        self._energy = 0.0
        self._outcome = None
        return self._observe()

    def _nearest_obstacle_distance(self) -> float:
        v = self._vehicle
        best = self.cfg.lidar_range
        for ob in self.layout.obstacles:
            d = math.hypot(v.x - ob.x, v.y - ob.y) - ob.radius - self.cfg.vehicle_radius
            best = min(best, max(d, 0.0))
        return best

    def _observe(self) -> Observation:
        cfg = self.cfg
        v = self._vehicle
        gx, gy = self.layout.goal
        dx, dy = gx - v.x, gy - v.y
        cos_h, sin_h = math.cos(v.heading), math.sin(v.heading)
        body_x = cos_h * dx + sin_h * dy
        body_y = -sin_h * dx + cos_h * dy
        scale = max(cfg.bounds)
        lidar = lidar_scan((v.x, v.y, v.heading), cfg, self.layout.obstacles)
        nearest = self._nearest_obstacle_distance()
        vec = np.concatenate([
            [body_x / scale, body_y / scale, v.speed / cfg.max_speed, cos_h, sin_h],
            lidar / cfg.lidar_range,
            [nearest / cfg.lidar_range],
        ])
        return Observation(vector=vec, nearest_obstacle_distance=nearest)

    def _collided(self) -> bool:
        v = self.cfg.vehicle_radius
        x, y = self._vehicle.x, self._vehicle.y
        w, h = self.cfg.bounds
        if x < v or y < v or x > w - v or y > h - v:
            return True
        for ob in self.layout.obstacles:
            if math.hypot(x - ob.x, y - ob.y) < ob.radius + v:
                return True
        return False

    def step(self, action: int):
        if self._outcome is not None:
            raise RuntimeError("episode finished; call reset()")
        cfg = self.cfg
        veh = self._vehicle
        if action == ACTION_ACCELERATE:
            veh.speed = min(veh.speed + cfg.accel, cfg.max_speed)
            effort = cfg.accel
        elif action == ACTION_DECELERATE:
            veh.speed = max(veh.speed - cfg.accel, 0.0)
            effort = cfg.accel
        elif action == ACTION_TURN_LEFT:
            veh.heading += cfg.turn_rate * cfg.dt
            effort = cfg.turn_rate
        elif action == ACTION_TURN_RIGHT:
            veh.heading -= cfg.turn_rate * cfg.dt
            effort = cfg.turn_rate
        elif action == ACTION_HOLD:
            effort = 0.0
        else:
            raise ValueError(f"invalid action index {action}; valid range is 0..{N_ACTIONS - 1}")

        gx, gy = self.layout.goal
        prev_goal_dist = math.hypot(veh.x - gx, veh.y - gy)
        flow = vortex_velocity((veh.x, veh.y), self.layout.vortices)
        veh.x += (veh.speed * math.cos(veh.heading) + flow[0]) * cfg.dt
        veh.y += (veh.speed * math.sin(veh.heading) + flow[1]) * cfg.dt
        new_goal_dist = math.hypot(veh.x - gx, veh.y - gy)

        self._steps += 1
        self._energy += effort * effort

        collided = self._collided()
        succeeded = (not collided) and new_goal_dist <= cfg.goal_radius
        timed_out = (not collided) and (not succeeded) and self._steps >= cfg.episode_cap

        reward = (
            cfg.reward_progress * (prev_goal_dist - new_goal_dist)
            - cfg.reward_collision * collided
            - cfg.reward_step
            + cfg.reward_goal * succeeded
        )
        self._return += reward

        done = collided or succeeded or timed_out
        if done:
            kind = COLLISION if collided else SUCCESS if succeeded else TIMEOUT
            self._outcome = EpisodeOutcome(
                kind=kind,
                episode_return=self._return,
                elapsed_s=self._steps * cfg.dt,
                energy=self._energy,
            )
        return self._observe(), reward, done, {"outcome": self._outcome.kind if done else None}

    def outcome(self) -> EpisodeOutcome:
        if self._outcome is None:
            raise RuntimeError("episode still running")
        return self._outcome
