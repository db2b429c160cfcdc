"""Synthetic systems for coverage experiments.

noisy reference
    A fixed descending altitude profile with iid Gaussian noise per step.
swarm-lite
    Point-mass agents flying towards a goal past obstacle pillars with goal
    attraction, cohesion, separation, obstacle repulsion, altitude hold and
    small actuation noise. Not a physical drone model.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

NOISY_REFERENCE_STEPS = 106


def reference_curve(n_steps: int = NOISY_REFERENCE_STEPS, start: float = 110.0,
                    slope: float = 0.45) -> np.ndarray:
    """Default base altitude ``start - slope * tau`` (a steady descent towards the 60 ft floor)."""
    return start - slope * np.arange(n_steps, dtype=float)


def generate_noisy_reference(base=None, sigma: float = 3.0, count: int = 100,
                             seed=None) -> np.ndarray:
    """``count`` trajectories ``base + N(0, sigma^2)`` iid per step, shape ``(count, T, 1, 1)``."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    base = reference_curve() if base is None else np.asarray(base, dtype=float)
    base = base.reshape(base.shape[0], -1)
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma, size=(count,) + base.shape)
    X = base[None] + noise
    return X.reshape(count, base.shape[0], 1, base.shape[1])


@dataclass
class SwarmConfig:
    """Geometry and gains of the swarm-lite simulator (all lengths in meters, dt = 1)."""

    n_agents: int = 3
    speed: float = 6.0
    n_steps: int = 121
    start: tuple = (0.0, 0.0)
    # the goal lies beyond the 120-step horizon so agents cruise at the cap;
    # the obstacle corridor starts after the agents pass x = 300
    goal: tuple = (900.0, 0.0)
    obstacles: tuple = (
        (150.0, 40.0), (150.0, -40.0), (380.0, 34.0), (380.0, -34.0),
        (450.0, 36.0), (450.0, -36.0), (520.0, 34.0), (520.0, -34.0),
        (420.0, 90.0), (480.0, -90.0),
    )
    obstacle_range: float = 30.0
    obstacle_gain: float = 60.0
    # lateral offsets of agents in formation; agent 2 is the hub in the center
    offsets: tuple = (8.0, 0.0, -8.0, 16.0, -16.0, 24.0, -24.0)
    altitudes: tuple = (40.0, 30.0, 32.0, 34.0, 28.0, 36.0, 26.0)
    cohesion: float = 0.08
    separation: float = 40.0
    separation_range: float = 6.0
    altitude_gain: float = 0.2
    inertia: float = 0.6
    noise: float = 0.35
    init_spread: float = 1.0

    def __post_init__(self):
        if self.n_agents < 1:
            raise ValueError("need at least one agent")
        if self.n_agents > len(self.offsets):
            raise ValueError(f"at most {len(self.offsets)} agents supported by the default layout")
        if self.speed <= 0:
            raise ValueError("speed must be positive")
        gx, gy = self.goal
        for ox, oy in self.obstacles:
            if abs(gx - ox) < 18.75 and abs(gy - oy) < 18.75:
                raise ValueError("goal inside an obstacle")


STATE_DIM = 6  # x, y, z, vx, vy, vz


def _simulate_one(cfg: SwarmConfig, rng: np.random.Generator) -> np.ndarray:
    L = cfg.n_agents
    off = np.array(cfg.offsets[:L])
    alt = np.array(cfg.altitudes[:L])
    obs = np.asarray(cfg.obstacles, dtype=float).reshape(-1, 2)
    goal = np.asarray(cfg.goal, dtype=float)
    p = np.zeros((L, 3))
    p[:, 0] = cfg.start[0] + rng.normal(0, cfg.init_spread, L)
    p[:, 1] = cfg.start[1] + off + rng.normal(0, cfg.init_spread, L)
    p[:, 2] = alt + rng.normal(0, cfg.init_spread, L)
    v = np.zeros((L, 3))
    out = np.empty((cfg.n_steps, L, STATE_DIM))
    for k in range(cfg.n_steps):
        out[k, :, :3] = p
        out[k, :, 3:] = v
        xy = p[:, :2]
        centroid = xy.mean(axis=0)
        target = goal[None] + np.stack([np.zeros(L), off], axis=1)
        to_goal = target - xy
        dist = np.linalg.norm(to_goal, axis=1, keepdims=True)
        desired = cfg.speed * to_goal / np.maximum(dist, cfg.speed)
        # formation keeping around the swarm centroid
        slot = centroid[None] + np.stack([np.zeros(L), off - off.mean()], axis=1)
        desired += cfg.cohesion * (slot - xy)
        if L > 1:
            d = xy[:, None, :] - xy[None, :, :]
            r = np.linalg.norm(d, axis=-1) + np.eye(L) * 1e9
            push = np.where(r < cfg.separation_range, cfg.separation / r**2, 0.0)
            desired += (push[:, :, None] * d / r[:, :, None]).sum(axis=1)
        if len(obs):
            d = xy[:, None, :] - obs[None, :, :]
            r = np.abs(d).max(axis=-1)
            gain = np.where(r < cfg.obstacle_range, cfg.obstacle_gain * (1.0 / r - 1.0 / cfg.obstacle_range), 0.0)
            nd = d / np.maximum(np.linalg.norm(d, axis=-1, keepdims=True), 1e-9)
            desired += (gain[:, :, None] * nd).sum(axis=1)
        desired += rng.normal(0, cfg.noise, (L, 2))
        sp = np.linalg.norm(desired, axis=1, keepdims=True)
        desired = desired * np.minimum(1.0, cfg.speed / np.maximum(sp, 1e-12))
        vz = cfg.altitude_gain * (alt - p[:, 2]) + rng.normal(0, cfg.noise * 0.5, L)
        v[:, :2] = cfg.inertia * v[:, :2] + (1 - cfg.inertia) * desired
        v[:, 2] = vz
        p = p + v
    return out


def generate_swarm_lite(n_agents: int = 3, speed: float = 6.0, count: int = 100, seed=None,
                        config: Optional[SwarmConfig] = None, **overrides) -> np.ndarray:
    """``count`` swarm trajectories, shape ``(count, n_steps, L, 6)``."""
    if config is None:
        config = SwarmConfig(n_agents=n_agents, speed=speed, **overrides)
    rng = np.random.default_rng(seed)
    return np.stack([_simulate_one(config, rng) for _ in range(count)])


def swarm_formula(config: Optional[SwarmConfig] = None, horizon: int = 120,
                  clearance: float = 18.75, comm: float = 6.0, goal_x: float = 600.0,
                  distance: str = "2") -> str:
    """Safety, progress and communication specification for agent-level monitoring.

    ``distance`` selects the horizontal distance to obstacle centers: Euclidean
    (``"2"``) or max-norm (``"inf"``).
    """
    cfg = config or SwarmConfig()
    if distance not in ("2", "inf"):
        raise ValueError("distance must be '2' or 'inf'")
    atom = "mindist2" if distance == "2" else "mindist_inf"
    pts = ", ".join(f"({ox:g}, {oy:g})" for ox, oy in cfg.obstacles)
    gx = goal_x
    return (
        f"(G[0,{horizon}] ((s[2] >= 10) and ({atom}((s[0], s[1]), {{{pts}}}) >= {clearance:g}))"
        f" and F[0,{horizon}] (s[0] >= {gx:g}))"
        f" and G[0,{horizon}] somewhere[0,{comm:g}] (s[2] <= 50)"
    )


NOISY_REFERENCE_FORMULA = "G[0,105] (s[0] >= 60)"
