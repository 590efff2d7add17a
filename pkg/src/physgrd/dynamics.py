"""PD reaction-force estimation and semi-implicit Euler root simulation.

All forces here are mass-normalized (units of acceleration, m/s^2): the
root obeys  xdd = f - g  where f is the total reaction force divided by
body mass and g is the gravity acceleration vector. Body-weight units used
by plate data convert via f_bw = f / |g|.

The integrator is semi-implicit (symplectic) Euler: the velocity update
precedes the position update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import SimulationDivergedError, UnitError, ValidationError
from .motion_data import GravitySpec, MotionClip, finite_diff_velocity, _fmt

DIVERGENCE_LIMIT = 1e6  # meters; any |component| beyond this aborts
SimMode = Literal["closed_loop", "open_loop"]


@dataclass(frozen=True)
class PDGains:
    """Proportional/derivative tracking gains.

    kp maps position offset (m) to normalized force (1/s^2); kd maps
    velocity (m/s) to normalized force (1/s).
    """

    kp: float
    kd: float

    def __post_init__(self):
        if self.kp < 0 or self.kd < 0:
            raise UnitError(f"gains must be non-negative, got ({self.kp}, {self.kd})")


@dataclass(frozen=True)
class SimResult:
    """Simulated root states and the forces that produced them.

    positions/velocities have one row per frame (T rows); total_force has
    one row per integration step (T-1 rows), since no force acts after the
    final frame. Use physics_force_series for a per-frame-aligned view.
    """

    positions: np.ndarray
    velocities: np.ndarray
    total_force: np.ndarray
    dt: float

    def __post_init__(self):
        if self.dt <= 0:
            raise UnitError(f"dt must be > 0, got {self.dt}")
        pos = np.asarray(self.positions, dtype=float)
        vel = np.asarray(self.velocities, dtype=float)
        force = np.asarray(self.total_force, dtype=float).reshape(-1, 3)
        if pos.shape != vel.shape or pos.ndim != 2 or pos.shape[1] != 3:
            raise ValidationError("positions and velocities must both be (T, 3)")
        if len(force) != max(len(pos) - 1, 0):
            raise ValidationError(
                f"expected {max(len(pos) - 1, 0)} force rows, got {len(force)}"
            )
        for name, arr in (("positions", pos), ("velocities", vel), ("total_force", force)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"non-finite value in {name}")
        for n, a in (("positions", pos), ("velocities", vel), ("total_force", force)):
            a = np.ascontiguousarray(a)
            a.flags.writeable = False
            object.__setattr__(self, n, a)

    def __len__(self) -> int:
        return len(self.positions)


def pd_force(
    target_next: np.ndarray,
    current_pos: np.ndarray,
    current_vel: np.ndarray,
    gains: PDGains,
) -> np.ndarray:
    """Normalized reaction force pulling current_pos toward target_next.

    f = kp * (target_next - current_pos) - kd * current_vel
    """
    target_next = np.asarray(target_next, dtype=float)
    current_pos = np.asarray(current_pos, dtype=float)
    current_vel = np.asarray(current_vel, dtype=float)
    return gains.kp * (target_next - current_pos) - gains.kd * current_vel


def euler_step(
    pos: np.ndarray,
    vel: np.ndarray,
    normalized_force: np.ndarray,
    gravity: GravitySpec,
    dt: float,
) -> tuple[np.ndarray, np.ndarray]:
    """One semi-implicit Euler step: velocity first, then position.

    acc = f - g;  vel' = vel + acc*dt;  pos' = pos + vel'*dt
    """
    if dt <= 0:
        raise UnitError(f"dt must be > 0, got {dt}")
    acc = np.asarray(normalized_force, dtype=float) - gravity.g_accel
    new_vel = np.asarray(vel, dtype=float) + acc * dt
    new_pos = np.asarray(pos, dtype=float) + new_vel * dt
    return new_pos, new_vel


def simulate(
    clip: MotionClip,
    gains: PDGains,
    gravity: GravitySpec | None = None,
    mode: SimMode = "closed_loop",
) -> SimResult:
    """Track the clip's root trajectory with a PD controller.

    The simulated state starts at the clip's first frame with zero velocity.
    In closed_loop mode the force at step t targets the reference frame t+1
    from the *simulated* state; in open_loop mode the force is computed from
    the mocap state (position t and backward-difference velocity) and then
    integrated without feedback.
    """
    gravity = gravity or GravitySpec()
    pos_ref = clip.root_positions
    T = len(clip)
    dt = clip.dt

    positions = np.empty((T, 3))
    velocities = np.empty((T, 3))
    forces = np.empty((max(T - 1, 0), 3))
    positions[0] = pos_ref[0]
    velocities[0] = 0.0

    if mode == "open_loop":
        mocap_vel = finite_diff_velocity(clip)
    elif mode != "closed_loop":
        raise ValueError(f"unknown simulation mode {mode!r}")

    pos = positions[0].copy()
    vel = velocities[0].copy()
    for t in range(T - 1):
        if mode == "closed_loop":
            f = pd_force(pos_ref[t + 1], pos, vel, gains)
        else:
            f = pd_force(pos_ref[t + 1], pos_ref[t], mocap_vel[t], gains)
        acc = f - gravity.g_accel
        vel = vel + acc * dt
        pos = pos + vel * dt
        worst = float(np.abs(pos).max())
        if not math.isfinite(worst) or worst > DIVERGENCE_LIMIT:
            raise SimulationDivergedError(frame=t + 1, value=worst)
        forces[t] = f
        positions[t + 1] = pos
        velocities[t + 1] = vel

    return SimResult(positions=positions, velocities=velocities, total_force=forces, dt=dt)


def physics_force_series(
    clip: MotionClip,
    gains: PDGains,
    gravity: GravitySpec | None = None,
    mode: SimMode = "closed_loop",
) -> np.ndarray:
    """Per-frame normalized reaction force, (T, 3).

    The simulation defines T-1 step forces; the final frame repeats the last
    one so downstream losses can align force to every frame. A single-frame
    clip gets a zero force row.
    """
    result = simulate(clip, gains, gravity, mode)
    T = len(clip)
    if T == 1:
        return np.zeros((1, 3))
    return np.vstack([result.total_force, result.total_force[-1:]])


def rollout_forces(
    clip: MotionClip,
    forces: np.ndarray,
    gravity: GravitySpec | None = None,
) -> SimResult:
    """Integrate a given normalized force series from the clip's start state.

    Used to turn a model's force prediction back into a trajectory. Accepts
    T or T-1 force rows; the row for the final frame, if present, is unused
    (mirroring the physics_force_series padding).
    """
    gravity = gravity or GravitySpec()
    forces = np.asarray(forces, dtype=float).reshape(-1, 3)
    T = len(clip)
    if len(forces) not in (T, max(T - 1, 0)):
        raise ValidationError(
            f"force series must have {T} or {T - 1} rows, got {len(forces)}"
        )
    dt = clip.dt
    positions = np.empty((T, 3))
    velocities = np.empty((T, 3))
    applied = np.empty((max(T - 1, 0), 3))
    positions[0] = clip.root_positions[0]
    velocities[0] = 0.0
    pos = positions[0].copy()
    vel = velocities[0].copy()
    for t in range(T - 1):
        f = forces[t]
        vel = vel + (f - gravity.g_accel) * dt
        pos = pos + vel * dt
        worst = float(np.abs(pos).max())
        if not math.isfinite(worst) or worst > DIVERGENCE_LIMIT:
            raise SimulationDivergedError(frame=t + 1, value=worst)
        applied[t] = f
        positions[t + 1] = pos
        velocities[t + 1] = vel
    return SimResult(positions=positions, velocities=velocities, total_force=applied, dt=dt)


def to_bodyweight(normalized_force: np.ndarray, gravity: GravitySpec | None = None) -> np.ndarray:
    """Convert mass-normalized force (m/s^2) to body-weight units."""
    gravity = gravity or GravitySpec()
    return np.asarray(normalized_force, dtype=float) / gravity.magnitude


def from_bodyweight(bw_force: np.ndarray, gravity: GravitySpec | None = None) -> np.ndarray:
    """Convert body-weight force to mass-normalized units (m/s^2)."""
    gravity = gravity or GravitySpec()
    return np.asarray(bw_force, dtype=float) * gravity.magnitude


def write_sim_csv(result: SimResult, path: str | Path) -> None:
    """Export a simulation as t,px,py,pz,vx,vy,vz,fx,fy,fz rows.

    The force column of the final frame repeats the last applied force (zero
    for a single-frame result).
    """
    path = Path(path)
    T = len(result)
    if T == 1 or len(result.total_force) == 0:
        force = np.zeros((T, 3))
    else:
        force = np.vstack([result.total_force, result.total_force[-1:]])
    lines = ["t,px,py,pz,vx,vy,vz,fx,fy,fz"]
    for i in range(T):
        cells = [_fmt(i * result.dt)]
        cells += [_fmt(v) for v in result.positions[i]]
        cells += [_fmt(v) for v in result.velocities[i]]
        cells += [_fmt(v) for v in force[i]]
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")
