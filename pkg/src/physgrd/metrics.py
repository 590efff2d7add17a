"""Evaluation metrics: per-foot vertical force MSE and vertical root
position error, plus aggregation tables and leave-one-subject-out splits.

Only the vertical (z) component enters both metrics. Frames masked as
invalid in a plate record are excluded from the force metric; the position
metric uses every frame since it needs only mocap.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .dynamics import GravitySpec, SimResult, rollout_forces
from .errors import (
    LengthMismatchError,
    NoValidFramesError,
    SimulationDivergedError,
    ValidationError,
)
from .motion_data import ForcePlateRecord, MotionClip, _fmt

VRPE_SCALE = 1e3  # reported position errors are m^2 scaled up by 10^3


def vgrf_mse(pred: np.ndarray, plate: ForcePlateRecord) -> tuple[float, float]:
    """Per-foot MSE of vertical force against plate data, body-weight units.

    pred is (T, 2, 3); only frames with valid_mask True are counted.
    """
    pred = np.asarray(getattr(pred, "forces", pred), dtype=float)
    if pred.shape != plate.per_foot_force.shape:
        raise LengthMismatchError(
            f"prediction {pred.shape} vs plate {plate.per_foot_force.shape}"
        )
    valid = plate.valid_mask
    if not valid.any():
        raise NoValidFramesError("no valid plate frames to score against")
    out = []
    for foot in range(2):
        d = pred[valid, foot, 2] - plate.per_foot_force[valid, foot, 2]
        out.append(float(np.mean(d * d)))
    return out[0], out[1]


def vrpe(sim: SimResult, clip: MotionClip) -> float:
    """Mean squared vertical position error of a simulation, scaled by 10^3."""
    if len(sim) != len(clip):
        raise LengthMismatchError(f"simulation has {len(sim)} frames, clip {len(clip)}")
    d = sim.positions[:, 2] - clip.root_positions[:, 2]
    return float(np.mean(d * d) * VRPE_SCALE)


@dataclass(frozen=True)
class MetricTable:
    """Per-motion metric rows plus an average row.

    kind "vgrf" rows are (left, right); kind "vrpe" rows are (mean, std).
    The average row is the columnwise arithmetic mean of the motion rows.
    """

    kind: str
    rows: Mapping[str, tuple[float, float]]
    average: tuple[float, float]

    @property
    def columns(self) -> tuple[str, str]:
        return ("left", "right") if self.kind == "vgrf" else ("mean", "std")


def aggregate(per_clip: Mapping[tuple, object], kind: str = "vrpe") -> MetricTable:
    """Group per-clip values by motion label and average across subjects.

    Keys are tuples whose second element is the motion label, e.g.
    (subject, motion) or (subject, motion, trial). Every clip gets equal
    weight. For kind "vgrf" the values are (left, right) pairs averaged
    columnwise; for kind "vrpe" they are scalars reduced to (mean, std)
    across clips (population std). Input order does not affect the result.
    """
    if kind not in ("vgrf", "vrpe"):
        raise ValidationError(f"unknown metric kind {kind!r}")
    if not per_clip:
        raise ValidationError("cannot aggregate an empty metric map")

    groups: dict[str, list] = {}
    for key in sorted(per_clip):
        if len(key) < 2:
            raise ValidationError(f"metric key {key!r} must be (subject, motion, ...)")
        groups.setdefault(str(key[1]), []).append(per_clip[key])

    rows: dict[str, tuple[float, float]] = {}
    for motion in sorted(groups):
        vals = sorted(
            np.atleast_1d(np.asarray(v, dtype=float)).tolist() for v in groups[motion]
        )
        arr = np.array(vals, dtype=float)
        if kind == "vgrf":
            if arr.shape[1] != 2:
                raise ValidationError("vgrf values must be (left, right) pairs")
            rows[motion] = (float(arr[:, 0].mean()), float(arr[:, 1].mean()))
        else:
            if arr.shape[1] != 1:
                raise ValidationError("vrpe values must be scalars")
            rows[motion] = (float(arr[:, 0].mean()), float(arr[:, 0].std()))

    body = np.array([rows[m] for m in sorted(rows)], dtype=float)
    average = (float(body[:, 0].mean()), float(body[:, 1].mean()))
    return MetricTable(kind=kind, rows=rows, average=average)


def write_metric_table(table: MetricTable, path: str | Path) -> None:
    path = Path(path)
    c1, c2 = table.columns
    lines = [f"motion,{c1},{c2}"]
    for motion in sorted(table.rows):
        a, b = table.rows[motion]
        lines.append(f"{motion},{_fmt(a)},{_fmt(b)}")
    lines.append(f"Average,{_fmt(table.average[0])},{_fmt(table.average[1])}")
    path.write_text("\n".join(lines) + "\n")


def loso_splits(subjects: Iterable[str]) -> list[tuple[tuple[str, ...], str]]:
    """One (train, test) split per subject, ordered by subject id."""
    ids = sorted(set(subjects))
    if len(ids) < 2:
        raise ValidationError(f"leave-one-out needs >= 2 subjects, got {len(ids)}")
    return [(tuple(s for s in ids if s != test), test) for test in ids]


def evaluate_prediction(
    clip: MotionClip,
    plate: ForcePlateRecord | None,
    pred_bw: np.ndarray,
    gravity: GravitySpec | None = None,
) -> tuple[float, float, float]:
    """Score a per-foot body-weight force prediction against one clip.

    Returns (vgrf_left, vgrf_right, vrpe). The position error comes from
    rolling the summed predicted force through the integrator from the
    clip's start state; force metrics are NaN when no plate is attached,
    and a rollout that diverges scores an infinite position error.
    """
    gravity = gravity or GravitySpec()
    pred_bw = np.asarray(getattr(pred_bw, "forces", pred_bw), dtype=float)
    if plate is not None:
        left, right = vgrf_mse(pred_bw, plate)
    else:
        left, right = float("nan"), float("nan")
    total_norm = pred_bw.sum(axis=1) * gravity.magnitude
    try:
        sim = rollout_forces(clip, total_norm, gravity)
    except SimulationDivergedError:
        return left, right, float("inf")
    return left, right, vrpe(sim, clip)
