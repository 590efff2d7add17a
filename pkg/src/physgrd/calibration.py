"""Grid search over PD gains, scored by vertical root position error.

The default search set walks the proportional axis first (kd = 0) and then
the derivative axis at the best proportional gain, ten cells total. A dense
rectangular grid is available through GainGrid for broader sweeps.

Scores aggregate as: mean over a subject's clips, then mean +- std across
subjects. Cells whose simulation diverges score +inf and are excluded from
the argmin but recorded in the report.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import metrics
from .dynamics import GravitySpec, PDGains, SimMode, simulate
from .errors import PhysgrdError, SimulationDivergedError, ValidationError
from .motion_data import MotionClip, _fmt

# kp swept at kd=0, then kd swept at the best kp
DEFAULT_GAIN_CELLS: tuple[tuple[float, float], ...] = (
    (10.0, 0.0), (30.0, 0.0), (50.0, 0.0), (70.0, 0.0), (90.0, 0.0),
    (70.0, 3.0), (70.0, 6.0), (70.0, 9.0), (70.0, 12.0), (70.0, 15.0),
)


class AllCellsDivergedError(PhysgrdError):
    """Every grid cell diverged; no gains can be selected."""


@dataclass(frozen=True)
class GainGrid:
    """Rectangular gain grid: all (kp, kd) combinations, row-major."""

    kp_values: tuple[float, ...]
    kd_values: tuple[float, ...]

    def __post_init__(self):
        for name, vals in (("kp_values", self.kp_values), ("kd_values", self.kd_values)):
            vals = tuple(float(v) for v in vals)
            object.__setattr__(self, name, vals)
            if not vals:
                raise ValidationError(f"{name} must be non-empty")
            if any(v < 0 for v in vals):
                raise ValidationError(f"{name} must be non-negative")
            if len(set(vals)) != len(vals):
                raise ValidationError(f"{name} contains duplicates")
            if list(vals) != sorted(vals):
                raise ValidationError(f"{name} must be ascending")

    def cells(self) -> list[tuple[float, float]]:
        return [(kp, kd) for kp in self.kp_values for kd in self.kd_values]


@dataclass(frozen=True)
class CalibrationReport:
    """Grid-search outcome.

    per_cell maps (kp, kd) to (mean, std) of vRPE across subjects;
    per_subject maps subject -> {(kp, kd): mean vRPE over that subject's
    clips}; diverged cells carry +inf means.
    """

    cells: tuple[tuple[float, float], ...]
    per_cell: Mapping[tuple[float, float], tuple[float, float]]
    per_subject: Mapping[str, Mapping[tuple[float, float], float]]
    best: PDGains
    best_score: float
    mode: str
    diverged: tuple[tuple[float, float], ...]


def _cell_scores(
    clips: Sequence[MotionClip],
    cell: tuple[float, float],
    gravity: GravitySpec,
    mode: SimMode,
) -> dict[str, float] | None:
    """Per-subject mean vRPE for one cell, or None if any clip diverged."""
    gains = PDGains(*cell)
    by_subject: dict[str, list[float]] = {}
    for clip in clips:
        try:
            sim = simulate(clip, gains, gravity, mode)
        except SimulationDivergedError:
            return None
        by_subject.setdefault(clip.subject_id, []).append(metrics.vrpe(sim, clip))
    # sort values so clip ordering cannot perturb the floating-point mean
    return {s: float(np.mean(sorted(v))) for s, v in by_subject.items()}


def calibrate(
    clips: Sequence[MotionClip],
    grid: GainGrid | Sequence[tuple[float, float]] | None = None,
    gravity: GravitySpec | None = None,
    mode: SimMode = "closed_loop",
    max_workers: int | None = None,
) -> CalibrationReport:
    """Exhaustively score gain cells and pick the argmin.

    Ties break toward the smaller kp, then the smaller kd. max_workers
    defaults to the PHYSGRD_THREADS environment variable (1 if unset);
    results are reduced in cell order regardless of worker count.
    """
    clips = list(clips)
    if not clips:
        raise ValidationError("calibration needs at least one clip")
    gravity = gravity or GravitySpec()
    if grid is None:
        cells = list(DEFAULT_GAIN_CELLS)
    elif isinstance(grid, GainGrid):
        cells = grid.cells()
    else:
        cells = [(float(kp), float(kd)) for kp, kd in grid]
        if not cells:
            raise ValidationError("cell list must be non-empty")
    if max_workers is None:
        max_workers = int(os.environ.get("PHYSGRD_THREADS", "1") or "1")

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(
                pool.map(lambda c: _cell_scores(clips, c, gravity, mode), cells)
            )
    else:
        results = [_cell_scores(clips, c, gravity, mode) for c in cells]

    subjects = sorted({c.subject_id for c in clips})
    per_cell: dict[tuple[float, float], tuple[float, float]] = {}
    per_subject: dict[str, dict[tuple[float, float], float]] = {s: {} for s in subjects}
    diverged: list[tuple[float, float]] = []
    for cell, scores in zip(cells, results):
        if scores is None:
            diverged.append(cell)
            per_cell[cell] = (float("inf"), float("inf"))
            continue
        vals = np.array([scores[s] for s in subjects], dtype=float)
        per_cell[cell] = (float(vals.mean()), float(vals.std()))
        for s in subjects:
            per_subject[s][cell] = scores[s]

    finite = [(per_cell[c][0], c[0], c[1]) for c in cells if c not in diverged]
    if not finite:
        raise AllCellsDivergedError("every gain cell diverged during simulation")
    best_score, best_kp, best_kd = min(finite)
    return CalibrationReport(
        cells=tuple(cells),
        per_cell=per_cell,
        per_subject=per_subject,
        best=PDGains(kp=best_kp, kd=best_kd),
        best_score=best_score,
        mode=mode,
        diverged=tuple(diverged),
    )


def write_report_csv(report: CalibrationReport, path: str | Path) -> None:
    """Table-shaped CSV: one row per gain cell, per-subject columns + avg/std."""
    path = Path(path)
    subjects = sorted(report.per_subject)
    lines = ["kp,kd," + ",".join(subjects) + ",avg,std"]
    for cell in report.cells:
        mean, std = report.per_cell[cell]
        vals = [report.per_subject[s].get(cell, float("inf")) for s in subjects]
        cells_txt = [_fmt(cell[0]), _fmt(cell[1])]
        cells_txt += [_fmt(v) for v in vals]
        cells_txt += [_fmt(mean), _fmt(std)]
        lines.append(",".join(cells_txt))
    path.write_text("\n".join(lines) + "\n")


def write_best_gains(report: CalibrationReport, path: str | Path) -> None:
    doc = {
        "kp": report.best.kp,
        "kd": report.best.kd,
        "score": report.best_score,
        "mode": report.mode,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_gains(path: str | Path) -> PDGains:
    doc = json.loads(Path(path).read_text())
    return PDGains(kp=float(doc["kp"]), kd=float(doc["kd"]))
