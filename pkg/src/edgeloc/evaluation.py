"""Trajectory error metrics: per-axis / norm translation RMSE and
Z-Y-X Euler / total-angle rotation RMSE against a reference trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose, euler_zyx, rotation_angle


class TrajectoryOverlapError(ValueError):
    """Estimate and reference share no frame ids."""


@dataclass(frozen=True)
class FrameError:
    frame_id: int
    dx: float
    dy: float
    dz: float
    yaw_deg: float
    pitch_deg: float
    roll_deg: float
    angle_deg: float


@dataclass(frozen=True, eq=False)
class ErrorReport:
    rmse_x: float
    rmse_y: float
    rmse_z: float
    rmse_norm: float
    rmse_yaw_deg: float
    rmse_pitch_deg: float
    rmse_roll_deg: float
    rmse_angle_deg: float
    n_common: int
    n_reference: int
    drop_rate: float
    frame_errors: tuple[FrameError, ...]

    def to_text(self) -> str:
        lines = [
            "# trajectory error report",
            "# norm RMSE is the RMSE of per-frame translation error norms",
            "# rotation decomposed as Z-Y-X Euler angles of the relative rotation",
            f"frames_compared = {self.n_common}",
            f"frames_reference = {self.n_reference}",
            f"drop_rate = {self.drop_rate:.4f}",
            f"rmse_x_m = {self.rmse_x:.6f}",
            f"rmse_y_m = {self.rmse_y:.6f}",
            f"rmse_z_m = {self.rmse_z:.6f}",
            f"rmse_norm_m = {self.rmse_norm:.6f}",
            f"rmse_yaw_deg = {self.rmse_yaw_deg:.6f}",
            f"rmse_pitch_deg = {self.rmse_pitch_deg:.6f}",
            f"rmse_roll_deg = {self.rmse_roll_deg:.6f}",
            f"rmse_angle_deg = {self.rmse_angle_deg:.6f}",
        ]
        return "\n".join(lines) + "\n"


def _rmse(values: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(values)))) if values.size else 0.0


def evaluate_trajectories(estimate: dict[int, Pose], reference: dict[int, Pose]) -> ErrorReport:
    """Per-frame pose errors over the common frame ids (order-independent)."""
    common = sorted(set(estimate) & set(reference))
    if not common:
        raise TrajectoryOverlapError("no common frame ids between estimate and reference")
    frame_errors = []
    for frame_id in common:
        est = estimate[frame_id]
        ref = reference[frame_id]
        delta = est.translation - ref.translation
        relative = ref.rotation.T @ est.rotation
        yaw, pitch, roll = euler_zyx(relative)
        frame_errors.append(
            FrameError(
                frame_id=frame_id,
                dx=float(delta[0]),
                dy=float(delta[1]),
                dz=float(delta[2]),
                yaw_deg=math.degrees(yaw),
                pitch_deg=math.degrees(pitch),
                roll_deg=math.degrees(roll),
                angle_deg=math.degrees(rotation_angle(relative)),
            )
        )
    dx = np.array([e.dx for e in frame_errors])
    dy = np.array([e.dy for e in frame_errors])
    dz = np.array([e.dz for e in frame_errors])
    norms = np.sqrt(dx * dx + dy * dy + dz * dz)
    return ErrorReport(
        rmse_x=_rmse(dx),
        rmse_y=_rmse(dy),
        rmse_z=_rmse(dz),
        rmse_norm=_rmse(norms),
        rmse_yaw_deg=_rmse(np.array([e.yaw_deg for e in frame_errors])),
        rmse_pitch_deg=_rmse(np.array([e.pitch_deg for e in frame_errors])),
        rmse_roll_deg=_rmse(np.array([e.roll_deg for e in frame_errors])),
        rmse_angle_deg=_rmse(np.array([e.angle_deg for e in frame_errors])),
        n_common=len(common),
        n_reference=len(reference),
        drop_rate=1.0 - len(common) / len(reference),
        frame_errors=tuple(frame_errors),
    )
