"""Dataset file formats: binary PGM rasters, trajectory text files,
intrinsics, and the initial-pose record.

Trajectory lines are ``<frame_id> <tx> <ty> <tz> <qx> <qy> <qz> <qw>``
(Hamilton quaternion, camera-to-world). The same format is used for
odometry input, ground truth, and estimated output.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .geometry import CameraIntrinsics, Pose, quat_to_rotation, rotation_to_quat


def write_pgm(path: str | Path, image: np.ndarray) -> None:
    """Write an 8-bit single-channel image as binary (P5) PGM."""
    image = np.asarray(image)
    if image.dtype != np.uint8:
        if image.max(initial=0) > 255 or image.min(initial=0) < 0:
            raise ValueError("image values outside uint8 range")
        image = image.astype(np.uint8)
    height, width = image.shape
    with open(path, "wb") as handle:
        handle.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        handle.write(image.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a binary (P5) 8-bit PGM."""
    data = Path(path).read_bytes()
    match = re.match(rb"P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(\d+)\s+(\d+)\s", data)
    if not match:
        raise ValueError(f"{path}: not a binary P5 PGM")
    width, height, maxval = (int(g) for g in match.groups())
    if maxval > 255:
        raise ValueError(f"{path}: only 8-bit PGM supported (maxval {maxval})")
    pixels = np.frombuffer(data[match.end():], dtype=np.uint8, count=width * height)
    if pixels.size != width * height:
        raise ValueError(f"{path}: truncated pixel data")
    return pixels.reshape(height, width).copy()


def format_pose_line(frame_id: int, pose: Pose) -> str:
    qx, qy, qz, qw = rotation_to_quat(pose.rotation)
    tx, ty, tz = pose.translation
    return (
        f"{frame_id} {tx:.9f} {ty:.9f} {tz:.9f} "
        f"{qx:.9f} {qy:.9f} {qz:.9f} {qw:.9f}"
    )


def parse_pose_line(line: str) -> tuple[int, Pose]:
    tokens = line.split()
    if len(tokens) != 8:
        raise ValueError(f"expected 8 fields, got {len(tokens)}: {line!r}")
    frame_id = int(tokens[0])
    tx, ty, tz, qx, qy, qz, qw = (float(tok) for tok in tokens[1:])
    return frame_id, Pose(quat_to_rotation(qx, qy, qz, qw), np.array([tx, ty, tz]))


def write_trajectory(path: str | Path, items: list[tuple[int, Pose]]) -> None:
    text = "".join(format_pose_line(fid, pose) + "\n" for fid, pose in items)
    Path(path).write_text(text, encoding="ascii")


def read_trajectory(path: str | Path) -> dict[int, Pose]:
    """Read a trajectory file into an ordered frame_id -> Pose mapping."""
    out: dict[int, Pose] = {}
    for raw in Path(path).read_text(encoding="ascii").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        frame_id, pose = parse_pose_line(line)
        out[frame_id] = pose
    return out


def write_intrinsics(path: str | Path, intrinsics: CameraIntrinsics) -> None:
    k = intrinsics
    Path(path).write_text(
        f"{k.fx:.9f} {k.fy:.9f} {k.cx:.9f} {k.cy:.9f} {k.width} {k.height}\n",
        encoding="ascii",
    )


def read_intrinsics(path: str | Path) -> CameraIntrinsics:
    for raw in Path(path).read_text(encoding="ascii").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 6:
            raise ValueError(f"{path}: expected 'fx fy cx cy width height'")
        return CameraIntrinsics(
            fx=float(tokens[0]),
            fy=float(tokens[1]),
            cx=float(tokens[2]),
            cy=float(tokens[3]),
            width=int(tokens[4]),
            height=int(tokens[5]),
        )
    raise ValueError(f"{path}: empty intrinsics file")


def write_initial_pose(path: str | Path, frame_id: int, pose: Pose) -> None:
    Path(path).write_text(format_pose_line(frame_id, pose) + "\n", encoding="ascii")


def read_initial_pose(path: str | Path) -> tuple[int, Pose]:
    for raw in Path(path).read_text(encoding="ascii").splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            return parse_pose_line(line)
    raise ValueError(f"{path}: empty initial-pose file")
