"""Nav-driven orthomosaic: stack, rotate, and scale frames onto a world grid.

Frames are placed sequentially in timestamp order; later frames overwrite
earlier ones (painter's order), which keeps the composite deterministic and
every cell's provenance checkable. Scale comes from altitude (DVL height),
rotation from heading. Grid rows run north to south, columns west to east.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError
from .nav import CameraModel, NavTrack, pose_at
from .ppm import read_ppm, write_ppm

log = logging.getLogger(__name__)

# 0.5 cm cells keep survey-scale detail; desk-scale tests pass coarser values.
DEFAULT_CELL_M = 0.005


@dataclass(frozen=True)
class FramePlacement:
    frame_id: str
    t: float
    center_x: float
    center_y: float
    rotation_deg: float  # clockwise on the map, heading-derived
    scale_m_per_px: float

    def __post_init__(self) -> None:
        if not self.scale_m_per_px > 0:
            raise FormatError(f"scale must be positive, got {self.scale_m_per_px}")


class MosaicGrid:
    """World-anchored RGB buffer with a per-cell write counter."""

    def __init__(self, bounds: tuple[float, float, float, float], cell_m: float):
        if not cell_m > 0:
            raise FormatError(f"cell size must be positive, got {cell_m}")
        x_min, y_min, x_max, y_max = bounds
        if x_max <= x_min or y_max <= y_min:
            raise FormatError(f"degenerate bounds {bounds}")
        self.cell_m = float(cell_m)
        self.x_min, self.y_min = float(x_min), float(y_min)
        # tolerate spans a few ulps past an integer cell count
        self.cols = max(1, math.ceil((x_max - x_min) / cell_m - 1e-9))
        self.rows = max(1, math.ceil((y_max - y_min) / cell_m - 1e-9))
        self.x_max = self.x_min + self.cols * cell_m
        self.y_max = self.y_min + self.rows * cell_m
        self.rgb = np.zeros((self.rows, self.cols, 3), dtype=np.float64)
        self.writes = np.zeros((self.rows, self.cols), dtype=np.int32)

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        return (
            self.x_min + (col + 0.5) * self.cell_m,
            self.y_max - (row + 0.5) * self.cell_m,
        )

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        col = int(math.floor((x - self.x_min) / self.cell_m))
        row = int(math.floor((self.y_max - y) / self.cell_m))
        return row, col

    def to_image(self) -> np.ndarray:
        return np.clip(self.rgb, 0.0, 255.0).round().astype(np.uint8)


def frame_footprint(
    placement: FramePlacement, width: int, height: int
) -> tuple[float, float, float, float]:
    """World bbox of the frame rectangle (outer pixel corners)."""
    a = math.radians(placement.rotation_deg)
    cos_a, sin_a = math.cos(a), math.sin(a)
    cc, cr = (width - 1) / 2.0, (height - 1) / 2.0
    s = placement.scale_m_per_px
    xs, ys = [], []
    for pc, pr in ((-0.5, -0.5), (width - 0.5, -0.5), (-0.5, height - 0.5), (width - 0.5, height - 0.5)):
        dx = (pc - cc) * s
        dy = -(pr - cr) * s
        # clockwise map rotation
        wx = placement.center_x + dx * cos_a + dy * sin_a
        wy = placement.center_y - dx * sin_a + dy * cos_a
        xs.append(wx)
        ys.append(wy)
    return min(xs), min(ys), max(xs), max(ys)


def source_pixel(
    placement: FramePlacement, width: int, height: int, x: float, y: float
) -> tuple[int, int] | None:
    """Nearest source pixel (row, col) for world point (x, y), or None outside."""
    a = math.radians(placement.rotation_deg)
    cos_a, sin_a = math.cos(a), math.sin(a)
    u = x - placement.center_x
    v = y - placement.center_y
    # invert the clockwise rotation
    dx = u * cos_a - v * sin_a
    dy = u * sin_a + v * cos_a
    s = placement.scale_m_per_px
    col = int(round((width - 1) / 2.0 + dx / s))
    row = int(round((height - 1) / 2.0 - dy / s))
    if 0 <= row < height and 0 <= col < width:
        return row, col
    return None


def place_frame(grid: MosaicGrid, image: np.ndarray, placement: FramePlacement) -> int:
    """Paint one frame; returns the number of cells written.

    Every grid cell inside the frame footprint samples its nearest source
    pixel (inverse rigid-body mapping), so footprints fill without holes at
    any scale-to-cell ratio and provenance stays exact.
    """
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise FormatError(f"expected an (H, W, 3) frame, got {image.shape}")
    height, width = image.shape[:2]
    fx_min, fy_min, fx_max, fy_max = frame_footprint(placement, width, height)
    if fx_max < grid.x_min or fx_min > grid.x_max or fy_max < grid.y_min or fy_min > grid.y_max:
        raise FormatError("frame footprint does not intersect the mosaic bounds")

    row_hi, col_lo = grid.cell_of(fx_min, fy_min)
    row_lo, col_hi = grid.cell_of(fx_max, fy_max)
    row_lo, row_hi = max(0, row_lo), min(grid.rows - 1, row_hi)
    col_lo, col_hi = max(0, col_lo), min(grid.cols - 1, col_hi)

    painted = 0
    for row in range(row_lo, row_hi + 1):
        for col in range(col_lo, col_hi + 1):
            cx, cy = grid.cell_center(row, col)
            src = source_pixel(placement, width, height, cx, cy)
            if src is None:
                continue
            grid.rgb[row, col] = image[src[0], src[1]]
            grid.writes[row, col] += 1
            painted += 1
    return painted


def placement_for_pose(frame_id: str, t: float, track: NavTrack, cam: CameraModel) -> FramePlacement:
    pose = pose_at(track, t)
    swath = 2.0 * pose.altitude * math.tan(math.radians(cam.hfov_deg) / 2.0)
    return FramePlacement(
        frame_id=frame_id,
        t=t,
        center_x=pose.x,
        center_y=pose.y,
        rotation_deg=pose.heading,
        scale_m_per_px=swath / cam.width,
    )


def build_mosaic(
    frames: list[tuple[float, np.ndarray]],
    track: NavTrack,
    cam: CameraModel,
    cell_m: float = DEFAULT_CELL_M,
) -> tuple[MosaicGrid, list[FramePlacement]]:
    """Compose all frames onto one grid; bounds are grown to fit every footprint."""
    if not frames:
        raise FormatError("no frames to mosaic")
    ordered = sorted(frames, key=lambda f: f[0])
    placements = []
    x_min = y_min = math.inf
    x_max = y_max = -math.inf
    for i, (t, image) in enumerate(ordered):
        placement = placement_for_pose(f"frame{i:05d}", t, track, cam)
        placements.append(placement)
        fx0, fy0, fx1, fy1 = frame_footprint(placement, image.shape[1], image.shape[0])
        x_min, y_min = min(x_min, fx0), min(y_min, fy0)
        x_max, y_max = max(x_max, fx1), max(y_max, fy1)

    grid = MosaicGrid((x_min, y_min, x_max, y_max), cell_m)
    for placement, (_, image) in zip(placements, ordered):
        place_frame(grid, image, placement)
    return grid, placements


def color_correct(grid: MosaicGrid) -> tuple[float, float, float]:
    """Gray-world balance: scale each channel so its mean over written cells
    matches the mean of the three channel means. Returns the applied gains."""
    mask = grid.writes > 0
    if not mask.any():
        log.warning("color_correct: empty mosaic, nothing to balance")
        return (1.0, 1.0, 1.0)
    means = np.array([grid.rgb[:, :, ch][mask].mean() for ch in range(3)])
    target = means.mean()
    gains = np.where(means > 0, target / np.where(means > 0, means, 1.0), 1.0)
    for ch in range(3):
        grid.rgb[:, :, ch][mask] *= gains[ch]
    return tuple(float(g) for g in gains)


_FRAME_NAME = re.compile(r"^(?P<t>[0-9]+(?:\.[0-9]+)?)\.ppm$")


def load_frames(directory: str | Path) -> list[tuple[float, np.ndarray]]:
    """Read `<t_seconds>.ppm` frames from a directory, sorted by time."""
    directory = Path(directory)
    frames = []
    for path in sorted(directory.glob("*.ppm")):
        m = _FRAME_NAME.match(path.name)
        if not m:
            raise FormatError(f"{path.name}: frame files must be named <t_seconds>.ppm")
        frames.append((float(m.group("t")), read_ppm(path)))
    frames.sort(key=lambda f: f[0])
    return frames


def save_mosaic(grid: MosaicGrid, path: str | Path) -> None:
    """Write the composite PPM plus a `<stem>.wld` text sidecar."""
    path = Path(path)
    write_ppm(path, grid.to_image())
    sidecar = path.with_suffix(".wld")
    sidecar.write_text(
        f"cell_size_m: {grid.cell_m!r}\n"
        f"origin_x: {grid.x_min!r}\n"
        f"origin_y: {grid.y_max!r}\n"
        f"rows: {grid.rows}\n"
        f"cols: {grid.cols}\n"
        "# origin is the top-left (north-west) corner; rows grow southward\n",
        encoding="utf-8",
    )
