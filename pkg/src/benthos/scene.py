"""Synthetic survey scenes for tests and demos.

Generates the whole input side of the pipeline at desk scale with known
ground truth: a straight-line track matching the survey geometry (1.2 m/s at
2 m altitude, 2-3 m swath), a sand-background reflectance cube with a planted
patch of a distinct reference spectrum, reference CSVs, and optionally camera
frames plus CNN-style detection records.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .hypercube import HyperCube, WavelengthGrid, save_cube
from .nav import NavSample, NavTrack, save_track
from .ppm import write_ppm

SPEED_M_S = 1.2
ALTITUDE_M = 2.0
LINE_RATE_HZ = 10.0
UHI_FOV_DEG = 60.0
ORIGIN = (60.3816, 5.3388)

GRID = WavelengthGrid(np.linspace(400.0, 700.0, 16))

# Tilted sand spectrum vs. near-flat bright plastic: ~0.24 rad apart, far
# above the ~0.02 rad scatter that 2% multiplicative noise induces.
SAND = np.linspace(0.20, 0.50, 16)
WHITE_PLASTIC = np.linspace(0.82, 0.78, 16)


@dataclass(frozen=True)
class PlantedObject:
    line_min: int
    line_max: int
    sample_min: int
    sample_max: int
    world_x: float
    world_y: float


@dataclass
class UhiScene:
    cube_path: Path
    nav_path: Path
    reference_dir: Path
    truth: PlantedObject


def straight_track(duration_s: float, heading: float = 0.0) -> NavTrack:
    """North-bound track at survey speed and altitude, sampled at 1 Hz."""
    n = int(math.ceil(duration_s)) + 2
    samples = [
        NavSample(
            t=float(i) - 1.0,
            x=0.0,
            y=(float(i) - 1.0) * SPEED_M_S,
            depth=8.0,
            roll=0.0,
            pitch=0.0,
            heading=heading,
            altitude=ALTITUDE_M,
        )
        for i in range(n + 1)
    ]
    return NavTrack(samples, origin=ORIGIN)


def planted_world_position(center_line: float, center_sample: float, samples: int) -> tuple[float, float]:
    """Analytic ground truth, independent of the nav projection code.

    Straight north track at zero attitude: along-track position is
    speed * t, across-track offset is the linear sample-to-angle mapping.
    """
    t = center_line / LINE_RATE_HZ
    y = SPEED_M_S * t
    ux = 2.0 * center_sample / (samples - 1) - 1.0
    x = ALTITUDE_M * math.tan(math.radians(UHI_FOV_DEG) / 2.0) * ux
    return x, y


def make_uhi_scene(
    directory: str | Path,
    lines: int = 200,
    samples: int = 64,
    patch_lines: int = 12,
    patch_samples: int = 9,
    patch_line0: int = 90,
    patch_sample0: int = 40,
    noise: float = 0.02,
    seed: int = 7,
) -> UhiScene:
    """Write cube + nav + references with one planted plastic patch."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    data = np.tile(SAND, (lines, samples, 1))
    l1 = patch_line0 + patch_lines
    s1 = patch_sample0 + patch_samples
    data[patch_line0:l1, patch_sample0:s1, :] = WHITE_PLASTIC
    data = data * (1.0 + noise * rng.standard_normal(data.shape))
    data = np.clip(data, 0.0, 4.0)

    timestamps = np.arange(lines) / LINE_RATE_HZ
    cube = HyperCube(grid=GRID, data=data, line_timestamps=timestamps, kind="reflectance")
    cube_path = directory / "scene.hdr"
    save_cube(cube, cube_path, sensor="synthetic-uhi", comment="planted plastic patch")

    track = straight_track(duration_s=lines / LINE_RATE_HZ)
    nav_path = directory / "nav.csv"
    save_track(track, nav_path)

    reference_dir = directory / "references"
    reference_dir.mkdir(exist_ok=True)
    for name, values in (("sand", SAND), ("white_plastic", WHITE_PLASTIC)):
        rows = "\n".join(
            f"{float(wl)!r},{float(v)!r}" for wl, v in zip(GRID.wavelengths_nm, values)
        )
        (reference_dir / f"{name}.csv").write_text(rows + "\n", encoding="utf-8")

    cx, cy = planted_world_position(
        (patch_line0 + l1 - 1) / 2.0, (patch_sample0 + s1 - 1) / 2.0, samples
    )
    truth = PlantedObject(
        line_min=patch_line0,
        line_max=l1 - 1,
        sample_min=patch_sample0,
        sample_max=s1 - 1,
        world_x=cx,
        world_y=cy,
    )
    (directory / "truth.json").write_text(json.dumps(truth.__dict__, indent=2))
    return UhiScene(cube_path=cube_path, nav_path=nav_path, reference_dir=reference_dir, truth=truth)


def make_detection_scene(directory: str | Path, n_frames: int = 4, seed: int = 3) -> dict:
    """Frames plus NDJSON detection records for the fuse/review path."""
    directory = Path(directory)
    frames_dir = directory / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    width, height = 96, 72
    classes = ("bottle", "plastic", "tire", "metal")
    records = []
    for i in range(n_frames):
        t = 2.0 + 3.0 * i
        frame = rng.integers(30, 70, size=(height, width, 3), dtype=np.uint8)
        for j in range(2):
            w, h = int(rng.integers(10, 20)), int(rng.integers(8, 16))
            x = int(rng.integers(0, width - w))
            y = int(rng.integers(0, height - h))
            color = rng.integers(120, 255, size=3)
            frame[y : y + h, x : x + w] = color
            cls = classes[(2 * i + j) % len(classes)]
            score = float(np.round(rng.uniform(0.4, 0.95), 3))
            records.append(
                {
                    "frame_id": f"{t}",
                    "t": t,
                    "bbox": [x, y, w, h],
                    "scores": {cls: score},
                }
            )
        write_ppm(frames_dir / f"{t}.ppm", frame)

    dets_path = directory / "detections.ndjson"
    dets_path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")

    track = straight_track(duration_s=2.0 + 3.0 * n_frames)
    nav_path = directory / "nav.csv"
    save_track(track, nav_path)
    return {
        "frames_dir": frames_dir,
        "detections": dets_path,
        "nav": nav_path,
        "records": records,
    }
