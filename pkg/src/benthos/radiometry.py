"""Radiance-to-reflectance correction for underwater hyperspectral lines.

Adopted forward model, per band:

    L = R * I0 * exp(-2 * c * d)

where ``I0`` is the effective illuminant at zero path length, ``c`` the water
attenuation coefficient (1/m) and ``d`` the sensor-seafloor distance. The
two-way path (source and return each traversing ``d``) is the minimal
invertible model; the illuminant is recovered in situ from a calibration
plate of known reflectance.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError, FormatError, IncompatibleGridError
from .hypercube import REFLECTANCE_MAX, HyperCube, WavelengthGrid


@dataclass(frozen=True)
class AttenuationProfile:
    """Per-band attenuation coefficient c(lambda), 1/m."""

    grid: WavelengthGrid
    c: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=np.float64)
        object.__setattr__(self, "c", c)
        if c.shape != (len(self.grid),):
            raise IncompatibleGridError(
                f"{c.size} attenuation values for {len(self.grid)} bands"
            )
        if not np.all(np.isfinite(c)) or np.any(c < 0):
            raise FormatError("attenuation coefficients must be finite and >= 0")


@dataclass(frozen=True)
class CalibrationPlate:
    """In-situ plate of known reflectance, measured at a known distance."""

    grid: WavelengthGrid
    plate_reflectance: np.ndarray
    measured_radiance: np.ndarray
    plate_distance_m: float

    def __post_init__(self) -> None:
        refl = np.asarray(self.plate_reflectance, dtype=np.float64)
        rad = np.asarray(self.measured_radiance, dtype=np.float64)
        object.__setattr__(self, "plate_reflectance", refl)
        object.__setattr__(self, "measured_radiance", rad)
        n = len(self.grid)
        if refl.shape != (n,) or rad.shape != (n,):
            raise IncompatibleGridError("plate arrays must match the grid length")
        if np.any(refl <= 0) or np.any(refl > 1):
            raise FormatError("plate reflectance must lie in (0, 1]")
        if np.any(rad < 0) or not np.all(np.isfinite(rad)):
            raise FormatError("plate radiance must be finite and >= 0")
        if not self.plate_distance_m > 0:
            raise FormatError("plate distance must be positive")


@dataclass(frozen=True)
class IlluminantSpectrum:
    """Effective source intensity at zero path length."""

    grid: WavelengthGrid
    intensity: np.ndarray

    def __post_init__(self) -> None:
        i0 = np.asarray(self.intensity, dtype=np.float64)
        object.__setattr__(self, "intensity", i0)
        if i0.shape != (len(self.grid),):
            raise IncompatibleGridError(
                f"{i0.size} intensity values for {len(self.grid)} bands"
            )
        if not np.all(np.isfinite(i0)) or np.any(i0 < 0):
            raise FormatError("illuminant intensity must be finite and >= 0")


def _require_same_grid(*grids: WavelengthGrid) -> None:
    first = grids[0]
    for g in grids[1:]:
        if g != first:
            raise IncompatibleGridError("inputs live on different wavelength grids")


def calibrate_illuminant(plate: CalibrationPlate, att: AttenuationProfile) -> IlluminantSpectrum:
    """Recover I0 per band from the plate measurement: I0 = L / (R * exp(-2*c*d))."""
    _require_same_grid(plate.grid, att.grid)
    if np.any(plate.plate_reflectance == 0):
        raise DegenerateInputError("plate reflectance contains zeros")
    path = np.exp(-2.0 * att.c * plate.plate_distance_m)
    i0 = plate.measured_radiance / (plate.plate_reflectance * path)
    return IlluminantSpectrum(grid=plate.grid, intensity=i0)


@dataclass(frozen=True)
class CorrectionResult:
    cube: HyperCube
    clamped: int  # samples clipped into [0, REFLECTANCE_MAX]


def correct_to_reflectance(
    cube: HyperCube,
    illum: IlluminantSpectrum,
    att: AttenuationProfile,
    distance_m: np.ndarray,
) -> CorrectionResult:
    """Convert a radiance cube to reflectance: R = L / (I0 * exp(-2*c*d_line)).

    ``distance_m`` holds one sensor-seafloor distance per scan line. Corrected
    values are clamped into [0, 4] and the clamp count reported; turbid-water
    specular hits are expected, not fatal.
    """
    if cube.kind != "radiance":
        raise FormatError(f"expected a radiance cube, got kind={cube.kind!r}")
    _require_same_grid(cube.grid, illum.grid, att.grid)
    distance_m = np.asarray(distance_m, dtype=np.float64)
    if distance_m.shape != (cube.lines,):
        raise FormatError(
            f"{distance_m.size} distances for {cube.lines} lines"
        )
    if np.any(distance_m <= 0):
        raise FormatError("distances must be positive")
    if np.any(illum.intensity <= 0):
        raise DegenerateInputError(
            "illuminant has non-positive bands; cannot invert the forward model"
        )

    # denominator[line, band] broadcast over samples
    path = np.exp(-2.0 * np.outer(distance_m, att.c))
    denom = path * illum.intensity[np.newaxis, :]
    refl = cube.data / denom[:, np.newaxis, :]
    clamped = int(np.count_nonzero((refl < 0) | (refl > REFLECTANCE_MAX)))
    refl = np.clip(refl, 0.0, REFLECTANCE_MAX)
    out = HyperCube(
        grid=cube.grid,
        data=refl,
        line_timestamps=cube.line_timestamps,
        kind="reflectance",
    )
    return CorrectionResult(cube=out, clamped=clamped)


def forward_model(
    reflectance_cube: HyperCube,
    illum: IlluminantSpectrum,
    att: AttenuationProfile,
    distance_m: np.ndarray,
) -> HyperCube:
    """Exact inverse of the correction: L = R * I0 * exp(-2*c*d_line)."""
    if reflectance_cube.kind != "reflectance":
        raise FormatError(
            f"expected a reflectance cube, got kind={reflectance_cube.kind!r}"
        )
    _require_same_grid(reflectance_cube.grid, illum.grid, att.grid)
    distance_m = np.asarray(distance_m, dtype=np.float64)
    if distance_m.shape != (reflectance_cube.lines,):
        raise FormatError(
            f"{distance_m.size} distances for {reflectance_cube.lines} lines"
        )
    if np.any(distance_m <= 0):
        raise FormatError("distances must be positive")

    path = np.exp(-2.0 * np.outer(distance_m, att.c))
    factor = path * illum.intensity[np.newaxis, :]
    radiance = reflectance_cube.data * factor[:, np.newaxis, :]
    return HyperCube(
        grid=reflectance_cube.grid,
        data=radiance,
        line_timestamps=reflectance_cube.line_timestamps,
        kind="radiance",
    )


def load_attenuation(path: str | Path) -> AttenuationProfile:
    """Read `wavelength_nm,value` CSV rows into an attenuation profile."""
    wavelengths, values = [], []
    with open(path, newline="", encoding="utf-8") as f:
        for row in csv.reader(f):
            if not row or row[0].strip().startswith("#"):
                continue
            if row[0].strip().lower() == "wavelength_nm":
                continue  # optional column header
            if len(row) < 2:
                raise FormatError(f"{path}: expected 'wavelength_nm,value' rows")
            wavelengths.append(float(row[0]))
            values.append(float(row[1]))
    return AttenuationProfile(grid=WavelengthGrid(np.array(wavelengths)), c=np.array(values))


def load_plate(path: str | Path) -> CalibrationPlate:
    """Read a calibration plate file.

    Format: a `distance_m: <meters>` header line, then CSV rows
    `wavelength_nm,plate_reflectance,measured_radiance`.
    """
    distance = None
    wavelengths, refl, rad = [], [], []
    with open(path, newline="", encoding="utf-8") as f:
        for raw in f:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.lower().startswith("distance_m"):
                distance = float(line.split(":", 1)[1] if ":" in line else line.split(",", 1)[1])
                continue
            row = line.split(",")
            if row[0].strip().lower() == "wavelength_nm":
                continue
            if len(row) < 3:
                raise FormatError(
                    f"{path}: expected 'wavelength_nm,reflectance,radiance' rows"
                )
            wavelengths.append(float(row[0]))
            refl.append(float(row[1]))
            rad.append(float(row[2]))
    if distance is None:
        raise FormatError(f"{path}: missing distance_m header line")
    return CalibrationPlate(
        grid=WavelengthGrid(np.array(wavelengths)),
        plate_reflectance=np.array(refl),
        measured_radiance=np.array(rad),
        plate_distance_m=distance,
    )
