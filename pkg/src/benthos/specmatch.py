"""Spectral angle mapping against reference spectra and threshold segmentation.

The match score between a pixel spectrum and a reference is the angle whose
cosine is their normalized inner product; it is scale-invariant, so lighting
residuals left over after reflectance correction do not move the score. Small
angles mean similar material. Anomaly screening is the same map read the
other way round: pixels far from a seabed background reference stand out.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError, FormatError, OutOfRangeError
from .hypercube import HyperCube, WavelengthGrid
from .ppm import write_ppm

HALF_PI = np.pi / 2.0

# Single-pixel turbidity speckle is common; anything smaller than this is
# noise unless the operator says otherwise.
DEFAULT_MIN_AREA = 8


@dataclass(frozen=True)
class ReferenceSpectrum:
    """Named reflectance spectrum, e.g. "white_plastic" or "sand"."""

    name: str
    grid: WavelengthGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.shape != (len(self.grid),):
            raise FormatError(
                f"reference {self.name!r}: {values.size} values for {len(self.grid)} bands"
            )
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise FormatError(f"reference {self.name!r}: values must be finite and >= 0")
        if float(np.linalg.norm(values)) == 0.0:
            raise DegenerateInputError(f"reference {self.name!r} is all zero")


@dataclass
class SamMap:
    """Per-pixel spectral angle to one reference, radians in [0, pi/2]."""

    angles: np.ndarray
    reference_name: str

    def __post_init__(self) -> None:
        self.angles = np.asarray(self.angles, dtype=np.float64)
        if self.angles.ndim != 2:
            raise FormatError("angle map must be 2-D (lines x samples)")
        if np.any(self.angles < 0) or np.any(self.angles > HALF_PI + 1e-12):
            raise FormatError("spectral angles must lie in [0, pi/2]")

    @property
    def lines(self) -> int:
        return self.angles.shape[0]

    @property
    def samples(self) -> int:
        return self.angles.shape[1]


@dataclass(frozen=True)
class SpectralDetection:
    """One connected blob of matching pixels, inclusive bounding box."""

    line_min: int
    line_max: int
    sample_min: int
    sample_max: int
    pixel_count: int
    mean_angle: float
    reference_name: str

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        return (self.line_min, self.line_max, self.sample_min, self.sample_max)

    @property
    def center(self) -> tuple[float, float]:
        return (
            (self.line_min + self.line_max) / 2.0,
            (self.sample_min + self.sample_max) / 2.0,
        )


def spectral_angle(s: np.ndarray, r: np.ndarray) -> float:
    """Angle in radians between two spectra; 0 means identical shape."""
    s = np.asarray(s, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if s.shape != r.shape:
        raise FormatError(f"spectra lengths differ: {s.shape} vs {r.shape}")
    ns = float(np.linalg.norm(s))
    nr = float(np.linalg.norm(r))
    if ns == 0.0 or nr == 0.0:
        raise DegenerateInputError("zero-norm spectrum has no direction")
    cosine = float(np.dot(s, r)) / (ns * nr)
    # guard floating-point overshoot before arccos
    return float(np.arccos(min(1.0, max(-1.0, cosine))))


def resample_reference(ref: ReferenceSpectrum, target_nm: np.ndarray) -> np.ndarray:
    """Linearly interpolate a reference onto cube band centers.

    Extrapolation is refused: inventing reflectance outside the measured
    range would silently bias every angle.
    """
    src = ref.grid.wavelengths_nm
    target_nm = np.asarray(target_nm, dtype=np.float64)
    if target_nm.min() < src[0] or target_nm.max() > src[-1]:
        raise OutOfRangeError(
            f"reference {ref.name!r} covers {src[0]:g}..{src[-1]:g} nm, "
            f"cube needs {target_nm.min():g}..{target_nm.max():g} nm"
        )
    return np.interp(target_nm, src, ref.values)


def _band_window_indices(
    grid: WavelengthGrid, band_window: tuple[float, float] | None
) -> np.ndarray:
    wl = grid.wavelengths_nm
    if band_window is None:
        return np.arange(wl.size)
    lo, hi = band_window
    idx = np.nonzero((wl >= lo) & (wl <= hi))[0]
    if idx.size == 0:
        raise FormatError(f"band window {lo:g}..{hi:g} nm selects no bands")
    return idx


def sam_map(
    cube: HyperCube,
    ref: ReferenceSpectrum,
    band_window: tuple[float, float] | None = None,
) -> SamMap:
    """Spectral angle of every pixel against ``ref``.

    The reference is resampled onto the cube grid; an optional wavelength
    window restricts the comparison (e.g. to dodge noisy band edges).
    Zero-norm pixels carry no spectral information and score pi/2.
    """
    if cube.kind != "reflectance":
        raise FormatError(f"expected a reflectance cube, got kind={cube.kind!r}")
    idx = _band_window_indices(cube.grid, band_window)
    selected_nm = cube.grid.wavelengths_nm[idx]
    ref_values = resample_reference(ref, selected_nm)
    nr = float(np.linalg.norm(ref_values))
    if nr == 0.0:
        raise DegenerateInputError(
            f"reference {ref.name!r} is zero over the selected window"
        )

    pixels = cube.data[:, :, idx]
    norms = np.linalg.norm(pixels, axis=2)
    dots = pixels @ ref_values
    with np.errstate(invalid="ignore", divide="ignore"):
        cosine = dots / (norms * nr)
    cosine = np.clip(cosine, -1.0, 1.0)
    angles = np.arccos(cosine)
    angles[norms == 0.0] = HALF_PI
    return SamMap(angles=angles, reference_name=ref.name)


def anomaly_score(cube: HyperCube, background_ref: ReferenceSpectrum, band_window=None) -> SamMap:
    """Angle to the seabed background; large values flag anomalous material.

    Numerically identical to :func:`sam_map` — only the reading and the
    segmentation comparison (``mode="anomalous"``) flip.
    """
    return sam_map(cube, background_ref, band_window)


def threshold_segment(
    sam: SamMap,
    threshold: float,
    min_area: int = DEFAULT_MIN_AREA,
    mode: str = "similar",
) -> list[SpectralDetection]:
    """Group qualifying pixels into 4-connected components.

    ``mode="similar"`` keeps pixels with angle <= threshold (reference
    matching); ``mode="anomalous"`` keeps angle >= threshold (background
    deviation). Components smaller than ``min_area`` are dropped. Detections
    are ordered by (line_min, sample_min).
    """
    if not 0.0 < threshold <= HALF_PI:
        raise FormatError(f"threshold must lie in (0, pi/2], got {threshold:g}")
    if min_area < 1:
        raise FormatError(f"min_area must be >= 1, got {min_area}")
    if mode == "similar":
        mask = sam.angles <= threshold
    elif mode == "anomalous":
        mask = sam.angles >= threshold
    else:
        raise FormatError(f"mode must be 'similar' or 'anomalous', got {mode!r}")

    lines, samples = mask.shape
    labels = np.zeros(mask.shape, dtype=np.int32)
    detections: list[SpectralDetection] = []
    next_label = 0
    for l0 in range(lines):
        for s0 in range(samples):
            if not mask[l0, s0] or labels[l0, s0]:
                continue
            next_label += 1
            queue = deque([(l0, s0)])
            labels[l0, s0] = next_label
            member_angles = []
            lmin = lmax = l0
            smin = smax = s0
            count = 0
            while queue:
                li, si = queue.popleft()
                count += 1
                member_angles.append(sam.angles[li, si])
                lmin, lmax = min(lmin, li), max(lmax, li)
                smin, smax = min(smin, si), max(smax, si)
                for lj, sj in ((li - 1, si), (li + 1, si), (li, si - 1), (li, si + 1)):
                    if 0 <= lj < lines and 0 <= sj < samples and mask[lj, sj] and not labels[lj, sj]:
                        labels[lj, sj] = next_label
                        queue.append((lj, sj))
            if count >= min_area:
                detections.append(
                    SpectralDetection(
                        line_min=lmin,
                        line_max=lmax,
                        sample_min=smin,
                        sample_max=smax,
                        pixel_count=count,
                        mean_angle=float(np.mean(member_angles)),
                        reference_name=sam.reference_name,
                    )
                )
    detections.sort(key=lambda d: (d.line_min, d.sample_min))
    return detections


def load_reference(path: str | Path, name: str | None = None) -> ReferenceSpectrum:
    """Read one `wavelength_nm,reflectance` CSV spectrum; file stem names it."""
    path = Path(path)
    wavelengths, values = [], []
    with open(path, newline="", encoding="utf-8") as f:
        for row in csv.reader(f):
            if not row or row[0].strip().startswith("#"):
                continue
            if row[0].strip().lower() == "wavelength_nm":
                continue
            if len(row) < 2:
                raise FormatError(f"{path}: expected 'wavelength_nm,reflectance' rows")
            wavelengths.append(float(row[0]))
            values.append(float(row[1]))
    return ReferenceSpectrum(
        name=name or path.stem,
        grid=WavelengthGrid(np.array(wavelengths)),
        values=np.array(values),
    )


def load_library(directory: str | Path) -> dict[str, ReferenceSpectrum]:
    """Load every `*.csv` spectrum in a directory, keyed by file stem."""
    directory = Path(directory)
    refs = {}
    for path in sorted(directory.glob("*.csv")):
        ref = load_reference(path)
        refs[ref.name] = ref
    return refs


def save_heatmap(sam: SamMap, path: str | Path) -> None:
    """Write the angle map as a PPM, red (similar) to blue (dissimilar)."""
    t = np.clip(sam.angles / HALF_PI, 0.0, 1.0)
    img = np.zeros((sam.lines, sam.samples, 3), dtype=np.uint8)
    img[:, :, 0] = ((1.0 - t) * 255.0).round().astype(np.uint8)
    img[:, :, 2] = (t * 255.0).round().astype(np.uint8)
    write_ppm(path, img)
