"""Push-broom hyperspectral cube model, file I/O, band lookup, pseudo-RGB.

A cube is a stack of across-track scan lines: ``data[line, sample, band]``
with one timestamp per line. On disk a cube is a UTF-8 ``key: value`` header
plus a sibling ``<stem>.bil`` payload of float32 little-endian values in
band-interleaved-by-line order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CorruptFileError, FormatError, OutOfRangeError
from .ppm import write_ppm

WAVELENGTH_SANITY_NM = (300.0, 1000.0)
REFLECTANCE_MAX = 4.0  # allow specular outliers above 1, reject absurdities

# Band centers of the pseudo-RGB composite, red to blue.
PSEUDO_RGB_NM = (630.0, 532.0, 465.0)

KINDS = ("radiance", "reflectance")

_LAYOUT = "bil-float32-le"


@dataclass(frozen=True)
class WavelengthGrid:
    """Strictly increasing band-center wavelengths in nanometers."""

    wavelengths_nm: np.ndarray

    def __post_init__(self) -> None:
        wl = np.asarray(self.wavelengths_nm, dtype=np.float64)
        object.__setattr__(self, "wavelengths_nm", wl)
        if wl.ndim != 1 or wl.size < 3:
            raise FormatError("wavelength grid needs at least 3 bands")
        if not np.all(np.isfinite(wl)):
            raise FormatError("wavelength grid contains non-finite values")
        if np.any(np.diff(wl) <= 0):
            raise FormatError("wavelengths must be strictly increasing")
        lo, hi = WAVELENGTH_SANITY_NM
        if wl[0] < lo or wl[-1] > hi:
            raise FormatError(
                f"wavelengths outside sanity bounds [{lo:g}, {hi:g}] nm: "
                f"{wl[0]:g}..{wl[-1]:g}"
            )

    def __len__(self) -> int:
        return int(self.wavelengths_nm.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WavelengthGrid):
            return NotImplemented
        return np.array_equal(self.wavelengths_nm, other.wavelengths_nm)

    @property
    def mean_spacing_nm(self) -> float:
        wl = self.wavelengths_nm
        return float((wl[-1] - wl[0]) / (wl.size - 1))


@dataclass
class HyperCube:
    """In-memory cube: ``data[line, sample, band]`` plus per-line timestamps."""

    grid: WavelengthGrid
    data: np.ndarray
    line_timestamps: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        self.line_timestamps = np.asarray(self.line_timestamps, dtype=np.float64)
        if self.data.ndim != 3:
            raise FormatError(f"cube data must be 3-D, got {self.data.ndim}-D")
        if self.data.shape[2] != len(self.grid):
            raise FormatError(
                f"cube has {self.data.shape[2]} bands, grid has {len(self.grid)}"
            )
        if self.line_timestamps.shape != (self.data.shape[0],):
            raise FormatError(
                f"{self.line_timestamps.size} timestamps for {self.data.shape[0]} lines"
            )
        if np.any(np.diff(self.line_timestamps) < 0):
            raise FormatError("line timestamps must be monotone non-decreasing")
        if self.kind not in KINDS:
            raise FormatError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not np.all(np.isfinite(self.data)):
            raise FormatError("cube contains non-finite values")
        if self.data.size and float(self.data.min()) < 0.0:
            raise FormatError("cube contains negative values")
        if self.kind == "reflectance" and self.data.size:
            peak = float(self.data.max())
            if peak > REFLECTANCE_MAX:
                raise FormatError(
                    f"reflectance {peak:g} exceeds the plausibility cap {REFLECTANCE_MAX}"
                )

    @property
    def lines(self) -> int:
        return self.data.shape[0]

    @property
    def samples(self) -> int:
        return self.data.shape[1]

    @property
    def bands(self) -> int:
        return self.data.shape[2]


@dataclass
class CubeHeader:
    """Parsed sidecar header; consistent with the payload by construction."""

    lines: int
    samples: int
    bands: int
    grid: WavelengthGrid
    kind: str
    timestamps: np.ndarray
    layout: str = _LAYOUT
    sensor: str = ""
    comment: str = ""
    extras: dict = field(default_factory=dict)


def _parse_header(header_path: Path) -> CubeHeader:
    fields: dict[str, str] = {}
    for lineno, line in enumerate(header_path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise FormatError(f"{header_path}:{lineno}: expected 'key: value'")
        key, value = line.split(":", 1)
        fields[key.strip()] = value.strip()

    required = ("lines", "samples", "bands", "wavelengths_nm", "kind", "timestamps")
    missing = [k for k in required if k not in fields]
    if missing:
        raise FormatError(f"{header_path}: missing header fields {missing}")

    try:
        lines = int(fields["lines"])
        samples = int(fields["samples"])
        bands = int(fields["bands"])
        wavelengths = np.array(
            [float(v) for v in fields["wavelengths_nm"].split(",")], dtype=np.float64
        )
        timestamps = np.array(
            [float(v) for v in fields["timestamps"].split(",")], dtype=np.float64
        )
    except ValueError as exc:
        raise FormatError(f"{header_path}: malformed numeric field: {exc}") from exc

    if lines <= 0 or samples <= 0 or bands <= 0:
        raise FormatError(f"{header_path}: non-positive extents")
    if wavelengths.size != bands:
        raise FormatError(
            f"{header_path}: {wavelengths.size} wavelengths for {bands} bands"
        )
    layout = fields.get("layout", _LAYOUT)
    if layout != _LAYOUT:
        raise FormatError(f"{header_path}: unsupported layout {layout!r}")

    grid = WavelengthGrid(wavelengths)  # raises FormatError on non-monotone grids
    known = set(required) | {"layout", "sensor", "comment"}
    return CubeHeader(
        lines=lines,
        samples=samples,
        bands=bands,
        grid=grid,
        kind=fields["kind"],
        timestamps=timestamps,
        layout=layout,
        sensor=fields.get("sensor", ""),
        comment=fields.get("comment", ""),
        extras={k: v for k, v in fields.items() if k not in known},
    )


def _payload_path(header_path: Path) -> Path:
    return header_path.with_suffix(".bil")


def load_cube(header_path: str | Path) -> HyperCube:
    """Load a cube from its sidecar header and ``.bil`` payload.

    Values are decoded as float32 little-endian in band-interleaved-by-line
    order, i.e. per line all samples of band 0, then band 1, and so on.
    """
    header_path = Path(header_path)
    if not header_path.exists():
        raise CorruptFileError(f"header not found: {header_path}")
    header = _parse_header(header_path)

    payload = _payload_path(header_path)
    if not payload.exists():
        raise CorruptFileError(f"payload not found: {payload}")
    expected = header.lines * header.samples * header.bands * 4
    actual = payload.stat().st_size
    if actual != expected:
        raise CorruptFileError(
            f"{payload}: {actual} bytes, header implies {expected}"
        )

    flat = np.fromfile(payload, dtype="<f4")
    data = flat.reshape(header.lines, header.bands, header.samples).transpose(0, 2, 1)
    return HyperCube(
        grid=header.grid,
        data=data,
        line_timestamps=header.timestamps,
        kind=header.kind,
    )


def save_cube(cube: HyperCube, header_path: str | Path, sensor: str = "", comment: str = "") -> None:
    """Write header + float32 BIL payload. Values are truncated to float32."""
    header_path = Path(header_path)
    wl = ",".join(repr(float(v)) for v in cube.grid.wavelengths_nm)
    ts = ",".join(repr(float(v)) for v in cube.line_timestamps)
    text = (
        f"lines: {cube.lines}\n"
        f"samples: {cube.samples}\n"
        f"bands: {cube.bands}\n"
        f"wavelengths_nm: {wl}\n"
        f"kind: {cube.kind}\n"
        f"timestamps: {ts}\n"
        f"layout: {_LAYOUT}\n"
    )
    if sensor:
        text += f"sensor: {sensor}\n"
    if comment:
        text += f"comment: {comment}\n"
    header_path.write_text(text, encoding="utf-8")
    bil = np.ascontiguousarray(cube.data.transpose(0, 2, 1), dtype="<f4")
    bil.tofile(_payload_path(header_path))


def band_index_for_wavelength(grid: WavelengthGrid, target_nm: float) -> int:
    """Index of the band center nearest ``target_nm``; ties go to the lower index.

    Targets more than half the mean band spacing outside the grid range are
    rejected rather than silently clamped.
    """
    wl = grid.wavelengths_nm
    margin = grid.mean_spacing_nm / 2.0
    if target_nm < wl[0] - margin or target_nm > wl[-1] + margin:
        raise OutOfRangeError(
            f"{target_nm:g} nm lies more than {margin:g} nm outside "
            f"the grid range {wl[0]:g}..{wl[-1]:g} nm"
        )
    # argmin picks the first (lower) index on exact ties
    return int(np.argmin(np.abs(wl - target_nm)))


def _stretch_channel(band: np.ndarray) -> np.ndarray:
    """Percentile stretch one band to uint8: 1st-99th percentile -> 0-255.

    Degenerate window (p1 == p99): fall back to a 0..p99 ramp so constant
    bands keep their relative brightness (a constant-1 band renders at 255,
    a constant-0 band at 0).
    """
    p1, p99 = np.percentile(band, (1.0, 99.0))
    if p99 > p1:
        scaled = (band - p1) / (p99 - p1)
    elif p99 > 0:
        scaled = band / p99
    else:
        scaled = np.zeros_like(band)
    return (np.clip(scaled, 0.0, 1.0) * 255.0).round().astype(np.uint8)


def pseudo_rgb(cube: HyperCube) -> np.ndarray:
    """Render the 630/532/465 nm band composite as an (lines, samples, 3) uint8 image.

    Each channel is independently percentile-stretched (1st-99th -> 0-255,
    clamped) to stay robust against specular outliers in turbid water.
    """
    image = np.empty((cube.lines, cube.samples, 3), dtype=np.uint8)
    for channel, target in enumerate(PSEUDO_RGB_NM):
        idx = band_index_for_wavelength(cube.grid, target)
        image[:, :, channel] = _stretch_channel(cube.data[:, :, idx])
    return image


def save_pseudo_rgb(cube: HyperCube, path: str | Path) -> None:
    write_ppm(path, pseudo_rgb(cube))
