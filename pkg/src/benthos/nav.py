"""Navigation tracks, pose interpolation, and flat-seafloor projection.

Conventions, stated once because nothing upstream defines them:

* World frame is local ENU meters: x east, y north, z up.
* Body frame: x across-track (starboard, image x), y forward, z up.
* Heading is degrees clockwise from north; roll positive starboard-down;
  pitch positive nose-up. Rotation order yaw * pitch * roll.
* The seafloor is the horizontal plane ``altitude`` meters below the
  vehicle (locally flat, shallow low-relief site).
* Pixel columns map linearly to view angle with the edge columns exactly
  at +-FOV/2, so a zero-attitude swath is exactly 2*alt*tan(FOV/2).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, NoIntersectionError, OutOfRangeError

EARTH_RADIUS_M = 6_371_000.0


@dataclass(frozen=True)
class NavSample:
    """One time-stamped vehicle pose."""

    t: float
    x: float
    y: float
    depth: float
    roll: float
    pitch: float
    heading: float
    altitude: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.heading < 360.0:
            raise FormatError(f"heading must lie in [0, 360), got {self.heading}")
        if abs(self.roll) > 90.0 or abs(self.pitch) > 90.0:
            raise FormatError("roll and pitch must lie within +-90 degrees")
        if not self.altitude > 0.0:
            raise FormatError(f"altitude must be positive, got {self.altitude}")


@dataclass(frozen=True)
class CameraModel:
    """Nadir-looking pinhole camera; across-track is image x."""

    hfov_deg: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if not 0.0 < self.hfov_deg < 180.0:
            raise FormatError(f"horizontal FOV must lie in (0, 180), got {self.hfov_deg}")
        if self.width <= 0 or self.height <= 0:
            raise FormatError("image dimensions must be positive")


class NavTrack:
    """Time-ordered pose samples with optional geodetic origin."""

    def __init__(self, samples: list[NavSample], origin: tuple[float, float] | None = None):
        if len(samples) < 2:
            raise FormatError("a track needs at least 2 samples")
        times = [s.t for s in samples]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise FormatError("track timestamps must be strictly increasing")
        self.samples = list(samples)
        self.origin = origin
        self._times = np.array(times)

    @property
    def t_first(self) -> float:
        return self.samples[0].t

    @property
    def t_last(self) -> float:
        return self.samples[-1].t


def _lerp(a: float, b: float, u: float) -> float:
    return a + (b - a) * u


def interpolate_heading(h0: float, h1: float, u: float) -> float:
    """Shortest-arc interpolation across the 0/360 seam."""
    delta = (h1 - h0 + 180.0) % 360.0 - 180.0
    h = (h0 + u * delta) % 360.0
    return 0.0 if h >= 360.0 else h  # fmod of tiny negatives can round to 360


def pose_at(track: NavTrack, t: float) -> NavSample:
    """Interpolated pose at time ``t``; refuses to extrapolate."""
    if t < track.t_first or t > track.t_last:
        raise OutOfRangeError(
            f"t={t:g} outside track span [{track.t_first:g}, {track.t_last:g}]"
        )
    i = int(np.searchsorted(track._times, t, side="right")) - 1
    if i < 0:
        i = 0
    a = track.samples[i]
    if a.t == t or i == len(track.samples) - 1:
        return a
    b = track.samples[i + 1]
    u = (t - a.t) / (b.t - a.t)
    return NavSample(
        t=t,
        x=_lerp(a.x, b.x, u),
        y=_lerp(a.y, b.y, u),
        depth=_lerp(a.depth, b.depth, u),
        roll=_lerp(a.roll, b.roll, u),
        pitch=_lerp(a.pitch, b.pitch, u),
        heading=interpolate_heading(a.heading, b.heading, u),
        altitude=_lerp(a.altitude, b.altitude, u),
    )


def attitude_matrix(roll_deg: float, pitch_deg: float, heading_deg: float) -> np.ndarray:
    """Body-to-world rotation, applied yaw(heading) * pitch * roll."""
    r = math.radians(roll_deg)
    p = math.radians(pitch_deg)
    h = math.radians(heading_deg)
    # roll about body-forward (y), positive starboard-down
    rot_roll = np.array(
        [[math.cos(r), 0.0, math.sin(r)], [0.0, 1.0, 0.0], [-math.sin(r), 0.0, math.cos(r)]]
    )
    # pitch about body-starboard (x), positive nose-up
    rot_pitch = np.array(
        [[1.0, 0.0, 0.0], [0.0, math.cos(p), -math.sin(p)], [0.0, math.sin(p), math.cos(p)]]
    )
    # heading clockwise from north = rotation by -h about world up
    rot_yaw = np.array(
        [[math.cos(h), math.sin(h), 0.0], [-math.sin(h), math.cos(h), 0.0], [0.0, 0.0, 1.0]]
    )
    return rot_yaw @ rot_pitch @ rot_roll


def _ray_to_seafloor(pose: NavSample, direction_body: np.ndarray) -> tuple[float, float]:
    d_world = attitude_matrix(pose.roll, pose.pitch, pose.heading) @ direction_body
    if d_world[2] >= 0.0:
        raise NoIntersectionError(
            "ray does not descend toward the seafloor (extreme attitude)"
        )
    scale = pose.altitude / -d_world[2]
    return pose.x + scale * d_world[0], pose.y + scale * d_world[1]


def pixel_to_world(pose: NavSample, cam: CameraModel, px: float, py: float) -> tuple[float, float]:
    """Project image pixel (px, py) onto the seafloor plane.

    Pixel (0, 0) is the top-left (forward, port) corner; the center pixel of
    a zero-attitude pose maps exactly to (pose.x, pose.y).
    """
    half_w = (cam.width - 1) / 2.0
    half_h = (cam.height - 1) / 2.0
    tan_half = math.tan(math.radians(cam.hfov_deg) / 2.0)
    ux = 0.0 if cam.width == 1 else (px - half_w) / half_w
    # square pixels: rows share the column angular scale
    vy = 0.0 if cam.width == 1 else (py - half_h) / half_w
    direction = np.array([ux * tan_half, -vy * tan_half, -1.0])
    return _ray_to_seafloor(pose, direction)


def uhi_sample_to_world(
    pose: NavSample, fov_deg: float, samples: int, sample_index: float
) -> tuple[float, float]:
    """Project one (possibly fractional) across-track sample to the seafloor."""
    if samples < 1:
        raise FormatError(f"samples must be >= 1, got {samples}")
    if not 0.0 < fov_deg < 180.0:
        raise FormatError(f"FOV must lie in (0, 180), got {fov_deg}")
    tan_half = math.tan(math.radians(fov_deg) / 2.0)
    ux = 0.0 if samples == 1 else 2.0 * sample_index / (samples - 1) - 1.0
    return _ray_to_seafloor(pose, np.array([ux * tan_half, 0.0, -1.0]))


def uhi_line_footprint(pose: NavSample, fov_deg: float, samples: int) -> np.ndarray:
    """World (x, y) of each across-track sample of one UHI scan line."""
    out = np.empty((samples, 2))
    for i in range(samples):
        out[i] = uhi_sample_to_world(pose, fov_deg, samples, float(i))
    return out


def to_geodetic(origin: tuple[float, float], x: float, y: float) -> tuple[float, float]:
    """Local ENU meters -> (lat, lon) degrees on the tangent plane at origin."""
    lat0, lon0 = origin
    lat = lat0 + (y / EARTH_RADIUS_M) * (180.0 / math.pi)
    lon = lon0 + (x / (EARTH_RADIUS_M * math.cos(math.radians(lat0)))) * (180.0 / math.pi)
    return lat, lon


def from_geodetic(origin: tuple[float, float], lat: float, lon: float) -> tuple[float, float]:
    """Inverse of :func:`to_geodetic`."""
    lat0, lon0 = origin
    y = (lat - lat0) * (math.pi / 180.0) * EARTH_RADIUS_M
    x = (lon - lon0) * (math.pi / 180.0) * EARTH_RADIUS_M * math.cos(math.radians(lat0))
    return x, y


_ORIGIN_RE = re.compile(
    r"origin_lat\s*=\s*(?P<lat>[-+0-9.eE]+)\s*,\s*origin_lon\s*=\s*(?P<lon>[-+0-9.eE]+)"
)


def load_track(path: str | Path) -> NavTrack:
    """Read `t,x,y,depth,roll,pitch,heading,altitude` CSV rows.

    An optional comment header `# origin_lat=..., origin_lon=...` sets the
    geodetic origin used by exports.
    """
    origin = None
    samples = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _ORIGIN_RE.search(line)
            if m:
                origin = (float(m.group("lat")), float(m.group("lon")))
            continue
        if line.lower().startswith("t,"):
            continue  # optional column header
        parts = line.split(",")
        if len(parts) != 8:
            raise FormatError(f"{path}:{lineno}: expected 8 comma-separated fields")
        try:
            values = [float(v) for v in parts]
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: non-numeric field: {exc}") from exc
        samples.append(NavSample(*values))
    return NavTrack(samples, origin=origin)


def save_track(track: NavTrack, path: str | Path) -> None:
    lines = []
    if track.origin is not None:
        lines.append(f"# origin_lat={track.origin[0]!r}, origin_lon={track.origin[1]!r}")
    lines.append("t,x,y,depth,roll,pitch,heading,altitude")
    for s in track.samples:
        lines.append(
            f"{s.t!r},{s.x!r},{s.y!r},{s.depth!r},{s.roll!r},{s.pitch!r},{s.heading!r},{s.altitude!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
