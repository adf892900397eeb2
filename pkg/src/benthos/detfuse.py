"""Fuse external RGB detections with spectral and pattern features.

Detections arrive as newline-delimited JSON from an upstream CNN; this module
applies the confidence threshold, attaches a deterministic pattern descriptor
(hue + gradient-orientation histograms) and the mean co-registered UHI
spectrum, georeferences each box, and lays the whole collection out in a 2D
image field for human review.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, OutOfRangeError
from .hypercube import HyperCube
from .nav import CameraModel, NavTrack, pixel_to_world, pose_at, uhi_line_footprint

# Closed class set; enumeration order is also the argmax tie-break order.
DEBRIS_CLASSES = ("bottle", "plastic", "anchor", "tire", "metal", "other", "starfish")

HUE_BINS = 16
GRAD_BINS = 32
SPECTRAL_BINS = 16
FEATURE_LENGTH = HUE_BINS + GRAD_BINS + SPECTRAL_BINS + len(DEBRIS_CLASSES)

# Fixed resampling grid for the spectral feature: visible range, independent
# of whatever band count the instrument recorded.
SPECTRAL_BANDS_NM = np.linspace(400.0, 700.0, SPECTRAL_BINS)

PATTERN_SLICE = slice(0, HUE_BINS + GRAD_BINS)
SPECTRUM_SLICE = slice(HUE_BINS + GRAD_BINS, HUE_BINS + GRAD_BINS + SPECTRAL_BINS)
PROBABILITY_SLICE = slice(HUE_BINS + GRAD_BINS + SPECTRAL_BINS, FEATURE_LENGTH)

VIEW_SLICES = {
    "pattern": PATTERN_SLICE,
    "spectrum": SPECTRUM_SLICE,
    "probability": PROBABILITY_SLICE,
}


@dataclass(frozen=True)
class RawDetection:
    """One upstream CNN detection, already past the confidence threshold."""

    frame_id: str
    t: float
    bbox: tuple[float, float, float, float]  # x, y, w, h in frame pixels
    scores: dict[str, float]
    mask: list[tuple[float, float]] | None = None

    @property
    def predicted_class(self) -> str:
        best = max(self.scores.values())
        for name in DEBRIS_CLASSES:  # enumeration order breaks ties
            if self.scores.get(name, -1.0) == best:
                return name
        raise FormatError("scores contain no known class")  # pragma: no cover

    @property
    def max_score(self) -> float:
        return max(self.scores.values())


@dataclass
class IngestError:
    line: int
    message: str


def parse_detection_record(record: dict) -> RawDetection:
    frame_id = record.get("frame_id")
    if not isinstance(frame_id, str) or not frame_id:
        raise FormatError("frame_id must be a non-empty string")
    t = record.get("t")
    if not isinstance(t, (int, float)) or not math.isfinite(t):
        raise FormatError("t must be a finite number")
    bbox = record.get("bbox")
    if (
        not isinstance(bbox, (list, tuple))
        or len(bbox) != 4
        or not all(isinstance(v, (int, float)) and math.isfinite(v) for v in bbox)
    ):
        raise FormatError("bbox must be [x, y, w, h]")
    if bbox[2] <= 0 or bbox[3] <= 0:
        raise FormatError("bbox width and height must be positive")
    scores = record.get("scores")
    if not isinstance(scores, dict) or not scores:
        raise FormatError("scores must be a non-empty object")
    for name, value in scores.items():
        if name not in DEBRIS_CLASSES:
            raise FormatError(f"unknown class {name!r}")
        if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
            raise FormatError(f"score for {name!r} must lie in [0, 1]")
    mask = record.get("mask")
    if mask is not None:
        if not isinstance(mask, list) or any(
            not isinstance(p, (list, tuple)) or len(p) != 2 for p in mask
        ):
            raise FormatError("mask must be a list of [x, y] pairs")
        mask = [(float(px), float(py)) for px, py in mask]
    return RawDetection(
        frame_id=frame_id,
        t=float(t),
        bbox=tuple(float(v) for v in bbox),
        scores={k: float(v) for k, v in scores.items()},
        mask=mask,
    )


def ingest_detections(
    source: str | Path, threshold: float = 0.35
) -> tuple[list[RawDetection], list[IngestError]]:
    """Read NDJSON detections, keeping records with max score >= threshold.

    The boundary is inclusive: a record scoring exactly the threshold stays.
    Malformed records are collected as per-line errors, not fatal.
    """
    if not 0.0 <= threshold <= 1.0:
        raise FormatError(f"threshold must lie in [0, 1], got {threshold}")
    kept: list[RawDetection] = []
    errors: list[IngestError] = []
    text = Path(source).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            det = parse_detection_record(json.loads(line))
        except (json.JSONDecodeError, FormatError) as exc:
            errors.append(IngestError(line=lineno, message=str(exc)))
            continue
        if det.max_score >= threshold:
            kept.append(det)
    return kept, errors


def _hue_degrees(patch: np.ndarray) -> np.ndarray:
    """Per-pixel hue in [0, 360); achromatic pixels report 0."""
    rgb = patch.astype(np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = rgb.max(axis=-1)
    minc = rgb.min(axis=-1)
    delta = maxc - minc
    hue = np.zeros_like(maxc)
    safe = delta > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        rc = np.where(safe, (maxc - r) / delta, 0.0)
        gc = np.where(safe, (maxc - g) / delta, 0.0)
        bc = np.where(safe, (maxc - b) / delta, 0.0)
    hue = np.where(maxc == r, bc - gc, hue)
    hue = np.where((maxc == g) & (maxc != r), 2.0 + rc - bc, hue)
    hue = np.where((maxc == b) & (maxc != r) & (maxc != g), 4.0 + gc - rc, hue)
    hue = np.where(safe, (hue * 60.0) % 360.0, 0.0)
    return hue


def extract_pattern_features(patch: np.ndarray) -> np.ndarray:
    """48-value pattern descriptor: 16-bin hue + 32-bin gradient orientation.

    Gradients use central differences over the luminance channel, unsigned
    orientation, magnitude-weighted. Each histogram is L1-normalized; an
    empty patch or a constant patch leaves the respective part all-zero.
    """
    hue_hist = np.zeros(HUE_BINS)
    grad_hist = np.zeros(GRAD_BINS)
    patch = np.asarray(patch)
    if patch.size == 0:
        return np.concatenate([hue_hist, grad_hist])
    if patch.ndim != 3 or patch.shape[2] != 3:
        raise FormatError(f"expected an (H, W, 3) patch, got {patch.shape}")

    hue = _hue_degrees(patch)
    bins = np.minimum((hue / (360.0 / HUE_BINS)).astype(int), HUE_BINS - 1)
    np.add.at(hue_hist, bins.ravel(), 1.0)
    hue_hist /= hue_hist.sum()

    lum = patch.astype(np.float64) @ np.array([0.299, 0.587, 0.114])
    h, w = lum.shape
    if h >= 3 and w >= 3:
        gx = (lum[1:-1, 2:] - lum[1:-1, :-2]) / 2.0
        gy = (lum[2:, 1:-1] - lum[:-2, 1:-1]) / 2.0
        mag = np.hypot(gx, gy)
        orient = np.arctan2(gy, gx) % math.pi  # unsigned orientation
        bins = np.minimum((orient / (math.pi / GRAD_BINS)).astype(int), GRAD_BINS - 1)
        np.add.at(grad_hist, bins.ravel(), mag.ravel())
        total = grad_hist.sum()
        if total > 0:
            grad_hist /= total
    return np.concatenate([hue_hist, grad_hist])


@dataclass(frozen=True)
class WorldFootprint:
    center_x: float
    center_y: float
    radius: float


def detection_footprint(det: RawDetection, track: NavTrack, cam: CameraModel) -> WorldFootprint:
    """Project the detection box onto the seafloor: center plus corner radius."""
    pose = pose_at(track, det.t)
    x, y, w, h = det.bbox
    cx, cy = pixel_to_world(pose, cam, x + w / 2.0, y + h / 2.0)
    radius = 0.0
    for px, py in ((x, y), (x + w, y), (x, y + h), (x + w, y + h)):
        wx, wy = pixel_to_world(pose, cam, px, py)
        radius = max(radius, math.dist((cx, cy), (wx, wy)))
    return WorldFootprint(center_x=cx, center_y=cy, radius=radius)


def coregister_spectrum(
    det: RawDetection,
    cube: HyperCube,
    track: NavTrack,
    cam: CameraModel,
    uhi_fov_deg: float,
) -> tuple[np.ndarray, bool]:
    """Mean reflectance over UHI pixels inside the detection footprint.

    Returns (spectrum resampled to the 16 fixed bands and L2-normalized,
    covered flag). The UHI swath is narrower than the camera swath by
    design, so an empty intersection is an expected outcome, not an error:
    the spectral part stays zero and the flag reports it.
    """
    footprint = detection_footprint(det, track, cam)
    hits: list[np.ndarray] = []
    for line in range(cube.lines):
        t = float(cube.line_timestamps[line])
        if t < track.t_first or t > track.t_last:
            continue
        points = uhi_line_footprint(pose_at(track, t), uhi_fov_deg, cube.samples)
        d2 = (points[:, 0] - footprint.center_x) ** 2 + (points[:, 1] - footprint.center_y) ** 2
        inside = np.nonzero(d2 <= footprint.radius**2)[0]
        for s in inside:
            hits.append(cube.data[line, s, :])
    if not hits:
        return np.zeros(SPECTRAL_BINS), False
    mean = np.mean(hits, axis=0)
    resampled = np.interp(SPECTRAL_BANDS_NM, cube.grid.wavelengths_nm, mean)
    norm = float(np.linalg.norm(resampled))
    if norm > 0:
        resampled = resampled / norm
    return resampled, True


def score_vector(scores: dict[str, float]) -> np.ndarray:
    return np.array([scores.get(name, 0.0) for name in DEBRIS_CLASSES])


def embed_2d(features: list[np.ndarray] | np.ndarray) -> np.ndarray:
    """Project feature vectors onto their top-2 principal components.

    Components are ordered by descending eigenvalue and oriented so the
    largest-magnitude loading is positive; the layout is scaled uniformly
    into [-1, 1]^2 (a single factor, so pairwise-distance ordering survives).
    Fewer than 3 items degenerate to points on a line: one item sits at the
    origin, two items separate along the first axis.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.size == 0:
        return np.zeros((0, 2))
    if X.ndim != 2:
        raise FormatError(f"expected (n, d) feature matrix, got shape {X.shape}")
    n = X.shape[0]
    if n == 1:
        return np.zeros((1, 2))
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / n
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1][:2]
    components = eigenvectors[:, order]
    if components.shape[1] < 2:  # d == 1 input
        components = np.pad(components, ((0, 0), (0, 2 - components.shape[1])))
    for k in range(2):
        v = components[:, k]
        lead = int(np.argmax(np.abs(v)))
        if v[lead] < 0:
            components[:, k] = -v
    coords = centered @ components
    peak = float(np.abs(coords).max())
    if peak > 0:
        coords = coords / peak
    return coords


@dataclass
class FusedDetection:
    """One reviewable candidate object with everything attached."""

    det_id: str
    raw: RawDetection
    features: np.ndarray
    footprint: WorldFootprint | None
    current_class: str
    review_state: str = "unverified"
    embed_x: float = 0.0
    embed_y: float = 0.0
    spectrum_covered: bool = False

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.shape != (FEATURE_LENGTH,):
            raise FormatError(
                f"feature vector must have length {FEATURE_LENGTH}, got {self.features.shape}"
            )
        if not np.all(np.isfinite(self.features)):
            raise FormatError("feature vector contains non-finite values")
        if self.current_class not in DEBRIS_CLASSES:
            raise FormatError(f"unknown class {self.current_class!r}")

    @property
    def uncertainty(self) -> float:
        return 1.0 - self.raw.max_score

    def to_json_dict(self) -> dict:
        out = {
            "id": self.det_id,
            "frame_id": self.raw.frame_id,
            "t": self.raw.t,
            "bbox": list(self.raw.bbox),
            "scores": self.raw.scores,
            "class": self.current_class,
            "state": self.review_state,
            "embedding": [self.embed_x, self.embed_y],
            "features": self.features.tolist(),
            "spectrum_covered": self.spectrum_covered,
        }
        if self.raw.mask is not None:
            out["mask"] = [list(p) for p in self.raw.mask]
        if self.footprint is not None:
            out["world"] = {
                "x": self.footprint.center_x,
                "y": self.footprint.center_y,
                "radius": self.footprint.radius,
            }
        return out

    @classmethod
    def from_json_dict(cls, record: dict) -> "FusedDetection":
        raw = RawDetection(
            frame_id=record["frame_id"],
            t=record["t"],
            bbox=tuple(record["bbox"]),
            scores=record["scores"],
            mask=[tuple(p) for p in record["mask"]] if "mask" in record else None,
        )
        world = record.get("world")
        footprint = (
            WorldFootprint(center_x=world["x"], center_y=world["y"], radius=world["radius"])
            if world
            else None
        )
        return cls(
            det_id=record["id"],
            raw=raw,
            features=np.array(record["features"]),
            footprint=footprint,
            current_class=record["class"],
            review_state=record.get("state", "unverified"),
            embed_x=record["embedding"][0],
            embed_y=record["embedding"][1],
            spectrum_covered=record.get("spectrum_covered", False),
        )


def extract_patch(frame: np.ndarray, bbox: tuple[float, float, float, float]) -> np.ndarray:
    """Crop a bbox from a frame, clamped to the frame edges."""
    x, y, w, h = bbox
    x0 = max(0, int(math.floor(x)))
    y0 = max(0, int(math.floor(y)))
    x1 = min(frame.shape[1], int(math.ceil(x + w)))
    y1 = min(frame.shape[0], int(math.ceil(y + h)))
    if x1 <= x0 or y1 <= y0:
        return np.zeros((0, 0, 3), dtype=frame.dtype)
    return frame[y0:y1, x0:x1]


def fuse_detections(
    raws: list[RawDetection],
    frames: dict[str, np.ndarray] | None = None,
    cube: HyperCube | None = None,
    track: NavTrack | None = None,
    cam: CameraModel | None = None,
    uhi_fov_deg: float = 60.0,
) -> list[FusedDetection]:
    """Build fused, embedded, georeferenced detections from raw ones.

    Frames, cube, and track are each optional: missing frames zero the
    pattern part, a missing cube zeroes the spectral part, and a missing
    track leaves footprints unset (density export will skip those).
    """
    fused: list[FusedDetection] = []
    feature_rows: list[np.ndarray] = []
    for i, raw in enumerate(raws):
        pattern = np.zeros(HUE_BINS + GRAD_BINS)
        if frames is not None and raw.frame_id in frames:
            pattern = extract_pattern_features(extract_patch(frames[raw.frame_id], raw.bbox))
        spectral = np.zeros(SPECTRAL_BINS)
        covered = False
        footprint = None
        if track is not None and cam is not None:
            try:
                footprint = detection_footprint(raw, track, cam)
            except OutOfRangeError:
                footprint = None
            if cube is not None and footprint is not None:
                spectral, covered = coregister_spectrum(raw, cube, track, cam, uhi_fov_deg)
        features = np.concatenate([pattern, spectral, score_vector(raw.scores)])
        feature_rows.append(features)
        fused.append(
            FusedDetection(
                det_id=f"det-{i:05d}",
                raw=raw,
                features=features,
                footprint=footprint,
                current_class=raw.predicted_class,
                spectrum_covered=covered,
            )
        )
    coords = embed_2d(feature_rows) if feature_rows else np.zeros((0, 2))
    for det, (ex, ey) in zip(fused, coords):
        det.embed_x = float(ex)
        det.embed_y = float(ey)
    return fused


def save_fused(detections: list[FusedDetection], path: str | Path) -> None:
    payload = {"detections": [d.to_json_dict() for d in detections]}
    Path(path).write_text(json.dumps(payload, indent=2), encoding="utf-8")


def load_fused(path: str | Path) -> list[FusedDetection]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return [FusedDetection.from_json_dict(r) for r in payload["detections"]]
