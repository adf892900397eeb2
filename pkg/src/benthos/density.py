"""Debris density grids and GeoJSON map products.

Counts come straight from the review export; mass densities use an
operator-supplied average weight per class (kg). Cells are anchored at
integer multiples of the cell size in world coordinates, lower-inclusive,
so shifting a survey by exactly one cell shifts its occupied cells by
exactly one index. kg/ha = sum(count * weight) / cell_area_m2 * 10000.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from .detfuse import DEBRIS_CLASSES
from .errors import FormatError
from .nav import to_geodetic

log = logging.getLogger(__name__)

SQM_PER_HECTARE = 10_000.0

# Hectare-fraction arithmetic stays exact in decimal with 10 m cells.
DEFAULT_CELL_M = 10.0

# Starfish are fauna: counted for the benthic picture, zero mass by default.
DEFAULT_WEIGHTS_KG = {
    "bottle": 0.4,
    "plastic": 0.1,
    "anchor": 5.0,
    "tire": 8.0,
    "metal": 2.0,
    "other": 0.5,
    "starfish": 0.0,
}


@dataclass(frozen=True)
class ClassWeights:
    """Average weight per class in kilograms; operator-supplied estimates."""

    kg: dict[str, float]

    def __post_init__(self) -> None:
        missing = [c for c in DEBRIS_CLASSES if c not in self.kg]
        if missing:
            raise FormatError(f"weights missing classes: {missing}")
        unknown = [c for c in self.kg if c not in DEBRIS_CLASSES]
        if unknown:
            raise FormatError(f"weights name unknown classes: {unknown}")
        bad = {c: w for c, w in self.kg.items() if not (math.isfinite(w) and w >= 0)}
        if bad:
            raise FormatError(f"weights must be finite and >= 0: {bad}")

    @classmethod
    def defaults(cls) -> "ClassWeights":
        return cls(kg=dict(DEFAULT_WEIGHTS_KG))


@dataclass
class DensityCell:
    counts: dict[str, int] = field(default_factory=lambda: {c: 0 for c in DEBRIS_CLASSES})
    kg_per_ha: float = 0.0


@dataclass
class DensityGrid:
    cell_m: float
    cells: dict[tuple[int, int], DensityCell]
    skipped: int  # detections without a world footprint

    @property
    def bounds(self) -> tuple[float, float, float, float] | None:
        if not self.cells:
            return None
        xs = [ix for ix, _ in self.cells]
        ys = [iy for _, iy in self.cells]
        return (
            min(xs) * self.cell_m,
            min(ys) * self.cell_m,
            (max(xs) + 1) * self.cell_m,
            (max(ys) + 1) * self.cell_m,
        )

    def total_counts(self) -> dict[str, int]:
        totals = {c: 0 for c in DEBRIS_CLASSES}
        for cell in self.cells.values():
            for c, n in cell.counts.items():
                totals[c] += n
        return totals


def _cell_index(x: float, y: float, cell_m: float) -> tuple[int, int]:
    # half-open cells, lower edge inclusive
    return math.floor(x / cell_m), math.floor(y / cell_m)


def aggregate_density(
    detections: list[dict],
    weights: ClassWeights,
    cell_m: float = DEFAULT_CELL_M,
) -> DensityGrid:
    """Bin exported detections by world center and derive kg/ha per cell.

    Records lacking a world footprint are skipped (counted, logged); rejected
    detections must already be gone — the review export enforces that.
    """
    if not cell_m > 0:
        raise FormatError(f"cell size must be positive, got {cell_m}")
    cells: dict[tuple[int, int], DensityCell] = {}
    skipped = 0
    for det in detections:
        world = det.get("world")
        if not world:
            skipped += 1
            continue
        cls = det["class"]
        if cls not in DEBRIS_CLASSES:
            raise FormatError(f"unknown class {cls!r} in detection {det.get('id')}")
        key = _cell_index(world["x"], world["y"], cell_m)
        cells.setdefault(key, DensityCell()).counts[cls] += 1
    if skipped:
        log.warning("aggregate_density: %d detections had no world footprint", skipped)

    area = cell_m * cell_m
    for cell in cells.values():
        mass = sum(cell.counts[c] * weights.kg[c] for c in DEBRIS_CLASSES)
        cell.kg_per_ha = mass / area * SQM_PER_HECTARE
    return DensityGrid(cell_m=cell_m, cells=cells, skipped=skipped)


def class_counts(detections: list[dict]) -> dict[str, int]:
    counts = {c: 0 for c in DEBRIS_CLASSES}
    for det in detections:
        cls = det["class"]
        if cls not in DEBRIS_CLASSES:
            raise FormatError(f"unknown class {cls!r}")
        counts[cls] += 1
    return counts


def export_geojson(
    origin: tuple[float, float],
    detections: list[dict] | None = None,
    grid: DensityGrid | None = None,
) -> dict:
    """RFC 7946 FeatureCollection: detection Points plus density-cell Polygons.

    Local coordinates are mapped through the tangent plane at ``origin``;
    detections without a footprint yield no feature.
    """
    features: list[dict] = []
    for det in detections or []:
        world = det.get("world")
        if not world:
            continue
        lat, lon = to_geodetic(origin, world["x"], world["y"])
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [lon, lat]},
                "properties": {
                    "id": det.get("id"),
                    "class": det["class"],
                    "state": det.get("state"),
                    "scores": det.get("scores", {}),
                },
            }
        )
    if grid is not None:
        for (ix, iy), cell in sorted(grid.cells.items()):
            x0, y0 = ix * grid.cell_m, iy * grid.cell_m
            x1, y1 = x0 + grid.cell_m, y0 + grid.cell_m
            ring = [
                list(reversed(to_geodetic(origin, x, y)))
                for x, y in ((x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0))
            ]
            features.append(
                {
                    "type": "Feature",
                    "geometry": {"type": "Polygon", "coordinates": [ring]},
                    "properties": {
                        "kg_per_ha": cell.kg_per_ha,
                        "counts": {c: n for c, n in cell.counts.items() if n},
                    },
                }
            )
    return {"type": "FeatureCollection", "features": features}


def save_geojson(document: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(document, indent=2), encoding="utf-8")


def load_weights(path: str | Path) -> ClassWeights:
    """Read `class,kg` CSV rows; classes not listed fall back to the defaults."""
    kg = dict(DEFAULT_WEIGHTS_KG)
    with open(path, newline="", encoding="utf-8") as f:
        for row in csv.reader(f):
            if not row or row[0].strip().startswith("#"):
                continue
            if row[0].strip().lower() == "class":
                continue
            if len(row) < 2:
                raise FormatError(f"{path}: expected 'class,kg' rows")
            kg[row[0].strip()] = float(row[1])
    return ClassWeights(kg=kg)
