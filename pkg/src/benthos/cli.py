"""Pipeline command line: every stage of the survey post-processing chain.

Subcommands: correct, sam, pseudorgb, mosaic, fuse, serve, density, export.
Exit codes: 0 success, 1 validation error, 2 I/O error. Each run writes a
machine-readable `<command>-summary.json` beside its outputs (no timestamps,
so reruns over identical inputs are bit-identical). A JSON config file can
pre-set any flag; explicit flags win. `BENTHOS_LOG` sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import density as density_mod
from . import detfuse, mosaic, nav, radiometry, review, specmatch
from .errors import BenthosError, CorruptFileError, FormatError
from .hypercube import load_cube, save_cube, save_pseudo_rgb
from .ppm import read_ppm

log = logging.getLogger("benthos")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; the pipeline contract reserves 2 for I/O
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _build_parser() -> tuple[_Parser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="benthos", description=__doc__)
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--jobs", type=int, default=1, help="worker parallelism cap")
    subcommands = parser.add_subparsers(dest="command", required=True)
    subparsers: dict[str, argparse.ArgumentParser] = {}

    def add(name, **kw):
        subparsers[name] = subcommands.add_parser(name, **kw)
        return subparsers[name]

    p = add("correct", help="radiance cube -> reflectance cube")
    p.add_argument("--cube", help="input cube header (.hdr)")
    p.add_argument("--plate", help="calibration plate CSV")
    p.add_argument("--atten", help="attenuation profile CSV")
    p.add_argument("--nav", help="nav CSV; per-line distance = altitude at line time")
    p.add_argument("--distance", type=float, help="constant sensor-seafloor distance (m)")
    p.add_argument("--out", help="output directory")

    p = add("sam", help="spectral angle map + threshold segmentation")
    p.add_argument("--cube", help="reflectance cube header")
    p.add_argument("--ref", help="reference spectrum CSV")
    p.add_argument("--library", help="reference library directory")
    p.add_argument("--ref-name", help="reference name inside --library")
    p.add_argument("--threshold", type=float, help="angle threshold (radians)")
    p.add_argument("--min-area", type=int, default=specmatch.DEFAULT_MIN_AREA)
    p.add_argument("--mode", choices=("similar", "anomalous"), default="similar")
    p.add_argument("--band-window", help="lo,hi wavelength window in nm")
    p.add_argument("--nav", help="nav CSV for georeferencing detections")
    p.add_argument("--uhi-fov", type=float, default=60.0)
    p.add_argument("--out", help="output directory")

    p = add("pseudorgb", help="630/532/465 nm composite PPM")
    p.add_argument("--cube", help="cube header")
    p.add_argument("--out", help="output directory")

    p = add("mosaic", help="nav-driven orthomosaic from PPM frames")
    p.add_argument("--frames", help="directory of <t_seconds>.ppm frames")
    p.add_argument("--nav", help="nav CSV")
    p.add_argument("--cam-fov", type=float, default=70.0)
    p.add_argument("--cell-size", type=float, default=mosaic.DEFAULT_CELL_M)
    p.add_argument("--no-color-correct", action="store_true")
    p.add_argument("--out", help="output directory")

    p = add("fuse", help="threshold, featurize, georeference detections")
    p.add_argument("--detections", help="NDJSON detection records")
    p.add_argument("--threshold", type=float, default=0.35)
    p.add_argument("--frames", help="directory of <t_seconds>.ppm frames")
    p.add_argument("--cube", help="reflectance cube header for spectral features")
    p.add_argument("--nav", help="nav CSV")
    p.add_argument("--cam-fov", type=float, default=70.0)
    p.add_argument("--uhi-fov", type=float, default=60.0)
    p.add_argument("--session-id", default="session")
    p.add_argument("--out", help="output directory (session store lives here)")

    p = add("serve", help="run the review HTTP service")
    p.add_argument("--session", help="session directory")
    p.add_argument("--frames", help="frames directory for thumbnails")
    p.add_argument("--ui", help="static UI directory (default: ./frontend/dist if present)")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--host", default="127.0.0.1")

    p = add("density", help="aggregate exported detections into kg/ha cells")
    p.add_argument("--detections", help="review export JSON")
    p.add_argument("--weights", help="class,kg CSV (defaults built in)")
    p.add_argument("--cell-size", type=float, default=density_mod.DEFAULT_CELL_M)
    p.add_argument("--origin", help="lat,lon of the local frame origin")
    p.add_argument("--nav", help="nav CSV carrying the origin")
    p.add_argument("--out", help="output directory")

    p = add("export", help="final verified detection list from a session")
    p.add_argument("--session", help="session directory")
    p.add_argument("--out", help="output directory")
    return parser, subparsers


def _parse_with_config(argv: list[str]) -> argparse.Namespace:
    """Two-phase parse: config values become defaults, explicit flags win."""
    parser, subparsers = _build_parser()
    args = parser.parse_args(argv)
    if not args.config:
        return args
    config = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if not isinstance(config, dict):
        raise FormatError("config must be a JSON object")
    known = set(vars(args)) - {"command", "config"}
    unknown = [k for k in config if k not in known]
    if unknown:
        raise FormatError(f"config contains unknown keys: {unknown}")
    subparsers[args.command].set_defaults(
        **{k: v for k, v in config.items() if k != "jobs"}
    )
    if "jobs" in config:
        parser.set_defaults(jobs=config["jobs"])
    return parser.parse_args(argv)


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [n for n in names if getattr(args, n.replace("-", "_"), None) is None]
    if missing:
        raise _UsageError(f"missing required flags: {', '.join('--' + n for n in missing)}")


def _out_dir(args: argparse.Namespace) -> Path:
    _require(args, "out")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_summary(out: Path, command: str, summary: dict) -> None:
    summary = {"command": command, **summary}
    (out / f"{command}-summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True), encoding="utf-8"
    )


def _line_distances(cube, args) -> np.ndarray:
    if args.nav:
        track = nav.load_track(args.nav)
        return np.array(
            [nav.pose_at(track, float(t)).altitude for t in cube.line_timestamps]
        )
    if args.distance is not None:
        return np.full(cube.lines, float(args.distance))
    raise _UsageError("correct needs --nav or --distance")


def _cmd_correct(args) -> dict:
    _require(args, "cube", "plate", "atten")
    out = _out_dir(args)
    cube = load_cube(args.cube)
    plate = radiometry.load_plate(args.plate)
    att = radiometry.load_attenuation(args.atten)
    illum = radiometry.calibrate_illuminant(plate, att)
    distances = _line_distances(cube, args)
    result = radiometry.correct_to_reflectance(cube, illum, att, distances)
    out_path = out / "reflectance.hdr"
    save_cube(result.cube, out_path)
    summary = {
        "input_cube": str(args.cube),
        "outputs": [str(out_path), str(out_path.with_suffix(".bil"))],
        "clamped_values": result.clamped,
        "lines": result.cube.lines,
    }
    _write_summary(out, "correct", summary)
    return summary


def _load_ref(args) -> specmatch.ReferenceSpectrum:
    if args.ref:
        return specmatch.load_reference(args.ref)
    if args.library and args.ref_name:
        library = specmatch.load_library(args.library)
        if args.ref_name not in library:
            raise FormatError(
                f"reference {args.ref_name!r} not in library ({sorted(library)})"
            )
        return library[args.ref_name]
    raise _UsageError("sam needs --ref or --library with --ref-name")


def _sam_geojson(detections, cube, track, uhi_fov, threshold) -> dict:
    features = []
    for i, det in enumerate(detections):
        line_c, sample_c = det.center
        t = float(np.interp(line_c, np.arange(cube.lines), cube.line_timestamps))
        pose = nav.pose_at(track, t)
        wx, wy = nav.uhi_sample_to_world(pose, uhi_fov, cube.samples, sample_c)
        lat, lon = nav.to_geodetic(track.origin, wx, wy)
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [lon, lat]},
                "properties": {
                    "id": f"sam-{i:04d}",
                    "reference": det.reference_name,
                    "mean_angle": det.mean_angle,
                    "pixel_count": det.pixel_count,
                    "bbox": list(det.bbox),
                    "threshold": threshold,
                    "world_x": wx,
                    "world_y": wy,
                },
            }
        )
    return {"type": "FeatureCollection", "features": features}


def _cmd_sam(args) -> dict:
    _require(args, "cube", "threshold")
    out = _out_dir(args)
    cube = load_cube(args.cube)
    ref = _load_ref(args)
    window = None
    if args.band_window:
        lo, hi = (float(v) for v in args.band_window.split(","))
        window = (lo, hi)
    sam = specmatch.sam_map(cube, ref, band_window=window)
    detections = specmatch.threshold_segment(
        sam, threshold=args.threshold, min_area=args.min_area, mode=args.mode
    )
    heatmap_path = out / f"sam_{ref.name}.ppm"
    specmatch.save_heatmap(sam, heatmap_path)

    det_records = [
        {
            "bbox": list(d.bbox),
            "pixel_count": d.pixel_count,
            "mean_angle": d.mean_angle,
            "reference": d.reference_name,
        }
        for d in detections
    ]
    outputs = [str(heatmap_path)]
    geojson_path = None
    if args.nav:
        track = nav.load_track(args.nav)
        if track.origin is None:
            raise FormatError("nav file has no origin_lat/origin_lon header")
        doc = _sam_geojson(detections, cube, track, args.uhi_fov, args.threshold)
        geojson_path = out / f"sam_{ref.name}.geojson"
        density_mod.save_geojson(doc, geojson_path)
        outputs.append(str(geojson_path))
        for record, feature in zip(det_records, doc["features"]):
            record["world_x"] = feature["properties"]["world_x"]
            record["world_y"] = feature["properties"]["world_y"]
    det_path = out / f"sam_{ref.name}_detections.json"
    det_path.write_text(
        json.dumps({"reference": ref.name, "threshold": args.threshold,
                    "mode": args.mode, "detections": det_records}, indent=2),
        encoding="utf-8",
    )
    outputs.append(str(det_path))
    summary = {"reference": ref.name, "detections": len(detections), "outputs": outputs}
    _write_summary(out, "sam", summary)
    return summary


def _cmd_pseudorgb(args) -> dict:
    _require(args, "cube")
    out = _out_dir(args)
    cube = load_cube(args.cube)
    path = out / "pseudo_rgb.ppm"
    save_pseudo_rgb(cube, path)
    summary = {"outputs": [str(path)], "lines": cube.lines, "samples": cube.samples}
    _write_summary(out, "pseudorgb", summary)
    return summary


def _cmd_mosaic(args) -> dict:
    _require(args, "frames", "nav")
    out = _out_dir(args)
    frames = mosaic.load_frames(args.frames)
    if not frames:
        raise FormatError(f"no frames in {args.frames}")
    track = nav.load_track(args.nav)
    height, width = frames[0][1].shape[:2]
    cam = nav.CameraModel(hfov_deg=args.cam_fov, width=width, height=height)
    grid, placements = mosaic.build_mosaic(frames, track, cam, cell_m=args.cell_size)
    gains = (1.0, 1.0, 1.0)
    if not args.no_color_correct:
        gains = mosaic.color_correct(grid)
    path = out / "mosaic.ppm"
    mosaic.save_mosaic(grid, path)
    summary = {
        "frames": len(frames),
        "cells": [grid.rows, grid.cols],
        "written_cells": int(np.count_nonzero(grid.writes)),
        "color_gains": list(gains),
        "outputs": [str(path), str(path.with_suffix(".wld"))],
    }
    _write_summary(out, "mosaic", summary)
    return summary


def _cmd_fuse(args) -> dict:
    _require(args, "detections")
    out = _out_dir(args)
    raws, errors = detfuse.ingest_detections(args.detections, threshold=args.threshold)

    frames = None
    cam = None
    if args.frames:
        loaded = mosaic.load_frames(args.frames)
        # accept either spelling of the timestamped frame id ("3" or "3.0")
        frames = {}
        for t, image in loaded:
            frames[f"{t}"] = image
            frames[f"{t:g}"] = image
        if loaded:
            height, width = loaded[0][1].shape[:2]
            cam = nav.CameraModel(hfov_deg=args.cam_fov, width=width, height=height)
    track = nav.load_track(args.nav) if args.nav else None
    cube = load_cube(args.cube) if args.cube else None

    fused = detfuse.fuse_detections(
        raws, frames=frames, cube=cube, track=track, cam=cam, uhi_fov_deg=args.uhi_fov
    )
    fused_path = out / "fused.json"
    detfuse.save_fused(fused, fused_path)
    session_dir = out / args.session_id
    review.SessionStore.create(session_dir, fused, session_id=args.session_id)
    summary = {
        "ingested": len(raws),
        "malformed": [{"line": e.line, "message": e.message} for e in errors],
        "threshold": args.threshold,
        "session_dir": str(session_dir),
        "outputs": [str(fused_path), str(session_dir / "initial.json")],
    }
    _write_summary(out, "fuse", summary)
    return summary


def _cmd_serve(args) -> dict:
    _require(args, "session")
    import uvicorn

    from .api import create_app

    static = args.ui or (
        "frontend/dist" if Path("frontend/dist").is_dir() else None
    )
    app = create_app(args.session, frames_dir=args.frames, static_dir=static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return {"session": args.session}  # pragma: no cover - blocking


def _resolve_origin(args) -> tuple[float, float]:
    if args.origin:
        lat, lon = (float(v) for v in args.origin.split(","))
        return lat, lon
    if args.nav:
        track = nav.load_track(args.nav)
        if track.origin is not None:
            return track.origin
    raise _UsageError("density needs --origin lat,lon or a nav file with an origin")


def _cmd_density(args) -> dict:
    _require(args, "detections")
    out = _out_dir(args)
    payload = json.loads(Path(args.detections).read_text(encoding="utf-8"))
    detections = payload["detections"] if isinstance(payload, dict) else payload
    weights = (
        density_mod.load_weights(args.weights)
        if args.weights
        else density_mod.ClassWeights.defaults()
    )
    origin = _resolve_origin(args)
    grid = density_mod.aggregate_density(detections, weights, cell_m=args.cell_size)
    counts = density_mod.class_counts(detections)
    doc = density_mod.export_geojson(origin, detections=detections, grid=grid)
    geo_path = out / "map.geojson"
    density_mod.save_geojson(doc, geo_path)
    summary = {
        "detections": len(detections),
        "skipped_without_world": grid.skipped,
        "cells": len(grid.cells),
        "class_counts": counts,
        "outputs": [str(geo_path)],
    }
    _write_summary(out, "density", summary)
    return summary


def _cmd_export(args) -> dict:
    _require(args, "session")
    out = _out_dir(args)
    session = review.SessionStore(args.session).open()
    exported = session.export_final()
    path = out / "export.json"
    path.write_text(
        json.dumps({"session_id": session.session_id, "detections": exported}, indent=2),
        encoding="utf-8",
    )
    summary = {
        "session_id": session.session_id,
        "exported": len(exported),
        "rejected": session.rejected_count(),
        "events": len(session.events),
        "outputs": [str(path)],
    }
    _write_summary(out, "export", summary)
    return summary


_COMMANDS = {
    "correct": _cmd_correct,
    "sam": _cmd_sam,
    "pseudorgb": _cmd_pseudorgb,
    "mosaic": _cmd_mosaic,
    "fuse": _cmd_fuse,
    "serve": _cmd_serve,
    "density": _cmd_density,
    "export": _cmd_export,
}


def run_subcommand(argv: list[str]) -> int:
    """Parse and run one pipeline stage; returns the process exit code."""
    logging.basicConfig(level=os.environ.get("BENTHOS_LOG", "WARNING").upper())
    try:
        args = _parse_with_config(argv)
        if args.jobs is not None and args.jobs < 1:
            raise _UsageError("--jobs must be >= 1")
        _COMMANDS[args.command](args)
        return EXIT_OK
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (CorruptFileError, FileNotFoundError, NotADirectoryError, PermissionError, IsADirectoryError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (BenthosError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def main() -> None:
    sys.exit(run_subcommand(sys.argv[1:]))


if __name__ == "__main__":
    main()
