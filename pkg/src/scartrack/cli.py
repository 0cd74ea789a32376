"""Batch command-line entry points: one subcommand per pipeline stage.

Exit codes are a stable contract: 0 success, 2 usage or argument errors,
3 data or format errors, 4 backend failures. Messages go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import analysis, metrics, raster, sequence, synthetic, tracker
from .errors import (
    ArgumentError,
    BackendUnavailableError,
    InitializationError,
    PromptPlacementError,
    PropagationError,
    ProtocolError,
    ScartrackError,
    SessionStateError,
)

log = logging.getLogger("scartrack")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_BACKEND = 4


def _load_params(spec: str | None) -> tracker.TrackerParams:
    if not spec:
        return tracker.TrackerParams()
    text = spec if spec.lstrip().startswith("{") else Path(spec).read_text(encoding="utf-8")
    doc = json.loads(text)
    doc.pop("auto_propagate", None)
    return tracker.TrackerParams.from_dict(doc)


def _make_backend(backend_url: str | None):
    if backend_url:
        from .protocol import HttpBackend

        return HttpBackend(base_url=backend_url)
    return tracker.NativeBackend()


def _read_masks_dir(directory: Path, pool: ThreadPoolExecutor) -> list[raster.BinaryMask]:
    paths = sorted(directory.glob("*.pgm"))
    if not paths:
        raise ArgumentError(f"no .pgm masks found in {directory}")
    return list(pool.map(raster.read_mask, paths))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_ndvi(args, pool) -> int:
    if not (args.scale > 0):
        raise ArgumentError(f"--scale must be > 0, got {args.scale}")
    red = raster.read_grid(args.red)
    nir = raster.read_grid(args.nir)
    date = dt.date.fromisoformat(args.date) if args.date else dt.date(1970, 1, 1)
    frame = raster.SpectralFrame(red=red, nir=nir, date=date, reflectance_scale=args.scale)
    ndvi = raster.compute_ndvi(frame)
    raster.write_grid(ndvi.grid, args.out)
    return EXIT_OK


def cmd_resample(args, pool) -> int:
    grid = raster.read_grid(args.input)
    out = raster.resample_bilinear(grid, args.cell)
    raster.write_grid(out, args.out)
    return EXIT_OK


def cmd_build(args, pool) -> int:
    frames_dir = Path(args.frames)
    with open(args.dates, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["filename", "date"]:
            raise ArgumentError(f"dates CSV must have header 'filename,date', got {header}")
        rows = [(row[0], dt.date.fromisoformat(row[1])) for row in reader if row]
    if not rows:
        raise ArgumentError(f"dates CSV {args.dates} lists no frames")

    def load(row):
        name, date = row
        grid = raster.read_grid(frames_dir / name)
        return raster.NdviFrame(grid=grid, date=date)

    frames = list(pool.map(load, rows))
    seq = sequence.build_sequence(frames)
    out = Path(args.out)
    manifest = sequence.export_sequence(seq, out.parent, display_format=args.display_format)
    default = out.parent / "manifest.json"
    if out != default:
        shutil.move(default, out)
    log.info("built sequence of %d frames at %s", len(manifest["frames"]), out)
    return EXIT_OK


def _cli_session_runtime(session_dir: Path, manifest_path: Path,
                         params: tracker.TrackerParams, backend_url: str | None):
    # CLI sessions replay with refine-on-prompt semantics, like the service
    from .service import SessionRuntime

    return SessionRuntime(
        session_id="cli",
        store_dir=session_dir,
        manifest_path=manifest_path,
        params=params,
        auto_propagate=True,
        backend_url=backend_url,
    )


def _export_session_masks(runtime, out_dir: Path) -> None:
    for stale in out_dir.glob("mask_*.pgm"):
        stale.unlink()
    for i, mask in enumerate(runtime.tracker.masks):
        raster.write_mask(mask, out_dir / f"mask_{i:04d}.pgm")


def cmd_track(args, pool) -> int:
    manifest_path = Path(args.manifest).resolve()
    params = _load_params(args.params)
    prompts = tracker.load_prompts(args.prompts)
    by_frame: dict[int, list[tracker.PromptPoint]] = {}
    for p in prompts:
        by_frame.setdefault(p.frame_index, []).append(p)
    if 0 not in by_frame:
        raise InitializationError("the prompt file must place prompts on frame 0")

    out_dir = Path(args.out)
    session_dir = out_dir / "session"
    session_dir.mkdir(parents=True, exist_ok=True)
    runtime = _cli_session_runtime(session_dir, manifest_path, params, args.backend_url)
    record = {
        "session_id": "cli",
        "manifest_path": str(manifest_path),
        "params": params.to_dict(),
        "auto_propagate": True,
        "backend_url": args.backend_url,
        "created_at": dt.datetime.now(dt.timezone.utc).isoformat(),
    }
    (session_dir / "record.json").write_text(json.dumps(record, indent=2) + "\n",
                                             encoding="utf-8")

    events = [{"type": "prompts", "frame": 0,
               "points": [{"row": p.row, "col": p.col, "polarity": p.polarity}
                          for p in by_frame[0]]}]
    if runtime.sequence.n > 1:
        events.append({"type": "propagate", "from_frame": 1})
    for k in sorted(by_frame):
        if k == 0:
            continue
        events.append({"type": "prompts", "frame": k,
                       "points": [{"row": p.row, "col": p.col, "polarity": p.polarity}
                                  for p in by_frame[k]]})
    for event in events:
        runtime.apply_event(event)
        runtime.append_event(event)
    runtime.publish()
    _export_session_masks(runtime, out_dir)
    log.info("tracked %d frames into %s", runtime.tracker.cursor + 1, out_dir)
    return EXIT_OK


def cmd_refine(args, pool) -> int:
    session_dir = Path(args.session) / "session"
    record_path = session_dir / "record.json"
    if not record_path.exists():
        raise ArgumentError(f"{args.session} holds no replayable session (missing {record_path})")
    record = json.loads(record_path.read_text(encoding="utf-8"))
    params = tracker.TrackerParams.from_dict(record.get("params") or {})
    runtime = _cli_session_runtime(session_dir, Path(record["manifest_path"]), params,
                                   record.get("backend_url"))
    runtime.replay()

    prompts = tracker.load_prompts(args.prompts)
    by_frame: dict[int, list[tracker.PromptPoint]] = {}
    for p in prompts:
        by_frame.setdefault(p.frame_index, []).append(p)
    for k in sorted(by_frame):
        event = {"type": "prompts", "frame": k,
                 "points": [{"row": p.row, "col": p.col, "polarity": p.polarity}
                            for p in by_frame[k]]}
        runtime.apply_event(event)
        runtime.append_event(event)
    runtime.publish()
    _export_session_masks(runtime, Path(args.session))
    log.info("refined %d frame groups; cursor at %d", len(by_frame), runtime.tracker.cursor)
    return EXIT_OK


def cmd_eval(args, pool) -> int:
    pred = _read_masks_dir(Path(args.pred), pool)
    truth = _read_masks_dir(Path(args.truth), pool)
    dates = None
    if args.manifest:
        seq = sequence.load_manifest(args.manifest)
        if seq.n == len(pred):
            dates = [f.date for f in seq.frames]
    report = metrics.evaluate_sequence(pred, truth, dates=dates)
    payload = metrics.report_to_json(report)
    if args.out:
        out = Path(args.out)
        out.write_text(payload, encoding="utf-8")
        out.with_suffix(".csv").write_text(metrics.report_to_csv(report), encoding="utf-8")
    if args.json or not args.out:
        sys.stdout.write(payload)
    return EXIT_OK


def cmd_analyze_area(args, pool) -> int:
    seq = sequence.load_manifest(args.manifest)
    masks = _read_masks_dir(Path(args.masks), pool)
    series = analysis.area_series(masks, seq)
    text = analysis.series_to_csv(series)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    if args.json:
        doc = [{"frame_index": e.frame_index, "date": e.date.isoformat(), "area_m2": e.area_m2}
               for e in series.entries]
        json.dump(doc, sys.stdout, indent=2)
        sys.stdout.write("\n")
    elif not args.out:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_analyze_diff(args, pool) -> int:
    reference = raster.read_mask(args.reference)
    current = raster.read_mask(args.current)
    diff = analysis.expansion_diff(reference, current)
    summary = {
        "new_m2": analysis.area(diff.new_area),
        "lost_m2": analysis.area(diff.lost_area),
        "net_m2": diff.net_m2,
    }
    if args.out_prefix:
        prefix = Path(args.out_prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        raster.write_mask(diff.new_area, prefix.parent / (prefix.name + "_new.pgm"))
        raster.write_mask(diff.lost_area, prefix.parent / (prefix.name + "_lost.pgm"))
        (prefix.parent / (prefix.name + "_summary.json")).write_text(
            json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    if args.json or not args.out_prefix:
        json.dump(summary, sys.stdout, indent=2)
        sys.stdout.write("\n")
    return EXIT_OK


def cmd_analyze_spikes(args, pool) -> int:
    series = analysis.series_from_csv(Path(args.series).read_text(encoding="utf-8"))
    events = analysis.detect_spikes(series, factor=args.factor, window=args.window)
    doc = [
        {
            "frame_index": e.frame_index,
            "date": e.date.isoformat(),
            "area_m2": e.area_m2,
            "baseline_m2": e.baseline_m2,
            "ratio": None if e.baseline_m2 == 0 else e.ratio,
        }
        for e in events
    ]
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    if args.json or not args.out:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_analyze_seasons(args, pool) -> int:
    series = analysis.series_from_csv(Path(args.series).read_text(encoding="utf-8"))
    parts = analysis.seasonal_split(series)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    for name, part in parts.items():
        path = prefix.parent / (prefix.name + f"_{name}.csv")
        path.write_text(analysis.series_to_csv(part), encoding="utf-8")
    if args.json:
        doc = {name: len(part) for name, part in parts.items()}
        json.dump(doc, sys.stdout, indent=2)
        sys.stdout.write("\n")
    return EXIT_OK


def cmd_synth(args, pool) -> int:
    summary = synthetic.write_scenario(args.out, kind=args.kind)
    json.dump(summary, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scartrack",
        description="Track landslide scar evolution across NDVI time series",
    )
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    parser.add_argument("--threads", type=int, default=0,
                        help="worker threads for per-frame stages (0 = auto)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ndvi", help="compute NDVI from red and NIR reflectance grids")
    p.add_argument("--red", required=True)
    p.add_argument("--nir", required=True)
    p.add_argument("--scale", type=float, default=10000.0,
                   help="reflectance scale divisor (Sentinel-2 L2A stores x10000)")
    p.add_argument("--date", default=None, help="acquisition date (ISO-8601)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ndvi)

    p = sub.add_parser("resample", help="bilinear resampling to a new cell size")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--cell", type=float, required=True, help="target cell size in meters")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_resample)

    p = sub.add_parser("build", help="assemble dated NDVI grids into a sequence manifest")
    p.add_argument("--frames", required=True, help="directory of .asc NDVI grids")
    p.add_argument("--dates", required=True, help="CSV with header filename,date")
    p.add_argument("--out", required=True, help="manifest path (frames land next to it)")
    p.add_argument("--display-format", choices=("pgm", "png"), default="pgm")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("track", help="initialize from prompts and propagate over the sequence")
    p.add_argument("--manifest", required=True)
    p.add_argument("--prompts", required=True, help="JSON prompt file")
    p.add_argument("--params", default=None, help="tracker params (JSON file or inline object)")
    p.add_argument("--backend-url", default=None,
                   help="external segmentation backend (default: native)")
    p.add_argument("--out", required=True, help="output directory for masks + session")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("refine", help="add prompts to a tracked session and re-propagate")
    p.add_argument("--session", required=True, help="output directory of a previous track run")
    p.add_argument("--prompts", required=True)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("eval", help="score predicted masks against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--manifest", default=None, help="attach frame dates to the report")
    p.add_argument("--out", default=None, help="report JSON path (CSV mirror written beside it)")
    p.add_argument("--json", action="store_true", help="print the JSON report to stdout")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", help="spatiotemporal analytics over tracked masks")
    asub = p.add_subparsers(dest="analysis", required=True)

    a = asub.add_parser("area", help="area time series CSV")
    a.add_argument("--masks", required=True)
    a.add_argument("--manifest", required=True)
    a.add_argument("--out", default=None)
    a.add_argument("--json", action="store_true")
    a.set_defaults(func=cmd_analyze_area)

    a = asub.add_parser("diff", help="expansion diff between two epochs")
    a.add_argument("--reference", required=True)
    a.add_argument("--current", required=True)
    a.add_argument("--out-prefix", default=None)
    a.add_argument("--json", action="store_true")
    a.set_defaults(func=cmd_analyze_diff)

    a = asub.add_parser("spikes", help="failure-event spikes in an area series")
    a.add_argument("--series", required=True, help="area CSV from 'analyze area'")
    a.add_argument("--factor", type=float, default=2.0)
    a.add_argument("--window", type=int, default=5)
    a.add_argument("--out", default=None)
    a.add_argument("--json", action="store_true")
    a.set_defaults(func=cmd_analyze_spikes)

    a = asub.add_parser("seasons", help="split an area series into seasonal subsets")
    a.add_argument("--series", required=True)
    a.add_argument("--out-prefix", required=True)
    a.add_argument("--json", action="store_true")
    a.set_defaults(func=cmd_analyze_seasons)

    p = sub.add_parser("synth", help="write a synthetic test scenario to a directory")
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=("growing", "two_patch"), default="growing")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    workers = args.threads if args.threads > 0 else None
    try:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return args.func(args, pool)
    except (ArgumentError, InitializationError, PromptPlacementError, SessionStateError) as exc:
        print(f"scartrack: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BackendUnavailableError, ProtocolError, PropagationError) as exc:
        print(f"scartrack: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (ScartrackError, OSError, json.JSONDecodeError) as exc:
        print(f"scartrack: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
