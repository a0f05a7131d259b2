"""Command-line entry point: one subcommand per workflow stage.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from .gsa import DegenerateIntensityError
from .harness import (PipelineError, load_config, make_scene, pca_composite, pca_fit,
                      run_pipeline, wald_protocol)
from .harness.config import BandScreenConfig
from .harness.pipeline import fuse_tiled
from .harness.protocols import METHODS, full_resolution_eval
from .hysure import NumericalError, estimate_sensor
from .metrics import fmt
from .mtfglp import GAIN_MODES, DegenerateLowpassError
from .preprocess import SensorModel, apply_band_mask, default_sensor, screen_bands
from .raster import HyperCube, PanImage, RasterFormatError, read_raster, write_raster

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text: str) -> list:
    return [float(v) for v in text.split(",")]


def _ints(text: str) -> list:
    return [int(v) for v in text.split(",")]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hsfusion", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def sensor_flags(p):
        p.add_argument("--ratio", type=int, help="decimation ratio (default: from dims)")
        p.add_argument("--sensor", default="default",
                       help="'default', 'estimate', or a sensor JSON file")

    p = sub.add_parser("preprocess", help="screen bands and write the reduced cube")
    p.add_argument("--hs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="YAML with intervals / snr_threshold / drop_indices")
    p.add_argument("--drop", action="append", default=[], metavar="LO,HI",
                   help="wavelength interval in nm to remove (repeatable)")
    p.add_argument("--snr-threshold", type=float)

    p = sub.add_parser("sharpen", help="fuse one hs/pan pair")
    p.add_argument("--method", required=True)
    p.add_argument("--hs", required=True)
    p.add_argument("--pan", required=True)
    p.add_argument("--out", required=True)
    sensor_flags(p)
    p.add_argument("--tile-size", type=int, default=360)
    p.add_argument("--pad", choices=("reflect", "zero"), default="reflect")
    p.add_argument("--gain-mode", choices=GAIN_MODES)
    p.add_argument("--config", help="YAML mapping of method parameters")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int)

    p = sub.add_parser("eval-wald", help="reduced-scale (Wald) assessment of one method")
    p.add_argument("--method", required=True, help="fusion method, 'upsample' or 'oracle'")
    p.add_argument("--hs", required=True)
    p.add_argument("--pan", required=True)
    sensor_flags(p)
    p.add_argument("--window", type=int, default=32)
    p.add_argument("--config", help="YAML mapping of method parameters")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("eval-full", help="full-resolution assessment of a fused cube")
    p.add_argument("--fused", required=True)
    p.add_argument("--hs", required=True)
    p.add_argument("--pan", required=True)
    sensor_flags(p)
    p.add_argument("--window", type=int, default=32)

    p = sub.add_parser("composite", help="PCA false-colour composite as PNG")
    p.add_argument("--hs", required=True, help="cube to render (e.g. a fused product)")
    p.add_argument("--out", required=True)
    p.add_argument("--pcs", type=_ints, default=[0, 1, 2])
    p.add_argument("--band-range", type=_floats, default=[400.0, 1010.0])
    p.add_argument("--stretch", type=_floats, default=[2.0, 98.0])

    p = sub.add_parser("make-scene", help="write a synthetic scene with ground truth")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--rows", type=int, default=96)
    p.add_argument("--cols", type=int, default=96)
    p.add_argument("--bands", type=int, default=30)
    p.add_argument("--p", type=int, default=4, help="number of endmembers")
    p.add_argument("--ratio", type=int, default=6)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("run", help="execute a full run from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--threads", type=int)
    p.add_argument("--seed", type=int, help="override the config seed")
    return parser


def _read_cube(path) -> HyperCube:
    r = read_raster(path)
    if not isinstance(r, HyperCube):
        raise UsageError(f"{path} is a single-band image, expected a hyperspectral cube")
    return r


def _read_pan(path) -> PanImage:
    r = read_raster(path)
    if isinstance(r, HyperCube):
        if r.bands != 1:
            raise UsageError(f"{path} has {r.bands} bands, expected a panchromatic image")
        r = PanImage(r.data[0], r.gsd_m)
    return r


def _sensor(args, hs: HyperCube, pan: PanImage) -> SensorModel:
    ratio = args.ratio or pan.rows // hs.rows
    if args.sensor == "default":
        return default_sensor(hs.bands, ratio)
    if args.sensor == "estimate":
        return estimate_sensor(hs, pan, ratio, 2 * ratio + 1)
    model = SensorModel.from_dict(json.loads(Path(args.sensor).read_text()))
    if model.ratio != ratio:
        raise UsageError(f"sensor ratio {model.ratio} disagrees with --ratio {ratio}")
    return model


def _method_params(args) -> dict:
    params = {}
    if getattr(args, "config", None):
        data = yaml.safe_load(Path(args.config).read_text()) or {}
        if not isinstance(data, dict):
            raise UsageError("method config must be a mapping")
        params = dict(data.get(args.method, data))
    if getattr(args, "gain_mode", None):
        params["gain_mode"] = args.gain_mode
    return params


def _check_method(name: str, extra=()):
    valid = list(METHODS) + list(extra)
    if name not in valid:
        raise UsageError(f"unknown method {name!r}; valid methods: {', '.join(valid)}")


def cmd_preprocess(args):
    cube = _read_cube(args.hs)
    screen = BandScreenConfig()
    if args.config:
        data = yaml.safe_load(Path(args.config).read_text()) or {}
        screen = BandScreenConfig(**data.get("band_screen", data))
    intervals = list(screen.intervals) + [_floats(d) for d in args.drop]
    threshold = screen.snr_threshold if args.snr_threshold is None else args.snr_threshold
    mask = screen_bands(cube, intervals, threshold, screen.drop_indices)
    write_raster(apply_band_mask(cube, mask), args.out)
    counts = {r: mask.reason.count(r) for r in sorted(set(mask.reason))}
    print(f"bands kept {mask.n_kept} of {len(mask)} " +
          " ".join(f"{k}={v}" for k, v in counts.items()))


def cmd_sharpen(args):
    _check_method(args.method)
    hs, pan = _read_cube(args.hs), _read_pan(args.pan)
    model = _sensor(args, hs, pan)
    fused, _, grid = fuse_tiled(args.method, hs, pan, model, _method_params(args),
                                args.tile_size, args.pad, args.seed, args.threads)
    write_raster(fused, args.out)
    print(f"fused {fused.bands} bands at {fused.rows}x{fused.cols} ({len(grid)} tiles) "
          f"-> {args.out}")


def cmd_eval_wald(args):
    _check_method(args.method, extra=("oracle",))
    hs, pan = _read_cube(args.hs), _read_pan(args.pan)
    run = wald_protocol(hs, pan, args.method, _sensor(args, hs, pan), _method_params(args),
                        window=args.window, seed=args.seed)
    q = run.report
    print(f"UIQI {fmt(q.uiqi)}, SAM {fmt(q.sam_deg)}, ERGAS {fmt(q.ergas)}")


def cmd_eval_full(args):
    hs, pan, fused = _read_cube(args.hs), _read_pan(args.pan), _read_cube(args.fused)
    q = full_resolution_eval(fused, hs, pan, _sensor(args, hs, pan), args.window)
    print(f"D_lambda_K {fmt(q.d_lambda_k)}, D_S* {fmt(q.d_s_star)}, Q* {fmt(q.q_star)}")


def cmd_composite(args):
    cube = _read_cube(args.hs)
    band_range = args.band_range if cube.wavelengths_nm is not None else None
    fit = pca_fit(cube, band_range)
    comp = pca_composite(cube, fit, args.pcs, args.stretch)
    comp.save_png(args.out)
    flagged = comp.degenerate_channels
    print(f"composite of PCs {args.pcs} over {fit.band_indices.size} bands -> {args.out}"
          + (f" (degenerate channels {flagged})" if flagged else ""))


def cmd_make_scene(args):
    scene = make_scene(args.rows, args.cols, args.bands, args.p, args.ratio, args.noise,
                       args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_raster(scene.hs, out / "hs.hdr")
    write_raster(scene.pan, out / "pan.hdr")
    write_raster(scene.truth, out / "truth.hdr")
    (out / "sensor.json").write_text(json.dumps(scene.model.to_dict(), indent=2) + "\n")
    np.savetxt(out / "endmembers.txt", scene.endmembers)
    print(f"scene {args.rows}x{args.cols}x{args.bands}, p={args.p}, ratio {args.ratio} -> {out}")


def cmd_run(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    report = run_pipeline(cfg, threads=args.threads)
    for method, entry in report["methods"].items():
        parts = [method]
        if "wald" in entry:
            w = entry["wald"]
            parts.append(f"UIQI {fmt(w['uiqi'])} SAM {fmt(w['sam_deg'])} "
                         f"ERGAS {fmt(w['ergas'])}")
        if "full_resolution" in entry:
            f = entry["full_resolution"]
            parts.append(f"D_lambda_K {fmt(f['d_lambda_k'])} D_S* {fmt(f['d_s_star'])} "
                         f"Q* {fmt(f['q_star'])}")
        print("  ".join(parts))


COMMANDS = {
    "preprocess": cmd_preprocess, "sharpen": cmd_sharpen, "eval-wald": cmd_eval_wald,
    "eval-full": cmd_eval_full, "composite": cmd_composite, "make-scene": cmd_make_scene,
    "run": cmd_run,
}

_NUMERICAL = (NumericalError, ArithmeticError, np.linalg.LinAlgError,
              DegenerateIntensityError, DegenerateLowpassError)


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, PipelineError):
        return exit_code_for(exc.cause)
    if isinstance(exc, _NUMERICAL):
        return EXIT_NUMERICAL
    if isinstance(exc, (OSError, RasterFormatError)):
        return EXIT_IO
    return EXIT_VALIDATION


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except Exception as exc:
        code = exit_code_for(exc)
        kind = {EXIT_VALIDATION: "validation", EXIT_IO: "I/O",
                EXIT_NUMERICAL: "numerical"}[code]
        print(f"{kind} error: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
