"""Tiled end-to-end workflow: screen, tile, fuse, merge, evaluate, render, report."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

from .. import metrics
from ..hysure import estimate_sensor
from ..metrics import fmt
from ..preprocess import (BandMask, SensorModel, apply_band_mask, default_sensor, degrade,
                          screen_bands)
from ..raster import (HyperCube, PanImage, RasterError, extract_tile, merge_tiles, plan_tiles,
                      read_raster, write_raster)
from .config import RunConfig
from .pca import pca_composite, pca_fit
from .protocols import checksum, full_resolution_eval, run_method

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException, tile: Optional[int] = None):
        where = f"stage {stage!r}" + (f", tile {tile}" if tile is not None else "")
        super().__init__(f"{where}: {cause}")
        self.stage, self.tile, self.cause = stage, tile, cause


def default_threads() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1


def effective_tile_size(tile_size: int, rows: int, cols: int, ratio: int) -> int:
    """Shrink the tile to the raster when one tile already covers it."""
    cover = -(-max(rows, cols) // ratio) * ratio
    return min(tile_size, cover)


def fuse_tiled(method: str, hs: HyperCube, pan: PanImage, model: SensorModel,
               params: Optional[dict] = None, tile_size: int = 360, pad_mode: str = "reflect",
               seed: int = 0, threads: Optional[int] = None):
    """Run ``method`` tile by tile and merge; returns (fused, per-tile info list).

    Tiles are planned on the panchromatic grid; the hyperspectral cube is cut
    with the same partition scaled down by the ratio. Tile ``i`` is seeded
    with ``seed + i`` so results do not depend on scheduling.
    """
    r = model.ratio
    if pan.shape != (hs.rows * r, hs.cols * r):
        raise PipelineError("tiling", RasterError(
            f"pan {pan.shape} must be hs {hs.shape[1:]} times ratio {r}"))
    size = effective_tile_size(tile_size, pan.rows, pan.cols, r)
    try:
        grid = plan_tiles(pan.rows, pan.cols, size, r, pad_mode)
        low_grid = grid.scaled(r)
    except RasterError as exc:
        raise PipelineError("tiling", exc) from exc

    def work(i):
        try:
            fused, info = run_method(method, extract_tile(hs, low_grid, i),
                                     extract_tile(pan, grid, i), model, params, seed + i)
        except Exception as exc:
            raise PipelineError(f"fuse:{method}", exc, tile=i) from exc
        return fused, info

    workers = threads or default_threads()
    if workers == 1:
        results = [work(i) for i in range(len(grid))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, range(len(grid))))
    fused = merge_tiles([f for f, _ in results], grid)
    infos = [dict(info, tile=i) for i, (_, info) in enumerate(results)]
    return fused, infos, grid


def build_sensor(cfg: RunConfig, hs: HyperCube, pan: PanImage,
                 mask: Optional[BandMask] = None) -> SensorModel:
    s = cfg.sensor
    ratio = s.ratio or pan.rows // hs.rows
    if pan.shape != (hs.rows * ratio, hs.cols * ratio):
        raise RasterError(f"pan {pan.shape} is not hs {hs.shape[1:]} times ratio {ratio}")
    if s.mode == "estimate":
        return estimate_sensor(hs, pan, ratio, s.psf_size or 2 * ratio + 1,
                               s.smooth_r, s.smooth_b)
    if s.mode == "file":
        model = SensorModel.from_dict(json.loads(Path(s.path).read_text()))
        if model.ratio != ratio:
            raise RasterError(f"sensor file ratio {model.ratio} != raster ratio {ratio}")
        if mask is not None and model.bands == len(mask) and model.bands != hs.bands:
            model = model.select_bands(mask.keep)
        if model.bands != hs.bands:
            raise RasterError(f"sensor file covers {model.bands} bands, cube has {hs.bands}")
        return model
    return default_sensor(hs.bands, ratio, s.gain, s.psf_size)


def _crop_to_ratio(hs: HyperCube, pan: PanImage, ratio: int):
    rows, cols = hs.rows - hs.rows % ratio, hs.cols - hs.cols % ratio
    if (rows, cols) == (hs.rows, hs.cols):
        return hs, pan, None
    if rows == 0 or cols == 0:
        raise RasterError(f"hs {hs.shape[1:]} too small for a reduced-scale run at ratio {ratio}")
    return (hs.with_data(hs.data[:, :rows, :cols]),
            pan.with_data(pan.data[:rows * ratio, :cols * ratio]), [rows, cols])


def _table(title: str, columns: list, rows: list) -> str:
    head = ["Method"] + columns
    lines = [title, "\t".join(head)]
    for name, values in rows:
        lines.append("\t".join([name] + [fmt(values[c]) for c in columns]))
    return "\n".join(lines)


def run_pipeline(cfg: RunConfig, threads: Optional[int] = None) -> dict:
    """Execute the configured run and write fused rasters, composites and reports."""
    cfg.validate()
    threads = threads or cfg.threads
    out = Path(cfg.output_dir)
    try:
        hs, pan = read_raster(cfg.hs), read_raster(cfg.pan)
    except (OSError, RasterError) as exc:
        raise PipelineError("read", exc) from exc
    if not isinstance(hs, HyperCube) or not isinstance(pan, PanImage):
        raise PipelineError("read", RasterError("expected a multi-band hs and a 1-band pan"))

    try:
        bs = cfg.band_screen
        mask = screen_bands(hs, bs.intervals, bs.snr_threshold, bs.drop_indices)
        hs = apply_band_mask(hs, mask)
    except ValueError as exc:
        raise PipelineError("band_screen", exc) from exc
    try:
        model = build_sensor(cfg, hs, pan, mask)
    except (OSError, ValueError) as exc:
        raise PipelineError("sensor", exc) from exc
    log.info("screened to %d bands; ratio %d", hs.bands, model.ratio)

    out.mkdir(parents=True, exist_ok=True)
    report = {
        "config": {k: v for k, v in cfg.to_dict().items() if k != "threads"},
        "band_mask": {"kept": mask.n_kept, "total": len(mask), "reason": list(mask.reason)},
        "sensor_model": model.to_dict(),
        "methods": {},
    }
    for method in cfg.methods:
        params = cfg.method_params.get(method, {})
        fused, infos, grid = fuse_tiled(method, hs, pan, model, params, cfg.tile_size,
                                        cfg.pad_mode, cfg.seed, threads)
        entry = {"tiles": len(grid), "tile_size": grid.tile_size, "tile_info": infos}
        fused_path = out / f"fused_{method}.hdr"
        try:
            write_raster(fused, fused_path)
        except OSError as exc:
            raise PipelineError("write", exc) from exc
        entry["fused"] = fused_path.name

        if "full_resolution" in cfg.protocols:
            try:
                q = full_resolution_eval(fused, hs, pan, model, cfg.window, method)
            except ValueError as exc:
                raise PipelineError("eval:full_resolution", exc) from exc
            entry["full_resolution"] = q.to_dict()
        if "wald" in cfg.protocols:
            entry["wald"] = _wald_tiled(method, hs, pan, model, params, cfg, threads)
        if cfg.pca.enabled:
            try:
                fit = pca_fit(fused, cfg.pca.band_range)
                comp = pca_composite(fused, fit, cfg.pca.pcs, cfg.pca.stretch)
                png = out / f"pca_{method}.png"
                comp.save_png(png)
            except ValueError as exc:
                raise PipelineError("pca", exc) from exc
            entry["pca"] = {"png": png.name, "eigenvalues": fit.eigenvalues[:10].tolist(),
                            "provenance": comp.provenance}
        report["methods"][method] = entry

    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    (out / "report.txt").write_text(report_text(report))
    return report


def _wald_tiled(method, hs, pan, model, params, cfg, threads) -> dict:
    try:
        hs_c, pan_c, crop = _crop_to_ratio(hs, pan, model.ratio)
        low_hs, low_pan = degrade(hs_c, model), degrade(pan_c, model)
    except RasterError as exc:
        raise PipelineError("eval:wald", exc) from exc
    fused, _, _ = fuse_tiled(method, low_hs, low_pan, model, params, cfg.tile_size,
                             cfg.pad_mode, cfg.seed, threads)
    win = min(cfg.window, hs_c.rows, hs_c.cols)
    try:
        q = metrics.QualityReport(
            "wald", uiqi=metrics.uiqi(hs_c, fused, win), sam_deg=metrics.sam(hs_c, fused),
            ergas=metrics.ergas(hs_c, fused, model.ratio),
            parameters={"method": method, "window": win, "ratio": model.ratio})
    except ValueError as exc:
        raise PipelineError("eval:wald", exc) from exc
    d = q.to_dict()
    d["degraded_inputs_checksum"] = checksum(low_hs, low_pan)
    d["cropped_to"] = crop
    return d


def report_text(report: dict) -> str:
    """Human-readable tables in the column order UIQI/SAM/ERGAS, D_lambda/D_S/Q*."""
    blocks = []
    methods = report["methods"]
    wald = [(m, e["wald"]) for m, e in methods.items() if "wald" in e]
    if wald:
        blocks.append(_table("Wald protocol (reduced scale)", ["uiqi", "sam_deg", "ergas"],
                             wald))
    full = [(m, e["full_resolution"]) for m, e in methods.items() if "full_resolution" in e]
    if full:
        blocks.append(_table("Full-resolution evaluation",
                             ["d_lambda_k", "d_s_star", "q_star"], full))
    params = [f"bands kept = {report['band_mask']['kept']} of {report['band_mask']['total']}",
              f"ratio = {report['sensor_model']['ratio']}"]
    for m, e in methods.items():
        params.append(f"{m}: tiles = {e['tiles']}, tile_size = {e['tile_size']}, "
                      f"fused = {e['fused']}")
    blocks.append("\n".join(params))
    return "\n\n".join(blocks) + "\n"
