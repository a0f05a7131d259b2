#!/usr/bin/env python3
"""Write a synthetic scene next to example_run.yaml and run the full pipeline on it."""

import json
from pathlib import Path

from hsfusion.harness import load_config, make_scene, run_pipeline
from hsfusion.harness.pipeline import report_text
from hsfusion.raster import write_raster

HERE = Path(__file__).parent


def main():
    demo = HERE / "demo"
    demo.mkdir(exist_ok=True)
    scene = make_scene(192, 192, 40, 4, 4, noise_std=0.0005, seed=0)
    write_raster(scene.hs, demo / "hs.hdr")
    write_raster(scene.pan, demo / "pan.hdr")
    (demo / "sensor.json").write_text(json.dumps(scene.model.to_dict()) + "\n")
    report = run_pipeline(load_config(HERE / "example_run.yaml"))
    print(report_text(report))


if __name__ == "__main__":
    main()
