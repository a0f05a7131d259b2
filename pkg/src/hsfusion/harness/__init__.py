"""Evaluation protocols, synthetic scenes, PCA composites and the tiled pipeline."""

from .config import ConfigError, RunConfig, config_from_dict, load_config
from .pca import PcaFit, pca_composite, pca_fit
from .pipeline import PipelineError, fuse_tiled, run_pipeline
from .protocols import (FUSION_METHODS, METHODS, WaldRun, full_resolution_eval, run_method,
                        wald_protocol)
from .scene import SyntheticScene, make_scene

__all__ = ["ConfigError", "FUSION_METHODS", "METHODS", "PcaFit", "PipelineError", "RunConfig",
           "SyntheticScene", "WaldRun", "config_from_dict", "full_resolution_eval", "fuse_tiled",
           "load_config", "make_scene", "pca_composite", "pca_fit", "run_method",
           "run_pipeline", "wald_protocol"]
