"""Hyperspectral pansharpening: GSA, MTF-GLP and HySure fusion with
reduced-scale and full-resolution quality assessment."""

from .raster import HyperCube, PanImage, read_raster, write_raster
from .preprocess import SensorModel, degrade, upsample

__version__ = "0.1.0"
