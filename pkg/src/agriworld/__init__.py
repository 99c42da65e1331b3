"""AgriWorld: an executable agricultural world engine with verifiable checkers."""

from .align import AlignmentPolicy, align, check_aligned, reproject_point, reproject_polygon, resample_series
from .bundle import load_world, save_world
from .model import Crs, GridField, ManagementLog, Parcel, Polygon, RasterTimeSeries, WeatherStream, WorldState
from .units import Quantity, UnitDim, convert, quantity_add

__version__ = "0.1.0"

__all__ = [
    "AlignmentPolicy",
    "Crs",
    "GridField",
    "ManagementLog",
    "Parcel",
    "Polygon",
    "Quantity",
    "RasterTimeSeries",
    "UnitDim",
    "WeatherStream",
    "WorldState",
    "align",
    "check_aligned",
    "convert",
    "load_world",
    "quantity_add",
    "reproject_point",
    "reproject_polygon",
    "resample_series",
    "save_world",
]
