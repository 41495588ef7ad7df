"""Cycle-level model of a hybrid packet/circuit-switched NoC router and its component library."""

from .errors import ConfigError, NocError
from .model import Coord, IpAssignment, Layer, MeshTopology, Port, RouterConfig, build_mesh, xy_route

__version__ = "0.1.0"

__all__ = ["ConfigError", "NocError", "Coord", "IpAssignment", "Layer", "MeshTopology", "Port",
           "RouterConfig", "build_mesh", "xy_route", "__version__"]
