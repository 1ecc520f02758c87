"""Equilibrium, entanglement and sideband-cooling numerics for damped quantum oscillators."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"
