"""Radar-camera BEV fusion plumbing and 3D multi-object tracking."""
from fusetrack._backend import BACKEND

__all__ = ["BACKEND", "__version__"]
__version__ = "0.1.0"
