"""Seismic and well-log curation into HDF5 training tiles."""

__version__ = "0.1.0"
