"""Dependability modeling toolchain for data warehouse systems."""

__version__ = "0.1.0"
