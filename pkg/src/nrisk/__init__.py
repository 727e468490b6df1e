"""Barometric neutron-flux and soft-error risk estimates for HPC sites."""

__version__ = "0.1.0"
