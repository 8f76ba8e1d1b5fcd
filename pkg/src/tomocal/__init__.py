"""Measurement-device agnostic single-qubit tomography."""

__version__ = "0.1.0"
