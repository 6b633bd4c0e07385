"""Relay simulation for Earth-observation satellites acting as space users of a LEO constellation."""

__version__ = "0.1.0"
