"""Resonances and field enhancement of an annular aperture in a conducting slab."""

__version__ = "0.1.0"
