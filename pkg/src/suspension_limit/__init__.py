"""Particle model of suspensions with lubrication and roughness, and its continuum limit."""

__version__ = "0.1.0"
