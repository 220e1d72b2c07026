"""Prandtl-Batchelor flows in an annulus: matched asymptotics and steady Navier-Stokes solves."""
from .profile import BoundaryData, ShearProfile

__all__ = ["BoundaryData", "ShearProfile"]
