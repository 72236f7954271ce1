"""Trace and extension operators between weighted averaged Sobolev norms and
Besov boundary norms on planar Lipschitz graph domains."""

__version__ = "0.1.0"
