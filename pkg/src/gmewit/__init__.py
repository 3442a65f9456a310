"""Quench dynamics of a long-range XY spin chain plus finite-shot
measurement simulation and genuine multipartite entanglement certification
(Bell-fidelity witnesses and SDP-derived quantitative witnesses)."""

__version__ = "0.1.0"
