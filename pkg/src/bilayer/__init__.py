"""Bivariate bicycle codes on a two-layer nearest-neighbour grid.

Modules build the codes and their toric layouts, route teleportation paths,
simulate Bell-pair purification, compile masked memory circuits, derive
detector error models and decode them with BP+OSD.
"""

__version__ = "0.1.0"
