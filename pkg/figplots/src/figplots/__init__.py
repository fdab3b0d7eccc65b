"""Render simulation CSV outputs into publication-style figures.

Read-only consumer of the simulator's file formats; never recomputes
physics.  Five figure kinds: complex-spectrum scatter, density heatmaps,
entropy-vs-size curves, data-collapse plots with a 1/x guide line, and
current-vs-timestep decay.
"""

from .render import PlotSpec, SchemaError, render

__all__ = ["PlotSpec", "SchemaError", "render"]
