"""Figures for mfctrl experiment CSVs.

Consumes only the documented CSV interfaces of the experiment CLI
(gen_results, trajectories, losses); never imports the training code.
"""

from .figures import (FigureSpec, SchemaError, gen_scatter, loss_hist,
                      plot, trajectory_fan)

__all__ = ["FigureSpec", "SchemaError", "gen_scatter", "loss_hist",
           "plot", "trajectory_fan"]

__version__ = "0.1.0"
