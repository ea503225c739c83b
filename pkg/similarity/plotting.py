# similarity/plotting.py
import logging
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np
from django.conf import settings

logger = logging.getLogger(__name__)

# fixed id salt and no timestamp keep repeated runs byte-identical
matplotlib.rcParams['svg.hashsalt'] = 'similarity'
matplotlib.rcParams['svg.fonttype'] = 'path'


def line_plot(path, x: Sequence[float], series: Mapping[str, Sequence[float]],
              xlabel: str, ylabel: str, title: str = '', swap_axes: bool = False) -> Path:
    """
    One polyline per series against x. swap_axes puts x on the vertical axis
    (inverted) for depth profiles.
    """
    fmt = getattr(settings, 'SIMILARITY_PLOT_FORMAT', 'svg')
    path = Path(path).with_suffix(f".{fmt}")
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    try:
        for label, values in series.items():
            values = np.asarray(values, dtype=float)
            if swap_axes:
                ax.plot(values, x, label=label, linewidth=1.2)
            else:
                ax.plot(x, values, label=label, linewidth=1.2)
        if swap_axes:
            ax.invert_yaxis()
            xlabel, ylabel = ylabel, xlabel
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(series) > 1:
            ax.legend(fontsize='small')
        ax.grid(True, linewidth=0.3)
        fig.tight_layout()
        fig.savefig(path, format=fmt, metadata={'Date': None})
    finally:
        plt.close(fig)
    logger.debug(f"Wrote plot {path}")
    return path
