"""Vector-graphic impulse-response grids. Presentation only."""

from __future__ import annotations

import io
import math

import matplotlib
from matplotlib.figure import Figure

from ..irf import IrfResult

# fixed salt and no timestamp keep the SVG bytes reproducible
SVG_RC = {"svg.hashsalt": "bpvarx", "svg.fonttype": "path"}


def irf_grid_svg(irf: IrfResult, impulse: str, title: str | None = None) -> str:
    """Responses of every variable to ``impulse`` in a two-column grid."""
    names = irf.names
    ncols = 2
    nrows = math.ceil(len(names) / ncols)
    h = list(range(irf.values.shape[0]))
    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=(8.0, 2.8 * nrows))
        axes = fig.subplots(nrows, ncols, squeeze=False)
        for k, resp in enumerate(names):
            ax = axes.flat[k]
            if irf.lower is not None:
                lo, hi = irf.band(impulse, resp)
                ax.fill_between(h, lo, hi, color="0.85", linewidth=0)
            ax.plot(h, irf.response(impulse, resp), color="k", linewidth=1.2)
            ax.axhline(0.0, color="0.4", linewidth=0.6, linestyle="--")
            label = "Accumulated response" if irf.accumulated else "Response"
            ax.set_title(f"{label} of {resp} to {impulse}", fontsize=9)
            ax.set_xlabel("horizon", fontsize=8)
            ax.tick_params(labelsize=7)
        for ax in list(axes.flat)[len(names):]:
            ax.set_visible(False)
        if title:
            fig.suptitle(title, fontsize=10)
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()
