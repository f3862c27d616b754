#!/usr/bin/env python3
"""Render a bias-sweep CSV as a log-log order plot.

Usage: plot_bias.py <bias.csv> <out.png> [moment]

|bias| of the chosen stationary moment (default x1*v1) against the step
size, one marker set per scheme, with slope-1 and slope-2 guide lines.
Rows whose bias does not exceed five standard errors (``used`` = 0) are
drawn hollow.
"""
from __future__ import annotations

import sys
from collections import defaultdict

import matplotlib.pyplot as plt
import numpy as np

from plot_common import SchemaError, color_for, read_csv, save

REQUIRED = ["h", "scheme", "moment", "estimate", "reference", "abs_bias", "se", "used"]


def plot_bias_order(csv_path: str, out_path: str, moment: str = "x1*v1") -> None:
    rows = [r for r in read_csv(csv_path, REQUIRED) if r["moment"] == moment]
    if not rows:
        raise SchemaError(f"{csv_path}: no rows for moment {moment!r}")
    by_scheme = defaultdict(list)
    for row in rows:
        by_scheme[row["scheme"]].append(
            (float(row["h"]), float(row["abs_bias"]), row["used"] not in ("0", "", "False")))
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    hs_all = np.array(sorted({float(r["h"]) for r in rows}))
    positives = [b for pts in by_scheme.values() for (_, b, _) in pts if b > 0]
    anchor = np.median(positives) if positives else 1e-6
    h_mid = np.median(hs_all)
    for slope, style in ((1, "--"), (2, ":")):
        guide = anchor * (hs_all / h_mid) ** slope
        ax.loglog(hs_all, guide, style, color="gray", linewidth=1.0,
                  label=f"slope {slope}")
    for i, (scheme, pts) in enumerate(sorted(by_scheme.items())):
        pts.sort()
        color = color_for(scheme, i)
        used = [(h, b) for h, b, u in pts if u]
        unused = [(h, b) for h, b, u in pts if not u]
        if used:
            ax.loglog(*zip(*used), "o-", color=color, label=scheme)
        if unused:
            ax.loglog(*zip(*unused), "o", markerfacecolor="none", color=color,
                      label=f"{scheme} (below 5 SE)")
    ax.set_xlabel("step size h")
    ax.set_ylabel(f"|bias| of {moment}")
    ax.set_title("invariant-measure bias order")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.25)
    fig.tight_layout()
    save(fig, out_path)
    plt.close(fig)


def main(argv: list[str]) -> int:
    if len(argv) not in (2, 3):
        sys.stderr.write(__doc__.strip() + "\n")
        return 1
    try:
        plot_bias_order(*argv)
    except (SchemaError, OSError) as exc:
        sys.stderr.write(f"plot_bias: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
