#!/usr/bin/env python3
"""Render a coupling-experiment CSV as a semilog contraction figure.

Usage: plot_contraction.py <couple.csv> <out.png>

One line per scheme: mean twisted distance against time on a log axis.
Exact zeros are clipped to the float noise floor instead of dropping to
minus infinity.
"""
from __future__ import annotations

import sys
from collections import defaultdict

import matplotlib.pyplot as plt
import numpy as np

from plot_common import SchemaError, color_for, read_csv, save

REQUIRED = ["scheme", "step", "time", "mean_rho", "se_rho", "mean_euclid", "se_euclid"]
FLOOR_REL = 1e-16


def plot_contraction(csv_path: str, out_path: str) -> None:
    rows = read_csv(csv_path, REQUIRED)
    by_scheme: dict[str, list[tuple[float, float]]] = defaultdict(list)
    for row in rows:
        by_scheme[row["scheme"]].append((float(row["time"]), float(row["mean_rho"])))
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for i, (scheme, pts) in enumerate(sorted(by_scheme.items())):
        pts.sort()
        t = np.array([p[0] for p in pts])
        d = np.array([p[1] for p in pts])
        top = d.max()
        floor = FLOOR_REL * top if top > 0 else FLOOR_REL
        ax.semilogy(t, np.maximum(d, floor), label=scheme,
                    color=color_for(scheme, i), linewidth=1.4)
    ax.set_xlabel("time")
    ax.set_ylabel("mean twisted distance")
    ax.set_title("synchronous-coupling contraction")
    ax.legend()
    ax.grid(True, which="both", alpha=0.25)
    fig.tight_layout()
    save(fig, out_path)
    plt.close(fig)


def main(argv: list[str]) -> int:
    if len(argv) != 2:
        sys.stderr.write(__doc__.strip() + "\n")
        return 1
    try:
        plot_contraction(argv[0], argv[1])
    except (SchemaError, OSError) as exc:
        sys.stderr.write(f"plot_contraction: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
