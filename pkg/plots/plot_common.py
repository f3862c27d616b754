"""Shared CSV reading, figure dispatch, and style for the experiment figures.

The readers enforce the column contracts of the producing subcommands and
fail loudly on mismatch; figures use fixed styles and carry no timestamps,
so a given CSV always renders to identical bytes.
"""
from __future__ import annotations

import csv
import pathlib
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

FIGURE_KINDS = ("contraction", "bias-order")


@dataclass(frozen=True)
class FigureSpec:
    """One figure to render: input CSV, kind, output image path."""

    csv_path: str
    kind: str
    out_path: str
    moment: str = "x1*v1"   # bias-order figures only

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; "
                             f"expected one of {FIGURE_KINDS}")


def render(spec: FigureSpec) -> None:
    # imported here: the figure modules import this one for the CSV readers
    if spec.kind == "contraction":
        from plot_contraction import plot_contraction
        plot_contraction(spec.csv_path, spec.out_path)
    else:
        from plot_bias import plot_bias_order
        plot_bias_order(spec.csv_path, spec.out_path, spec.moment)

SCHEME_COLORS = {"pgp": "tab:blue", "pg": "tab:blue", "obabo": "tab:orange"}
FALLBACK_COLORS = ("tab:green", "tab:red", "tab:purple")


class SchemaError(ValueError):
    pass


def read_csv(path: str | pathlib.Path, required: list[str]) -> list[dict]:
    """Rows of a ``#``-commented CSV as dicts; checks required columns."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    missing = [col for col in required if col not in rows[0]]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}; "
                          f"found {sorted(rows[0])}")
    return rows


def color_for(scheme: str, index: int) -> str:
    return SCHEME_COLORS.get(scheme, FALLBACK_COLORS[index % len(FALLBACK_COLORS)])


def save(fig, out_path: str | pathlib.Path) -> None:
    fig.savefig(out_path, dpi=150, metadata={"Software": "hlmc-plots"})
