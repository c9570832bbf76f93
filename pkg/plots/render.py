#!/usr/bin/env python3
"""Render pintconv CSV outputs into figures.

Usage:
    python plots/render.py --recipe recipe.json

A recipe is a JSON object:

    {
      "kind":   "heatmap" | "lines" | "xscan",
      "inputs": ["map_value.csv", "map_abs_lambda.csv"],
      "output": "figure.png",
      "title":  "optional title",
      "log_y":  true,            # lines/xscan; default true for lines
      "color_cap": 2.0,          # heatmap color scale cap (default 2)
      "reference_line": 1.0      # lines: dotted horizontal reference
    }

kind=heatmap expects a map CSV (re,im,value) as inputs[0] and optionally the
matching abs_lambda panel as inputs[1]; the |R(-z)| = 1 stability boundary is
overlaid in red when present.  kind=lines expects a study CSV (wave_study or
adv_study schema) and draws every known bound/observed series over k on a log
axis with a dotted reference line.  kind=xscan expects a tap_scan CSV (x,value).

Images are artifacts, not test oracles: correctness lives in the CSVs.
Exit codes: 0 on success, 2 on recipe/schema errors (with a column diff).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

MAP_COLUMNS = ["re", "im", "value"]
XSCAN_COLUMNS = ["x", "value"]
LINE_SERIES = [  # column -> legend label, style
    ("upper_bound", "Upper bound", dict(color="tab:blue", ls="--", marker="s")),
    ("eval_bound", "Eval bound", dict(color="tab:orange", ls=":", marker="*")),
    ("single_it", "Eval single it", dict(color="tab:green", ls="--", marker="^")),
    ("gsvd", "GSVD bound", dict(color="tab:cyan", ls="-.", marker="x")),
    ("worst_cf", "Worst CF", dict(color="tab:red", ls="-", marker="o")),
    ("avg_cf", "Ave CF", dict(color="tab:purple", ls="-", marker="+")),
    ("lower_bound", "Lower bound", dict(color="tab:gray", ls=":", marker="d")),
]


class SchemaError(ValueError):
    pass


def read_table(path: Path, required: list[str]) -> dict[str, np.ndarray]:
    with open(path) as fh:
        reader = csv.DictReader(fh)
        found = reader.fieldnames or []
        missing = [c for c in required if c not in found]
        if missing:
            raise SchemaError(
                f"{path}: column mismatch\n  expected: {required}\n  found:    {found}\n"
                f"  missing:  {missing}")
        rows = list(reader)
    out = {}
    for col in found:
        out[col] = np.array([float(r[col]) if r[col] not in ("", "true", "false")
                             else {"true": 1.0, "false": 0.0, "": np.nan}[r[col]]
                             for r in rows])
    return out


def _pivot(table: dict[str, np.ndarray]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    re = np.unique(table["re"])
    im = np.unique(table["im"])
    grid = table["value"].reshape(len(im), len(re))
    return re, im, grid


def render_heatmap(recipe: dict, ax) -> None:
    table = read_table(Path(recipe["inputs"][0]), MAP_COLUMNS)
    re, im, grid = _pivot(table)
    cap = float(recipe.get("color_cap", 2.0))
    shown = np.clip(np.nan_to_num(grid, nan=cap, posinf=cap), 0.0, cap)
    mesh = ax.pcolormesh(re, im, shown, shading="auto", cmap="viridis",
                         vmin=0.0, vmax=cap)
    plt.colorbar(mesh, ax=ax)
    if len(recipe["inputs"]) > 1:
        stab = read_table(Path(recipe["inputs"][1]), MAP_COLUMNS)
        sre, sim, sgrid = _pivot(stab)
        ax.contour(sre, sim, sgrid, levels=[1.0], colors="red", linewidths=1.5)
    ax.set_xlabel("Re(dt * xi)")
    ax.set_ylabel("Im(dt * xi)")


def render_lines(recipe: dict, ax) -> None:
    table = read_table(Path(recipe["inputs"][0]), ["k"])
    series = [(col, label, style) for col, label, style in LINE_SERIES if col in table]
    if len(series) < 2:
        raise SchemaError(
            f"{recipe['inputs'][0]}: no plottable series\n"
            f"  expected any of: {[c for c, _, _ in LINE_SERIES]}\n"
            f"  found:           {sorted(table)}")
    k = table["k"]
    for col, label, style in series:
        vals = table[col]
        keep = np.isfinite(vals) & (vals > 0)
        if keep.any():
            ax.plot(k[keep], vals[keep], label=label, lw=1.5, ms=5, **style)
    ref = recipe.get("reference_line", 1.0)
    if ref is not None:
        ax.axhline(float(ref), color="black", ls=":", lw=1.0)
    if recipe.get("log_y", True):
        ax.set_yscale("log")
    ax.set_xscale("log", base=2)
    ax.set_xticks(k)
    ax.set_xticklabels([str(int(v)) for v in k])
    ax.set_xlabel("Coarsening factor k")
    ax.set_ylabel("Residual CF")
    ax.legend(fontsize=8)


def render_xscan(recipe: dict, ax) -> None:
    table = read_table(Path(recipe["inputs"][0]), XSCAN_COLUMNS)
    ax.plot(table["x"], table["value"], color="tab:blue", lw=1.5)
    if recipe.get("log_y", False):
        ax.set_yscale("log")
    ax.set_xlabel("x")
    ax.set_ylabel("GSVD bound")


KINDS = {"heatmap": render_heatmap, "lines": render_lines, "xscan": render_xscan}


def render(recipe: dict) -> Path:
    """Render one recipe; returns the written image path."""
    kind = recipe.get("kind")
    if kind not in KINDS:
        raise SchemaError(f"unknown figure kind {kind!r}; choose from {sorted(KINDS)}")
    if not recipe.get("inputs"):
        raise SchemaError("recipe needs a nonempty 'inputs' list")
    if "output" not in recipe:
        raise SchemaError("recipe needs an 'output' image path")
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    try:
        KINDS[kind](recipe, ax)
        if recipe.get("title"):
            ax.set_title(recipe["title"])
        out = Path(recipe["output"])
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, dpi=130, bbox_inches="tight")
    finally:
        plt.close(fig)
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--recipe", type=Path, required=True,
                        help="JSON recipe file (or a list of recipes)")
    args = parser.parse_args(argv)
    try:
        payload = json.loads(args.recipe.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read recipe: {exc}", file=sys.stderr)
        return 2
    recipes = payload if isinstance(payload, list) else [payload]
    try:
        for recipe in recipes:
            out = render(recipe)
            print(f"wrote {out}")
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
