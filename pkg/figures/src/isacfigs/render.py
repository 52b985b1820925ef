"""Render experiment CSVs into paper-style figures.

Recipes declare which CSV feeds which figure kind (lines, grouped lines,
heatmap, surface, bars) and which columns to use; rendering fails loudly
whenever a declared column is missing.  Given byte-identical CSV input the
output image is pixel-identical: fixed style, no timestamps, no randomness.

Run as `leoisac-figures --recipe FILE` for one figure or
`leoisac-figures --all --in-dir RUNS --out-dir FIGS` to render every
standard experiment output found in a run directory.
"""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import yaml

STYLE = {
    "figure.figsize": (6.0, 4.2),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
    "lines.linewidth": 1.6,
    "savefig.bbox": "tight",
}

KINDS = ("lines", "grouped-lines", "heatmap", "surface", "bars")


class RecipeError(ValueError):
    """Malformed recipe or CSV that does not carry the declared columns."""


@dataclass(frozen=True)
class FigureRecipe:
    kind: str
    csv_path: str
    out_path: str
    x: str = ""
    y: list[str] = field(default_factory=list)
    value: str = ""
    group: str = ""
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    log_y: bool = False

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise RecipeError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")

    @classmethod
    def from_yaml(cls, path: str) -> "FigureRecipe":
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
        if not isinstance(raw, dict):
            raise RecipeError("recipe must be a mapping")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise RecipeError(f"unknown recipe keys: {sorted(unknown)}")
        return cls(**raw)


def read_table(path: str, required: list[str]) -> dict[str, np.ndarray]:
    """Load the CSV columns named in `required`, failing with a diagnostic
    listing what the file actually carries."""
    p = Path(path)
    if not p.exists():
        raise RecipeError(f"csv not found: {path}")
    with open(p, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RecipeError(f"{path}: empty file, no header row") from None
        rows = list(reader)
    missing = [c for c in required if c not in header]
    if missing:
        raise RecipeError(
            f"{path}: missing columns {missing}; file has {header}"
        )
    if not rows:
        raise RecipeError(f"{path}: no data rows")
    idx = {c: header.index(c) for c in required}
    out: dict[str, np.ndarray] = {}
    for c in required:
        col = [r[idx[c]] for r in rows]
        try:
            out[c] = np.array([float(v) for v in col])
        except ValueError:
            out[c] = np.array(col, dtype=object)
    return out


def _finish(fig, ax, recipe: FigureRecipe):
    if recipe.title:
        ax.set_title(recipe.title)
    if recipe.xlabel:
        ax.set_xlabel(recipe.xlabel)
    if recipe.ylabel:
        ax.set_ylabel(recipe.ylabel)


def build_figure(recipe: FigureRecipe):
    """Matplotlib figure for a recipe; separated from saving for testing."""
    with plt.rc_context(STYLE):
        if recipe.kind == "lines":
            table = read_table(recipe.csv_path, [recipe.x] + list(recipe.y))
            fig, ax = plt.subplots()
            for col in recipe.y:
                ax.plot(table[recipe.x], table[col], label=col)
            ax.legend()
            _finish(fig, ax, recipe)
            return fig

        if recipe.kind == "grouped-lines":
            cols = [recipe.group, recipe.x] + list(recipe.y)
            table = read_table(recipe.csv_path, cols)
            fig, ax = plt.subplots()
            for name in sorted(set(table[recipe.group])):
                mask = table[recipe.group] == name
                order = np.argsort(table[recipe.x][mask])
                ax.plot(
                    table[recipe.x][mask][order],
                    table[recipe.y[0]][mask][order],
                    marker="o",
                    label=str(name),
                )
            ax.legend()
            _finish(fig, ax, recipe)
            return fig

        if recipe.kind in ("heatmap", "surface"):
            cols = [recipe.x, recipe.y[0], recipe.value]
            table = read_table(recipe.csv_path, cols)
            xs = np.unique(table[recipe.x])
            ys = np.unique(table[recipe.y[0]])
            grid = np.full((ys.size, xs.size), np.nan)
            xi = np.searchsorted(xs, table[recipe.x])
            yi = np.searchsorted(ys, table[recipe.y[0]])
            grid[yi, xi] = table[recipe.value]
            if recipe.log_y:
                with np.errstate(divide="ignore"):
                    grid = 10.0 * np.log10(np.maximum(grid, np.finfo(float).tiny))
            if recipe.kind == "heatmap":
                fig, ax = plt.subplots()
                mesh = ax.pcolormesh(xs, ys, grid, shading="nearest")
                fig.colorbar(mesh, ax=ax, label=recipe.value)
                _finish(fig, ax, recipe)
                return fig
            fig = plt.figure()
            ax = fig.add_subplot(projection="3d")
            xg, yg = np.meshgrid(xs, ys)
            ax.plot_surface(xg, yg, grid, cmap="viridis", linewidth=0)
            _finish(fig, ax, recipe)
            ax.set_zlabel(recipe.value)
            return fig

        # bars
        table = read_table(recipe.csv_path, [recipe.x, recipe.y[0]])
        fig, ax = plt.subplots()
        labels = [str(v) for v in table[recipe.x]]
        ax.bar(np.arange(len(labels)), table[recipe.y[0]])
        ax.set_xticks(np.arange(len(labels)), labels, rotation=30)
        _finish(fig, ax, recipe)
        return fig


def render(recipe: FigureRecipe) -> str:
    """Render one recipe to its output image; returns the path written."""
    fig = build_figure(recipe)
    out = Path(recipe.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, metadata={"Software": None})
    plt.close(fig)
    return str(out)


def standard_recipes(in_dir: str, out_dir: str) -> list[FigureRecipe]:
    """Default recipes for the standard experiment CSV names."""
    i, o = Path(in_dir), Path(out_dir)
    return [
        FigureRecipe(
            kind="lines",
            csv_path=str(i / "pathloss.csv"),
            out_path=str(o / "pathloss.png"),
            x="altitude_km",
            y=["bistatic_loss_db", "monostatic_loss_db"],
            xlabel="target altitude (km)",
            ylabel="echo path loss (dB)",
            title="Echo path loss vs target altitude",
        ),
        FigureRecipe(
            kind="grouped-lines",
            csv_path=str(i / "minrate.csv"),
            out_path=str(o / "minrate.png"),
            x="p_t_dbw",
            y=["r_min_bps_hz"],
            group="mode",
            xlabel="transmit power (dBW)",
            ylabel="minimum rate (bits/s/Hz)",
            title="Worst-user rate vs power budget",
        ),
        FigureRecipe(
            kind="heatmap",
            csv_path=str(i / "beampattern.csv"),
            out_path=str(o / "beampattern_common.png"),
            x="theta_deg",
            y=["phi_deg"],
            value="p_common",
            xlabel="azimuth (deg)",
            ylabel="off-boresight (deg)",
            title="Common-stream transmit beampattern",
            log_y=True,
        ),
        FigureRecipe(
            kind="bars",
            csv_path=str(i / "power_ratios.csv"),
            out_path=str(o / "power_ratios.png"),
            x="stream",
            y=["power_ratio"],
            ylabel="power allocation ratio",
            title="Per-stream power allocation",
        ),
        FigureRecipe(
            kind="heatmap",
            csv_path=str(i / "music_spectrum.csv"),
            out_path=str(o / "music_spectrum.png"),
            x="theta_deg",
            y=["phi_deg"],
            value="spectrum",
            xlabel="azimuth (deg)",
            ylabel="off-zenith (deg)",
            title="Arrival-angle spectrum",
            log_y=True,
        ),
        FigureRecipe(
            kind="surface",
            csv_path=str(i / "matched_filter.csv"),
            out_path=str(o / "matched_filter.png"),
            x="doppler_hz",
            y=["tau_bin"],
            value="score",
            xlabel="Doppler (Hz)",
            ylabel="delay bin",
            title="Joint delay-Doppler matched-filter output",
        ),
    ]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="leoisac-figures", description=__doc__)
    parser.add_argument("--recipe", help="YAML recipe file")
    parser.add_argument("--all", action="store_true", help="render every standard CSV found")
    parser.add_argument("--in-dir", default="runs", help="directory with experiment CSVs")
    parser.add_argument("--out-dir", default="figs", help="directory for images")
    args = parser.parse_args(argv)
    try:
        if args.recipe:
            print(render(FigureRecipe.from_yaml(args.recipe)))
            return 0
        if args.all:
            wrote = 0
            for recipe in standard_recipes(args.in_dir, args.out_dir):
                if Path(recipe.csv_path).exists():
                    print(render(recipe))
                    wrote += 1
            if wrote == 0:
                print(f"no standard CSVs found in {args.in_dir}", file=sys.stderr)
                return 2
            return 0
        parser.error("pass --recipe FILE or --all")
    except (RecipeError, TypeError) as exc:
        print(f"recipe error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
