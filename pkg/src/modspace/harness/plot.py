"""Render the CSV outputs to image files. The schema is read from the header."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from modspace.errors import FieldError  # noqa: E402
from modspace.logging import get_logger  # noqa: E402

logger = get_logger(__name__)


def _schema(df: pd.DataFrame) -> str:
    columns = set(df.columns)
    if {"t", "ratio"} <= columns:
        return "norm_series"
    if {"s", "f_1", "g_1"} <= columns:
        return "trajectory"
    if {"k", "increment_l2"} <= columns:
        return "iterations"
    if {"x_index", "xi_index", "re", "im"} <= columns:
        return "phase_space"
    raise FieldError(f"no plot for columns {list(df.columns)}")


def _norm_series(ax, df: pd.DataFrame, label: str) -> None:
    ax.plot(df["t"], df["ratio"], marker="o", label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("||u(t)|| / ||u0||")


def _trajectory(ax, df: pd.DataFrame, label: str) -> None:
    ax.plot(df["f_1"], df["g_1"], label=label)
    ax.plot(df["f_1"].iloc[0], df["g_1"].iloc[0], "ko", markersize=4)
    ax.set_xlabel("f_1")
    ax.set_ylabel("g_1")


def _iterations(ax, df: pd.DataFrame, label: str) -> None:
    ax.semilogy(df["k"], df["increment_l2"], marker="s", label=label)
    ax.set_xlabel("k")
    ax.set_ylabel("relative L2 increment")


def _phase_space(ax, df: pd.DataFrame, label: str) -> None:
    size = int(df["x_index"].max()) + 1
    dual = int(df["xi_index"].max()) + 1
    magnitude = np.hypot(df["re"].to_numpy(), df["im"].to_numpy()).reshape(size, dual)
    image = ax.imshow(magnitude.T, origin="lower", aspect="auto", cmap="viridis")
    ax.figure.colorbar(image, ax=ax, label="|W|")
    ax.set_xlabel("x index")
    ax.set_ylabel("xi index")
    ax.set_title(label)


_DRAW = {
    "norm_series": _norm_series,
    "trajectory": _trajectory,
    "iterations": _iterations,
    "phase_space": _phase_space,
}


def plot_csv(paths: Sequence[Path], out: Path) -> Path:
    """Overlay CSV files of one schema on a single axis and save to ``out``.

    The format follows the suffix of ``out`` (png, pdf, svg).
    """
    frames = []
    for path in paths:
        try:
            frames.append((Path(path), pd.read_csv(path)))
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise FieldError(f"cannot read {path}: {e}") from e
    if not frames:
        raise FieldError("nothing to plot")
    schemas = {_schema(df) for _, df in frames}
    if len(schemas) != 1:
        raise FieldError(f"cannot overlay different schemas {sorted(schemas)}")
    schema = schemas.pop()
    if schema == "phase_space" and len(frames) > 1:
        raise FieldError("phase-space fields are plotted one at a time")

    fig, ax = plt.subplots(figsize=(6, 4))
    try:
        for path, df in frames:
            _DRAW[schema](ax, df, path.stem)
        if schema != "phase_space":
            ax.grid(True, alpha=0.3)
            ax.legend(fontsize="small")
        fig.tight_layout()
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, dpi=150)
    finally:
        plt.close(fig)
    logger.info("plot written", path=str(out), schema=schema, series=len(frames))
    return out
