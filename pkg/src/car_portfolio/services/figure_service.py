"""
SVG figures rendered from experiment CSV tables.

Figures depend on the CSV content only, so deleting them and re-rendering from the
tables reproduces the same files.
"""

from pathlib import Path
from typing import Callable, Dict, Optional

import matplotlib as mpl

mpl.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from car_portfolio.errors import ConfigurationError  # noqa: E402
from car_portfolio.utils.app_logger import logger  # noqa: E402
from car_portfolio.utils.file_utils import load_csv  # noqa: E402

# Deterministic SVG output
mpl.rcParams.update(
    {
        "svg.hashsalt": "car-portfolio",
        "svg.fonttype": "none",
        "font.family": "serif",
        "axes.labelsize": 10,
        "font.size": 10,
        "legend.fontsize": 8,
        "xtick.labelsize": 8,
        "ytick.labelsize": 8,
        "figure.figsize": (6.0, 3.7),
    }
)


def _save(fig, svg_path: Path) -> Path:
    svg_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(svg_path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    logger.debug(f"Saved figure to: {svg_path}")
    return svg_path


def _title(frame: pd.DataFrame, what: str) -> str:
    datasets = ", ".join(sorted(frame["dataset"].astype(str).unique()))
    return f"{what}, dataset {datasets}"


def plot_variance(frame: pd.DataFrame, svg_path: Path) -> Path:
    """Log-return variance against sigma11: the unconstrained curve and one constrained curve per delta."""
    fig, ax = plt.subplots()

    first_delta = frame["delta"].min()
    baseline = frame[frame["delta"] == first_delta].sort_values("sigma11")
    ax.plot(baseline["sigma11"], baseline["var_unconstrained"], color="black", linewidth=1.5, label="unconstrained")

    for delta, group in frame.groupby("delta", sort=True):
        group = group.sort_values("sigma11")
        ax.plot(group["sigma11"], group["var_constrained"], linestyle="--", label=f"constrained, δ = {delta:g}")

    ax.set_xlabel("σ₁₁")
    ax.set_ylabel("Var(log X(T))")
    ax.set_title(_title(frame, "Log-return variance"))
    ax.legend()
    return _save(fig, svg_path)


def plot_riskless_fraction(frame: pd.DataFrame, svg_path: Path) -> Path:
    """Riskless fraction 1 - 1'pi of the constrained optimum against sigma11, one curve per delta."""
    fig, ax = plt.subplots()

    for delta, group in frame.groupby("delta", sort=True):
        group = group.sort_values("sigma11")
        ax.plot(group["sigma11"], group["pi0_constrained"], label=f"π₀,c, δ = {delta:g}")

    first_delta = frame["delta"].min()
    baseline = frame[frame["delta"] == first_delta].sort_values("sigma11")
    ax.plot(baseline["sigma11"], baseline["pi0_unconstrained"], color="black", linestyle=":", label="π₀ unconstrained")
    ax.axhline(0.0, color="grey", linewidth=0.5)

    ax.set_xlabel("σ₁₁")
    ax.set_ylabel("riskless fraction")
    ax.set_title(_title(frame, "Riskless investment fraction"))
    ax.legend()
    return _save(fig, svg_path)


def plot_variance_reduction(frame: pd.DataFrame, svg_path: Path) -> Path:
    """Variance reduction in percent against delta, one curve per sigma11, with the 50% line dotted."""
    fig, ax = plt.subplots()

    for sigma11, group in frame.groupby("sigma11", sort=True):
        group = group.sort_values("delta")
        ax.plot(group["delta"], group["reduction_percent"], label=f"σ₁₁ = {sigma11:.4g}")

    ax.axhline(50.0, color="black", linestyle=":", linewidth=1.0)
    ax.set_xlabel("δ")
    ax.set_ylabel("variance reduction (%)")
    ax.set_ylim(0.0, 100.0)
    ax.set_title(_title(frame, "Variance reduction"))
    ax.legend()
    return _save(fig, svg_path)


PLOTTERS: Dict[str, Callable[[pd.DataFrame, Path], Path]] = {
    "variance": plot_variance,
    "riskless": plot_riskless_fraction,
    "reduction": plot_variance_reduction,
}


def render_from_csv(csv_path: Path, svg_path: Optional[Path] = None) -> Path:
    """
    Render the figure that belongs to an experiment table.

    Args:
        csv_path: Table written by one of the sweeps.
        svg_path: Target file; defaults to the CSV path with an .svg suffix.

    Raises:
        ConfigurationError: If the table is empty or its experiment is unknown.
    """
    frame = load_csv(Path(csv_path))
    if frame.empty or "experiment" not in frame.columns:
        raise ConfigurationError(f"{csv_path} is not an experiment table")

    experiments = frame["experiment"].unique()
    if len(experiments) != 1 or experiments[0] not in PLOTTERS:
        raise ConfigurationError(f"Cannot render {csv_path}: experiment column holds {list(experiments)}")

    svg_path = Path(svg_path) if svg_path is not None else Path(csv_path).with_suffix(".svg")
    return PLOTTERS[experiments[0]](frame, svg_path)
