"""
Service for the three sweep experiments: log-return variance and riskless fraction
against sigma11, and variance reduction against delta.

Every value written here comes from the closed-form solvers; this module only
arranges grid points, converts degenerate points into flagged rows and writes
CSV tables, crossing tables and figures.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from car_portfolio.errors import DegenerateInstanceError, UnsupportedPartition
from car_portfolio.models.all_models import BlockMarket, MarketDataset, ResultRow, RiskSpec
from car_portfolio.services.closed_form_solvers import solve_pricing_kernel, solve_unconstrained
from car_portfolio.services.datasets import base_block_market
from car_portfolio.services.figure_service import render_from_csv
from car_portfolio.services.risk_measures import wealth_law
from car_portfolio.utils.app_logger import LoggerTimingContext, logger
from car_portfolio.utils.config_manager import ExperimentConfig
from car_portfolio.utils.file_utils import save_csv, save_json

RESULT_COLUMNS = [
    "experiment",
    "dataset",
    "sigma11",
    "delta",
    "var_unconstrained",
    "var_constrained",
    "pi0_unconstrained",
    "pi0_constrained",
    "car_unconstrained",
    "car_constrained",
    "reduction_percent",
    "flag",
]

CROSSING_COLUMNS = ["dataset", "sigma11", "crossing_delta"]

NEGATIVE_PI0_FLAG = "negative_pi0"


@dataclass
class SweepResult:
    """Rows and written files of one sweep."""

    experiment: str
    rows: List[ResultRow] = field(default_factory=list)
    crossings: List[Dict[str, Optional[float]]] = field(default_factory=list)
    files: List[Path] = field(default_factory=list)

    def rows_for(self, dataset: str) -> List[ResultRow]:
        return [row for row in self.rows if row.dataset == dataset]


def evaluate_point(
    experiment: str, dataset: str, block: BlockMarket, spec: RiskSpec, delta: float, x: float = 1.0
) -> ResultRow:
    """
    Unconstrained and pricing-kernel constrained optima at one grid point.

    A degenerate instance yields a row with empty values and a ``degenerate:<reason>`` flag.
    """
    sigma11 = float(block.sigma11[0, 0])
    row = ResultRow(experiment=experiment, dataset=dataset, sigma11=sigma11, delta=float(delta))
    try:
        market = block.to_market()
        unconstrained = solve_unconstrained(market, spec)
        constrained = solve_pricing_kernel(block, spec, delta)
    except DegenerateInstanceError as e:
        row.flag = f"degenerate:{type(e).__name__}"
        logger.warning(f"Dataset {dataset}, sigma11={sigma11:.6g}, delta={delta:g}: {e}")
        return row

    row.var_unconstrained = wealth_law(market, unconstrained.pi, spec, x).log_variance
    row.var_constrained = wealth_law(market, constrained.pi, spec, x).log_variance
    row.pi0_unconstrained = unconstrained.pi0
    row.pi0_constrained = constrained.pi0
    row.car_unconstrained = unconstrained.car
    row.car_constrained = constrained.car
    row.reduction_percent = (
        100.0 * (1.0 - row.var_constrained / row.var_unconstrained) if row.var_unconstrained > 0.0 else 0.0
    )

    if row.pi0_constrained < 0.0 or row.pi0_unconstrained < 0.0:
        row.flag = NEGATIVE_PI0_FLAG
        logger.debug(f"Negative riskless fraction at dataset {dataset}, sigma11={sigma11:.6g}, delta={delta:g}")
    return row


def fifty_percent_crossing(deltas: Sequence[float], reductions: Sequence[Optional[float]]) -> Optional[float]:
    """
    First delta at which the reduction reaches 50%, linearly interpolated between grid points.

    Returns:
        The first grid delta if the reduction already reaches 50% there, None if it never does.
    """
    points = [(d, r) for d, r in zip(deltas, reductions) if r is not None and np.isfinite(r)]
    points.sort()
    for i, (delta, reduction) in enumerate(points):
        if reduction >= 50.0:
            if i == 0:
                return float(delta)
            prev_delta, prev_reduction = points[i - 1]
            weight = (50.0 - prev_reduction) / (reduction - prev_reduction)
            return float(prev_delta + weight * (delta - prev_delta))
    return None


class ExperimentService:
    """Service for running the sweep experiments and writing their tables and figures."""

    def __init__(self, config: ExperimentConfig):
        if config.m != 1:
            raise UnsupportedPartition(f"Sweeps vary the scalar sigma11 and need m = 1, got m = {config.m}")
        self.config = config
        self.spec = config.risk_spec()

    # ------------------------------------------------------------------
    # Grid construction
    # ------------------------------------------------------------------

    def base_blocks(self) -> Dict[str, BlockMarket]:
        """Base block market per dataset; sweeps only replace its sigma11."""
        blocks = {}
        for dataset in self.config.market_datasets():
            blocks[dataset.name] = self._base_block(dataset)
        return blocks

    def _base_block(self, dataset: MarketDataset) -> BlockMarket:
        block = base_block_market(dataset, r=self.config.r, m=self.config.m)
        logger.debug(f"Dataset {dataset.name}: base sigma11={block.sigma11[0, 0]:.6g}, theta1={block.theta1:.6g}, theta2={block.theta2:.6g}")
        return block

    def _sigma11_sweep(self, experiment: str) -> List[ResultRow]:
        rows = []
        for name, base in self.base_blocks().items():
            for sigma11 in self.config.sigma11_grid():
                block = base.with_sigma11(sigma11)
                for delta in self.config.deltas:
                    rows.append(evaluate_point(experiment, name, block, self.spec, delta, self.config.x))
        return sorted(rows, key=ResultRow.sort_key)

    # ------------------------------------------------------------------
    # Output
    # ------------------------------------------------------------------

    def _write(self, result: SweepResult, output_dir: Path) -> SweepResult:
        save_json(self.config.to_dict(), output_dir, "config.json")
        for dataset in sorted({row.dataset for row in result.rows}):
            stem = f"{result.experiment}_dataset{dataset}"
            csv_path = save_csv(
                ResultRow.list_to_dict_list(result.rows_for(dataset)), output_dir, f"{stem}.csv", columns=RESULT_COLUMNS
            )
            result.files.append(csv_path)
            result.files.append(render_from_csv(csv_path))

            crossings = [c for c in result.crossings if c["dataset"] == dataset]
            if crossings:
                result.files.append(save_csv(crossings, output_dir, f"{stem}_crossings.csv", columns=CROSSING_COLUMNS))

        flagged = [row for row in result.rows if row.flag]
        if flagged:
            logger.warning(f"{len(flagged)} of {len(result.rows)} rows flagged in the {result.experiment} sweep")
        return result

    # ------------------------------------------------------------------
    # Experiments
    # ------------------------------------------------------------------

    def run_variance_sweep(self, output_dir: Optional[Path] = None) -> SweepResult:
        """
        Log-return variances of the unconstrained and constrained optima across the sigma11 grid.

        Args:
            output_dir: Where to write tables and figures; defaults to the configured directory.
        """
        output_dir = output_dir or self.config.output_dir
        logger.info(f"Starting variance sweep over {self.config.sigma11_points} sigma11 values")

        with LoggerTimingContext("Variance sweep", level="INFO"):
            # Step 1: Evaluate the grid
            result = SweepResult(experiment="variance", rows=self._sigma11_sweep("variance"))

            # Step 2: Write tables and figures
            self._write(result, output_dir)

        logger.success(f"Variance sweep completed: {len(result.rows)} rows")
        return result

    def run_riskless_fraction_sweep(self, output_dir: Optional[Path] = None) -> SweepResult:
        """Riskless fraction 1 - 1'pi of both optima across the sigma11 grid."""
        output_dir = output_dir or self.config.output_dir
        logger.info(f"Starting riskless fraction sweep over {self.config.sigma11_points} sigma11 values")

        with LoggerTimingContext("Riskless fraction sweep", level="INFO"):
            result = SweepResult(experiment="riskless", rows=self._sigma11_sweep("riskless"))
            self._write(result, output_dir)

        negative = sum(1 for row in result.rows if row.flag == NEGATIVE_PI0_FLAG)
        if negative:
            logger.info(f"{negative} rows hold a negative riskless fraction (borrowing)")
        logger.success(f"Riskless fraction sweep completed: {len(result.rows)} rows")
        return result

    def run_variance_reduction_sweep(self, output_dir: Optional[Path] = None) -> SweepResult:
        """
        Percentage variance reduction across the delta grid at fixed sigma11, with the
        delta at which each curve first reaches 50%.
        """
        output_dir = output_dir or self.config.output_dir
        deltas = self.config.delta_grid()
        logger.info(f"Starting variance reduction sweep over {deltas.size} delta values")

        result = SweepResult(experiment="reduction")
        with LoggerTimingContext("Variance reduction sweep", level="INFO"):
            # Step 1: Evaluate each (dataset, sigma11) curve
            for name, base in self.base_blocks().items():
                fixed = self.config.sigma11_fixed or [float(base.sigma11[0, 0])]
                for sigma11 in fixed:
                    block = base.with_sigma11(sigma11)
                    curve = [evaluate_point("reduction", name, block, self.spec, d, self.config.x) for d in deltas]
                    result.rows.extend(curve)

                    # Step 2: Locate the 50% crossing
                    crossing = fifty_percent_crossing(deltas, [row.reduction_percent for row in curve])
                    result.crossings.append({"dataset": name, "sigma11": float(sigma11), "crossing_delta": crossing})
                    logger.info(f"Dataset {name}, sigma11={sigma11:.6g}: 50% reduction crossing at delta={crossing}")

            result.rows.sort(key=ResultRow.sort_key)

            # Step 3: Write tables and figures
            self._write(result, output_dir)

        logger.success(f"Variance reduction sweep completed: {len(result.rows)} rows")
        return result


def run_variance_sweep(config: ExperimentConfig) -> SweepResult:
    return ExperimentService(config).run_variance_sweep()


def run_riskless_fraction_sweep(config: ExperimentConfig) -> SweepResult:
    return ExperimentService(config).run_riskless_fraction_sweep()


def run_variance_reduction_sweep(config: ExperimentConfig) -> SweepResult:
    return ExperimentService(config).run_variance_reduction_sweep()
