"""
Command line interface for CaR Portfolio.

This module provides the one-shot solver, the three sweep experiments, the
verification suite and figure re-rendering.

Usage example (terminal):
```bash
    # Constrained optimum for dataset 1 at delta = 0.3, printed as JSON
    car-portfolio solve --dataset 1 --mode constrained --delta 0.3

    # Sweeps (CSV + SVG under data/outputs by default)
    car-portfolio sweep-variance --config ./data/configs/default.toml
    car-portfolio sweep-riskless --dataset 2 --delta 0.3,0.6,0.9
    car-portfolio sweep-reduction --out ./data/outputs/reduction

    # Oracle, Monte Carlo and identity checks; exit code 2 on any failure
    car-portfolio verify --paths 1000000 --seed 2024

    # Re-render figures from existing tables
    car-portfolio render ./data/outputs
```

Exit codes: 0 success, 1 validation error, 2 verification failure, 3 degenerate instance.
"""

from car_portfolio.utils.app_logger import logger, setup_logger
import sys
import json
from pathlib import Path
from typing import Annotated, Literal, Optional

from cyclopts import App, Parameter, validators
from rich.console import Console
from rich.table import Table

from car_portfolio.errors import CarPortfolioError, ConfigurationError
from car_portfolio.models.all_models import ConstraintSpec
from car_portfolio.services.closed_form_solvers import solve_constrained, solve_pricing_kernel, solve_unconstrained
from car_portfolio.services.datasets import base_block_market
from car_portfolio.services.experiment_service import ExperimentService, SweepResult
from car_portfolio.services.figure_service import render_from_csv
from car_portfolio.services.market_model import growth_optimal_benchmark
from car_portfolio.services.verification_service import VerificationService
from car_portfolio.utils.config_manager import ExperimentConfig, load_config, parse_float_list
from car_portfolio.utils.file_utils import save_json

# Create cyclopts app and rich console
app = App(help="Capital-at-Risk optimal portfolios with a negative-correlation constraint.")
console = Console()

ConfigOpt = Annotated[Optional[Path], Parameter(name=["--config", "-c"])]
DatasetOpt = Annotated[Optional[Literal["1", "2"]], Parameter(name=["--dataset", "-ds"])]
DeltaOpt = Annotated[Optional[str], Parameter(name=["--delta", "-de"])]
AlphaOpt = Annotated[Optional[float], Parameter(name=["--alpha", "-a"], validator=validators.Number(gt=0, lt=0.5))]
HorizonOpt = Annotated[Optional[float], Parameter(name=["--horizon", "-T"], validator=validators.Number(gt=0))]
PathsOpt = Annotated[Optional[int], Parameter(name=["--paths", "-p"], validator=validators.Number(gte=2))]
SeedOpt = Annotated[Optional[int], Parameter(name=["--seed", "-s"])]
OutOpt = Annotated[Optional[Path], Parameter(name=["--out", "-o"])]
LogLevelOpt = Annotated[
    Optional[Literal["TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR"]], Parameter(name=["--log-level", "-ll"])
]
LogFileOpt = Annotated[Optional[Path], Parameter(name=["--log-file", "-lf"])]


def _prepare(
    config_path: Optional[Path],
    log_level: Optional[str],
    log_file: Optional[Path],
    **overrides,
) -> ExperimentConfig:
    """Load the config file, apply flag overrides and configure logging."""
    config = load_config(config_path)
    if "deltas" in overrides:
        overrides["deltas"] = parse_float_list(overrides["deltas"])
    config = config.with_overrides(**overrides)
    setup_logger(log_file=log_file, log_level=log_level or config.log_level)
    return config


def _fail(e: Exception) -> int:
    if isinstance(e, CarPortfolioError):
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    logger.exception(f"Error: {e}")
    return 1


def _print_sweep(result: SweepResult) -> None:
    table = Table(title=f"{result.experiment} sweep")
    table.add_column("file")
    for path in result.files:
        table.add_row(str(path))
    console.print(table)


@app.command(name="solve")
def solve(
    mode: Annotated[
        Literal["unconstrained", "constrained", "pricing-kernel"], Parameter(name=["--mode", "-m"])
    ] = "constrained",
    config: ConfigOpt = None,
    dataset: DatasetOpt = None,
    delta: DeltaOpt = None,
    alpha: AlphaOpt = None,
    horizon: HorizonOpt = None,
    out: OutOpt = None,
    log_level: LogLevelOpt = None,
    log_file: LogFileOpt = None,
):
    """
    Solve one CaR problem and print the optimal portfolio as JSON.

    The constrained modes use the growth-optimal portfolio of the first-type assets as
    benchmark and the first delta given.

    Args:
        mode: unconstrained, constrained (general formula) or pricing-kernel (theta formula).
        config: Optional TOML experiment configuration.
        dataset: Built-in dataset id; defaults to the first configured dataset.
        delta: Correlation threshold (first value of a comma-separated list).
        alpha: CaR confidence level in (0, 0.5).
        horizon: Horizon T in years.
        out: Optional directory to save solution.json in.
        log_level: Minimum log level.
        log_file: Optional log file.

    Returns:
        Exit code (0 success, 1 validation error, 3 degenerate instance).
    """
    try:
        cfg = _prepare(config, log_level, log_file, dataset=dataset, deltas=delta, alpha=alpha, horizon=horizon)
        market_data = cfg.market_datasets()[0]
        spec = cfg.risk_spec()
        block = base_block_market(market_data, r=cfg.r, m=cfg.m)
        market = block.to_market()
        delta_value = cfg.deltas[0]

        if mode == "unconstrained":
            solution = solve_unconstrained(market, spec)
        elif mode == "constrained":
            constraint = ConstraintSpec(eta=growth_optimal_benchmark(block), delta=delta_value)
            solution = solve_constrained(market, spec, constraint)
        else:
            solution = solve_pricing_kernel(block, spec, delta_value)

        payload = {
            "dataset": market_data.name,
            "mode": mode,
            "alpha": spec.alpha,
            "horizon": spec.T,
            "z_alpha": spec.z_alpha,
            **solution.to_dict(),
            "pi0": solution.pi0,
        }
        if out is not None:
            save_json(payload, out, "solution.json", log_message=f"Solution saved to {out / 'solution.json'}")
        console.print_json(json.dumps(payload))
        return 0
    except Exception as e:
        return _fail(e)


def _run_sweep(runner_name: str, config, dataset, delta, alpha, horizon, out, log_level, log_file) -> int:
    try:
        cfg = _prepare(
            config, log_level, log_file, dataset=dataset, deltas=delta, alpha=alpha, horizon=horizon, out=out
        )
        service = ExperimentService(cfg)
        result = getattr(service, runner_name)()
        _print_sweep(result)
        return 0
    except Exception as e:
        return _fail(e)


@app.command(name="sweep-variance")
def sweep_variance(
    config: ConfigOpt = None,
    dataset: DatasetOpt = None,
    delta: DeltaOpt = None,
    alpha: AlphaOpt = None,
    horizon: HorizonOpt = None,
    out: OutOpt = None,
    log_level: LogLevelOpt = None,
    log_file: LogFileOpt = None,
):
    """
    Log-return variance of the unconstrained and constrained optima against sigma11.

    Args:
        config: Optional TOML experiment configuration.
        dataset: Restrict to one built-in dataset.
        delta: Comma-separated correlation thresholds.
        alpha: CaR confidence level.
        horizon: Horizon T in years.
        out: Output directory for CSV and SVG files.
        log_level: Minimum log level.
        log_file: Optional log file.
    """
    return _run_sweep("run_variance_sweep", config, dataset, delta, alpha, horizon, out, log_level, log_file)


@app.command(name="sweep-riskless")
def sweep_riskless(
    config: ConfigOpt = None,
    dataset: DatasetOpt = None,
    delta: DeltaOpt = None,
    alpha: AlphaOpt = None,
    horizon: HorizonOpt = None,
    out: OutOpt = None,
    log_level: LogLevelOpt = None,
    log_file: LogFileOpt = None,
):
    """
    Riskless fraction of the optimal portfolios against sigma11.

    Args:
        config: Optional TOML experiment configuration.
        dataset: Restrict to one built-in dataset.
        delta: Comma-separated correlation thresholds.
        alpha: CaR confidence level.
        horizon: Horizon T in years.
        out: Output directory for CSV and SVG files.
        log_level: Minimum log level.
        log_file: Optional log file.
    """
    return _run_sweep("run_riskless_fraction_sweep", config, dataset, delta, alpha, horizon, out, log_level, log_file)


@app.command(name="sweep-reduction")
def sweep_reduction(
    config: ConfigOpt = None,
    dataset: DatasetOpt = None,
    alpha: AlphaOpt = None,
    horizon: HorizonOpt = None,
    out: OutOpt = None,
    log_level: LogLevelOpt = None,
    log_file: LogFileOpt = None,
):
    """
    Percentage variance reduction against delta, with the 50% crossing per curve.

    Args:
        config: Optional TOML experiment configuration.
        dataset: Restrict to one built-in dataset.
        alpha: CaR confidence level.
        horizon: Horizon T in years.
        out: Output directory for CSV and SVG files.
        log_level: Minimum log level.
        log_file: Optional log file.
    """
    return _run_sweep("run_variance_reduction_sweep", config, dataset, None, alpha, horizon, out, log_level, log_file)


@app.command(name="verify")
def verify(
    config: ConfigOpt = None,
    dataset: DatasetOpt = None,
    delta: DeltaOpt = None,
    alpha: AlphaOpt = None,
    horizon: HorizonOpt = None,
    paths: PathsOpt = None,
    seed: SeedOpt = None,
    out: OutOpt = None,
    log_level: LogLevelOpt = None,
    log_file: LogFileOpt = None,
):
    """
    Run oracle agreement, Monte Carlo and closed-form identity checks.

    Args:
        config: Optional TOML experiment configuration.
        dataset: Restrict to one built-in dataset.
        delta: Comma-separated correlation thresholds.
        alpha: CaR confidence level.
        horizon: Horizon T in years.
        paths: Monte Carlo path count.
        seed: Monte Carlo seed.
        out: Output directory for verification_report.json.
        log_level: Minimum log level.
        log_file: Optional log file.

    Returns:
        Exit code (0 all checks passed, 2 any check failed, 3 a failure came from a degenerate
        instance, 1 invalid input).
    """
    try:
        cfg = _prepare(
            config,
            log_level,
            log_file,
            dataset=dataset,
            deltas=delta,
            alpha=alpha,
            horizon=horizon,
            paths=paths,
            seed=seed,
            out=out,
        )
        report = VerificationService(cfg).run_verify()

        table = Table(title="Verification")
        table.add_column("dataset")
        table.add_column("check")
        table.add_column("result")
        for check in report.checks:
            verdict = "[green]pass[/green]" if check.passed else f"[red]FAIL[/red] {check.error or ''}"
            table.add_row(check.dataset, check.name, verdict)
        console.print(table)

        return report.exit_code
    except Exception as e:
        return _fail(e)


@app.command(name="render")
def render(
    path: Annotated[Path, Parameter(name=["path"])],
    log_level: LogLevelOpt = None,
):
    """
    Re-render SVG figures from experiment CSV tables.

    Args:
        path: A CSV table, or a directory whose experiment tables are all rendered.
        log_level: Minimum log level.
    """
    try:
        setup_logger(log_level=log_level or "INFO")
        if path.is_dir():
            tables = sorted(p for p in path.glob("*.csv") if not p.stem.endswith("_crossings"))
        elif path.exists():
            tables = [path]
        else:
            raise ConfigurationError(f"No such file or directory: {path}")

        if not tables:
            raise ConfigurationError(f"No experiment tables found in {path}")
        for table_path in tables:
            svg = render_from_csv(table_path)
            logger.info(f"Rendered {svg}")
        return 0
    except Exception as e:
        return _fail(e)


def main():
    """Run the CaR Portfolio CLI application."""
    return app()


if __name__ == "__main__":
    sys.exit(main())
