"""
Experiment configuration.

A run is described by one TOML file with the tables ``[market]``, ``[risk]``, ``[sweep]``,
``[monte_carlo]``, ``[oracle]`` and ``[output]``; every key is optional and falls back to
the defaults below (both built-in datasets, T = 5, alpha = 0.05). Command-line flags are
layered on top with ``with_overrides``. No environment variables are read.
"""

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from car_portfolio.errors import ConfigurationError, OutOfRange
from car_portfolio.models.all_models import MarketDataset, RiskSpec
from car_portfolio.models.base import DataclassJsonMixin
from car_portfolio.models.verification_models import McConfig, OracleConfig
from car_portfolio.utils.app_logger import logger
from car_portfolio.utils.file_utils import load_toml
from car_portfolio.utils.paths import OUTPUTS_PATH

_TABLE_KEYS = {
    "market": {"datasets", "name", "gammas", "rho", "b", "m", "r", "x"},
    "risk": {"alpha", "horizon"},
    "sweep": {
        "deltas",
        "sigma11_min",
        "sigma11_max",
        "sigma11_points",
        "sigma11_fixed",
        "delta_grid_max",
        "delta_grid_points",
    },
    "monte_carlo": {f.name for f in fields(McConfig)},
    "oracle": {f.name for f in fields(OracleConfig)},
    "output": {"dir", "log_level"},
}


@dataclass
class ExperimentConfig(DataclassJsonMixin):
    """Everything a sweep or verification run depends on."""

    name: str = "default"

    # Market: built-in dataset ids, or one inline (gammas, rho, b) triple
    datasets: List[str] = field(default_factory=lambda: ["1", "2"])
    inline_dataset: Optional[MarketDataset] = None
    m: int = 1
    r: float = 0.02
    x: float = 1.0

    # Risk
    alpha: float = 0.05
    horizon: float = 5.0

    # Sweeps
    deltas: List[float] = field(default_factory=lambda: [0.3, 0.6, 0.9])
    sigma11_min: float = 0.2
    sigma11_max: float = 2.0
    sigma11_points: int = 50
    # Empty means "the base Cholesky value of each dataset"
    sigma11_fixed: List[float] = field(default_factory=list)
    delta_grid_max: float = 0.99
    delta_grid_points: int = 100

    mc: McConfig = field(default_factory=McConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)

    output_dir: Path = OUTPUTS_PATH
    log_level: str = "INFO"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """
        Check value ranges. Market matrices are only shape-checked here; their
        admissibility is reported per dataset when a run builds the market.

        Raises:
            ConfigurationError: On any invalid value.
        """
        if not self.datasets and self.inline_dataset is None:
            raise ConfigurationError("At least one dataset is required")
        if self.m < 1:
            raise ConfigurationError(f"m must be at least 1, got {self.m}")
        if not (0.0 < self.alpha < 0.5):
            raise ConfigurationError(f"alpha must lie in (0, 0.5), got {self.alpha}")
        if self.horizon <= 0.0:
            raise ConfigurationError(f"horizon must be positive, got {self.horizon}")
        if self.x <= 0.0:
            raise ConfigurationError(f"Initial wealth x must be positive, got {self.x}")
        if not self.deltas:
            raise ConfigurationError("At least one delta is required")
        for delta in self.deltas:
            if not (0.0 <= delta < 1.0):
                raise ConfigurationError(f"delta values must lie in [0, 1), got {delta}")
        if not (0.0 < self.sigma11_min <= self.sigma11_max):
            raise ConfigurationError(
                f"sigma11 grid needs 0 < min <= max, got [{self.sigma11_min}, {self.sigma11_max}]"
            )
        if self.sigma11_points < 1:
            raise ConfigurationError("sigma11_points must be positive")
        if any(s <= 0.0 for s in self.sigma11_fixed):
            raise ConfigurationError(f"sigma11_fixed values must be positive, got {self.sigma11_fixed}")
        if not (0.0 <= self.delta_grid_max < 1.0) or self.delta_grid_points < 2:
            raise ConfigurationError("Reduction sweep needs delta_grid_max in [0, 1) and at least 2 points")

        if self.inline_dataset is not None:
            d = self.inline_dataset.b.size
            if self.inline_dataset.gammas.shape != (d,) or self.inline_dataset.rho.shape != (d, d):
                raise ConfigurationError(
                    f"Inline market needs {d} gammas and a {d}x{d} rho, got "
                    f"{self.inline_dataset.gammas.shape} and {self.inline_dataset.rho.shape}"
                )

    # ------------------------------------------------------------------
    # Derived quantities
    # ------------------------------------------------------------------

    def risk_spec(self) -> RiskSpec:
        return RiskSpec(alpha=self.alpha, T=self.horizon)

    def market_datasets(self) -> List[MarketDataset]:
        """The inline dataset when given, else the built-in ones in configured order."""
        if self.inline_dataset is not None:
            return [self.inline_dataset]

        from car_portfolio.services.datasets import get_dataset

        return [get_dataset(dataset_id) for dataset_id in self.datasets]

    def sigma11_grid(self) -> np.ndarray:
        return np.linspace(self.sigma11_min, self.sigma11_max, self.sigma11_points)

    def delta_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.delta_grid_max, self.delta_grid_points)

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """
        Copy with command-line values applied; ``None`` values are ignored.
        ``paths`` and ``seed`` go to the Monte Carlo settings.
        """
        updates = {k: v for k, v in overrides.items() if v is not None}
        if not updates:
            return self

        mc_updates = {k: updates.pop(k) for k in ("paths", "seed") if k in updates}
        if "dataset" in updates:
            updates["datasets"] = [str(updates.pop("dataset"))]
            updates["inline_dataset"] = None
        if "out" in updates:
            updates["output_dir"] = Path(updates.pop("out"))

        known = {f.name for f in fields(self)}
        unknown = set(updates) - known
        if unknown:
            raise ConfigurationError(f"Unknown configuration override(s): {', '.join(sorted(unknown))}")

        try:
            if mc_updates:
                updates["mc"] = replace(self.mc, **mc_updates)
            config = replace(self, **updates)
        except OutOfRange as e:
            raise ConfigurationError(str(e)) from e

        for key, value in {**updates, **mc_updates}.items():
            if key != "mc":
                logger.debug(f"Updated config: {key} = {value}")
        return config

    @classmethod
    def from_dict(cls, data: Dict[str, Any], name: str = "default") -> "ExperimentConfig":
        """
        Build from the nested-table layout of a config file.

        Raises:
            ConfigurationError: On unknown tables or keys, or invalid values.
        """
        unknown_tables = set(data) - set(_TABLE_KEYS)
        if unknown_tables:
            raise ConfigurationError(f"Unknown configuration table(s): {', '.join(sorted(unknown_tables))}")
        for table, allowed in _TABLE_KEYS.items():
            section = data.get(table, {})
            if not isinstance(section, dict):
                raise ConfigurationError(f"[{table}] must be a table")
            unknown_keys = set(section) - allowed
            if unknown_keys:
                raise ConfigurationError(f"Unknown key(s) in [{table}]: {', '.join(sorted(unknown_keys))}")

        market = data.get("market", {})
        risk = data.get("risk", {})
        sweep = data.get("sweep", {})
        output = data.get("output", {})

        kwargs: Dict[str, Any] = {"name": name}
        inline_keys = {"gammas", "rho", "b"} & set(market)
        if inline_keys:
            if inline_keys != {"gammas", "rho", "b"}:
                raise ConfigurationError("An inline market needs all of gammas, rho and b")
            kwargs["inline_dataset"] = MarketDataset(
                name=str(market.get("name", "inline")),
                gammas=np.asarray(market["gammas"], dtype=float),
                rho=np.asarray(market["rho"], dtype=float),
                b=np.asarray(market["b"], dtype=float),
            )
            kwargs["datasets"] = []
        if "datasets" in market:
            kwargs["datasets"] = [str(d) for d in market["datasets"]]
        for key in ("m", "r", "x"):
            if key in market:
                kwargs[key] = market[key]

        kwargs.update({key: risk[key] for key in ("alpha", "horizon") if key in risk})
        kwargs.update(sweep)
        if "dir" in output:
            kwargs["output_dir"] = Path(output["dir"])
        if "log_level" in output:
            kwargs["log_level"] = output["log_level"]

        try:
            kwargs["mc"] = McConfig(**data.get("monte_carlo", {}))
            kwargs["oracle"] = OracleConfig(**data.get("oracle", {}))
            return cls(**kwargs)
        except (OutOfRange, TypeError, ValueError) as e:
            raise ConfigurationError(f"Invalid configuration: {e}") from e

    def to_dict(self, **kwargs) -> Dict[str, Any]:
        """Serialise for provenance (written next to the outputs as config.json)."""
        data = super().to_dict(**kwargs)
        data["output_dir"] = str(self.output_dir)
        return data


def load_config(config_path: Optional[Path] = None) -> ExperimentConfig:
    """
    Load an experiment configuration, or the defaults when no path is given.

    Raises:
        ConfigurationError: If the file is missing, malformed or contains invalid values.
    """
    if config_path is None:
        return ExperimentConfig()

    config_path = Path(config_path)
    try:
        data = load_toml(config_path)
    except FileNotFoundError as e:
        raise ConfigurationError(str(e)) from e
    except ValueError as e:
        raise ConfigurationError(f"Could not parse {config_path}: {e}") from e

    config = ExperimentConfig.from_dict(data, name=config_path.stem)
    logger.info(f"Configuration loaded from {config_path}")
    return config


def parse_float_list(value: Optional[str]) -> Optional[List[float]]:
    """Parse a comma-separated list such as "0.3,0.6,0.9"."""
    if value is None:
        return None
    try:
        return [float(item) for item in value.split(",") if item.strip()]
    except ValueError as e:
        raise ConfigurationError(f"Could not parse number list '{value}': {e}") from e
