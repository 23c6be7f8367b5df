"""
Built-in three-stock market datasets and the base block markets derived from them.
"""

from typing import Dict, List, Union

import numpy as np

from car_portfolio.errors import ConfigurationError, UnsupportedPartition
from car_portfolio.models.all_models import BlockMarket, MarketDataset
from car_portfolio.services.market_model import assemble_block_market, build_volatility_from_correlation

DEFAULT_GAMMAS = (0.2, 0.25, 0.3)

DATASETS: Dict[str, MarketDataset] = {
    "1": MarketDataset(
        name="1",
        gammas=np.array(DEFAULT_GAMMAS),
        rho=np.array(
            [
                [1.0, -0.6, -0.8],
                [-0.6, 1.0, 0.5],
                [-0.8, 0.5, 1.0],
            ]
        ),
        b=np.array([0.07, 0.05, 0.03]),
    ),
    "2": MarketDataset(
        name="2",
        gammas=np.array(DEFAULT_GAMMAS),
        rho=np.array(
            [
                [1.0, -0.3, 0.5],
                [-0.3, 1.0, -0.9],
                [0.5, -0.9, 1.0],
            ]
        ),
        b=np.array([0.03, 0.05, 0.07]),
    ),
}


def available_datasets() -> List[str]:
    return sorted(DATASETS)


def get_dataset(dataset_id: Union[str, int]) -> MarketDataset:
    """Look up a built-in dataset by id ("1" or "2")."""
    key = str(dataset_id)
    if key not in DATASETS:
        raise ConfigurationError(f"Unknown dataset '{dataset_id}'. Available: {', '.join(available_datasets())}")
    return DATASETS[key]


def base_block_market(dataset: MarketDataset, r: float, m: int = 1) -> BlockMarket:
    """
    Cholesky volatility of (gamma, rho) split after the first ``m`` assets.

    The sweeps replace only sigma11 of this base market and keep sigma21, sigma22 and b.

    Raises:
        UnsupportedPartition: If m is not in [1, d).
    """
    d = dataset.b.size
    if not (1 <= m < d):
        raise UnsupportedPartition(f"First-type count must satisfy 1 <= m < {d}, got m = {m}")

    sigma = build_volatility_from_correlation(dataset.gammas, dataset.rho)
    return assemble_block_market(
        sigma11=sigma[:m, :m],
        sigma21=sigma[m:, :m],
        sigma22=sigma[m:, m:],
        b1=dataset.b[:m],
        b2=dataset.b[m:],
        r=r,
    )
