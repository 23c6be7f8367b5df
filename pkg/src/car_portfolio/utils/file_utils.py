"""
Utility functions for file operations.
"""

import json
import tomllib
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, TypeVar

import pandas as pd

from car_portfolio.utils.app_logger import logger

# Type variable for generic return type
T = TypeVar("T", Dict[str, Any], List[Any])

CSV_FLOAT_FORMAT = "%.12g"


def save_json(
    data: Dict[str, Any],
    output_dir: Path,
    filename: str,
    ensure_dir: bool = True,
    encoding: str = "utf-8",
    indent: int = 4,
    log_message: Optional[str] = None,
) -> Path:
    """
    Save JSON data to a file in the output directory.

    Args:
        data: Dictionary data to save as JSON
        output_dir: Directory to save the file in
        filename: Name of the file to save
        ensure_dir: Whether to create the directory if it doesn't exist
        encoding: File encoding to use
        indent: JSON indentation level
        log_message: Optional custom log message, uses default if None

    Returns:
        Path to the saved file
    """
    if ensure_dir:
        output_dir.mkdir(parents=True, exist_ok=True)

    file_path = output_dir / filename
    logger.debug(log_message or f"Saving file to: {file_path}")

    with open(file_path, "w", encoding=encoding) as f:
        json.dump(data, f, ensure_ascii=False, indent=indent)

    return file_path


def load_json(file_path: Path, encoding: str = "utf-8") -> T:
    """
    Load JSON data from a file.

    Raises:
        FileNotFoundError: If the file doesn't exist
        json.JSONDecodeError: If the file contains invalid JSON
    """
    logger.debug(f"Loading JSON from: {file_path}")

    if not file_path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")

    with open(file_path, "r", encoding=encoding) as f:
        return json.load(f)


def save_csv(
    rows: Sequence[Dict[str, Any]],
    output_dir: Path,
    filename: str,
    columns: Optional[Sequence[str]] = None,
    ensure_dir: bool = True,
) -> Path:
    """
    Write rows as a comma-separated table with a header and 12 significant digits.

    Missing values are written as empty fields.
    """
    if ensure_dir:
        output_dir.mkdir(parents=True, exist_ok=True)

    file_path = output_dir / filename
    frame = pd.DataFrame(list(rows), columns=list(columns) if columns is not None else None)
    frame.to_csv(file_path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n", na_rep="")
    logger.debug(f"Saved {len(frame)} rows to: {file_path}")
    return file_path


def load_csv(file_path: Path) -> pd.DataFrame:
    """Load a table written by save_csv; string columns keep their text form."""
    logger.debug(f"Loading CSV from: {file_path}")

    if not file_path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")

    frame = pd.read_csv(file_path, dtype={"dataset": str, "experiment": str, "flag": str}, keep_default_na=False, na_values=[""])
    if "flag" in frame.columns:
        frame["flag"] = frame["flag"].fillna("")
    return frame


def load_toml(file_path: Path) -> Dict[str, Any]:
    """
    Load a TOML document.

    Raises:
        FileNotFoundError: If the file doesn't exist
        tomllib.TOMLDecodeError: If the file is not valid TOML
    """
    logger.debug(f"Loading TOML from: {file_path}")

    if not file_path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")

    with open(file_path, "rb") as f:
        return tomllib.load(f)
