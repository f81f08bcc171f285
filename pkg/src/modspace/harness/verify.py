"""Run every experiment config in a directory and reduce to a summary table."""

from __future__ import annotations

import time
from pathlib import Path
from typing import Optional

import pandas as pd

from modspace.errors import ConfigError, ExperimentError, ModspaceError
from modspace.harness.config import load_config
from modspace.harness.experiments import run_experiment
from modspace.logging import get_logger
from modspace.settings import get_settings

logger = get_logger(__name__)

SUMMARY_COLUMNS = ["experiment", "reference", "passed", "detail", "wall_seconds"]


def discover(config_dir: Path) -> list[Path]:
    config_dir = Path(config_dir)
    if not config_dir.is_dir():
        raise ConfigError(f"{config_dir} is not a directory")
    paths = sorted(config_dir.glob("*.cfg"))
    if not paths:
        raise ConfigError(f"no experiments in {config_dir}")
    return paths


def run_one(path: Path, output_dir: Optional[Path] = None) -> dict:
    started = time.perf_counter()
    config = None
    try:
        config = load_config(path)
        outcome = run_experiment(config, output_dir)
        passed, detail = outcome.passed, outcome.detail
    except ModspaceError as e:
        error = ExperimentError(config.name if config else path.stem, e)
        logger.error("experiment error", experiment=error.experiment, error=str(e))
        passed, detail = False, str(error)
    return {
        "experiment": config.name if config else path.stem,
        "reference": config.experiment.reference if config else "",
        "passed": passed,
        "detail": detail,
        "wall_seconds": round(time.perf_counter() - started, 3),
    }


def verify_all(config_dir: Path, output_dir: Optional[Path] = None) -> pd.DataFrame:
    """Serial reduction over independent experiments; writes summary.csv and summary.txt."""
    paths = discover(config_dir)
    output_dir = Path(output_dir or get_settings().output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    rows = [run_one(path, output_dir) for path in paths]
    summary = pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
    write_summary(summary, output_dir)

    failed = summary.loc[~summary["passed"], "experiment"].tolist()
    logger.info(
        "verification finished",
        experiments=len(summary),
        failed=len(failed),
        failures=failed,
    )
    return summary


def format_summary(summary: pd.DataFrame) -> str:
    table = summary.assign(passed=summary["passed"].map({True: "PASS", False: "FAIL"}))
    return table.to_string(index=False, justify="left")


def write_summary(summary: pd.DataFrame, output_dir: Path) -> None:
    summary.to_csv(output_dir / "summary.csv", index=False)
    (output_dir / "summary.txt").write_text(format_summary(summary) + "\n", encoding="utf-8")
