"""
Utility functions and helpers
"""

import csv
import io
import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Iterable, List, Sequence

import colorlog
import numpy as np

from y00lab import __version__
from y00lab.config import LoggingSettings


def setup_logging(settings: LoggingSettings) -> logging.Logger:
    """
    Configure logging for the application

    Args:
        settings: Logging configuration settings

    Returns:
        Configured logger
    """
    logger = logging.getLogger('y00lab')
    logger.setLevel(getattr(logging, settings.level.upper(), logging.INFO))

    # Clear any existing handlers
    logger.handlers.clear()

    detailed_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    # Console goes to stderr so CSV on stdout stays clean
    if settings.console:
        console_handler = colorlog.StreamHandler(sys.stderr)
        console_handler.setLevel(logger.level)
        console_handler.setFormatter(colorlog.ColoredFormatter(
            '%(log_color)s%(levelname)s%(reset)s: %(message)s',
            log_colors={
                'DEBUG': 'cyan',
                'INFO': 'green',
                'WARNING': 'yellow',
                'ERROR': 'red',
                'CRITICAL': 'red,bg_white',
            }
        ))
        logger.addHandler(console_handler)

    if settings.file:
        log_path = Path(settings.file)
        log_path.parent.mkdir(parents=True, exist_ok=True)

        file_handler = RotatingFileHandler(
            settings.file,
            maxBytes=settings.max_bytes,
            backupCount=settings.backup_count
        )
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(detailed_formatter)
        logger.addHandler(file_handler)

    return logger


def format_duration(seconds: float) -> str:
    """
    Wall-clock time of a campaign or refresh batch for log lines

    Args:
        seconds: Elapsed time from time.perf_counter differences

    Returns:
        "12.3s" under a minute, "1m 30s" under an hour, "2h 1m" beyond
    """
    if seconds < 60:
        return f"{seconds:.1f}s"
    minutes, rest = divmod(int(round(seconds)), 60)
    if minutes < 60:
        return f"{minutes}m {rest}s"
    hours, minutes = divmod(minutes, 60)
    return f"{hours}h {minutes}m"


def parse_grid(spec: str) -> np.ndarray:
    """
    Parse a START:STOP:STEP grid, STOP inclusive

    Args:
        spec: Grid string such as "0:100:1"

    Returns:
        Sorted float array of grid points
    """
    try:
        start, stop, step = (float(part) for part in spec.split(':'))
    except ValueError as e:
        raise ValueError(f"grid must look like START:STOP:STEP, got {spec!r}") from e
    if step <= 0 or stop < start:
        raise ValueError(f"grid {spec!r} must have STEP > 0 and STOP >= START")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def create_summary_table(headers: Sequence[str], rows: Sequence[Sequence]) -> str:
    """
    Boxed console table for breach classifications and detection checks

    Cells are stringified (mpf values included) and left-aligned.
    """
    cells = [[str(cell) for cell in row] for row in rows]
    widths = [max([len(h)] + [len(row[i]) for row in cells]) for i, h in enumerate(headers)]
    rule = "+" + "+".join("-" * (w + 2) for w in widths) + "+"

    def line(values):
        return "|" + "|".join(f" {v.ljust(w)} " for v, w in zip(values, widths)) + "|"

    return "\n".join([rule, line(headers), rule, *(line(row) for row in cells), rule])


def render_csv(columns: Sequence[str], rows: Iterable[Sequence], *,
               digest: str, seed: int, metadata: Sequence[str] = ()) -> str:
    """
    Render a CSV artifact with the provenance header every artifact carries

    Args:
        columns: Column names
        rows: Data rows
        digest: Scenario config digest
        seed: Run seed
        metadata: Extra "key=value" header lines

    Returns:
        CSV text (no timestamps, so identical inputs give identical bytes)
    """
    buffer = io.StringIO()
    buffer.write(f"# y00lab {__version__} config={digest} seed={seed}\n")
    for line in metadata:
        buffer.write(f"# {line}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buffer.getvalue()


def write_artifacts(directory: str, artifacts: List[tuple]) -> List[Path]:
    """
    Write rendered artifacts; called only after every artifact is computed

    Args:
        directory: Output directory
        artifacts: (file name, text) pairs

    Returns:
        Paths written
    """
    out_dir = Path(directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in artifacts:
        path = out_dir / name
        path.write_text(text, encoding="utf-8")
        paths.append(path)
    return paths
