"""
Helper Utilities for RoseSpec

Learning Notes:
- Logging setup shared by the CLI and the test scripts
- Provenance (git revision) and system information recorded with every run
- Small file and formatting helpers used when emitting results
"""

import datetime
import logging
import os
import platform
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Union

# Provenance degrades to the version label when no git binary is installed
os.environ.setdefault("GIT_PYTHON_REFRESH", "quiet")

import git  # noqa: E402
import psutil  # noqa: E402

from utils.errors import DataFileError

PACKAGE_NAME = "rosespec"
PACKAGE_VERSION = "0.1.0"


def setup_logging(log_level: str = 'INFO', log_dir: Optional[Union[str, Path]] = None) -> None:
    """
    Set up application logging configuration.

    Learning Notes:
    - Console output goes to stderr so stdout stays free for reports
    - A dated log file is added only when a directory is given
    - force=True lets tests and repeated CLI calls reconfigure the root logger
    """
    log_format = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    date_format = '%Y-%m-%d %H:%M:%S'

    level = getattr(logging, str(log_level).upper(), None)
    if not isinstance(level, int):
        raise ValueError(f"unknown log level {log_level!r}")

    handlers = [logging.StreamHandler(sys.stderr)]
    log_file = None
    if log_dir is not None:
        log_path = Path(log_dir)
        log_path.mkdir(parents=True, exist_ok=True)
        log_file = log_path / f'{PACKAGE_NAME}_{datetime.datetime.now().strftime("%Y%m%d")}.log'
        handlers.append(logging.FileHandler(log_file, encoding='utf-8'))

    logging.basicConfig(
        level=level,
        format=log_format,
        datefmt=date_format,
        handlers=handlers,
        force=True,
    )

    logger = logging.getLogger(__name__)
    logger.debug(f"Logging initialized - Level: {log_level}")
    if log_file is not None:
        logger.info(f"Log file: {log_file}")


def default_thread_count() -> int:
    """Physical core count, falling back to logical cores, then 1."""
    return psutil.cpu_count(logical=False) or os.cpu_count() or 1


def get_system_info() -> Dict[str, Any]:
    """
    Get system information recorded in run manifests.

    Learning Notes:
    - platform for the interpreter and OS
    - psutil for core counts and memory
    """
    memory = psutil.virtual_memory()
    return {
        'platform': platform.platform(),
        'machine': platform.machine(),
        'python_version': platform.python_version(),
        'physical_cores': psutil.cpu_count(logical=False),
        'logical_cores': psutil.cpu_count(logical=True),
        'total_memory_gb': round(memory.total / 1024 ** 3, 2),
        'working_directory': str(Path.cwd()),
    }


def get_provenance() -> str:
    """
    Short description of the code that produced a result.

    "rosespec 0.1.0 (abc1234def)" inside a git checkout, with a "-dirty"
    suffix for uncommitted changes; just the version outside one.
    """
    label = f"{PACKAGE_NAME} {PACKAGE_VERSION}"
    try:
        repo = git.Repo(Path(__file__).resolve().parent.parent, search_parent_directories=True)
        revision = repo.head.commit.hexsha[:10]
        if repo.is_dirty(untracked_files=False):
            revision += "-dirty"
        return f"{label} ({revision})"
    except (git.GitError, ValueError):
        return label


def safe_file_write(file_path: Union[str, Path], content: str, encoding: str = 'utf-8') -> Path:
    """
    Write content to a file, creating parent directories.

    Raises DataFileError with the path when the write fails.
    """
    path = Path(file_path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding=encoding, newline='\n') as f:
            f.write(content)
    except OSError as e:
        logging.error(f"Error writing file {path}: {e}")
        raise DataFileError(path, str(e)) from e
    return path


def format_duration(seconds: float) -> str:
    """Format duration in seconds to human-readable format."""
    if seconds < 1:
        return f"{seconds:.2f}s"
    elif seconds < 60:
        return f"{seconds:.1f}s"
    elif seconds < 3600:
        minutes = int(seconds // 60)
        seconds = seconds % 60
        return f"{minutes}m {seconds:.0f}s"
    else:
        hours = int(seconds // 3600)
        minutes = int((seconds % 3600) // 60)
        return f"{hours}h {minutes}m"
