"""
Logging setup for command-line runs
"""

import logging
from typing import Any, Mapping

import yaml

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def configure_logging(level: str = 'INFO') -> None:
    """Configure the root logger for a command-line run."""
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO),
                        format=LOG_FORMAT)


def log_run_context(logger: logging.Logger, command: str, config: Mapping[str, Any]) -> None:
    """Log a one-line run header at INFO and the resolved config at DEBUG."""
    env = config.get('env', {}).get('name', 'unknown')
    mbil = config.get('mbil', {})
    logger.info(f"Starting {command} on {env} "
                f"(alpha={mbil.get('alpha')}, beta={mbil.get('beta')}, "
                f"seed={config.get('run', {}).get('seed')})")
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug("Resolved configuration:\n" + yaml.safe_dump(dict(config), sort_keys=False))
