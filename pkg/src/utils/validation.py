"""
Validation utilities for configuration and data
"""

from typing import Any, Dict, Iterable, Mapping, Optional
import logging
import math

logger = logging.getLogger(__name__)


class ValidationError(Exception):
    """Custom exception for validation errors"""
    pass


_TYPE_CHECKS = {
    'integer': lambda v: isinstance(v, int) and not isinstance(v, bool),
    'number': lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
    'boolean': lambda v: isinstance(v, bool),
    'string': lambda v: isinstance(v, str),
    'list': lambda v: isinstance(v, (list, tuple)),
    'mapping': lambda v: isinstance(v, dict),
}


def validate_positive_int(name: str, value: Any) -> None:
    """
    Validate that a value is an integer >= 1

    Raises:
        ValidationError: If validation fails
    """
    if not _TYPE_CHECKS['integer'](value) or value < 1:
        raise ValidationError(f"{name} must be a positive integer, got {value!r}")


def validate_non_negative(name: str, value: Any) -> None:
    """
    Validate that a value is a finite real >= 0

    Raises:
        ValidationError: If validation fails
    """
    if not _TYPE_CHECKS['number'](value) or not math.isfinite(value) or value < 0:
        raise ValidationError(f"{name} must be a non-negative finite number, got {value!r}")


def validate_loss_weights(alpha: float, beta: float) -> None:
    """
    Validate the dynamics/policy loss weights

    Raises:
        ValidationError: If either weight is negative or both are zero
    """
    validate_non_negative('alpha', alpha)
    validate_non_negative('beta', beta)
    if alpha + beta <= 0:
        raise ValidationError("alpha + beta must be positive")


def validate_seeds(seeds: Iterable[int]) -> None:
    """
    Validate that run seeds are distinct non-negative integers

    Raises:
        ValidationError: If validation fails
    """
    seen = set()
    for seed in seeds:
        if not _TYPE_CHECKS['integer'](seed) or seed < 0:
            raise ValidationError(f"Seeds must be non-negative integers, got {seed!r}")
        if seed in seen:
            raise ValidationError(f"Seed {seed} appears more than once")
        seen.add(seed)


def _validate_leaf(path: str, value: Any, spec: Mapping[str, Any]) -> None:
    if value is None:
        if spec.get('nullable', False):
            return
        raise ValidationError(f"{path} must not be null")

    expected = spec.get('type', 'string')
    check = _TYPE_CHECKS.get(expected)
    if check is None:
        raise ValidationError(f"{path}: unknown schema type {expected!r}")
    if expected == 'number' and _TYPE_CHECKS['integer'](value):
        value = float(value)
    if not check(value):
        raise ValidationError(f"{path} must be of type {expected}, got {value!r}")

    choices = spec.get('choices')
    if choices is not None and value not in choices:
        raise ValidationError(f"{path} must be one of {choices}, got {value!r}")

    items = value if expected == 'list' else [value]
    for item in items:
        if not isinstance(item, (int, float)) or isinstance(item, bool):
            continue
        if 'minimum' in spec and item < spec['minimum']:
            raise ValidationError(f"{path} must be >= {spec['minimum']}, got {item!r}")
        if 'maximum' in spec and item > spec['maximum']:
            raise ValidationError(f"{path} must be <= {spec['maximum']}, got {item!r}")


def is_schema_leaf(node: Any) -> bool:
    """Return True when a schema node describes a single setting."""
    return isinstance(node, dict) and 'type' in node and 'default' in node


def validate_config(config: Dict[str, Any], schema: Optional[Dict[str, Any]] = None,
                    prefix: str = '') -> None:
    """
    Validate a configuration tree against the manifest schema

    Args:
        config: Configuration tree (nested dictionaries)
        schema: Schema tree from plugin.yaml; when omitted only the
            cross-field rules are checked
        prefix: Dotted path of the subtree being validated

    Raises:
        ValidationError: If validation fails
    """
    if schema is not None:
        unknown = set(config) - set(schema)
        if unknown:
            raise ValidationError(
                f"Unknown configuration keys: {', '.join(sorted(prefix + k for k in unknown))}")
        for key, node in schema.items():
            path = f"{prefix}{key}"
            if key not in config:
                raise ValidationError(f"Missing configuration key {path}")
            if is_schema_leaf(node):
                _validate_leaf(path, config[key], node)
            else:
                if not isinstance(config[key], dict):
                    raise ValidationError(f"{path} must be a mapping")
                validate_config(config[key], node, prefix=f"{path}.")

    if prefix:
        return

    # Cross-field rules
    mbil = config.get('mbil', {})
    if 'alpha' in mbil and 'beta' in mbil:
        validate_loss_weights(mbil['alpha'], mbil['beta'])
    for size in config.get('dataset', {}).get('sizes', []) or []:
        validate_positive_int('dataset.sizes entry', size)

    logger.debug("Configuration validation passed")
