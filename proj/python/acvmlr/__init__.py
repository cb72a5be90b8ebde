"""Approximate leave-one-out CV for sparse multinomial logistic regression.

Labels are 0-based integers. Feature matrices are (samples x features) float arrays.
"""

import json

from ._core import (
    REPORT_SCHEMA_VERSION,
    AcvResult,
    ContractViolation,
    Error,
    FitResult,
    ParseError,
    SweepConfig,
    acv,
    fit,
    lambda_max,
    literal_cv,
    log_grid,
    read_dataset,
    saacv,
    write_dataset,
)
from ._core import generate as _generate
from ._core import sweep_json as _sweep_json

__all__ = [
    "REPORT_SCHEMA_VERSION",
    "AcvResult",
    "ContractViolation",
    "Error",
    "FitResult",
    "ParseError",
    "SweepConfig",
    "acv",
    "fit",
    "generate",
    "lambda_max",
    "literal_cv",
    "log_grid",
    "read_dataset",
    "saacv",
    "sweep",
    "write_dataset",
]


def generate(spec=None, **fields):
    """Synthetic data; spec is a dict or JSON string in the CLI generator format."""
    if spec is None:
        spec = fields
    elif fields:
        raise TypeError("pass either a spec or keyword fields, not both")
    if not isinstance(spec, str):
        spec = json.dumps(spec)
    return _generate(spec)


def sweep(X, y, n_classes=None, **options):
    """Fit a lambda path and estimate LOO error per point. Returns the report as a dict."""
    config = SweepConfig()
    for key, value in options.items():
        if not hasattr(config, key):
            raise TypeError(f"unknown sweep option '{key}'")
        setattr(config, key, value)
    return json.loads(_sweep_json(X, y, config, n_classes))
