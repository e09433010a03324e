"""Certified adversarial distributions against black-box classifiers."""

from ._core import (
    ConfigError,
    ContractError,
    Error,
    Model,
    NoiseFamily,
    NoiseSpec,
    ParameterError,
    attack,
    attack_files,
    beta_quantile,
    calibrate,
    certified_probability,
    gaussian_certified_probability,
    gaussian_max_shift,
    log_density,
    lower_conf_bound,
    normal_quantile,
    parse_config,
    rpq,
    sample,
    shift_confidence,
    verify,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "Error",
    "Model",
    "NoiseFamily",
    "NoiseSpec",
    "ParameterError",
    "attack",
    "attack_files",
    "beta_quantile",
    "calibrate",
    "certified_probability",
    "gaussian_certified_probability",
    "gaussian_max_shift",
    "log_density",
    "lower_conf_bound",
    "normal_quantile",
    "parse_config",
    "rpq",
    "sample",
    "shift_confidence",
    "verify",
]
