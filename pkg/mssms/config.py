import copy
import logging
import os
from typing import Any, Dict, Optional

import yaml

DEFAULT_CONFIG: Dict[str, Any] = {
    "budget": {
        "dp_states": 2_000_000,
        "bruteforce_leaves": 1_000_000,
    },
    "montecarlo": {
        "trials": 10_000,
        "seed": 0,
        "workers": 1,
    },
    "algorithms": {
        "wfa": {"lazy": False},
        "rhs": {"history": "all"},
    },
    "adversary": {
        "max_requests": 2_000,
    },
    "reports": {
        "active_sink": "csv",
        "csv": {"path": None},
        "sqlite": {"db_file": "mssms_runs.db"},
    },
    "acceptance": {},
}

BUDGET_ENV_VAR = "MSSMS_BUDGET"


def merge_config(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(config_path: str = "config.yaml") -> Dict[str, Any]:
    """Loads the YAML configuration file on top of the built-in defaults."""
    try:
        with open(config_path, "r") as f:
            loaded = yaml.safe_load(f) or {}
    except FileNotFoundError:
        logging.warning(
            f"Configuration file not found at {config_path}, using built-in defaults."
        )
        return copy.deepcopy(DEFAULT_CONFIG)
    except yaml.YAMLError as e:
        logging.error(f"Error parsing YAML file: {e}")
        raise
    return merge_config(DEFAULT_CONFIG, loaded)


def get_budget(config: Optional[Dict[str, Any]] = None, key: str = "dp_states") -> int:
    """
    State budget for the exact offline solvers: `dp_states` for the DP,
    `bruteforce_leaves` for the brute-force search.
    The MSSMS_BUDGET environment variable wins over the configuration for both.
    """
    env_value = os.environ.get(BUDGET_ENV_VAR)
    if env_value:
        try:
            return int(env_value)
        except ValueError:
            logging.warning(
                f"Ignoring non-integer {BUDGET_ENV_VAR}={env_value!r}, using configuration."
            )
    config = config or DEFAULT_CONFIG
    return int(config.get("budget", {}).get(key, DEFAULT_CONFIG["budget"][key]))
