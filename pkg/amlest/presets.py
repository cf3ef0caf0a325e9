"""
Embedded experiment designs.

Every preset is a plain mapping of :class:`~amlest.parameters.ExperimentConfig`
fields, with enums written by name, so that it can be dumped to JSON
unchanged and loaded back through the builder. Desk-scale presets shrink
the replication counts of the full designs to laptop run times.
"""
from copy import deepcopy
from typing import Any

_TOBIT_TRUTH = {
    "theta11": 0.1,
    "theta12": 0.2,
    "theta21": 0.1,
    "theta22": 0.2,
    "theta3": 1.0,
    "sigma": 0.5,
}
_MSM_CAPTION = {
    "m0": 1.5,
    "gamma_bar": 0.4,
    "b": 5.0,
    "sigma": 0.01,
    "k_bar": 4,
}
_MSM_TEXT = {**_MSM_CAPTION, "gamma_bar": 0.2, "b": 4.0}
_MSM_EMPIRICAL = {
    "m0": 1.2708,
    "gamma_bar": 0.1215,
    "b": 1.5663,
    "sigma": 0.0149,
    "k_bar": 18,
}
_STABLE_TRUTH = {"a": 1.8, "b": -0.1, "c": 0.1, "mu": 0.0}

PRESETS: dict[str, dict[str, Any]] = {
    "tobit": {
        "verb": "MonteCarlo",
        "model": "Tobit",
        "true_params": _TOBIT_TRUTH,
        "sample_size": 1000,
        "replications": 200,
        "num_paths": 10,
        "estimators": ["Auxiliary", "AML"],
    },
    "tobit-full": {
        "verb": "MonteCarlo",
        "model": "Tobit",
        "true_params": _TOBIT_TRUTH,
        "sample_size": 1000,
        "sample_sizes": [1000, 10000],
        "replications": 1000,
        "num_paths": 10,
        "estimators": ["Auxiliary", "AML"],
    },
    "msm": {
        "verb": "MonteCarlo",
        "model": "MSM",
        "true_params": _MSM_CAPTION,
        "sample_size": 2000,
        "replications": 100,
        "num_paths": 50,
        "estimators": ["ML", "AML"],
        "ml_grid": [1, 2, 3, 4, 5, 6, 7],
    },
    "msm-alt": {
        "verb": "MonteCarlo",
        "model": "MSM",
        "true_params": _MSM_TEXT,
        "sample_size": 5000,
        "replications": 1000,
        "num_paths": 100,
        "estimators": ["ML", "AML"],
        "ml_grid": [1, 2, 3, 4, 5, 6, 7],
    },
    "msm-deep-desk": {
        "verb": "MonteCarlo",
        "model": "MSM",
        "true_params": _MSM_EMPIRICAL,
        "sample_size": 5000,
        "replications": 20,
        "num_paths": 20,
        "estimators": ["Auxiliary", "AML"],
    },
    "msm-deep": {
        "verb": "MonteCarlo",
        "model": "MSM",
        "true_params": _MSM_EMPIRICAL,
        "sample_size": 23202,
        "replications": 1000,
        "num_paths": 100,
        "estimators": ["Auxiliary", "AML"],
    },
    "stable": {
        "verb": "MonteCarlo",
        "model": "Stable",
        "true_params": _STABLE_TRUTH,
        "sample_size": 10000,
        "replications": 100,
        "num_paths": 10,
        "estimators": ["Auxiliary", "AML"],
    },
    "stable-full": {
        "verb": "MonteCarlo",
        "model": "Stable",
        "true_params": _STABLE_TRUTH,
        "sample_size": 10000,
        "replications": 1000,
        "num_paths": 10,
        "estimators": ["Auxiliary", "AML"],
    },
    "garch-sv": {
        "verb": "MonteCarlo",
        "model": "GarchSV",
        "true_params": {
            "mu": 0.0,
            "omega": 0.1,
            "alpha": 0.2,
            "varpi": 0.02,
            "rho": 0.5,
        },
        "sample_size": 5000,
        "replications": 100,
        "num_paths": 10,
        "estimators": ["Auxiliary", "AML"],
    },
    "probit": {
        "verb": "MonteCarlo",
        "model": "Probit",
        "true_params": {"theta11": 0.5, "theta2": 0.5},
        "sample_size": 5000,
        "replications": 100,
        "num_paths": 10,
        "estimators": ["Auxiliary", "AML"],
    },
    "location": {
        "verb": "MonteCarlo",
        "model": "GaussianLocation",
        "true_params": {"theta": 0.0},
        "sample_size": 10000,
        "replications": 500,
        "num_paths": 10,
        "estimators": ["ML", "AML", "UAML"],
        "uaml_beta": {"theta": 1.0},
        "compute_variance": False,
    },
    "backtest": {
        "verb": "Backtest",
        "model": "MSM",
        "true_params": _MSM_CAPTION,
        "sample_size": 2000,
        "num_particles": 10000,
        "alphas": [0.01, 0.05],
        "es_alpha": 0.05,
    },
    "timing": {
        "verb": "Timing",
        "model": "MSM",
        "true_params": _MSM_TEXT,
        "sample_size": 5000,
        "num_paths": 100,
        "timing_grid": [6, 7, 8, 9, 10, 11, 12],
        "timing_loglik_max": 10,
        "timing_repeats": 5,
    },
    "sp500-msm": {
        "verb": "Fit",
        "model": "MSM",
        "num_paths": 100,
        "demean": True,
        "estimators": ["Auxiliary", "AML", "ML"],
        "ml_grid": [1, 2, 3, 4, 5, 6, 7],
    },
}


# alternate ids accepted wherever a preset name is
PRESET_ALIASES: dict[str, str] = {
    "table1": "tobit",
    "table1-full": "tobit-full",
    "table2": "msm",
    "table2-text": "msm-alt",
    "table3-desk": "msm-deep-desk",
    "table3": "msm-deep",
    "table6": "stable",
    "table6-full": "stable-full",
}


def preset_names() -> list[str]:
    return sorted([*PRESETS, *PRESET_ALIASES])


def get_preset(name: str) -> dict[str, Any]:
    """
    A copy of the preset ``name``, which may be an alias.

    Raises
    ------
    KeyError
        If no preset has this name.

    Examples
    --------
    >>> get_preset("stable")["true_params"]["a"]
    1.8
    >>> get_preset("table6")["model"]
    'Stable'
    """
    key = PRESET_ALIASES.get(name, name)
    if key not in PRESETS:
        raise KeyError(
            f"Unknown preset '{name}'. Available presets: {preset_names()}"
        )
    return {"preset": name, **deepcopy(PRESETS[key])}
