from .experiments import (ConfigError, ExperimentConfig, Exp5Result, TableRow,
                          TrialResult, run_exp3, run_exp5, run_experiment)

__all__ = ["ConfigError", "ExperimentConfig", "Exp5Result", "TableRow",
           "TrialResult", "run_exp3", "run_exp5", "run_experiment"]
