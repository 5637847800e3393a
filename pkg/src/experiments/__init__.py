"""
Experiment configuration, commands and multi-run sweeps
"""

from .config import (
    AUTO_DEFAULTS,
    RESOLVED_NAME,
    DatasetConfig,
    DensitySection,
    EnvConfig,
    EvaluationConfig,
    ExperimentConfig,
    MbilSection,
    RunConfig,
    apply_override,
    default_config,
    dump_config,
    load_config,
    load_schema,
    parse_override,
    resolve_config
)
from .sweep import RunOutcome, RunSpec, run_parallel, summarize
from .commands import (
    ExperimentRunner,
    cmd_ablate,
    cmd_density_check,
    cmd_evaluate,
    cmd_gen_expert,
    cmd_sweep,
    cmd_train,
    execute_run
)

__all__ = [
    'AUTO_DEFAULTS',
    'RESOLVED_NAME',
    'DatasetConfig',
    'DensitySection',
    'EnvConfig',
    'EvaluationConfig',
    'ExperimentConfig',
    'MbilSection',
    'RunConfig',
    'apply_override',
    'default_config',
    'dump_config',
    'load_config',
    'load_schema',
    'parse_override',
    'resolve_config',
    'RunOutcome',
    'RunSpec',
    'run_parallel',
    'summarize',
    'ExperimentRunner',
    'cmd_ablate',
    'cmd_density_check',
    'cmd_evaluate',
    'cmd_gen_expert',
    'cmd_sweep',
    'cmd_train',
    'execute_run'
]
