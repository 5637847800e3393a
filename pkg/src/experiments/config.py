"""
Experiment configuration: schema defaults, user files, overrides and resolution
"""

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union
import copy
import hashlib
import json
import logging

import yaml

from ..envs import BaseEnvironment, EnvDescriptor, ExpertPolicy, make_env, make_expert
from ..flows import DensityFitConfig
from ..mbil import FlowSettings, MbilConfig
from ..utils.validation import ValidationError, is_schema_leaf, validate_config, validate_seeds

logger = logging.getLogger(__name__)

MANIFEST_PATH = Path(__file__).resolve().parents[2] / 'plugin.yaml'
RESOLVED_NAME = 'config.resolved'

# Values filled in for null ("auto") settings, keyed by action type
AUTO_DEFAULTS = {
    'discrete': {'episodes': 300, 'n_seeds': 10, 'policy_loss': 'nll'},
    'continuous': {'episodes': 10, 'n_seeds': 5, 'policy_loss': 'mse'},
}


def load_schema(path: Union[str, Path] = MANIFEST_PATH) -> Dict[str, Any]:
    """Read the configuration schema from the manifest."""
    with open(path) as f:
        manifest = yaml.safe_load(f)
    return manifest['configuration']


def default_config(schema: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Configuration tree holding every schema default."""
    schema = schema if schema is not None else load_schema()
    return {key: copy.deepcopy(node['default']) if is_schema_leaf(node) else default_config(node)
            for key, node in schema.items()}


def _merge(base: Dict[str, Any], update: Dict[str, Any], prefix: str = '') -> Dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value, f"{prefix}{key}.")
        else:
            merged[key] = value
    return merged


def parse_override(text: str) -> Tuple[List[str], Any]:
    """
    Split ``dotted.path=value``; the value is parsed as YAML

    Raises:
        ValidationError: If the override has no ``=`` or an empty path
    """
    if '=' not in text:
        raise ValidationError(f"Override {text!r} must look like key.path=value")
    key, raw = text.split('=', 1)
    path = [part for part in key.strip().split('.') if part]
    if not path:
        raise ValidationError(f"Override {text!r} has an empty key")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as e:
        raise ValidationError(f"Cannot parse value of override {text!r}: {e}") from e
    return path, value


def apply_override(tree: Dict[str, Any], text: str) -> Dict[str, Any]:
    path, value = parse_override(text)
    tree = copy.deepcopy(tree)
    node = tree
    for part in path[:-1]:
        if not isinstance(node.get(part), dict):
            raise ValidationError(f"Unknown configuration section {'.'.join(path[:-1])}")
        node = node[part]
    if path[-1] not in node:
        raise ValidationError(f"Unknown configuration key {'.'.join(path)}")
    node[path[-1]] = value
    return tree


def load_config(path: Optional[Union[str, Path]] = None, overrides: Iterable[str] = (),
                schema: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Defaults, then a user YAML file, then ``--set`` overrides; validated

    Raises:
        ValidationError: On unreadable files, unknown keys or invalid values
    """
    schema = schema if schema is not None else load_schema()
    tree = default_config(schema)
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ValidationError(f"Config file not found: {path}")
        try:
            with open(path) as f:
                user = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ValidationError(f"Cannot parse {path}: {e}") from e
        if not isinstance(user, dict):
            raise ValidationError(f"{path} must hold a mapping")
        tree = _merge(tree, user)
    for text in overrides:
        tree = apply_override(tree, text)
    validate_config(tree, schema)
    return tree


@dataclass(frozen=True)
class EnvConfig:
    name: str
    params: Dict[str, Any]
    expert: Dict[str, Any]

    def make_env(self) -> BaseEnvironment:
        return make_env(self.name, **self.params)

    def make_expert(self, env: Optional[BaseEnvironment] = None) -> ExpertPolicy:
        return make_expert(env or self.make_env(), **self.expert)

    @property
    def descriptor(self) -> EnvDescriptor:
        return self.make_env().descriptor


@dataclass(frozen=True)
class DatasetConfig:
    path: Optional[str]
    pool_size: int
    n_trajectories: int
    sizes: Tuple[int, ...]
    horizon: Optional[int]
    seed: int


@dataclass(frozen=True)
class MbilSection:
    alpha: float
    beta: float
    policy_loss: str
    iterations: int
    batch_size: int
    learning_rate: float
    hidden_width: int
    select: str
    log_every: int


@dataclass(frozen=True)
class DensitySection:
    kind: str
    steps: int
    batch_size: int
    noise_sigma: float
    learning_rate: float
    n_blocks: int
    hidden_width: int
    clamp: float
    cond_width: Optional[int]

    def fit_config(self, seed: int, progress: bool = False) -> DensityFitConfig:
        return DensityFitConfig(steps=self.steps, batch_size=self.batch_size,
                                noise_sigma=self.noise_sigma, learning_rate=self.learning_rate,
                                seed=seed, progress=progress)

    @property
    def flow_settings(self) -> FlowSettings:
        return FlowSettings(n_blocks=self.n_blocks, hidden_width=self.hidden_width,
                            clamp=self.clamp, cond_width=self.cond_width)


@dataclass(frozen=True)
class EvaluationConfig:
    every: int
    episodes: int
    deterministic: bool
    check_tuples: int


@dataclass(frozen=True)
class RunConfig:
    seeds: Tuple[int, ...]
    workers: int
    progress: bool
    out: str


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment settings."""
    env: EnvConfig
    dataset: DatasetConfig
    mbil: MbilSection
    density: DensitySection
    evaluation: EvaluationConfig
    run: RunConfig
    ablation_grid: Tuple[Tuple[float, float], ...]
    tree: Dict[str, Any] = field(compare=False, repr=False, default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self.tree)

    def with_weights(self, alpha: float, beta: float) -> 'ExperimentConfig':
        tree = self.to_dict()
        tree['mbil']['alpha'], tree['mbil']['beta'] = alpha, beta
        return replace(self, mbil=replace(self.mbil, alpha=alpha, beta=beta), tree=tree)

    def mbil_config(self, seed: int) -> MbilConfig:
        """Library-level settings for one run seed."""
        m, d = self.mbil, self.density
        return MbilConfig(
            alpha=m.alpha, beta=m.beta, policy_loss=m.policy_loss, iterations=m.iterations,
            batch_size=m.batch_size, learning_rate=m.learning_rate, hidden_width=m.hidden_width,
            seed=seed, eval_every=self.evaluation.every, eval_episodes=self.evaluation.episodes,
            eval_deterministic=self.evaluation.deterministic, select=m.select,
            log_every=m.log_every, progress=self.run.progress, density_kind=d.kind,
            flow=d.flow_settings,
            chain_fit=d.fit_config(2 * seed, self.run.progress),
            kernel_fit=d.fit_config(2 * seed + 1, self.run.progress),
        )

    def fingerprint(self, **extra: Any) -> str:
        """Short stable hash of the resolved settings plus run-specific values."""
        payload = json.dumps({'config': self.tree, 'extra': extra}, sort_keys=True, default=str)
        return hashlib.sha1(payload.encode()).hexdigest()[:8]

    def pool_fingerprint(self) -> str:
        """Hash of the settings that determine the expert trajectory pool."""
        d = self.dataset
        payload = json.dumps({'env': self.env.name, 'params': self.env.params, 'expert': self.env.expert,
                              'pool': [d.pool_size, d.horizon, d.seed]}, sort_keys=True)
        return hashlib.sha1(payload.encode()).hexdigest()[:8]


def resolve_config(tree: Dict[str, Any]) -> ExperimentConfig:
    """
    Fill environment-dependent defaults and build an ``ExperimentConfig``

    Raises:
        ValidationError: If the resolved settings are inconsistent
    """
    tree = copy.deepcopy(tree)
    env_name = tree['env']['name']
    params = dict(tree['env'][env_name])
    try:
        descriptor = make_env(env_name, **params).descriptor
    except Exception as e:
        raise ValidationError(f"Invalid environment settings for {env_name}: {e}") from e
    auto = AUTO_DEFAULTS[descriptor.action_type]

    if tree['evaluation']['episodes'] is None:
        tree['evaluation']['episodes'] = auto['episodes']
    if tree['mbil']['policy_loss'] is None:
        tree['mbil']['policy_loss'] = auto['policy_loss']
    if descriptor.is_discrete and tree['mbil']['policy_loss'] == 'mse':
        raise ValidationError("mse behavior cloning needs continuous actions")
    if tree['dataset']['horizon'] is None:
        tree['dataset']['horizon'] = params['horizon']
    run = tree['run']
    if run['seeds'] is None:
        n_seeds = run['n_seeds'] if run['n_seeds'] is not None else auto['n_seeds']
        run['seeds'] = [run['seed'] + i for i in range(n_seeds)]
    validate_seeds(run['seeds'])
    run['n_seeds'] = len(run['seeds'])
    if tree['density']['kind'] == 'tabular' and not descriptor.is_discrete:
        raise ValidationError("Tabular densities need a discrete environment")

    grid = []
    for pair in tree['ablation']['grid']:
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ValidationError(f"ablation.grid entries must be [alpha, beta] pairs, got {pair!r}")
        grid.append((float(pair[0]), float(pair[1])))

    d = tree['dataset']
    return ExperimentConfig(
        env=EnvConfig(env_name, params, dict(tree['expert'])),
        dataset=DatasetConfig(d['path'], d['pool_size'], d['n_trajectories'], tuple(d['sizes']),
                              d['horizon'], d['seed']),
        mbil=MbilSection(**tree['mbil']),
        density=DensitySection(**tree['density']),
        evaluation=EvaluationConfig(**tree['evaluation']),
        run=RunConfig(tuple(run['seeds']), run['workers'], run['progress'], run['out']),
        ablation_grid=tuple(grid),
        tree=tree,
    )


def dump_config(config: ExperimentConfig, path: Union[str, Path]) -> Path:
    """Write the resolved settings as YAML next to a run's outputs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        yaml.safe_dump(config.to_dict(), f, sort_keys=False)
    return path
