"""
Numerical settings tree.

Every field is overridable from a YAML file; presets supply the defaults.
Validation errors name the dotted field path.
"""
import copy
import hashlib
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union, get_args, get_origin, get_type_hints

import yaml

from app.models.enums import FrfMethod, MetaOptimizer, Method, Problem, TemperatureMode
from app.models.errors import ConfigError
from app.models.structures import StructureSpec, TemperatureLaw


@dataclass(frozen=True)
class DynamicsSettings:
    n_dof: int = 5
    mass: float = 1.0
    damper: float = 2.0
    temp_affected_springs: Tuple[int, ...] = (1, 2, 3)
    temperature_law: Tuple[float, float, float] = (-13.0, 500.0, 7200.0)
    temperature_mode: str = TemperatureMode.SCALED.value
    temperature_range: Tuple[float, float] = (20.0, 40.0)
    reference_temperature: float = 20.0
    freq_start: float = 0.25
    freq_stop: float = 64.0
    freq_step: float = 0.25
    frf_method: str = FrfMethod.DIRECT.value
    excited_dof: int = 0
    observed_dof: int = 0
    # time-domain pipeline
    dt: float = 1e-3
    n_steps: int = 2 ** 20
    noise_std: float = 1.0
    n_segments: int = 128
    overlap: float = 0.5
    window: str = 'hann'

    def temp_law(self) -> TemperatureLaw:
        return TemperatureLaw(
            coefficients=tuple(self.temperature_law),
            mode=TemperatureMode(self.temperature_mode),
            valid_range=tuple(self.temperature_range),
            reference_temperature=self.reference_temperature
        )

    def structure(self, base_stiffness: float, structure_id: str = '') -> StructureSpec:
        return StructureSpec.chain(
            base_stiffness,
            n_dof=self.n_dof,
            mass=self.mass,
            damper=self.damper,
            temp_affected_springs=self.temp_affected_springs,
            temp_law=self.temp_law(),
            structure_id=structure_id
        )

    def validate(self, prefix: str = 'dynamics') -> None:
        _positive(self, prefix, 'n_dof', 'mass', 'freq_step', 'dt', 'n_steps', 'n_segments')
        if self.damper < 0:
            raise ConfigError("must be >= 0", field=f'{prefix}.damper')
        _choice(self.temperature_mode, TemperatureMode, f'{prefix}.temperature_mode')
        _choice(self.frf_method, FrfMethod, f'{prefix}.frf_method')
        _interval(self.temperature_range, f'{prefix}.temperature_range')
        if len(self.temperature_law) != 3:
            raise ConfigError("expected three coefficients (a2, a1, a0)",
                              field=f'{prefix}.temperature_law')
        law = self.temp_law()
        if law.minimum_over_range() <= 0:
            raise ConfigError("law must stay positive over the temperature range",
                              field=f'{prefix}.temperature_law')
        # inside the range q(T_ref) > 0 follows from the check above
        low, high = self.temperature_range
        if not low <= self.reference_temperature <= high:
            raise ConfigError(f"must lie within [{low}, {high}]",
                              field=f'{prefix}.reference_temperature')
        if not set(self.temp_affected_springs) <= set(range(1, self.n_dof + 1)):
            raise ConfigError(f"springs must lie in 1..{self.n_dof}",
                              field=f'{prefix}.temp_affected_springs')
        if not 0 <= self.freq_start < self.freq_stop:
            raise ConfigError("need 0 <= freq_start < freq_stop", field=f'{prefix}.freq_start')
        for name in ('excited_dof', 'observed_dof'):
            if not 0 <= getattr(self, name) < self.n_dof:
                raise ConfigError(f"must be in 0..{self.n_dof - 1}", field=f'{prefix}.{name}')
        if not 0 <= self.overlap < 1:
            raise ConfigError("must be in [0, 1)", field=f'{prefix}.overlap')


@dataclass(frozen=True)
class PopulationConfig:
    k_range: Tuple[float, float] = (8000.0, 12000.0)
    temperature_range: Tuple[float, float] = (20.0, 40.0)
    n_train_structures: Tuple[int, ...] = (2, 3, 4, 5, 6, 7, 8, 9)
    n_validation: int = 1
    n_test: int = 200
    context_sizes: Tuple[int, ...] = (1, 3, 5, 7)
    n_repetitions: int = 50
    n_train_temperatures: int = 100
    n_queries: int = 200
    context_grid_size: int = 200
    seed: int = 0
    test_seed: Optional[int] = None

    def validate(self, valid_range, prefix: str = 'population') -> None:
        _interval(self.k_range, f'{prefix}.k_range')
        if self.k_range[0] <= 0:
            raise ConfigError("stiffness must be positive", field=f'{prefix}.k_range')
        _interval(self.temperature_range, f'{prefix}.temperature_range')
        low, high = valid_range
        if self.temperature_range[0] < low or self.temperature_range[1] > high:
            raise ConfigError(f"must lie within [{low}, {high}]", field=f'{prefix}.temperature_range')
        if not self.n_train_structures or min(self.n_train_structures) < 1:
            raise ConfigError("need at least one training structure",
                              field=f'{prefix}.n_train_structures')
        if not self.context_sizes or min(self.context_sizes) < 1:
            raise ConfigError("context sizes must be >= 1", field=f'{prefix}.context_sizes')
        if max(self.context_sizes) > self.context_grid_size:
            raise ConfigError("larger than the context grid", field=f'{prefix}.context_sizes')
        _positive(self, prefix, 'n_test', 'n_repetitions', 'n_train_temperatures',
                  'n_queries', 'context_grid_size')
        if self.n_validation not in (0, 1):
            raise ConfigError("must be 0 or 1", field=f'{prefix}.n_validation')


@dataclass(frozen=True)
class MlpSettings:
    hidden_sizes: Tuple[int, ...] = (10, 20, 30, 40, 50, 60, 70, 80, 90, 100)
    hidden_dim: int = 40
    n_inits: int = 5

    def validate(self, prefix: str = 'mlp') -> None:
        if not self.hidden_sizes or min(self.hidden_sizes) < 1:
            raise ConfigError("hidden sizes must be >= 1", field=f'{prefix}.hidden_sizes')
        _positive(self, prefix, 'hidden_dim', 'n_inits')


@dataclass(frozen=True)
class MamlConfig:
    alpha: float = 1e-2
    beta: float = 1e-3
    k_inner: int = 1
    epochs: int = 2000
    batch: Optional[int] = None
    n_inner_samples: int = 10
    n_meta_samples: int = 10
    second_order: bool = True
    seed: int = 0
    adapt_steps: int = 50
    validate_every: int = 1
    meta_optimizer: str = MetaOptimizer.SGD.value

    def validate(self, prefix: str = 'maml') -> None:
        _positive(self, prefix, 'alpha', 'beta', 'k_inner', 'n_inner_samples',
                  'n_meta_samples', 'validate_every')
        for name in ('epochs', 'adapt_steps'):
            if getattr(self, name) < 0:
                raise ConfigError("must be >= 0", field=f'{prefix}.{name}')
        _choice(self.meta_optimizer, MetaOptimizer, f'{prefix}.meta_optimizer')
        if self.batch is not None and self.batch < 1:
            raise ConfigError("must be >= 1 or null", field=f'{prefix}.batch')


@dataclass(frozen=True)
class CnpSettings:
    embedding_dim: int = 32
    hidden_dim: int = 64
    epochs: int = 2000
    learning_rate: float = 1e-3
    max_context: int = 10
    n_targets: int = 20
    batch_tasks: Optional[int] = None
    seed: int = 0
    validate_every: int = 1

    def validate(self, prefix: str = 'cnp') -> None:
        _positive(self, prefix, 'embedding_dim', 'hidden_dim', 'learning_rate',
                  'max_context', 'n_targets', 'validate_every')
        if self.epochs < 0:
            raise ConfigError("must be >= 0", field=f'{prefix}.epochs')
        if self.batch_tasks is not None and self.batch_tasks < 1:
            raise ConfigError("must be >= 1 or null", field=f'{prefix}.batch_tasks')


@dataclass(frozen=True)
class GpSettings:
    n_restarts: int = 10
    max_iter: int = 200
    jitter: float = 1e-9
    max_jitter: float = 1e-5
    noise_floor: float = 1e-5
    fixed_noise: Optional[float] = None
    seed: int = 0

    def validate(self, prefix: str = 'gp') -> None:
        _positive(self, prefix, 'n_restarts', 'max_iter', 'jitter', 'max_jitter', 'noise_floor')
        if self.max_jitter < self.jitter:
            raise ConfigError("must be >= jitter", field=f'{prefix}.max_jitter')
        if self.fixed_noise is not None and self.fixed_noise <= 0:
            raise ConfigError("must be > 0 or null", field=f'{prefix}.fixed_noise')


@dataclass(frozen=True)
class FeatureSettings:
    log_magnitude: bool = True
    pca_variance: float = 0.999
    pca_max_components: int = 10
    target_range: float = 0.9

    def validate(self, prefix: str = 'features') -> None:
        if not 0 < self.pca_variance <= 1:
            raise ConfigError("must be in (0, 1]", field=f'{prefix}.pca_variance')
        if not 0 < self.target_range < 1:
            raise ConfigError("must be in (0, 1)", field=f'{prefix}.target_range')
        _positive(self, prefix, 'pca_max_components')


@dataclass(frozen=True)
class ExperimentSettings:
    problems: Tuple[int, ...] = (1, 2, 3)
    methods: Tuple[str, ...] = ('maml', 'cnp', 'gp')
    fit_example_points: int = 50

    def validate(self, prefix: str = 'experiment') -> None:
        for p in self.problems:
            _choice(p, Problem, f'{prefix}.problems')
        for m in self.methods:
            _choice(m, Method, f'{prefix}.methods')


@dataclass(frozen=True)
class SimulationSettings:
    problem: int = 1
    n_structures: int = 10

    def validate(self, prefix: str = 'simulate') -> None:
        _choice(self.problem, Problem, f'{prefix}.problem')
        _positive(self, prefix, 'n_structures')


@dataclass(frozen=True)
class LabSettings:
    dynamics: DynamicsSettings = field(default_factory=DynamicsSettings)
    population: PopulationConfig = field(default_factory=PopulationConfig)
    mlp: MlpSettings = field(default_factory=MlpSettings)
    maml: MamlConfig = field(default_factory=MamlConfig)
    cnp: CnpSettings = field(default_factory=CnpSettings)
    gp: GpSettings = field(default_factory=GpSettings)
    features: FeatureSettings = field(default_factory=FeatureSettings)
    experiment: ExperimentSettings = field(default_factory=ExperimentSettings)
    simulate: SimulationSettings = field(default_factory=SimulationSettings)

    @classmethod
    def for_preset(cls, preset: str) -> 'LabSettings':
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset '{preset}', expected one of {sorted(PRESETS)}",
                              field='preset')
        return _build(cls, PRESETS[preset], '')

    def validate(self) -> 'LabSettings':
        self.dynamics.validate()
        self.population.validate(self.dynamics.temperature_range)
        self.mlp.validate()
        self.maml.validate()
        self.cnp.validate()
        self.gp.validate()
        self.features.validate()
        self.experiment.validate()
        self.simulate.validate()
        return self

    def to_dict(self) -> Dict[str, Any]:
        return _plain(asdict(self))

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_yaml().encode('utf-8')).hexdigest()

    def with_seed(self, seed: Optional[int]) -> 'LabSettings':
        """Apply a --seed flag to every seeded component."""
        if seed is None:
            return self
        return replace(
            self,
            population=replace(self.population, seed=seed),
            maml=replace(self.maml, seed=seed),
            cnp=replace(self.cnp, seed=seed),
            gp=replace(self.gp, seed=seed)
        )


# Presets -----------------------------------------------------------------------

PRESETS: Dict[str, Dict[str, Any]] = {
    'paper': {},
    'desk': {
        'population': {'n_repetitions': 5, 'n_test': 50},
        'mlp': {'hidden_sizes': [10, 40, 70, 100], 'n_inits': 1},
        'maml': {'epochs': 500, 'meta_optimizer': 'adam', 'validate_every': 25},
        'cnp': {'epochs': 2000, 'validate_every': 25},
    },
    'testing': {
        'population': {
            'n_repetitions': 2, 'n_test': 4, 'n_train_structures': [2, 3],
            'context_sizes': [1, 3], 'n_train_temperatures': 30, 'n_queries': 20,
            'context_grid_size': 40
        },
        'mlp': {'hidden_sizes': [10], 'hidden_dim': 10, 'n_inits': 1},
        'maml': {'epochs': 5, 'adapt_steps': 5, 'n_inner_samples': 5, 'n_meta_samples': 5},
        'cnp': {'epochs': 5, 'embedding_dim': 8, 'hidden_dim': 16, 'n_targets': 5, 'max_context': 5},
        'gp': {'n_restarts': 2, 'max_iter': 30},
        'simulate': {'n_structures': 3},
    },
}


def load_settings(path=None, preset: str = 'desk', seed: Optional[int] = None) -> LabSettings:
    """Preset defaults overlaid with an optional YAML file, then validated."""
    base = LabSettings.for_preset(preset)
    if path is not None:
        overrides = read_yaml(path)
        merged = _merge(base.to_dict(), overrides, '')
        base = _build(LabSettings, merged, '')
    return base.with_seed(seed).validate()


def read_yaml(path) -> Dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    try:
        data = yaml.safe_load(text) or {}
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark is not None else None
        raise ConfigError(f"YAML parse error: {exc.problem}", line=line) from exc
    if not isinstance(data, dict):
        raise ConfigError("top level of the config file must be a mapping")
    return data


# Helpers -------------------------------------------------------------------------

def _merge(base: Dict[str, Any], overrides: Dict[str, Any], prefix: str) -> Dict[str, Any]:
    out = copy.deepcopy(base)
    for key, value in overrides.items():
        dotted = f"{prefix}{key}"
        if key not in out:
            raise ConfigError("unknown setting", field=dotted)
        if isinstance(out[key], dict):
            if not isinstance(value, dict):
                raise ConfigError("expected a mapping", field=dotted)
            out[key] = _merge(out[key], value, dotted + '.')
        else:
            out[key] = value
    return out


def _build(cls, data: Dict[str, Any], prefix: str):
    kwargs = {}
    known = {f.name: f for f in fields(cls)}
    hints = get_type_hints(cls)
    for key, value in data.items():
        dotted = f"{prefix}{key}"
        if key not in known:
            raise ConfigError("unknown setting", field=dotted)
        default = known[key].default_factory() if callable(known[key].default_factory) else known[key].default
        if is_dataclass(default):
            if not isinstance(value, dict):
                raise ConfigError("expected a mapping", field=dotted)
            kwargs[key] = _build(type(default), value, dotted + '.')
        else:
            kwargs[key] = _coerce(value, default, dotted, hints.get(key))
    return cls(**kwargs)


def _coerce(value, default, dotted, declared=None):
    if default is None:
        if value is None:
            return None
        inner = _optional_type(declared)
        if inner is None:
            return value
        default = inner()
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError("expected a list", field=dotted)
        return tuple(value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError("expected true/false", field=dotted)
        return value
    if isinstance(default, (int, float)) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", field=dotted)
        if isinstance(default, float):
            return float(value)
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"expected an integer, got {value!r}", field=dotted)
        return int(value)
    return value


def _optional_type(declared):
    """T for an Optional[T] annotation, otherwise None."""
    if get_origin(declared) is Union:
        args = [a for a in get_args(declared) if a is not type(None)]
        if len(args) == 1:
            return args[0]
    return None


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _positive(obj, prefix, *names):
    for name in names:
        if getattr(obj, name) <= 0:
            raise ConfigError("must be > 0", field=f'{prefix}.{name}')


def _interval(pair, dotted):
    if len(pair) != 2 or not pair[0] < pair[1]:
        raise ConfigError("expected [low, high] with low < high", field=dotted)


def _choice(value, enum_cls, dotted):
    try:
        enum_cls(value)
    except ValueError:
        allowed = [e.value for e in enum_cls]
        raise ConfigError(f"invalid value {value!r}, expected one of {allowed}", field=dotted)
