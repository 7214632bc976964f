"""
    Run configuration: defaults, an optional YAML file with the same keys
    as the long command-line flags, and the flags themselves on top.
"""
from .errors import InputError
from .estimator import ModelSpec, OptimizerSettings, REGRESSOR_SETS
from .imputation import WEIGHTINGS
from .simulate import SimulationConfig

from dataclasses import dataclass, field, fields
import logging
import os

import yaml

logger = logging.getLogger(__name__)

# short names accepted by --regressors
REGRESSOR_FLAGS = {
    'hofstede': 'hofstede_only',
    'level': 'level_only',
    'level_diversity': 'level_and_diversity',
}
INPUT_NAMES = ('registry', 'hofstede', 'migrants', 'population', 'wgi')


def regressor_set_for(value):
    if value in REGRESSOR_SETS:
        return value
    if value in REGRESSOR_FLAGS:
        return REGRESSOR_FLAGS[value]
    raise InputError('unknown regressor set {!r}, expected one of {}'.format(
        value, ', '.join(list(REGRESSOR_FLAGS) + list(REGRESSOR_SETS))))


@dataclass(frozen=True)
class RunConfig:
    registry: str = None
    hofstede: str = None
    migrants: str = None
    population: str = None
    wgi: str = None
    out: str = '.'
    regressor_set: str = 'level_and_diversity'
    error_structure: str = 'all'
    k_neighbors: int = 5
    imputation_weighting: str = 'mean'
    years: tuple = None
    compare: bool = False
    seed: int = 0
    recover: bool = False
    replications: int = 20
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)

    def __post_init__(self):
        object.__setattr__(self, 'regressor_set', regressor_set_for(self.regressor_set))
        if not isinstance(self.k_neighbors, int) or self.k_neighbors < 1:
            raise InputError('k_neighbors must be a positive integer, got {!r}'.format(self.k_neighbors))
        if self.imputation_weighting not in WEIGHTINGS:
            raise InputError('imputation weighting must be one of {}'.format(WEIGHTINGS))
        if not isinstance(self.replications, int) or self.replications < 1:
            raise InputError('replications must be a positive integer, got {!r}'.format(self.replications))
        if self.years is not None:
            object.__setattr__(self, 'years', tuple(int(y) for y in self.years))
        # validates the pair
        self.model_spec()

    def model_spec(self):
        return ModelSpec(regressor_set=self.regressor_set, error_structure=self.error_structure)

    def input_paths(self):
        return {name: getattr(self, name) for name in INPUT_NAMES}

    def check_inputs(self):
        """every input path given and present, output directory creatable"""
        for name, path in self.input_paths().items():
            if not path:
                raise InputError('missing --{} input file'.format(name))
            if not os.path.isfile(path):
                raise InputError('{} file not found: {}'.format(name, path))
        self.make_output_dir()

    def make_output_dir(self):
        try:
            os.makedirs(self.out, exist_ok=True)
        except OSError as exc:
            raise InputError('cannot create output directory {}: {}'.format(self.out, exc))
        return self.out


def load_yaml(path):
    if not os.path.isfile(path):
        raise InputError('config file not found: {}'.format(path))
    try:
        with open(path) as f:
            values = yaml.safe_load(f)
    except yaml.YAMLError as exc:
        raise InputError('config file {} could not be parsed: {}'.format(path, exc))
    if values is None:
        return {}
    if not isinstance(values, dict):
        raise InputError('config file {} must hold a mapping at the top level'.format(path))
    return values


def _build(cls, values, what):
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise InputError('unknown {} keys: {}'.format(what, ', '.join(unknown)))
    try:
        return cls(**values)
    except TypeError as exc:
        raise InputError('invalid {} settings: {}'.format(what, exc))


def _as_tuple(value):
    # yaml lists become tuples so the frozen configs stay hashable
    if isinstance(value, list):
        return tuple(_as_tuple(v) for v in value)
    return value


def build_run_config(file_values=None, overrides=None):
    """
        file_values: mapping read from the YAML file
        overrides: flag values, None entries leave the file/default value
    """
    values = dict(file_values or {})
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    if 'regressors' in values:
        values['regressor_set'] = values.pop('regressors')

    optimizer = values.pop('optimizer', None) or {}
    simulation = values.pop('simulation', None) or {}
    for name, section in (('optimizer', optimizer), ('simulation', simulation)):
        if not isinstance(section, dict):
            raise InputError('{} settings must be a mapping'.format(name))
    simulation = {k: _as_tuple(v) for k, v in simulation.items()}

    sim_overrides = {k: overrides.pop(k) for k in ('true_lambda', 'true_phi') if k in overrides}
    values.update(overrides)
    if 'seed' in values:
        simulation.setdefault('seed', values['seed'])
        if 'seed' in overrides:
            simulation['seed'] = overrides['seed']
    simulation.update(sim_overrides)

    values['optimizer'] = _build(OptimizerSettings, optimizer, 'optimizer')
    values['simulation'] = _build(SimulationConfig, simulation, 'simulation')
    config = _build(RunConfig, values, 'config')
    logger.debug('Run configuration: %s', config)
    return config
