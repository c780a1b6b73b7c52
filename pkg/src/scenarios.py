'''
The five built-in supply chain scenarios and the scenario file format.

Scenario files are INI files: a [scenario] section (name, num_periods,
demand and its parameters) and a [stages] section holding one
comma-separated array per stage parameter, like the rows of the scenario
parameter table.

    [scenario]
    name = seasonal
    num_periods = 12
    demand = piecewise
    segments = 1-4:0-4; 5-12:5-8

    [stages]
    capacities = 20, 20, 20, 20
    sale_prices = 5, 5, 5, 5
    order_costs = 5, 5, 5, 5
    backlog_costs = 1, 1, 1, 1
    holding_costs = 1, 1, 1, 1
    lead_times = 2, 2, 2, 2
    init_inventories = 12, 12, 12, 12
'''

import os
try:
    import configparser
except ImportError:
    import ConfigParser as configparser

from configs import Configs
from src.environment import StageParams, ScenarioConfig, ConstantDemand, \
        UniformDemand, PiecewiseDemand, NormalDemand
from src.exceptions import ConfigurationError, UnknownPresetError

# [scenario file key, StageParams field, type]
_STAGE_ROWS = [
        ('capacities', 'capacity', int),
        ('sale_prices', 'sale_price', float),
        ('order_costs', 'order_cost', float),
        ('backlog_costs', 'backlog_cost', float),
        ('holding_costs', 'holding_cost', float),
        ('lead_times', 'lead_time', int),
        ('init_inventories', 'init_inventory', int),
        ]

# parameter table columns
_PRESETS = {
        'constant': dict(demand=ConstantDemand(4),
            capacities=[20, 20, 20, 20], sale_prices=[0, 0, 0, 0],
            order_costs=[0, 0, 0, 0], lead_times=[2, 2, 2, 2],
            init_inventories=[12, 12, 12, 12]),
        'variable': dict(demand=UniformDemand(0, 4),
            capacities=[20, 20, 20, 20], sale_prices=[0, 0, 0, 0],
            order_costs=[0, 0, 0, 0], lead_times=[2, 2, 2, 2],
            init_inventories=[12, 12, 12, 12]),
        'larger': dict(demand=UniformDemand(0, 8),
            capacities=[20, 20, 20, 20], sale_prices=[5, 5, 5, 5],
            order_costs=[5, 5, 5, 5], lead_times=[2, 2, 2, 2],
            init_inventories=[12, 12, 12, 12]),
        'seasonal': dict(demand=PiecewiseDemand((
                (1, 4, UniformDemand(0, 4)), (5, 12, UniformDemand(5, 8)))),
            capacities=[20, 20, 20, 20], sale_prices=[5, 5, 5, 5],
            order_costs=[5, 5, 5, 5], lead_times=[2, 2, 2, 2],
            init_inventories=[12, 12, 12, 12]),
        'normal': dict(demand=NormalDemand(4, 2),
            capacities=[20, 22, 24, 26], sale_prices=[9, 8, 7, 6],
            order_costs=[8, 7, 6, 5], lead_times=[1, 2, 3, 4],
            init_inventories=[12, 14, 16, 18]),
        }

SCENARIO_NAMES = ('constant', 'variable', 'larger', 'seasonal', 'normal')


def presetScenario(name):
    if name not in _PRESETS:
        raise UnknownPresetError('unknown scenario: {} (choose from {})'.format(
            name, ', '.join(SCENARIO_NAMES)))
    preset = _PRESETS[name]
    num_stages = len(preset['capacities'])
    stages = [StageParams(
                capacity=preset['capacities'][m],
                sale_price=preset['sale_prices'][m],
                order_cost=preset['order_costs'][m],
                backlog_cost=1, holding_cost=1,
                lead_time=preset['lead_times'][m],
                init_inventory=preset['init_inventories'][m])
            for m in range(num_stages)]
    return ScenarioConfig(name=name, num_periods=12, stages=stages,
            demand=preset['demand'])


'''
Resolve a --scenario value: a preset name or a path to a scenario file
'''
def loadScenario(name_or_path):
    if name_or_path in _PRESETS:
        return presetScenario(name_or_path)
    if os.path.isfile(name_or_path):
        return readScenario(name_or_path)
    raise UnknownPresetError(
            'unknown scenario: {} (not a preset and no such file)'.format(
                name_or_path))


def _parseArray(raw, cast, key):
    try:
        return [cast(x.strip()) for x in raw.split(',') if x.strip() != '']
    except ValueError:
        raise ConfigurationError('cannot parse [stages] {} = {}'.format(key, raw))


def _parseDemand(section):
    kind = section.get('demand', '').strip().lower()
    try:
        if kind == 'constant':
            return ConstantDemand(int(section['value']))
        elif kind == 'uniform':
            return UniformDemand(int(section['lo']), int(section['hi']))
        elif kind == 'piecewise':
            segments = []
            for item in section['segments'].split(';'):
                if not item.strip():
                    continue
                periods, bounds = item.split(':')
                first, last = (int(x) for x in periods.split('-'))
                lo, hi = (int(x) for x in bounds.split('-'))
                segments.append((first, last, UniformDemand(lo, hi)))
            return PiecewiseDemand(tuple(segments))
        elif kind == 'normal':
            return NormalDemand(float(section['mean']), float(section['stddev']))
    except (KeyError, ValueError) as e:
        raise ConfigurationError('malformed {} demand: {}'.format(kind, e))
    raise ConfigurationError('unknown demand type: {!r}'.format(kind))


def readScenario(path):
    Configs.log('Reading scenario file {}'.format(path))
    cparser = configparser.ConfigParser()
    try:
        with open(path, 'r') as f:
            cparser.read_file(f)
    except configparser.Error as e:
        raise ConfigurationError('cannot parse scenario file {}: {}'.format(
            path, e))
    for section in ['scenario', 'stages']:
        if not cparser.has_section(section):
            raise ConfigurationError('scenario file {} has no [{}] section'.format(
                path, section))

    scen = cparser['scenario']
    rows = {}
    for key, attr, cast in _STAGE_ROWS:
        if key not in cparser['stages']:
            raise ConfigurationError('scenario file {} misses [stages] {}'.format(
                path, key))
        rows[attr] = _parseArray(cparser['stages'][key], cast, key)
    lengths = set(len(v) for v in rows.values())
    if len(lengths) != 1:
        raise ConfigurationError('stage arrays in {} have different lengths: '
                '{}'.format(path, sorted(lengths)))

    num_stages = lengths.pop()
    stages = [StageParams(**{attr: rows[attr][m] for attr in rows})
            for m in range(num_stages)]
    try:
        num_periods = int(scen.get('num_periods', '12'))
    except ValueError:
        raise ConfigurationError('num_periods must be an integer')
    name = scen.get('name', os.path.splitext(os.path.basename(path))[0])
    return ScenarioConfig(name=name, num_periods=num_periods, stages=stages,
            demand=_parseDemand(scen))


def _fmt(x):
    return str(int(x)) if float(x).is_integer() else str(x)


def scenarioToSections(config):
    demand = config.demand
    scen = {'name': config.name, 'num_periods': str(config.num_periods)}
    if isinstance(demand, ConstantDemand):
        scen.update(demand='constant', value=str(demand.value))
    elif isinstance(demand, UniformDemand):
        scen.update(demand='uniform', lo=str(demand.lo), hi=str(demand.hi))
    elif isinstance(demand, PiecewiseDemand):
        scen.update(demand='piecewise', segments='; '.join(
            '{}-{}:{}-{}'.format(first, last, d.lo, d.hi)
            for first, last, d in demand.segments))
    elif isinstance(demand, NormalDemand):
        scen.update(demand='normal', mean=_fmt(demand.mean),
                stddev=_fmt(demand.stddev))
    stages = {key: ', '.join(_fmt(getattr(s, attr)) for s in config.stages)
            for key, attr, _ in _STAGE_ROWS}
    return {'scenario': scen, 'stages': stages}


def writeScenario(config, path):
    cparser = configparser.ConfigParser()
    for section, values in scenarioToSections(config).items():
        cparser[section] = values
    with open(path, 'w') as f:
        cparser.write(f)
    Configs.log('Scenario {} written to {}'.format(config.name, path))
    return path


'''
Human-readable scenario column, one parameter per line
'''
def describeScenario(config):
    sections = scenarioToSections(config)
    lines = ['Scenario: {}'.format(config.name),
            'Number of Stages: {}'.format(config.num_stages),
            'Number of Periods: {}'.format(config.num_periods),
            'Demand: {}'.format(config.demand.describe(config.num_periods))]
    for key, _, _ in _STAGE_ROWS:
        lines.append('{}: [{}]'.format(key.replace('_', ' ').capitalize(),
            sections['stages'][key]))
    return '\n'.join(lines)
