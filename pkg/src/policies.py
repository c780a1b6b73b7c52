'''
Ordering policies behind one interface: reset() once per episode, then
decide(observation, downstream_order) every round.

Heuristic policies order up to a desired inventory level:

    O = min(max(0, I_hat - I - B_up - sum(arriving deliveries)), c)

with I_hat either a fraction of the stage capacity (base-stock family) or
derived from recent sales and the lead time (tracking-demand family).
'''

import json
import math
from dataclasses import dataclass

import numpy as np

from configs import Configs
from src.exceptions import InputError, UnknownPresetError


########################### desired inventory ###############################

@dataclass(frozen=True)
class CapacityFraction:
    kappa: float

    def desired(self, obs):
        return self.kappa * obs.params.capacity


'''
I_hat = scale * s_ref * (L_m + lead_offset) [+ B_{m,t-1}]

s_ref is the last sale ('last') or the mean of the L_max most recent sales
('mean'). The mean divides by L_max even early in the episode, when the
history is still zero padded.
'''
@dataclass(frozen=True)
class SalesBased:
    sales_ref: str = 'mean'
    lead_offset: int = 0
    scale: float = 1.0
    plus_backlog: bool = True

    def __post_init__(self):
        assert self.sales_ref in ('last', 'mean'), \
                'sales reference {} not implemented'.format(self.sales_ref)
        assert self.lead_offset in (0, 1), \
                'lead offset must be 0 or 1, got {}'.format(self.lead_offset)

    def desired(self, obs):
        sales = obs.recent_sales
        if self.sales_ref == 'last':
            ref = sales[-1] if len(sales) else 0
        else:
            ref = float(np.mean(sales)) if len(sales) else 0.
        target = self.scale * ref * (obs.params.lead_time + self.lead_offset)
        if self.plus_backlog:
            target += obs.backlog
        return target


def desiredInventory(rule, obs):
    return rule.desired(obs)


def heuristicOrder(rule, obs):
    # floor after rounding away float artefacts such as 0.9 * 20
    desired = math.floor(round(desiredInventory(rule, obs), 9))
    raw = desired - obs.inventory - obs.upstream_backlog \
            - sum(obs.arriving_deliveries)
    return int(min(max(0, raw), obs.params.capacity))


########################### policies ########################################

class Policy(object):
    name = 'policy'

    def reset(self, stage_index, config=None, rng=None):
        self.stage_index = stage_index
        self.config = config
        self.rng = rng

    def decide(self, obs, downstream_order=None):
        raise NotImplementedError


'''
Downstream orders are accepted but ignored by the heuristics
'''
class HeuristicPolicy(Policy):
    def __init__(self, rule, name=None):
        self.rule = rule
        self.name = name if name else repr(rule)

    def decide(self, obs, downstream_order=None):
        return heuristicOrder(self.rule, obs)


class ConstantPolicy(Policy):
    def __init__(self, value):
        assert int(value) >= 0, 'constant order must be >= 0'
        self.value = int(value)
        self.name = 'constant-{}'.format(self.value)

    def decide(self, obs, downstream_order=None):
        return self.value


'''
Uniform admissible order in [0, high] (high defaults to the stage capacity),
drawn from the stage's own RNG stream
'''
class RandomPolicy(Policy):
    def __init__(self, high=None):
        self.high = high
        self.name = 'random'

    def decide(self, obs, downstream_order=None):
        assert self.rng is not None, 'RandomPolicy used before reset()'
        high = obs.params.capacity if self.high is None else self.high
        return int(self.rng.integers(0, high + 1))


'''
Replays a recorded order vector per period (orders[t-1][stage])
'''
class ScriptedPolicy(Policy):
    def __init__(self, orders):
        self.orders = [list(row) for row in orders]
        self.name = 'scripted'

    def decide(self, obs, downstream_order=None):
        t = obs.period
        if t < 1 or t > len(self.orders):
            raise InputError('scripted orders cover periods 1..{}, asked for '
                    'period {}'.format(len(self.orders), t))
        return int(self.orders[t - 1][self.stage_index])


def readScriptedOrders(path):
    Configs.log('Reading scripted orders from {}'.format(path))
    with open(path, 'r') as f:
        payload = json.load(f)
    # either a bare list of order vectors or an episode record
    if isinstance(payload, dict):
        payload = payload['orders']
    return [[int(x) for x in row] for row in payload]


########################### presets #########################################

# base-stock fractions of capacity, then the tracking-demand variants
PRESETS = {
        'base-stock-0.8': CapacityFraction(0.8),
        'base-stock-0.9': CapacityFraction(0.9),
        'base-stock': CapacityFraction(1.0),
        'tracking-last': SalesBased('last', 0, 1.0, True),
        'tracking-last-plus1': SalesBased('last', 1, 1.0, True),
        'tracking-demand': SalesBased('mean', 0, 1.0, True),
        'tracking-mean-plus1': SalesBased('mean', 1, 1.0, True),
        'tracking-mean-1.2': SalesBased('mean', 0, 1.2, True),
        }
PRESET_NAMES = tuple(PRESETS.keys())

PRESET_LABELS = {
        'base-stock-0.8': '0.8 c_m',
        'base-stock-0.9': '0.9 c_m',
        'base-stock': 'c_m',
        'tracking-last': 'S L_m + B',
        'tracking-last-plus1': 'S (L_m + 1) + B',
        'tracking-demand': 'mean(S) L_m + B',
        'tracking-mean-plus1': 'mean(S) (L_m + 1) + B',
        'tracking-mean-1.2': '1.2 mean(S) L_m + B',
        }


def presetRule(name):
    if name not in PRESETS:
        raise UnknownPresetError('unknown policy preset: {} (choose from '
                '{})'.format(name, ', '.join(PRESET_NAMES)))
    return PRESETS[name]


def makePresetPolicy(name):
    return HeuristicPolicy(presetRule(name), name)
