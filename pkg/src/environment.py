'''
Multi-period, multi-echelon production-inventory dynamics for a single
non-perishable product.

Stages are numbered 0..M-1 with stage 0 the retailer and stage M-1 the
manufacturer (unlimited raw material). Periods run 1..T, t = 0 being the
initial condition. Each period: deliveries placed L_m periods ago arrive,
orders are filled subject to upstream backlog + request, upstream capacity
and upstream available inventory, the retailer serves customer demand, the
rest is backlogged, then profits are booked.
'''

import math
from copy import deepcopy
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from configs import Configs
from helpers.math_utils import makeStream
from src.exceptions import ConfigurationError, InputError, LifecycleError


@dataclass(frozen=True)
class StageParams:
    capacity: int
    sale_price: float
    order_cost: float
    backlog_cost: float
    holding_cost: float
    lead_time: int
    init_inventory: int

    def validate(self, index=0):
        if int(self.capacity) != self.capacity or self.capacity < 0:
            raise ConfigurationError(
                    'stage {}: capacity must be a non-negative integer, '
                    'got {}'.format(index, self.capacity))
        if int(self.lead_time) != self.lead_time or self.lead_time < 1:
            raise ConfigurationError(
                    'stage {}: lead time must be an integer >= 1, '
                    'got {}'.format(index, self.lead_time))
        if int(self.init_inventory) != self.init_inventory \
                or self.init_inventory < 0:
            raise ConfigurationError(
                    'stage {}: initial inventory must be a non-negative '
                    'integer, got {}'.format(index, self.init_inventory))
        for name in ['sale_price', 'order_cost', 'backlog_cost',
                'holding_cost']:
            if getattr(self, name) < 0:
                raise ConfigurationError('stage {}: {} cannot be negative'.format(
                    index, name))


########################### demand models ###################################

@dataclass(frozen=True)
class ConstantDemand:
    value: int

    def sample(self, period, rng):
        return int(self.value)

    def describe(self, num_periods):
        return 'a constant {} units for all {} rounds'.format(
                self.value, num_periods)

    def validate(self, num_periods):
        if int(self.value) != self.value or self.value < 0:
            raise ConfigurationError(
                    'constant demand must be a non-negative integer')


'''
Discrete uniform demand, inclusive on both ends
'''
@dataclass(frozen=True)
class UniformDemand:
    lo: int
    hi: int

    def sample(self, period, rng):
        return int(rng.integers(self.lo, self.hi + 1))

    def describe(self, num_periods, span=None):
        span = 'for all {} rounds'.format(num_periods) if span is None else span
        return 'a discrete uniform distribution U{{{}, {}}} {}'.format(
                self.lo, self.hi, span)

    def validate(self, num_periods):
        if self.lo < 0 or self.hi < self.lo:
            raise ConfigurationError(
                    'uniform demand needs 0 <= lo <= hi, got [{}, {}]'.format(
                        self.lo, self.hi))


'''
Uniform demand whose bounds change by period. Segments are
(first_period, last_period, UniformDemand) and must tile 1..T.
'''
@dataclass(frozen=True)
class PiecewiseDemand:
    segments: Tuple[Tuple[int, int, UniformDemand], ...]

    def segment_for(self, period):
        for first, last, dist in self.segments:
            if first <= period <= last:
                return dist
        raise ConfigurationError(
                'period {} is not covered by the piecewise demand'.format(period))

    def sample(self, period, rng):
        return self.segment_for(period).sample(period, rng)

    def describe(self, num_periods):
        parts = []
        n = len(self.segments)
        for i, (first, last, dist) in enumerate(self.segments):
            length = last - first + 1
            if i == 0:
                span = 'for the first {} rounds'.format(length)
            elif i == n - 1:
                span = 'for the last {} rounds'.format(length)
            else:
                span = 'for rounds {} to {}'.format(first, last)
            parts.append(dist.describe(num_periods, span))
        if n == 1:
            return self.segments[0][2].describe(num_periods)
        return ', '.join(parts[:-1]) + ', and ' + parts[-1]

    def validate(self, num_periods):
        if len(self.segments) == 0:
            raise ConfigurationError('piecewise demand has no segments')
        expected = 1
        for first, last, dist in self.segments:
            if first != expected or last < first:
                raise ConfigurationError(
                        'piecewise segments must be contiguous from period 1, '
                        'found segment [{}, {}] where period {} was '
                        'expected'.format(first, last, expected))
            dist.validate(num_periods)
            expected = last + 1
        if expected != num_periods + 1:
            raise ConfigurationError(
                    'piecewise segments cover periods 1..{} but the horizon '
                    'is {}'.format(expected - 1, num_periods))


'''
Normal demand, negative draws clamped to 0, rounded half-up to an integer
'''
@dataclass(frozen=True)
class NormalDemand:
    mean: float
    stddev: float

    def sample(self, period, rng):
        x = max(float(rng.normal(self.mean, self.stddev)), 0.)
        return int(math.floor(x + 0.5))

    def describe(self, num_periods):
        return 'a normal distribution N({}, {}^2), truncated at 0, ' \
                'for all {} rounds'.format(_num(self.mean), _num(self.stddev),
                        num_periods)

    def validate(self, num_periods):
        if self.stddev < 0:
            raise ConfigurationError('normal demand stddev cannot be negative')


def _num(x):
    return int(x) if float(x).is_integer() else x


def sampleDemand(model, period, rng):
    return model.sample(period, rng)


########################### scenario & state ################################

@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    num_periods: int
    stages: Tuple[StageParams, ...]
    demand: object

    def __post_init__(self):
        object.__setattr__(self, 'stages', tuple(self.stages))
        self.validate()

    def validate(self):
        if len(self.stages) < 2:
            raise ConfigurationError(
                    'a supply chain needs at least 2 stages, got {}'.format(
                        len(self.stages)))
        if int(self.num_periods) != self.num_periods or self.num_periods < 1:
            raise ConfigurationError('number of periods must be >= 1')
        for i, stage in enumerate(self.stages):
            stage.validate(i)
        if self.demand is None:
            raise ConfigurationError('scenario has no demand model')
        self.demand.validate(self.num_periods)

    @property
    def num_stages(self):
        return len(self.stages)

    @property
    def max_lead_time(self):
        return max(s.lead_time for s in self.stages)

    def column(self, name, dtype=float):
        return np.array([getattr(s, name) for s in self.stages], dtype=dtype)


'''
State at a period boundary (start of round `period`).

pipeline[m] has length L_m and is stored oldest first:
pipeline[m][0] = R_{m,t-L_m} (arrives this round), pipeline[m][-1] = R_{m,t-1}.
sales_history[m] holds the last L_max sales, oldest first.
'''
@dataclass(eq=False)
class EnvState:
    config: ScenarioConfig
    period: int
    inventory: np.ndarray
    backlog: np.ndarray
    sales_history: np.ndarray
    pipeline: List[np.ndarray]
    cumulative_profit: float = 0.
    demand_rng: Optional[np.random.Generator] = field(default=None,
            repr=False, compare=False)

    def copy(self):
        rng = None if self.demand_rng is None else deepcopy(self.demand_rng)
        return replace(self, demand_rng=rng,
                inventory=self.inventory.copy(),
                backlog=self.backlog.copy(),
                sales_history=self.sales_history.copy(),
                pipeline=[p.copy() for p in self.pipeline])


@dataclass(frozen=True)
class Observation:
    stage_index: int
    params: StageParams
    period: int
    inventory: int
    backlog: int
    upstream_backlog: int
    recent_sales: Tuple[int, ...]
    arriving_deliveries: Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class StepResult:
    period: int
    demand: int
    orders: np.ndarray
    fulfilled: np.ndarray
    sales: np.ndarray
    inventory: np.ndarray
    backlog: np.ndarray
    profit: np.ndarray

    @property
    def total_reward_delta(self):
        return float(self.profit.sum())


########################### operations ######################################

def reset(config, seed):
    if not isinstance(config, ScenarioConfig):
        raise ConfigurationError('expected a ScenarioConfig, got {}'.format(
            type(config).__name__))
    config.validate()
    M, L_max = config.num_stages, config.max_lead_time
    return EnvState(
            config=config,
            period=1,
            inventory=config.column('init_inventory', np.int64),
            backlog=np.zeros(M, dtype=np.int64),
            sales_history=np.zeros((M, L_max), dtype=np.int64),
            pipeline=[np.zeros(s.lead_time, dtype=np.int64)
                for s in config.stages],
            cumulative_profit=0.,
            demand_rng=makeStream(seed, 'demand'))


def observe(state, stage):
    M = state.config.num_stages
    if not 0 <= stage < M:
        raise InputError('stage {} outside 0..{}'.format(stage, M - 1))
    upstream = int(state.backlog[stage + 1]) if stage < M - 1 else 0
    return Observation(
            stage_index=stage,
            params=state.config.stages[stage],
            period=state.period,
            inventory=int(state.inventory[stage]),
            backlog=int(state.backlog[stage]),
            upstream_backlog=upstream,
            recent_sales=tuple(int(x) for x in state.sales_history[stage]),
            arriving_deliveries=tuple(int(x) for x in state.pipeline[stage]))


def observeAll(state):
    return [observe(state, m) for m in range(state.config.num_stages)]


# largest accepted order, keeps backlog + order far from int64 overflow
MAX_ORDER = 10 ** 9


def _checkOrders(orders, M):
    raw = list(orders)
    if len(raw) != M:
        raise InputError('expected {} orders, got {}'.format(M, len(raw)))
    for m, o in enumerate(raw):
        try:
            integral = not isinstance(o, (bool, np.bool_)) and int(o) == o
        except (OverflowError, ValueError, TypeError):
            integral = False
        if not integral:
            raise InputError('order at stage {} is not an integer: {}'.format(
                m, o))
        if o < 0:
            raise InputError('negative order {} at stage {}'.format(o, m))
        if o > MAX_ORDER:
            raise InputError('order {} at stage {} exceeds the maximum of '
                    '{}'.format(o, m, MAX_ORDER))
    return np.array([int(o) for o in raw], dtype=np.int64)


'''
Advance one period. Returns a new state (the input state is not modified)
and the per-stage outcome of the period.
'''
def step(state, orders, rng=None):
    config = state.config
    T, M = config.num_periods, config.num_stages
    if state.period > T:
        raise LifecycleError('episode already finished after period {}'.format(T))
    orders = _checkOrders(orders, M)
    new_state = state.copy()
    rng = new_state.demand_rng if rng is None else rng
    t = state.period

    capacity = config.column('capacity', np.int64)
    demand = sampleDemand(config.demand, t, rng)

    # R_{m,t-L_m} arrive at the start of the period
    arriving = np.array([p[0] for p in state.pipeline], dtype=np.int64)
    available = state.inventory + arriving

    fulfilled = np.zeros(M, dtype=np.int64)
    fulfilled[:-1] = np.minimum.reduce([state.backlog[1:] + orders[:-1],
        capacity[1:], available[1:]])
    # raw material is unlimited at the top stage
    fulfilled[-1] = orders[-1]

    sales = np.zeros(M, dtype=np.int64)
    sales[0] = min(state.backlog[0] + demand, capacity[0], available[0])
    sales[1:] = fulfilled[:-1]

    inventory = available - sales
    backlog = np.zeros(M, dtype=np.int64)
    backlog[0] = state.backlog[0] + demand - sales[0]
    backlog[1:] = state.backlog[1:] + orders[:-1] - sales[1:]

    # order cost is charged on fulfilled, not requested, orders
    profit = config.column('sale_price') * sales \
            - config.column('order_cost') * fulfilled \
            - config.column('backlog_cost') * backlog \
            - config.column('holding_cost') * inventory

    assert np.all(inventory >= 0), \
            'negative inventory {} at period {}'.format(inventory, t)
    assert np.all(backlog >= 0), \
            'negative backlog {} at period {}'.format(backlog, t)

    new_state.period = t + 1
    new_state.inventory = inventory
    new_state.backlog = backlog
    new_state.sales_history = np.concatenate(
            [state.sales_history[:, 1:], sales[:, None]], axis=1)
    new_state.pipeline = [np.append(p[1:], fulfilled[m])
            for m, p in enumerate(state.pipeline)]
    new_state.cumulative_profit = state.cumulative_profit + float(profit.sum())

    result = StepResult(period=t, demand=int(demand), orders=orders,
            fulfilled=fulfilled, sales=sales, inventory=inventory,
            backlog=backlog, profit=profit)
    Configs.debug('[step] t={} D={} O={} R={} S={} I={} B={} P={}'.format(
        t, demand, orders.tolist(), fulfilled.tolist(), sales.tolist(),
        inventory.tolist(), backlog.tolist(), profit.tolist()))
    return new_state, result


'''
Total reward of a finished episode: sum over periods and stages of profit
'''
def episodeReward(record):
    profits = np.asarray(record.profit, dtype=float)
    if profits.ndim != 2 or profits.shape[0] != record.num_periods:
        raise InputError('record covers {} of {} periods'.format(
            0 if profits.ndim != 2 else profits.shape[0], record.num_periods))
    return float(profits.sum())


'''
Post-hoc invariant check of a recorded trajectory. Returns a list of
human-readable violations (empty when the trajectory is consistent).
'''
def verifyTrajectory(config, record):
    violations = []
    M, L = config.num_stages, config.column('lead_time', np.int64)
    capacity = config.column('capacity', np.int64)
    init_inv = config.column('init_inventory', np.int64)
    O = np.asarray(record.orders, dtype=np.int64)
    R = np.asarray(record.fulfilled, dtype=np.int64)
    S = np.asarray(record.sales, dtype=np.int64)
    I = np.asarray(record.inventory, dtype=np.int64)
    B = np.asarray(record.backlog, dtype=np.int64)
    D = np.asarray(record.demand, dtype=np.int64)
    n = len(D)
    if n == 0:
        return violations

    if np.any(I < 0):
        violations.append('negative inventory')
    if np.any(B < 0):
        violations.append('negative backlog')
    if np.any(S[:, 0] > capacity[0]):
        violations.append('retailer sales exceed capacity')
    if np.any(R[:, :-1] > capacity[1:]):
        violations.append('fulfilled order exceeds upstream capacity')

    prev_B = np.vstack([np.zeros((1, M), dtype=np.int64), B[:-1]])
    if np.any(R[:, :-1] > prev_B[:, 1:] + O[:, :-1]):
        violations.append('fulfilled order exceeds upstream backlog + request')
    if np.any(B[:, 0] - prev_B[:, 0] != D - S[:, 0]):
        violations.append('retailer backlog recursion broken')
    if np.any(B[:, 1:] - prev_B[:, 1:] != O[:, :-1] - S[:, 1:]):
        violations.append('upstream backlog recursion broken')

    # telescoped inventory balance
    for m in range(M):
        arrived = 0
        for t in range(1, n + 1):
            src = t - L[m]
            if src >= 1:
                arrived += R[src - 1, m]
            if I[t - 1, m] - init_inv[m] != arrived - S[:t, m].sum():
                violations.append('flow conservation broken at stage {} '
                        'period {}'.format(m, t))
                break
    return violations
