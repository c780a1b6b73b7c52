import json

import numpy as np
import pytest

from src.environment import Observation, StageParams
from src.exceptions import InputError, UnknownPresetError
from src.harness import PolicySpec, runEpisode
from src.policies import CapacityFraction, SalesBased, heuristicOrder, \
        desiredInventory, HeuristicPolicy, ConstantPolicy, RandomPolicy, \
        ScriptedPolicy, readScriptedOrders, makePresetPolicy, presetRule, \
        PRESET_NAMES

# constant scenario, one episode per preset
PRESET_REWARDS = [
        ('base-stock-0.8', -208.),
        ('base-stock-0.9', -252.),
        ('base-stock', -296.),
        ('tracking-last', -364.),
        ('tracking-last-plus1', -120.),
        ('tracking-demand', -360.),
        ('tracking-mean-plus1', -252.),
        ('tracking-mean-1.2', -361.),
        ]


def _obs(inventory=12, backlog=0, upstream_backlog=0, sales=(0, 0),
        arriving=(0, 0), capacity=20, lead_time=2, stage=0, period=1):
    params = StageParams(capacity, 0, 0, 1, 1, lead_time, 12)
    return Observation(stage, params, period, inventory, backlog,
            upstream_backlog, tuple(sales), tuple(arriving))


def test_preset_order():
    assert PRESET_NAMES == tuple(name for name, _ in PRESET_REWARDS)


@pytest.mark.parametrize('name,reward', PRESET_REWARDS)
def test_preset_rewards_on_constant_demand(constant, name, reward):
    record = runEpisode(constant, PolicySpec.preset(name).build(constant), 0)
    assert record.valid
    assert record.episode_reward == reward


def test_base_stock_orders():
    assert heuristicOrder(CapacityFraction(1.0), _obs()) == 8
    assert heuristicOrder(CapacityFraction(0.9), _obs()) == 6
    assert heuristicOrder(CapacityFraction(0.8), _obs()) == 4
    # inventory position counts upstream backlog and the pipeline
    assert heuristicOrder(CapacityFraction(1.0),
            _obs(upstream_backlog=3, arriving=(2, 1))) == 2


@pytest.mark.parametrize('name', PRESET_NAMES)
def test_orders_do_not_grow_with_inventory(name):
    rule = presetRule(name)
    for sales in [(0, 0), (4, 4), (2, 7)]:
        orders = [heuristicOrder(rule, _obs(inventory=i, sales=sales,
            backlog=3, arriving=(1, 2))) for i in range(0, 41)]
        assert all(a >= b for a, b in zip(orders, orders[1:]))


def test_orders_are_clamped():
    assert heuristicOrder(CapacityFraction(1.0), _obs(inventory=25)) == 0
    assert heuristicOrder(CapacityFraction(1.0),
            _obs(inventory=0, capacity=5)) == 5


def test_tracking_desired_inventory():
    obs = _obs(sales=(0, 4), backlog=3)
    # mean of the zero padded history times the lead time, plus backlog
    assert desiredInventory(SalesBased('mean', 0, 1.0, True), obs) == 7.
    assert desiredInventory(SalesBased('last', 0, 1.0, True), obs) == 11.
    assert desiredInventory(SalesBased('last', 1, 1.0, False), obs) == 12.
    assert desiredInventory(SalesBased('mean', 0, 1.2, False), obs) == \
            pytest.approx(4.8)
    assert heuristicOrder(SalesBased('mean', 0, 1.2, False),
            _obs(inventory=0, sales=(0, 4))) == 4


def test_sales_based_validation():
    with pytest.raises(AssertionError):
        SalesBased('median')
    with pytest.raises(AssertionError):
        SalesBased('mean', lead_offset=2)


def test_unknown_preset():
    with pytest.raises(UnknownPresetError):
        presetRule('base-stock-2')
    with pytest.raises(UnknownPresetError):
        makePresetPolicy('tracking')


def test_heuristic_ignores_downstream_order():
    policy = HeuristicPolicy(CapacityFraction(1.0), 'base-stock')
    policy.reset(0)
    assert policy.decide(_obs(), downstream_order=17) == 8


def test_constant_policy():
    policy = ConstantPolicy(3)
    policy.reset(1)
    assert policy.decide(_obs()) == 3
    with pytest.raises(AssertionError):
        ConstantPolicy(-1)


def test_random_policy_uses_its_stream():
    a, b = RandomPolicy(), RandomPolicy()
    a.reset(0, rng=np.random.default_rng(5))
    b.reset(0, rng=np.random.default_rng(5))
    draws = [a.decide(_obs(capacity=6)) for _ in range(50)]
    assert draws == [b.decide(_obs(capacity=6)) for _ in range(50)]
    assert min(draws) >= 0 and max(draws) <= 6


def test_scripted_policy():
    policy = ScriptedPolicy([[1, 2], [3, 4]])
    policy.reset(1)
    assert policy.decide(_obs(period=1, stage=1)) == 2
    assert policy.decide(_obs(period=2, stage=1)) == 4
    with pytest.raises(InputError):
        policy.decide(_obs(period=3, stage=1))


def test_read_scripted_orders(tmp_path):
    path = tmp_path / 'orders.json'
    path.write_text(json.dumps([[1, 2], [3, 4]]))
    assert readScriptedOrders(str(path)) == [[1, 2], [3, 4]]
    path.write_text(json.dumps({'orders': [[5, 6]], 'seed': 3}))
    assert readScriptedOrders(str(path)) == [[5, 6]]
