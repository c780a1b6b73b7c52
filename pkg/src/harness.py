'''
Episode and experiment runner.

An episode resets the environment, then every round observes all stages,
collects one order per stage (simultaneously for per-stage policies, in
stage order for an LLM agent set) and steps. Experiments run many episodes
with seeds derived from (base seed, episode index), optionally spread over a
process pool.
'''

import time
import concurrent.futures
from concurrent.futures.process import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from configs import Configs, tqdm_styles, defaultNumCpus
from helpers.general_tools import formatCell, formatPercent, percentChange
from helpers.math_utils import deriveSeed, episodeSeed, makeStream, summarize
from src.agent import LLMAgentSet, LLMSettings, OpenAIChatClient, \
        makeMockClient
from src.environment import observeAll, reset, step
from src.exceptions import ConfigurationError, InvSimError
from src.policies import ConstantPolicy, RandomPolicy, ScriptedPolicy, \
        makePresetPolicy, PRESET_LABELS
from src.prompts import ABLATION_ROWS, PromptFlags


########################### policy specs ####################################

'''
Picklable description of the policy bound to every stage. Workers build the
policy objects themselves, so only the spec crosses process boundaries.

kind is one of preset, constant, random, scripted, llm. An llm spec either
names a mock responder (mock) or talks to the HTTP endpoint (live); client
overrides both with a ready-made ChatClient.
'''
@dataclass(frozen=True)
class PolicySpec:
    kind: str
    name: Optional[str] = None
    value: Optional[int] = None
    orders: Optional[Tuple[Tuple[int, ...], ...]] = None
    flags: PromptFlags = field(default_factory=PromptFlags)
    settings: LLMSettings = field(default_factory=LLMSettings)
    mock: Optional[str] = 'base-stock'
    live: bool = False
    endpoint: Optional[str] = None
    api_key_env: str = 'OPENAI_API_KEY'
    transport_retries: int = 3
    client: Optional[object] = field(default=None, compare=False)
    label: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ('preset', 'constant', 'random', 'scripted', 'llm'):
            raise ConfigurationError('unknown policy kind: {}'.format(self.kind))
        if self.kind == 'preset' and not self.name:
            raise ConfigurationError('a preset policy needs a preset name')
        if self.kind == 'constant' and self.value is None:
            raise ConfigurationError('a constant policy needs an order value')
        if self.kind == 'scripted' and not self.orders:
            raise ConfigurationError('a scripted policy needs recorded orders')

    @staticmethod
    def preset(name):
        return PolicySpec('preset', name=name)

    @staticmethod
    def llm(flags=None, settings=None, mock='base-stock', live=False,
            label=None, **kwargs):
        return PolicySpec('llm', flags=flags or PromptFlags(),
                settings=settings or LLMSettings(), mock=mock, live=live,
                label=label, **kwargs)

    @property
    def display_name(self):
        if self.label:
            return self.label
        if self.kind == 'preset':
            return self.name
        if self.kind == 'constant':
            return 'constant-{}'.format(self.value)
        if self.kind == 'llm':
            source = self.settings.model if self.live \
                    else 'mock:{}'.format(self.mock)
            return 'llm ({})'.format(source)
        return self.kind

    def makeClient(self):
        if self.client is not None:
            return self.client
        if self.live:
            return OpenAIChatClient(self.endpoint, self.api_key_env,
                    self.transport_retries)
        return makeMockClient(self.mock)

    '''
    Per-stage policy list, or a single LLMAgentSet covering all stages
    '''
    def build(self, config):
        M = config.num_stages
        if self.kind == 'llm':
            return LLMAgentSet(self.makeClient(), self.flags, self.settings,
                    self.display_name)
        if self.kind == 'preset':
            return [makePresetPolicy(self.name) for _ in range(M)]
        if self.kind == 'constant':
            return [ConstantPolicy(self.value) for _ in range(M)]
        if self.kind == 'random':
            return [RandomPolicy(self.value) for _ in range(M)]
        for row in self.orders:
            if len(row) != M:
                raise ConfigurationError('scripted order vector of length {} '
                        'for a {}-stage scenario'.format(len(row), M))
        return [ScriptedPolicy(self.orders) for _ in range(M)]

    def toDict(self):
        d = {'kind': self.kind, 'label': self.display_name}
        if self.kind == 'preset':
            d['name'] = self.name
            d['rule'] = PRESET_LABELS.get(self.name)
        elif self.kind in ('constant', 'random'):
            d['value'] = self.value
        elif self.kind == 'scripted':
            d['orders'] = [list(r) for r in self.orders]
        else:
            d.update({'flags': self.flags.toDict(),
                'settings': self.settings.toDict(),
                'client': 'live' if self.live else 'mock:{}'.format(self.mock),
                'endpoint': self.endpoint})
        return d


########################### episode records #################################

'''
Full trajectory of one episode, one row per period and one column per stage
'''
@dataclass(eq=False)
class EpisodeRecord:
    scenario: str
    seed: int
    num_stages: int
    num_periods: int
    policy: str = ''
    orders: List[List[int]] = field(default_factory=list)
    fulfilled: List[List[int]] = field(default_factory=list)
    sales: List[List[int]] = field(default_factory=list)
    inventory: List[List[int]] = field(default_factory=list)
    backlog: List[List[int]] = field(default_factory=list)
    profit: List[List[float]] = field(default_factory=list)
    demand: List[int] = field(default_factory=list)
    transcripts: Optional[List[List[dict]]] = None
    valid: bool = True
    error: Optional[str] = None

    def append(self, result):
        self.orders.append(result.orders.tolist())
        self.fulfilled.append(result.fulfilled.tolist())
        self.sales.append(result.sales.tolist())
        self.inventory.append(result.inventory.tolist())
        self.backlog.append(result.backlog.tolist())
        self.profit.append([float(x) for x in result.profit])
        self.demand.append(int(result.demand))

    @property
    def complete(self):
        return len(self.demand) == self.num_periods

    @property
    def episode_reward(self):
        return float(np.sum(self.profit)) if self.profit else 0.

    def toDict(self):
        d = {k: getattr(self, k) for k in ['scenario', 'seed', 'num_stages',
            'num_periods', 'policy', 'valid', 'error', 'orders', 'fulfilled',
            'sales', 'inventory', 'backlog', 'profit', 'demand']}
        d['episode_reward'] = self.episode_reward
        return d

    @staticmethod
    def fromDict(d):
        keys = ['scenario', 'seed', 'num_stages', 'num_periods', 'policy',
                'valid', 'error', 'orders', 'fulfilled', 'sales', 'inventory',
                'backlog', 'profit', 'demand']
        return EpisodeRecord(**{k: d[k] for k in keys if k in d})


def _bindPolicies(policies, config, seed):
    if isinstance(policies, LLMAgentSet):
        policies.reset(config)
        return
    if len(policies) != config.num_stages:
        raise ConfigurationError('{} policies for a {}-stage scenario'.format(
            len(policies), config.num_stages))
    for m, policy in enumerate(policies):
        policy.reset(m, config, makeStream(seed, 'policy-{}'.format(m)))


'''
Run one episode. Failures of a policy, a client or the environment end the
episode early with the partial record flagged invalid.
'''
def runEpisode(config, policies, seed, policy_name=''):
    record = EpisodeRecord(config.name, int(seed), config.num_stages,
            config.num_periods, policy_name)
    sequential = isinstance(policies, LLMAgentSet)
    try:
        _bindPolicies(policies, config, seed)
        state = reset(config, seed)
        while state.period <= config.num_periods:
            observations = observeAll(state)
            if sequential:
                orders = policies.act(observations, state.period)
            else:
                orders = [p.decide(obs)
                        for p, obs in zip(policies, observations)]
            state, result = step(state, orders)
            record.append(result)
    except InvSimError as e:
        record.valid = False
        where = '' if e.stage_index is None \
                else ' (stage {})'.format(e.stage_index + 1)
        record.error = '{}: {}{}'.format(type(e).__name__, e, where)
        Configs.error('[episode] {} seed {} aborted after {} periods: '
                '{}'.format(config.name, seed, len(record.demand), record.error))
    if sequential:
        record.transcripts = policies.transcripts
    return record


########################### experiments #####################################

@dataclass(eq=False)
class RunSummary:
    scenario: str
    policy: str
    num_episodes: int
    mean_reward: float
    std_reward: float
    sem_reward: float
    rewards: List[float]
    seeds: List[int]
    wall_clock: float
    partial: bool = False
    records: List[EpisodeRecord] = field(default_factory=list, repr=False)

    def cell(self):
        return formatCell(self.mean_reward, self.std_reward)

    def toDict(self):
        return {'scenario': self.scenario, 'policy': self.policy,
                'episodes': self.num_episodes,
                'mean_reward': self.mean_reward,
                'std_reward': self.std_reward,
                'sem_reward': self.sem_reward,
                'wall_clock': self.wall_clock, 'partial': self.partial}


def _episodeJob(args):
    index, config, spec, seed = args
    policies = spec.build(config)
    return index, runEpisode(config, policies, seed, spec.display_name)


def initiatePool(snapshot):
    Configs.restore(snapshot)


'''
Run num_episodes episodes of one (scenario, policy) pair. Episode i always
uses episodeSeed(base_seed, i), so the rewards do not depend on parallelism
or completion order.
'''
def runExperiment(config, spec, num_episodes, base_seed=0, parallelism=1,
        progress=False):
    if int(num_episodes) < 1:
        raise ConfigurationError('need at least 1 episode, got {}'.format(
            num_episodes))
    if parallelism is None or parallelism <= 0:
        parallelism = defaultNumCpus()
    start = time.time()
    jobs = [(i, config, spec, episodeSeed(base_seed, i))
            for i in range(int(num_episodes))]
    Configs.log('Running {} episode(s) of {} on {} with {} worker(s)'.format(
        len(jobs), spec.display_name, config.name, parallelism))

    results = []
    if parallelism == 1 or len(jobs) == 1:
        for job in tqdm(jobs, disable=not progress, **tqdm_styles):
            results.append(_episodeJob(job))
    else:
        with ProcessPoolExecutor(min(parallelism, len(jobs)),
                initializer=initiatePool,
                initargs=(Configs.snapshot(),)) as pool:
            futures = [pool.submit(_episodeJob, job) for job in jobs]
            for future in tqdm(concurrent.futures.as_completed(futures),
                    total=len(futures), disable=not progress, **tqdm_styles):
                results.append(future.result())
    records = [r for _, r in sorted(results, key=lambda x: x[0])]

    valid = [r for r in records if r.valid]
    rewards = [r.episode_reward for r in valid]
    mean, std, sem = summarize(rewards)
    wall_clock = time.time() - start
    Configs.runtime('Time to run {} x {} on {} (s): {}, memory (MB): '
            '{:.1f}'.format(len(jobs), spec.display_name, config.name,
                wall_clock, Configs.memory()))
    if len(valid) < len(records):
        Configs.warning('{} of {} episodes of {} on {} are invalid'.format(
            len(records) - len(valid), len(records), spec.display_name,
            config.name))
    return RunSummary(config.name, spec.display_name, len(records), mean, std,
            sem, rewards, [r.seed for r in records], wall_clock,
            partial=len(valid) < len(records), records=records)


########################### tables ##########################################

'''
Grid of run summaries, one row per policy and one column per scenario.
Failed cells hold None and their message in errors.
'''
@dataclass
class BenchmarkTable:
    rows: List[str] = field(default_factory=list)
    columns: List[str] = field(default_factory=list)
    cells: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    def summaries(self):
        return [self.cells[k] for k in self.cells if self.cells[k] is not None]

    @property
    def failed(self):
        return len(self.errors) > 0 or any(s.partial for s in self.summaries())


'''
Every policy on every scenario. Cells use independent seeds derived from
the base seed and the cell, i.e. policies are not compared on shared demand
draws.
'''
def benchmarkTable(scenarios, specs, episodes, base_seed=0, parallelism=1,
        progress=False):
    table = BenchmarkTable(rows=[s.display_name for s in specs],
            columns=[c.name for c in scenarios])
    for spec in specs:
        for config in scenarios:
            key = (spec.display_name, config.name)
            cell_seed = deriveSeed(base_seed, 'cell', config.name,
                    spec.display_name)
            try:
                table.cells[key] = runExperiment(config, spec, episodes,
                        cell_seed, parallelism, progress)
            except Exception as e:
                Configs.error('[benchmark] {} on {} failed: {}'.format(
                    key[0], key[1], e))
                table.cells[key] = None
                table.errors[key] = '{}: {}'.format(type(e).__name__, e)
    return table


def formatTable(table):
    if not table.rows:
        return ''
    width = max(len(r) for r in table.rows + ['policy'])
    cols = [max(len(c), 18) for c in table.columns]
    lines = ['{:<{w}}'.format('policy', w=width) + ''.join(
        '  {:>{w}}'.format(c, w=w) for c, w in zip(table.columns, cols))]
    for row in table.rows:
        cells = []
        for c, w in zip(table.columns, cols):
            s = table.cells.get((row, c))
            text = 'failed' if s is None else s.cell()
            if s is not None and s.partial:
                text += '*'
            cells.append('  {:>{w}}'.format(text, w=w))
        lines.append('{:<{w}}'.format(row, w=width) + ''.join(cells))
    return '\n'.join(lines)


########################### ablation ########################################

@dataclass
class AblationRow:
    name: str
    summary: RunSummary
    delta: float


'''
Prompt ablation: one LLM experiment per flag row (plus one all-on row per
extra model name), each compared with the default row through
(reward - base) / |base|. The default row is always run as the base, even
when it is not among the selected rows.
'''
def runAblation(config, episodes, base_seed=0, rows=None, models=(),
        make_spec=None, parallelism=1, progress=False):
    make_spec = PolicySpec.llm if make_spec is None else make_spec
    rows = list(ABLATION_ROWS) if rows is None else list(rows)
    base_name, base_flags = ABLATION_ROWS[0]

    plan = [(name, make_spec(flags=flags, label=name)) for name, flags in rows]
    for model in models:
        all_on = dict(ABLATION_ROWS)['strategy']
        template = make_spec(flags=all_on, label=model)
        settings = LLMSettings(model, template.settings.temperature,
                template.settings.timeout, template.settings.retry_limit)
        plan.append((model, make_spec(flags=all_on, settings=settings,
            label=model)))

    done = {}
    if base_name not in [name for name, _ in plan]:
        done[base_name] = runExperiment(config,
                make_spec(flags=base_flags, label=base_name), episodes,
                base_seed, parallelism, progress)
    for name, spec in plan:
        done[name] = runExperiment(config, spec, episodes, base_seed,
                parallelism, progress)

    base = done[base_name].mean_reward
    return [AblationRow(name, done[name],
        percentChange(done[name].mean_reward, base)) for name, _ in plan]


def formatAblation(rows):
    if not rows:
        return ''
    width = max(len(r.name) for r in rows + [AblationRow('setting', None, 0.)])
    lines = ['{:<{w}}  {:>18}  {:>9}'.format('setting', 'reward', 'delta',
        w=width)]
    for r in rows:
        lines.append('{:<{w}}  {:>18}  {:>9}'.format(r.name, r.summary.cell(),
            formatPercent(r.delta), w=width))
    return '\n'.join(lines)
