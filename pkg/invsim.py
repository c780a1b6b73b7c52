#!/usr/bin/env python3
'''
Front of invsim, a multi-echelon inventory simulator with heuristic and
LLM-driven stage agents.

Subcommands:
    simulate        one experiment (scenario x policy), writes all outputs
    benchmark       heuristic presets (and optionally LLM agents) over the
                    built-in scenarios
    ablate          prompt-section ablation of the LLM agents
    render-prompt   print the exact prompt a stage would receive
    scenario        show / export a scenario
    report          re-read a finished run and redo its table and plots
'''

import os, sys, time, functools
from argparse import ArgumentParser, Namespace
from dataclasses import replace

from configs import Configs, buildConfigs, getConfigs, ensureMainConfig, \
        _read_config_file
from src.environment import observe, reset, step
from src.exceptions import ConfigurationError, InputError, InvSimError, \
        UnknownPresetError
from src.harness import PolicySpec, EpisodeRecord, runExperiment, \
        benchmarkTable, formatTable, runAblation, formatAblation
from src.agent import LLMSettings, MOCK_RESPONDERS
from src.policies import PRESET_NAMES, presetRule, readScriptedOrders
from src.prompts import ABLATION_ROWS, PromptFlags, renderRoundPrompt, \
        renderSystemMessage
from src.scenarios import SCENARIO_NAMES, loadScenario, writeScenario, \
        describeScenario
from src.writer import writeManifest, writeSummary, writeEpisodes, \
        exportPlots, readSummary, readEpisodes, readJson, writeText, version
from helpers.general_tools import formatCell

_CLIENT_OPTIONS = ['live', 'model', 'endpoint', 'temperature', 'timeout',
        'retry_limit', 'mock']
_PROMPT_OPTIONS = ['no_demand', 'no_downstream', 'strategy', 'no_cot',
        'no_history', 'menu', 'stage_menu']
_TRUE = ('true', 'yes', 'on', '1')


def main(argv=None, config_path=None):
    parser, subparsers = _init_parser()
    cmdline_args = sys.argv[1:] if argv is None else list(argv)

    opts = Namespace()
    config_path = ensureMainConfig() if config_path is None else config_path
    with open(config_path, 'r') as cfile:
        main_cmd_defaults = _read_config_file(cfile, opts)
    # [commandline] entries become defaults of the subcommands that have them
    for sub in subparsers.choices.values():
        dests = set(a.dest for a in sub._actions)
        sub.set_defaults(**{k: v for k, v in main_cmd_defaults.items()
            if k in dests})

    try:
        args = parser.parse_args(cmdline_args, namespace=opts)
    except SystemExit as e:
        return e.code
    if not getattr(args, 'command', None):
        parser.print_help()
        return 2

    try:
        buildConfigs(args)
        Configs.log('invsim is running with: {}'.format(' '.join(cmdline_args)))
        Configs.log('Main configuration loaded from {}'.format(config_path))
        s1 = time.time()
        ret = args.func(args)
        Configs.log('{} finished in {} seconds...'.format(args.command,
            time.time() - s1))
        return ret
    except InvSimError as e:
        Configs.error('{}: {}'.format(type(e).__name__, e))
        print('error: {}'.format(e), file=sys.stderr)
        return 1


########################### option resolution ###############################

def _given(args, names):
    return [n for n in names if getattr(args, n, None) not in (None, False, [])]


def _parseBool(value, default):
    if value is None or str(value).strip() == '':
        return default
    return str(value).strip().lower() in _TRUE


def _parseMenu(raw):
    try:
        return tuple(int(x) for x in str(raw).replace(',', ' ').split())
    except ValueError:
        raise ConfigurationError('malformed order menu: {}'.format(raw))


'''
Prompt flags: [Prompt] section of main.config first, command line on top
'''
def buildFlags(args):
    conf = getattr(Configs, 'Prompt', None)
    base = PromptFlags()
    kwargs = {k: _parseBool(getattr(conf, k, None), getattr(base, k))
            for k in ['include_demand', 'include_downstream',
                'include_strategy', 'chain_of_thought', 'keep_history']}
    raw_menu = getattr(conf, 'restricted_menu', '') if conf else ''
    menu = _parseMenu(raw_menu) if raw_menu and raw_menu.strip() else None

    if getattr(args, 'no_demand', None):
        kwargs['include_demand'] = False
    if getattr(args, 'no_downstream', None):
        kwargs['include_downstream'] = False
    if getattr(args, 'strategy', None):
        kwargs['include_strategy'] = True
    if getattr(args, 'no_cot', None):
        kwargs['chain_of_thought'] = False
    if getattr(args, 'no_history', None):
        kwargs['keep_history'] = False
    if getattr(args, 'menu', None):
        menu = tuple(args.menu)

    stage_menus = {}
    for item in getattr(args, 'stage_menu', None) or []:
        if ':' not in item:
            raise ConfigurationError('--stage-menu expects STAGE:ORDERS, got '
                    '{}'.format(item))
        stage, orders = item.split(':', 1)
        try:
            stage_menus[int(stage) - 1] = _parseMenu(orders)
        except ValueError:
            raise ConfigurationError('malformed --stage-menu {}'.format(item))
    return PromptFlags(restricted_menu=menu, stage_menus=stage_menus, **kwargs)


def buildSettings(args):
    temperature = float(Configs.temperature)
    if not 0. <= temperature <= 2.:
        raise ConfigurationError('temperature {} outside [0, 2]'.format(
            temperature))
    if int(Configs.retry_limit) < 1:
        raise ConfigurationError('retry limit needs to be >= 1')
    if float(Configs.timeout) <= 0:
        raise ConfigurationError('timeout needs to be > 0')
    return LLMSettings(str(Configs.model), temperature,
            float(Configs.timeout), int(Configs.retry_limit))


'''
Keyword arguments shared by every LLM policy spec of a run. Live runs need
the explicit --live flag plus credentials in the environment.
'''
def _clientKwargs(args):
    live = bool(getattr(args, 'live', None))
    if live and not os.environ.get(Configs.api_key_env, '').strip():
        raise ConfigurationError('--live needs credentials: environment '
                'variable {} is not set'.format(Configs.api_key_env))
    mock = getattr(args, 'mock', None) or Configs.mock
    if mock not in MOCK_RESPONDERS:
        raise ConfigurationError('unknown mock responder: {} (choose from '
                '{})'.format(mock, ', '.join(MOCK_RESPONDERS)))
    return dict(settings=buildSettings(args), mock=mock, live=live,
            endpoint=Configs.endpoint or None,
            api_key_env=Configs.api_key_env,
            transport_retries=int(Configs.transport_retries))


def buildPolicySpec(args):
    llm_options = _given(args, _CLIENT_OPTIONS + _PROMPT_OPTIONS)
    if args.scripted:
        if args.policy or llm_options:
            raise ConfigurationError('--scripted cannot be combined with '
                    '--policy or LLM options')
        orders = readScriptedOrders(args.scripted)
        return PolicySpec('scripted', orders=tuple(tuple(r) for r in orders))

    policy = args.policy
    if policy is None:
        policy = 'llm' if llm_options else str(Configs.policy)
    if policy == 'llm':
        return PolicySpec.llm(flags=buildFlags(args), **_clientKwargs(args))
    if llm_options:
        raise ConfigurationError('policy {} is not an LLM policy, options {} '
                'are mutually exclusive with it'.format(policy, ', '.join(
                    '--' + o.replace('_', '-') for o in llm_options)))
    if policy == 'random':
        return PolicySpec('random')
    if policy.startswith('constant-'):
        try:
            return PolicySpec('constant', value=int(policy.split('-', 1)[1]))
        except ValueError:
            raise ConfigurationError('malformed constant policy: {}'.format(
                policy))
    presetRule(policy)
    return PolicySpec.preset(policy)


def _scenario(args):
    return loadScenario(getattr(args, 'scenario', None) or Configs.scenario)


########################### subcommands #####################################

def cmdSimulate(args):
    config = _scenario(args)
    spec = buildPolicySpec(args)
    getConfigs()
    print('\nSimulating {} on scenario {} ({} episode(s), seed {})...'.format(
        spec.display_name, config.name, Configs.episodes, Configs.seed))
    summary = runExperiment(config, spec, int(Configs.episodes),
            int(Configs.seed), int(Configs.num_cpus), progress=True)

    writeManifest(Configs.outdir, 'simulate', [config], spec, [summary],
            int(Configs.seed))
    writeSummary(Configs.outdir, [summary])
    writeEpisodes(Configs.outdir, summary.records)
    exportPlots(Configs.outdir, summary.records[:max(0, args.plots)])

    for i, r in enumerate(summary.records):
        if not r.valid:
            print('episode {} invalid: {}'.format(i, r.error), file=sys.stderr)
    print(summary.cell())
    return 1 if summary.partial else 0


def cmdBenchmark(args):
    names = SCENARIO_NAMES if args.scenarios is None else args.scenarios
    scenarios = [loadScenario(s) for s in names]
    policies = PRESET_NAMES if args.policies is None else args.policies
    for p in policies:
        presetRule(p)
    specs = [PolicySpec.preset(p) for p in policies]

    llm_options = _given(args, _CLIENT_OPTIONS)
    if llm_options and not args.include_llm:
        raise ConfigurationError('LLM options {} need --include-llm'.format(
            ', '.join('--' + o.replace('_', '-') for o in llm_options)))
    if args.include_llm:
        kwargs = _clientKwargs(args)
        specs.append(PolicySpec.llm(flags=PromptFlags(),
            label='InvAgent w/o strategy', **kwargs))
        specs.append(PolicySpec.llm(flags=PromptFlags(include_strategy=True),
            label='InvAgent w/ strategy', **kwargs))

    getConfigs()
    print('\nBenchmarking {} policies on {} scenario(s), {} episode(s) '
            'per cell...'.format(len(specs), len(scenarios), Configs.episodes))
    table = benchmarkTable(scenarios, specs, int(Configs.episodes),
            int(Configs.seed), int(Configs.num_cpus))
    text = formatTable(table)
    writeText(os.path.join(Configs.outdir, 'table.txt'), text)
    writeSummary(Configs.outdir, table.summaries())
    writeManifest(Configs.outdir, 'benchmark', scenarios, None,
            table.summaries(), int(Configs.seed))
    print(text)
    for (row, col), err in table.errors.items():
        print('cell {} x {} failed: {}'.format(row, col, err), file=sys.stderr)
    return 1 if table.failed else 0


def cmdAblate(args):
    # the ablation matrix is defined on the variable-demand scenario
    config = loadScenario(args.scenario or 'variable')
    all_rows = dict(ABLATION_ROWS)
    if args.flags:
        rows = [(name, all_rows[name]) for name in args.flags]
    else:
        rows = list(ABLATION_ROWS)
    make_spec = functools.partial(PolicySpec.llm, **_clientKwargs(args))

    getConfigs()
    print('\nAblating prompt settings on scenario {} ({} episode(s) per '
            'row)...'.format(config.name, Configs.episodes))
    results = runAblation(config, int(Configs.episodes), int(Configs.seed),
            rows, args.models or (), make_spec, int(Configs.num_cpus))
    text = formatAblation(results)
    writeText(os.path.join(Configs.outdir, 'ablation.txt'), text)
    summaries = [r.summary for r in results]
    writeSummary(Configs.outdir, summaries)
    writeManifest(Configs.outdir, 'ablate', [config], None, summaries,
            int(Configs.seed))
    print(text)
    return 1 if any(s.partial for s in summaries) else 0


'''
A recorded episode is replayed on the scenario it was recorded on
'''
def _replayScenario(args, record):
    if record is None:
        return _scenario(args)
    if args.scenario:
        config = loadScenario(args.scenario)
    else:
        try:
            config = loadScenario(record.scenario)
        except UnknownPresetError:
            raise InputError('episode was recorded on scenario {}, pass its '
                    'scenario file with --scenario'.format(record.scenario))
    if config.name != record.scenario:
        raise InputError('episode was recorded on scenario {}, not {}'.format(
            record.scenario, config.name))
    return config


'''
The observation comes from a fresh reset (round 1) or from replaying the
orders of a recorded episode up to the requested round.
'''
def cmdRenderPrompt(args):
    record = None
    if args.episode:
        record = EpisodeRecord.fromDict(readJson(args.episode))
    config = _replayScenario(args, record)
    M, T = config.num_stages, config.num_periods
    if not 1 <= args.stage <= M:
        raise InputError('stage {} does not exist in a {}-stage supply '
                'chain'.format(args.stage, M))
    orders, seed = [], int(Configs.seed)
    if record is not None:
        orders, seed = record.orders, record.seed
    last = min(T, len(orders) + 1)
    if not 1 <= args.period <= last:
        raise InputError('round {} cannot be rendered, available rounds are '
                '1..{}'.format(args.period, last))

    state = reset(config, seed)
    for t in range(args.period - 1):
        state, _ = step(state, orders[t])
    obs = observe(state, args.stage - 1)

    flags = buildFlags(args)
    downstream = args.downstream_order
    if downstream is None and args.stage > 1 and flags.include_downstream \
            and len(orders) >= args.period:
        downstream = orders[args.period - 1][args.stage - 2]

    described = config
    if args.demand_from:
        described = replace(config, demand=loadScenario(args.demand_from).demand)
    if args.system:
        print(renderSystemMessage(args.stage - 1, M))
        print()
    print(renderRoundPrompt(obs, args.period, described, downstream, flags))
    return 0


def cmdScenario(args):
    names = [args.name] if args.name else list(SCENARIO_NAMES)
    if args.write and len(names) != 1:
        raise ConfigurationError('--write needs a single --name')
    for i, name in enumerate(names):
        config = loadScenario(name)
        if i > 0:
            print()
        print(describeScenario(config))
        if args.write:
            writeScenario(config, args.write)
            print('\nScenario written to {}'.format(args.write))
    return 0


def cmdReport(args):
    summary_path = os.path.join(Configs.outdir, 'summary.csv')
    if not os.path.isfile(summary_path):
        raise InputError('no summary.csv under {}'.format(Configs.outdir))
    df = readSummary(Configs.outdir)
    for _, row in df.iterrows():
        flag = ' (partial)' if str(row['partial']).lower() == 'true' else ''
        print('{}\t{}\t{}{}'.format(row['scenario'], row['policy'],
            formatCell(row['mean_reward'], row['std_reward']), flag))
    records = readEpisodes(Configs.outdir)
    if records:
        exportPlots(Configs.outdir, records[:max(0, args.plots)])
        print('\nRegenerated plots for {} episode(s) under {}'.format(
            min(len(records), max(0, args.plots)),
            os.path.join(Configs.outdir, 'plots')))
    return 0


########################### parser ##########################################

def _addBasicGroup(parser, episodes=True):
    basic_group = parser.add_argument_group(
            "Basic parameters".upper(),
            "Output location, parallelism and seeding.")
    basic_group.add_argument('-d', '--outdir', type=str, required=False,
            help='Output directory, default: output_invsim/')
    basic_group.add_argument('-t', '--num-cpus', type=int, required=False,
            help='Number of worker processes, <= 0 for all physical cores, '
                 'default: 1')
    basic_group.add_argument('--seed', type=int, required=False,
            help='Base seed, episode i uses a seed derived from (seed, i), '
                 'default: 0')
    if episodes:
        basic_group.add_argument('-e', '--episodes', type=int, required=False,
                help='Number of episodes per experiment, default: 5')
    return basic_group


def _addClientGroup(parser):
    llm_group = parser.add_argument_group(
            "LLM client parameters".upper(),
            ' '.join(["A deterministic mock client is used unless --live is",
                "given; live runs read the API key from the environment",
                "variable named in main.config (default OPENAI_API_KEY)."]))
    llm_group.add_argument('--live', action='store_const', const=True,
            default=None, help='Query the chat-completion endpoint')
    llm_group.add_argument('--mock', type=str, default=None,
            choices=sorted(MOCK_RESPONDERS),
            help='Mock responder used without --live, default: base-stock')
    llm_group.add_argument('--model', type=str, default=None,
            help='Model name, default: gpt-4')
    llm_group.add_argument('--endpoint', type=str, default=None,
            help='Base URL of an OpenAI-compatible endpoint')
    llm_group.add_argument('--temperature', type=float, default=None,
            help='Sampling temperature in [0, 2], default: 1.0')
    llm_group.add_argument('--timeout', type=float, default=None,
            help='Request timeout in seconds, default: 60')
    llm_group.add_argument('--retry-limit', type=int, default=None,
            help='Replies per decision before falling back to order 0, '
                 'default: 3')
    return llm_group


def _addPromptGroup(parser):
    prompt_group = parser.add_argument_group(
            "Prompt parameters".upper(),
            "Sections of the round prompt (defaults from main.config).")
    prompt_group.add_argument('--no-demand', action='store_const', const=True,
            default=None, help='Leave out the demand description')
    prompt_group.add_argument('--no-downstream', action='store_const',
            const=True, default=None,
            help='Leave out the downstream order of this round')
    prompt_group.add_argument('--strategy', action='store_const', const=True,
            default=None, help='Include the strategy description')
    prompt_group.add_argument('--no-cot', action='store_const', const=True,
            default=None, help='Ask for the action only, without a reason')
    prompt_group.add_argument('--no-history', action='store_const',
            const=True, default=None,
            help='Do not keep the chat history between rounds')
    prompt_group.add_argument('--menu', type=int, nargs='+', default=None,
            help='Allowed orders, e.g. --menu 0 4 8')
    prompt_group.add_argument('--stage-menu', type=str, action='append',
            default=None,
            help='Allowed orders of one stage (1-based), e.g. 2:0,4,8')
    return prompt_group


def _init_parser():
    parser = ArgumentParser(description=(
        "This program runs invsim, a multi-period multi-echelon inventory "
        "simulator. Stages are driven by heuristic ordering policies or by "
        "LLM agents that receive a text prompt per round."),
        conflict_handler='resolve')
    parser.add_argument('-v', '--version', action='version',
            version="%(prog)s " + version)
    subparsers = parser.add_subparsers(dest='command')

    sim = subparsers.add_parser('simulate',
            help='Run one experiment and write its outputs')
    sim.set_defaults(func=cmdSimulate)
    _addBasicGroup(sim)
    sim_group = sim.add_argument_group("Simulation parameters".upper())
    sim_group.add_argument('-s', '--scenario', type=str, default=None,
            help='Scenario preset ({}) or scenario file, default: '
                 'constant'.format(', '.join(SCENARIO_NAMES)))
    sim_group.add_argument('-p', '--policy', type=str, default=None,
            help='Policy preset ({}), llm, random or constant-N, default: '
                 'base-stock'.format(', '.join(PRESET_NAMES)))
    sim_group.add_argument('--scripted', type=str, default=None,
            help='JSON file of per-round order vectors (or an episode '
                 'record) to replay')
    sim_group.add_argument('--plots', type=int, default=1,
            help='Number of episodes to export time series for, default: 1')
    _addClientGroup(sim)
    _addPromptGroup(sim)

    bench = subparsers.add_parser('benchmark',
            help='Heuristic presets over the built-in scenarios')
    bench.set_defaults(func=cmdBenchmark)
    _addBasicGroup(bench)
    bench_group = bench.add_argument_group("Benchmark parameters".upper())
    bench_group.add_argument('--scenarios', type=str, nargs='*', default=None,
            help='Scenarios to include, default: all five presets')
    bench_group.add_argument('--policies', type=str, nargs='*', default=None,
            help='Policy presets to include, default: all presets')
    bench_group.add_argument('--include-llm', action='store_const',
            const=True, default=False,
            help='Add LLM agent rows without and with the strategy section')
    _addClientGroup(bench)

    abl = subparsers.add_parser('ablate',
            help='Prompt-section ablation of the LLM agents')
    abl.set_defaults(func=cmdAblate)
    _addBasicGroup(abl)
    abl_group = abl.add_argument_group("Ablation parameters".upper())
    abl_group.add_argument('-s', '--scenario', type=str, default=None,
            help='Scenario preset or scenario file, default: variable')
    abl_group.add_argument('--flags', type=str, nargs='+', default=None,
            choices=[name for name, _ in ABLATION_ROWS],
            help='Ablation rows to run, default: all')
    abl_group.add_argument('--models', type=str, nargs='*', default=None,
            help='Extra model names, each run with all prompt sections on')
    _addClientGroup(abl)

    rp = subparsers.add_parser('render-prompt',
            help='Print the prompt a stage would receive')
    rp.set_defaults(func=cmdRenderPrompt)
    _addBasicGroup(rp, episodes=False)
    rp_group = rp.add_argument_group("Prompt source".upper())
    rp_group.add_argument('-s', '--scenario', type=str, default=None,
            help='Scenario preset or scenario file, default: constant')
    rp_group.add_argument('--stage', type=int, default=1,
            help='Stage number, 1 = retailer, default: 1')
    rp_group.add_argument('--period', type=int, default=1,
            help='Round number, default: 1')
    rp_group.add_argument('--episode', type=str, default=None,
            help='Episode record (episodes/NNN.json) to replay up to the round')
    rp_group.add_argument('--downstream-order', type=int, default=None,
            help='Downstream order of this round (stages >= 2)')
    rp_group.add_argument('--demand-from', type=str, default=None,
            help='Take the demand description from another scenario')
    rp_group.add_argument('--system', action='store_const', const=True,
            default=False, help='Also print the system message')
    _addPromptGroup(rp)

    sc = subparsers.add_parser('scenario', help='Show or export a scenario')
    sc.set_defaults(func=cmdScenario)
    _addBasicGroup(sc, episodes=False)
    sc.add_argument('--name', type=str, default=None,
            help='Scenario preset or file, default: all presets')
    sc.add_argument('--write', type=str, default=None,
            help='Write the scenario to this scenario file')

    rep = subparsers.add_parser('report',
            help='Re-read a finished run (-d OUTDIR)')
    rep.set_defaults(func=cmdReport)
    _addBasicGroup(rep, episodes=False)
    rep.add_argument('--plots', type=int, default=1,
            help='Number of episodes to redo time series for, default: 1')

    return parser, subparsers


if __name__ == "__main__":
    sys.exit(main())
