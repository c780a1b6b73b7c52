'''
Run outputs under the output directory:

    manifest.json           scenario, policy spec, seeds, version, statistics
    summary.csv             one row per (scenario, policy) run
    episodes/NNN.json       full episode records
    transcripts/NNN/stage_K.jsonl   agent chat transcripts (LLM runs)
    plots/episode_NNN.{csv,svg}     per-stage time series
'''

import os, json, time, glob

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import pandas as pd

from configs import Configs
from helpers.general_tools import makeDir
from src.harness import EpisodeRecord
from src.scenarios import scenarioToSections

version = '0.1.0'

TIMESERIES_COLUMNS = ['stage', 'period', 'inventory', 'backlog', 'order',
        'fulfilled', 'sales', 'profit', 'demand']


def writeJson(path, payload):
    with open(path, 'w') as f:
        json.dump(payload, f, indent=2)


def readJson(path):
    with open(path, 'r') as f:
        return json.load(f)


def writeManifest(outdir, command, configs, spec, summaries, base_seed):
    payload = {
            'software': 'invsim', 'version': version,
            'command': command,
            'created': time.strftime('%Y-%m-%d %H:%M:%S'),
            'base_seed': base_seed,
            'scenarios': {c.name: scenarioToSections(c) for c in configs},
            'policy': spec.toDict() if spec is not None else None,
            'statistics': {'std': 'population', 'sem': 'standard error of '
                'the mean (sample std / sqrt(n))'},
            'runs': [dict(s.toDict(), seeds=s.seeds, rewards=s.rewards)
                for s in summaries],
            }
    path = os.path.join(outdir, 'manifest.json')
    writeJson(path, payload)
    Configs.log('Wrote manifest to {}'.format(path))
    return path


def writeSummary(outdir, summaries):
    path = os.path.join(outdir, 'summary.csv')
    df = pd.DataFrame([s.toDict() for s in summaries],
            columns=['scenario', 'policy', 'episodes', 'mean_reward',
                'std_reward', 'sem_reward', 'wall_clock', 'partial'])
    df.to_csv(path, index=False)
    Configs.log('Wrote {} summary row(s) to {}'.format(len(df), path))
    return path


def readSummary(outdir):
    path = os.path.join(outdir, 'summary.csv')
    return pd.read_csv(path)


def writeEpisodes(outdir, records):
    ep_dir = makeDir(os.path.join(outdir, 'episodes'))
    paths = []
    for i, record in enumerate(records):
        path = os.path.join(ep_dir, '{:03d}.json'.format(i))
        writeJson(path, record.toDict())
        paths.append(path)
        if record.transcripts:
            writeTranscripts(outdir, i, record)
    Configs.log('Wrote {} episode record(s) to {}'.format(len(records), ep_dir))
    return paths


def readEpisodes(outdir):
    paths = sorted(glob.glob(os.path.join(outdir, 'episodes', '*.json')))
    return [EpisodeRecord.fromDict(readJson(p)) for p in paths]


'''
One JSON line per message, oldest first, one file per stage
'''
def writeTranscripts(outdir, index, record):
    t_dir = makeDir(os.path.join(outdir, 'transcripts', '{:03d}'.format(index)))
    for m, entries in enumerate(record.transcripts):
        with open(os.path.join(t_dir, 'stage_{}.jsonl'.format(m + 1)), 'w') as f:
            for entry in entries:
                f.write(json.dumps(entry) + '\n')
    return t_dir


def timeseriesFrame(record):
    rows = []
    for m in range(record.num_stages):
        for t in range(len(record.demand)):
            rows.append([m + 1, t + 1, record.inventory[t][m],
                record.backlog[t][m], record.orders[t][m],
                record.fulfilled[t][m], record.sales[t][m],
                record.profit[t][m], record.demand[t]])
    return pd.DataFrame(rows, columns=TIMESERIES_COLUMNS)


'''
Write <prefix>.csv (one row per stage and period, stage-major) and
<prefix>.svg (inventory, backlog, order and profit panels, one line per
stage, customer demand overlaid on the order panel)
'''
def exportTimeseries(record, prefix):
    makeDir(os.path.dirname(os.path.realpath(prefix)))
    df = timeseriesFrame(record)
    csv_path = prefix + '.csv'
    df.to_csv(csv_path, index=False)

    svg_path = prefix + '.svg'
    panels = [('inventory', 'Inventory'), ('backlog', 'Backlog'),
            ('order', 'Order'), ('profit', 'Profit')]
    fig, axes = plt.subplots(len(panels), 1, figsize=(8, 10), sharex=True)
    for ax, (col, title) in zip(axes, panels):
        for stage, part in df.groupby('stage'):
            ax.plot(part['period'], part[col], marker='o', markersize=3,
                    label='stage {}'.format(stage))
        if col == 'order':
            retail = df[df['stage'] == 1]
            ax.plot(retail['period'], retail['demand'], 'k--',
                    label='demand')
        ax.set_ylabel(title)
        ax.grid(True, alpha=0.3)
    axes[0].legend(loc='upper right', fontsize='small', ncol=2)
    axes[-1].set_xlabel('Period')
    fig.suptitle('{} ({}), seed {}, reward {:.2f}'.format(record.scenario,
        record.policy, record.seed, record.episode_reward))
    fig.tight_layout()
    fig.savefig(svg_path, format='svg')
    plt.close(fig)
    Configs.debug('Wrote time series {} and {}'.format(csv_path, svg_path))
    return csv_path, svg_path


def exportPlots(outdir, records):
    plot_dir = makeDir(os.path.join(outdir, 'plots'))
    return [exportTimeseries(r, os.path.join(plot_dir,
        'episode_{:03d}'.format(i))) for i, r in enumerate(records)
        if len(r.demand) > 0]


def writeText(path, text):
    with open(path, 'w') as f:
        f.write(text + '\n')
    return path
