'''
Seed derivation and summary statistics shared by the environment, the
policies and the experiment runner.
'''

import zlib
import numpy as np
from scipy import stats


'''
Stable integer key for a stream label (Python's hash() is salted per process)
'''
def labelKey(label):
    return zlib.crc32(str(label).encode('utf-8'))


'''
Derive a 32-bit seed from a base seed and any number of integer/str keys.
The result only depends on the inputs, never on scheduling order.
'''
def deriveSeed(base_seed, *keys):
    entropy = [int(base_seed)] + [k if isinstance(k, int) else labelKey(k)
            for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


'''
One named RNG stream per consumer (demand, each stage's policy), so adding a
stochastic policy never perturbs the demand sequence.
'''
def makeStream(seed, label):
    return np.random.default_rng(
            np.random.SeedSequence([int(seed), labelKey(label)]))


def episodeSeed(base_seed, episode_index):
    return deriveSeed(base_seed, int(episode_index), 'episode')


'''
Mean, population std and standard error of a list of episode rewards
'''
def summarize(values):
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return float('nan'), float('nan'), float('nan')
    mean = float(arr.mean())
    std = float(arr.std(ddof=0))
    sem = float(stats.sem(arr)) if arr.size > 1 else 0.0
    return mean, std, sem
