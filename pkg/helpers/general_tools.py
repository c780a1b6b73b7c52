import os, math

'''
"mean (std)" with two decimals, as reward tables are printed
'''
def formatCell(mean, std):
    if mean is None or math.isnan(mean):
        return 'n/a'
    return '{:.2f} ({:.2f})'.format(mean, std)


'''
Relative change of reward versus base in percent, (reward - base) / |base|
'''
def percentChange(reward, base):
    if base == 0 or math.isnan(base) or math.isnan(reward):
        return float('nan')
    return (reward - base) / abs(base) * 100.


def formatPercent(value):
    if value is None or math.isnan(value):
        return 'n/a'
    return '{:.2f}%'.format(value)


def makeDir(path):
    if not os.path.isdir(path):
        os.makedirs(path)
    return path
