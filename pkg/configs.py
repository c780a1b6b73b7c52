'''
Configuration of invsim.

Run-wide settings live as class attributes on Configs. They are resolved
from (in priority order) the command line, main.config and the defaults
below.
'''

import os, time, shutil
try:
    import configparser
except ImportError:
    import ConfigParser as configparser
from argparse import Namespace

import psutil

_root_dir = os.path.dirname(os.path.realpath(__file__))
default_config_path = os.path.join(_root_dir, 'default.config')
main_config_path = os.path.join(_root_dir, 'main.config')

# default settings for tqdm progress bar style
tqdm_styles = {
        'desc': '\tRunning...', 'ascii': False,
        'ncols': 80,
        #'disable': True,
        'mininterval': 0.5
        }

'''
Configurations defined by users
'''
class Configs:
    global _root_dir

    outdir = None
    num_cpus = 1

    scenario = 'constant'
    policy = 'base-stock'
    mock = 'base-stock'
    episodes = 5
    seed = 0

    # LLM settings
    model = 'gpt-4'
    endpoint = None
    temperature = 1.0
    timeout = 60.0
    retry_limit = 3
    transport_retries = 3
    api_key_env = 'OPENAI_API_KEY'

    log_path = None
    error_path = None
    debug_path = None
    runtime_path = None

    @staticmethod
    def warning(msg, path=None):
        path = Configs.log_path if path is None else path
        Configs.write(msg, 'WARNING', path)

    @staticmethod
    def log(msg, path=None):
        path = Configs.log_path if path is None else path
        Configs.write(msg, 'LOG', path)

    @staticmethod
    def debug(msg, path=None):
        path = Configs.debug_path if path is None else path
        Configs.write(msg, 'DEBUG', path)

    @staticmethod
    def error(msg, path=None):
        path = Configs.error_path if path is None else path
        Configs.write(msg, 'ERROR', path)

    @staticmethod
    def runtime(msg, path=None):
        path = Configs.runtime_path if path is None else path
        if path is not None:
            with open(path, 'a') as f:
                f.write('{}\n'.format(msg))

    @staticmethod
    def write(msg, level, path):
        if path is not None:
            with open(path, 'a') as f:
                f.write('{}\t[{}] {}\n'.format(time.strftime('%Y-%m-%d %H:%M:%S'),
                    level, msg))

    @staticmethod
    def memory():
        return psutil.Process(os.getpid()).memory_info().rss / (1024 ** 2)

    '''
    Logging paths, handed to worker processes so they log to the same files
    '''
    @staticmethod
    def snapshot():
        return {k: getattr(Configs, k) for k in ['outdir', 'log_path',
            'error_path', 'debug_path', 'runtime_path']}

    @staticmethod
    def restore(values):
        for k, v in values.items():
            setattr(Configs, k, v)

    @staticmethod
    def setOutdir(outdir):
        Configs.outdir = os.path.realpath(outdir)
        if not os.path.exists(Configs.outdir):
            os.makedirs(Configs.outdir)
        Configs.log_path = os.path.join(Configs.outdir, 'log.txt')
        Configs.error_path = os.path.join(Configs.outdir, 'error.txt')
        Configs.debug_path = os.path.join(Configs.outdir, 'debug.txt')
        Configs.runtime_path = os.path.join(Configs.outdir,
                'runtime_breakdown.txt')

'''
Default number of workers: physical cores if psutil can tell, else all
'''
def defaultNumCpus():
    return psutil.cpu_count(logical=False) or os.cpu_count() or 1

# check for valid configurations and set them
def set_valid_configuration(name, conf):
    assert isinstance(conf, Namespace), \
            'Looking for Namespace object but find {}'.format(type(conf))

    if name == 'LLM':
        for k in conf.__dict__.keys():
            attr = getattr(conf, k)
            if not attr:
                continue

            if k == 'temperature':
                assert 0. <= float(attr) <= 2., \
                    'LLM temperature {} outside [0, 2]'.format(attr)
                attr = float(attr)
            elif k in ('timeout',):
                assert float(attr) > 0, 'LLM timeout needs to be > 0'
                attr = float(attr)
            elif k in ('retry_limit', 'transport_retries'):
                assert int(attr) >= 1, '{} needs to be >= 1'.format(k)
                attr = int(attr)
            setattr(Configs, k, attr)
    # prompt flag defaults are read by the command line front-end
    elif name == 'Prompt':
        setattr(Configs, name, conf)
    elif name == 'Basic':
        for k in conf.__dict__.keys():
            attr = getattr(conf, k)
            if not attr:
                continue
            setattr(Configs, k, attr)

# valid attribute check
def valid_attribute(k, v):
    assert isinstance(k, str)
    if isinstance(v, staticmethod):
        return False
    if not k.startswith('_'):
        return True
    return False

# print a list of all configurations
def getConfigs():
    print('\n********* Configurations **********')
    for k, v in Configs.__dict__.items():
        if valid_attribute(k, v):
            print('\tConfigs.{}: {}'.format(k, v))

'''
Create main.config from default.config if it does not exist yet
'''
def ensureMainConfig(path=None, source=None):
    path = main_config_path if path is None else path
    source = default_config_path if source is None else source
    if not os.path.exists(path):
        assert os.path.exists(source), \
                'default config file {} missing!'.format(source)
        shutil.copyfile(source, path)
        print('main.config not found, generated {} from {}'.format(
            path, source))
    return path

'''
Read in from config file if it exists. Any cmd-line provided configs will
override the config file.

Returns the [commandline] section as argparse defaults (dest -> string);
every other section is attached to opts as a Namespace.
'''
def _read_config_file(filename, opts):
    Configs.debug('Reading config from {}'.format(filename))
    config_defaults = {}
    cparser = configparser.ConfigParser()
    cparser.optionxform = str
    cparser.read_file(filename)

    if cparser.has_section('commandline'):
        for k, v in cparser.items('commandline'):
            config_defaults[k.replace('-', '_')] = v

    for section in cparser.sections():
        if section == 'commandline':
            continue
        if getattr(opts, section, None):
            section_name_space = getattr(opts, section)
        else:
            section_name_space = Namespace()
        for k, v in cparser.items(section):
            section_name_space.__setattr__(k, v)
        opts.__setattr__(section, section_name_space)
    return config_defaults

'''
Build configurations
'''
def buildConfigs(args):
    # config file sections first, command line overrides them
    for section in ['Basic', 'LLM', 'Prompt']:
        conf = getattr(args, section, None)
        if conf is not None:
            set_valid_configuration(section, conf)

    Configs.setOutdir(getattr(args, 'outdir', None) or 'output_invsim')

    num_cpus = getattr(args, 'num_cpus', None)
    if num_cpus is not None:
        Configs.num_cpus = int(num_cpus) if int(num_cpus) > 0 \
                else defaultNumCpus()

    for k in ['scenario', 'policy', 'episodes', 'seed', 'model',
            'endpoint', 'temperature', 'timeout', 'retry_limit']:
        v = getattr(args, k, None)
        if v is not None:
            setattr(Configs, k, v)
