#!/usr/bin/env python3
import os, sys
try:
    import configparser
except ImportError:
    import ConfigParser as configparser
from argparse import ArgumentParser

_root_dir = os.path.dirname(os.path.realpath(__file__))
_config_path = os.path.join(_root_dir, 'default.config')

'''
Check the [LLM] section of a config: numeric fields parse and are in range.
Returns the number of problems found.
'''
def checkLLMSection(cparser):
    if not cparser.has_section('LLM'):
        print('\t[LLM] section missing, built-in defaults will be used')
        return 0
    section = cparser['LLM']
    n_err = 0
    checks = [('temperature', float, lambda x: 0. <= x <= 2., 'in [0, 2]'),
            ('timeout', float, lambda x: x > 0, '> 0'),
            ('retry_limit', int, lambda x: x >= 1, '>= 1'),
            ('transport_retries', int, lambda x: x >= 1, '>= 1')]
    for key, cast, ok, desc in checks:
        raw = section.get(key, '').strip()
        if not raw:
            continue
        try:
            value = cast(raw)
        except ValueError:
            print('\t[LLM] {}: cannot parse {!r}'.format(key, raw))
            n_err += 1
            continue
        if not ok(value):
            print('\t[LLM] {}: {} is not {}'.format(key, value, desc))
            n_err += 1
        else:
            print('\t[LLM] {}: {}, success'.format(key, value))
    return n_err


'''
Credentials are only needed for --live runs, a missing key is reported but
not an error
'''
def checkCredentials(cparser):
    key_env = 'OPENAI_API_KEY'
    endpoint = ''
    if cparser.has_section('LLM'):
        key_env = cparser['LLM'].get('api_key_env', key_env).strip() or key_env
        endpoint = cparser['LLM'].get('endpoint', '').strip()
    if os.environ.get(key_env, '').strip():
        print('\tAPI key found in ${}'.format(key_env))
    else:
        print('\tWarning: ${} is not set, only mock LLM clients '.format(
            key_env) + 'will be available (runs without --live)')
    print('\tEndpoint: {}'.format(endpoint if endpoint
        else 'library default (api.openai.com)'))


def setup():
    cparser = configparser.ConfigParser()
    cparser.optionxform = str
    assert os.path.exists(_config_path), \
            "default config file {} missing! Please redownload it\n".format(
                    _config_path)

    main_config_path = os.path.join(_root_dir, 'main.config')
    if os.path.exists(main_config_path):
        print('Main configuration file already exists: {}'.format(
            main_config_path))
        print('If you wish to regenerate configs, please delete the file above.')
        with open(main_config_path, 'r') as f:
            cparser.read_file(f)
        return cparser

    # initialize main config file using default config file
    with open(_config_path, 'r') as f:
        cparser.read_file(f)
    with open(main_config_path, 'w') as f:
        cparser.write(f)
    print('\n(Done) main.config written to {}'.format(main_config_path))
    print('If you would like to make manual changes, please directly edit {}'.format(
        main_config_path))
    return cparser


def main():
    parser = ArgumentParser(description='Create main.config and check the '
            'LLM settings of invsim.')
    parser.parse_args()

    configs = setup()
    print('\nChecking LLM settings...')
    num_err = checkLLMSection(configs)
    checkCredentials(configs)
    if num_err == 0:
        print('All settings are valid...')

    print('\nExiting invsim configuration setup...')
    sys.exit(num_err > 0)

if __name__ == "__main__":
    main()
