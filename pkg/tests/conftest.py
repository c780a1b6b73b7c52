import os, shutil

import pytest

from configs import Configs, default_config_path
from src.scenarios import presetScenario

DATA_DIR = os.path.join(os.path.dirname(os.path.realpath(__file__)), 'data')


def readData(name):
    with open(os.path.join(DATA_DIR, name), 'r') as f:
        return f.read()


@pytest.fixture(autouse=True)
def quiet_configs():
    # no log files unless a test configures an output directory
    saved = Configs.snapshot()
    Configs.restore({k: None for k in saved})
    yield
    Configs.restore({k: None for k in saved})


@pytest.fixture
def outdir(tmp_path):
    Configs.setOutdir(str(tmp_path / 'out'))
    return Configs.outdir


@pytest.fixture
def main_config(tmp_path):
    path = str(tmp_path / 'main.config')
    shutil.copyfile(default_config_path, path)
    return path


@pytest.fixture
def constant():
    return presetScenario('constant')


@pytest.fixture
def variable():
    return presetScenario('variable')


@pytest.fixture
def reference_prompt():
    return readData('reference_prompt.txt')


@pytest.fixture
def reference_response():
    return readData('reference_response.txt')
