import pytest

from vscstab.config import load_preset


@pytest.fixture(scope="session")
def default_cfg():
    return load_preset("paper_default")


@pytest.fixture(scope="session")
def default_params(default_cfg):
    return default_cfg.params
