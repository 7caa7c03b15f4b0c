import pytest

from veriworld.grammar import ENV_IDS, library

GRIDWORLDS = ("colorswitch", "pushblock", "crafting")


@pytest.fixture(scope="session", params=ENV_IDS)
def any_env(request):
    return request.param


@pytest.fixture(scope="session", params=GRIDWORLDS)
def grid_env(request):
    return request.param


@pytest.fixture(scope="session")
def libs():
    return {env: library(env) for env in ENV_IDS}
