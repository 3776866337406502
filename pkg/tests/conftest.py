import pytest

from opaque_planner.ltlf import dfa_over_model_labels
from opaque_planner.planner import product_mdp
from opaque_planner.scenarios import running_example
from opaque_planner.transducer import opaque_obs_dfa


@pytest.fixture(scope="session")
def model():
    return running_example()


@pytest.fixture(scope="session")
def task_dfa(model):
    return dfa_over_model_labels("F s4", model)


@pytest.fixture(scope="session")
def secret_dfa(model):
    return dfa_over_model_labels("F s6", model)


@pytest.fixture(scope="session")
def opaque_dfa(model, secret_dfa):
    return opaque_obs_dfa(model, secret_dfa)


@pytest.fixture(scope="session")
def pm(model, task_dfa, opaque_dfa):
    return product_mdp(model, task_dfa, opaque_dfa)
