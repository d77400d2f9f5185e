import pytest

from ntpdetect.data import synth_generate

# one small point per learner, for harness tests where the hyperparameter
# surface is irrelevant and runtime matters
TINY_GRIDS = {
    "logreg": [{"C": 1.0, "penalty": "l2"}],
    "svm": [{"C": 1.0, "kernel": "linear"}],
    "gbt": [
        {
            "max_depth": 3,
            "learning_rate": 0.2,
            "min_child_weight": 1.0,
            "gamma": 0.01,
            "subsample": 0.7,
            "colsample": 0.7,
            "reg_alpha": 0.1,
            "reg_lambda": 1.0,
        }
    ],
}


@pytest.fixture(scope="session")
def separable_dataset():
    return synth_generate(200, 5.0, seed=101)


@pytest.fixture(scope="session")
def nosignal_dataset():
    return synth_generate(200, 0.0, seed=202)
