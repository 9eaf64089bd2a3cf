import numpy as np
import pytest

from nlcms_elm import LabeledDataset, ScalingParams


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_dataset(X, y, train_frac=0.7, seed=0):
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    perm = np.random.default_rng(seed).permutation(n)
    k = max(1, min(n - 1, int(round(train_frac * n))))
    return LabeledDataset(
        features=X,
        labels=np.asarray(y, dtype=int),
        name="synthetic",
        train_idx=perm[:k],
        test_idx=perm[k:],
        scaling=ScalingParams(minimum=np.zeros(X.shape[1]), maximum=np.ones(X.shape[1])),
    )


@pytest.fixture
def toy_dataset():
    """Two Gaussian blobs in [0, 1]^6."""
    g = np.random.default_rng(7)
    n = 120
    y = np.arange(n) % 2
    centers = np.where(y[:, None] == 1, 0.65, 0.35)
    X = np.clip(centers + 0.08 * g.standard_normal((n, 6)), 0.0, 1.0)
    return make_dataset(X, y)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.RESULTS:
        terminalreporter.write_line(line)
