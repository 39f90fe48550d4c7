import sys
from pathlib import Path

import numpy as np
import pytest

sys.setrecursionlimit(10000)
sys.path.insert(0, str(Path(__file__).parent))

from impact_lattice.core import Configuration, ModelParams


def make_config(L, K, opinions, persuasion=None, support=None, **kw):
    params = ModelParams(L=L, K=K, **kw)
    n = L * L
    persuasion = np.zeros(n) if persuasion is None else persuasion
    support = np.zeros(n) if support is None else support
    return Configuration(params, np.asarray(opinions), np.asarray(persuasion, float), np.asarray(support, float))


@pytest.fixture
def random_config():
    def build(L, K, seed, **kw):
        rs = np.random.default_rng(seed)
        return make_config(L, K, rs.integers(0, K, L * L), rs.random(L * L), rs.random(L * L), **kw)

    return build
