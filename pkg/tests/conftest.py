import shutil
from pathlib import Path

import numpy as np
import pytest

from semaff import synthetic
from semaff.alignment import AlignmentConfig, build_multilingual_space

GOLDEN = Path(__file__).parent / "golden"


def unit_rows(rng, n, d):
    m = rng.standard_normal((n, d))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy_dir(tmp_path):
    """Writable copy of the bundled toy dataset."""
    dest = tmp_path / "toy"
    shutil.copytree(synthetic.TOY_DIR, dest)
    return dest


@pytest.fixture
def toy_cfg(toy_dir):
    return toy_dir / "toy.cfg"


@pytest.fixture(scope="session")
def toy_world():
    return synthetic.make_toy_world()


@pytest.fixture(scope="session")
def toy_space(toy_world):
    cfg = AlignmentConfig(toy_world.pivot, {}, "procrustes", frozenset(toy_world.lexicon.all_forms()))
    return build_multilingual_space(cfg, toy_world.tables, toy_world.dictionaries)
