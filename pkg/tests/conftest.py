"""Shared test data builders."""

import numpy as np

from synthaudit.tabular import CATEGORICAL, NUMERICAL, Column, Schema, Table


MIX_SCHEMA = Schema((
    Column("num0", NUMERICAL),
    Column("num1", NUMERICAL),
    Column("cat0", CATEGORICAL, categories=("a", "b", "c")),
))

RICH_SCHEMA = Schema((
    *[Column(f"n{i}", NUMERICAL) for i in range(6)],
    Column("c1", CATEGORICAL, categories=("a", "b", "c")),
    Column("c2", CATEGORICAL, categories=("u", "v", "w", "x")),
))

RICH_MEANS = np.array([
    [-2.0, 0.0, 1.0, 0.0, -1.0, 2.0],
    [2.0, 1.0, -1.0, 0.5, 1.0, -2.0],
    [0.0, -2.0, 0.0, -1.5, 2.0, 0.0],
])
RICH_SCALES = np.array([1.0, 0.6, 1.4])


def rich_table(n, seed, id_offset=0):
    """Three-component Gaussian mixture over six numericals plus two
    categoricals. Wide enough for the discriminator to memorize individual
    rows, which the membership audits depend on."""
    rng = np.random.default_rng(seed)
    comp = rng.integers(0, 3, n)
    nums = RICH_MEANS[comp] + rng.normal(size=(n, 6)) * RICH_SCALES[comp][:, None]
    cat1 = np.array(["a", "b", "c"], dtype=object)[rng.integers(0, 3, n)]
    cat2 = np.array(["u", "v", "w", "x"], dtype=object)[(comp + rng.integers(0, 2, n)) % 4]
    cells = tuple([nums[:, i] for i in range(6)] + [cat1, cat2])
    row_ids = np.arange(id_offset, id_offset + n, dtype=np.int64)
    return Table(RICH_SCHEMA, cells, row_ids)


def mixture_table(n, seed, id_offset=0):
    """Two-component Gaussian mixture with a correlated categorical column.

    Continuous columns make rows distinct almost surely, which several
    membership tests rely on.
    """
    rng = np.random.default_rng(seed)
    comp = rng.integers(0, 2, n)
    num0 = np.where(comp == 0, rng.normal(-2.0, 1.0, n), rng.normal(2.0, 1.0, n))
    num1 = np.where(comp == 0, rng.normal(0.0, 0.5, n), rng.normal(1.0, 1.5, n))
    labels = np.array(["a", "b", "c"], dtype=object)
    weights = np.where(comp == 0, 0.2, 0.7)
    pick = rng.random(n)
    cat0 = np.where(pick < weights, labels[0], np.where(pick < weights + 0.2, labels[1], labels[2]))
    cells = (num0, num1, cat0.astype(object))
    row_ids = np.arange(id_offset, id_offset + n, dtype=np.int64)
    return Table(MIX_SCHEMA, cells, row_ids)


CLUSTER_SCHEMA = Schema((
    *[Column(f"n{i}", NUMERICAL) for i in range(6)],
    Column("c0", CATEGORICAL, categories=("a", "b", "c", "d")),
))

# Fixed center layout shared by every draw; new seeds vary only membership
# and jitter, so independent tables really are samples of one distribution.
CLUSTER_CENTERS = np.random.default_rng(9001).normal(size=(200, 6))


def clustered_table(n, seed, id_offset=0):
    """Many small, well-separated clusters. Points are far apart relative
    to a rule-of-thumb KDE bandwidth, so density-ratio attacks can resolve
    single memorized rows."""
    rng = np.random.default_rng(seed)
    comp = rng.integers(0, len(CLUSTER_CENTERS), n)
    nums = CLUSTER_CENTERS[comp] + rng.normal(size=(n, 6)) * 0.7
    cat0 = np.array(["a", "b", "c", "d"], dtype=object)[comp % 4]
    cells = tuple([nums[:, i] for i in range(6)] + [cat0])
    row_ids = np.arange(id_offset, id_offset + n, dtype=np.int64)
    return Table(CLUSTER_SCHEMA, cells, row_ids)
