import numpy as np
import pytest

from famlvm import LongitudinalFamilyDataset, RngHandle


def make_tiny_dataset(n_fam=4, n_per_fam=2, t=2, j=2, binary=None, seed=0,
                      with_w=True, with_x=True, with_z=True, with_q=True):
    """A small, valid dataset with arbitrary (but reproducible) content."""
    gen = RngHandle(seed).generator
    rows = n_fam * n_per_fam * t
    fam = np.repeat(np.arange(n_fam), n_per_fam * t)
    ind = np.tile(np.repeat(np.arange(1, n_per_fam + 1), t), n_fam)
    time = np.tile(np.arange(1, t + 1), n_fam * n_per_fam)
    binary = np.zeros(j, dtype=bool) if binary is None else np.asarray(binary)
    y = gen.standard_normal((rows, j))
    for k in np.flatnonzero(binary):
        y[:, k] = (y[:, k] > 0).astype(float)
    return LongitudinalFamilyDataset.build(
        family=fam, individual=ind, time=time, y=y, binary=binary,
        w=gen.standard_normal((rows, 1)) if with_w else None,
        x=gen.standard_normal((rows, 2)) if with_x else None,
        z=np.ones((rows, 1)) if with_z else None,
        q=np.ones((rows, 1)) if with_q else None)


@pytest.fixture
def tiny_dataset():
    return make_tiny_dataset()
