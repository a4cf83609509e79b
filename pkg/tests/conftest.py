import numpy as np
import pytest

from mrdiff import Label, encode, gen_gaussian_mask, shepp_logan, synth_coils
from mrdiff.selfsup import SliceData


def make_slice(h, w, accel=4, n_coils=1, variant=0, n_contrasts=1, seed=0):
    """One synthetic acquisition with ground truth attached."""
    rng = np.random.default_rng([seed, variant])
    img = shepp_logan(h, w, variant)
    coils = synth_coils(h, w, n_coils, seed=int(rng.integers(2**63)))
    mask = gen_gaussian_mask(h, w, accel, seed=int(rng.integers(2**63)))
    y = encode(img, coils, mask)
    label = Label(accel=accel, contrast=variant % n_contrasts, n_contrasts=n_contrasts)
    return SliceData(y=y, mask=mask, coils=coils, label=label, truth=img)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
