import numpy as np
import pytest

from cprglove.core import COLS, ROWS, DualSample, Side, TactileFrame


def make_frame(side=Side.PALM, fill=4096, t_us=0, counts=None):
    if counts is None:
        counts = np.full((ROWS, COLS), fill, dtype=np.int32)
    return TactileFrame(side, counts, t_us)


def make_sample(seq=0, t_us=0, palm_counts=None, dorsum_counts=None):
    return DualSample(
        make_frame(Side.PALM, t_us=t_us, counts=palm_counts),
        make_frame(Side.DORSUM, t_us=t_us, counts=dorsum_counts),
        seq,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
