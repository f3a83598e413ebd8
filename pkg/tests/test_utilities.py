import pytest

from ctls.utilities import SEED_MASK, derive_seed


def test_derive_seed_stable():
    assert derive_seed(11, 200, 3) == derive_seed(11, 200, 3)


@pytest.mark.parametrize(
    "left,right",
    (
        ((0, 100, 1), (0, 100, 2)),
        ((0, 100, 1), (0, 1000, 1)),
        ((0, 100, 1), (1, 100, 1)),
        ((5, "observe"), (5, "noise")),
    ),
)
def test_derive_seed_distinct(left, right):
    assert derive_seed(*left) != derive_seed(*right)


def test_derive_seed_range():
    for base_seed in (0, 1, SEED_MASK, 2**70):
        assert 0 <= derive_seed(base_seed, "x") <= SEED_MASK
