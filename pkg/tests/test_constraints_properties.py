"""Hypothesis wrappers around the randomized engine checks.

The predicates live in property_checks.py; hypothesis drives them with
fresh seeds and takes care of shrinking when something breaks.
"""

import random

from hypothesis import given, settings, strategies as st

import property_checks as pc

seeds = st.integers(min_value=0, max_value=2**48)


def wrap(check):
    @given(seeds)
    @settings(max_examples=60, deadline=None, derandomize=True)
    def run(seed):
        check(random.Random(seed))

    run.__name__ = f"test_{check.__name__}"
    return run


for _check in pc.ALL_CHECKS:
    _test = wrap(_check)
    globals()[_test.__name__] = _test
del _check, _test


def test_batch_smoke():
    counts = pc.run_batch(220, seed=7)
    assert sum(counts.values()) == 220
