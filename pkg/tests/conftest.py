from fractions import Fraction

import numpy as np
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from posbasis.fnspace import PiecewiseFn

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

dyadic = st.builds(lambda n, k: Fraction(n, 2**k), st.integers(-16, 16), st.integers(0, 4))
rational = st.builds(Fraction, st.integers(-30, 30), st.integers(1, 12))
value = st.sampled_from([-3.0, -1.5, -1.0, -0.25, 0.0, 0.5, 1.0, 2.0, 7.0])


@st.composite
def piecewise(draw, points=rational, min_pieces=1, max_pieces=6):
    bps = sorted(set(draw(st.lists(points, min_size=min_pieces + 1, max_size=max_pieces + 1))))
    if len(bps) < 2:
        bps = [bps[0], bps[0] + 1]
    vals = draw(st.lists(value, min_size=len(bps) - 1, max_size=len(bps) - 1))
    return PiecewiseFn(bps, vals)


def rng(seed=0):
    return np.random.default_rng(seed)


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.SUMMARY:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.SUMMARY):
            terminalreporter.write_line(line)
