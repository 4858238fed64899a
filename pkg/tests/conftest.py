import numpy as np
import pytest
from hypothesis import strategies as st

from qubitdisc.bloch import Ensemble


def random_ensemble(rng, n=None, pure=False):
    if n is None:
        n = int(rng.integers(2, 7))
    priors = rng.random(n)
    priors /= priors.sum()
    v = rng.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    if not pure:
        v *= rng.random((n, 1))
    return Ensemble.from_bloch(priors, v)


@st.composite
def ensembles(draw, min_size=1, max_size=6):
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(min_size, max_size))
    pure = draw(st.booleans())
    return random_ensemble(np.random.default_rng(seed), n, pure)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"AC{n}: {'PASS' if ok else 'FAIL'}  {detail}")
