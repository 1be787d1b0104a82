import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bulkadiabatic import _kernels
from bulkadiabatic._kernels import _pykernels

try:
    from bulkadiabatic._kernels import _ckernels
except ImportError:
    _ckernels = None

needs_c = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def _split_oracle(state, n_modes, positions):
    """Direct bit walk: move the listed modes to the front in order, count swaps."""
    occ = [(state >> (n_modes - 1 - j)) & 1 for j in range(n_modes)]
    local = 0
    for p in positions:
        local = (local << 1) | occ[p]
    rest = state
    for p in positions:
        rest &= ~(1 << (n_modes - 1 - p))
    # sign of moving each occupied selected mode past occupied unselected modes to its left
    sel = set(positions)
    swaps = sum(occ[p] * sum(occ[q] for q in range(p) if q not in sel) for p in positions)
    return local, rest, 1 - 2 * (swaps % 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 10), st.data())
def test_split_modes_against_bit_walk(n_modes, data):
    positions = sorted(data.draw(st.sets(st.integers(0, n_modes - 1), min_size=1, max_size=n_modes)))
    states = np.arange(1 << n_modes, dtype=np.int64)
    local, rest, sign = _pykernels.split_modes(states, n_modes, np.array(positions, dtype=np.int64))
    for s in range(1 << n_modes):
        assert (local[s], rest[s], sign[s]) == _split_oracle(s, n_modes, positions)


def test_cosine_sum_direct():
    rng = np.random.default_rng(1)
    x, c, h = rng.normal(size=7) * 3, rng.normal(size=50), 0.05
    ref = np.array([sum(c[i] * np.cos(xj * i * h) for i in range(c.size)) for xj in x])
    assert np.abs(_pykernels.cosine_sum(x, c, h) - ref).max() <= 1e-12
    assert np.abs(_pykernels.cosine_sum(np.zeros(3), c, h) - c.sum()).max() <= 1e-13


@needs_c
def test_backends_agree_cosine_sum():
    rng = np.random.default_rng(2)
    x = rng.uniform(-40, 40, size=300)
    c = rng.normal(size=20000)
    h = 0.01
    a = _pykernels.cosine_sum(x, c, h)
    b = _ckernels.cosine_sum(x, c, h)
    assert np.abs(a - b).max() <= 1e-10 * np.abs(c).sum()


@needs_c
@pytest.mark.parametrize("n_modes, positions", [(8, [0]), (8, [2, 3, 6]), (12, [0, 5, 11]), (16, list(range(0, 16, 3)))])
def test_backends_agree_split_modes(n_modes, positions):
    states = np.arange(1 << n_modes, dtype=np.int64)
    pos = np.array(positions, dtype=np.int64)
    for u, v in zip(_pykernels.split_modes(states, n_modes, pos), _ckernels.split_modes(states, n_modes, pos)):
        assert np.array_equal(np.asarray(u), np.asarray(v))


def test_backend_selection():
    assert _kernels.BACKEND == ("cython" if _ckernels is not None and not os.environ.get("BULKADIABATIC_PURE") else "numpy")
    env = dict(os.environ, BULKADIABATIC_PURE="1")
    out = subprocess.run([sys.executable, "-c", "from bulkadiabatic import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
