import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rpesim import _kernels

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not available")

probs = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=6).filter(lambda v: sum(v) > 1e-3).map(
    lambda v: list(np.array(v) / sum(v)))


@needs_numba
@settings(max_examples=40, deadline=None)
@given(probs, st.integers(0, 2**64 - 1), st.integers(1, 3000), st.integers(0, 7), st.integers(0, 10**6))
def test_backends_agree_bit_for_bit(p, seed, shots, stream, start):
    a = _kernels.sample_counts(p, seed, shots, stream, start, backend="numba")
    b = _kernels.sample_counts(p, seed, shots, stream, start, backend="numpy")
    assert np.array_equal(a, b)


@settings(max_examples=40, deadline=None)
@given(probs, st.integers(0, 2**64 - 1), st.integers(2, 2000), st.data())
def test_chunking_does_not_change_counts(p, seed, shots, data):
    cut = data.draw(st.integers(1, shots - 1))
    whole = _kernels.sample_counts(p, seed, shots)
    first = _kernels.sample_counts(p, seed, cut)
    rest = _kernels.sample_counts(p, seed, shots - cut, start=cut)
    assert np.array_equal(whole, first + rest)


def test_streams_are_distinct():
    a = _kernels.sample_counts([0.5, 0.5], 1, 1000, stream=0)
    b = _kernels.sample_counts([0.5, 0.5], 1, 1000, stream=1)
    assert not np.array_equal(a, b)


def test_zero_probability_bins_never_hit():
    counts = _kernels.sample_counts([0.0, 1.0, 0.0], 3, 10_000)
    assert counts.tolist() == [0, 10_000, 0]


def test_invalid_probabilities():
    with pytest.raises(ValueError):
        _kernels.sample_counts([0.5, 0.4], 0, 10)
    with pytest.raises(ValueError):
        _kernels.sample_counts([1.5, -0.5], 0, 10)
    with pytest.raises(ValueError):
        _kernels.sample_counts([1.0], 0, 0)


def test_uniforms_are_uniform():
    u = _kernels._uniforms_np(_kernels.stream_key(5), 0, 200_000)
    assert 0.0 <= u.min() and u.max() < 1.0
    hist, _ = np.histogram(u, bins=20, range=(0, 1))
    expected = 200_000 / 20
    chi2 = ((hist - expected) ** 2 / expected).sum()
    assert chi2 < 45  # 19 dof, p ~ 1e-3


@needs_numba
def test_chsh_scan_backends_agree():
    rng = np.random.default_rng(0)
    t = rng.normal(size=(3, 3))
    vecs = [rng.normal(size=(500, 3)) for _ in range(4)]
    a = _kernels.chsh_scan(t, *vecs, backend="numba")
    b = _kernels.chsh_scan(t, *vecs, backend="numpy")
    assert np.allclose(a, b, atol=1e-12)


def test_env_flag_forces_numpy():
    env = dict(os.environ, RPESIM_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from rpesim import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    bad = subprocess.run([sys.executable, "-c",
                          "from rpesim import _kernels; _kernels.sample_counts([1.0], 0, 1, backend='numba')"],
                         env=env, capture_output=True, text=True)
    assert bad.returncode != 0
    assert "numba backend requested" in bad.stderr
