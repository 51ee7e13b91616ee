"""Backend checks: the jitted kernels against pure-Python twins and oracles."""

import os
import subprocess
import sys
import textwrap

import numpy as np
import pytest
import scipy.sparse
from scipy.sparse.csgraph import maximum_bipartite_matching

from melscribe import kernels


def random_csr(rng, n_left, n_right, density):
    """Adjacency in the (indptr, indices) form the kernels take."""
    rows = []
    for _ in range(n_left):
        k = rng.binomial(n_right, density)
        rows.append(np.sort(rng.choice(n_right, size=k, replace=False)))
    indptr = np.zeros(n_left + 1, dtype=np.int64)
    np.cumsum([len(r) for r in rows], out=indptr[1:])
    indices = (
        np.concatenate(rows).astype(np.int64)
        if rows and indptr[-1]
        else np.zeros(0, dtype=np.int64)
    )
    return indptr, indices


def scipy_match_count(indptr, indices, n_left, n_right):
    graph = scipy.sparse.csr_matrix(
        (np.ones(len(indices), dtype=np.int8), indices, indptr),
        shape=(n_left, n_right),
    )
    matching = maximum_bipartite_matching(graph, perm_type="column")
    return int((matching >= 0).sum())


def test_match_count_against_scipy():
    rng = np.random.default_rng(0)
    for trial in range(200):
        n_left = int(rng.integers(1, 20))
        n_right = int(rng.integers(1, 20))
        indptr, indices = random_csr(rng, n_left, n_right, float(rng.uniform(0, 0.5)))
        got = kernels.match_count(indptr, indices, n_left, n_right)
        want = scipy_match_count(indptr, indices, n_left, n_right)
        assert got == want, (trial, n_left, n_right)


def test_match_count_edge_cases():
    empty = np.zeros(0, dtype=np.int64)
    assert kernels.match_count(np.zeros(1, dtype=np.int64), empty, 0, 5) == 0
    assert kernels.match_count(np.zeros(4, dtype=np.int64), empty, 3, 0) == 0
    # complete bipartite graph saturates the smaller side
    indptr = np.array([0, 3, 6], dtype=np.int64)
    indices = np.array([0, 1, 2, 0, 1, 2], dtype=np.int64)
    assert kernels.match_count(indptr, indices, 2, 3) == 2


def test_match_count_python_twin_agrees():
    rng = np.random.default_rng(1)
    for _ in range(100):
        n_left = int(rng.integers(1, 15))
        n_right = int(rng.integers(1, 15))
        indptr, indices = random_csr(rng, n_left, n_right, 0.3)
        assert kernels._match_count_py(indptr, indices, n_left, n_right) == (
            scipy_match_count(indptr, indices, n_left, n_right)
        )


def test_pool_segments_means():
    rng = np.random.default_rng(2)
    frames = rng.normal(size=(50, 4))
    starts = np.array([0, 10, 10, 25, 50], dtype=np.int64)
    out, counts = kernels.pool_segments(frames, starts)
    assert counts.tolist() == [10, 0, 15, 25]
    assert np.allclose(out[0], frames[:10].mean(axis=0))
    assert np.all(out[1] == 0.0)  # empty cell stays zero
    assert np.allclose(out[2], frames[10:25].mean(axis=0))
    assert np.allclose(out[3], frames[25:].mean(axis=0))


def test_pool_segments_backends_agree():
    rng = np.random.default_rng(3)
    frames = rng.normal(size=(400, 16)).astype(np.float32)
    cuts = np.sort(rng.choice(400, size=30, replace=False))
    starts = np.concatenate([[0], cuts, [400]]).astype(np.int64)
    got, counts = kernels.pool_segments(frames, starts)
    ref, ref_counts = kernels._pool_segments_py(frames, starts)
    assert np.array_equal(counts, ref_counts)
    # both accumulate in float64; allow summation-order round-off only
    assert np.max(np.abs(got - ref)) < 1e-12


@pytest.mark.skipif(not kernels.HAS_NUMBA, reason="numba backend not active")
def test_env_flag_selects_fallback(tmp_path):
    code = textwrap.dedent(
        """
        import numpy as np
        from melscribe import kernels
        assert not kernels.HAS_NUMBA and kernels.NUMBA_DISABLED
        rng = np.random.default_rng(5)
        frames = rng.normal(size=(100, 8))
        starts = np.array([0, 30, 30, 71, 100], dtype=np.int64)
        out, counts = kernels.pool_segments(frames, starts)
        np.save("pool_out.npy", out)
        np.save("pool_counts.npy", counts)
        indptr = np.array([0, 2, 4, 5], dtype=np.int64)
        indices = np.array([0, 1, 0, 1, 2], dtype=np.int64)
        print(kernels.match_count(indptr, indices, 3, 3))
        """
    )
    env = dict(os.environ, MELSCRIBE_DISABLE_NUMBA="1")
    proc = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True,
        text=True,
        env=env,
        cwd=tmp_path,
    )
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == "3"

    rng = np.random.default_rng(5)
    frames = rng.normal(size=(100, 8))
    starts = np.array([0, 30, 30, 71, 100], dtype=np.int64)
    out, counts = kernels.pool_segments(frames, starts)
    fallback_out = np.load(tmp_path / "pool_out.npy")
    fallback_counts = np.load(tmp_path / "pool_counts.npy")
    assert np.array_equal(counts, fallback_counts)
    assert np.max(np.abs(out - fallback_out)) < 1e-12
