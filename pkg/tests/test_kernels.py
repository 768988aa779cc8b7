"""numba kernels against their numpy twins."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from builders import pair_spec
from rdprivacy import _kernels as K
from rdprivacy._problem import Problem
from rdprivacy.oracle import compositions

needs_numba = pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba not installed")
MASK = (1 << 64) - 1


def splitmix_next(state: int) -> tuple[int, int]:
    """Reference SplitMix64 step on Python ints: (new state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return state, z ^ (z >> 31)


def test_splitmix_reference_vector():
    # first output of the generator seeded with 0
    assert splitmix_next(0)[1] == 0xE220A8397B1DCDAF
    assert int(K._mix_numpy(np.uint64(0x9E3779B97F4A7C15))) == 0xE220A8397B1DCDAF


@pytest.mark.parametrize("seed", [0, 1, 2**63 + 5, 2**64 - 1])
def test_row_uniforms_match_reference(seed):
    u = K.row_uniforms_numpy(np.uint64(seed), 5)
    for i in range(5):
        # row i: key = output i+1 of the stream at ``seed``, then one more step from key
        state = seed
        for _ in range(i + 1):
            state, key = splitmix_next(state)
        bits = splitmix_next(key)[1]
        assert u[i] == (bits >> 11) / 2.0**53


def test_backend_flag(tmp_path):
    code = "from rdprivacy import BACKEND; print(BACKEND)"
    env = dict(os.environ, RDPRIVACY_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "numpy"
    assert K.BACKEND == ("numba" if K.USE_NUMBA else "numpy")


@needs_numba
@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(0, 2**32 - 1), st.integers(1, 6),
       st.integers(0, 300))
def test_sampling_is_bit_identical(seed, table_seed, m, n):
    rng = np.random.default_rng(table_seed)
    cdf = np.cumsum(rng.dirichlet(np.ones(m), size=6), axis=1)
    cdf[:, -1] = 1.0
    codes = rng.integers(0, 6, size=n)
    a = K.sample_rows_numba(np.uint64(seed), codes, cdf)
    b = K.sample_rows_numpy(np.uint64(seed), codes, cdf)
    np.testing.assert_array_equal(a, b)


@needs_numba
@pytest.mark.parametrize("seed", range(5))
def test_blahut_arimoto_parity(seed):
    rng = np.random.default_rng(seed)
    n, m = rng.integers(2, 6, size=2)
    p = rng.dirichlet(np.ones(n))
    d = rng.uniform(0, 1, size=(n, m))
    a = np.exp(-float(rng.uniform(0.5, 8)) * (d - d.min(axis=1, keepdims=True)))
    q0 = np.full(m, 1.0 / m)
    Qa, qa, ia = K.ba_solve_numba(p, a, q0, 1e-12, 10_000)
    Qb, qb, ib = K.ba_solve_numpy(p, a, q0, 1e-12, 10_000)
    np.testing.assert_allclose(Qa, Qb, atol=1e-10)
    np.testing.assert_allclose(qa, qb, atol=1e-10)
    assert abs(ia - ib) <= 1


@needs_numba
@pytest.mark.parametrize("seed", range(4))
def test_mm_parity(seed):
    rng = np.random.default_rng(seed)
    prob = Problem.compile(pair_spec(rng, nz=2))
    nu = 3
    cost = rng.uniform(0, 1, size=(prob.ns, nu))
    q0 = rng.dirichlet(np.ones(nu), size=prob.ns)
    args = (prob.pxz, prob.s_of_x, prob.h_of_x, prob.ns, prob.nh, cost, 0.6, q0, 1e-12, 500)
    qa, ia = K.mm_solve_numba(*args)
    qb, ib = K.mm_solve_numpy(*args)
    np.testing.assert_allclose(qa, qb, atol=1e-9)
    assert abs(ia - ib) <= 1


@needs_numba
@pytest.mark.parametrize("seed", range(4))
def test_brute_scan_parity(seed):
    rng = np.random.default_rng(seed)
    prob = Problem.compile(pair_spec(rng))
    comps = compositions(6, 3)
    active = prob.active_s.astype(np.int64)
    dist = np.ascontiguousarray(prob.dist[0])
    for dmax, hmin in ((0.2, 0.0), (0.1, 0.3), (1.0, 0.5)):
        args = (prob.pxz, prob.s_of_x, prob.h_of_x, prob.r_of_x, prob.nh, active, comps, 6.0,
                dist, dmax, hmin)
        ra, _ = K.brute_scan_numba(*args)
        rb, _ = K.brute_scan_numpy(*args)
        assert ra == pytest.approx(rb, abs=1e-12)
