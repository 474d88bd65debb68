import numpy as np
import pytest

from committee_sortition import _pykernels, kernels


def test_selected_backend_is_known():
    assert kernels.BACKEND in ("cython", "python")


def test_uniforms_in_unit_interval(backend):
    u = backend.trial_uniforms(123, 7, 10_000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.01


def test_streams_differ_by_trial_and_seed(backend):
    a = backend.trial_uniforms(1, 0, 8)
    assert not np.array_equal(a, backend.trial_uniforms(1, 1, 8))
    assert not np.array_equal(a, backend.trial_uniforms(2, 0, 8))


def test_backends_share_streams(compiled):
    for seed, trial in [(0, 0), (2**64 - 1, 5), (12345, 10**12)]:
        assert compiled.stream_key(seed, trial) == _pykernels.stream_key(seed, trial)
        np.testing.assert_array_equal(
            compiled.trial_uniforms(seed, trial, 50), _pykernels.trial_uniforms(seed, trial, 50)
        )


@pytest.mark.parametrize("n,p", [
    (0, 0.3), (1, 0.05), (10, 0.5), (20, 0.2), (5000, 0.3), (7, 1.0), (9, 0.0),
    (31, 0.6), (32, 0.6), (33, 0.6),  # either side of the short-table scan
    (1_000_000, 0.004),  # leading pmf term underflows: rescaled walk
    (300_000, 0.5),
])
def test_backends_agree_on_quantiles(compiled, n, p):
    # the rescaled walk is O(n p) per draw in pure Python
    u = np.random.default_rng(n).random(3000 if n * p < 10_000 else 150)
    u[:3] = [0.0, 0.5, np.nextafter(1.0, 0.0)]
    fast = compiled.binom_quantile_many(u, n, p)
    ref = _pykernels.binom_quantile_many(u, n, p)
    np.testing.assert_array_equal(fast, ref)
    scalar = [_pykernels.binom_quantile(float(x), n, p) for x in u[:100]]
    np.testing.assert_array_equal(ref[:100], scalar)


@pytest.mark.parametrize("n,p", [(1, 0.05), (10, 0.5), (2000, 0.01), (40, 0.97)])
def test_cdf_tables_identical(compiled, n, p):
    np.testing.assert_array_equal(compiled.cdf_table(n, p), _pykernels.cdf_table(n, p))


def test_table_search_reproduces_walk(backend):
    n, p = 60, 0.3
    u = np.random.default_rng(3).random(2000)
    walked = [backend.binom_quantile(float(x), n, p) for x in u]
    np.testing.assert_array_equal(backend.binom_quantile_many(u, n, p), walked)


def test_quantile_stays_in_range(backend):
    for n, p in [(3, 0.999999), (50, 1e-9), (10, 0.5)]:
        for u in (0.0, 1e-300, 0.5, 1 - 2**-53):
            assert 0 <= backend.binom_quantile(u, n, p) <= n


def test_backends_agree_on_simulation(compiled):
    res = np.array([10] * 30 + [0, 1, 250_000, 400] + [7] * 10)
    honest = np.array([True] * 30 + [True, False, True, False] + [False] * 10)
    a = compiled.simulate_committees(res, honest, 0.004, 99, 17, 3017)
    b = _pykernels.simulate_committees(res, honest, 0.004, 99, 17, 3017)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_simulation_independent_of_chunking(backend):
    res = np.array([5, 9, 3])
    honest = np.array([True, False, True])
    whole = backend.simulate_committees(res, honest, 0.3, 5, 0, 1000)
    left = backend.simulate_committees(res, honest, 0.3, 5, 0, 400)
    right = backend.simulate_committees(res, honest, 0.3, 5, 400, 1000)
    np.testing.assert_array_equal(whole[0], np.concatenate([left[0], right[0]]))
    np.testing.assert_array_equal(whole[1], np.concatenate([left[1], right[1]]))


def test_simulation_uses_trial_uniforms(backend):
    # the user j draw of trial i is the quantile of counter j + 1 of stream (seed, i)
    res = np.array([10, 4])
    vh, vm = backend.simulate_committees(res, np.array([True, False]), 0.5, 77, 3, 4)
    u = backend.trial_uniforms(77, 3, 2)
    assert vh[0] == backend.binom_quantile(u[0], 10, 0.5)
    assert vm[0] == backend.binom_quantile(u[1], 4, 0.5)
