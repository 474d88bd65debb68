"""Pure-Python/numpy sampling kernels.

Reference implementation for ``_kernels.pyx``. Both backends perform the
same IEEE operations in the same order, so for a given seed they return
bit-identical results; tests hold them to that.

Random numbers come from a counter-based SplitMix64 construction: trial
``i`` of a run seeded with ``s`` owns the stream keyed by
``mix64(mix64(s) + i)``, and user ``j`` of that trial reads counter
``j + 1`` of the stream. Nothing depends on evaluation order.
"""
import math

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
TWO_M53 = 1.0 / 9007199254740992.0

# below this the leading pmf term underflows and the rescaled walk is used
LOG_UNDERFLOW = -700.0
RESCALE_AT = 1e280
RESCALE_BY = 1e-280
LOG_RESCALE = math.log(1e280)

_U11 = np.uint64(11)
_U27 = np.uint64(27)
_U30 = np.uint64(30)
_U31 = np.uint64(31)
_NP_MIX1 = np.uint64(MIX1)
_NP_MIX2 = np.uint64(MIX2)


def _exp(x):
    # libm semantics: overflow gives inf rather than raising
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def mix64(x):
    z = x & MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def stream_key(seed, trial):
    return mix64((mix64(seed) + trial) & MASK64)


def _mix64_array(z):
    z = (z ^ (z >> _U30)) * _NP_MIX1
    z = (z ^ (z >> _U27)) * _NP_MIX2
    return z ^ (z >> _U31)


def trial_uniforms(seed, trial, count):
    """Uniforms in [0, 1) for counters 1..count of one trial's stream."""
    key = stream_key(seed, trial)
    out = np.empty(count, dtype=np.float64)
    for j in range(count):
        z = mix64((key + (j + 1) * GOLDEN) & MASK64)
        out[j] = (z >> 11) * TWO_M53
    return out


def binom_quantile(u, n, p):
    """Smallest k with P(Binomial(n, p) <= k) > u."""
    if n <= 0 or p <= 0.0:
        return 0
    if p >= 1.0:
        return n
    if u <= 0.0:
        return 0
    ratio = p / (1.0 - p)
    mean = n * p
    log_pmf0 = n * math.log1p(-p)
    if log_pmf0 > LOG_UNDERFLOW:
        pmf = math.exp(log_pmf0)
        cum = pmf
        k = 0
        while cum <= u:
            if k == n:
                return n
            pmf = pmf * (n - k) / (k + 1) * ratio
            k += 1
            if pmf == 0.0 and k > mean:
                return n
            cum += pmf
        return k

    # pmf tracked relative to exp(scale); threshold is u in the same units
    scale = log_pmf0
    pmf = 1.0
    cum = 1.0
    thresh = u * _exp(-scale)
    k = 0
    while not cum > thresh:
        if k == n:
            return n
        pmf = pmf * (n - k) / (k + 1) * ratio
        k += 1
        if pmf == 0.0 and k > mean:
            return n
        cum += pmf
        if pmf > RESCALE_AT:
            pmf *= RESCALE_BY
            cum *= RESCALE_BY
            scale += LOG_RESCALE
            thresh = u * _exp(-scale)
    return k


def cdf_table(n, p):
    """Running CDF values visited by ``binom_quantile`` for (n, p).

    Returns None when the rescaled walk would be needed. Searching the
    table with ``searchsorted(..., side="right")`` and mapping an
    out-of-range index to ``n`` reproduces ``binom_quantile`` exactly.
    """
    if n <= 0 or p <= 0.0 or p >= 1.0:
        return None
    log_pmf0 = n * math.log1p(-p)
    if log_pmf0 <= LOG_UNDERFLOW:
        return None
    ratio = p / (1.0 - p)
    mean = n * p
    pmf = math.exp(log_pmf0)
    cum = pmf
    values = [cum]
    for k in range(n):
        pmf = pmf * (n - k) / (k + 1) * ratio
        if pmf == 0.0 and k + 1 > mean:
            break
        cum += pmf
        values.append(cum)
    return np.array(values, dtype=np.float64)


def _lookup(table, n, p, u):
    if n <= 0 or p <= 0.0:
        return np.zeros(u.shape, dtype=np.int64)
    if p >= 1.0:
        return np.full(u.shape, n, dtype=np.int64)
    if table is None:
        return np.array([binom_quantile(x, n, p) for x in u], dtype=np.int64)
    k = np.searchsorted(table, u, side="right").astype(np.int64)
    k[k >= len(table)] = n
    k[u <= 0.0] = 0
    return k


def binom_quantile_many(u, n, p):
    u = np.ascontiguousarray(u, dtype=np.float64)
    return _lookup(cdf_table(n, p), n, p, u)


def simulate_committees(resources, honest, p, seed, start, stop, chunk=1 << 16):
    """Per-trial honest and malicious sub-user totals for trials [start, stop)."""
    resources = np.asarray(resources, dtype=np.int64)
    honest = np.asarray(honest, dtype=bool)
    total = stop - start
    vh = np.zeros(total, dtype=np.int64)
    vm = np.zeros(total, dtype=np.int64)
    tables = {}
    key0 = np.uint64(mix64(seed))
    for lo in range(0, total, chunk):
        hi = min(total, lo + chunk)
        trials = np.arange(start + lo, start + hi, dtype=np.uint64)
        keys = _mix64_array(key0 + trials)
        for j, n in enumerate(resources.tolist()):
            if n <= 0:
                continue
            if n not in tables:
                tables[n] = cdf_table(n, p)
            z = _mix64_array(keys + np.uint64(((j + 1) * GOLDEN) & MASK64))
            u = (z >> _U11).astype(np.float64) * TWO_M53
            k = _lookup(tables[n], n, p, u)
            if honest[j]:
                vh[lo:hi] += k
            else:
                vm[lo:hi] += k
    return vh, vm
