# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sampling kernels; see ``_pykernels`` for the reference semantics."""
from libc.math cimport exp, log, log1p
from libc.stdint cimport int64_t, uint64_t, uint8_t

import numpy as np

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t MIX1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t MIX2 = 0x94D049BB133111EBULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0
cdef double LOG_UNDERFLOW = -700.0
cdef double RESCALE_AT = 1e280
cdef double RESCALE_BY = 1e-280
cdef double LOG_RESCALE = log(1e280)


cdef inline uint64_t _mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    return z ^ (z >> 31)


cdef inline double _uniform(uint64_t key, int64_t j) noexcept nogil:
    cdef uint64_t z = _mix64(key + <uint64_t>(j + 1) * GOLDEN)
    return <double>(z >> 11) * TWO_M53


cdef int64_t _quantile(double u, int64_t n, double p) noexcept nogil:
    cdef double ratio, mean, log_pmf0, pmf, cum, scale, thresh
    cdef int64_t k
    if n <= 0 or p <= 0.0:
        return 0
    if p >= 1.0:
        return n
    if u <= 0.0:
        return 0
    ratio = p / (1.0 - p)
    mean = n * p
    log_pmf0 = n * log1p(-p)
    if log_pmf0 > LOG_UNDERFLOW:
        pmf = exp(log_pmf0)
        cum = pmf
        k = 0
        while cum <= u:
            if k == n:
                return n
            pmf = pmf * <double>(n - k) / <double>(k + 1) * ratio
            k += 1
            if pmf == 0.0 and k > mean:
                return n
            cum += pmf
        return k

    scale = log_pmf0
    pmf = 1.0
    cum = 1.0
    thresh = u * exp(-scale)
    k = 0
    while not cum > thresh:
        if k == n:
            return n
        pmf = pmf * <double>(n - k) / <double>(k + 1) * ratio
        k += 1
        if pmf == 0.0 and k > mean:
            return n
        cum += pmf
        if pmf > RESCALE_AT:
            pmf *= RESCALE_BY
            cum *= RESCALE_BY
            scale += LOG_RESCALE
            thresh = u * exp(-scale)
    return k


cdef inline int64_t _table_lookup(const double[::1] table, int64_t off, int64_t length,
                                  int64_t n, double u) noexcept nogil:
    # upper bound: first index whose running CDF exceeds u
    cdef int64_t lo = 0, hi = length, mid
    if length <= 32:
        # the table is sorted, so counting entries <= u finds the same index without branches
        for mid in range(length):
            lo += table[off + mid] <= u
        return n if lo >= length else lo
    while lo < hi:
        mid = (lo + hi) >> 1
        if table[off + mid] <= u:
            lo = mid + 1
        else:
            hi = mid
    if lo >= length:
        return n
    return lo


def mix64(x):
    return _mix64(<uint64_t>(x & 0xFFFFFFFFFFFFFFFF))


def stream_key(seed, trial):
    return _mix64(_mix64(<uint64_t>(seed & 0xFFFFFFFFFFFFFFFF)) + <uint64_t>trial)


def trial_uniforms(seed, trial, Py_ssize_t count):
    cdef uint64_t key = stream_key(seed, trial)
    out = np.empty(count, dtype=np.float64)
    cdef double[::1] view = out
    cdef Py_ssize_t j
    for j in range(count):
        view[j] = _uniform(key, j)
    return out


def binom_quantile(double u, int64_t n, double p):
    """Smallest k with P(Binomial(n, p) <= k) > u."""
    return _quantile(u, n, p)


def cdf_table(int64_t n, double p):
    if n <= 0 or p <= 0.0 or p >= 1.0:
        return None
    cdef double log_pmf0 = n * log1p(-p)
    if log_pmf0 <= LOG_UNDERFLOW:
        return None
    cdef double ratio = p / (1.0 - p)
    cdef double mean = n * p
    cdef double pmf = exp(log_pmf0)
    cdef double cum = pmf
    cdef int64_t k
    values = [cum]
    for k in range(n):
        pmf = pmf * <double>(n - k) / <double>(k + 1) * ratio
        if pmf == 0.0 and k + 1 > mean:
            break
        cum += pmf
        values.append(cum)
    return np.array(values, dtype=np.float64)


def binom_quantile_many(u, int64_t n, double p):
    cdef const double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    out = np.empty(uv.shape[0], dtype=np.int64)
    cdef int64_t[::1] ov = out
    cdef Py_ssize_t i
    table = cdf_table(n, p)
    cdef const double[::1] tab
    cdef int64_t length
    if table is None:
        with nogil:
            for i in range(uv.shape[0]):
                ov[i] = _quantile(uv[i], n, p)
        return out
    tab = table
    length = tab.shape[0]
    with nogil:
        for i in range(uv.shape[0]):
            ov[i] = _table_lookup(tab, 0, length, n, uv[i])
    return out


def simulate_committees(resources, honest, double p, seed, int64_t start, int64_t stop):
    """Per-trial honest and malicious sub-user totals for trials [start, stop)."""
    cdef const int64_t[::1] res = np.ascontiguousarray(resources, dtype=np.int64)
    cdef const uint8_t[::1] hon = np.ascontiguousarray(honest, dtype=np.uint8)
    cdef Py_ssize_t m = res.shape[0]
    cdef int64_t total = stop - start

    # one CDF table per distinct resource value; -1 length marks the walk path
    offsets = np.zeros(m, dtype=np.int64)
    lengths = np.full(m, -1, dtype=np.int64)
    chunks = []
    seen = {}
    cdef int64_t used = 0
    for j in range(m):
        n = res[j]
        if n <= 0:
            lengths[j] = 0
            continue
        if n not in seen:
            table = cdf_table(n, p)
            if table is None:
                seen[n] = (0, -1)
            else:
                seen[n] = (used, len(table))
                chunks.append(table)
                used += len(table)
        offsets[j], lengths[j] = seen[n]
    flat = np.concatenate(chunks) if chunks else np.zeros(1, dtype=np.float64)

    cdef const double[::1] tab = flat
    cdef const int64_t[::1] off = offsets
    cdef const int64_t[::1] ln = lengths
    vh_arr = np.zeros(total, dtype=np.int64)
    vm_arr = np.zeros(total, dtype=np.int64)
    cdef int64_t[::1] vh = vh_arr
    cdef int64_t[::1] vm = vm_arr
    cdef uint64_t key0 = _mix64(<uint64_t>(seed & 0xFFFFFFFFFFFFFFFF))
    cdef uint64_t key
    cdef int64_t i, k, n_j, acc_h, acc_m
    cdef Py_ssize_t jj
    cdef double u

    with nogil:
        for i in range(total):
            key = _mix64(key0 + <uint64_t>(start + i))
            acc_h = 0
            acc_m = 0
            for jj in range(m):
                n_j = res[jj]
                if n_j <= 0:
                    continue
                u = _uniform(key, jj)
                if p >= 1.0:
                    k = n_j
                elif ln[jj] < 0:
                    k = _quantile(u, n_j, p)
                else:
                    k = _table_lookup(tab, off[jj], ln[jj], n_j, u)
                if hon[jj]:
                    acc_h += k
                else:
                    acc_m += k
            vh[i] = acc_h
            vm[i] = acc_m
    return vh_arr, vm_arr
