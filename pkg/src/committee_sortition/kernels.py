"""Backend selection for the sampling kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback in ``_pykernels``. Set ``COMMITTEE_SORTITION_PURE_PYTHON=1`` to
force the fallback. Both backends give bit-identical results.
"""
import os

if os.environ.get("COMMITTEE_SORTITION_PURE_PYTHON", "") not in ("", "0"):
    from . import _pykernels as _impl
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        from . import _pykernels as _impl
        BACKEND = "python"

binom_quantile = _impl.binom_quantile
binom_quantile_many = _impl.binom_quantile_many
cdf_table = _impl.cdf_table
simulate_committees = _impl.simulate_committees
stream_key = _impl.stream_key
trial_uniforms = _impl.trial_uniforms

__all__ = [
    "BACKEND",
    "binom_quantile",
    "binom_quantile_many",
    "cdf_table",
    "simulate_committees",
    "stream_key",
    "trial_uniforms",
]
