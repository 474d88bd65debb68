"""Minimum honest-resource fraction for safe committee consensus.

A committee draw fails when honest seats do not clear the threshold
(``V_h <= t_h``) or when honest seats plus doubled malicious seats reach
twice the threshold (``V_h + 2 V_m >= 2 t_h``, the BFT ``V_h > 2 V_m``
condition broken). With ``p = v_e / R`` and ``R_h = c R`` the expected
seat counts are ``c v_e`` and ``(1 - c) v_e``.

Two routes give the smallest safe ``c``:

* closed forms from Chernoff/Bernstein tail bounds (``c_honest_chernoff``,
  ``c_combined_closed``, ``c_combined_numeric``, ``c_approx``);
* exact tails of the seat-count distribution (``c_exact``,
  ``failure_prob``), Binomial for a finite ``R`` or the Poisson limit
  ``R -> inf`` when no ``R`` is given.

Probabilities are natural logs throughout; ``LOG_ZERO`` (``-inf``) is the
zero-probability value. Bound functions return the raw boundary value of
``c``, which may exceed 1; callers treat ``c > 1`` as infeasible.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InfeasibleBoundError, ParameterError
from .sortition import threshold_count

LOG_ZERO = -math.inf
# relative size below which a further series term cannot change the sum
_SERIES_EPS = 1e-17
# pmf windows cover mean +/- (_WINDOW_SD * sd + _WINDOW_PAD); mass outside < 1e-30
_WINDOW_SD = 15.0
_WINDOW_PAD = 40
CHERNOFF_TOL = 1e-6
EXACT_TOL = 1e-4


def log1mexp(x: float) -> float:
    """log(1 - exp(x)) for x <= 0."""
    if x == 0.0:
        return LOG_ZERO
    if x > -math.log(2.0):
        return math.log(-math.expm1(x))
    return math.log1p(-math.exp(x))


def _check_prob(p):
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"probability must lie in [0, 1], got {p}")


# ---------------------------------------------------------------------------
# exact tails


def log_binomial_pmf(n: int, k: int, p: float) -> float:
    _check_prob(p)
    if k < 0 or k > n:
        return LOG_ZERO
    if p == 0.0:
        return 0.0 if k == 0 else LOG_ZERO
    if p == 1.0:
        return 0.0 if k == n else LOG_ZERO
    return (math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
            + k * math.log(p) + (n - k) * math.log1p(-p))


def log_poisson_pmf(lam: float, k: int) -> float:
    if k < 0:
        return LOG_ZERO
    if lam == 0.0:
        return 0.0 if k == 0 else LOG_ZERO
    return -lam + k * math.log(lam) - math.lgamma(k + 1)


def _binom_sum_down(n, k, p):
    # log P(X <= k), valid when pmf decreases going down from k
    q_over_p = (1.0 - p) / p
    total = term = 1.0
    for i in range(k, 0, -1):
        term *= i / (n - i + 1) * q_over_p
        total += term
        if term < total * _SERIES_EPS:
            break
    return log_binomial_pmf(n, k, p) + math.log(total)


def _binom_sum_up(n, k, p):
    # log P(X >= k), valid when pmf decreases going up from k
    p_over_q = p / (1.0 - p)
    total = term = 1.0
    for i in range(k, n):
        term *= (n - i) / (i + 1) * p_over_q
        total += term
        if term < total * _SERIES_EPS:
            break
    return log_binomial_pmf(n, k, p) + math.log(total)


def binomial_tail_le(n: int, k: int, p: float) -> float:
    """log P(Binomial(n, p) <= k)."""
    _check_prob(p)
    if k < 0:
        return LOG_ZERO
    if k >= n or p == 0.0:
        return 0.0
    if p == 1.0:
        return LOG_ZERO
    if k < (n + 1) * p:
        return _binom_sum_down(n, k, p)
    return log1mexp(_binom_sum_up(n, k + 1, p))


def binomial_tail_ge(n: int, k: int, p: float) -> float:
    """log P(Binomial(n, p) >= k)."""
    _check_prob(p)
    if k <= 0:
        return 0.0
    if k > n or p == 0.0:
        return LOG_ZERO
    if p == 1.0:
        return 0.0
    if k - 1 < (n + 1) * p:
        return log1mexp(binomial_tail_le(n, k - 1, p))
    return _binom_sum_up(n, k, p)


def _poisson_sum_down(lam, k):
    total = term = 1.0
    for i in range(k, 0, -1):
        term *= i / lam
        total += term
        if term < total * _SERIES_EPS:
            break
    return log_poisson_pmf(lam, k) + math.log(total)


def _poisson_sum_up(lam, k):
    total = term = 1.0
    i = k
    while True:
        i += 1
        term *= lam / i
        total += term
        if term < total * _SERIES_EPS:
            break
    return log_poisson_pmf(lam, k) + math.log(total)


def poisson_tail_le(lam: float, k: int) -> float:
    """log P(Poisson(lam) <= k)."""
    if lam < 0:
        raise ParameterError(f"Poisson mean must be >= 0, got {lam}")
    if k < 0:
        return LOG_ZERO
    if lam == 0.0:
        return 0.0
    if k < lam:
        return _poisson_sum_down(lam, k)
    return log1mexp(_poisson_sum_up(lam, k + 1))


def poisson_tail_ge(lam: float, k: int) -> float:
    """log P(Poisson(lam) >= k)."""
    if lam < 0:
        raise ParameterError(f"Poisson mean must be >= 0, got {lam}")
    if k <= 0:
        return 0.0
    if lam == 0.0:
        return LOG_ZERO
    if k - 1 < lam:
        return log1mexp(poisson_tail_le(lam, k - 1))
    return _poisson_sum_up(lam, k)


def _seat_model(c, v_e, R):
    """(honest, malicious) seat distributions as ("binom", n, p) / ("poisson", lam)."""
    if R is None:
        return ("poisson", c * v_e), ("poisson", (1.0 - c) * v_e)
    if R < v_e:
        raise ParameterError(f"R = {R} is smaller than v_e = {v_e}")
    r_h = round(c * R)
    p = v_e / R
    return ("binom", r_h, p), ("binom", R - r_h, p)


def _tail_le(model, k):
    if model[0] == "poisson":
        return poisson_tail_le(model[1], k)
    return binomial_tail_le(model[1], k, model[2])


def _log_pmf_window(model, upto=None):
    """(lo, log pmf over lo..hi) by ratio recurrence outward from the mode.

    ``upto`` extends the upper end so survival values up to that point are
    available.
    """
    if model[0] == "poisson":
        lam = model[1]
        if lam == 0.0:
            return 0, np.zeros(1)
        mean, sd, n = lam, math.sqrt(lam), None
        mode = math.floor(lam)
        anchor = log_poisson_pmf(lam, mode)
    else:
        _, n, p = model
        if n == 0 or p == 0.0:
            return 0, np.zeros(1)
        if p == 1.0:
            return n, np.zeros(1)
        mean, sd = n * p, math.sqrt(n * p * (1 - p))
        mode = min(n, math.floor((n + 1) * p))
        anchor = log_binomial_pmf(n, mode, p)
    lo = max(0, math.floor(mean - _WINDOW_SD * sd - _WINDOW_PAD))
    hi = math.ceil(max(mean, upto if upto is not None else mean) + _WINDOW_SD * sd + _WINDOW_PAD)
    if n is not None:
        hi = min(n, hi)
    up = np.arange(mode, hi, dtype=np.float64)  # i -> i + 1
    down = np.arange(mode, lo, -1, dtype=np.float64)  # i -> i - 1
    if model[0] == "poisson":
        step_up = np.log(lam / (up + 1))
        step_down = np.log(down / lam)
    else:
        step_up = np.log((n - up) / (up + 1)) + math.log(p / (1 - p))
        step_down = np.log(down / (n - down + 1)) + math.log((1 - p) / p)
    upper = anchor + np.cumsum(step_up)
    lower = anchor + np.cumsum(step_down)
    return lo, np.concatenate((lower[::-1], [anchor], upper))


def _log_combined_tail(honest, malicious, t_h):
    """log P(V_h + 2 V_m >= 2 t_h) by exact lattice convolution."""
    m_lo, m_logpmf = _log_pmf_window(malicious)
    h_lo, h_logpmf = _log_pmf_window(honest, upto=2 * t_h - 2 * m_lo)
    # log survival: sf[i] = log P(V_h >= h_lo + i)
    sf = np.logaddexp.accumulate(h_logpmf[::-1])[::-1]
    s = 2 * t_h - 2 * (m_lo + np.arange(len(m_logpmf)))
    idx = s - h_lo
    log_sf = np.where(idx < 0, 0.0, LOG_ZERO)
    inside = (idx >= 0) & (idx < len(sf))
    log_sf[inside] = sf[idx[inside]]
    terms = m_logpmf + log_sf
    top = terms.max()
    if top == LOG_ZERO:
        return LOG_ZERO
    return float(top + math.log(np.exp(terms - top).sum()))


def failure_prob(c: float, t: float, v_e: float, R: Optional[int] = None) -> tuple[float, float]:
    """log P(V_h <= t_h) and log P(V_h + 2 V_m >= 2 t_h) at honest fraction ``c``.

    ``t_h = ceil(t * v_e)``. Seat counts are Binomial(c R, v_e / R) and
    Binomial((1 - c) R, v_e / R) when ``R`` is given, else their Poisson
    limits.
    """
    if not 0.0 <= c <= 1.0:
        raise ParameterError(f"c must lie in [0, 1], got {c}")
    t_h = threshold_count(t, v_e)
    honest, malicious = _seat_model(c, v_e, R)
    return _tail_le(honest, t_h), _log_combined_tail(honest, malicious, t_h)


# ---------------------------------------------------------------------------
# Chernoff / Bernstein bounds


def chernoff_honest_log(mean_h: float, t_h: float) -> float:
    """log of the bound exp(-(E V_h - t_h)^2 / (2 E V_h)) on P(V_h <= t_h)."""
    if mean_h <= t_h:
        return 0.0
    return -((mean_h - t_h) ** 2) / (2.0 * mean_h)


def chernoff_combined_log(mean_h: float, mean_m: float, t_h: float) -> float:
    """log of the Bernstein bound on P(V_h + 2 V_m >= 2 t_h)."""
    gap = 2.0 * t_h - (mean_h + 2.0 * mean_m)
    if gap <= 0:
        return 0.0
    return -(gap ** 2) / (2.0 * (mean_h + 4.0 * mean_m + 2.0 * gap / 3.0))


def _check_bound_args(t, v_e, F):
    if not 0 < t < 1:
        raise ParameterError(f"t must lie in (0, 1), got {t}")
    if not v_e > 0:
        raise ParameterError(f"v_e must be positive, got {v_e}")
    if not 0 < F <= 1:
        raise ParameterError(f"F must lie in (0, 1], got {F}")


def c_honest_chernoff(t: float, v_e: float, F: float) -> float:
    """Smallest c whose honest-seat Chernoff bound is at most F (continuous t_h)."""
    _check_bound_args(t, v_e, F)
    ln_f = math.log(F)
    t_h = t * v_e
    return t + (-ln_f + math.sqrt(-2.0 * t_h * ln_f + ln_f * ln_f)) / v_e


def c_combined_closed(t: float, v_e: float, F: float) -> Optional[float]:
    """Closed-form combined-event bound, or None when its radicand is negative.

    With ``A = 2 ln F / (3 v_e) < 0`` the radicand ``A (49 A + 40 t + 32)``
    is negative for every F < 1, so this only has a value at F = 1.
    """
    _check_bound_args(t, v_e, F)
    a = 2.0 * math.log(F) / (3.0 * v_e)
    disc = 49.0 * a * a + 40.0 * a * t + 32.0 * a
    if disc < 0:
        return None
    return (-4.0 * t - 7.0 * a + 4.0 + math.sqrt(disc)) / 2.0


def c_combined_numeric(t: float, v_e: float, F: float, tol: float = CHERNOFF_TOL) -> float:
    """Smallest c with chernoff_combined_log(c v_e, (1-c) v_e, t v_e) <= ln F.

    Bisection on (2 - 2t, (8 + 4t) / 7); the bound's variance term
    vanishes at the upper end, so a root always exists there.
    """
    _check_bound_args(t, v_e, F)
    if t <= 0.5:
        raise ParameterError(f"combined bound needs t > 0.5, got {t}")
    ln_f = math.log(F)
    t_h = t * v_e

    def ok(c):
        return chernoff_combined_log(c * v_e, (1.0 - c) * v_e, t_h) <= ln_f

    lo = 2.0 - 2.0 * t
    if ok(lo):
        return lo
    pole = (8.0 + 4.0 * t) / 7.0
    hi = lo + (pole - lo) * (1.0 - 1e-9)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def c_approx(t: float, v_e: float, F: float) -> float:
    """Chernoff lower bound on c: the larger of the honest and closed combined forms."""
    honest = c_honest_chernoff(t, v_e, F)
    combined = c_combined_closed(t, v_e, F)
    return honest if combined is None else max(honest, combined)


def c_exact(t: float, v_e: float, F: float, R: Optional[int] = None, tol: float = EXACT_TOL) -> float:
    """Smallest c with exact P(V_h <= t_h) <= F, by bisection to ``tol``.

    In the Poisson limit (``R`` omitted) the search continues past c = 1
    and the raw boundary is returned. With a finite ``R`` an honest
    fraction above 1 has no meaning and ``InfeasibleBoundError`` is raised.
    """
    _check_bound_args(t, v_e, F)
    ln_f = math.log(F)
    t_h = threshold_count(t, v_e)
    if R is None:
        def tail(c):
            return poisson_tail_le(c * v_e, t_h)
    else:
        if R < v_e:
            raise ParameterError(f"R = {R} is smaller than v_e = {v_e}")
        p = v_e / R

        def tail(c):
            return binomial_tail_le(round(c * R), t_h, p)

    lo, hi = 0.0, 1.0
    if tail(lo) <= ln_f:
        return lo
    while tail(hi) > ln_f:
        if R is not None:
            raise InfeasibleBoundError(f"no c <= 1 gives P(V_h <= {t_h}) <= {F} at R = {R}")
        lo, hi = hi, 2.0 * hi
        if hi > 1e6:
            raise InfeasibleBoundError("exact bound diverged")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if tail(mid) <= ln_f:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class BoundResult:
    t: float
    v_e: float
    F: float
    c_honest_closed: float
    c_combined_closed: Optional[float]
    c_combined_numeric: Optional[float]
    c_approx: float
    c_exact: Optional[float] = None
    R: Optional[int] = None

    @property
    def c_chernoff_both(self) -> float:
        """Chernoff requirement with both failure events, via the numeric combined root."""
        if self.c_combined_numeric is None:
            return self.c_honest_closed
        return max(self.c_honest_closed, self.c_combined_numeric)

    @property
    def feasible(self) -> bool:
        if self.c_approx > 1.0:
            return False
        return self.c_exact is None or self.c_exact <= 1.0

    def as_dict(self) -> dict:
        return {
            "t": self.t, "v_e": self.v_e, "F": self.F, "R": self.R,
            "c_honest_closed": self.c_honest_closed,
            "c_combined_closed": self.c_combined_closed,
            "c_combined_numeric": self.c_combined_numeric,
            "c_approx": self.c_approx,
            "c_exact": self.c_exact,
            "c_chernoff_both": self.c_chernoff_both,
            "feasible": self.feasible,
        }


def bound(t: float, v_e: float, F: float, R: Optional[int] = None, exact: bool = False) -> BoundResult:
    honest = c_honest_chernoff(t, v_e, F)
    numeric = c_combined_numeric(t, v_e, F) if t > 0.5 else None
    exact_c = None
    if exact:
        try:
            exact_c = c_exact(t, v_e, F, R)
        except InfeasibleBoundError:
            exact_c = math.inf
    return BoundResult(
        t=t, v_e=v_e, F=F,
        c_honest_closed=honest,
        c_combined_closed=c_combined_closed(t, v_e, F),
        c_combined_numeric=numeric,
        c_approx=c_approx(t, v_e, F),
        c_exact=exact_c,
        R=R,
    )


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepTable:
    columns: list[str]
    rows: list[tuple[float, ...]]
    params: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([row[i] for row in self.rows], dtype=np.float64)

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow(["%.10g" % v for v in row])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text

    @classmethod
    def from_csv(cls, text: str, params: Optional[dict] = None) -> SweepTable:
        reader = csv.reader(io.StringIO(text))
        columns = next(reader)
        rows = [tuple(float(v) for v in row) for row in reader if row]
        return cls(columns, rows, dict(params or {}))

    def to_json(self) -> str:
        return json.dumps({"params": self.params, "columns": self.columns,
                           "rows": [list(r) for r in self.rows]}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> SweepTable:
        data = json.loads(text)
        return cls(data["columns"], [tuple(r) for r in data["rows"]], data.get("params", {}))


def grid(start: float, stop: float, step: float) -> list[float]:
    """Inclusive arithmetic grid, values rounded to 10 decimals."""
    if step <= 0:
        raise ParameterError(f"step must be positive, got {step}")
    if start > stop:
        raise ParameterError(f"empty grid: start {start} > stop {stop}")
    count = math.floor((stop - start) / step + 1e-9) + 1
    return [round(start + i * step, 10) for i in range(count)]


def _strictly_increasing(xs):
    return all(b > a for a, b in zip(xs, xs[1:]))


def sweep_t(t_values, v_e: float, F: float, R: Optional[int] = None, exact: bool = True) -> SweepTable:
    """Lower bounds on c across threshold ratios t.

    Infeasible rows stay in the table with their flag set to 0. In
    finite-R mode an exact bound with no c <= 1 is written as 1.
    """
    ts = sorted(float(t) for t in t_values)
    if not ts or not _strictly_increasing(ts):
        raise ParameterError("t grid must be non-empty with distinct values")
    if ts[0] <= 0.5 or ts[-1] >= 1.0:
        raise ParameterError("t grid must lie within (0.5, 1)")
    rows = []
    for t in ts:
        approx = c_approx(t, v_e, F)
        row = [t, approx, float(approx <= 1.0)]
        if exact:
            try:
                ce = c_exact(t, v_e, F, R)
            except InfeasibleBoundError:
                ce = math.inf
            row += [min(ce, 1.0) if math.isinf(ce) else ce, float(ce <= 1.0)]
        rows.append(tuple(row))
    columns = ["t", "c_approx", "approx_feasible"]
    if exact:
        columns += ["c_exact", "exact_feasible"]
    return SweepTable(columns, rows, {"kind": "t", "v_e": v_e, "F": F, "R": R})


def sweep_failure(c_values, t: float, v_e: float, R: Optional[int] = None) -> SweepTable:
    """log10 failure probabilities against the malicious fraction 1 - c."""
    cs = sorted((float(c) for c in c_values), reverse=True)
    if not cs or not _strictly_increasing(cs[::-1]):
        raise ParameterError("c grid must be non-empty with distinct values")
    if cs[-1] < 0.0 or cs[0] > 1.0:
        raise ParameterError("c grid must lie within [0, 1]")
    ln10 = math.log(10.0)
    rows = []
    for c in cs:
        p1, p2 = failure_prob(c, t, v_e, R)
        rows.append((round(1.0 - c, 10), max(p1, p2) / ln10, p1 / ln10, p2 / ln10))
    return SweepTable(
        ["malicious_fraction", "log10_failure", "log10_p_honest", "log10_p_combined"],
        rows,
        {"kind": "failure", "t": t, "v_e": v_e, "R": R},
    )
