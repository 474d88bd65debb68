"""Monte Carlo validation of the sortition model at desk scale.

Trials use counter-based streams (trial ``i`` reads the stream keyed by
``(seed, i)``), so a scenario gives identical counts for any chunking or
number of worker threads. Failure probabilities around 1e-12 are far
beyond Monte Carlo reach; ``compare_to_bounds`` refuses targets below
``10 / trials`` and those are left to the exact tails in ``bounds``.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from statistics import NormalDist
from typing import Optional, Sequence, Union

import numpy as np
from scipy import stats

from . import bounds, kernels
from .errors import EstimabilityError, ParameterError
from .sortition import MechanismParams, Population, User, split_resource

CONFIDENCE = 0.99
CHUNK_TRIALS = 1 << 18
EXACT_SPLIT_LIMIT = 64


class ScenarioError(ValueError):
    pass


def wilson_interval(events: int, trials: int, confidence: float = CONFIDENCE) -> tuple[float, float]:
    if trials < 1:
        raise ParameterError("need at least one trial")
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    p_hat = events / trials
    z2n = z * z / trials
    center = (p_hat + z2n / 2) / (1 + z2n)
    half = z / (1 + z2n) * math.sqrt(p_hat * (1 - p_hat) / trials + z2n / (4 * trials))
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class ScenarioConfig:
    population: Population
    params: MechanismParams
    trials: int
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ParameterError(f"trials must be >= 1, got {self.trials}")
        if self.population.R != self.params.R:
            raise ParameterError(
                f"population holds R = {self.population.R} but params say R = {self.params.R}"
            )

    @classmethod
    def from_dict(cls, data: dict) -> ScenarioConfig:
        def need(obj, key, where):
            if not isinstance(obj, dict) or key not in obj:
                raise ScenarioError(f"{where}: missing field {key!r}")
            return obj[key]

        try:
            pop_spec = need(data, "population", "scenario")
            if "users" in pop_spec and isinstance(pop_spec["users"], list):
                users = []
                for i, u in enumerate(pop_spec["users"]):
                    where = f"scenario.population.users[{i}]"
                    users.append(User(int(need(u, "resource", where)), bool(u.get("honest", True))))
                population = Population(users)
            else:
                agg = need(pop_spec, "aggregate", "scenario.population")
                where = "scenario.population.aggregate"
                population = Population.from_aggregate(
                    R=int(need(agg, "R", where)),
                    c=float(need(agg, "c", where)),
                    n_users=int(need(agg, "users", where)),
                    rule=agg.get("rule", "even"),
                    seed=int(agg.get("seed", 0)),
                )
            prm = need(data, "params", "scenario")
            params = MechanismParams(
                v_e=float(need(prm, "v_e", "scenario.params")),
                F=float(need(prm, "F", "scenario.params")),
                t=float(need(prm, "t", "scenario.params")),
                R=int(prm.get("R", population.R)),
            )
            return cls(
                population=population,
                params=params,
                trials=int(need(data, "trials", "scenario")),
                seed=int(data.get("seed", 0)),
                workers=int(data.get("workers", 1)),
            )
        except ScenarioError:
            raise
        except (ParameterError, TypeError, ValueError) as exc:
            raise ScenarioError(f"scenario: {exc}") from exc

    @classmethod
    def load(cls, path: Union[str, Path]) -> ScenarioConfig:
        text = Path(path).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        return cls.from_dict(data)


@dataclass(frozen=True)
class FailureEstimate:
    trials: int
    events_honest: int
    events_combined: int
    p1_hat: float
    p2_hat: float
    p1_interval: tuple[float, float]
    p2_interval: tuple[float, float]


def simulate_totals(population: Population, p: float, trials: int, seed: int,
                    workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """(V_h, V_m) for each of ``trials`` committee draws."""
    if population.R < 1:
        raise ParameterError("population holds no resources")
    if not 0 < p <= 1:
        raise ParameterError(f"selection probability {p} outside (0, 1]")
    resources = population.resources
    honest = population.honest_mask
    spans = [(lo, min(trials, lo + CHUNK_TRIALS)) for lo in range(0, trials, CHUNK_TRIALS)]

    def run(span):
        return kernels.simulate_committees(resources, honest, p, seed, span[0], span[1])

    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, spans))
    else:
        parts = [run(s) for s in spans]
    return (np.concatenate([vh for vh, _ in parts]), np.concatenate([vm for _, vm in parts]))


def run_scenario(config: ScenarioConfig) -> FailureEstimate:
    params = config.params
    t_h = params.t_h
    vh, vm = simulate_totals(config.population, params.p, config.trials, config.seed, config.workers)
    e1 = int(np.count_nonzero(vh <= t_h))
    e2 = int(np.count_nonzero(vh + 2 * vm >= 2 * t_h))
    n = config.trials
    return FailureEstimate(
        trials=n,
        events_honest=e1,
        events_combined=e2,
        p1_hat=e1 / n,
        p2_hat=e2 / n,
        p1_interval=wilson_interval(e1, n),
        p2_interval=wilson_interval(e2, n),
    )


@dataclass(frozen=True)
class ComparisonReport:
    estimate: FailureEstimate
    exact_p1: float
    exact_p2: float
    chernoff_p1: float
    chernoff_p2: float
    chernoff_ok_p1: bool
    chernoff_ok_p2: bool
    ci_contains_exact_p1: bool
    ci_contains_exact_p2: bool

    @property
    def all_expected(self) -> bool:
        return (self.chernoff_ok_p1 and self.chernoff_ok_p2
                and self.ci_contains_exact_p1 and self.ci_contains_exact_p2)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["all_expected"] = self.all_expected
        return out


def required_trials(F: float) -> int:
    return math.ceil(10.0 / F)


def compare_to_bounds(config: ScenarioConfig, estimate: Optional[FailureEstimate] = None) -> ComparisonReport:
    """Set the Monte Carlo estimate beside the exact model and the Chernoff bounds.

    A Chernoff flag is True when the estimate minus three standard errors
    stays at or below the bound.
    """
    params = config.params
    if params.F < 10.0 / config.trials:
        need = required_trials(params.F)
        raise EstimabilityError(
            f"F = {params.F:g} is not estimable with {config.trials} trials; "
            f"at least {need} trials are required",
            need,
        )
    if estimate is None:
        estimate = run_scenario(config)
    pop = config.population
    t_h = params.t_h
    log1, log2 = bounds.failure_prob(pop.R_h / pop.R, params.t, params.v_e, pop.R)
    exact1, exact2 = math.exp(log1), math.exp(log2)
    mean_h, mean_m = params.p * pop.R_h, params.p * pop.R_m
    cher1 = math.exp(bounds.chernoff_honest_log(mean_h, t_h))
    cher2 = math.exp(bounds.chernoff_combined_log(mean_h, mean_m, t_h))
    n = estimate.trials

    def se(x):
        return math.sqrt(x * (1 - x) / n)

    return ComparisonReport(
        estimate=estimate,
        exact_p1=exact1,
        exact_p2=exact2,
        chernoff_p1=cher1,
        chernoff_p2=cher2,
        chernoff_ok_p1=estimate.p1_hat - 3 * se(estimate.p1_hat) <= cher1,
        chernoff_ok_p2=estimate.p2_hat - 3 * se(estimate.p2_hat) <= cher2,
        ci_contains_exact_p1=estimate.p1_interval[0] <= exact1 <= estimate.p1_interval[1],
        ci_contains_exact_p2=estimate.p2_interval[0] <= exact2 <= estimate.p2_interval[1],
    )


# ---------------------------------------------------------------------------
# split experiments


def split_user(user: User, parts: int, rule: str = "even", rng=None) -> list[User]:
    return [User(r, user.honest) for r in split_resource(user.resource, parts, rule, rng)]


def binomial_pmf(n: int, p: float) -> np.ndarray:
    return np.exp([bounds.log_binomial_pmf(n, k, p) for k in range(n + 1)])


def chi_square_gof(observed: np.ndarray, pmf: np.ndarray, min_expected: float = 5.0):
    """Pearson chi-square of counts against a pmf over the same support.

    Adjacent cells are pooled left to right until each expects at least
    ``min_expected`` counts. Returns (statistic, degrees of freedom, p-value).
    """
    observed = np.asarray(observed, dtype=np.float64)
    expected = np.asarray(pmf, dtype=np.float64) * observed.sum()
    obs_cells, exp_cells = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(observed, expected):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            obs_cells.append(o_acc)
            exp_cells.append(e_acc)
            o_acc = e_acc = 0.0
    if obs_cells:
        obs_cells[-1] += o_acc
        exp_cells[-1] += e_acc
    else:
        obs_cells, exp_cells = [o_acc], [e_acc]
    obs_cells, exp_cells = np.array(obs_cells), np.array(exp_cells)
    dof = len(obs_cells) - 1
    if dof < 1:
        return 0.0, 0, 1.0
    stat = float(((obs_cells - exp_cells) ** 2 / exp_cells).sum())
    return stat, dof, float(stats.chi2.sf(stat, dof))


@dataclass(frozen=True)
class SplitReport:
    method: str
    resource: int
    parts: tuple[int, ...]
    p: float
    max_pmf_deviation: Optional[float] = None
    chi_square: Optional[float] = None
    dof: Optional[int] = None
    p_value: Optional[float] = None
    mean: Optional[float] = None
    mean_stderr: Optional[float] = None


def split_equivalence_test(resource: int, parts: Union[int, Sequence[int]], p: float,
                           trials: int = 100_000, seed: int = 0, rule: str = "even",
                           method: str = "auto") -> SplitReport:
    """Compare the summed seats of a split holding with Binomial(resource, p).

    ``parts`` is a part count (split by ``rule``) or explicit sizes. Up to
    64 units the split pmf is convolved exactly; above that, or with
    ``method="monte-carlo"``, summed counts from ``trials`` draws are
    chi-square tested.
    """
    if isinstance(parts, int):
        sizes = tuple(split_resource(resource, parts, rule, np.random.default_rng(seed)))
    else:
        sizes = tuple(int(x) for x in parts)
        if sum(sizes) != resource or min(sizes) < 0:
            raise ParameterError(f"parts {sizes} do not split {resource}")
    if method == "auto":
        method = "exact" if resource <= EXACT_SPLIT_LIMIT else "monte-carlo"
    target = binomial_pmf(resource, p)

    if method == "exact":
        conv = np.array([1.0])
        for r in sizes:
            conv = np.convolve(conv, binomial_pmf(r, p))
        dev = float(np.max(np.abs(conv - target)))
        return SplitReport("exact", resource, sizes, p, max_pmf_deviation=dev,
                           mean=float(np.dot(np.arange(resource + 1), conv)))
    if method != "monte-carlo":
        raise ParameterError(f"unknown method {method!r}")

    population = Population([User(r) for r in sizes])
    vh, _ = simulate_totals(population, p, trials, seed)
    observed = np.bincount(vh, minlength=resource + 1)
    stat, dof, pval = chi_square_gof(observed, target)
    return SplitReport(
        "monte-carlo", resource, sizes, p,
        chi_square=stat, dof=dof, p_value=pval,
        mean=float(vh.mean()), mean_stderr=float(vh.std(ddof=1) / math.sqrt(trials)) if trials > 1 else None,
    )
