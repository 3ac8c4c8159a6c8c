"""Monte Carlo studies of the likelihood-ratio test and its corrections.

Replications draw beta responses on a fixed design, run the full test
battery, and aggregate rejection rates, moments, and quantiles of the
statistics.  Randomness is hierarchical: replication j consumes streams
derived from ``(base_seed, j)`` only, so results are independent of how
replications are distributed over worker processes.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .fit import FitError, Restriction
from .inference import _METHODS, BootstrapFailureError, BootstrapOptions, run_test
from .model import MU_CLAMP, Dataset, LinkFunction, logit_link
from .specfun import chisq_sf

_FAILURE_BUDGET = 0.01

_STAT_ATTR = {
    "lr": "lr",
    "b1": "lr_b1",
    "b2": "lr_b2",
    "b3": "lr_b3",
    "boot": "lr_boot",
}


class SimulationError(RuntimeError):
    """Raised when a study exceeds its replication failure budget."""


def _check_seed(value: int, name: str) -> None:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"{name} must be an integer")
    if value < 0:
        raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class SimConfig:
    """Design and execution parameters for one simulation cell.

    The mean model is logit(mu) = X beta with an intercept column and
    p - 1 covariates drawn once from Uniform(-0.5, 0.5) using
    ``covariate_seed``, then held fixed across replications.  ``delta``
    is added to the tested coefficients in the generator only; the
    hypothesis under test keeps the values stored in ``restriction``.
    """

    n: int
    p: int
    phi_true: float
    beta_true: tuple[float, ...]
    restriction: Restriction
    delta: float = 0.0
    reps: int = 2000
    boot_B: int = 500
    alpha_levels: tuple[float, ...] = (0.10, 0.05, 0.01)
    base_seed: int = 0
    covariate_seed: int = 0
    methods: tuple[str, ...] = _METHODS

    def __post_init__(self) -> None:
        for name in ("n", "p", "reps", "boot_B"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValueError(f"{name} must be an integer")
        if self.p < 1:
            raise ValueError("p must be at least 1")
        if self.n < self.p + 2:
            raise ValueError("n must be at least p + 2")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.boot_B < 1:
            raise ValueError("boot_B must be at least 1")
        beta = tuple(float(b) for b in self.beta_true)
        if len(beta) != self.p or not all(math.isfinite(b) for b in beta):
            raise ValueError("beta_true must be p finite values")
        object.__setattr__(self, "beta_true", beta)
        phi = float(self.phi_true)
        if not math.isfinite(phi) or phi <= 0.0:
            raise ValueError("phi_true must be positive and finite")
        object.__setattr__(self, "phi_true", phi)
        delta = float(self.delta)
        if not math.isfinite(delta):
            raise ValueError("delta must be finite")
        object.__setattr__(self, "delta", delta)
        if not isinstance(self.restriction, Restriction):
            raise ValueError("restriction must be a Restriction")
        if max(self.restriction.indices) > self.p:
            raise ValueError("restriction index exceeds p")
        alphas = tuple(float(a) for a in self.alpha_levels)
        if not alphas or any(not 0.0 < a < 1.0 for a in alphas):
            raise ValueError("alpha_levels must lie strictly inside (0, 1)")
        if len(set(alphas)) != len(alphas):
            raise ValueError("alpha_levels must be distinct")
        object.__setattr__(self, "alpha_levels", alphas)
        _check_seed(self.base_seed, "base_seed")
        _check_seed(self.covariate_seed, "covariate_seed")
        methods = tuple(self.methods)
        if not methods:
            raise ValueError("methods must be nonempty")
        for m in methods:
            if m not in _STAT_ATTR:
                raise ValueError(f"unknown method {m!r}")
        if len(set(methods)) != len(methods):
            raise ValueError("methods must be distinct")
        object.__setattr__(self, "methods", methods)


@dataclass(frozen=True)
class StatMoments:
    mean: float
    variance: float
    skewness: float
    kurtosis: float


@dataclass(frozen=True)
class StatQuantiles:
    p90: float
    p95: float
    p99: float


@dataclass(frozen=True)
class SimResult:
    """Aggregated output of one simulation cell.

    ``rejection_rates`` maps (statistic, alpha) to a fraction in [0, 1].
    ``statistic_archive`` holds the per-replication statistic values for
    the replications that succeeded, in replication order; the matching
    replication indices are in ``archive_reps``.  Kurtosis uses the
    non-excess convention (a chi-squared with 2 degrees of freedom has
    kurtosis 9).
    """

    rejection_rates: dict[tuple[str, float], float]
    statistic_archive: dict[str, np.ndarray]
    moments: dict[str, StatMoments]
    quantiles: dict[str, StatQuantiles]
    failures: int
    archive_reps: tuple[int, ...]


@dataclass(frozen=True)
class MomentTable:
    """Moments and quantiles per statistic, plus a `chisq` reference row."""

    moments: dict[str, StatMoments]
    quantiles: dict[str, StatQuantiles]


def gen_beta_sample(mu: np.ndarray, phi: float, rng: np.random.Generator) -> np.ndarray:
    """Draw independent beta responses with means mu and dispersion phi.

    Each y_i follows a beta law with shape parameters (mu_i phi,
    (1 - mu_i) phi), realised as a ratio of gamma variates and clamped
    away from the interval endpoints.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.ndim != 1 or mu.size == 0:
        raise ValueError("mu must be a nonempty vector")
    if not np.all((mu > 0.0) & (mu < 1.0)):
        raise ValueError("mu must lie strictly inside (0, 1)")
    phi = float(phi)
    if not math.isfinite(phi) or phi <= 0.0:
        raise ValueError("phi must be positive and finite")
    g1 = rng.standard_gamma(mu * phi)
    g2 = rng.standard_gamma((1.0 - mu) * phi)
    return np.clip(g1 / (g1 + g2), MU_CLAMP, 1.0 - MU_CLAMP)


def design_matrix(n: int, p: int, covariate_seed: int) -> np.ndarray:
    """Intercept column plus p - 1 covariates drawn from Uniform(-0.5, 0.5).

    The draw depends only on ``covariate_seed``, so a study's design is
    frozen across replications, worker processes, and reruns.
    """
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ValueError("n must be a positive integer")
    if isinstance(p, bool) or not isinstance(p, int) or p < 1:
        raise ValueError("p must be a positive integer")
    _check_seed(covariate_seed, "covariate_seed")
    rng = np.random.default_rng(np.random.SeedSequence(covariate_seed))
    X = np.empty((n, p))
    X[:, 0] = 1.0
    if p > 1:
        X[:, 1:] = rng.uniform(-0.5, 0.5, size=(n, p - 1))
    return X


def _replication(
    config: SimConfig, X: np.ndarray, link: LinkFunction, j: int
) -> dict[str, float] | None:
    """Run replication j; return its statistics, or None on failure."""
    data_rng = np.random.default_rng(
        np.random.SeedSequence(config.base_seed, spawn_key=(j, 0))
    )
    beta_gen = np.array(config.beta_true)
    for idx in config.restriction.indices:
        beta_gen[idx - 1] += config.delta
    mu = link.g_inv(X @ beta_gen)
    boot_opts = None
    if "boot" in config.methods:
        boot_seed = int(
            np.random.SeedSequence(config.base_seed, spawn_key=(j, 1)).generate_state(
                1, dtype=np.uint64
            )[0]
        )
        boot_opts = BootstrapOptions(B=config.boot_B, seed=boot_seed)
    try:
        y = gen_beta_sample(mu, config.phi_true, data_rng)
        report = run_test(
            Dataset(y, X),
            link,
            config.restriction,
            methods=config.methods,
            boot_opts=boot_opts,
        )
    except (FitError, BootstrapFailureError, ValueError):
        return None
    values = {m: float(getattr(report, _STAT_ATTR[m])) for m in config.methods}
    if not all(math.isfinite(v) for v in values.values()):
        return None
    return values


def _replication_block(
    config: SimConfig, indices: tuple[int, ...]
) -> list[tuple[int, dict[str, float] | None]]:
    X = design_matrix(config.n, config.p, config.covariate_seed)
    link = logit_link()
    return [(j, _replication(config, X, link, j)) for j in indices]


def _worker_count() -> int:
    raw = os.environ.get("BETABART_THREADS", "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        count = int(raw)
    except ValueError:
        raise ValueError(f"BETABART_THREADS must be an integer, got {raw!r}") from None
    if count < 0:
        raise ValueError("BETABART_THREADS must be nonnegative")
    return count if count > 0 else os.cpu_count() or 1


def _chunk_indices(reps: int, workers: int) -> list[tuple[int, ...]]:
    pieces = min(reps, workers * 4)
    bounds = [reps * i // pieces for i in range(pieces + 1)]
    return [tuple(range(bounds[i], bounds[i + 1])) for i in range(pieces)]


def _summarize(values: np.ndarray) -> tuple[StatMoments, StatQuantiles]:
    mean = float(values.mean())
    if values.size >= 2:
        variance = float(values.var(ddof=1))
        m2 = float(((values - mean) ** 2).mean())
    else:
        variance = float("nan")
        m2 = 0.0
    if m2 > 0.0:
        skewness = float(((values - mean) ** 3).mean()) / m2**1.5
        kurtosis = float(((values - mean) ** 4).mean()) / m2**2
    else:
        skewness = float("nan")
        kurtosis = float("nan")
    q90, q95, q99 = np.percentile(values, [90.0, 95.0, 99.0])
    moments = StatMoments(mean, variance, skewness, kurtosis)
    return moments, StatQuantiles(float(q90), float(q95), float(q99))


def _run_study(config: SimConfig) -> SimResult:
    workers = _worker_count()
    outcomes: dict[int, dict[str, float] | None] = {}
    if workers == 1:
        for j, values in _replication_block(config, tuple(range(config.reps))):
            outcomes[j] = values
    else:
        chunks = _chunk_indices(config.reps, workers)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_replication_block, config, chunk) for chunk in chunks]
            for future in futures:
                for j, values in future.result():
                    outcomes[j] = values

    survivors = tuple(j for j in range(config.reps) if outcomes[j] is not None)
    failures = config.reps - len(survivors)
    if failures > _FAILURE_BUDGET * config.reps:
        raise SimulationError(
            f"{failures} of {config.reps} replications failed, "
            f"exceeding the {_FAILURE_BUDGET:.0%} budget"
        )

    archive = {
        m: np.array([outcomes[j][m] for j in survivors]) for m in config.methods
    }
    q = len(config.restriction.indices)
    rates: dict[tuple[str, float], float] = {}
    moments: dict[str, StatMoments] = {}
    quantiles: dict[str, StatQuantiles] = {}
    for m in config.methods:
        values = archive[m]
        p_values = np.array([chisq_sf(max(v, 0.0), q) for v in values])
        for alpha in config.alpha_levels:
            rates[(m, alpha)] = float(np.mean(p_values <= alpha))
        moments[m], quantiles[m] = _summarize(values)
    return SimResult(rates, archive, moments, quantiles, failures, survivors)


def _require_null_design(config: SimConfig) -> None:
    restriction = config.restriction
    for idx, value in zip(restriction.indices, restriction.values):
        if config.beta_true[idx - 1] != value:
            raise ValueError(
                "beta_true must equal the restriction values at tested positions"
            )


def size_study(config: SimConfig) -> SimResult:
    """Null rejection rates: generate under the hypothesis and test it."""
    if config.delta != 0.0:
        raise ValueError("size_study requires delta = 0")
    _require_null_design(config)
    return _run_study(config)


def power_study(config: SimConfig) -> SimResult:
    """Nonnull rejection rates: tested coefficients are shifted by delta
    in the generator while the hypothesis still tests the stored values.
    With delta = 0 this reduces to the size study."""
    _require_null_design(config)
    return _run_study(config)


def _chisq_quantile(prob: float, df: int) -> float:
    """Inverse chi-squared CDF by bisection on the survival function."""
    target = 1.0 - prob
    hi = float(df) + 1.0
    while chisq_sf(hi, df) > target:
        hi *= 2.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chisq_sf(mid, df) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def null_moments(config: SimConfig) -> MomentTable:
    """Moments and quantiles of the statistics under the hypothesis,
    with an analytic chi-squared reference row keyed `chisq`."""
    if config.delta != 0.0:
        raise ValueError("null_moments requires delta = 0")
    _require_null_design(config)
    result = _run_study(config)
    moments = dict(result.moments)
    quantiles = dict(result.quantiles)
    q = len(config.restriction.indices)
    moments["chisq"] = StatMoments(
        mean=float(q),
        variance=2.0 * q,
        skewness=math.sqrt(8.0 / q),
        kurtosis=3.0 + 12.0 / q,
    )
    quantiles["chisq"] = StatQuantiles(
        p90=_chisq_quantile(0.90, q),
        p95=_chisq_quantile(0.95, q),
        p99=_chisq_quantile(0.99, q),
    )
    return MomentTable(moments, quantiles)


def write_rates_csv(result: SimResult, path: str | os.PathLike) -> None:
    """Write rejection rates as percentages, one row per (statistic, alpha)."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["statistic", "alpha", "rate"])
        for (statistic, alpha), rate in result.rejection_rates.items():
            writer.writerow([statistic, alpha, 100.0 * rate])


def write_archive_csv(result: SimResult, path: str | os.PathLike) -> None:
    """Write per-replication statistic values, one row per replication."""
    names = list(result.statistic_archive)
    columns = [result.statistic_archive[name] for name in names]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["rep"] + names)
        for i, j in enumerate(result.archive_reps):
            writer.writerow([j] + [float(col[i]) for col in columns])
