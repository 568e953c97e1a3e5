"""Simulation studies for the asymptotic covariances and the homogeneity test.

Every replication draws from its own generator seeded by ``(seed, rep)``, so
a study gives identical results whether it runs serially or split across
worker processes.  Wishart matrices use the Bartlett decomposition with
numpy's chi-squared and (ziggurat) normal samplers.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import stats

from . import linalg
from .asymptotics import assemble_v
from .errors import InvalidArgument, NotConverged, NotPositiveDefinite
from .inference import homogeneity_statistic
from .mle import FitOptions, fit
from .model import KINDS, CovParam, SampleSet, convert, weights_from_n

log = logging.getLogger(__name__)

MAX_FAILURE_RATE = 1e-3
MASK_FRACTION = 0.05


def sample_wishart(Sigma, n: int, rng: np.random.Generator) -> NDArray:
    """Draw an unbiased covariance estimate ``S`` with ``n S ~ W_p(Sigma, n)``."""
    A = linalg.cholesky_lower(Sigma)
    p = A.shape[0]
    if int(n) != n or n < p:
        raise InvalidArgument(f"degrees of freedom n={n} must be an integer >= p={p}")
    L = np.zeros((p, p))
    L[np.diag_indices(p)] = np.sqrt(rng.chisquare(n - np.arange(p)))
    rows, cols = np.tril_indices(p, -1)
    L[rows, cols] = rng.standard_normal(rows.size)
    AL = A @ L
    S = AL @ AL.T / n
    return 0.5 * (S + S.T)


@dataclass(frozen=True)
class SimConfig:
    c: Sequence[float]
    Sigma1: NDArray
    N: Sequence[int]
    reps: int = 1000
    seed: int = 0
    alpha: float = 0.05
    tol: float = 1e-10
    max_iter: int = 500

    def __post_init__(self):
        params = CovParam(np.asarray(self.c, dtype=float), np.asarray(self.Sigma1, dtype=float))
        N = tuple(int(v) for v in np.atleast_1d(self.N))
        if len(N) == 1 and params.K > 1:
            N = N * params.K
        if len(N) != params.K:
            raise InvalidArgument(f"need one sample size per group ({params.K}), got {len(N)}")
        if any(v <= params.p for v in N):
            raise InvalidArgument("every sample size N_k must exceed p")
        if self.reps < 100:
            raise InvalidArgument("a study needs at least 100 replications")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidArgument("alpha must lie in [0, 1]")
        object.__setattr__(self, "c", params.c)
        object.__setattr__(self, "Sigma1", params.Sigma1)
        object.__setattr__(self, "N", N)

    @property
    def params(self) -> CovParam:
        return CovParam(self.c, self.Sigma1)

    @property
    def K(self) -> int:
        return len(self.c)

    @property
    def p(self) -> int:
        return self.Sigma1.shape[0]

    @property
    def n(self) -> NDArray:
        return np.array(self.N, dtype=float) - 1.0

    @property
    def n_plus(self) -> float:
        return float(self.n.sum())

    def to_dict(self) -> dict:
        return {
            "c": [float(v) for v in self.c],
            "Sigma1": self.Sigma1.tolist(),
            "N": list(self.N),
            "reps": self.reps,
            "seed": self.seed,
            "alpha": self.alpha,
            "tol": self.tol,
            "max_iter": self.max_iter,
        }


@dataclass(frozen=True)
class CovarianceComparison:
    tag: str
    empirical: NDArray
    theoretical: NDArray
    mask: NDArray
    rel_error: NDArray  # NaN where masked out

    @property
    def max_rel_error(self) -> float:
        return float(np.nanmax(self.rel_error))

    def frobenius_error(self) -> float:
        return float(np.linalg.norm(self.empirical - self.theoretical) / np.linalg.norm(self.theoretical))

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "empirical": self.empirical.tolist(),
            "theoretical": self.theoretical.tolist(),
            "mask": self.mask.tolist(),
            "rel_error": [[None if np.isnan(v) else float(v) for v in row] for row in self.rel_error],
            "max_rel_error": self.max_rel_error,
        }


@dataclass(frozen=True)
class SimReport:
    study: str
    config: SimConfig
    n_ok: int
    n_failed: int
    comparisons: dict = field(default_factory=dict)
    rejection_rate: float | None = None
    rejection_se: float | None = None
    nominal_band: tuple[float, float] | None = None
    ks_statistic: float | None = None
    ks_pvalue: float | None = None
    p_values: NDArray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {
            "study": self.study,
            "config": self.config.to_dict(),
            "n_ok": self.n_ok,
            "n_failed": self.n_failed,
        }
        if self.study == "covariance":
            out["comparisons"] = {k: v.to_dict() for k, v in self.comparisons.items()}
        else:
            out.update(
                rejection_rate=self.rejection_rate,
                rejection_se=self.rejection_se,
                nominal_band=list(self.nominal_band),
                ks_statistic=self.ks_statistic,
                ks_pvalue=self.ks_pvalue,
            )
        return out


def compare_covariances(tag: str, empirical: NDArray, theoretical: NDArray) -> CovarianceComparison:
    """Relative errors on the entries with ``|V| > 0.05 max|V|``."""
    mask = np.abs(theoretical) > MASK_FRACTION * np.max(np.abs(theoretical))
    rel = np.full(theoretical.shape, np.nan)
    rel[mask] = np.abs(empirical[mask] - theoretical[mask]) / np.abs(theoretical[mask])
    return CovarianceComparison(tag, empirical, theoretical, mask, rel)


def _draw(cfg: SimConfig, rep: int) -> SampleSet:
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, rep]))
    covs = cfg.params.covariances()
    n = cfg.n.astype(int)
    return SampleSet.from_arrays([sample_wishart(covs[k], n[k], rng) for k in range(cfg.K)], n)


def _covariance_rep(cfg: SimConfig, rep: int, tags) -> dict | None:
    data = _draw(cfg, rep)
    try:
        res = fit(data, FitOptions(cfg.tol, cfg.max_iter))
    except NotPositiveDefinite:
        return None
    if not res.converged:
        return None
    return {t: convert(res.params, t).vector() for t in tags}


def _level_rep(cfg: SimConfig, rep: int) -> float | None:
    data = _draw(cfg, rep)
    try:
        res = fit(data, FitOptions(cfg.tol, cfg.max_iter))
    except NotPositiveDefinite:
        return None
    if not res.converged:
        return None
    return homogeneity_statistic(res.c, data.weights, data.n_plus, data.p).p_value


def _chunk(args):
    kind, cfg, reps, tags = args
    if kind == "covariance":
        return [_covariance_rep(cfg, r, tags) for r in reps]
    return [_level_rep(cfg, r) for r in reps]


def _run(kind: str, cfg: SimConfig, tags, workers: int) -> list:
    reps = range(cfg.reps)
    if workers <= 1:
        return _chunk((kind, cfg, reps, tags))
    chunks = [list(reps[i::workers]) for i in range(workers)]
    with ProcessPoolExecutor(workers) as ex:
        parts = list(ex.map(_chunk, [(kind, cfg, ch, tags) for ch in chunks]))
    out = [None] * cfg.reps
    for ch, part in zip(chunks, parts):
        for r, v in zip(ch, part):
            out[r] = v
    return out


def _check_failures(n_failed: int, reps: int):
    if n_failed > MAX_FAILURE_RATE * reps:
        raise NotConverged(f"{n_failed} of {reps} fits failed; study aborted")
    if n_failed:
        log.warning("%d of %d fits failed and were excluded", n_failed, reps)


def run_covariance_study(cfg: SimConfig, tags: Sequence[str] = KINDS, workers: int = 1) -> SimReport:
    """Empirical covariance of ``sqrt(n_+) (theta_hat - theta)`` against the closed forms.

    The closed-form covariances are evaluated at the true parameters.
    """
    for t in tags:
        if t not in KINDS:
            raise InvalidArgument(f"unknown parametrization {t!r}")
    results = _run("covariance", cfg, tuple(tags), workers)
    ok = [r for r in results if r is not None]
    n_failed = len(results) - len(ok)
    _check_failures(n_failed, cfg.reps)

    weights = weights_from_n(cfg.n)
    comparisons = {}
    for t in tags:
        theta = convert(cfg.params, t).vector()
        dev = np.sqrt(cfg.n_plus) * (np.array([r[t] for r in ok]) - theta)
        emp = np.atleast_2d(np.cov(dev, rowvar=False))
        V = assemble_v(cfg.params, weights, t).matrix
        comparisons[t] = compare_covariances(t, emp, V)
    return SimReport("covariance", cfg, len(ok), n_failed, comparisons)


def run_level_study(cfg: SimConfig, workers: int = 1) -> SimReport:
    """Empirical size of the homogeneity test at level ``cfg.alpha`` under equal covariances."""
    if cfg.K < 2:
        raise InvalidArgument("the level study needs at least two groups")
    if np.any(cfg.c != 1.0):
        raise InvalidArgument("the level study simulates the null: all coefficients must be 1")
    results = _run("level", cfg, (), workers)
    pv = np.array([v for v in results if v is not None])
    n_failed = len(results) - pv.size
    _check_failures(n_failed, cfg.reps)

    rate = float(np.mean(pv < cfg.alpha)) if cfg.alpha < 1.0 else 1.0
    se = float(np.sqrt(rate * (1.0 - rate) / pv.size))
    half = 3.0 * np.sqrt(cfg.alpha * (1.0 - cfg.alpha) / pv.size)
    ks = stats.kstest(pv, "uniform")
    return SimReport(
        "level", cfg, int(pv.size), n_failed,
        rejection_rate=rate,
        rejection_se=se,
        nominal_band=(max(0.0, cfg.alpha - half), min(1.0, cfg.alpha + half)),
        ks_statistic=float(ks.statistic),
        ks_pvalue=float(ks.pvalue),
        p_values=pv,
    )
