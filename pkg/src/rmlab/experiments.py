"""Monte Carlo experiments: CLT, error rates, bulk spectrum, exact identities.

Replication ``i`` always draws from stream ``(seed, i)`` and results are
reduced in index order, so every report is a pure function of the config and
does not depend on ``parallelism``.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import partial

import numpy as np

from . import linalg, stats, theory
from .errors import InvalidParams, NoConvergence, NonPositiveInput
from .matgen import MatrixParams, center, derive_stream, sample_matrix

PASS, FAIL, NA = "pass", "fail", "not-applicable"

DEFAULT_TOLERANCES = {
    # verify_clt
    "clt_mean": 0.3,
    "clt_var_ratio": 0.15,
    "clt_ks": 0.05,
    # error_scaling: allowed distance of each slope from its target
    "slope_est2": 0.35,
    "slope_est1": 0.3,
    # identity_checks
    "identity": 1e-8,
    "chain": 1e-9,
    "gram": 1e-8,
    "moment_ratio": 0.2,
    "edge_slack": 0.15,
    "edge_rate": 0.99,
    "centered_slack": 0.2,
    "centered_rate": 0.95,
    # bulk_check
    "bulk_moment": 0.03,
    "bulk_gap": 0.05,
}

EIGENSOLVERS = ("dense", "power")


@dataclass(frozen=True)
class ExperimentConfig:
    params: MatrixParams
    replications: int = 100
    parallelism: int = 1
    size_grid: tuple = None
    tolerances: dict = field(default_factory=dict)
    output_path: str = None
    eigensolver: str = "dense"

    def __post_init__(self):
        if self.replications < 1:
            raise InvalidParams(f"replications must be >= 1, got {self.replications}")
        if self.parallelism < 0:
            raise InvalidParams(f"parallelism must be >= 0, got {self.parallelism}")
        if self.eigensolver not in EIGENSOLVERS:
            raise InvalidParams(f"eigensolver must be one of {EIGENSOLVERS}")
        if self.size_grid is not None:
            grid = tuple((int(p), int(n)) for p, n in self.size_grid)
            if any(p < 1 or n < 1 for p, n in grid):
                raise InvalidParams(f"grid entries need p, n >= 1: {grid}")
            object.__setattr__(self, "size_grid", grid)
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise InvalidParams(f"unknown tolerance keys: {sorted(unknown)}")

    def tol(self, key):
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[key]))

    @property
    def workers(self):
        return self.parallelism or os.cpu_count() or 1


@dataclass(frozen=True)
class SpectralSample:
    rep_index: int
    lambda1: float
    lambda2: float
    est1: float
    est2: float
    lambda1_centered: float
    sum_sq_dev: float


FIELDS = tuple(SpectralSample.__dataclass_fields__)


def _plain(value):
    """JSON-friendly copy: numpy scalars to Python, NaN to None."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return None if math.isnan(value) else value
    if isinstance(value, np.integer):
        return int(value)
    return value


class _Report:
    def to_dict(self):
        out = {}
        for name in self.__dataclass_fields__:
            if name == "samples":
                continue
            value = getattr(self, name)
            if hasattr(value, "__dataclass_fields__") and not isinstance(value, type):
                value = asdict(value)
            out[name] = _plain(value)
        return out

    @property
    def passed(self):
        return all(v != FAIL for v in self.verdict.values())


def _within(value, target, tol):
    if value is None or not math.isfinite(value):
        return NA
    return PASS if abs(value - target) <= tol else FAIL


# -- replications -------------------------------------------------------------


def _solve(X, eigensolver, start=None):
    """lambda1, v1 by power iteration; lambda2 by the chosen route."""
    if eigensolver == "power":
        pair = linalg.top_two_eigenvalues(X, start=start)
        return pair
    lam1, v1, _, iterations = linalg.top_eigenpair(X, start=start)
    eig = linalg.gram_eigenvalues(X)
    lam2 = float(eig[1]) if eig.size > 1 else 0.0
    residual = float(np.linalg.norm(X @ (X.T @ v1) / X.shape[1] - lam1 * v1))
    return linalg.EigenPairTop(
        lambda1=lam1,
        lambda2=min(max(lam2, 0.0), lam1),
        v1=v1,
        iterations=iterations,
        residual=residual,
    )


def _largest(X, eigensolver, start=None):
    if eigensolver == "power":
        return linalg.top_eigenpair(X, start=start)[0]
    return max(float(linalg.gram_eigenvalues(X)[0]), 0.0)


def _retrying(fn, X, stream, index):
    """Run fn(X, start); on NoConvergence retry once from a seeded random start."""
    try:
        return fn(X, None)
    except NoConvergence:
        d = min(X.shape)
        start = stream.normals(X.size + d)[X.size :]
        try:
            return fn(X, start)
        except NoConvergence as exc:
            raise NoConvergence(exc.iterations, rep_index=index) from exc


def _replicate(params, index, eigensolver):
    stream = derive_stream(params.seed, index)
    X = sample_matrix(params, stream)
    est1 = linalg.estimator_one(X)
    est2 = linalg.estimator_two(X)
    rs = linalg.row_sums(X)
    l = theory.estimator_expectation(params.p, params.mu, params.sigma)
    dev = rs.values - l
    pair = _retrying(lambda A, s: _solve(A, eigensolver, s), X, stream, index)
    Xc = center(X, params.mu)
    lam1c = _retrying(lambda A, s: _largest(A, eigensolver, s), Xc, stream, index)
    sample = SpectralSample(
        rep_index=index,
        lambda1=float(pair.lambda1),
        lambda2=float(pair.lambda2),
        est1=est1,
        est2=est2,
        lambda1_centered=float(lam1c),
        sum_sq_dev=float(dev @ dev),
    )
    return sample, X, pair


def run_replication(params, index, eigensolver="dense"):
    """One deterministic replication: estimators, top eigenvalues, centered edge."""
    return _replicate(params, index, eigensolver)[0]


def _run_many(worker, indices, workers):
    indices = list(indices)
    if workers <= 1 or len(indices) <= 1:
        return [worker(i) for i in indices]
    chunk = max(1, len(indices) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, indices, chunksize=chunk))


def run_replications(config, params=None):
    params = params or config.params
    worker = partial(run_replication, params, eigensolver=config.eigensolver)
    return _run_many(worker, range(config.replications), config.workers)


def _params_dict(params):
    return {"p": params.p, "n": params.n, "mu": params.mu, "sigma": params.sigma, "seed": params.seed}


# -- CLT ----------------------------------------------------------------------


@dataclass
class CltReport(_Report):
    params: dict
    replications: int
    summary: stats.SummaryStats
    theoretical: theory.TheoryParams
    standardized_ks: stats.KsResult
    mean_error: float
    variance_ratio: float
    verdict: dict
    tolerances: dict
    samples: list = field(default=None, repr=False)


def verify_clt(config, samples=None):
    """Compare the Monte Carlo law of lambda1 with the normal limit."""
    p = config.params
    if samples is None:
        samples = run_replications(config)
    lam1 = np.array([s.lambda1 for s in samples])
    summary = stats.summarize(lam1)
    th = theory.clt_params(p.p, p.n, p.mu, p.sigma)
    mean_error = abs(summary.mean - th.clt_mean)
    variance_ratio = math.nan
    if summary.count > 1 and th.clt_var > 0:
        variance_ratio = summary.variance / th.clt_var
    ks = None
    if summary.count > 1 and th.clt_var > 0:
        z = (lam1 - th.clt_mean) / math.sqrt(th.clt_var)
        ks = stats.ks_statistic(z, stats.standard_normal_cdf)
    tols = {k: config.tol(k) for k in ("clt_mean", "clt_var_ratio", "clt_ks")}
    verdict = {
        "mean": PASS if mean_error <= tols["clt_mean"] else FAIL,
        "variance": _within(variance_ratio, 1.0, tols["clt_var_ratio"]),
        "ks": NA if ks is None else (PASS if ks.d_statistic <= tols["clt_ks"] else FAIL),
    }
    return CltReport(
        params=_params_dict(p),
        replications=len(samples),
        summary=summary,
        theoretical=th,
        standardized_ks=ks,
        mean_error=mean_error,
        variance_ratio=variance_ratio,
        verdict=verdict,
        tolerances=tols,
        samples=samples,
    )


# -- error scaling ------------------------------------------------------------


@dataclass
class ScalingReport(_Report):
    grid: list
    fit_est2: stats.RegressionFit
    fit_est1: stats.RegressionFit
    targets: dict
    verdict: dict
    tolerances: dict


def fit_scaling(grid, tolerances=None):
    """Log-log fits of the per-size median errors against p.

    ``grid`` rows are (p, n, median |est2 - lambda1|,
    median |est1 - lambda1 + p sigma^2 / n|). With n proportional to p the
    two medians should fall like p^-1 and p^-1/2.
    """
    tolerances = tolerances or {}
    tol2 = float(tolerances.get("slope_est2", DEFAULT_TOLERANCES["slope_est2"]))
    tol1 = float(tolerances.get("slope_est1", DEFAULT_TOLERANCES["slope_est1"]))
    rows = sorted((int(p), int(n), float(e2), float(e1)) for p, n, e2, e1 in grid)
    ps = [r[0] for r in rows]
    if len(set(ps)) != len(ps):
        raise InvalidParams(f"grid sizes must be strictly increasing in p: {ps}")
    fit2 = stats.loglog_slope([(r[0], r[2]) for r in rows])
    fit1 = stats.loglog_slope([(r[0], r[3]) for r in rows])
    targets = {"est2": -1.0, "est1": -0.5}
    return ScalingReport(
        grid=[list(r) for r in rows],
        fit_est2=fit2,
        fit_est1=fit1,
        targets=targets,
        verdict={
            "est2_slope": _within(fit2.slope, targets["est2"], tol2),
            "est1_slope": _within(fit1.slope, targets["est1"], tol1),
        },
        tolerances={"slope_est2": tol2, "slope_est1": tol1},
    )


def error_scaling(config):
    if not config.size_grid or len(config.size_grid) < 3:
        raise InvalidParams("error_scaling needs a size grid with at least 3 entries")
    base = config.params
    rows = []
    for p, n in sorted(config.size_grid):
        params = replace(base, p=p, n=n)
        samples = run_replications(config, params)
        correction = p * base.sigma**2 / n
        err2 = np.median([abs(s.est2 - s.lambda1) for s in samples])
        err1 = np.median([abs(s.est1 - s.lambda1 + correction) for s in samples])
        if err2 <= 0 or err1 <= 0:
            raise NonPositiveInput(f"median error is zero at p={p}, n={n}; degenerate config")
        rows.append((p, n, float(err2), float(err1)))
    return fit_scaling(rows, config.tolerances)


# -- identities ---------------------------------------------------------------


@dataclass(frozen=True)
class IdentityRecord:
    sample: SpectralSample
    ones_residual: float
    chain_ok: bool
    gram_gap: float
    interlacing_ok: bool
    monotone_ok: bool


def identity_replication(params, index, eigensolver="dense", chain_tol=1e-9):
    sample, X, pair = _replicate(params, index, eigensolver)
    W = linalg.covariance(X)
    l = theory.estimator_expectation(params.p, params.mu, params.sigma)
    ones = linalg.decompose_ones(W, pair, l).identity_residual
    slack = chain_tol * max(abs(sample.lambda1), 1e-300)
    chain_ok = sample.est1 <= sample.est2 + slack and sample.est2 <= sample.lambda1 + slack
    wide = np.linalg.eigvalsh(linalg.covariance(X.T) * X.shape[0] / X.shape[1])[::-1]
    narrow = np.linalg.eigvalsh(W)[::-1]
    d = min(X.shape)
    top = max(abs(narrow[0]), abs(wide[0]), 1e-300)
    gram_gap = float(np.max(np.abs(narrow[:d] - wide[:d]))) / top
    return IdentityRecord(
        sample=sample,
        ones_residual=ones,
        chain_ok=bool(chain_ok),
        gram_gap=gram_gap,
        interlacing_ok=bool(sample.lambda2 <= sample.lambda1_centered + slack),
        monotone_ok=bool(sample.lambda1_centered <= sample.lambda1 + slack),
    )


@dataclass
class IdentityReport(_Report):
    params: dict
    replications: int
    eq36_max_residual: float
    chain_violations: int
    gram_max_gap: float
    interlacing_violations: int
    monotone_violations: int
    moment_ratio: float
    edge_exceedance_rate: float
    centered_edge_rate: float
    verdict: dict
    tolerances: dict
    samples: list = field(default=None, repr=False)


def identity_checks(config):
    """Exact identities per replication plus the moment and edge statistics."""
    p = config.params
    worker = partial(
        identity_replication, p, eigensolver=config.eigensolver, chain_tol=config.tol("chain")
    )
    records = _run_many(worker, range(config.replications), config.workers)
    th = theory.clt_params(p.p, p.n, p.mu, p.sigma)
    tols = {
        k: config.tol(k)
        for k in (
            "identity", "chain", "gram", "moment_ratio",
            "edge_slack", "edge_rate", "centered_slack", "centered_rate",
        )
    }
    leading = p.mu**2 * p.sigma**2 * p.p**3 / p.n
    moment_ratio = math.nan
    if leading > 0:
        moment_ratio = math.fsum(r.sample.sum_sq_dev for r in records) / len(records) / leading
    edge = th.b + tols["edge_slack"]
    exceed = sum(r.sample.lambda2 > edge for r in records) / len(records)
    centered = sum(
        abs(r.sample.lambda1_centered - th.b) <= tols["centered_slack"] for r in records
    ) / len(records)
    interlacing = sum(not r.interlacing_ok for r in records)
    monotone = sum(not r.monotone_ok for r in records)
    ones_max = max(r.ones_residual for r in records)
    gram_max = max(r.gram_gap for r in records)
    chain = sum(not r.chain_ok for r in records)
    noncentral = p.mu > 0
    verdict = {
        "ones_split": PASS if ones_max < tols["identity"] else FAIL,
        "chain": PASS if chain == 0 else FAIL,
        "gram": PASS if gram_max < tols["gram"] else FAIL,
        "interlacing": (PASS if interlacing == 0 else FAIL) if noncentral else NA,
        "monotone": (PASS if monotone == 0 else FAIL) if noncentral else NA,
        "moment": (
            _within(moment_ratio, 1.0, tols["moment_ratio"])
            if len(records) >= 50 else NA
        ),
        "edge": (PASS if 1.0 - exceed >= tols["edge_rate"] else FAIL) if p.p > 1 else NA,
        "centered_edge": PASS if centered >= tols["centered_rate"] else FAIL,
    }
    return IdentityReport(
        params=_params_dict(p),
        replications=len(records),
        eq36_max_residual=ones_max,
        chain_violations=chain,
        gram_max_gap=gram_max,
        interlacing_violations=interlacing,
        monotone_violations=monotone,
        moment_ratio=moment_ratio,
        edge_exceedance_rate=exceed,
        centered_edge_rate=centered,
        verdict=verdict,
        tolerances=tols,
        samples=[r.sample for r in records],
    )


# -- bulk spectrum ------------------------------------------------------------


@dataclass
class BulkReport(_Report):
    params: dict
    replications: int
    edges: list
    histogram_density: list
    expected_density: list
    interior_bins: list
    sup_gap: float
    spectral_moment: float
    edge_exceedance_rate: float
    verdict: dict
    tolerances: dict


def bulk_spectrum(params, index, size_limit=linalg.DEFAULT_SIZE_LIMIT):
    """Full spectrum of one replication, with lambda1 removed when mu > 0."""
    X = sample_matrix(params, derive_stream(params.seed, index))
    eig = linalg.full_spectrum(linalg.covariance(X), size_limit=size_limit)
    return eig[1:] if params.mu > 0 else eig


def expected_bin_density(edges, c, sigma):
    """Marchenko-Pastur mass of each bin divided by its width."""
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mass = theory.mp_integrate(lambda x: 1.0, c, sigma, lo=lo, hi=hi, tol=1e-10)
        out.append(mass / (hi - lo))
    return np.array(out)


def bulk_check(config, bins=40, lo=None, hi=None, size_limit=linalg.DEFAULT_SIZE_LIMIT):
    """Pooled empirical spectrum against the Marchenko-Pastur law.

    The histogram defaults to [a - 0.1, b + 0.1]. Only bins strictly inside
    (a, b) enter the sup-gap, and each is compared with the law's average
    density over the bin rather than its value at the midpoint.
    """
    p = config.params
    if p.p > size_limit:
        raise linalg.SizeExceeded(f"p={p.p} exceeds the full-spectrum limit {size_limit}")
    th = theory.clt_params(p.p, p.n, p.mu, p.sigma)
    tols = {k: config.tol(k) for k in ("bulk_moment", "bulk_gap", "edge_slack", "edge_rate")}
    worker = partial(bulk_spectrum, p, size_limit=size_limit)
    spectra = _run_many(worker, range(config.replications), config.workers)
    lo = th.a - 0.1 if lo is None else lo
    hi = th.b + 0.1 if hi is None else hi
    if p.p == 1 or p.sigma == 0:
        # one eigenvalue per replication, or no bulk at all
        return BulkReport(
            params=_params_dict(p), replications=config.replications,
            edges=[], histogram_density=[], expected_density=[], interior_bins=[],
            sup_gap=math.nan, spectral_moment=math.nan, edge_exceedance_rate=math.nan,
            verdict={"moment": NA, "histogram": NA, "edge": NA}, tolerances=tols,
        )
    pooled = np.concatenate(spectra)
    hist = stats.histogram(pooled, lo, hi, bins)
    expected = expected_bin_density(hist.edges, th.c, p.sigma)
    interior = [
        k for k in range(bins) if hist.edges[k] > th.a and hist.edges[k + 1] < th.b
    ]
    gaps = np.abs(hist.density - expected)
    sup_gap = float(np.max(gaps[interior])) if interior else math.nan
    moment = math.fsum(float(np.mean(s)) for s in spectra) / len(spectra)
    moment_err = abs(moment / p.sigma**2 - 1.0)
    verdict = {
        "moment": PASS if moment_err <= tols["bulk_moment"] else FAIL,
        "histogram": NA if not interior else (PASS if sup_gap <= tols["bulk_gap"] else FAIL),
    }
    exceed = math.nan
    if p.mu > 0:
        edge = th.b + tols["edge_slack"]
        exceed = sum(float(s[0]) > edge for s in spectra if s.size) / len(spectra)
        verdict["edge"] = PASS if 1.0 - exceed >= tols["edge_rate"] else FAIL
    else:
        verdict["edge"] = NA
    return BulkReport(
        params=_params_dict(p),
        replications=config.replications,
        edges=hist.edges.tolist(),
        histogram_density=hist.density.tolist(),
        expected_density=expected.tolist(),
        interior_bins=interior,
        sup_gap=sup_gap,
        spectral_moment=moment,
        edge_exceedance_rate=exceed,
        verdict=verdict,
        tolerances=tols,
    )
