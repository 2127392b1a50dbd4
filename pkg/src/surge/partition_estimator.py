"""Partition-function estimation Z(g) = int exp(-L(theta)/g) dtheta and the
target-extraction pipeline built on it.

Randomness is always derived from ``(seed, stream, index)`` through
``numpy.random.SeedSequence`` so grid points can be evaluated in any order,
or concurrently, with identical results.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np
from scipy import special

from .series_core import (
    DegeneratePadeError,
    InvalidInputError,
    PowerSeries,
    Singularity,
    TargetSet,
    borel_transform,
    pade,
    pade_poles,
    ratio_test,
    scan_singularities,
    select_targets,
)

LOG_2PI = np.log(2 * np.pi)

# stream tags for seed derivation
_QUICK, _FULL, _VAR = 1, 2, 3


class EstimationError(RuntimeError):
    pass


class FitError(RuntimeError):
    pass


def _rng(seed, *counters) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, counters)]))


def _threads(requested=None) -> int:
    if requested:
        return max(1, int(requested))
    env = os.environ.get("SURGE_THREADS")
    return max(1, int(env)) if env else 1


@dataclass
class PartitionSample:
    g: float
    z: float
    stderr: float
    estimator: str = "mc"
    log_z: Optional[float] = None

    def __post_init__(self):
        if not self.z > 0:
            raise InvalidInputError("partition estimate must be positive")
        if not np.isfinite(self.stderr):
            raise InvalidInputError("stderr must be finite")
        if self.log_z is None:
            self.log_z = float(np.log(self.z))

    def to_dict(self) -> dict:
        return {"g": self.g, "z": self.z, "stderr": self.stderr, "log_z": self.log_z,
                "estimator": self.estimator}


@dataclass
class CouplingRange:
    g_min: float
    g_max: float
    score: float = 0.0

    def __post_init__(self):
        if not 0 < self.g_min < self.g_max:
            raise InvalidInputError("need 0 < g_min < g_max")

    def grid(self, size: int) -> np.ndarray:
        return np.geomspace(self.g_min, self.g_max, size)


@dataclass
class VariationalSampler:
    """Diagonal Gaussian q(u) = N(mean, exp(log_std)^2) plus the scalar c."""

    mean: np.ndarray
    log_std: np.ndarray
    c: float = 0.0

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std)


@dataclass
class AnalysisConfig:
    grid_size: int = 24
    series_order: int = 6
    eps: Optional[float] = None
    samples_per_g: int = 4096
    quick_samples: int = 256
    quick_probes: int = 5
    scan_points: int = 256
    scan_threshold: Optional[float] = None
    pade_m: int = 2
    pade_n: int = 3
    max_targets: int = 4
    ratio_window: int = 3
    proposal_scale: float = 1.0
    normalize_prefactor: bool = True
    factor_exponential: bool = True
    estimator: str = "mc"
    max_rel_stderr: float = 0.1
    seed: int = 0
    threads: Optional[int] = None

    def __post_init__(self):
        if self.series_order < 3:
            raise InvalidInputError("series_order must be at least 3")
        if self.grid_size < self.series_order + 2:
            raise InvalidInputError("grid_size must be at least series_order + 2")
        if self.estimator not in ("mc", "variational"):
            raise InvalidInputError(f"unknown estimator {self.estimator!r}")
        if self.scan_points < 8:
            raise InvalidInputError("scan_points must be at least 8")
        if not self.max_rel_stderr > 0:
            raise InvalidInputError("max_rel_stderr must be positive")


# ----------------------------------------------------------------------------
# proposals

@dataclass
class GaussianProposal:
    mean: np.ndarray
    var: float

    def sample(self, rng, n):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        std = np.sqrt(self.var)
        eps = rng.standard_normal((n, mean.size))
        theta = mean + std * eps
        logq = -0.5 * np.sum(eps**2, axis=1) - mean.size * (np.log(std) + 0.5 * LOG_2PI)
        return theta, logq


@dataclass
class UniformBoxProposal:
    low: np.ndarray
    high: np.ndarray

    def sample(self, rng, n):
        low = np.atleast_1d(np.asarray(self.low, dtype=float))
        high = np.atleast_1d(np.asarray(self.high, dtype=float))
        theta = rng.uniform(low, high, size=(n, low.size))
        logq = np.full(n, -np.sum(np.log(high - low)))
        return theta, logq


def default_proposal(theta0, g, scale: float = 1.0) -> GaussianProposal:
    """Gaussian centred at theta0 with covariance scale * g * I."""
    return GaussianProposal(np.atleast_1d(np.asarray(theta0, dtype=float)), scale * g)


def pipeline_proposal(objective, theta0, g, scale: float = 1.0):
    """Proposal used by the analysis: uniform on the objective's box when it
    has one (a uniform prior over the domain), else `default_proposal`."""
    if objective.bounds is not None:
        return UniformBoxProposal(*objective.bounds)
    return default_proposal(theta0, g, scale)


# ----------------------------------------------------------------------------
# estimators

def _summarize_log_weights(logw, g, estimator):
    logw = np.asarray(logw, dtype=float)
    top = np.max(logw)
    if not np.isfinite(top):
        raise EstimationError(f"all importance weights vanish at g={g:.3g}")
    r = np.exp(logw - top)
    mean_r = r.mean()
    log_z = float(top + np.log(mean_r))
    with np.errstate(over="ignore", under="ignore"):
        z = float(np.exp(log_z))
    if not (z > 0 and np.isfinite(z)):
        raise EstimationError(f"partition estimate under/overflows at g={g:.3g} (log Z = {log_z:.4g})")
    rel = r.std(ddof=1) / mean_r / np.sqrt(r.size) if r.size > 1 else 0.0
    return PartitionSample(float(g), z, float(z * rel), estimator, log_z)


def mc_partition(objective, proposal, g: float, n_samples: int = 4096, seed=0) -> PartitionSample:
    """Importance-sampling estimate (1/N) sum exp(-L(theta_i)/g) / q(theta_i)."""
    if not g > 0:
        raise InvalidInputError("g must be positive")
    if n_samples < 16:
        raise InvalidInputError("need at least 16 samples")
    rng = seed if isinstance(seed, np.random.Generator) else _rng(seed)
    theta, logq = proposal.sample(rng, n_samples)
    with np.errstate(over="ignore", invalid="ignore"):
        L = objective.batch(theta)
    logw = np.where(np.isfinite(L), -L / g - logq, -np.inf)
    return _summarize_log_weights(logw, g, "mc")


def inequality_objective(c: float, log_w) -> float:
    """-c - mean(exp(log_w - c)) + 1, maximised over c at c = log mean(exp(log_w))."""
    log_w = np.asarray(log_w, dtype=float)
    return float(-c - np.mean(np.exp(log_w - c)) + 1.0)


class _Adam:
    def __init__(self, lr, shape):
        self.lr, self.t = lr, 0
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)

    def ascend(self, x, grad):
        self.t += 1
        self.m = 0.9 * self.m + 0.1 * grad
        self.v = 0.999 * self.v + 0.001 * grad**2
        mh = self.m / (1 - 0.9**self.t)
        vh = self.v / (1 - 0.999**self.t)
        return x + self.lr * mh / (np.sqrt(vh) + 1e-8)


def variational_partition(objective, g: float, iterations: int = 300, step_size: float = 0.05,
                          batch: int = 64, seed=0, theta0=None, eval_samples: int = 4096):
    """Estimate log Z(g) by training a diagonal Gaussian sampler.

    The scalar c ascends J(c) = -c - E_q[exp(log w - c)] + 1 with
    log w = -L/g - log q, whose maximiser is c = log Z.  Because E_q[w] = Z
    for every sampler, J's expectation does not depend on the sampler; the
    sampler itself is trained on the reparameterised bound E_q[log w] so
    that w has low variance.  The returned c maximises J exactly on a final
    batch of `eval_samples` draws.

    Bounded objectives are sampled through a logistic map onto their box.
    """
    if iterations < 1:
        raise InvalidInputError("iterations must be >= 1")
    if not g > 0:
        raise InvalidInputError("g must be positive")
    d = objective.dim
    rng = seed if isinstance(seed, np.random.Generator) else _rng(seed, _VAR)
    bounds = objective.bounds

    def to_theta(u):
        if bounds is None:
            return u, np.zeros(u.shape[0]), np.ones_like(u), np.zeros_like(u)
        lo, hi = bounds
        s = special.expit(u)
        span = hi - lo
        jac = span * s * (1 - s)
        logjac = np.sum(np.log(span) + special.log_expit(u) + special.log_expit(-u), axis=1)
        return lo + span * s, logjac, jac, 1 - 2 * s

    def log_weights(mean, log_std, eps):
        u = mean + np.exp(log_std) * eps
        theta, logjac, jac, dlogjac = to_theta(u)
        logq = -0.5 * np.sum(eps**2, axis=1) - np.sum(log_std) - 0.5 * d * LOG_2PI
        with np.errstate(over="ignore", invalid="ignore"):
            L = objective.batch(theta)
        return -L / g + logjac - logq, u, theta, jac, dlogjac

    if theta0 is not None:
        start = np.atleast_1d(np.asarray(theta0, dtype=float))
    else:
        start = np.zeros(d)
    if bounds is not None:
        lo, hi = bounds
        frac = np.clip((start - lo) / (hi - lo), 1e-6, 1 - 1e-6) if theta0 is not None else np.full(d, 0.5)
        mean = special.logit(frac)
        log_std = np.zeros(d)
    else:
        mean = start.copy()
        log_std = np.full(d, 0.5 * np.log(g))

    psi = np.concatenate([mean, log_std])
    opt_psi = _Adam(step_size, psi.shape)
    eps = rng.standard_normal((batch, d))
    logw, *_ = log_weights(mean, log_std, eps)
    c = float(special.logsumexp(logw) - np.log(batch))
    opt_c = _Adam(step_size, ())
    for _ in range(iterations):
        eps = rng.standard_normal((batch, d))
        logw, u, theta, jac, dlogjac = log_weights(psi[:d], psi[d:], eps)
        finite = np.isfinite(logw)
        if not finite.any():
            raise EstimationError(f"sampler lost all mass at g={g:.3g}")
        gL = np.zeros_like(theta)
        gL[finite] = objective.batch_grad(theta[finite])
        du = -gL * jac / g + dlogjac
        gmean = du[finite].mean(axis=0)
        glog = (du * (u - psi[:d]))[finite].mean(axis=0) + 1.0
        psi = opt_psi.ascend(psi, np.concatenate([gmean, glog]))
        # dJ/dc = -1 + mean(exp(log w - c))
        gc = -1.0 + float(np.mean(np.exp(np.clip(logw[finite] - c, None, 300.0))))
        c = float(opt_c.ascend(c, gc))
        if not np.isfinite(c) or abs(c) > 1e3 * max(abs(np.log(g)), 1.0):
            raise EstimationError(f"variational c diverged at g={g:.3g}")

    eps = rng.standard_normal((eval_samples, d))
    logw, *_ = log_weights(psi[:d], psi[d:], eps)
    logw = np.where(np.isfinite(logw), logw, -np.inf)
    sample = _summarize_log_weights(logw, g, "variational")
    c = sample.log_z
    if abs(c) > 1e3 * max(abs(np.log(g)), 1.0):
        raise EstimationError(f"variational c diverged at g={g:.3g}")
    return sample, VariationalSampler(psi[:d].copy(), psi[d:].copy(), c)


def estimate_grid(objective, theta0, gs, config: AnalysisConfig, n_samples=None, stream=_FULL, tag=0):
    """Estimate Z on each g of `gs`; failures come back as EstimationError instances."""
    n = n_samples or config.samples_per_g

    def one(idx):
        g = float(gs[idx])
        rng = _rng(config.seed, stream, tag, idx)
        try:
            if config.estimator == "variational":
                return variational_partition(objective, g, seed=rng, theta0=theta0,
                                             eval_samples=n)[0]
            return mc_partition(objective, pipeline_proposal(objective, theta0, g, config.proposal_scale), g, n, rng)
        except EstimationError as exc:
            return exc

    workers = _threads(config.threads)
    if workers == 1:
        return [one(i) for i in range(len(gs))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(len(gs))))


# ----------------------------------------------------------------------------
# series fit

@dataclass
class FitResult:
    series: PowerSeries
    stderr: np.ndarray
    r2: float
    cond: float


def normalized_values(samples, dim: Optional[int] = None, shift: float = 0.0) -> np.ndarray:
    """Z(g) * exp(shift/g) / (2 pi g)^(dim/2), computed in log space."""
    g = np.array([s.g for s in samples])
    logz = np.array([s.log_z for s in samples])
    if dim:
        logz = logz - 0.5 * dim * (LOG_2PI + np.log(g))
    return np.exp(logz + shift / g)


def fit_series_detailed(samples, order: int, eps: Optional[float] = None, dim: Optional[int] = None,
                        shift: float = 0.0) -> FitResult:
    """Weighted least squares with weights 1/(g + eps), via scaled normal equations.

    g is rescaled by its maximum and the columns of the design matrix are
    normalised before forming the normal equations.
    """
    g = np.array([s.g for s in samples], dtype=float)
    if len(np.unique(g)) != g.size:
        raise InvalidInputError("coupling values must be distinct")
    if g.size < order + 2:
        raise InvalidInputError(f"need at least {order + 2} samples for order {order}")
    y = normalized_values(samples, dim, shift)
    if not np.all(np.isfinite(y)):
        raise FitError("normalised partition values overflow")
    if eps is None:
        eps = 1e-2 * g.min()
    w = 1.0 / (g + eps)
    gscale = g.max()
    A = np.vander(g / gscale, order + 1, increasing=True)
    col = np.sqrt(np.sum(w[:, None] * A**2, axis=0))
    As = A / col
    M = As.T @ (w[:, None] * As)
    cond = float(np.linalg.cond(M))
    if not np.isfinite(cond) or cond > 1e13:
        raise FitError(f"design matrix is rank deficient (cond {cond:.3g})")
    sol = np.linalg.solve(M, As.T @ (w * y))
    coeffs = sol / col / gscale ** np.arange(order + 1)

    resid = y - A @ (sol / col)
    dof = max(g.size - order - 1, 1)
    sigma2 = np.sum(w * resid**2) / dof
    cov = sigma2 * np.linalg.inv(M)
    stderr = np.sqrt(np.clip(np.diag(cov), 0, None)) / col / gscale ** np.arange(order + 1)
    ybar = np.sum(w * y) / np.sum(w)
    sst = np.sum(w * (y - ybar) ** 2)
    r2 = float(1.0 - np.sum(w * resid**2) / sst) if sst > 0 else 1.0
    # conditioning of the scaled weighted design matrix itself
    return FitResult(PowerSeries(coeffs), stderr, r2, float(np.sqrt(cond)))


def fit_series(samples, order: int, eps: Optional[float] = None, dim: Optional[int] = None,
               shift: float = 0.0) -> PowerSeries:
    return fit_series_detailed(samples, order, eps, dim, shift).series


def fit_exponent(samples, dim: Optional[int] = None):
    """Fit log Z = -Lstar/g + c0 + c1 g (after removing the Gaussian prefactor).

    Returns (Lstar, stderr).  Lstar is the exponential decay rate of Z as
    g -> 0, i.e. the location of the leading Borel-plane singularity.
    """
    g = np.array([s.g for s in samples], dtype=float)
    logz = np.array([s.log_z for s in samples], dtype=float)
    if dim:
        logz = logz - 0.5 * dim * (LOG_2PI + np.log(g))
    A = np.column_stack([-1.0 / g, np.ones_like(g), g])
    scale = np.abs(A).max(axis=0)
    coef, *_ = np.linalg.lstsq(A / scale, logz, rcond=None)
    coef = coef / scale
    resid = logz - A @ coef
    dof = max(g.size - 3, 1)
    cov = np.sum(resid**2) / dof * np.linalg.pinv((A / scale).T @ (A / scale))
    return float(coef[0]), float(np.sqrt(max(cov[0, 0], 0.0)) / scale[0])


# ----------------------------------------------------------------------------
# coupling range search

def candidate_ranges(l_ref: float):
    return [(l_ref * 10.0**i, l_ref * 10.0 ** (i + 2)) for i in range(-6, 2)]


def quick_test(objective, theta0, coupling: CouplingRange, probes: int = 5, n_samples: int = 256,
               seed: int = 0, proposal_scale: float = 1.0, tag: int = 0) -> float:
    """Fraction of cheap probes giving a finite, positive Z with stderr/Z < 1."""
    if probes < 3:
        raise InvalidInputError("need at least 3 probes")
    ok = 0
    for idx, g in enumerate(np.geomspace(coupling.g_min, coupling.g_max, probes)):
        try:
            s = mc_partition(objective, pipeline_proposal(objective, theta0, g, proposal_scale), g, n_samples,
                             _rng(seed, _QUICK, tag, idx))
        except EstimationError:
            continue
        if np.isfinite(s.z) and s.z > 0 and s.stderr < s.z:
            ok += 1
    return ok / probes


def _full_evaluate(objective, theta0, coupling, config, tag):
    gs = coupling.grid(config.grid_size)
    results = estimate_grid(objective, theta0, gs, config, tag=tag)
    # heavy-tailed weights (a proposal missing the mode) give estimates that
    # are wrong by orders of magnitude; keep only well-sampled grid points
    samples = [r for r in results if isinstance(r, PartitionSample) and r.stderr <= config.max_rel_stderr * r.z]
    if len(samples) < config.series_order + 2:
        raise FitError(f"only {len(samples)} usable grid points")
    dim = objective.dim if config.normalize_prefactor else None
    shift, shift_se = fit_exponent(samples, dim) if config.factor_exponential else (0.0, 0.0)
    if shift + 3 * shift_se < 0:
        # a non-negative objective cannot make Z grow like exp(+c/g)
        raise FitError(f"negative exponential rate {shift:.4g} (+/- {shift_se:.2g}): "
                       "outside the small-coupling regime")
    fit = fit_series_detailed(samples, config.series_order, config.eps, dim, shift)
    score = fit.r2 - 0.1 * np.log10(fit.cond)
    return score, samples


def search_coupling_range(objective, theta0, config: AnalysisConfig):
    """Dynamic coupling-range search.

    Returns (best range or None, samples of the best range, per-candidate log).
    """
    l_ref = objective.value(theta0)
    if not (np.isfinite(l_ref) and l_ref > 0):
        raise InvalidInputError("reference objective value must be positive")
    best, best_samples, best_score = None, None, 0.0
    log = []
    for tag, (lo, hi) in enumerate(candidate_ranges(l_ref)):
        rng_ = CouplingRange(lo, hi)
        rate = quick_test(objective, theta0, rng_, config.quick_probes, config.quick_samples,
                          config.seed, config.proposal_scale, tag)
        entry = {"g_min": lo, "g_max": hi, "success_rate": rate, "score": None}
        if rate >= 0.7:
            try:
                score, samples = _full_evaluate(objective, theta0, rng_, config, tag)
            except (FitError, InvalidInputError, np.linalg.LinAlgError) as exc:
                entry["error"] = str(exc)
            else:
                entry["score"] = float(score)
                if score > best_score:
                    best_score, best_samples = score, samples
                    best = CouplingRange(lo, hi, float(score))
        log.append(entry)
    return best, best_samples, log


def coupling_range_search(objective, theta0, config: AnalysisConfig) -> Optional[CouplingRange]:
    return search_coupling_range(objective, theta0, config)[0]


# ----------------------------------------------------------------------------
# full pipeline

@dataclass
class AnalysisReport:
    l0: float
    targets: TargetSet
    range: Optional[CouplingRange] = None
    samples: List[PartitionSample] = field(default_factory=list)
    coeffs: List[float] = field(default_factory=list)
    coeff_stderr: List[float] = field(default_factory=list)
    borel_coeffs: List[float] = field(default_factory=list)
    shift: float = 0.0
    singularities: List[Singularity] = field(default_factory=list)
    diagnostics: List[str] = field(default_factory=list)
    range_search: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "l0": self.l0,
            "range": None if self.range is None else asdict(self.range),
            "samples": [s.to_dict() for s in self.samples],
            "coeffs": list(self.coeffs),
            "coeff_stderr": list(self.coeff_stderr),
            "borel_coeffs": list(self.borel_coeffs),
            "shift": self.shift,
            "singularities": [s.to_dict() for s in self.singularities],
            "targets": list(self.targets.targets),
            "cutoff": self.targets.cutoff,
            "diagnostics": list(self.diagnostics),
            "range_search": list(self.range_search),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d) -> "AnalysisReport":
        rng_ = d.get("range")
        return cls(
            l0=float(d["l0"]),
            targets=TargetSet(tuple(d["targets"]), float(d["cutoff"])),
            range=None if rng_ is None else CouplingRange(**rng_),
            samples=[PartitionSample(s["g"], s["z"], s["stderr"], s.get("estimator", "mc"), s.get("log_z"))
                     for s in d.get("samples", [])],
            coeffs=list(d.get("coeffs", [])),
            coeff_stderr=list(d.get("coeff_stderr", [])),
            borel_coeffs=list(d.get("borel_coeffs", [])),
            shift=float(d.get("shift", 0.0)),
            singularities=[Singularity(s["zeta"], s["detector"], s["strength"], s.get("residue"))
                           for s in d.get("singularities", [])],
            diagnostics=list(d.get("diagnostics", [])),
            range_search=list(d.get("range_search", [])),
        )


def detect_singularities(series: PowerSeries, upper: float, config: AnalysisConfig, shift: float = 0.0,
                         diagnostics=None):
    """Ratio test, direct scan and Pade poles on the Borel transform of `series`.

    `series` is the expansion of Z(g) exp(shift/g); every location found is
    moved back by `shift`.  Only the part of the Borel plane below `upper`
    is scanned.
    """
    diagnostics = diagnostics if diagnostics is not None else []
    borel = borel_transform(series)
    found = []
    span = upper - shift
    if span <= 0:
        diagnostics.append("nothing to scan below the cutoff")
        return borel, found

    rt = ratio_test(borel, config.ratio_window)
    if rt is None:
        diagnostics.append("ratio test: too few nonzero coefficients")
    else:
        radius, oscillating = rt
        if oscillating:
            diagnostics.append(f"ratio test: alternating tail, radius {radius:.4g} off the positive axis")
        elif 0 < radius < span:
            found.append(Singularity(shift + radius, "ratio", 1.0))

    threshold = config.scan_threshold
    if threshold is None:
        threshold = 10.0 * max(abs(borel.coeffs[0]), np.finfo(float).tiny)
    for s in scan_singularities(borel, span, config.scan_points, threshold):
        found.append(Singularity(shift + s.location, "scan", s.strength))

    n = min(config.pade_n, series.order - config.pade_m)
    while n >= 1:
        try:
            approx = pade(borel, config.pade_m, n)
        except DegeneratePadeError:
            n -= 1
            continue
        for s in pade_poles(approx):
            if s.location < span:
                found.append(Singularity(shift + s.location, "pade", s.strength, s.residue))
        break
    else:
        diagnostics.append("pade: every denominator order was degenerate")
    return borel, found


def analyze(objective=None, theta0=None, config: Optional[AnalysisConfig] = None, coeffs=None,
            cutoff: Optional[float] = None) -> AnalysisReport:
    """Full target computation.  Never raises on numerical failure; the
    report then carries an empty TargetSet and a diagnostic.

    With `coeffs` the estimation stages are skipped and the given series is
    analysed directly (cutoff defaults to L(theta0)).
    """
    config = config or AnalysisConfig()
    diag: List[str] = []
    if cutoff is None:
        l0 = objective.value(theta0) if objective is not None else np.nan
    else:
        l0 = float(cutoff)
    if not (np.isfinite(l0) and l0 > 0):
        return AnalysisReport(float(l0) if np.isfinite(l0) else 0.0, TargetSet((), 1.0),
                              diagnostics=["initial objective must be positive and finite"])
    report = AnalysisReport(float(l0), TargetSet((), l0), diagnostics=diag)

    if coeffs is not None:
        series = PowerSeries(coeffs)
        shift = 0.0
    else:
        try:
            best, samples, log = search_coupling_range(objective, theta0, config)
        except (InvalidInputError, EstimationError) as exc:
            diag.append(f"range search failed: {exc}")
            return report
        report.range_search = log
        if best is None:
            diag.append("no usable coupling range")
            return report
        report.range = best
        report.samples = samples
        dim = objective.dim if config.normalize_prefactor else None
        try:
            shift, shift_se = fit_exponent(samples, dim) if config.factor_exponential else (0.0, np.inf)
            fit = fit_series_detailed(samples, config.series_order, config.eps, dim,
                                      shift if config.factor_exponential else 0.0)
        except (FitError, InvalidInputError, np.linalg.LinAlgError) as exc:
            diag.append(f"series fit failed: {exc}")
            return report
        series = fit.series
        report.coeff_stderr = fit.stderr.tolist()
        if not config.factor_exponential:
            shift = 0.0
        report.shift = float(shift)
        if config.factor_exponential:
            gap = l0 - shift
            if 0 < shift and gap > 1e-2 * l0 and gap > 3 * shift_se:
                report.singularities.append(Singularity(shift, "exponent", float(gap / max(shift_se, 1e-300))))
            elif shift <= 0:
                diag.append(f"exponential rate {shift:.4g} (+/- {shift_se:.2g}) not positive")
            else:
                diag.append(f"exponential rate {shift:.4g} (+/- {shift_se:.2g}) not separated from L0")
        # a term counts if it is statistically resolved and not at rounding level
        # over the fitted range
        g_top = report.range.g_max
        terms = np.abs(series.coeffs[1:]) * g_top ** np.arange(1, series.order + 1)
        significant = (np.abs(series.coeffs[1:]) > 2 * fit.stderr[1:]) & (terms > 1e-9 * abs(series.coeffs[0]))
        if not significant.any():
            diag.append("no divergence detected")
            report.coeffs = series.coeffs.tolist()
            report.borel_coeffs = borel_transform(series).coeffs.tolist()
            report.targets = select_targets(report.singularities, l0, config.max_targets)
            return report

    report.coeffs = series.coeffs.tolist()
    borel, found = detect_singularities(series, l0, config, shift, diag)
    report.borel_coeffs = borel.coeffs.tolist()
    report.singularities.extend(found)
    report.targets = select_targets(report.singularities, l0, config.max_targets)
    if not report.targets.targets:
        diag.append("no singularity below the initial objective")
    return report


def borel_analysis(objective, theta0, config: Optional[AnalysisConfig] = None, coeffs=None,
                   cutoff: Optional[float] = None) -> TargetSet:
    return analyze(objective, theta0, config, coeffs, cutoff).targets
