"""Asymptotic series, Borel transforms and Borel-plane singularity detection.

Everything here is a pure function of its inputs.  Coefficients are stored
as float64 numpy arrays, lowest order first.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import integrate, special

DETECTORS = ("ratio", "scan", "pade", "exponent")
MERGE_RTOL = 1e-2


class InvalidInputError(ValueError):
    pass


class DegeneratePadeError(ValueError):
    """The Pade linear system is singular; retry with a smaller denominator."""


class QuadratureError(RuntimeError):
    pass


def _as_coeffs(coeffs) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError("coefficients must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("coefficients must be finite")
    return arr


@dataclass(frozen=True)
class PowerSeries:
    """Truncated power series sum_j a_j g^j."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _as_coeffs(self.coeffs))

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, g):
        return P.polyval(g, self.coeffs)

    def partial_sum(self, g, n_terms: int):
        return P.polyval(g, self.coeffs[:n_terms]) if n_terms > 0 else 0.0 * np.asarray(g)

    def to_json(self) -> str:
        return json.dumps({"coeffs": self.coeffs.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "PowerSeries":
        return cls(json.loads(text)["coeffs"])


@dataclass(frozen=True)
class BorelSeries:
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _as_coeffs(self.coeffs))

    def __call__(self, zeta):
        return P.polyval(zeta, self.coeffs)

    def to_json(self) -> str:
        return json.dumps({"coeffs": self.coeffs.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "BorelSeries":
        return cls(json.loads(text)["coeffs"])


@dataclass(frozen=True)
class PadeApproximant:
    """Rational function numerator(x) / denominator(x), denominator[0] == 1."""

    numerator: np.ndarray
    denominator: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "numerator", _as_coeffs(self.numerator))
        object.__setattr__(self, "denominator", _as_coeffs(self.denominator))
        if self.denominator[0] != 1.0:
            raise InvalidInputError("denominator constant term must be 1")

    @property
    def m(self) -> int:
        return self.numerator.size - 1

    @property
    def n(self) -> int:
        return self.denominator.size - 1

    def __call__(self, x):
        return P.polyval(x, self.numerator) / P.polyval(x, self.denominator)

    def taylor(self, order: int) -> np.ndarray:
        """Taylor coefficients of P/Q through `order` (long division of power series)."""
        q = self.denominator
        out = np.zeros(order + 1)
        for k in range(order + 1):
            acc = self.numerator[k] if k <= self.m else 0.0
            for j in range(1, min(k, self.n) + 1):
                acc -= q[j] * out[k - j]
            out[k] = acc
        return out


@dataclass(frozen=True)
class Singularity:
    location: float
    detector: str
    strength: float
    residue: Optional[float] = None

    def __post_init__(self):
        if not (np.isfinite(self.location) and self.location > 0):
            raise InvalidInputError(f"singularity location must be positive and finite, got {self.location}")
        if self.detector not in DETECTORS:
            raise InvalidInputError(f"unknown detector {self.detector!r}")

    def to_dict(self) -> dict:
        d = {"zeta": float(self.location), "detector": self.detector, "strength": float(self.strength)}
        if self.residue is not None:
            d["residue"] = float(self.residue)
        return d


@dataclass(frozen=True)
class TargetSet:
    """Sorted critical-value candidates strictly inside (0, cutoff)."""

    targets: tuple = field(default_factory=tuple)
    cutoff: float = np.inf

    def __post_init__(self):
        t = tuple(float(x) for x in self.targets)
        if any(not (0 < x < self.cutoff) for x in t):
            raise InvalidInputError("targets must lie in (0, cutoff)")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise InvalidInputError("targets must be strictly increasing")
        object.__setattr__(self, "targets", t)

    def __len__(self):
        return len(self.targets)

    def __iter__(self):
        return iter(self.targets)

    def to_json(self) -> str:
        return json.dumps({"targets": list(self.targets), "cutoff": float(self.cutoff)})

    @classmethod
    def from_json(cls, text: str) -> "TargetSet":
        d = json.loads(text)
        return cls(tuple(d["targets"]), float(d["cutoff"]))


def borel_transform(series: PowerSeries) -> BorelSeries:
    a = series.coeffs
    return BorelSeries(a / special.gamma(np.arange(a.size) + 1.0))


def ratio_test(borel: BorelSeries, tail_window: int = 3):
    """Radius of convergence from the trailing coefficient ratios.

    Returns ``(radius, oscillating)`` or None when fewer than
    ``tail_window + 1`` trailing coefficients are nonzero.  ``oscillating``
    flags sign alternation over most of the window, i.e. the nearest
    singularity is not on the positive axis.
    """
    if tail_window < 1:
        raise InvalidInputError("tail_window must be positive")
    b = borel.coeffs
    if b.size < tail_window + 1:
        return None
    tail = b[-(tail_window + 1):]
    if np.any(tail == 0):
        return None
    ratios = tail[:-1] / tail[1:]
    radius = float(np.mean(np.abs(ratios)))
    oscillating = bool(np.sum(ratios < 0) > tail_window / 2)
    return radius, oscillating


def scan_singularities(borel: BorelSeries, upper: float, points: int, threshold: float):
    """Direct evaluation of |B(zeta)| on a uniform grid over (0, upper).

    A grid point is reported when |B| exceeds `threshold` and is a strict
    local maximum over its grid neighbours.  Points where evaluation
    overflows are saturated: they count as exceeding the threshold and
    compare as +inf.
    """
    if points < 8:
        raise InvalidInputError("scan needs at least 8 grid points")
    if not upper > 0:
        raise InvalidInputError("upper must be positive")
    zeta = np.linspace(0.0, upper, points + 2)[1:-1]
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.abs(P.polyval(zeta, borel.coeffs))
    saturated = ~np.isfinite(vals)
    vals = np.where(saturated, np.inf, vals)
    found = []
    for k in range(1, points - 1):
        v = vals[k]
        if not (saturated[k] or v > threshold):
            continue
        left, right = vals[k - 1], vals[k + 1]
        if saturated[k]:
            # a saturated run counts once, at its first point
            is_peak = not saturated[k - 1]
        else:
            is_peak = v > left and v > right
        if is_peak:
            strength = float(v) if np.isfinite(v) else float(np.finfo(float).max)
            found.append(Singularity(float(zeta[k]), "scan", strength))
    return found


def pade(borel: BorelSeries, m: int, n: int) -> PadeApproximant:
    """[m/n] Pade approximant matching Taylor coefficients through order m+n."""
    b = borel.coeffs
    if m < 0 or n < 1:
        raise InvalidInputError("need m >= 0 and n >= 1")
    if m + n + 1 > b.size:
        raise InvalidInputError(f"[{m}/{n}] needs {m + n + 1} coefficients, have {b.size}")

    def coef(k):
        return b[k] if k >= 0 else 0.0

    # sum_{j=0}^{n} q_j b_{k-j} = 0 for k = m+1..m+n, with q_0 = 1
    C = np.array([[coef(m + i - j) for j in range(1, n + 1)] for i in range(1, n + 1)])
    rhs = -np.array([coef(m + i) for i in range(1, n + 1)])
    if np.all(C == 0):
        if np.all(rhs == 0):
            q = np.zeros(n)
        else:
            raise DegeneratePadeError(f"[{m}/{n}] system is singular")
    else:
        scale = np.max(np.abs(C))
        if np.linalg.cond(C / scale) > 1e14:
            raise DegeneratePadeError(f"[{m}/{n}] system is singular")
        q = np.linalg.solve(C, rhs)
    q = np.concatenate([[1.0], q])
    p = np.array([sum(q[j] * coef(k - j) for j in range(min(k, n) + 1)) for k in range(m + 1)])
    return PadeApproximant(p, q)


def real_poles(approximant: PadeApproximant) -> np.ndarray:
    """All real roots of the denominator, sorted by magnitude."""
    q = np.trim_zeros(approximant.denominator, "b")
    if q.size < 2:
        return np.array([])
    roots = P.polyroots(q)
    real = [r.real for r in roots if abs(r.imag) <= 1e-9 * max(1.0, abs(r))]
    return np.array(sorted(real, key=abs))


def pade_poles(approximant: PadeApproximant):
    """Poles of the approximant on the positive axis, sorted ascending.

    strength is 1/|Q'(zeta)| and residue P(zeta)/Q'(zeta).  A root-finder
    failure yields an empty list and a RuntimeWarning.
    """
    try:
        poles = real_poles(approximant)
    except np.linalg.LinAlgError:
        warnings.warn("pole finder did not converge", RuntimeWarning)
        return []
    dq = P.polyder(approximant.denominator)
    out = []
    for x in sorted(float(x) for x in poles if x > 0):
        d = float(P.polyval(x, dq))
        if d == 0:
            continue
        residue = float(P.polyval(x, approximant.numerator) / d)
        out.append(Singularity(x, "pade", 1.0 / abs(d), residue))
    return out


def laplace_resum(approximant: PadeApproximant, g: float, tolerance: float = 1e-12) -> float:
    """(1/g) int_0^inf exp(-t/g) P(t)/Q(t) dt, principal value at real poles.

    Works in u = t/g.  The path is truncated once exp(-u) times the
    integrand magnitude drops below `tolerance`.  Each simple pole on the
    path is excised symmetrically: the window [p - d, p + d] is integrated
    as int_0^d f(p+s) + f(p-s) ds, whose 1/s parts cancel.
    """
    if not g > 0:
        raise InvalidInputError("g must be positive")
    if not tolerance > 0:
        raise InvalidInputError("tolerance must be positive")

    def f(u):
        t = g * u
        return np.exp(-u) * P.polyval(t, approximant.numerator) / P.polyval(t, approximant.denominator)

    upper = np.log(1.0 / tolerance)
    while abs(f(upper)) > tolerance and upper < 1e4:
        upper *= 1.5

    q = np.trim_zeros(approximant.denominator, "b")
    roots = P.polyroots(q) if q.size > 1 else np.array([])
    real_poles = sorted(r.real / g for r in roots
                        if abs(r.imag) <= 1e-9 * max(1.0, abs(r)) and 0 <= r.real / g < upper)
    near = sorted(r.real / g for r in roots
                  if abs(r.imag) > 1e-9 * max(1.0, abs(r)) and 0 < r.real / g < upper)
    if real_poles and real_poles[0] == 0:
        raise QuadratureError("pole at the origin")
    if any(b - a < 1e-12 * max(1.0, b) for a, b in zip(real_poles, real_poles[1:])):
        raise QuadratureError("repeated pole on the integration path")

    # excision half-widths: half the distance to the nearest obstacle
    edges = [0.0] + real_poles + [upper]
    half = [0.5 * min(p - edges[i], edges[i + 2] - p) for i, p in enumerate(real_poles)]

    pieces = []
    lo = 0.0
    for p, d in zip(real_poles, half):
        pieces.append(("plain", lo, p - d))
        pieces.append(("pv", p, d))
        lo = p + d
    pieces.append(("plain", lo, upper))

    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            for kind, a, b in pieces:
                if kind == "plain":
                    if b <= a:
                        continue
                    pts = [x for x in near if a < x < b] or None
                    val, _ = integrate.quad(f, a, b, points=pts, limit=400,
                                            epsabs=tolerance, epsrel=1e-12)
                else:
                    p, d = a, b
                    val, _ = integrate.quad(lambda s: f(p + s) + f(p - s), 0.0, d,
                                            limit=400, epsabs=tolerance, epsrel=1e-12)
                total += val
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature refinement failed: {exc}") from None
    return float(total)


def select_targets(candidates: Sequence[Singularity], cutoff: float, max_targets: int = 4) -> TargetSet:
    """Filter, merge and rank singularity candidates into a TargetSet.

    Candidates closer than 1e-2 times the cutoff (the loss scale) are merged
    into the strongest representative.  On equal strength the larger location
    wins, both when merging and when truncating to `max_targets`.
    """
    if not cutoff > 0:
        raise InvalidInputError("cutoff must be positive")
    pool = sorted((s for s in candidates if 0 < s.location < cutoff), key=lambda s: s.location)
    if not pool or max_targets < 1:
        return TargetSet((), cutoff)

    def rank(s):
        return (s.strength, s.location)

    merged = []
    cluster = [pool[0]]
    for s in pool[1:]:
        if s.location - cluster[-1].location <= MERGE_RTOL * cutoff:
            cluster.append(s)
        else:
            merged.append(max(cluster, key=rank))
            cluster = [s]
    merged.append(max(cluster, key=rank))

    kept = sorted(merged, key=rank, reverse=True)[:max_targets]
    return TargetSet(tuple(sorted(s.location for s in kept)), cutoff)
