"""Monte Carlo and quadrature verification of bounds and identities.

Sampling is deterministic and splittable: the generator is counter-based
(Philox) keyed by the user seed, with one stream per replicate batch, so a
parallel map over batches and a serial loop produce bit-identical output.
The Wasserstein estimator integrates |empirical CDF - Phi| exactly using the
closed-form antiderivative x Phi(x) + phi(x), so it has no binning bias; its
standard error comes from the spread of the per-batch estimates.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special

from .bounds import BoundReport
from .chaos import ChaosTensor, evaluate_batch, l2_norm_sq
from .distributions import Distribution, normalized
from .errors import DataError, DomainError, UnsupportedKernelError
from .quadrature import integrate

__all__ = [
    "REPLICATES",
    "SumSpec",
    "QuadraticSpec",
    "WassersteinEstimate",
    "CheckResult",
    "sample_functional",
    "wasserstein_to_normal",
    "estimate_w1",
    "tv_to_normal_convolution",
    "check_bound",
    "MultiplicationReport",
    "IsometryReport",
    "OrthogonalityReport",
    "verify_multiplication",
    "verify_isometry",
    "verify_orthogonality",
    "dist_label",
    "format_float",
    "CHECK_CSV_HEADER",
    "check_csv_row",
]

REPLICATES = 20


@dataclass(frozen=True, eq=False)
class SumSpec:
    """Sample Z = X_1 + ... + X_n by inverse-CDF from one uniform per cell."""

    dists: tuple[Distribution, ...]

    @property
    def cells(self) -> int:
        return len(self.dists)


@dataclass(frozen=True, eq=False)
class QuadraticSpec:
    """Sample the quadratic form sum a_kl X_k X_l with i.i.d. unit-variance X.

    With ``normalize`` the matrix is rescaled so Var of the form is exactly 1
    (the variance equals twice the sum of squared coefficients).
    """

    matrix: np.ndarray
    dist: Distribution
    normalize: bool = True

    @property
    def cells(self) -> int:
        return int(np.asarray(self.matrix).shape[0])


@dataclass(frozen=True)
class WassersteinEstimate:
    value: float
    sample_size: int
    seed: int
    std_error: float


@dataclass(frozen=True, eq=False)
class CheckResult:
    bound: BoundReport
    estimate: WassersteinEstimate
    holds: bool
    margin: float


def _batch_sizes(m: int) -> list[int]:
    base, rem = divmod(m, REPLICATES)
    return [base + (1 if r < rem else 0) for r in range(REPLICATES)]


def _replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    # one non-overlapping counter block per replicate
    bits = np.random.Philox(key=np.uint64(seed) & np.uint64(0xFFFFFFFFFFFFFFFF),
                            counter=[0, 0, 0, replicate])
    return np.random.Generator(bits)


def _worker_count() -> int:
    raw = os.environ.get("STEINBENCH_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _eval_spec(spec, u: np.ndarray) -> np.ndarray:
    if isinstance(spec, ChaosTensor):
        return evaluate_batch(spec, u)
    if isinstance(spec, SumSpec):
        # clip away the zero-probability exact endpoints so unbounded
        # quantiles stay finite
        probs = np.clip((1.0 + u) / 2.0, 1e-16, 1.0 - 1e-16)
        total = np.zeros(u.shape[0])
        for k, d in enumerate(spec.dists):
            total += np.asarray(d.quantile(probs[:, k]), dtype=float)
        return total
    if isinstance(spec, QuadraticSpec):
        a = np.asarray(spec.matrix, dtype=float)
        scale = 1.0 / math.sqrt(2.0 * float(np.sum(a * a))) if spec.normalize else 1.0
        d = normalized(spec.dist)
        probs = np.clip((1.0 + u) / 2.0, 1e-16, 1.0 - 1e-16)
        x = np.asarray(d.quantile(probs), dtype=float)
        return scale * np.sum((x @ a) * x, axis=1)
    raise DomainError(f"cannot sample a {type(spec).__name__}")


def _spec_cells(spec) -> int:
    return spec.cells


def sample_functional(spec, m: int, seed: int, *, by_batch: bool = False):
    """m i.i.d. realizations of the functional, deterministic per (seed, m).

    With ``by_batch`` the replicate batches are returned separately (in
    replicate order); concatenating them gives the plain result.
    """
    if m < 1:
        raise DomainError("need m >= 1")
    cells = _spec_cells(spec)
    sizes = _batch_sizes(m)

    def one(args):
        r, sz = args
        if sz == 0:
            return np.empty(0)
        u = _replicate_rng(seed, r).uniform(-1.0, 1.0, size=(sz, cells))
        return _eval_spec(spec, u)

    jobs = list(enumerate(sizes))
    workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(one, jobs))
    else:
        batches = [one(j) for j in jobs]
    if by_batch:
        return batches
    return np.concatenate(batches)


# ---------------------------------------------------------------------------
# Wasserstein distance to the standard normal
# ---------------------------------------------------------------------------


def _normal_area(x: np.ndarray) -> np.ndarray:
    """Antiderivative of Phi: integral_{-inf}^x Phi = x Phi(x) + phi(x)."""
    x = np.asarray(x, dtype=float)
    return x * special.ndtr(x) + np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _w1_value(samples: np.ndarray) -> float:
    """Exact integral of |F_m - Phi| over the real line."""
    x = np.sort(np.asarray(samples, dtype=float))
    m = x.size
    if m == 0:
        raise DataError("empty sample")
    if not np.all(np.isfinite(x)):
        raise DataError("samples must be finite")
    total = float(_normal_area(x[0]))  # left tail: integral of Phi
    # right tail: integral of 1 - Phi = phi(b) - b (1 - Phi(b))
    b = x[-1]
    total += float(np.exp(-0.5 * b * b) / math.sqrt(2.0 * math.pi)
                   - b * (1.0 - special.ndtr(b)))
    if m > 1:
        a = x[:-1]
        bseg = x[1:]
        level = np.arange(1, m) / m
        q = special.ndtri(level)
        area = _normal_area
        below = area(bseg) - area(a) - level * (bseg - a)   # if Phi >= level
        above = level * (bseg - a) - (area(bseg) - area(a))  # if Phi <= level
        mid = (level * (q - a) - (area(q) - area(a))) + (
            area(bseg) - area(q) - level * (bseg - q)
        )
        seg = np.where(q <= a, below, np.where(q >= bseg, above, mid))
        total += float(np.sum(seg))
    return total


def wasserstein_to_normal(samples, *, batches=None, seed: int = 0) -> WassersteinEstimate:
    """Exact W1 distance of the empirical law to the standard normal.

    ``batches`` (replicate pieces of the same sample) feed the standard
    error, reported as the plain spread of the batch estimates.  This is a
    deliberately conservative scale: near zero true distance the estimator
    sits at its positive small-sample bias, and the undivided batch spread
    is the replicate-derived scale that still covers it (dividing by
    sqrt(#batches) would not).
    """
    samples = np.asarray(samples, dtype=float)
    value = _w1_value(samples)
    std_error = 0.0
    if batches is not None:
        vals = [_w1_value(b) for b in batches if len(b) > 0]
        if len(vals) >= 2:
            std_error = float(np.std(vals, ddof=1))
    return WassersteinEstimate(
        value=value, sample_size=int(samples.size), seed=int(seed),
        std_error=std_error,
    )


def estimate_w1(spec, m: int, seed: int) -> WassersteinEstimate:
    """Sample the functional and estimate its W1 distance to the normal."""
    batches = sample_functional(spec, m, seed, by_batch=True)
    samples = np.concatenate(batches)
    return wasserstein_to_normal(samples, batches=batches, seed=seed)


# ---------------------------------------------------------------------------
# Total variation for i.i.d. sums by density convolution
# ---------------------------------------------------------------------------


def tv_to_normal_convolution(dist: Distribution, n: int, *, step: float = 1e-3) -> float:
    """TV distance between the normalized i.i.d. sum of ``dist`` and N(0,1)."""
    return _tv_convolution(dist, n, step)[0]


def _tv_convolution(dist: Distribution, n: int, step: float = 1e-3) -> tuple[float, float]:
    """(TV value, accuracy budget) for the convolution estimate.

    The summand law is tabulated as exact cell masses on a grid (step <=
    1e-3 of the sum's unit standard deviation) and convolved n-1 times by
    FFT; each step contributes O(step^2) error, so ``n * step^2`` is the
    deterministic accuracy budget reported alongside the value.  Laws with
    an unbounded density edge get a halved step and a warning.
    """
    if not dist.is_continuous:
        raise UnsupportedKernelError("TV by convolution needs a density")
    if n < 1:
        raise DomainError("need n >= 1")
    d = normalized(dist)
    scale = 1.0 / math.sqrt(n)
    lo, hi = d.support
    if not math.isfinite(lo):
        lo = float(d.quantile(1e-10))
    if not math.isfinite(hi):
        hi = float(d.quantile(1.0 - 1e-10))
    lo, hi = lo * scale, hi * scale

    h = float(step)
    # detect an unbounded density edge (e.g. power-law blowup at an endpoint)
    edge = max(float(d.pdf(lo / scale + 1e-12)), float(d.pdf(hi / scale - 1e-12)))
    if edge > 1e4:
        warnings.warn("unbounded summand density near an endpoint; halving grid step")
        h *= 0.5

    if n == 1:
        def gap(x: float) -> float:
            norm_pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
            return abs(float(d.pdf(x / scale)) / scale - norm_pdf)

        val = integrate(gap, min(lo, -12.0), max(hi, 12.0),
                        points=[lo, hi], limit=400)
        return 0.5 * val, 1e-9  # adaptive quadrature, not grid-limited

    count = int(math.ceil((hi - lo) / h))
    edges = lo + np.arange(count + 1) * h
    # exact cell masses via the CDF keep O(h^2) accuracy across density jumps
    cdf_vals = np.asarray(d.cdf(edges / scale), dtype=float)
    q = np.diff(cdf_vals)
    total_mass = q.sum()
    if total_mass <= 0.0:
        raise DomainError("summand mass vanished on the convolution grid")
    q /= total_mass

    out_len = n * (count - 1) + 1
    fft_len = 1 << int(math.ceil(math.log2(out_len + 1)))
    spec_fft = np.fft.rfft(q, fft_len)
    conv = np.fft.irfft(spec_fft**n, fft_len)[:out_len]
    conv = np.clip(conv, 0.0, None)

    ys = n * lo + (np.arange(out_len) + n * 0.5) * h
    normal_cells = special.ndtr(ys + 0.5 * h) - special.ndtr(ys - 0.5 * h)
    tv = 0.5 * float(np.sum(np.abs(conv - normal_cells)))
    # normal mass outside the compared window
    tv += 0.5 * float(special.ndtr(ys[0] - 0.5 * h) + (1.0 - special.ndtr(ys[-1] + 0.5 * h)))
    return tv, n * h * h


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


def check_bound(bound: BoundReport, spec, m: int, seed: int) -> CheckResult:
    """Compare a bound report against the matching empirical estimate.

    W1 bounds are checked against the sampled estimator; TV bounds are
    available for i.i.d.-sum specs only and use the deterministic
    convolution estimate (its standard error is zero).
    """
    if bound.metric == "W1":
        est = estimate_w1(spec, m, seed)
    elif bound.metric == "TV":
        if not isinstance(spec, SumSpec):
            raise DomainError("TV verification is available for i.i.d. sums only")
        if len(set(spec.dists)) != 1:
            raise DomainError("TV verification needs identical summands")
        n = len(spec.dists)
        # the summands carry the 1/sqrt(n) factor; the convolution path
        # normalizes the base law itself.  The accuracy budget of the
        # deterministic estimate plays the role of its standard error.
        tv, budget = _tv_convolution(spec.dists[0], n)
        est = WassersteinEstimate(value=tv, sample_size=0, seed=int(seed),
                                  std_error=budget)
    else:
        raise DomainError(f"no estimator for metric {bound.metric}")
    holds = est.value <= bound.value + 3.0 * est.std_error
    margin = bound.value - est.value - 3.0 * est.std_error
    return CheckResult(bound=bound, estimate=est, holds=holds, margin=margin)


@dataclass(frozen=True)
class MultiplicationReport:
    max_abs_path_error: float
    mc_zscore: float


def verify_multiplication(f: ChaosTensor, g: ChaosTensor, m: int, seed: int) -> MultiplicationReport:
    """Pathwise check of the product expansion I_n(f) I_m(g) = sum_k I_k(h_k).

    The z-score tests the mean difference against zero.  Differences at the
    accumulated-rounding level (below 1e-10 of the product's RMS scale) are
    reported as an exact match (z = 0): rounding noise has a systematic sign
    and its z-score would grow with m without saying anything about the
    identity.
    """
    from .chaos import multiply

    parts = multiply(f, g)
    cells = max(f.cells, g.cells)
    sizes = _batch_sizes(m)
    max_err = 0.0
    diffs = []
    lhs_sq = 0.0
    count = 0
    for r, sz in enumerate(sizes):
        if sz == 0:
            continue
        u = _replicate_rng(seed, r).uniform(-1.0, 1.0, size=(sz, cells))
        lhs = evaluate_batch(f, u) * evaluate_batch(g, u)
        rhs = np.zeros(sz)
        for h in parts:
            rhs += evaluate_batch(h, u)
        diff = lhs - rhs
        max_err = max(max_err, float(np.max(np.abs(diff))))
        lhs_sq += float(np.sum(lhs**2))
        count += sz
        diffs.append(diff)
    diff = np.concatenate(diffs)
    noise_floor = 1e-10 * max(1.0, math.sqrt(lhs_sq / count))
    sd = float(np.std(diff, ddof=1)) if diff.size > 1 else 0.0
    if max_err <= noise_floor or sd == 0.0:
        z = 0.0
    else:
        z = float(np.mean(diff) / (sd / math.sqrt(diff.size)))
    return MultiplicationReport(max_abs_path_error=max_err, mc_zscore=z)


@dataclass(frozen=True)
class IsometryReport:
    empirical: float
    exact: float
    zscore: float
    canonical: bool


def verify_isometry(f: ChaosTensor, m: int, seed: int) -> IsometryReport:
    """Empirical second moment of I_n(f) against n! times the squared norm.

    For canonical integrands the two agree (two-sided z-score); otherwise the
    norm bound is only an upper bound and the check is one-sided.
    """
    vals = sample_functional(f, m, seed)
    sq = vals**2
    exact = math.factorial(f.order) * l2_norm_sq(f)
    emp = float(np.mean(sq))
    sd = float(np.std(sq, ddof=1)) if sq.size > 1 else 0.0
    z = (emp - exact) / (sd / math.sqrt(sq.size)) if sd > 0.0 else 0.0
    return IsometryReport(empirical=emp, exact=exact, zscore=float(z),
                          canonical=f.is_canonical)


@dataclass(frozen=True)
class OrthogonalityReport:
    covariance: float
    zscore: float


def verify_orthogonality(f: ChaosTensor, g: ChaosTensor, m: int, seed: int) -> OrthogonalityReport:
    """Sample covariance of two integrals of different orders (expected 0)."""
    cells = max(f.cells, g.cells)
    sizes = _batch_sizes(m)
    prods = []
    for r, sz in enumerate(sizes):
        if sz == 0:
            continue
        u = _replicate_rng(seed, r).uniform(-1.0, 1.0, size=(sz, cells))
        prods.append(evaluate_batch(f, u) * evaluate_batch(g, u))
    prod = np.concatenate(prods)
    sd = float(np.std(prod, ddof=1)) if prod.size > 1 else 0.0
    cov = float(np.mean(prod))
    z = cov / (sd / math.sqrt(prod.size)) if sd > 0.0 else 0.0
    return OrthogonalityReport(covariance=cov, zscore=float(z))


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

CHECK_CSV_HEADER = (
    "check_id,formula_id,n,dist,bound,estimate,std_error,holds,margin,seed"
)


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def dist_label(dist: Distribution) -> str:
    from . import distributions as d

    if isinstance(dist, d.Scaled):
        return f"scaled({dist_label(dist.base)},{format_float(dist.factor)})"
    if isinstance(dist, d.Gaussian):
        return f"gaussian(sigma={format_float(dist.sigma)})"
    if isinstance(dist, d.CenteredGamma):
        return f"gamma(shape={format_float(dist.shape)})"
    if isinstance(dist, d.CenteredBeta):
        return f"beta(alpha={format_float(dist.alpha)})"
    if isinstance(dist, d.UniformSym):
        return f"uniform(a={format_float(dist.halfwidth)})"
    if isinstance(dist, d.NormalizedBernoulli):
        return f"bernoulli(p={format_float(dist.p)})"
    if isinstance(dist, d.Tabulated):
        return f"tabulated({len(dist.xs)} points)"
    return type(dist).__name__.lower()


def check_csv_row(check_id: str, result: CheckResult, n: int, dist_name: str,
                  seed: int) -> str:
    b, e = result.bound, result.estimate
    return ",".join([
        check_id, b.formula_id, str(n), dist_name,
        format_float(b.value), format_float(e.value), format_float(e.std_error),
        "true" if result.holds else "false",
        format_float(result.margin), str(seed),
    ])
