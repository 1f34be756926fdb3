"""Separable chaos integrands and their multiple stochastic integrals.

The underlying randomness is an i.i.d. sequence (U_k) uniform on [-1, 1],
one variate per half-open cell [2k, 2k+2) of the positive axis.  An order-n
integrand is stored as a formal sum of separable terms: a real coefficient
tensor over cell indices times one profile per axis, where a profile is a
real function of the local cell coordinate t in [0, 2).

A profile is *canonical* when its cell integral vanishes; for fully
canonical integrands the multiple integral is the pure U-statistic

    I_n(f) = sum over distinct (k_1, ..., k_n) of
             coeffs[k] * prod_j profile_j(1 + U_{k_j}),

and in general each non-canonical axis contributes its cell-average
subtraction (the evaluation below expands exactly that finite projection).

All L^2 norms and inner products use the dx/2 measure per axis, so a
unit-normalized profile has half cell-square-integral one.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .distributions import Distribution
from .errors import CapacityError, DataError, DomainError, PreconditionError
from .quadrature import gl_cell_integral, integrate

__all__ = [
    "CellProfile",
    "PolyProfile",
    "QuantileProfile",
    "ProductProfile",
    "product_profile",
    "profile_inner",
    "ChaosTerm",
    "ChaosTensor",
    "ChaosSample",
    "evaluate_integral",
    "evaluate_batch",
    "contract",
    "symmetrize",
    "restrict_to_delta",
    "multiply",
    "g_operator",
    "l2_norm_sq",
    "l2_inner",
    "apply_L_inverse",
    "load_coeffs_csv",
]

CANONICAL_TOL = 1e-10
_MAX_SYM_ORDER = 6
_MAX_DENSE_ENTRIES = 20_000_000


# ---------------------------------------------------------------------------
# Cell profiles
# ---------------------------------------------------------------------------


class CellProfile:
    """Real function on one cell, parametrized by t in [0, 2)."""

    def __call__(self, t):
        raise NotImplementedError

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Interior points of [0, 2] where the profile is non-smooth."""
        return ()

    def zeros(self) -> tuple[float, ...]:
        """Interior zero crossings, where known (used to split |.|^p)."""
        return ()

    @property
    def cell_mean(self) -> float:
        """Half the cell integral, (1/2) * integral_0^2 profile(t) dt."""
        raise NotImplementedError

    @property
    def is_canonical(self) -> bool:
        return abs(self.cell_mean) <= CANONICAL_TOL

    def pow_integral(self, k: int) -> float:
        """integral_0^2 profile(t)^k dt."""
        return _pow_integral(self, k)

    def abs_pow_integral(self, k: int) -> float:
        """integral_0^2 |profile(t)|^k dt."""
        return _abs_pow_integral(self, k)


@dataclass(frozen=True)
class PolyProfile(CellProfile):
    """Polynomial in the local coordinate, coefficients in ascending order."""

    coeffs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    def __call__(self, t):
        return np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), self.coeffs)

    def zeros(self) -> tuple[float, ...]:
        roots = np.polynomial.polynomial.polyroots(self.coeffs) if len(self.coeffs) > 1 else []
        return tuple(
            float(r.real) for r in np.atleast_1d(roots)
            if abs(r.imag) < 1e-12 and 0.0 < r.real < 2.0
        )

    @property
    def cell_mean(self) -> float:
        # (1/2) * integral_0^2 sum c_i t^i dt = sum c_i 2^i / (i + 1)
        return sum(c * 2.0**i / (i + 1.0) for i, c in enumerate(self.coeffs))

    def antiderivative(self) -> "PolyProfile":
        return PolyProfile((0.0, *(c / (i + 1.0) for i, c in enumerate(self.coeffs))))

    def derivative(self) -> "PolyProfile":
        if len(self.coeffs) <= 1:
            return PolyProfile((0.0,))
        return PolyProfile(tuple(i * c for i, c in enumerate(self.coeffs) if i > 0))


@dataclass(frozen=True)
class QuantileProfile(CellProfile):
    """Quantile of a centered law in local coordinates: t -> F^{-1}(t / 2).

    This is the per-cell building block that turns a single stochastic
    integral into a sum of independent copies of the law.
    """

    dist: Distribution

    def __call__(self, t):
        return self.dist.quantile(np.asarray(t, dtype=float) / 2.0)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(2.0 * u for u in self.dist.quantile_breakpoints)

    def zeros(self) -> tuple[float, ...]:
        z = 2.0 * float(self.dist.cdf(0.0))
        return (z,) if 0.0 < z < 2.0 else ()

    @property
    def cell_mean(self) -> float:
        return 0.0  # centered laws have zero-mean quantile profiles


@dataclass(frozen=True)
class ProductProfile(CellProfile):
    """Pointwise product of two profiles (created by contractions)."""

    left: CellProfile
    right: CellProfile

    def __call__(self, t):
        return np.asarray(self.left(t)) * np.asarray(self.right(t))

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(sorted({*self.left.breakpoints, *self.right.breakpoints}))

    def zeros(self) -> tuple[float, ...]:
        return tuple(sorted({*self.left.zeros(), *self.right.zeros()}))

    @property
    def cell_mean(self) -> float:
        return profile_inner(self.left, self.right)

    def factors(self) -> tuple[CellProfile, ...]:
        out: list[CellProfile] = []
        for side in (self.left, self.right):
            if isinstance(side, ProductProfile):
                out.extend(side.factors())
            else:
                out.append(side)
        return tuple(out)


def product_profile(p: CellProfile, q: CellProfile) -> CellProfile:
    """Pointwise product, merging polynomial factors exactly."""
    if isinstance(p, PolyProfile) and isinstance(q, PolyProfile):
        return PolyProfile(tuple(np.convolve(p.coeffs, q.coeffs)))
    return ProductProfile(p, q)


def _flatten_factors(profiles) -> list[CellProfile]:
    out: list[CellProfile] = []
    for p in profiles:
        if isinstance(p, ProductProfile):
            out.extend(p.factors())
        else:
            out.append(p)
    return out


def _cell_product_integral(profiles) -> float:
    """integral_0^2 prod_i p_i(t) dt, routed for accuracy.

    Powers of a single quantile profile go through the law's moments (the
    t-integral of F^{-1}(t/2)^k equals twice the k-th signed moment), which
    stays accurate even when the quantile blows up at the cell edge.
    """
    factors = _flatten_factors(profiles)
    quantiles = [p for p in factors if isinstance(p, QuantileProfile)]
    polys = [p for p in factors if isinstance(p, PolyProfile)]
    if len(quantiles) == len(factors) and factors:
        dists = {q.dist for q in quantiles}
        if len(dists) == 1:
            d = next(iter(dists))
            k = len(quantiles)
            return 2.0 * (d.moment(k) if k > 1 else 0.0)
    if len(polys) == len(factors):
        coeffs = (1.0,)
        for p in polys:
            coeffs = tuple(np.convolve(coeffs, p.coeffs))
        return 2.0 * PolyProfile(coeffs).cell_mean
    # mixed case: adaptive quadrature in local coordinates
    breaks = sorted({b for p in factors for b in p.breakpoints})

    def fn(t: float) -> float:
        out = 1.0
        for p in factors:
            out *= float(p(t))
        return out

    return integrate(fn, 0.0, 2.0, points=breaks)


@lru_cache(maxsize=None)
def _inner_cached(p: CellProfile, q: CellProfile) -> float:
    return 0.5 * _cell_product_integral((p, q))


def profile_inner(p: CellProfile, q: CellProfile) -> float:
    """dx/2 inner product on one cell: (1/2) * integral_0^2 p q dt."""
    if hash(q) < hash(p):
        p, q = q, p
    return _inner_cached(p, q)


@lru_cache(maxsize=None)
def _pow_integral(p: CellProfile, k: int) -> float:
    return _cell_product_integral((p,) * k)


@lru_cache(maxsize=None)
def _abs_pow_integral(p: CellProfile, k: int) -> float:
    if isinstance(p, QuantileProfile):
        return 2.0 * p.dist.abs_moment(k)
    if k % 2 == 0:
        return _pow_integral(p, k)
    cuts = sorted({*p.breakpoints, *p.zeros()})
    return gl_cell_integral(lambda t: np.abs(np.asarray(p(t), dtype=float)) ** k, cuts)


# ---------------------------------------------------------------------------
# Tensors
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ChaosTerm:
    """One separable term: coefficient tensor x per-axis profiles."""

    coeffs: np.ndarray
    profiles: tuple[CellProfile, ...]

    def __post_init__(self):
        arr = np.asarray(self.coeffs, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)
        if arr.ndim != len(self.profiles):
            raise DomainError("coefficient order does not match profile count")


@dataclass(frozen=True, eq=False)
class ChaosTensor:
    """Order-n integrand as a formal sum of separable terms over N cells."""

    cells: int
    order: int
    terms: tuple[ChaosTerm, ...]

    def __post_init__(self):
        for t in self.terms:
            if t.coeffs.ndim != self.order:
                raise DomainError("term order mismatch")
            if self.order > 0 and any(s != self.cells for s in t.coeffs.shape):
                raise DomainError("coefficient tensor shape must be (cells,)*order")
        if self.order > 0 and self.cells**self.order > _MAX_DENSE_ENTRIES:
            raise CapacityError("dense coefficient tensor too large")

    # -- constructors ------------------------------------------------------
    @staticmethod
    def from_coeffs(coeffs, profiles, cells: int | None = None) -> "ChaosTensor":
        arr = np.asarray(coeffs, dtype=float)
        profiles = tuple(profiles)
        n = arr.ndim
        if cells is None:
            cells = arr.shape[0] if n else 0
        return ChaosTensor(cells, n, (ChaosTerm(arr, profiles),))

    @staticmethod
    def scalar(value: float, cells: int = 0) -> "ChaosTensor":
        return ChaosTensor(cells, 0, (ChaosTerm(np.asarray(float(value)), ()),))

    @staticmethod
    def zero(cells: int, order: int) -> "ChaosTensor":
        return ChaosTensor(cells, order, ())

    # -- structure ---------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return all(not np.any(t.coeffs) for t in self.terms)

    @property
    def is_canonical(self) -> bool:
        return all(p.is_canonical for t in self.terms for p in t.profiles)

    def scaled(self, a: float) -> "ChaosTensor":
        return ChaosTensor(
            self.cells, self.order,
            tuple(ChaosTerm(a * t.coeffs, t.profiles) for t in self.terms),
        )

    def merged(self) -> "ChaosTensor":
        """Combine terms with identical profile tuples; drop zero terms."""
        acc: dict[tuple[CellProfile, ...], np.ndarray] = {}
        for t in self.terms:
            if t.profiles in acc:
                acc[t.profiles] = acc[t.profiles] + t.coeffs
            else:
                acc[t.profiles] = t.coeffs.copy()
        terms = tuple(
            ChaosTerm(c, p) for p, c in acc.items() if np.any(np.abs(c) > 0.0)
        )
        return ChaosTensor(self.cells, self.order, terms)

    def __add__(self, other: "ChaosTensor") -> "ChaosTensor":
        if self.order != other.order:
            raise DomainError("cannot add tensors of different order")
        cells = max(self.cells, other.cells)
        if self.cells != other.cells and self.order > 0:
            raise DomainError("cell counts differ")
        return ChaosTensor(cells, self.order, self.terms + other.terms).merged()


@dataclass(frozen=True)
class ChaosSample:
    """One realization: a uniform variate in [-1, 1] per cell."""

    u: tuple[float, ...]

    def __post_init__(self):
        arr = np.asarray(self.u, dtype=float)
        if arr.size and (np.any(arr < -1.0) or np.any(arr > 1.0)):
            raise DataError("sample entries must lie in [-1, 1]")
        object.__setattr__(self, "u", tuple(float(x) for x in arr))


# ---------------------------------------------------------------------------
# Evaluation of I_n
# ---------------------------------------------------------------------------


def _distinct_tuple_sum(c: np.ndarray, vals: list[np.ndarray]) -> np.ndarray:
    """Sum over pairwise-distinct cell tuples of c[k] * prod_j vals[j][:, k_j].

    vals[j] has shape (m, cells).  Returns shape (m,).
    """
    r = c.ndim
    if r == 0:
        m = vals[0].shape[0] if vals else 1
        return np.full(1 if not vals else m, float(c))
    if r == 1:
        return vals[0] @ c
    if r == 2:
        full = np.einsum("ij,mi,mj->m", c, vals[0], vals[1])
        diag = np.einsum("i,mi->m", np.diagonal(c), vals[0] * vals[1])
        return full - diag
    if r == 3:
        v0, v1, v2 = vals
        full = np.einsum("ijk,mi,mj,mk->m", c, v0, v1, v2)
        s01 = np.einsum("iik,mi,mk->m", c, v0 * v1, v2)
        s02 = np.einsum("iji,mi,mj->m", c, v0 * v2, v1)
        s12 = np.einsum("ijj,mj,mi->m", c, v1 * v2, v0)
        sall = np.einsum("iii,mi->m", c, v0 * v1 * v2)
        return full - s01 - s02 - s12 + 2.0 * sall
    # generic fallback: iterate stored entries with all-distinct indices
    m = vals[0].shape[0]
    out = np.zeros(m)
    for idx in np.argwhere(c != 0.0):
        tup = tuple(int(j) for j in idx)
        if len(set(tup)) != len(tup):
            continue
        prod = np.ones(m)
        for j, k in enumerate(tup):
            prod = prod * vals[j][:, k]
        out += c[tup] * prod
    return out


def evaluate_batch(f: ChaosTensor, u: np.ndarray) -> np.ndarray:
    """Evaluate I_n(f) on a batch of samples ``u`` of shape (m, cells)."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    m = u.shape[0]
    if f.order > 0 and u.shape[1] < f.cells:
        raise DomainError("sample has fewer cells than the integrand")
    out = np.zeros(m)
    t_local = 1.0 + u
    for term in f.terms:
        n = f.order
        if n == 0:
            out += float(term.coeffs)
            continue
        means = [p.cell_mean for p in term.profiles]
        vals = [None] * n  # lazily computed per axis
        canonical = [abs(mu) <= CANONICAL_TOL for mu in means]
        axes_all = range(n)
        for subset_mask in range(1 << n):
            subset = [j for j in axes_all if subset_mask >> j & 1]
            rest = [j for j in axes_all if not subset_mask >> j & 1]
            if any(canonical[j] for j in rest):
                continue  # excluded canonical axis kills the term
            weight = 1.0
            for j in rest:
                weight *= -means[j]
            if weight == 0.0:
                continue
            cs = term.coeffs.sum(axis=tuple(rest)) if rest else term.coeffs
            for j in subset:
                if vals[j] is None:
                    vals[j] = np.asarray(
                        term.profiles[j](t_local[:, : f.cells]), dtype=float
                    )
            out += weight * _distinct_tuple_sum(cs, [vals[j] for j in subset])
    return out


def evaluate_integral(f: ChaosTensor, sample: ChaosSample) -> float:
    """Evaluate I_n(f) on a single sample."""
    return float(evaluate_batch(f, np.asarray(sample.u)[None, :])[0])


# ---------------------------------------------------------------------------
# Inner products, contraction, symmetrization
# ---------------------------------------------------------------------------


def l2_inner(f: ChaosTensor, g: ChaosTensor) -> float:
    """<f, g> in L^2(dx/2)^{tensor n} over the cell decomposition."""
    if f.order != g.order:
        raise DomainError("inner product needs equal orders")
    total = 0.0
    for a in f.terms:
        for b in g.terms:
            w = 1.0
            for p, q in zip(a.profiles, b.profiles):
                w *= profile_inner(p, q)
            if w != 0.0:
                total += w * float(np.vdot(a.coeffs, b.coeffs))
    return total


def l2_norm_sq(f: ChaosTensor) -> float:
    """Squared L^2(dx/2)^{tensor n} norm of the integrand."""
    return l2_inner(f, f)


def restrict_to_delta(f: ChaosTensor) -> ChaosTensor:
    """Zero every coefficient with a repeated cell index."""
    if f.order < 2:
        return f
    idx = np.indices((f.cells,) * f.order)
    keep = np.ones((f.cells,) * f.order, dtype=bool)
    for a in range(f.order):
        for b in range(a + 1, f.order):
            keep &= idx[a] != idx[b]
    terms = tuple(ChaosTerm(t.coeffs * keep, t.profiles) for t in f.terms)
    return ChaosTensor(f.cells, f.order, terms)


_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def contract(f: ChaosTensor, g: ChaosTensor, k: int, i: int,
             restrict: bool = True) -> ChaosTensor:
    """Contraction pairing k axes of f and g and integrating out i of them.

    The i integrated axis pairs contribute dx/2 profile inner products on a
    shared cell index (summed); the k - i identified-but-kept axes get the
    pointwise product profile on a shared cell index; remaining axes pass
    through.  Repeated-index collisions in the output are zeroed unless
    ``restrict`` is False (oracle hooks need the unrestricted tensor).
    """
    n, m = f.order, g.order
    if not (0 <= i <= k <= min(n, m)):
        raise DomainError(f"need 0 <= i <= k <= min(n, m); got k={k}, i={i}")
    if f.cells != g.cells and min(n, m) > 0 and f.cells and g.cells:
        raise DomainError("cell counts differ")
    cells = max(f.cells, g.cells)
    out_order = (k - i) + (n - k) + (m - k)

    z = _LETTERS[:i]
    gam = _LETTERS[i:k]
    ts = _LETTERS[k : k + (n - k)]
    ss = _LETTERS[k + (n - k) : k + (n - k) + (m - k)]
    spec = f"{z}{gam}{ts},{z}{gam}{ss}->{gam}{ts}{ss}"

    terms: list[ChaosTerm] = []
    for a in f.terms:
        for b in g.terms:
            scalar = 1.0
            for j in range(i):
                scalar *= profile_inner(a.profiles[j], b.profiles[j])
            if scalar == 0.0:
                continue
            coeffs = scalar * np.einsum(spec, a.coeffs, b.coeffs)
            profiles = tuple(
                product_profile(a.profiles[j], b.profiles[j]) for j in range(i, k)
            ) + a.profiles[k:] + b.profiles[k:]
            terms.append(ChaosTerm(coeffs, profiles))
    result = ChaosTensor(cells, out_order, tuple(terms)).merged()
    return restrict_to_delta(result) if restrict else result


def symmetrize(f: ChaosTensor) -> ChaosTensor:
    """Average over axis permutations (with matching profile reassignment)."""
    n = f.order
    if n > _MAX_SYM_ORDER:
        raise CapacityError(f"symmetrize supports order <= {_MAX_SYM_ORDER}")
    if n <= 1:
        return f.merged()
    terms: list[ChaosTerm] = []
    weight = 1.0 / math.factorial(n)
    for t in f.terms:
        for perm in itertools.permutations(range(n)):
            coeffs = weight * np.transpose(t.coeffs, axes=perm)
            profiles = tuple(t.profiles[j] for j in perm)
            terms.append(ChaosTerm(coeffs, profiles))
    return ChaosTensor(f.cells, n, tuple(terms)).merged()


def apply_L_inverse(f: ChaosTensor) -> ChaosTensor:
    """Inverse number operator on a fixed-order integrand: scale by -1/n."""
    if f.order < 1:
        raise DomainError("inverse number operator needs order >= 1")
    return f.scaled(-1.0 / f.order)


def require_canonical(f: ChaosTensor, what: str) -> None:
    if not f.is_canonical:
        raise PreconditionError(f"{what} requires canonical profiles")


def multiply(f: ChaosTensor, g: ChaosTensor) -> list[ChaosTensor]:
    """Expand I_n(f) * I_m(g) as a sum of single multiple integrals.

    Returns tensors h[0], ..., h[n+m], indexed by integral order, with the
    pathwise identity I_n(f) * I_m(g) = sum_j I_j(h[j]).  The coefficient of
    the contraction pairing k axes and integrating i of them is
    k! C(n,k) C(m,k) C(k,i), and each contraction is symmetrized.
    """
    require_canonical(f, "multiplication formula")
    require_canonical(g, "multiplication formula")
    n, m = f.order, g.order
    if max(n, m) > 3:
        raise CapacityError("multiplication formula implemented for orders <= 3")
    cells = max(f.cells, g.cells)
    out: list[ChaosTensor] = [ChaosTensor.zero(cells, j) for j in range(n + m + 1)]
    for k in range(min(n, m) + 1):
        base = math.factorial(k) * math.comb(n, k) * math.comb(m, k)
        for i in range(k + 1):
            w = base * math.comb(k, i)
            h = symmetrize(contract(f, g, k, i))
            j = n + m - k - i
            out[j] = out[j] + h.scaled(float(w))
    return out


def g_operator(f: ChaosTensor, k: int) -> ChaosTensor:
    """Order-k part of the square: (I_n f)^2 = sum_k I_k(G_k f).

    G_k f collects the contractions with 2n - r - l = k, weighted by
    r! C(n,r)^2 C(r,l), symmetrized, and restricted to distinct cells.
    """
    n = f.order
    if not 0 <= k <= 2 * n:
        raise DomainError(f"order-k part needs 0 <= k <= 2n; got {k}")
    require_canonical(f, "square expansion")
    acc = ChaosTensor.zero(f.cells, k)
    for r in range(n + 1):
        for l in range(r + 1):
            if 2 * n - r - l != k:
                continue
            w = math.factorial(r) * math.comb(n, r) ** 2 * math.comb(r, l)
            acc = acc + symmetrize(contract(f, f, r, l)).scaled(float(w))
    return acc


# ---------------------------------------------------------------------------
# IO
# ---------------------------------------------------------------------------


def load_coeffs_csv(path, order: int, cells: int, profiles) -> ChaosTensor:
    """Build a tensor from CSV rows ``k1,...,kn,value`` and given profiles."""
    arr = np.zeros((cells,) * order)
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            if row[0].strip().lower().startswith("k"):
                continue  # header
            if len(row) != order + 1:
                raise DataError(f"expected {order + 1} columns, got {len(row)}")
            idx = tuple(int(v) for v in row[:order])
            arr[idx] = float(row[order])
    return ChaosTensor.from_coeffs(arr, profiles, cells)
