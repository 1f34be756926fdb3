"""Bound formulas: worked values, recombination, and cross-route agreement."""

import itertools
import math

import numpy as np
import pytest
from scipy import special

from steinbench.bounds import (
    IndexSetFamily,
    beta_kernel_expr,
    beta_third_moment_expr,
    bound_bernoulli_weighted,
    bound_gamma_target,
    bound_generic_kernel,
    bound_multiple_nabla,
    bound_quadratic_D,
    bound_quadratic_nabla,
    bound_single_integral_D,
    bound_single_integral_nabla,
    bound_sum_kernel,
    bound_sum_normalized,
    bound_sum_third_moment,
    comb_clt_quantities,
    comb_clt_report,
    comparison_curves,
    FORMULAS,
    load_index_family_csv,
    load_matrix_csv,
    load_weights_csv,
    normalized_sum_family,
    quadratic_tensor,
    regularized_upper_gamma,
    sum_tensor,
    tv_counterpart,
)
from steinbench.chaos import ChaosTensor, PolyProfile
from steinbench.distributions import (
    CenteredBeta,
    CenteredGamma,
    Gaussian,
    NormalizedBernoulli,
    UniformSym,
    normalized,
)
from steinbench.errors import (
    DomainError,
    InvalidMomentsError,
    UnsupportedKernelError,
)

S3 = math.sqrt(3.0)
UNIT = PolyProfile((-S3, S3))
UNIFORM = UniformSym(1.0)


def pairwise_matrix(npairs: int) -> np.ndarray:
    n = 2 * npairs
    a = np.zeros((n, n))
    t = 1.0 / math.sqrt(2.0 * npairs)  # sum of squares normalized to one
    for k in range(npairs):
        a[2 * k, 2 * k + 1] = a[2 * k + 1, 2 * k] = t
    return a


def random_normalized_matrix(rng, n=6) -> np.ndarray:
    a = rng.normal(size=(n, n))
    a = 0.5 * (a + a.T)
    np.fill_diagonal(a, 0.0)
    return a / math.sqrt(np.sum(a * a))


# ---------------------------------------------------------------------------
# Sum bounds
# ---------------------------------------------------------------------------


def test_third_moment_single_gaussian():
    rep = bound_sum_third_moment([Gaussian(1.0)])
    e1 = math.sqrt(2.0 / math.pi)
    assert rep.value == pytest.approx(2.0 * e1 + e1, rel=1e-12)
    assert rep.term("variance_gap") == 0.0


def test_third_moment_iid_normalized_formula():
    d = normalized(CenteredGamma(2.0))
    n = 5
    rep = bound_sum_third_moment([d] * n)
    expected = abs(1.0 - n) + n * d.abs_moment(3) + n * d.abs_moment(1)
    assert rep.value == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("n", [1, 4, 100])
def test_normalized_sum_uniform(n):
    rep = bound_sum_normalized(normalized_sum_family(UNIFORM, n))
    assert rep.value == pytest.approx(2.0 * (3.0 * S3 / 4.0) / math.sqrt(n), rel=1e-12)


def test_normalized_sum_gaussian_unnormalized_inputs():
    # four unit Gaussians: 2 * 4 * E|X|^3 / (E[Z^2])^{3/2} = 2 sqrt(2/pi)
    rep = bound_sum_normalized([Gaussian(1.0)] * 4)
    assert rep.value == pytest.approx(2.0 * math.sqrt(2.0 / math.pi), rel=1e-12)


def test_kernel_sum_gaussian_is_exactly_zero():
    # dyadic variances sum to exactly one; the kernel term is analytic zero
    for sigma, n in ((0.5, 4), (0.25, 16), (0.125, 64)):
        fam = [Gaussian(sigma)] * n
        w1, tv = bound_sum_kernel(fam)
        assert w1.value == 0.0
        assert tv.value == 0.0
    # the general normalized family stays at rounding level
    w1, _ = bound_sum_kernel(normalized_sum_family(Gaussian(1.0), 6))
    assert w1.value <= 1e-15


@pytest.mark.parametrize("n", [1, 3, 5, 25])
def test_kernel_sum_uniform(n):
    w1, tv = bound_sum_kernel(normalized_sum_family(UNIFORM, n))
    assert w1.value == pytest.approx(1.0 / math.sqrt(5.0 * n), abs=1e-12)
    assert tv.value == 2.0 * w1.value


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("n", [1, 4, 16])
def test_kernel_sum_gamma(s, n):
    w1, _ = bound_sum_kernel(normalized_sum_family(CenteredGamma(s), n))
    assert w1.value == pytest.approx(1.0 / math.sqrt(n * s), rel=1e-12)


def test_kernel_sum_rejects_discrete():
    with pytest.raises(UnsupportedKernelError):
        bound_sum_kernel([NormalizedBernoulli(0.5)])


@pytest.mark.parametrize("dist", [CenteredGamma(0.5), CenteredGamma(1.0),
                                  CenteredGamma(2.0), CenteredBeta(0.5),
                                  CenteredBeta(1.0), CenteredBeta(2.0)], ids=str)
def test_kernel_improves_on_normalized_sum(dist):
    for n in range(1, 101):
        fam = normalized_sum_family(dist, n)
        kernel, _ = bound_sum_kernel(fam)
        third = bound_sum_normalized(fam)
        assert kernel.value <= third.value


def test_generic_kernel_examples():
    w1, tv = bound_generic_kernel(1.0, 1.0)
    assert w1.value == 0.0 and tv.value == 0.0
    s = 2.0
    w1, _ = bound_generic_kernel(s, s * (1.0 + s))
    assert w1.value == pytest.approx(abs(1.0 - s) + math.sqrt(s), rel=1e-12)
    e2, ks = 1.0 / 12.0, 1.0 / 120.0
    w1, _ = bound_generic_kernel(e2, ks)
    assert w1.value == pytest.approx(11.0 / 12.0 + math.sqrt(1.0 / 120.0 - 1.0 / 144.0),
                                     rel=1e-12)
    with pytest.raises(InvalidMomentsError):
        bound_generic_kernel(1.0, 0.5)


def test_gamma_target():
    s = 2.0
    rep = bound_gamma_target(CenteredGamma(s), s)
    assert rep.term("kernel_deviation") == pytest.approx(math.sqrt(s), rel=1e-12)
    assert rep.term("l2_shift") == pytest.approx(math.sqrt(s * s + 4.0 * s), rel=1e-12)
    # quadrature oracle fixes the first printed form: E|2(X+s) - (X+s)| = E[X+s] = s
    assert rep.term("first_form_expectation") == pytest.approx(s, rel=1e-8)
    with pytest.raises(DomainError):
        bound_gamma_target(Gaussian(1.0), 1.0)  # support unbounded below


def test_gamma_target_constant_kernel_case():
    # bounded-below law with constant kernel: only the shift term remains
    rep = bound_gamma_target(UniformSym(1.0), 2.0)
    m2 = 1.0 / 3.0
    assert rep.term("l2_shift") == pytest.approx(
        math.sqrt(4.0 * m2 + (4.0 - m2) ** 2), rel=1e-12)


def test_bernoulli_weighted_examples():
    n = 4
    rep = bound_bernoulli_weighted([1.0 / math.sqrt(n)] * n, [0.5] * n)
    assert rep.value == pytest.approx(2.0 / math.sqrt(n), rel=1e-12)
    rep1 = bound_bernoulli_weighted([1.0], [0.5])
    assert rep1.value == pytest.approx(2.0, rel=1e-12)
    p = 0.3
    rep2 = bound_bernoulli_weighted([1.0, 0.0, 0.0], [p, 0.9, 0.1])
    expected = 2.0 * (1.0 - 2.0 * p * (1.0 - p)) / math.sqrt(p * (1.0 - p))
    assert rep2.value == pytest.approx(expected, rel=1e-12)


# ---------------------------------------------------------------------------
# Single-integral bounds
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("n", [1, 3, 5, 25])
def test_single_nabla_uniform_two_term(n):
    rep = bound_single_integral_nabla(sum_tensor(normalized_sum_family(UNIFORM, n)))
    assert rep.term("two_term") == pytest.approx(0.75 * math.sqrt(3.0 / n), abs=1e-12)
    assert rep.value == pytest.approx(1.25 * math.sqrt(3.0 / n), abs=1e-12)
    assert rep.term("two_term_hoelder") == pytest.approx(1.5 * math.sqrt(3.0 / n), abs=1e-12)


def test_single_nabla_zero_tensor():
    rep = bound_single_integral_nabla(ChaosTensor.zero(3, 1))
    assert rep.value == 1.0


@pytest.mark.parametrize("dists", [
    [Gaussian(1.0)],
    normalized_sum_family(CenteredGamma(1.0), 3),
    normalized_sum_family(CenteredBeta(2.0), 4),
    [normalized(UniformSym(1.0)), normalized(CenteredBeta(1.0))],
], ids=["gauss1", "gamma3", "beta4", "mixed"])
def test_single_nabla_equals_moment_route(dists):
    # the profile-integral route must reproduce the moment formula exactly
    tensor_rep = bound_single_integral_nabla(sum_tensor(dists))
    moment_rep = bound_sum_third_moment(dists)
    assert tensor_rep.value == pytest.approx(moment_rep.value, rel=1e-10)


def test_single_nabla_three_term_below_hoelder():
    rng = np.random.default_rng(2)
    for _ in range(10):
        coeffs = rng.normal(size=3)
        raw = PolyProfile(tuple(coeffs))
        prof = PolyProfile((coeffs[0] - raw.cell_mean, coeffs[1], coeffs[2]))
        f = ChaosTensor.from_coeffs(rng.normal(size=4), (prof,))
        rep = bound_single_integral_nabla(f)
        assert rep.value <= rep.term("two_term_hoelder") + 1e-12


@pytest.mark.parametrize("n", [1, 3, 5, 25])
def test_single_d_uniform(n):
    w1, tv = bound_single_integral_D(sum_tensor(normalized_sum_family(UNIFORM, n)))
    assert w1.value == pytest.approx(1.0 / math.sqrt(5.0 * n), abs=1e-12)
    assert tv.value == 2.0 * w1.value


def test_single_d_gaussian_cell_is_zero():
    w1, _ = bound_single_integral_D(sum_tensor([Gaussian(1.0)]))
    assert w1.value == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 5.0])
@pytest.mark.parametrize("n", [2, 9])
def test_single_d_beta_closed_form(alpha, n):
    w1, _ = bound_single_integral_D(
        sum_tensor(normalized_sum_family(CenteredBeta(alpha), n)))
    assert w1.value == pytest.approx(beta_kernel_expr(alpha) / math.sqrt(n), rel=1e-9)


def test_single_d_polynomial_profile_route():
    # canonical quadratic profile: exact polynomial integration path
    prof = PolyProfile((-1.0, 0.0, 0.75))  # mean-zero on [0, 2)
    assert abs(prof.cell_mean) < 1e-12
    f = ChaosTensor.from_coeffs([1.0], (prof,))
    w1, _ = bound_single_integral_D(f)
    anti = prof.antiderivative()
    deriv = prof.derivative()
    from steinbench.quadrature import gl_cell_integral
    a_val = gl_cell_integral(lambda t: (np.asarray(deriv(t)) * np.asarray(anti(t))) ** 2)
    b_val = prof.pow_integral(2) ** 2
    expected = abs(1.0 - 0.5 * prof.pow_integral(2)) + 0.5 * math.sqrt(2 * a_val - b_val)
    assert w1.value == pytest.approx(expected, rel=1e-10)


# ---------------------------------------------------------------------------
# Quadratic forms and the generic order route
# ---------------------------------------------------------------------------


def test_quadratic_cross_check_random_matrices():
    rng = np.random.default_rng(42)
    for _ in range(20):
        a = random_normalized_matrix(rng)
        direct = bound_quadratic_nabla(a, UNIFORM)
        via_tensor = bound_multiple_nabla(quadratic_tensor(a, UNIFORM))
        assert direct.value == pytest.approx(via_tensor.value, abs=1e-9)


def test_quadratic_pairwise_cap():
    for npairs in (25, 100):
        for dist in (UNIFORM, CenteredGamma(1.0)):
            rep = bound_quadratic_nabla(pairwise_matrix(npairs), dist)
            mu4 = normalized(dist).abs_moment(4)
            assert rep.value <= 8.0 * mu4 / math.sqrt(npairs)
            assert rep.term("pairwise_cap") == pytest.approx(
                8.0 * mu4 / math.sqrt(npairs), rel=1e-12)


def test_quadratic_pairwise_middle_expression():
    # normalized uniform fourth moment is 9/5
    rep = bound_quadratic_nabla(pairwise_matrix(100), UNIFORM)
    mu4 = 9.0 / 5.0
    expected = math.sqrt(2.0 / 100.0) * (
        math.sqrt(1.0 + mu4) + 2.0 * math.sqrt(3.0 * mu4 + mu4**2))
    assert rep.term("pairwise_middle") == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(1.068, abs=2e-3)


def test_quadratic_rejects_degenerate():
    with pytest.raises(DomainError):
        bound_quadratic_nabla(np.zeros((4, 4)), UNIFORM)
    bad = np.eye(3)
    with pytest.raises(DomainError):
        bound_quadratic_nabla(bad, UNIFORM)


def test_quadratic_unnormalized_flag():
    a = pairwise_matrix(4) * 2.0
    rep = bound_quadratic_nabla(a, UNIFORM)
    assert "unnormalized" in rep.flags


def test_quadratic_d_formula():
    s = 1.0
    a = pairwise_matrix(25)
    w1, tv = bound_quadratic_D(a, CenteredGamma(s))
    d = normalized(CenteredGamma(s))
    phi2 = d.kernel_second_moment()
    assert phi2 == pytest.approx(2.0, rel=1e-12)  # gamma kernel second moment
    mu4 = d.abs_moment(4)
    rowsq = np.sum(a * a, axis=1)
    expected = 4.0 * math.sqrt(
        phi2 * (2.0 + mu4) * np.max(rowsq)
        + 2.0 * np.sum((a @ a) ** 2)
        - np.sum(np.sum(np.tril(a * a, k=-1), axis=1) ** 2)
    )
    assert w1.value == pytest.approx(expected, rel=1e-12)
    assert tv.value == 2.0 * w1.value


def test_quadratic_d_single_pair_hand_expansion():
    t = 1.0 / math.sqrt(2.0)
    a = np.array([[0.0, t], [t, 0.0]])
    d = CenteredGamma(1.0)
    w1, _ = bound_quadratic_D(a, d)
    phi2, mu4 = 2.0, normalized(d).abs_moment(4)
    # L^2 = 1/2, sum (A^2)^2 = 1/2, lower-triangle term = 1/4
    expected = 4.0 * math.sqrt(phi2 * (2.0 + mu4) * 0.5 + 2.0 * 0.5 - 0.25)
    assert w1.value == pytest.approx(expected, rel=1e-12)


def test_quadratic_d_rejects_discrete():
    with pytest.raises(UnsupportedKernelError):
        bound_quadratic_D(pairwise_matrix(2), NormalizedBernoulli(0.5))


def test_multiple_nabla_order1_direct_expression():
    f = sum_tensor(normalized_sum_family(UNIFORM, 5))
    rep = bound_multiple_nabla(f)
    from steinbench.chaos import l2_norm_sq

    norm_sq = l2_norm_sq(f)
    quartic = 5 * (2.0 * (9.0 / 5.0) / 25.0)  # sum over cells of int profile^4
    expected = abs(1.0 - norm_sq) + math.sqrt(2.0) * math.sqrt(norm_sq) * math.sqrt(quartic)
    assert rep.value == pytest.approx(expected, rel=1e-10)


def test_multiple_nabla_zero_tensor():
    assert bound_multiple_nabla(ChaosTensor.zero(4, 2)).value == 1.0


def test_multiple_nabla_order3_runs():
    rng = np.random.default_rng(9)
    from steinbench.chaos import restrict_to_delta, symmetrize

    coeffs = rng.normal(size=(4, 4, 4))
    raw = ChaosTensor.from_coeffs(coeffs, (UNIT, UNIT, UNIT))
    f = symmetrize(restrict_to_delta(raw))
    rep = bound_multiple_nabla(f)
    assert math.isfinite(rep.value) and rep.value >= 0.0


def test_multiple_nabla_capacity_guard():
    from steinbench.errors import CapacityError

    f = ChaosTensor.from_coeffs(np.zeros((3,) * 4), (UNIT,) * 4)
    with pytest.raises(CapacityError):
        bound_multiple_nabla(f)


def test_slice_machinery_matches_hand_expansion():
    # for f = A (x) (p, p) with unit-normalized p, the half-integrated
    # square-expansion pieces have closed coefficient matrices
    from steinbench.bounds import _axis0_slices, _g_bilinear
    from steinbench.chaos import profile_inner

    rng = np.random.default_rng(8)
    a = random_normalized_matrix(rng, n=5)
    f = ChaosTensor.from_coeffs(a, (UNIT, UNIT))
    slices = _axis0_slices(f)

    def g_hat(k):
        acc = ChaosTensor.zero(f.cells, k)
        for per_cell in slices:
            for (pa, ha), (pb, hb) in ((x, y) for x in per_cell for y in per_cell):
                acc = acc + _g_bilinear(ha, hb, k).scaled(profile_inner(pa, pb))
        return acc

    order1 = g_hat(1)
    rowsq = np.sum(a * a, axis=1)
    assert np.allclose(order1.terms[0].coeffs, rowsq, atol=1e-12)

    order2 = g_hat(2)
    gram = a @ a
    np.fill_diagonal(gram, 0.0)  # the square expansion restricts the diagonal
    assert np.allclose(order2.terms[0].coeffs, gram, atol=1e-12)


# ---------------------------------------------------------------------------
# Combinatorial CLT
# ---------------------------------------------------------------------------


def test_comb_clt_q1_has_empty_recombination():
    fam = IndexSetFamily(1, frozenset({(1,), (2,), (5,)}))
    assert comb_clt_quantities(fam).mu_Ksharp == 0.0


def test_comb_clt_slice_example():
    fam = IndexSetFamily(2, frozenset({(1, 2), (2, 1), (1, 3), (3, 1)}))
    q = comb_clt_quantities(fam)
    assert q.mu_K == 4.0
    assert q.sup_ratio == 1.0
    assert q.mu_Ksharp == 0.0  # no disjoint pairs at all


def test_comb_clt_recombination_example():
    base = {(1, 2), (3, 4), (1, 4), (3, 2)}
    closure = {p for t in base for p in itertools.permutations(t)}
    fam = IndexSetFamily(2, frozenset(closure))
    q = comb_clt_quantities(fam)
    assert q.mu_Ksharp > 0.0
    assert q.bracket == pytest.approx(math.sqrt(q.mu_Ksharp) / q.mu_K
                                      + q.sup_ratio**0.25, rel=1e-12)


def test_comb_clt_rejects_repeated_entries():
    with pytest.raises(DomainError):
        IndexSetFamily(2, frozenset({(1, 1)}))


def test_comb_clt_report_flags_constant():
    fam = IndexSetFamily(2, frozenset({(0, 1), (1, 0)}))
    rep = comb_clt_report(fam, UNIFORM)
    assert "constant_unknown" in rep.flags
    assert rep.value == pytest.approx(rep.term("bracket") * rep.term("fourth_moment_power"),
                                      rel=1e-12)


# ---------------------------------------------------------------------------
# Comparison curves
# ---------------------------------------------------------------------------


def test_upper_incomplete_gamma_against_scipy():
    for a, x in [(0.3, 0.05), (0.3, 5.0), (1.0, 1.0), (3.5, 2.0), (3.5, 20.0),
                 (50.0, 45.0), (103.0, 100.0)]:
        assert regularized_upper_gamma(a, x) == pytest.approx(
            float(special.gammaincc(a, x)), rel=1e-10)


def test_gamma_ratio_curve():
    table = comparison_curves("gamma-ratio", [1e-3, 1.0, 10.0, 100.0])
    vals = dict((row[0], row[1]) for row in table.rows)
    assert abs(vals[1e-3] - 2.0) / 2.0 < 0.05
    assert vals[1.0] < vals[10.0] < vals[100.0]


def test_beta_ratio_curve_always_above_one():
    grid = np.linspace(0.1, 10.0, 100)
    table = comparison_curves("beta-ratio", grid)
    assert len(table.rows) == 100
    for _, tm, kb, ratio in table.rows:
        assert ratio > 1.0
        assert ratio == pytest.approx(tm / kb, rel=1e-12)


def test_beta_third_moment_expr_matches_quadrature():
    for alpha in (0.5, 1.0, 2.0, 7.0):
        d = normalized(CenteredBeta(alpha))
        assert beta_third_moment_expr(alpha) == pytest.approx(d.abs_moment(3), rel=1e-8)


def test_curves_reject_bad_input():
    with pytest.raises(DomainError):
        comparison_curves("gamma-ratio", [-1.0])
    with pytest.raises(DomainError):
        comparison_curves("nope", [1.0])


# ---------------------------------------------------------------------------
# Report structure
# ---------------------------------------------------------------------------


def _all_reports():
    fam = normalized_sum_family(UNIFORM, 4)
    w1k, tvk = bound_sum_kernel(fam)
    w1g, tvg = bound_generic_kernel(1.0, 1.2)
    w1s, tvs = bound_single_integral_D(sum_tensor(fam))
    w1q, tvq = bound_quadratic_D(pairwise_matrix(4), UNIFORM)
    return [
        bound_sum_third_moment(fam),
        bound_sum_normalized(fam),
        w1k, tvk, w1g, tvg, w1s, tvs, w1q, tvq,
        bound_gamma_target(CenteredGamma(1.0), 1.0),
        bound_single_integral_nabla(sum_tensor(fam)),
        bound_bernoulli_weighted([0.5] * 4, [0.4] * 4),
        bound_quadratic_nabla(pairwise_matrix(4), UNIFORM),
        bound_multiple_nabla(quadratic_tensor(pairwise_matrix(4), UNIFORM)),
        comb_clt_report(IndexSetFamily(2, frozenset({(0, 1), (1, 0)})), UNIFORM),
    ]


RECOMBINE = {
    "third-moment": lambda t: t["variance_gap"] + t["third_moments"] + t["mean_sq_products"],
    "normalized-sum": lambda t: 2.0 * t["third_moments"] / t["variance_scale"],
    "kernel-sum": lambda t: t["variance_gap"] + t["kernel_deviation"],
    "generic-kernel": lambda t: t["variance_gap"] + t["kernel_deviation"],
    "gamma-target": lambda t: t["l2_shift"] + t["kernel_deviation"],
    "single-nabla": lambda t: t["variance_gap"] + t["half_abs_cube"] + t["cell_products"],
    "single-d": lambda t: t["variance_gap"] + t["kernel_deviation"],
    "bernoulli-weighted": lambda t: t["variance_gap"] + t["third_moments"],
    "quadratic-nabla": lambda t: t["first_radical"] + t["second_radical"],
    "multiple-nabla": lambda t: t["first_radical"] + t["second_radical"],
    "quadratic-d": lambda t: 4.0 * math.sqrt(t["bracket"]),
    "comb-clt": lambda t: t["bracket"] * t["fourth_moment_power"],
}


def test_reports_are_finite_nonnegative_and_recombine():
    # TV reports keep the W1 term breakdown and double the recombined value
    for rep in _all_reports():
        assert math.isfinite(rep.value)
        assert rep.value >= 0.0
        expected = RECOMBINE[rep.formula_id](rep.terms_dict)
        if rep.metric == "TV":
            expected *= 2.0
        assert abs(rep.value - expected) <= 1e-12 * max(1.0, abs(rep.value))


def test_tv_reports_double_exactly():
    fam = normalized_sum_family(UNIFORM, 4)
    for w1, tv in [
        bound_sum_kernel(fam),
        bound_generic_kernel(1.0, 1.2),
        bound_single_integral_D(sum_tensor(fam)),
        bound_quadratic_D(pairwise_matrix(4), UNIFORM),
    ]:
        assert tv.value == 2.0 * w1.value
        assert tv.metric == "TV" and w1.metric == "W1"
    with pytest.raises(DomainError):
        tv_counterpart(bound_sum_third_moment(fam))


def test_formula_registry_count():
    assert len(FORMULAS) == 13


# ---------------------------------------------------------------------------
# CSV loaders
# ---------------------------------------------------------------------------


def test_load_matrix_csv(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("k,l,value\n0,1,0.5\n1,0,0.5\n")
    a = load_matrix_csv(path)
    assert a.shape == (2, 2)
    assert a[0, 1] == 0.5


def test_load_weights_and_family_csv(tmp_path):
    wpath = tmp_path / "w.csv"
    wpath.write_text("k,b\n0,1.0\n1,2.0\n2,0.5\n")
    weights = load_weights_csv(wpath)
    assert weights == (1.0, 2.0, 0.5)
    fpath = tmp_path / "fam.csv"
    fpath.write_text("i1,i2\n0,1\n1,2\n")
    fam = load_index_family_csv(fpath, weights)
    assert (1, 0) in fam.tuples  # permutation closure
    q = comb_clt_quantities(fam)
    assert q.mu_K == pytest.approx((1.0 * 4.0 + 4.0 * 0.25) * 2.0, rel=1e-12)
