import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose
from scipy import integrate
from scipy.special import gamma as gamma_fn

from mspc.errors import DimensionMismatch, DomainError, IndefiniteMatrix, NotSymmetric
from mspc.linalg import (
    Rng,
    chi2_cdf,
    chi2_quantile,
    diag_repeat,
    kron,
    max_norm_affine_over_ball,
    sample_gaussian,
    sym_sqrt,
    unvec,
    vec,
)

# Frozen via the quadrature oracle below (and standard tables).
CHI2_1_95 = 3.841458820694124
CHI2_2_95 = 5.991464547107979


def chi2_cdf_quadrature(dof: int, x: float) -> float:
    """Independent oracle: numerically integrate the chi-squared density."""
    def density(t):
        return t ** (dof / 2.0 - 1.0) * math.exp(-t / 2.0) / (
            2.0 ** (dof / 2.0) * gamma_fn(dof / 2.0)
        )
    val, _ = integrate.quad(density, 0.0, x, limit=200)
    return val


def sampled_ball_max(a, m, r, n_samples, gen, refine=400):
    """Oracle for the ball maximization: dense boundary sampling plus
    a conditional-gradient ascent polish from the best sample."""
    dim = m.shape[1]
    z = gen.standard_normal((n_samples, dim))
    z *= r / np.linalg.norm(z, axis=1, keepdims=True)
    vals = np.linalg.norm(a + z @ m.T, axis=1)
    raw_max = float(vals.max())
    b = m.T @ a
    bmat = m.T @ m
    z_best = z[int(np.argmax(vals))]
    for _ in range(refine):
        g = bmat @ z_best + b
        norm_g = np.linalg.norm(g)
        if norm_g < 1e-300:
            break
        z_best = r * g / norm_g
    polished = float(np.linalg.norm(a + m @ z_best))
    return raw_max, max(raw_max, polished)


# ---------------------------------------------------------------------------
# Kronecker / vec
# ---------------------------------------------------------------------------


def test_kron_identity_left():
    b = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert_allclose(kron(np.eye(1), b), b)


def test_kron_definition_expansion():
    assert_allclose(
        kron(np.array([[1.0, 2.0]]), np.array([[0.0], [1.0]])),
        np.array([[0.0, 0.0], [1.0, 2.0]]),
    )


def test_vec_definition():
    assert_allclose(vec(np.array([[1.0, 2.0], [3.0, 4.0]])), [1.0, 3.0, 2.0, 4.0])


def test_vec_zero():
    assert_allclose(vec(np.zeros((2, 3))), np.zeros(6))


def test_unvec_round_trip(gen):
    a = gen.standard_normal((3, 5))
    assert_allclose(unvec(vec(a), 3, 5), a)


def test_unvec_bad_size():
    with pytest.raises(DimensionMismatch):
        unvec(np.zeros(5), 2, 3)


@given(st.integers(0, 2**32 - 1))
def test_kron_vec_identity(seed):
    g = np.random.default_rng(seed)
    x = g.standard_normal((2, 3))
    y = g.standard_normal((3, 4))
    z = g.standard_normal((4, 2))
    assert_allclose(kron(z.T, x) @ vec(y), vec(x @ y @ z), atol=1e-12)


# ---------------------------------------------------------------------------
# Symmetric square root
# ---------------------------------------------------------------------------


def test_sym_sqrt_identity():
    assert_allclose(sym_sqrt(np.eye(3)), np.eye(3), atol=1e-14)


def test_sym_sqrt_diagonal():
    assert_allclose(sym_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)


@given(st.integers(0, 2**32 - 1))
def test_sym_sqrt_squares_back(seed):
    g = np.random.default_rng(seed)
    f = g.standard_normal((4, 4))
    a = f @ f.T
    s = sym_sqrt(a)
    assert_allclose(s, s.T, atol=1e-12)
    scale = max(np.abs(a).max(), 1.0)
    assert np.abs(s @ s - a).max() <= 1e-10 * scale


def test_sym_sqrt_rejects_asymmetric():
    with pytest.raises(NotSymmetric):
        sym_sqrt(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_sym_sqrt_rejects_indefinite():
    with pytest.raises(IndefiniteMatrix):
        sym_sqrt(np.diag([1.0, -0.5]))


def test_sym_sqrt_clamps_tiny_negative():
    a = np.diag([1.0, -1e-12])
    s = sym_sqrt(a)
    assert s[1, 1] == 0.0


# ---------------------------------------------------------------------------
# Chi-squared quantile
# ---------------------------------------------------------------------------


def test_chi2_quantile_zero():
    assert chi2_quantile(1, 0.0) == 0.0


def test_chi2_quantile_dof2_closed_form():
    assert_allclose(chi2_quantile(2, 0.95), -2.0 * math.log(0.05), atol=1e-10)
    assert_allclose(chi2_quantile(2, 0.95), CHI2_2_95, atol=1e-10)


def test_chi2_quantile_dof1_quadrature_oracle():
    q = chi2_quantile(1, 0.95)
    assert_allclose(q, CHI2_1_95, atol=1e-9)
    assert_allclose(chi2_cdf_quadrature(1, q), 0.95, atol=1e-9)


@pytest.mark.parametrize("dof,prob", [(1, 0.5), (3, 0.9), (7, 0.99), (20, 0.1), (2, 0.999999)])
def test_chi2_quantile_matches_quadrature(dof, prob):
    q = chi2_quantile(dof, prob)
    assert_allclose(chi2_cdf_quadrature(dof, q), prob, atol=1e-9)


def test_chi2_quantile_domain_errors():
    with pytest.raises(DomainError):
        chi2_quantile(1, 1.0)
    with pytest.raises(DomainError):
        chi2_quantile(1, -0.1)
    with pytest.raises(DomainError):
        chi2_quantile(0, 0.5)


@given(
    st.integers(1, 30),
    st.floats(0.01, 0.98),
    st.floats(0.001, 0.012),
)
def test_chi2_quantile_increasing_in_prob(dof, prob, bump):
    assert chi2_quantile(dof, prob + bump) > chi2_quantile(dof, prob)


@given(st.integers(1, 30), st.floats(0.01, 0.99))
def test_chi2_quantile_increasing_in_dof(dof, prob):
    assert chi2_quantile(dof + 1, prob) > chi2_quantile(dof, prob)


@given(st.integers(1, 20), st.floats(0.05, 0.995))
def test_chi2_quantile_cdf_round_trip(dof, prob):
    q = chi2_quantile(dof, prob)
    assert_allclose(chi2_quantile(dof, chi2_cdf(dof, q)), q, rtol=1e-8, atol=1e-8)


# ---------------------------------------------------------------------------
# Maximum of an affine norm over a ball
# ---------------------------------------------------------------------------


def test_ball_max_zero_matrix():
    a = np.array([3.0, 4.0])
    assert_allclose(max_norm_affine_over_ball(a, np.zeros((2, 3)), 2.0), 5.0)


def test_ball_max_zero_offset(gen):
    m = gen.standard_normal((3, 4))
    r = 1.7
    expected = r * np.linalg.svd(m, compute_uv=False)[0]
    assert_allclose(max_norm_affine_over_ball(np.zeros(3), m, r), expected, rtol=1e-9)


def test_ball_max_zero_radius(gen):
    a = gen.standard_normal(3)
    m = gen.standard_normal((3, 4))
    assert_allclose(max_norm_affine_over_ball(a, m, 0.0), np.linalg.norm(a))


def test_ball_max_against_sampling_oracle(gen):
    a = gen.standard_normal(3)
    m = gen.standard_normal((3, 4))
    exact = max_norm_affine_over_ball(a, m, 1.0)
    raw_max, polished = sampled_ball_max(a, m, 1.0, 100_000, gen)
    assert exact >= raw_max - 1e-9
    assert exact <= polished + 1e-6


def test_ball_max_hard_case():
    # Offset orthogonal to the dominant singular direction forces the
    # degenerate branch with an explicit top-eigenspace component.
    m = np.diag([2.0, 1.0])
    a = np.array([0.0, 3.0])
    r = 1.0
    gen = np.random.default_rng(7)
    exact = max_norm_affine_over_ball(a, m, r)
    raw_max, polished = sampled_ball_max(a, m, r, 200_000, gen)
    assert exact >= raw_max - 1e-9
    assert exact <= polished + 1e-6


def test_ball_max_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        max_norm_affine_over_ball(np.zeros(3), np.zeros((2, 2)), 1.0)


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 3.0), st.floats(0.01, 2.0))
def test_ball_max_monotone_in_radius(seed, r, bump):
    g = np.random.default_rng(seed)
    a = g.standard_normal(3)
    m = g.standard_normal((3, 4))
    assert max_norm_affine_over_ball(a, m, r + bump) >= max_norm_affine_over_ball(a, m, r) - 1e-12


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 3.0))
def test_ball_max_triangle_sandwich(seed, r):
    g = np.random.default_rng(seed)
    a = g.standard_normal(4)
    m = g.standard_normal((4, 3))
    result = max_norm_affine_over_ball(a, m, r)
    norm_a = np.linalg.norm(a)
    smax = np.linalg.svd(m, compute_uv=False)[0]
    assert result >= max(norm_a, r * smax) - norm_a - 1e-9
    assert result >= norm_a - 1e-12
    assert result <= norm_a + r * smax + 1e-9


# ---------------------------------------------------------------------------
# Gaussian sampling and random streams
# ---------------------------------------------------------------------------


def test_sample_gaussian_degenerate():
    mean = np.array([1.0, -2.0])
    out = sample_gaussian(mean, np.zeros((2, 2)), Rng(5))
    assert_allclose(out, mean)


def test_sample_gaussian_mean_lln():
    draws = sample_gaussian(np.zeros(2), np.eye(2), Rng(11), size=100_000)
    assert np.abs(draws.mean(axis=0)).max() < 0.02


def test_sample_gaussian_covariance(gen):
    f = gen.standard_normal((3, 3))
    cov = f @ f.T + 0.5 * np.eye(3)
    draws = sample_gaussian(np.zeros(3), cov, Rng(13), size=100_000)
    emp = np.cov(draws.T)
    rel = np.linalg.norm(emp - cov) / np.linalg.norm(cov)
    assert rel < 0.05


def test_sample_gaussian_rejects_indefinite():
    with pytest.raises(IndefiniteMatrix):
        sample_gaussian(np.zeros(2), np.diag([1.0, -1.0]), Rng(2))


def test_rng_reproducible_and_streams_differ():
    a = Rng(42, 3).generator().standard_normal(8)
    b = Rng(42, 3).generator().standard_normal(8)
    c = Rng(42, 4).generator().standard_normal(8)
    assert_allclose(a, b)
    assert np.abs(a - c).max() > 1e-6


def test_diag_repeat():
    block = np.array([[1.0, 2.0], [3.0, 4.0]])
    out = diag_repeat(block, 2)
    assert_allclose(out[:2, :2], block)
    assert_allclose(out[2:, 2:], block)
    assert_allclose(out[:2, 2:], 0.0)
