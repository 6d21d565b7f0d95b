import numpy as np
import pytest

from harmonic_phi4 import Field, FieldPath, UsageError
from harmonic_phi4.besov import (
    CUTOFF_ID, BlockEvaluator, NormSpec, apply_block, besov_norm, block_multipliers, build_cutoff,
    default_norm_grid, holder_norm, max_block, neg_holder_norm, smooth_step, sobolev_norm, sup_time_norm,
)
from harmonic_phi4.hermite import apply_semigroup, build_basis, gauss_hermite_grid

from conftest import random_coeffs


def test_partition_of_unity():
    cut = build_cutoff()
    J = 12
    xi = np.linspace(0, 2.0 ** (J - 1), 10_000)
    total = sum(cut.chi_j(j, xi) for j in range(-1, J + 1))
    assert np.abs(total - 1).max() < 1e-12


def test_chi_support_and_range():
    cut = build_cutoff()
    xi = np.linspace(0, 4, 40_001)
    c = cut.chi(xi)
    assert np.all(c[(xi < 0.75) | (xi > 8 / 3)] == 0)
    assert c.min() >= 0 and c.max() <= 1
    assert np.all(cut.chi_low(xi[xi > 4 / 3]) == 0)
    assert np.all(cut.chi_low(xi[xi < 0.75]) == 1)


def test_smooth_step_is_monotone():
    s = smooth_step(np.linspace(0, 2, 5001))
    assert np.all(np.diff(s) <= 0)


def test_far_blocks_disjoint():
    cut = build_cutoff()
    xi = np.linspace(0, 200, 50_001)
    for j in range(-1, 6):
        for k in range(j + 2, 8):
            assert np.all(cut.chi_j(j, xi) * cut.chi_j(k, xi) == 0)


def test_theta_form():
    cut = build_cutoff()
    lam = np.linspace(0.1, 500, 1000)
    for j in range(0, 4):
        assert np.allclose(cut.theta(lam / 4.0 ** j), cut.chi_j(j, np.sqrt(lam)), atol=1e-14)


def test_block_reconstruction(rng):
    for d, K in ((1, 64), (2, 40), (3, 56)):
        b = build_basis(d, K)
        u = Field(b, rng.normal(size=K))
        total = sum(apply_block(u, j).coeffs for j in range(-1, max_block(b) + 1))
        assert np.linalg.norm(total - u.coeffs) < 1e-10


def test_max_block_covers():
    for K in (1, 5, 30, 200):
        b = build_basis(1, K)
        J = max_block(b)
        assert np.allclose(block_multipliers(b, J).sum(axis=0), 1.0, atol=1e-14)
        if J >= 0:
            assert not np.allclose(block_multipliers(b, J - 1).sum(axis=0), 1.0)


def test_far_block_products_vanish(rng):
    b = build_basis(1, 200)
    u = Field(b, rng.normal(size=b.size))
    for j in range(-1, 3):
        assert np.all(apply_block(apply_block(u, j), j + 2).coeffs == 0)


def test_block_sup_bound_uniform_in_j(rng):
    b = build_basis(1, 128)
    grid = default_norm_grid(b, np.inf)
    ev = BlockEvaluator(b, NormSpec(0.0), grid)
    ratios = []
    for _ in range(30):
        c = random_coeffs(rng, b, 0.25)
        sup = np.abs(c @ ev.mats.sum(axis=0)).max()
        ratios.append(ev.block_norms(c) / sup)
    ratios = np.asarray(ratios)  # (corpus, blocks)
    per_block = ratios.max(axis=0)
    assert per_block.max() < 3.0
    assert per_block[-3:].max() < 2 * per_block[1:4].max()


def test_single_block_norm():
    # lambda = 33 gives sqrt(lambda) in [4/3, 3/2] * 4, where chi_2 = 1 and all other blocks vanish
    b = build_basis(1, 40)
    u = Field.unit(b, 16)
    m = block_multipliers(b)[:, 16]
    assert m[3] == 1.0 and np.count_nonzero(m) == 1
    for sigma, p in ((0.5, 2.0), (-1.0, np.inf)):
        ref = 2.0 ** (2 * sigma) * besov_norm(apply_block(u, 2), NormSpec(0.0, p, np.inf))
        assert besov_norm(u, NormSpec(sigma, p, 2.0)) == pytest.approx(ref, rel=1e-14)


def test_l2_overlap_factor(rng):
    for d, K in ((1, 64), (3, 84)):
        b = build_basis(d, K)
        for _ in range(10):
            u = Field(b, rng.normal(size=K))
            ratio = u.l2_norm() ** 2 / besov_norm(u, NormSpec(0.0, 2.0, 2.0)) ** 2
            assert 1 - 1e-12 <= ratio <= 2 + 1e-12


def test_phi0_two_blocks_vs_direct_quadrature():
    # sqrt(lambda_0) = 1 lies in the supports of chi_{-1} and chi_0
    b = build_basis(1, 10)
    u = Field.unit(b, 0)
    cut = build_cutoff()
    sigma, q = 0.7, 2.0
    g = gauss_hermite_grid(1, 40)
    phi0 = np.pi ** -0.25 * np.exp(-g.nodes[:, 0] ** 2 / 2)
    l2 = np.sqrt(g.integrate(phi0 ** 2))
    direct = ((2.0 ** -sigma * cut.chi_low(1.0) * l2) ** q + (cut.chi_j(0, 1.0) * l2) ** q) ** (1 / q)
    assert besov_norm(u, NormSpec(sigma, 2.0, q)) == pytest.approx(direct, abs=1e-10)


def test_embedding_monotone(rng):
    b = build_basis(2, 45)
    for _ in range(5):
        u = Field(b, rng.normal(size=b.size))
        for p, q in ((2.0, 2.0), (np.inf, np.inf), (4.0, 1.0)):
            norms = [besov_norm(u, NormSpec(s, p, q)) for s in (-1.0, -0.25, 0.0, 0.5, 1.5)]
            assert all(a <= c * (1 + 1e-12) for a, c in zip(norms, norms[1:]))


def test_heat_smoothing(rng):
    # ||e^{-tH} u||_{B^alpha} <= C t^{-(alpha-beta)/2} ||u||_{B^beta}, one C for all t and u
    b = build_basis(1, 128)
    alpha, beta = 1.0, -0.5
    ratios = []
    for _ in range(8):
        u = Field(b, rng.normal(size=b.size))
        for t in 2.0 ** -np.arange(1, 8):
            lhs = besov_norm(apply_semigroup(u, t), NormSpec(alpha))
            ratios.append(lhs * t ** ((alpha - beta) / 2) / besov_norm(u, NormSpec(beta)))
    assert max(ratios) < 10 * np.median(ratios)


def test_sobolev_norm(rng):
    b = build_basis(1, 20)
    u = Field(b, rng.normal(size=20))
    assert sobolev_norm(u, 0.0) == pytest.approx(u.l2_norm())
    assert sobolev_norm(u, 2.0) == pytest.approx(np.linalg.norm(b.eigenvalues * u.coeffs))
    assert sobolev_norm(u, 1.0, 2.0, default_norm_grid(b, 2.0)) == pytest.approx(sobolev_norm(u, 1.0), rel=1e-12)


def _path(b, times, fn):
    return FieldPath(b, times, np.array([fn(t) for t in times]))


def test_holder_constant_path():
    b = build_basis(1, 8)
    u0 = np.arange(1.0, 9.0)
    p = _path(b, np.linspace(0, 1, 11), lambda t: u0)
    spec = NormSpec(0.0, 2.0, 2.0)
    assert holder_norm(p, 0.5, spec) == pytest.approx(besov_norm(Field(b, u0), spec))


def test_holder_linear_path():
    b = build_basis(1, 8)
    u0 = Field(b, np.linspace(1, 2, 8))
    times = np.linspace(0.0, 1.0, 21)
    p = _path(b, times, lambda t: t * u0.coeffs)
    spec = NormSpec(0.3, 2.0, 2.0)
    n0 = besov_norm(u0, spec)
    assert holder_norm(p, 1.0, spec) == pytest.approx(0.0 + n0, rel=1e-12)
    # first-time value is zero here; a shifted path shows both parts
    q = _path(b, times + 1.0, lambda t: t * u0.coeffs)
    assert holder_norm(q, 1.0, spec) == pytest.approx(n0 + n0, rel=1e-12)


def test_neg_holder_of_constant():
    b = build_basis(1, 8)
    u0 = Field(b, np.linspace(-1, 1, 8))
    times = np.linspace(0.0, 1.0, 17)
    const = _path(b, times, lambda t: u0.coeffs)
    lin = _path(b, times, lambda t: t * u0.coeffs)
    spec = NormSpec(-0.5)
    assert neg_holder_norm(const, 0.5, spec) == pytest.approx(holder_norm(lin, 0.5, spec), rel=1e-12)


def test_holder_errors():
    b = build_basis(1, 4)
    one = FieldPath(b, np.array([0.0]), np.zeros((1, 4)))
    with pytest.raises(UsageError):
        holder_norm(one, 0.5, NormSpec(0.0))
    with pytest.raises(UsageError):
        neg_holder_norm(one, 0.5, NormSpec(0.0))
    two = FieldPath(b, np.array([0.0, 0.1]), np.zeros((2, 4)))
    with pytest.raises(UsageError):
        neg_holder_norm(two, 1.5, NormSpec(0.0))


def test_norm_spec_validation():
    b = build_basis(1, 100)
    with pytest.raises(UsageError):
        NormSpec(0.0, 0.5)
    with pytest.raises(UsageError):
        NormSpec(0.0, J=1).resolved(b)


def test_sup_time_norm_picks_largest():
    b = build_basis(1, 6)
    times = np.linspace(0, 1, 5)
    p = _path(b, times, lambda t: np.full(6, t))
    spec = NormSpec(0.0, 2.0, 2.0)
    assert sup_time_norm(p, spec) == pytest.approx(besov_norm(Field(b, np.ones(6)), spec))


def test_cutoff_id_recorded():
    assert build_cutoff().name == CUTOFF_ID
