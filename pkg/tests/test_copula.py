import itertools

import numpy as np
import pytest
from scipy import stats
from scipy.special import ndtri

from copula_morris.bufferbox import PARAMETER_TABLE
from copula_morris.copula import (
    CdfAccuracyError,
    DependenceError,
    GaussianCopula,
    IndependenceCopula,
    build_dependence_model,
    corner_distribution,
    expand_corners,
    spearman_to_pearson,
)

MIXED3 = np.array([[1.0, -0.7, -0.7], [-0.7, 1.0, 0.7], [-0.7, 0.7, 1.0]])


def orthant3(r12, r13, r23):
    """Closed-form P(Z1<0, Z2<0, Z3<0) for a standard trivariate normal."""
    return 0.125 + (np.arcsin(r12) + np.arcsin(r13) + np.arcsin(r23)) / (4 * np.pi)


def orthant2(r):
    return 0.25 + np.arcsin(r) / (2 * np.pi)


def pairs_matrix():
    names = list(PARAMETER_TABLE)
    pairs = [("V_sed_IM1", "Fr_IM1_sed_S2", -1), ("V_sed_IM2", "Fr_IM2_sed_S2", -1),
             ("V_sed_IM3", "Fr_IM3_sed_S2", -1), ("V_res_IM1", "tau_cr_S1_IM1", 1),
             ("V_res_IM2", "tau_cr_S1_IM2", 1), ("V_res_IM3", "tau_cr_S1_IM3", 1),
             ("tau_Shields", "Fact_res_Pup", 1)]
    corr = np.eye(len(names))
    for a, b, r in pairs:
        i, j = names.index(a), names.index(b)
        corr[i, j] = corr[j, i] = r
    return names, corr


@pytest.fixture(scope="module")
def mixed_model():
    return build_dependence_model(MIXED3, scale="pearson")


def test_shipped_pairs_give_seven_independent_pairs():
    names, corr = pairs_matrix()
    model = build_dependence_model(corr)
    assert model.n_factors == 7
    assert isinstance(model.copula, IndependenceCopula)
    for g in model.groups:
        assert len(g) == 2
        assert g[0][1] == 1
        a, b = g[0][0], g[1][0]
        assert g[1][1] == int(corr[a, b])


def test_identity_gives_singletons():
    model = build_dependence_model(np.eye(4))
    assert model.groups == tuple(((i, 1),) for i in range(4))
    assert isinstance(model.copula, IndependenceCopula)


def test_sign_contradiction_is_rejected():
    corr = np.array([[1, 1, -1], [1, 1, 1], [-1, 1, 1]], dtype=float)
    with pytest.raises(DependenceError):
        build_dependence_model(corr)


def test_non_psd_residual_is_rejected():
    corr = np.array([[1, -0.9, -0.9], [-0.9, 1, -0.9], [-0.9, -0.9, 1]])
    with pytest.raises(DependenceError):
        build_dependence_model(corr, scale="pearson")


def test_cross_group_inconsistency_is_rejected():
    corr = np.eye(3)
    corr[0, 1] = corr[1, 0] = 1.0
    corr[0, 2] = corr[2, 0] = 0.3
    with pytest.raises(DependenceError):
        build_dependence_model(corr)


def test_residual_between_groups_uses_representatives():
    corr = np.eye(3)
    corr[0, 1] = corr[1, 0] = -1.0
    corr[0, 2] = corr[2, 0] = 0.5
    corr[1, 2] = corr[2, 1] = -0.5
    model = build_dependence_model(corr)
    assert model.groups == (((0, 1), (1, -1)), ((2, 1),))
    assert isinstance(model.copula, GaussianCopula)
    assert model.copula.corr[0, 1] == pytest.approx(2 * np.sin(np.pi * 0.5 / 6))


def test_independence_kind_ignores_correlations():
    _, corr = pairs_matrix()
    model = build_dependence_model(corr, kind="independence")
    assert model.n_factors == 14


def test_spearman_conversion_fixed_points():
    assert spearman_to_pearson(1.0) == pytest.approx(1.0)
    assert spearman_to_pearson(0.0) == 0.0
    assert spearman_to_pearson(-1.0) == pytest.approx(-1.0)


def test_independence_samples_uncorrelated():
    u = IndependenceCopula(3).sample(100_000, np.random.default_rng(1))
    rho = stats.spearmanr(u).statistic
    assert np.all(np.abs(rho[np.triu_indices(3, 1)]) < 0.02)


def test_gaussian_spearman_fidelity():
    model = build_dependence_model([[1, 0.7], [0.7, 1]], scale="spearman")
    u = model.sample(100_000, np.random.default_rng(2))
    assert stats.spearmanr(u[:, 0], u[:, 1]).statistic == pytest.approx(0.7, abs=0.02)
    # the Pearson value of the latent normals is the converted one
    z = ndtri(u)
    assert np.corrcoef(z.T)[0, 1] == pytest.approx(2 * np.sin(np.pi * 0.7 / 6), abs=0.01)


@pytest.mark.parametrize("copula", [IndependenceCopula(3), GaussianCopula(MIXED3)], ids=["indep", "gauss"])
def test_uniform_marginals(copula):
    u = copula.sample(10_000, np.random.default_rng(3))
    for j in range(3):
        assert stats.kstest(u[:, j], "uniform").pvalue > 0.01


def test_sampling_is_deterministic(mixed_model):
    a = mixed_model.sample(50, np.random.default_rng(9))
    b = mixed_model.sample(50, np.random.default_rng(9))
    assert np.array_equal(a, b)


def test_cdf_zero_and_product():
    for cop in (IndependenceCopula(3), GaussianCopula(MIXED3)):
        assert cop.cdf([0.3, 0.0, 0.9]) == 0.0
        assert cop.cdf([1.0, 1.0, 1.0]) == pytest.approx(1.0)
    assert IndependenceCopula(3).cdf([0.5, 0.5, 0.5]) == 0.125


def test_cdf_mixed_center(mixed_model):
    expected = orthant3(-0.7, -0.7, 0.7)
    assert expected == pytest.approx(0.0633, abs=5e-5)
    assert mixed_model.cdf([0.5, 0.5, 0.5]) == pytest.approx(expected, abs=5e-4)
    assert mixed_model.cdf([1.0, 0.5, 0.5]) == pytest.approx(orthant2(0.7), abs=5e-4)


def test_cdf_matches_scipy_mvn():
    rng = np.random.default_rng(4)
    cop = GaussianCopula(MIXED3)
    mvn = stats.multivariate_normal(mean=np.zeros(3), cov=MIXED3)
    for u in rng.uniform(0.05, 0.95, size=(10, 3)):
        assert cop.cdf(u) == pytest.approx(mvn.cdf(ndtri(u)), abs=1e-3)


def test_cdf_is_monotone(mixed_model):
    base = np.array([0.3, 0.4, 0.6])
    values = [mixed_model.cdf(base + [t, 0, 0]) for t in np.linspace(0, 0.6, 7)]
    assert all(b >= a - 1e-4 for a, b in zip(values, values[1:]))


def test_cdf_unreachable_tolerance_raises():
    cop = GaussianCopula(np.array([[1, 0.3, 0.2, 0.1], [0.3, 1, 0.4, 0.2], [0.2, 0.4, 1, 0.3],
                                   [0.1, 0.2, 0.3, 1]]), tol=1e-12)
    with pytest.raises(CdfAccuracyError):
        cop.cdf([0.4, 0.5, 0.6, 0.7])


def test_empirical_copula_converges_to_cdf(mixed_model):
    u = mixed_model.sample(100_000, np.random.default_rng(5))
    n = len(u)
    # pseudo-observations from ranks
    ranks = np.argsort(np.argsort(u, axis=0), axis=0) + 1
    pseudo = ranks / n
    worst = 0.0
    for q in itertools.product((0.2, 0.5, 0.8), repeat=3):
        emp = np.mean(np.all(pseudo <= np.array(q), axis=1))
        worst = max(worst, abs(emp - mixed_model.cdf(np.array(q))))
    assert worst <= 0.02


def test_mixed_corner_distribution(mixed_model):
    dist = corner_distribution(mixed_model, [0, 0, 0], [1, 1, 1])
    low = orthant3(-0.7, -0.7, 0.7)
    high = orthant2(0.7) - low
    assert high == pytest.approx(0.3101, abs=5e-5)
    assert dist.probability((0, 0, 0)) == pytest.approx(0.0633, abs=2e-3)
    assert dist.probability((1, 0, 0)) == pytest.approx(0.3101, abs=2e-3)
    assert dist.probability((0, 1, 1)) == pytest.approx(0.3101, abs=2e-3)
    six = [dist.probability(c) for c in itertools.product((0, 1), repeat=3)
           if c not in ((1, 0, 0), (0, 1, 1))]
    assert max(six) - min(six) <= 4e-3
    assert dist.probs.sum() == pytest.approx(1.0, abs=1e-9)


def test_independence_corner_distribution_uniform():
    dist = corner_distribution(IndependenceCopula(4), [0.1] * 4, [0.4] * 4)
    assert np.allclose(dist.probs, 1 / 16)


def test_interior_block_matches_monte_carlo(mixed_model):
    lo, hi = np.array([0.0, 1 / 3, 1 / 3]), np.array([2 / 3, 1.0, 1.0])
    exact = corner_distribution(mixed_model, lo, hi)
    mc = corner_distribution(mixed_model, lo, hi, mode="mc", mc_samples=400_000,
                             rng=np.random.default_rng(6))
    assert mc.method == "mc" and mc.samples > 0
    assert np.max(np.abs(exact.probs - mc.probs)) < 0.01
    assert exact.probs.sum() == pytest.approx(1.0, abs=1e-9)


def test_exact_mode_falls_back_to_mc_beyond_limit(mixed_model):
    dist = corner_distribution(mixed_model, [0, 0, 0], [1, 1, 1], exact_limit=2,
                               rng=np.random.default_rng(0))
    assert dist.method == "mc"
    assert dist.probability((1, 0, 0)) == pytest.approx(0.3101, abs=0.01)


def test_degenerate_cell_rejected(mixed_model):
    with pytest.raises(ValueError):
        corner_distribution(mixed_model, [0, 0.5, 0], [1, 0.5, 1])


def test_comonotone_pair_forbids_discordant_corners():
    corr = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    model = build_dependence_model(corr)
    dist = corner_distribution(model, [0, 0], [1, 1])
    member = expand_corners(model, dist)
    assert sum(member.values()) == pytest.approx(1.0)
    for code, prob in member.items():
        if code[0] != code[1]:
            assert prob == 0.0
        else:
            assert prob == pytest.approx(0.25)


def test_anti_pair_forbids_concordant_corners():
    corr = np.array([[1.0, -1.0], [-1.0, 1.0]])
    model = build_dependence_model(corr)
    member = expand_corners(model, corner_distribution(model, [0], [1]))
    assert member[(0, 0)] == member[(1, 1)] == 0.0
    assert member[(0, 1)] == member[(1, 0)] == 0.5
