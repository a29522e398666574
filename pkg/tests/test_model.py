import numpy as np
import pytest

import lasso_barrier as lb


def test_orthogonal_gram_is_identity():
    d = lb.gen_design(4, 2, "orthogonal", seed=0)
    gram = d.entries.T @ d.entries / 4
    assert np.max(np.abs(gram - np.eye(2))) < 1e-12
    assert d.column_norm_ok


def test_orthogonal_rejects_n_below_p():
    with pytest.raises(lb.DesignError):
        lb.gen_design(3, 5, "orthogonal", seed=0)


def test_equicorrelated_sigma_bar():
    d = lb.gen_design(6, 3, ("equicorrelated", 0.5), seed=1)
    S = d.sigma_bar
    assert np.allclose(np.diag(S), 1.0)
    off = S[~np.eye(3, dtype=bool)]
    assert np.allclose(off, 0.5)
    # realized Gram matches the target covariance
    assert np.max(np.abs(d.entries.T @ d.entries / 6 - S)) < 1e-10


def test_equicorrelated_rho_range():
    with pytest.raises(lb.DesignError):
        lb.gen_design(6, 3, ("equicorrelated", -0.6), seed=0)


def test_gaussian_rows_column_second_moments():
    # law of large numbers at n = 10^4: empirical column energies near 1
    d = lb.gen_design(10_000, 4, ("gaussian", None), seed=2)
    energies = d.column_energies()
    assert np.all(energies > 0.95) and np.all(energies < 1.05)
    assert d.kind == "gaussian-rows"
    assert np.array_equal(d.sigma_bar, np.eye(4))


def test_gaussian_rejects_non_psd():
    bad = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues -1, 3
    with pytest.raises(lb.DesignError):
        lb.gen_design(5, 2, ("gaussian", bad), seed=0)


def test_matrix_normalization_exact():
    rng = np.random.default_rng(5)
    X = 3.7 * rng.standard_normal((9, 4))
    d = lb.gen_design(9, 4, ("matrix", X, True), seed=0)
    assert abs(np.max(d.column_energies()) - 1.0) < 1e-15


def test_sample_instance_zero_signal_y_equals_eps():
    d = lb.gen_design(8, 3, "orthogonal", seed=3)
    inst = lb.sample_instance(d, np.zeros(3), sigma=1.0, seed=4)
    assert np.array_equal(inst.y, inst.epsilon)


def test_sample_instance_noiseless():
    d = lb.gen_design(8, 3, "orthogonal", seed=3)
    beta = np.array([1.0, -2.0, 0.0])
    inst = lb.sample_instance(d, beta, noise_spec=("fixed", np.zeros(8)), seed=0)
    assert np.array_equal(inst.y, d.entries @ beta)
    assert inst.support == frozenset({0, 1})


def test_sample_instance_chi_square_moment():
    # sample mean of ||eps||^2 / n within 2% of sigma^2 = 4 at n = 10^5
    d = lb.gen_design(100_000, 2, ("gaussian", None), seed=6)
    inst = lb.sample_instance(d, np.zeros(2), sigma=2.0, seed=7)
    m = float(inst.epsilon @ inst.epsilon) / d.n
    assert abs(m - 4.0) < 0.08


def test_sample_instance_dimension_mismatch():
    d = lb.gen_design(8, 3, "orthogonal", seed=3)
    with pytest.raises(lb.DesignError):
        lb.sample_instance(d, np.zeros(4), sigma=1.0, seed=0)


def test_reconstruction_identity():
    d = lb.gen_design(20, 7, ("gaussian", None), seed=8)
    rng = np.random.default_rng(9)
    beta = np.zeros(7)
    beta[[1, 4]] = rng.standard_normal(2)
    inst = lb.sample_instance(d, beta, sigma=0.5, seed=10)
    assert np.array_equal(inst.y, d.entries @ inst.beta_star + inst.epsilon)


def test_correlation_scores_orthogonal_column_noise():
    d = lb.gen_design(16, 4, "orthogonal", seed=11)
    scale = 0.37
    eps = scale * d.entries[:, 0]
    inst = lb.sample_instance(d, np.zeros(4), noise_spec=("fixed", eps), seed=0)
    sc = lb.correlation_scores(inst)
    n = d.n
    expected = float(d.entries[:, 0] @ d.entries[:, 0]) * scale / np.sqrt(n)
    assert abs(sc.g[0] - expected) < 1e-10
    assert np.max(np.abs(sc.g[1:])) < 1e-10
    assert sc.g_sorted_desc[0] == np.max(np.abs(sc.g))


def test_correlation_scores_zero_noise():
    d = lb.gen_design(8, 3, "orthogonal", seed=3)
    inst = lb.sample_instance(d, np.array([1.0, 0, 0]), noise_spec=("fixed", np.zeros(8)), seed=0)
    assert np.array_equal(lb.correlation_scores(inst).g, np.zeros(3))


def test_correlation_scores_variance():
    # identity-gram design, gaussian eps: var(g_j) == sigma^2 within 2%
    d = lb.gen_design(8, 3, "orthogonal", seed=12)
    reps = 100_000
    rng = np.random.default_rng(13)
    sigma = 1.3
    E = sigma * rng.standard_normal((reps, 8))
    G = E @ d.entries / np.sqrt(8)
    v = G.var(axis=0)
    assert np.all(np.abs(v - sigma**2) < 0.02 * sigma**2)


def test_scores_exchangeable_for_isotropic_designs():
    # KS distance between the marginals of g_1 and g_p below 0.02
    reps, n, p = 10_000, 20, 5
    rng = np.random.default_rng(14)
    designs = rng.standard_normal((reps, n, p))
    eps = rng.standard_normal((reps, n))
    g = np.einsum("rn,rnp->rp", eps, designs) / np.sqrt(n)
    a = np.sort(g[:, 0])
    b = np.sort(g[:, p - 1])
    grid = np.concatenate([a, b])
    Fa = np.searchsorted(a, grid, side="right") / reps
    Fb = np.searchsorted(b, grid, side="right") / reps
    ks = float(np.max(np.abs(Fa - Fb)))
    assert ks < 0.02


def test_sign_vector():
    d = lb.gen_design(12, 4, "orthogonal", seed=15)
    beta = np.array([0.5, 0.0, -2.0, 0.0])
    inst = lb.sample_instance(d, beta, sigma=1.0, seed=16)
    sv = lb.sign_vector(inst)
    assert np.array_equal(sv.s, np.array([1.0, 0.0, -1.0, 0.0]))
    # orthogonal design: ||X s||^2 = n ||s||^2, so psi_s == 1
    assert abs(sv.psi_s - 1.0) < 1e-12


def test_design_io_roundtrip(tmp_path):
    rng = np.random.default_rng(17)
    X = rng.standard_normal((6, 4))
    csv = tmp_path / "d.csv"
    binp = tmp_path / "d.bin"
    lb.save_design_csv(csv, X)
    lb.save_design_binary(binp, X)
    assert np.array_equal(lb.load_design(csv), X)
    assert np.array_equal(lb.load_design(binp), X)
    with pytest.raises(lb.DesignError):
        lb.load_design_binary(csv)
