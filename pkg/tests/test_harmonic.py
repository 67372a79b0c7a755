import numpy as np
import pytest

from irrepsync.errors import NumericError, UsageError
from irrepsync.group import IrrepIndex, Rotation, haar_matrices, irrep_blocks, irrep_matrix, rotations_from_matrices
from irrepsync.harmonic import (
    BandLimitedFunction,
    Kernel,
    LossKind,
    LossSpec,
    edge_weights,
    evaluate,
    lambda_policy,
    loss_fourier_coefficients,
    parseval_norm,
    plancherel_weight,
    read_coefficient_table,
    write_coefficient_table,
)

DATA = __import__("pathlib").Path(__file__).parent / "data"


def quad_loss():
    return LossSpec(LossKind.QUADRATIC)


def test_quadratic_so3_dirichlet_pattern():
    k = loss_fourier_coefficients(quad_loss(), None, 6, Kernel.DIRICHLET, "SO3").values
    # dimension-scaled coefficients follow 3 delta_l - delta_{l-1}
    scaled = k * (2 * np.arange(7) + 1)
    assert scaled[0] / -scaled[1] == pytest.approx(3.0, rel=1e-10)
    assert k[0] == pytest.approx(6.0, abs=1e-10)
    assert k[1] == pytest.approx(-2.0 / 3.0, abs=1e-10)
    assert np.abs(k[2:]).max() <= 1e-8


def test_quadratic_so2_dirichlet():
    k = loss_fourier_coefficients(quad_loss(), None, 4, Kernel.DIRICHLET, "SO2").values
    assert np.allclose(k, [4.0, -2.0, 0.0, 0.0, 0.0], atol=1e-10)


def test_quadratic_fejer_values():
    k = loss_fourier_coefficients(quad_loss(), None, 3, Kernel.FEJER, "SO3").values
    assert np.allclose(k[:3], [6.0, 2.0, 0.4], atol=1e-10)
    assert np.all(k[1:] > 0)


def test_constant_loss_has_no_dirichlet_content():
    spec = LossSpec(LossKind.CUSTOM, h=lambda x: np.full_like(x, 2.5))
    for group in ("SO2", "SO3"):
        k = loss_fourier_coefficients(spec, None, 6, Kernel.DIRICHLET, group).values
        assert k[0] == pytest.approx(2.5, abs=1e-10)
        assert np.abs(k[1:]).max() < 1e-10


def test_cauchy_matches_fixture():
    ls, ref, _ = read_coefficient_table(DATA / "cauchy_lam1_fejer_so3.txt")
    k = loss_fourier_coefficients(LossSpec(LossKind.CAUCHY), 1.0, 8, Kernel.FEJER, "SO3")
    assert ls.tolist() == list(range(1, 9))
    assert np.abs(k.values[1:] - ref).max() < 1e-8
    assert k.error <= 1e-8


def test_coefficient_table_round_trip(tmp_path):
    k = loss_fourier_coefficients(LossSpec(LossKind.GMC), 0.7, 5, Kernel.FEJER, "SO3")
    write_coefficient_table(tmp_path / "k.txt", k)
    ls, vals, errs = read_coefficient_table(tmp_path / "k.txt")
    assert ls.tolist() == list(range(6))
    assert np.array_equal(vals, k.values)


def random_bump_loss(rng):
    n = rng.integers(1, 5)
    amp = rng.uniform(0.0, 2.0, n)
    centre = rng.uniform(0.0, 2.0 * np.sqrt(2.0), n)
    width = rng.uniform(0.05, 1.0, n)
    return lambda x: np.sum(amp[:, None] * np.exp(-0.5 * ((np.atleast_1d(x)[None] - centre[:, None]) / width[:, None]) ** 2), 0).reshape(np.shape(x))


@pytest.mark.parametrize("group", ["SO2", "SO3"])
def test_fejer_nonnegative_on_random_losses(rng, group):
    worst = np.inf
    for _ in range(40):
        spec = LossSpec(LossKind.CUSTOM, h=random_bump_loss(rng))
        k = loss_fourier_coefficients(spec, None, 8, Kernel.FEJER, group).values
        worst = min(worst, k[1:].min())
    assert worst >= -1e-12


def test_lambda_policy_examples():
    assert lambda_policy("cauchy", 3, (3 + np.sqrt(10.0)) ** 2) == pytest.approx(1.0, rel=1e-14)
    assert lambda_policy("gmc", 3, 4.0) == pytest.approx((3 * np.sqrt(3.0) + np.sqrt(30.0)) / 4.0, rel=1e-14)
    lams = [lambda_policy("cauchy", 2, k) for k in (1.0, 10.0, 1e4, 1e12)]
    assert np.all(np.diff(lams) < 0) and lams[-1] < 1e-5
    with pytest.raises(UsageError):
        lambda_policy("cauchy", 3, 0.0)
    with pytest.raises(UsageError):
        lambda_policy("quadratic", 3, 1.0)


def test_errors():
    with pytest.raises(UsageError):
        loss_fourier_coefficients(LossSpec(LossKind.CAUCHY), None, 4)
    with pytest.raises(UsageError):
        loss_fourier_coefficients(quad_loss(), None, 0)
    with pytest.raises(UsageError):
        LossSpec(LossKind.CUSTOM)
    bad = LossSpec(LossKind.CUSTOM, h=lambda x: np.where(x > 2.0, np.inf, x))
    with pytest.raises(NumericError):
        loss_fourier_coefficients(bad, None, 2)


def test_edge_weights_scale_with_kappa():
    spec = LossSpec(LossKind.CAUCHY)
    kappas = np.array([4.0, 25.0, 4.0])
    w = edge_weights(spec, "SO3", kappas, 3, Kernel.FEJER)
    assert w.shape == (3, 4)
    for e, kappa in enumerate(kappas):
        lam = lambda_policy("cauchy", 3, kappa)
        ref = loss_fourier_coefficients(spec, lam, 3, Kernel.FEJER, "SO3").values
        assert np.allclose(w[e], 0.5 * kappa * ref, rtol=1e-14)


# shift structure: the full matrix transform of g -> h(||g - g~||) is K rho(g~)


def test_shift_structure_so2_quadrature():
    spec = LossSpec(LossKind.CAUCHY, 0.8)
    h = spec.profile()
    k = loss_fourier_coefficients(spec, None, 2, Kernel.DIRICHLET, "SO2").values
    gt = Rotation.so2(1.1)
    t = np.linspace(0.0, 2 * np.pi, 20001)[:-1]
    from irrepsync.group import so2_matrices

    mats = so2_matrices(t)
    f = h(np.linalg.norm(mats - so2_matrices(1.1), axis=(1, 2)))
    for l in (1, 2):
        rho = irrep_blocks("SO2", l, mats, lmin=l)[0]
        fhat = np.mean(f[:, None, None] * rho, axis=0)
        assert np.abs(fhat - k[l] * irrep_matrix(IrrepIndex("SO2", l), gt)).max() < 1e-10


def test_shift_structure_so3_monte_carlo(rng):
    spec = LossSpec(LossKind.CAUCHY, 1.0)
    h = spec.profile()
    k = loss_fourier_coefficients(spec, None, 2, Kernel.DIRICHLET, "SO3").values
    g = haar_matrices("SO3", 1, rng)[0]
    m = 100_000
    mats = haar_matrices("SO3", m, rng)
    f = h(np.linalg.norm(mats - g, axis=(1, 2)))
    for l in (1, 2):
        rho = irrep_blocks("SO3", l, mats, lmin=l)[0]
        samples = f[:, None, None] * rho
        fhat = samples.mean(0)
        sigma = samples.std(0) / np.sqrt(m)
        ref = k[l] * irrep_blocks("SO3", l, g[None], lmin=l)[0][0]
        assert np.all(np.abs(fhat - ref) <= 4 * sigma + 1e-12)


# band-limited functions


def naive_eval(group, coeffs, g):
    total = 0.0
    for l, c in coeffs.items():
        irrep = IrrepIndex(group, l)
        rho = irrep_matrix(irrep, g)
        w = plancherel_weight(irrep)
        for a in range(irrep.dim):
            for b in range(irrep.dim):
                total += w * rho[a, b] * c[a, b]
    return total


@pytest.mark.parametrize("group", ["SO2", "SO3"])
def test_evaluate_matches_naive_sum(rng, group):
    coeffs = {l: rng.normal(size=(IrrepIndex(group, l).dim,) * 2) for l in range(5)}
    f = BandLimitedFunction(group, dict(coeffs))
    for g in rotations_from_matrices(haar_matrices(group, 10, rng)):
        assert evaluate(f, g) == pytest.approx(naive_eval(group, coeffs, g), abs=1e-12)


def test_delta_peak_and_zero(rng):
    g0 = rotations_from_matrices(haar_matrices("SO3", 1, rng))[0]
    f = BandLimitedFunction.delta(g0, 3)
    assert evaluate(f, g0) == pytest.approx(sum((2 * l + 1) ** 2 for l in range(4)), rel=1e-12)
    others = f.evaluate_matrices(haar_matrices("SO3", 500, rng))
    assert others.max() < evaluate(f, g0)
    zero = BandLimitedFunction("SO3", {l: np.zeros((2 * l + 1,) * 2) for l in range(3)})
    assert evaluate(zero, g0) == 0.0
    assert parseval_norm(zero) == 0.0


def test_parseval_delta_example(rng):
    g0 = rotations_from_matrices(haar_matrices("SO3", 1, rng))[0]
    assert parseval_norm(BandLimitedFunction.delta(g0, 2)) == pytest.approx(35.0, rel=1e-12)


@pytest.mark.parametrize("group", ["SO2", "SO3"])
def test_parseval_monte_carlo(rng, group):
    m = 100_000
    mats = haar_matrices(group, m, rng)
    for _ in range(3):
        coeffs = {l: rng.normal(size=(IrrepIndex(group, l).dim,) * 2) for l in range(4)}
        f = BandLimitedFunction(group, coeffs)
        sq = f.evaluate_matrices(mats) ** 2
        assert abs(sq.mean() - parseval_norm(f)) <= 4 * sq.std() / np.sqrt(m)


def test_bad_coefficient_shape():
    with pytest.raises(UsageError):
        BandLimitedFunction("SO3", {2: np.eye(3)})
