import math
import warnings

import numpy as np
import pytest
from scipy import integrate
from scipy.spatial import cKDTree

from univpi.density import eval_density, make_density, sample_binomial
from univpi.geometry import ball_volume, incomplete_gamma_lower, lens_volume
from univpi.theory import (
    TruncationWarning, beta_star, cech_constants, cech_limit_const, cech_limit_curve, density_integral,
    grassmannian_volume, rips_limit_const, rips_limit_curve_k1, total_pi_mass, vdk_estimate, vdk_exact_k1,
)

# two uniform points in the planar unit lens are more than 1 apart with this probability;
# frozen from an independent polygon-clipping quadrature (16 and 24 Gauss nodes agree to 6e-5)
LENS_PAIR_FAR_PROB = 0.1028


def test_grassmannian_closed_forms():
    assert grassmannian_volume(2, 1) == pytest.approx(math.pi)
    assert grassmannian_volume(3, 1) == pytest.approx(2 * math.pi)
    assert grassmannian_volume(3, 2) == pytest.approx(2 * math.pi)
    assert grassmannian_volume(2, 2) == pytest.approx(1.0)


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_vdk_k1_enumeration(d):
    # two of the four sign patterns straddle the origin, each with length 2
    assert vdk_exact_k1(d) == 2 * 2.0 ** (d + 1) / 2


def test_vdk_k1_monte_carlo_agrees_with_enumeration():
    est, err = vdk_estimate(2, 1, 10**5, seed=1)
    assert abs(est - vdk_exact_k1(2)) <= 3 * err + 1e-12


def test_vdk_two_seeds_agree():
    a, ea = vdk_estimate(3, 2, 2 * 10**5, seed=1)
    b, eb = vdk_estimate(3, 2, 2 * 10**5, seed=2)
    assert a > 0 and b > 0
    assert abs(a - b) <= 3 * math.hypot(ea, eb)


def test_vdk_needs_enough_samples():
    with pytest.raises(ValueError):
        vdk_estimate(2, 2, 100)


def gabriel_edges_per_point(d, nu, seed):
    """Edges whose diametral open ball is empty, on the flat unit torus."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 1, (nu, d))
    tree = cKDTree(pts, boxsize=1.0)
    r = 4.0 * (1.0 / nu) ** (1 / d)
    pairs = tree.query_pairs(r, output_type="ndarray")
    delta = pts[pairs[:, 1]] - pts[pairs[:, 0]]
    delta -= np.round(delta)
    mid = (pts[pairs[:, 0]] + delta / 2) % 1.0
    half = np.linalg.norm(delta, axis=1) / 2
    inside = tree.query_ball_point(mid, half * (1 - 1e-12), return_length=True)
    return np.sum(inside == 0) / nu


@pytest.mark.parametrize("d", [2, 3])
def test_cech_edge_constant_matches_gabriel_simulation(d):
    exact = cech_constants(d, 1, samples=0).f_star
    assert exact == pytest.approx(2.0 ** (d - 1))
    sim = np.mean([gabriel_edges_per_point(d, 4000, s) for s in range(3)])
    assert sim == pytest.approx(exact, rel=0.02)


def test_cech_planar_triangle_constant_is_one():
    # half of the Delaunay triangles are acute and there are two per point
    c = cech_constants(2, 2, 4 * 10**5, seed=3)
    assert abs(c.f_star - 1.0) <= 4 * c.f_star_stderr + 1e-3


def test_cech_limit_curve_uniform_and_limits():
    c = cech_constants(2, 1, samples=0)
    cube = make_density("uniform_cube", 2)
    for lam in (0.1, 1.0, 3.0):
        want = c.f_star * incomplete_gamma_lower(1, ball_volume(2) * lam)
        assert cech_limit_curve(lam, cube, 2, 1, c) == pytest.approx(want, rel=1e-12)
    assert cech_limit_curve(1e-9, cube, 2, 1, c) < 1e-7
    grid = np.logspace(-2, 2, 30)
    vals = [cech_limit_curve(lam, make_density("gaussian", 2), 2, 1, c) for lam in grid]
    assert np.all(np.diff(vals) >= -1e-12)
    assert vals[-1] < c.f_star
    assert cech_limit_curve(1e8, make_density("gaussian", 2), 2, 1, c) == pytest.approx(c.f_star, rel=1e-3)
    assert cech_limit_const(2, 1, c) == pytest.approx(c.f_star)


def test_density_integral_against_monte_carlo():
    model = make_density("gaussian", 2)
    omega, lam = ball_volume(2), 3.0
    g = lambda f: float(incomplete_gamma_lower(2, omega * f * lam))
    pts = sample_binomial(model, 2 * 10**5, 8).points
    vals = np.array(incomplete_gamma_lower(2, omega * eval_density(model, pts) * lam))
    got = density_integral(model, g)
    assert abs(got - vals.mean()) <= 4 * vals.std() / math.sqrt(len(vals))


def test_density_integral_piecewise_closed_form():
    model = make_density("piecewise_constant", 2, grid=2, weights=[0.1, 0.2, 0.3, 0.4])
    g = lambda f: f
    want = sum(w * (4 * w) for w in [0.1, 0.2, 0.3, 0.4])
    assert density_integral(model, g) == pytest.approx(want)
    annulus = make_density("annulus_beta", 2)
    assert density_integral(annulus, lambda f: 1.0) == pytest.approx(1.0, rel=1e-6)


def test_rips_k1_constants():
    assert rips_limit_const(2, 1)[0] == pytest.approx(1.27876, abs=1e-5)
    assert rips_limit_const(2, 1)[0] == pytest.approx(math.pi / (2 * lens_volume(2)))
    assert rips_limit_const(3, 1)[0] == pytest.approx(1.6)
    assert total_pi_mass(2, 1, "rips") == pytest.approx(0.27876, abs=1e-5)
    assert total_pi_mass(2, 1, "cech") == pytest.approx(1.0)
    assert total_pi_mass(2, 2, "cech", {1: 2.0, 2: 1.0}) == pytest.approx(0.0)


def test_rips_k1_curve_tends_to_constant():
    cube = make_density("uniform_cube", 2)
    assert rips_limit_curve_k1(200.0, cube, 2) == pytest.approx(1.27876, abs=1e-5)
    assert rips_limit_curve_k1(1e-8, cube, 2) < 1e-6


def test_beta_star_two_point_probability():
    mean, err = beta_star(2, 2, 2, samples=20000, seed=4)
    assert abs(mean - LENS_PAIR_FAR_PROB) <= 3 * err + 3e-4


def test_beta_star_two_point_probability_by_direct_integration():
    # second oracle: P(|Y1 - Y2| > 1) by nested quadrature over the first point's position
    kappa = lens_volume(2)
    half = math.sqrt(3) / 2
    rng = np.random.default_rng(0)
    z = rng.uniform([0, -half], [1, half], (400000, 2))
    z = z[(np.sum(z**2, 1) <= 1) & (np.sum((z - [1, 0]) ** 2, 1) <= 1)]
    a, b = z[: len(z) // 2], z[len(z) // 2: 2 * (len(z) // 2)]
    far = np.linalg.norm(a - b, axis=1) > 1
    assert abs(far.mean() - LENS_PAIR_FAR_PROB) <= 3 * far.std() / math.sqrt(len(far))
    assert kappa == pytest.approx(2 * math.pi / 3 - math.sqrt(3) / 2)


def test_beta_star_bounds_and_reproducibility():
    for m in (2, 4, 6):
        mean, _ = beta_star(m, 2, 2, samples=300, seed=1)
        assert 0 <= mean <= math.comb(m, 1)
    a, ea = beta_star(4, 2, 3, samples=400, seed=1)
    b, eb = beta_star(4, 2, 3, samples=400, seed=2)
    assert abs(a - b) <= 3 * math.hypot(ea, eb) + 1e-12
    with pytest.raises(ValueError):
        beta_star(1, 2, 2)


@pytest.mark.filterwarnings("ignore::univpi.theory.TruncationWarning")
def test_rips_series_partial_sums_non_decreasing():
    sums = [rips_limit_const(2, 2, m_max=m, samples=200, seed=0)[0] for m in (4, 8, 12)]
    assert all(b >= a - 1e-12 for a, b in zip(sums, sums[1:]))


def test_truncation_warning_on_short_series():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rips_limit_const(2, 2, m_max=4, samples=200, seed=0)
    assert any(issubclass(w.category, TruncationWarning) for w in caught)


def test_constants_json_keys():
    keys = set(cech_constants(2, 1, samples=0).to_dict())
    assert keys == {"d", "k", "flavor", "omega_d", "kappa_d", "gamma_dk", "v_dk", "v_dk_stderr", "f_star",
                    "f_star_stderr", "beta_star_table"}


def test_lens_volume_by_quadrature():
    # area of the planar unit lens via the vertical chord integral
    half_width = lambda x: math.sqrt(max(0.0, 1 - (x - 1) ** 2)) if x < 0.5 else math.sqrt(max(0.0, 1 - x * x))
    area = 2 * integrate.quad(half_width, 0, 1, points=[0.5])[0]
    assert lens_volume(2) == pytest.approx(area, rel=1e-9)
