import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from univpi.critical import (
    block_changes, cech_critical_faces, curve_csv, euler_identity_check, fk_curve, forbidden_occupied,
    isolated_edges, reduced_betti, reduction_change_simplices, rips_edge_multiplicity, sign_split,
)

from oracles import betti_numbers


def cloud(seed, n, d=2):
    return np.random.default_rng(seed).uniform(0, 1, (n, d))


def test_equilateral_triangle_is_critical():
    pts = np.array([[0, 0], [1, 0], [0.5, math.sqrt(3) / 2]])
    rep = cech_critical_faces(pts, 2, 1.0)
    assert rep.faces.tolist() == [[0, 1, 2]]
    assert rep.radii[0] == pytest.approx(1 / math.sqrt(3))


def test_obtuse_triangle_is_not_critical_but_its_long_edge_is_not_either():
    pts = np.array([[0, 0], [4, 0], [2, 0.5]])
    assert len(cech_critical_faces(pts, 2, 10.0).faces) == 0
    edges = {tuple(e) for e in cech_critical_faces(pts, 1, 10.0).faces.tolist()}
    assert edges == {(0, 2), (1, 2)}


def test_occupied_circumball_blocks_criticality():
    pts = np.array([[0, 0], [1, 0], [0.5, math.sqrt(3) / 2], [0.5, 0.3]])
    faces = {tuple(f) for f in cech_critical_faces(pts, 2, 1.0).faces.tolist()}
    assert (0, 1, 2) not in faces


def test_square_rips_multiplicities():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float) + [[0, 0], [0.01, 0], [0, 0.02], [0, 0]]
    # each diagonal's lens holds the two other corners, which are not adjacent at the diagonal length
    assert rips_edge_multiplicity(sq, (0, 2), 2) == 1 or rips_edge_multiplicity(sq, (1, 3), 2) == 1
    assert rips_edge_multiplicity(sq, (0, 1), 1) == 1


def random_adjacency(rng, m, p):
    a = rng.uniform(size=(m, m)) < p
    a = np.triu(a, 1)
    return a | a.T


@given(st.integers(0, 10**6), st.integers(0, 8), st.floats(0.2, 0.9))
def test_reduced_betti_matches_rank_oracle(seed, m, p):
    adj = random_adjacency(np.random.default_rng(seed), m, p)
    cliques = [s for q in range(1, 5) for s in combinations(range(m), q)
               if all(adj[a, b] for a, b in combinations(s, 2))]
    want = betti_numbers(cliques, 3)
    for q in range(3):
        assert reduced_betti(adj, q) == want[q]
    assert reduced_betti(adj, -1) == int(m == 0)


def test_reduced_betti_cycle_graphs():
    for m in (4, 5, 6):
        adj = np.zeros((m, m), bool)
        for i in range(m):
            adj[i, (i + 1) % m] = adj[(i + 1) % m, i] = True
        assert reduced_betti(adj, 1) == 1 and reduced_betti(adj, 0) == 0


@pytest.mark.parametrize("seed", range(8))
def test_cech_geometric_matches_reduction(seed):
    pts = cloud(seed, 14)
    for k in (1, 2):
        geo = {tuple(int(v) for v in f) for f in cech_critical_faces(pts, k, np.inf).faces}
        assert geo == reduction_change_simplices(pts, "cech", k)


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("k", [1, 2, 3])
def test_rips_link_formula_matches_block_changes(seed, k):
    pts = cloud(100 + seed, 12)
    plus, minus = block_changes(pts, k, np.inf)
    for i, j in combinations(range(len(pts)), 2):
        assert rips_edge_multiplicity(pts, (i, j), k) == plus.get((i, j), 0) + minus.get((i, j), 0)


@pytest.mark.parametrize("seed", range(6))
def test_forbidden_region_kills_multiplicity(seed):
    pts = cloud(200 + seed, 16)
    hits = 0
    for i, j in combinations(range(len(pts)), 2):
        if forbidden_occupied(pts, i, j):
            hits += 1
            assert all(rips_edge_multiplicity(pts, (i, j), k) == 0 for k in (1, 2, 3))
    assert hits > 0


@pytest.mark.parametrize("flavor,d,k", [("cech", 2, 1), ("cech", 2, 2), ("cech", 3, 2), ("rips", 2, 1),
                                        ("rips", 2, 2), ("rips", 3, 2)])
def test_euler_identity(flavor, d, k):
    for seed in range(3):
        rep = euler_identity_check(cloud(300 + seed, 12, d), flavor, k)
        assert rep.holds, rep


def test_isolated_edges_against_brute_force_torus():
    pts = cloud(5, 60)
    r = 0.2

    def dist(a, b):
        delta = np.abs(a - b)
        return np.linalg.norm(np.minimum(delta, 1 - delta))

    want = set()
    for i, j in combinations(range(len(pts)), 2):
        rho = dist(pts[i], pts[j])
        if rho <= r and not any(dist(pts[z], pts[i]) <= rho and dist(pts[z], pts[j]) <= rho
                                for z in range(len(pts)) if z not in (i, j)):
            want.add((i, j))
    got, _ = isolated_edges(pts, r, box=1.0)
    assert {tuple(e) for e in got.tolist()} == want


def test_sign_split_adds_up():
    pts = cloud(9, 25)
    for flavor in ("cech", "rips"):
        rep = sign_split(pts, flavor, 1, 0.4)
        assert np.array_equal(rep.plus + rep.minus, rep.multiplicity)


def test_fk_curve_cumulative_and_csv():
    pts = cloud(10, 200)
    rep = fk_curve(pts, "cech", 1, [0.5, 1, 2, 4], nu=200, split=True)
    f = rep.curve["F_k"]
    assert np.all(np.diff(f) >= 0) and f[-1] == len(rep.radii)
    assert np.array_equal(rep.curve["F_k_plus"] + rep.curve["F_k_minus"], f)
    lines = curve_csv(rep).splitlines()
    assert lines[0] == "lambda,F_k,F_k_plus,F_k_minus" and len(lines) == 5
    with pytest.raises(ValueError):
        fk_curve(pts, "cech", 1, [1, 0.5], nu=200)


def test_random_inputs_have_no_degenerate_faces():
    assert cech_critical_faces(cloud(11, 200), 2, 0.2).degenerate == 0
