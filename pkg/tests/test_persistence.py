import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from univpi.complex import assemble, build, build_cech, build_rips
from univpi.persistence import (
    EmptyMeasure, InvalidFiltration, NotNegative, PiMeasure, cascade_verify, diagram_csv, empirical_cdf,
    insert_simplex, persistent_count, pi_count_alpha, pi_measure, reduce, stability_probe,
)

from oracles import betti_numbers, plain_reduction

SQUARE = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)


def cloud(seed, n=12, d=2):
    return np.random.default_rng(seed).uniform(0, 1, (n, d))


def test_square_rips_single_loop():
    dgm, _ = reduce(build_rips(SQUARE, 2.0, 2))
    h1 = dgm.in_dim(1)
    assert len(h1) == 1
    assert h1.births[0] == 1.0 and h1.deaths[0] == pytest.approx(math.sqrt(2))
    m = pi_measure(dgm, 1, 2.0)
    assert m.pi_values.tolist() == pytest.approx([math.sqrt(2)])
    h0 = dgm.in_dim(0)
    assert len(h0) == 3 and np.all(h0.deaths == 1.0)


def test_triangle_cech_loop_pi():
    pts = np.array([[0, 0], [1, 0], [0.5, math.sqrt(3) / 2]])
    dgm, _ = reduce(build_cech(pts, 1.0, 2))
    h1 = dgm.in_dim(1)
    assert h1.births.tolist() == [0.5]
    assert h1.deaths[0] == pytest.approx(1 / math.sqrt(3))
    assert pi_measure(dgm, 1, 1.0).pi_values[0] == pytest.approx(2 / math.sqrt(3))


def test_csv_layout():
    dgm, _ = reduce(build_rips(SQUARE, 2.0, 2))
    text = diagram_csv(dgm)
    assert text.splitlines()[0] == "dim,birth,death"
    assert "1,1.0,1.4142135623730951" in text


@pytest.mark.parametrize("flavor", ["rips", "cech"])
@pytest.mark.parametrize("seed", range(4))
def test_betti_numbers_match_rank_oracle(flavor, seed):
    pts = cloud(seed, 10)
    fc = build(pts, flavor, 0.7, 3)
    dgm, _ = reduce(fc)
    for r in np.linspace(0.02, 0.7, 20):
        sub = [fc.simplex(i) for i in np.flatnonzero(fc.values <= r)]
        want = betti_numbers(sub, 2)
        assert [dgm.betti(k, r) for k in range(2)] == want[:2]


@given(st.integers(0, 10**6), st.sampled_from(["rips", "cech"]))
def test_pairs_match_plain_reduction(seed, flavor):
    fc = build(cloud(seed, 11), flavor, 0.6, 2)
    pairs = plain_reduction(fc.simplices())
    _, table = reduce(fc)
    for b, d in pairs.items():
        assert table.partner[b] == d and table.partner[d] == b
    unpaired = set(range(len(fc))) - set(pairs) - set(pairs.values())
    assert {i for i in range(len(fc)) if table.partner[i] < 0} == unpaired


@given(st.integers(0, 10**6))
def test_diagram_invariant_under_tie_breaking(seed):
    rng = np.random.default_rng(seed)
    pts = np.unique(rng.integers(0, 4, (10, 2)).astype(float), axis=0)
    fc = build_rips(pts, 3.0, 2)
    relabel = rng.permutation(len(pts))
    by_dim = [np.sort(relabel[fc.verts[fc.dims == p, : p + 1]], axis=1) for p in range(3)]
    other = assemble(pts[np.argsort(relabel)], "rips", 3.0, 2, by_dim, [fc.values[fc.dims == p] for p in range(3)])
    a, _ = reduce(fc)
    b, _ = reduce(other)
    key = lambda g: sorted(zip(g.dims.tolist(), g.births.tolist(), g.deaths.tolist()))
    assert key(a) == key(b)


@given(st.integers(0, 10**6), st.sampled_from(["rips", "cech"]))
def test_pi_values_at_least_one_and_scale_free(seed, flavor):
    pts = cloud(seed, 15)
    a = pi_measure(reduce(build(pts, flavor, 0.5, 2))[0], 1, 0.5)
    b = pi_measure(reduce(build(pts * 7.5 + 3, flavor, 3.75, 2))[0], 1, 3.75)
    assert np.all(a.pi_values >= 1)
    assert a.total == b.total
    assert np.allclose(a.pi_values, b.pi_values, rtol=1e-9)


def test_count_alpha_and_cdf():
    m = PiMeasure(1, 1.0, np.array([1.2, 1.2, 2.0]))
    assert pi_count_alpha(m, 1.0) == 3
    assert pi_count_alpha(m, 1.2) == 3
    assert pi_count_alpha(m, 1.5) == 1
    cdf = empirical_cdf(m)
    assert cdf(1.2) == pytest.approx(2 / 3)
    assert cdf(1 - 1e-12) == 0.0
    assert cdf(2.0) == 1.0
    single = empirical_cdf(PiMeasure(1, 1.0, np.array([math.sqrt(2)])))
    assert single(math.sqrt(2) - 1e-12) == 0 and single(math.sqrt(2)) == 1
    with pytest.raises(EmptyMeasure):
        empirical_cdf(PiMeasure(1, 1.0, np.zeros(0)))


def open_star_removed(fc, sigma):
    """The complex with sigma and all of its cofaces removed."""
    keep = [i for i in range(len(fc)) if not set(sigma) <= set(fc.simplex(i))]
    by_dim = [[] for _ in range(fc.max_dim + 1)]
    vals = [[] for _ in range(fc.max_dim + 1)]
    for i in keep:
        by_dim[fc.dims[i]].append(fc.simplex(i))
        vals[fc.dims[i]].append(fc.values[i])
    by_dim = [np.array(b, dtype=np.int64).reshape(-1, p + 1) for p, b in enumerate(by_dim)]
    return assemble(fc.points, fc.flavor, fc.r_max, fc.max_dim, by_dim, vals)


def random_insertion(rng, flavor="rips", n=10):
    pts = rng.uniform(0, 1, (n, 2))
    full = build(pts, flavor, 0.6, 3)
    sigma = full.simplex(int(rng.integers(len(full))))
    base = open_star_removed(full, sigma)
    return base, sigma, float(full.values[full.index[sigma]])


def test_insert_validates_faces():
    fc = build_rips(SQUARE, 1.2, 2)
    with pytest.raises(InvalidFiltration):
        insert_simplex(fc, (0, 1, 2), 2.0)  # edge (0, 2) missing
    with pytest.raises(InvalidFiltration):
        insert_simplex(fc, (0, 1), 1.0)  # already present
    with pytest.raises(InvalidFiltration):
        insert_simplex(insert_simplex(fc, (0, 2), 1.5), (0, 1, 2), 1.2)  # face enters later
    grown = insert_simplex(fc, (0, 2), 1.5)
    assert grown.simplex(len(grown) - 1) == (0, 2)


@given(st.integers(0, 10**6), st.integers(0, 2), st.floats(1.0, 2.0), st.sampled_from(["rips", "cech"]))
def test_stability_bound(seed, k, alpha, flavor):
    base, sigma, value = random_insertion(np.random.default_rng(seed), flavor)
    res = stability_probe(base, sigma, value, alpha, k)
    assert res.passes, res
    res = stability_probe(base, sigma, value, alpha, k, r_max=0.6)
    assert res.passes, res


def test_vertex_insertion_changes_nothing():
    fc = build_rips(np.vstack([SQUARE, [[5.0, 5.0]]]), 2.0, 2)
    base = open_star_removed(fc, (4,))
    assert stability_probe(base, (4,), 0.0, 1.0, 1).delta == 0


def test_cascade_on_square():
    fc = build_rips(SQUARE, 2.0, 2)
    base = open_star_removed(fc, (0, 1, 2))
    rep = cascade_verify(base, (0, 1, 2), math.sqrt(2))
    assert rep.passes
    with pytest.raises(NotNegative):
        # closing the 4-cycle creates a class
        cascade_verify(open_star_removed(build_rips(SQUARE, 1.2, 2), (0, 3)), (0, 3), 1.1)


def test_empty_cascade_when_nothing_changes():
    fc = build_rips(SQUARE, 2.0, 2)
    base = open_star_removed(fc, (0, 1, 3))
    rep = cascade_verify(base, (0, 1, 3), math.sqrt(2))
    assert rep.passes and len(rep.entries) <= 1


@given(st.integers(0, 10**6))
def test_cascade_properties_on_random_negative_insertions(seed):
    rng = np.random.default_rng(seed)
    for _ in range(20):
        base, sigma, value = random_insertion(rng)
        if len(sigma) < 2:
            continue
        try:
            rep = cascade_verify(base, sigma, value)
        except NotNegative:
            continue
        assert rep.passes, rep
        # nested intervals
        spans = [(e[1], e[2]) for e in rep.entries]
        assert all(b2 <= b1 and d1 <= d2 for (b1, d1), (b2, d2) in zip(spans, spans[1:]))
        return


def test_persistent_count_with_infinite_bars():
    fc = build_rips(SQUARE, 1.2, 2)  # loop never filled
    assert persistent_count(fc, 1, 5.0, np.inf) == 1
    assert persistent_count(fc, 1, 5.0, 1.2) == 0
