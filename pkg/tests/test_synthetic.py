import math

import numpy as np
import pytest

from jointising.core import exact_loglik, state_probabilities, all_states
from jointising.synthetic import (
    EdgeSet,
    SimulationDesign,
    add_individual_edges,
    exact_chain,
    exact_sample,
    gen_chain,
    gen_nearest_neighbor,
    gen_scale_free,
    gibbs_chain,
    gibbs_sample,
    individual_edge_count,
    make_design,
    rng_for,
    sample_params,
    simulate,
)

# --- graphs ------------------------------------------------------------------


def test_chain_examples():
    assert set(gen_chain(4)) == {(0, 1), (1, 2), (2, 3)}
    assert set(gen_chain(2)) == {(0, 1)}
    big = gen_chain(100)
    assert len(big) == 99
    assert set(big.degrees().tolist()) == {1, 2}
    with pytest.raises(ValueError):
        gen_chain(1)


def test_edgeset_normalizes_and_validates():
    e = EdgeSet(3, frozenset({(2, 0)}))
    assert (0, 2) in e and (2, 0) in e
    with pytest.raises(ValueError):
        EdgeSet(3, frozenset({(1, 1)}))
    with pytest.raises(ValueError):
        EdgeSet(3, frozenset({(0, 3)}))
    assert EdgeSet.from_adjacency(e.adjacency()) == e


def test_nearest_neighbor_small_is_complete():
    assert len(gen_nearest_neighbor(4, seed=0)) == 6


@pytest.mark.parametrize("seed", range(5))
def test_nearest_neighbor_max_degree(seed):
    assert gen_nearest_neighbor(40, seed).degrees().max() <= 3


def test_nearest_neighbor_brute_force():
    p = 20
    g = gen_nearest_neighbor(p, seed=7)
    pts = rng_for(7, "nn-points").random((p, 2))
    near = []
    for i in range(p):
        d = [(math.dist(pts[i], pts[j]), j) for j in range(p) if j != i]
        near.append({j for _, j in sorted(d)[:3]})
    expected = {(i, j) for i in range(p) for j in range(i + 1, p) if j in near[i] and i in near[j]}
    assert set(g) == expected
    assert gen_nearest_neighbor(p, seed=7) == g


def test_scale_free_examples():
    assert set(gen_scale_free(3, m=2, seed=1)) == {(0, 1), (0, 2), (1, 2)}
    for seed in range(5):
        assert len(gen_scale_free(50, m=1, seed=seed)) == 49
    g = gen_scale_free(30, m=2, seed=3)
    assert len(g) == 3 + 2 * 27
    with pytest.raises(ValueError):
        gen_scale_free(2, m=2)


def test_scale_free_heavy_tail():
    hits = sum(gen_scale_free(200, 1, seed=s).degrees().max() >= 5 for s in range(50))
    assert hits >= 45


# --- individual edges and parameters -----------------------------------------


def test_individual_edge_counts():
    assert individual_edge_count(99, 0.25) == 25
    assert individual_edge_count(2, 0.25) == 1  # 0.5 rounds up
    assert all(len(s) == 0 for s in add_individual_edges(gen_chain(10), 0.0, 3, seed=1))


def test_individual_edges_disjoint_full_rho():
    common = gen_chain(100)
    sets = add_individual_edges(common, 1.0, 3, seed=2)
    assert [len(s) for s in sets] == [99, 99, 99]
    for i, s in enumerate(sets):
        assert not (s.edges & common.edges)
        for t in sets[i + 1:]:
            assert not (s.edges & t.edges)


def test_individual_edges_capacity_error():
    with pytest.raises(ValueError, match="non-edges"):
        add_individual_edges(gen_chain(4), 1.0, 3, seed=0)


def test_sample_params_ranges():
    assert not sample_params(EdgeSet(4), seed=0).any()
    theta = sample_params(gen_chain(50), seed=3)
    vals = np.abs(theta[np.triu_indices(50, 1)])
    vals = vals[vals > 0]
    assert len(vals) == 49 and vals.min() >= 0.5 and vals.max() <= 1.0
    assert np.array_equal(theta, theta.T) and not np.diag(theta).any()


def test_sample_params_sign_balance():
    p = 142  # 141 chain edges per draw
    neg = total = 0
    for seed in range(71):
        v = sample_params(gen_chain(p), seed)[np.triu_indices(p, 1)]
        v = v[v != 0]
        neg += int(np.sum(v < 0))
        total += len(v)
    assert total >= 10_000
    assert abs(neg / total - 0.5) < 0.02


def test_design_invariants_and_roundtrip(tmp_path):
    d = make_design("nn", 20, 3, 0.25, (20, 30, 40), seed=5)
    truth = d.truth()
    for k in range(3):
        assert d.common.edges <= truth[k].edges
        adj = d.thetas[k] != 0
        np.fill_diagonal(adj, False)
        assert EdgeSet.from_adjacency(adj) == truth[k]
    d.save(tmp_path / "d.json")
    back = SimulationDesign.load(tmp_path / "d.json")
    assert back.common == d.common and back.individual == d.individual
    assert all(np.array_equal(a, b) for a, b in zip(back.thetas, d.thetas))


def test_design_rejects_overlap():
    common = gen_chain(5)
    bad = EdgeSet(5, frozenset({(0, 1)}))
    with pytest.raises(ValueError):
        SimulationDesign(5, 1, common, (bad,), 0.25, (10,), 0)


def test_rho_zero_shares_values():
    d = make_design("chain", 8, 3, 0.0, 10, seed=1)
    assert np.array_equal(d.thetas[0], d.thetas[2])
    e = make_design("chain", 8, 3, 0.0, 10, seed=1, shared_common_values=False)
    assert not np.array_equal(e.thetas[0], e.thetas[1])


def test_centered_design_has_half_margins():
    d = make_design("chain", 4, 1, 0.0, 10, seed=2, centered=True)
    probs = state_probabilities(d.thetas[0])
    margins = probs @ all_states(4)
    assert np.allclose(margins, 0.5, atol=1e-12)


# --- samplers ----------------------------------------------------------------


def test_gibbs_zero_theta_is_fair_coin():
    x = gibbs_chain(np.zeros((5, 5)), 10_000, burnin=100, thin=1, seed=4)
    assert np.all(np.abs(x.mean(axis=0) - 0.5) < 0.02)


def test_gibbs_single_site():
    x = gibbs_chain(np.array([[math.log(3)]]), 20_000, burnin=10, thin=1, seed=2)
    assert abs(x.mean() - 0.75) < 0.01


def test_gibbs_deterministic_and_thin_zero():
    theta = sample_params(gen_chain(4), 1)
    a = gibbs_sample(theta, 50, burnin=10, thin=3, seed=9)
    b = gibbs_sample(theta, 50, burnin=10, thin=3, seed=9)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(gibbs_chain(theta, 20, 5, 0, seed=1), gibbs_chain(theta, 20, 5, 1, seed=1))


def test_gibbs_thinning_consistency():
    theta = sample_params(gen_chain(6), 4)
    a = gibbs_chain(theta, 80_000, burnin=1000, thin=2, seed=1)[::2]
    b = gibbs_chain(theta, 40_000, burnin=1000, thin=4, seed=2)
    assert np.all(np.abs(a.mean(axis=0) - b.mean(axis=0)) < 0.02)


def test_gibbs_matches_exact_small_chain():
    theta = np.zeros((3, 3))
    theta[0, 1] = theta[1, 0] = 1.0
    theta[1, 2] = theta[2, 1] = -1.0
    x = gibbs_chain(theta, 50_000, burnin=1000, thin=2, seed=3)
    codes = (x * (1 << np.arange(3))).sum(axis=1).astype(int)
    freq = np.bincount(codes, minlength=8) / len(codes)
    assert 0.5 * np.abs(freq - state_probabilities(theta)).sum() < 0.02


def test_exact_sample_examples():
    x = exact_chain(np.zeros((2, 2)), 100_000, seed=1)
    codes = (x * [1, 2]).sum(axis=1).astype(int)
    assert np.all(np.abs(np.bincount(codes, minlength=4) / 1e5 - 0.25) < 0.01)
    theta = np.array([[0.0, 1.0], [1.0, 0.0]])
    x = exact_chain(theta, 100_000, seed=2)
    both = np.mean(x.all(axis=1))
    assert abs(both - math.e / (3 + math.e)) < 0.01


def test_exact_sample_entropy():
    theta = sample_params(gen_chain(8), 6)
    probs = state_probabilities(theta)
    neg_entropy = float(np.sum(probs * np.log(probs)))
    d = exact_sample(theta, 20_000, seed=5)
    assert abs(exact_loglik(d, theta) - neg_entropy) < 0.02


def test_exact_sample_limit():
    with pytest.raises(ValueError, match="enumeration limit"):
        exact_chain(np.zeros((21, 21)), 1)


def test_simulate_shapes_and_determinism():
    d = make_design("sf", 12, 2, 0.25, (30, 40), seed=8)
    a = simulate(d, burnin=200, thin=2)
    b = simulate(d, burnin=200, thin=2)
    assert a.sizes == (30, 40)
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))
    c = simulate(d, burnin=200, thin=2, replicate=1)
    assert not np.array_equal(a[0].values, c[0].values)
