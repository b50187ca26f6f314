from fractions import Fraction

import numpy as np
import pytest

from diffwalk.graph import UnknownVertexError, build_graph
from diffwalk.oracle import (
    check_probability_bound,
    classical_diffuse,
    classical_marginals_exact,
    edge_selection_probability,
    enumerate_profiles,
    is_matching,
    matching_distribution,
    profile_to_matching,
    solve_fixed_point,
)
from conftest import random_connected_graph


def single_edge():
    return build_graph(["A", "B"], [("A", "B")])


def triangle():
    return build_graph(["0", "1", "2"], [("0", "1"), ("0", "2"), ("1", "2")])


def star_k13():
    return build_graph(["c", "x", "y", "z"], [("c", "x"), ("c", "y"), ("c", "z")])


# ------------------------------------------------------------------- profiles


def test_single_edge_has_one_profile():
    profiles = enumerate_profiles(single_edge())
    assert profiles == [({"A": "B", "B": "A"}, Fraction(1))]


def test_paper_graph_has_twelve_profiles(paper_graph):
    profiles = enumerate_profiles(paper_graph)
    assert len(profiles) == 12
    assert all(w == Fraction(1, 12) for _, w in profiles)
    assert sum(w for _, w in profiles) == 1


def test_triangle_has_eight_profiles():
    profiles = enumerate_profiles(triangle())
    assert len(profiles) == 8
    assert all(w == Fraction(1, 8) for _, w in profiles)


def test_isolated_vertex_rejected():
    g = build_graph(["A", "B", "C"], [("A", "B")])
    with pytest.raises(ValueError):
        enumerate_profiles(g)


# ------------------------------------------------------------------- matching


def test_mutual_choice_on_single_edge():
    assert profile_to_matching({"A": "B", "B": "A"}) == frozenset({("A", "B")})


def test_paper_first_configuration_matching():
    profile = {"A": "B", "B": "A", "C": "A", "D": "C"}
    assert profile_to_matching(profile) == frozenset({("A", "B")})


def test_rotation_has_empty_matching():
    assert profile_to_matching({"0": "1", "1": "2", "2": "0"}) == frozenset()


def test_profile_matchings_are_always_matchings():
    rng = np.random.default_rng(23)
    for _ in range(12):
        g = random_connected_graph(rng)
        for profile, _ in enumerate_profiles(g):
            m = profile_to_matching(profile)
            assert is_matching(m)
            for e in m:
                assert e in g.edges


def test_matching_distribution_sums_to_one(paper_graph):
    dist = matching_distribution(paper_graph)
    assert sum(dist.values()) == Fraction(1)
    assert dist[frozenset({("A", "B"), ("C", "D")})] > 0


# ------------------------------------------------------------------ diffusion


def test_paper_exact_marginals(paper_graph):
    tokens = dict(zip("ABCD", range(4)))
    marg = classical_marginals_exact(paper_graph, tokens, 1)
    assert marg["A"] == {0: Fraction(7, 12), 1: Fraction(3, 12), 2: Fraction(2, 12)}
    assert marg["A"].get(3, Fraction(0)) == 0


def test_triangle_exact_marginals():
    marg = classical_marginals_exact(triangle(), {"0": 1, "1": 0, "2": 0}, 1)
    assert marg["0"][1] == Fraction(1, 2)
    assert marg["1"][1] == Fraction(1, 4)
    assert marg["2"][1] == Fraction(1, 4)


def test_zero_rounds_point_masses(paper_graph):
    tokens = dict(zip("ABCD", range(4)))
    marg = classical_marginals_exact(paper_graph, tokens, 0)
    for i, v in enumerate("ABCD"):
        assert marg[v] == {i: Fraction(1)}


def test_exact_mode_round_cap(paper_graph):
    with pytest.raises(ValueError):
        classical_marginals_exact(paper_graph, dict(zip("ABCD", range(4))), 5)


def test_exact_mode_profile_cap():
    # K8 has degree product 7^8 > 1e6; the guard fires before enumerating
    names = [chr(ord("a") + i) for i in range(8)]
    g = build_graph(names, [(names[i], names[j]) for i in range(8) for j in range(i + 1, 8)])
    with pytest.raises(ValueError):
        classical_marginals_exact(g, {v: 0 for v in names}, 1)


def test_edgeless_graph_diffuses_trivially():
    g = build_graph(["A", "B"], [])
    marg = classical_marginals_exact(g, {"A": 0, "B": 1}, 2)
    assert marg == {"A": {0: Fraction(1)}, "B": {1: Fraction(1)}}


def test_token_multiset_conserved_in_sampling(paper_graph):
    tokens = dict(zip("ABCD", range(4)))
    dists = classical_diffuse(paper_graph, tokens, 2, exact=False, seed=3, samples=500)
    for v in paper_graph.vertices:
        assert sum(dists[v].support.values()) == pytest.approx(1.0, abs=1e-12)


def test_exact_matches_sampling_within_3_sigma(paper_graph):
    tokens = dict(zip("ABCD", range(4)))
    n = 100_000
    exact = classical_marginals_exact(paper_graph, tokens, 1)
    sampled = classical_diffuse(paper_graph, tokens, 1, exact=False, seed=12345, samples=n)
    for v in paper_graph.vertices:
        for t in range(4):
            p = float(exact[v].get(t, 0))
            sigma = (p * (1 - p) / n) ** 0.5
            assert abs(sampled[v].prob((t,)) - p) <= 3 * sigma + 1e-12


def test_directed_rule_sampling_and_exact_agree():
    pm = {(i, j): ((j, i) if 0 in (i, j) else (i, j)) for i in range(3) for j in range(3)}
    g = build_graph("ABC", [("A", "B"), ("B", "C")])
    tokens = {"A": 1, "B": 0, "C": 2}
    exact = classical_marginals_exact(g, tokens, 2, pm)
    n = 50_000
    sampled = classical_diffuse(g, tokens, 2, pm, exact=False, seed=777, samples=n)
    for v in g.vertices:
        for t in range(3):
            p = float(exact[v].get(t, 0))
            sigma = (p * (1 - p) / n) ** 0.5
            assert abs(sampled[v].prob((t,)) - p) <= 3 * sigma + 1e-12


# ------------------------------------------------------------ edge probability


def test_edge_probability_single_edge():
    assert edge_selection_probability(single_edge(), "A", "B") == 1


def test_edge_probability_paper_graph(paper_graph):
    assert edge_selection_probability(paper_graph, "A", "B") == Fraction(1, 4)
    assert edge_selection_probability(paper_graph, "C", "D") == Fraction(1, 3)
    with pytest.raises(UnknownVertexError):
        edge_selection_probability(paper_graph, "A", "D")


def test_edge_probability_matches_enumeration(paper_graph):
    dist = matching_distribution(paper_graph)

    def mass(edge):
        return sum((w for m, w in dist.items() if edge in m), Fraction(0))

    assert mass(("A", "B")) == Fraction(3, 12)
    assert mass(("C", "D")) == Fraction(4, 12)
    rng = np.random.default_rng(4)
    for _ in range(8):
        g = random_connected_graph(rng)
        gdist = matching_distribution(g)
        for e in g.edges:
            got = sum((w for m, w in gdist.items() if e in m), Fraction(0))
            assert got == edge_selection_probability(g, *e)


# ---------------------------------------------------------------- fixed point


def test_fixed_point_delta_zero():
    assert solve_fixed_point(0) == 1.0


def test_fixed_point_delta_one_closed_form():
    assert abs(solve_fixed_point(1) - (3 - 5 ** 0.5) / 2) <= 1e-12


def test_fixed_point_delta_two():
    assert abs(solve_fixed_point(2) - 0.275508) <= 1e-6


def test_fixed_point_residuals_and_monotonicity():
    prev = None
    for delta in range(1, 11):
        p = solve_fixed_point(delta)
        assert abs(p - (1 - p) ** (2 * delta)) <= 1e-12
        if prev is not None:
            assert p < prev
        prev = p


def test_fixed_point_rejects_negative():
    with pytest.raises(ValueError):
        solve_fixed_point(-1)


# ---------------------------------------------------------------- bound check


def test_bound_single_edge():
    report = check_probability_bound(single_edge())
    (entry,) = report["edges"]
    assert entry["selection"] == 1 and entry["bound"] == 1 and entry["satisfied"]
    assert report["all_satisfied"]


def test_bound_paper_edge_ab(paper_graph):
    report = check_probability_bound(paper_graph)
    ab = next(r for r in report["edges"] if r["edge"] == ("A", "B"))
    assert ab["selection"] == Fraction(1, 4)
    assert ab["bound"] == Fraction(25, 36)
    assert ab["satisfied"]


def test_bound_star_graph():
    report = check_probability_bound(star_k13())
    cx = next(r for r in report["edges"] if r["edge"] == ("c", "x"))
    assert cx["selection"] == Fraction(1, 3)
    assert cx["bound"] == Fraction(4, 9)
    assert cx["satisfied"]


def test_conditional_table_verified_by_enumeration():
    rng = np.random.default_rng(77)
    for _ in range(8):
        g = random_connected_graph(rng)
        report = check_probability_bound(g)
        assert report["independence_ok"], report["independence_failures"]
