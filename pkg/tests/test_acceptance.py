"""Acceptance suite: one test per exit criterion, at its stated tolerance.

Each test prints one PASS line after its assertions hold; run with

    pytest tests/test_acceptance.py -v -s

to see the lines. The shared pool of 50 random connected graphs
(|V| <= 6, |E| <= 8) comes from the pinned-seed fixture in conftest.
"""

import math
import time
from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest

from diffwalk.oracle import (
    classical_diffuse,
    classical_marginals_exact,
    solve_fixed_point,
)
from diffwalk.protocol import (
    DiffusionRun,
    ExchangeRule,
    RoundMode,
    consolidate_flags,
    directed_exchange_matrix,
    exchange_step,
    finish_round,
    measured_statistics,
    prepare_coins,
    run_rounds,
    selection_probabilities,
    verify_matching_invariant,
    verify_token_conservation,
    vertex_marginals,
)
from diffwalk.scenarios import (
    builtin_scenario,
    render_report,
    report_without_volatile,
    run_scenario,
)

NORM_TOL = 1e-9
SAMPLES = 100_000
# Fixed substream for the criterion-5 classical sampler; the 3-sigma gate is
# applied per quantity, so the seed is pinned to keep the suite deterministic.
SAMPLER_SEED_BASE = 259_000


@pytest.fixture(scope="module")
def staged_runs(fifty_graphs):
    """One coherent round on every pooled graph, executed stage by stage with
    the norm recorded after each stage and the post-consolidation state kept."""
    out = []
    for i, g in enumerate(fifty_graphs):
        tokens = {v: j for j, v in enumerate(g.vertices)}
        rule = ExchangeRule.full_swap(len(g.vertices))
        run = DiffusionRun.start(g, tokens, RoundMode.COHERENT, rule, seed=1000 + i)
        norms = [run.state.norm_squared()]
        prepare_coins(run)
        norms.append(run.state.norm_squared())
        consolidate_flags(run)
        norms.append(run.state.norm_squared())
        consolidated = run.state
        exchange_step(run)
        norms.append(run.state.norm_squared())
        finish_round(run)
        norms.append(run.state.norm_squared())
        out.append(
            SimpleNamespace(
                graph=g, tokens=tokens, run=run, consolidated=consolidated, norms=norms
            )
        )
    return out


def test_criterion_1_four_node_golden():
    cfg = builtin_scenario("paper-4node")
    cfg.engine = "quantum"
    t0 = time.perf_counter()
    report = run_scenario(cfg)
    elapsed = time.perf_counter() - t0
    marg = {r["token"]: float(r["prob"]) for r in report["engines"]["quantum"]["marginals"]["A"]}
    expected = {"a": 7 / 12, "b": 3 / 12, "c": 2 / 12, "d": 0.0}
    for token, p in expected.items():
        assert abs(marg[token] - p) <= NORM_TOL, (token, marg[token], p)
    assert elapsed < 1.0, f"took {elapsed:.2f}s"
    print(
        "\nACCEPTANCE PASS 1: paper-4node coherent round gives "
        f"M(A)=7/12,3/12,2/12,0 within 1e-9 in {elapsed*1000:.0f}ms"
    )


def test_criterion_2_watrous_golden():
    t0 = time.perf_counter()
    report = run_scenario(builtin_scenario("watrous-c15"))
    elapsed = time.perf_counter() - t0
    marg = report["engines"]["quantum"]["marginals"]

    def prob_of_one(v):
        return float(next(r["prob"] for r in marg[v] if r["token"] == "1"))

    assert abs(prob_of_one("12") - 0.5) <= NORM_TOL
    assert abs(prob_of_one("13") - 0.25) <= NORM_TOL
    assert abs(prob_of_one("14") - 0.25) <= NORM_TOL
    quiescent = [f"{i:02d}" for i in range(12)]
    assert report["engines"]["quantum"]["quiescent"] == quiescent
    for v in quiescent:
        assert prob_of_one(v) == 0.0
        assert float(next(r["prob"] for r in marg[v] if r["token"] == "0")) == 1.0
    assert elapsed < 5.0, f"took {elapsed:.2f}s"
    print(
        "\nACCEPTANCE PASS 2: watrous-c15 block marginals 1/2,1/4,1/4 within "
        f"1e-9, 12 quiescent nodes untouched, in {elapsed*1000:.0f}ms"
    )


def test_criterion_3_edge_probability_law(staged_runs):
    checked = 0
    for item in staged_runs:
        g = item.graph
        sel = selection_probabilities(item.consolidated, g)
        for (u, v), p in sel.items():
            expected = 1.0 / (g.degree(u) * g.degree(v))
            assert abs(p - expected) <= NORM_TOL, ((u, v), p, expected)
            checked += 1
    print(
        f"\nACCEPTANCE PASS 3: flag-pair marginal equals 1/(deg u * deg v) "
        f"within 1e-9 on {checked} edges across 50 graphs"
    )


def test_criterion_4_matching_invariant(staged_runs):
    terms = 0
    for item in staged_runs:
        verify_matching_invariant(item.consolidated, item.graph)  # raises on violation
        terms += item.consolidated.support_size
    print(
        f"\nACCEPTANCE PASS 4: all {terms} post-consolidation basis terms "
        "across 50 graphs decode to valid matchings (zero violations)"
    )


def test_criterion_5_oracle_equivalence(staged_runs, fifty_graphs):
    # coherent single round vs exact classical enumeration
    compared = 0
    for item in staged_runs:
        marg = vertex_marginals(item.run.state, item.graph)
        exact = classical_marginals_exact(item.graph, item.tokens, 1)
        for v in item.graph.vertices:
            for t in range(len(item.graph.vertices)):
                q = marg[v].prob((t,))
                c = float(exact[v].get(t, Fraction(0)))
                assert abs(q - c) <= NORM_TOL, (v, t, q, c)
                compared += 1

    # two Measured rounds: exact quantum statistics (all measurement branches
    # enumerated through the engine) vs classical Monte Carlo at 1e5 trials
    worst_z = 0.0
    for i, g in enumerate(fifty_graphs):
        tokens = {v: j for j, v in enumerate(g.vertices)}
        stats = measured_statistics(g, tokens, 2, ExchangeRule.full_swap(len(g.vertices)))
        sampled = classical_diffuse(
            g, tokens, 2, exact=False, seed=SAMPLER_SEED_BASE + i, samples=SAMPLES
        )
        for v in g.vertices:
            for t in range(len(g.vertices)):
                p = stats[v].prob((t,))
                sigma = math.sqrt(p * (1 - p) / SAMPLES)
                diff = abs(sampled[v].prob((t,)) - p)
                assert diff <= 3 * sigma + 1e-12, (i, v, t, diff, 3 * sigma)
                if sigma > 0:
                    worst_z = max(worst_z, diff / sigma)
    print(
        f"\nACCEPTANCE PASS 5: coherent marginals equal exact enumeration within "
        f"1e-9 ({compared} comparisons); 2-round Measured statistics within "
        f"3 sigma of classical sampling at 1e5 trials (worst z={worst_z:.2f})"
    )


def test_criterion_6_fixed_point():
    assert abs(solve_fixed_point(1) - (3 - math.sqrt(5)) / 2) <= 1e-12
    prev = None
    for delta in range(1, 11):
        p = solve_fixed_point(delta)
        residual = abs(p - (1 - p) ** (2 * delta))
        assert residual <= 1e-12, (delta, residual)
        if prev is not None:
            assert p < prev, (delta, p, prev)
        prev = p
    print(
        "\nACCEPTANCE PASS 6: fixed point (3-sqrt5)/2 at delta=1, residuals "
        "<= 1e-12 and monotone decreasing for delta in 1..10"
    )


def test_criterion_7_directed_rule():
    rule = directed_exchange_matrix()
    m = rule.matrix.real
    assert np.array_equal(m, rule.matrix)  # real 0/1 matrix
    assert set(np.unique(m)) <= {0.0, 1.0}
    assert np.array_equal(m @ m.T, np.eye(9))  # a permutation, hence unitary
    assert np.array_equal(m.sum(axis=0), np.ones(9))
    assert np.array_equal(m.sum(axis=1), np.ones(9))

    from diffwalk.graph import build_graph

    edge = build_graph(["A", "B"], [("A", "B")])
    marg, _ = run_rounds(edge, {"A": 0, "B": 1}, 1, RoundMode.COHERENT, rule, seed=0)
    assert marg["A"].prob((1,)) == pytest.approx(1.0, abs=NORM_TOL)
    assert marg["B"].prob((0,)) == pytest.approx(1.0, abs=NORM_TOL)
    marg, _ = run_rounds(edge, {"A": 1, "B": 2}, 1, RoundMode.COHERENT, rule, seed=0)
    assert marg["A"].prob((1,)) == pytest.approx(1.0, abs=NORM_TOL)
    assert marg["B"].prob((2,)) == pytest.approx(1.0, abs=NORM_TOL)
    print(
        "\nACCEPTANCE PASS 7: directed rule is a permutation unitary; tokens "
        "(0,1) cross with probability 1 and (1,2) stay with probability 1"
    )


def test_criterion_8_engine_conservation(staged_runs):
    stages = 0
    for item in staged_runs:
        for n in item.norms:
            assert abs(n - 1.0) <= NORM_TOL
            stages += 1
        verify_token_conservation(item.run.state, item.graph, item.tokens)
    # measured-mode runs conserve the multiset along the sampled trajectory too
    for item in staged_runs[:10]:
        run = DiffusionRun.start(
            item.graph, item.tokens, RoundMode.MEASURED,
            ExchangeRule.full_swap(len(item.graph.vertices)), seed=5,
        )
        for _ in range(2):
            prepare_coins(run)
            consolidate_flags(run)
            exchange_step(run)
            finish_round(run)
            assert abs(run.state.norm_squared() - 1.0) <= NORM_TOL
            verify_token_conservation(run.state, item.graph, item.tokens)
    print(
        f"\nACCEPTANCE PASS 8: norm within 1e-9 after every pipeline stage "
        f"({stages} checks) and token multiset conserved in every basis term"
    )


def test_criterion_9_determinism():
    # timing_ms is wall-clock and is the single field excluded from the
    # byte comparison; everything else must match byte for byte.
    names = ("paper-4node", "watrous-c15", "triangle", "single-edge")
    for name in names:
        first = run_scenario(builtin_scenario(name))
        second = run_scenario(builtin_scenario(name))
        a = render_report(report_without_volatile(first))
        b = render_report(report_without_volatile(second))
        assert a.encode() == b.encode(), name
    cfg = builtin_scenario("paper-4node")
    cfg.mode = RoundMode.MEASURED
    cfg.rounds = 3
    cfg.seed = 424242
    a = render_report(report_without_volatile(run_scenario(cfg)))
    b = render_report(report_without_volatile(run_scenario(cfg)))
    assert a.encode() == b.encode()
    print(
        "\nACCEPTANCE PASS 9: equal seeds give byte-identical reports "
        "(wall-clock field excluded) for all builtins and a 3-round measured run"
    )
