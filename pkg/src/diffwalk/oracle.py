"""Classical reference process for the quantum diffusion round.

Each vertex picks one neighbor uniformly at random; an edge is selected
exactly when both endpoints picked each other, so the selected set is
always a matching. With a basis-permutation exchange rule acting on basis
tokens this process has identical statistics to the quantum round, which
makes it an independent oracle for the engine. Enumeration paths use exact
rational arithmetic so golden values like 7/12 come out literally.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Iterator, Mapping

import numpy as np

from .graph import OrientedGraph, UnknownVertexError
from .registers import Distribution

__all__ = [
    "Matching",
    "PairMap",
    "SWAP_PAIRS",
    "is_matching",
    "enumerate_profiles",
    "profile_to_matching",
    "matching_distribution",
    "classical_marginals_exact",
    "classical_diffuse",
    "edge_selection_probability",
    "solve_fixed_point",
    "check_probability_bound",
    "EXACT_PROFILE_CAP",
]

# A matching is a set of pairwise non-adjacent undirected edges, each stored
# in canonical (tail, head) orientation.
Matching = frozenset

# Classical exchange semantics: (token_u, token_v) -> (token_u', token_v')
# for the oriented (tail, head) operand order. SWAP_PAIRS marks a full swap.
PairMap = Mapping
SWAP_PAIRS = "swap"

EXACT_PROFILE_CAP = 10**6
EXACT_ROUNDS_CAP = 4


def is_matching(edges) -> bool:
    seen: set[str] = set()
    for u, v in edges:
        if u in seen or v in seen:
            return False
        seen.add(u)
        seen.add(v)
    return True


def _active_vertices(graph: OrientedGraph) -> list[str]:
    return [v for v in graph.vertices if graph.degree(v) >= 1]


def _profile_count(graph: OrientedGraph) -> int:
    return math.prod(graph.degree(v) for v in _active_vertices(graph))


def enumerate_profiles(graph: OrientedGraph) -> list[tuple[dict[str, str], Fraction]]:
    """Every joint neighbor choice with its probability prod_v 1/deg(v).

    Requires deg(v) >= 1 for every vertex; callers must exclude isolated
    vertices themselves (they hold no coin).
    """
    isolated = [v for v in graph.vertices if graph.degree(v) == 0]
    if isolated:
        raise ValueError(f"isolated vertices {isolated} have no neighbor to choose")
    verts = list(graph.vertices)
    weight = Fraction(1, _profile_count(graph))
    out = []
    for combo in itertools.product(*(graph.neighbors(v) for v in verts)):
        out.append((dict(zip(verts, combo)), weight))
    return out


def profile_to_matching(profile: Mapping[str, str]) -> Matching:
    """Mutually-selected edges of a choice profile (always a matching)."""
    edges = set()
    for u, v in profile.items():
        if profile.get(v) == u:
            edges.add((u, v) if u < v else (v, u))
    return frozenset(edges)


def _iter_matchings(graph: OrientedGraph) -> Iterator[tuple[Matching, Fraction]]:
    verts = _active_vertices(graph)
    weight = Fraction(1, _profile_count(graph))
    for combo in itertools.product(*(graph.neighbors(v) for v in verts)):
        choice = dict(zip(verts, combo))
        yield profile_to_matching(choice), weight


def matching_distribution(graph: OrientedGraph) -> dict[Matching, Fraction]:
    """Probability of each selected edge set, aggregated over all profiles."""
    dist: dict[Matching, Fraction] = {}
    for m, w in _iter_matchings(graph):
        dist[m] = dist.get(m, Fraction(0)) + w
    return dist


def _exchange_pair(exchange, tu: int, tv: int) -> tuple[int, int]:
    if exchange is SWAP_PAIRS or exchange is None:
        return tv, tu
    return exchange[(tu, tv)]


def classical_marginals_exact(
    graph: OrientedGraph,
    initial_tokens: Mapping[str, int],
    rounds: int,
    exchange=SWAP_PAIRS,
) -> dict[str, dict[int, Fraction]]:
    """Exact per-vertex token distributions after `rounds` diffusion rounds.

    Dynamic programming over token assignments: each round multiplies the
    current assignment distribution by the matching distribution. Feasible
    while prod_v deg(v) <= 10^6 and rounds <= 4.
    """
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    if rounds > EXACT_ROUNDS_CAP:
        raise ValueError(f"exact mode supports at most {EXACT_ROUNDS_CAP} rounds, got {rounds}")
    verts = list(graph.vertices)
    missing = [v for v in verts if v not in initial_tokens]
    if missing:
        raise ValueError(f"initial tokens missing for vertices {missing}")
    if rounds > 0 and _profile_count(graph) > EXACT_PROFILE_CAP:
        raise ValueError(
            f"profile count {_profile_count(graph)} exceeds exact-mode cap {EXACT_PROFILE_CAP}"
        )

    pos = {v: i for i, v in enumerate(verts)}
    states: dict[tuple[int, ...], Fraction] = {
        tuple(initial_tokens[v] for v in verts): Fraction(1)
    }
    if rounds > 0:
        mdist = matching_distribution(graph)
        for _ in range(rounds):
            nxt: dict[tuple[int, ...], Fraction] = {}
            for assign, w in states.items():
                for m, p in mdist.items():
                    toks = list(assign)
                    for u, v in m:
                        iu, iv = pos[u], pos[v]
                        toks[iu], toks[iv] = _exchange_pair(exchange, toks[iu], toks[iv])
                    key = tuple(toks)
                    nxt[key] = nxt.get(key, Fraction(0)) + w * p
            states = nxt

    marginals: dict[str, dict[int, Fraction]] = {v: {} for v in verts}
    for assign, w in states.items():
        for v, t in zip(verts, assign):
            marginals[v][t] = marginals[v].get(t, Fraction(0)) + w
    return marginals


def _sampled_marginals(
    graph: OrientedGraph,
    initial_tokens: Mapping[str, int],
    rounds: int,
    exchange,
    seed,
    samples: int,
) -> dict[str, Distribution]:
    verts = list(graph.vertices)
    n = len(verts)
    pos = {v: i for i, v in enumerate(verts)}
    nbr_idx = [np.array([pos[u] for u in graph.neighbors(v)], dtype=np.int64) for v in verts]
    active = [i for i in range(n) if len(nbr_idx[i]) > 0]
    edges = [(pos[u], pos[v]) for u, v in graph.edges]

    d = max(initial_tokens.values()) + 1
    lut_u = np.empty((d, d), dtype=np.int64)
    lut_v = np.empty((d, d), dtype=np.int64)
    for i in range(d):
        for j in range(d):
            lut_u[i, j], lut_v[i, j] = _exchange_pair(exchange, i, j)

    rng = np.random.default_rng(seed)
    toks = np.tile(np.array([initial_tokens[v] for v in verts], dtype=np.int64), (samples, 1))
    choice = np.full((samples, n), -1, dtype=np.int64)
    for _ in range(rounds):
        for i in active:
            nb = nbr_idx[i]
            choice[:, i] = nb[rng.integers(0, len(nb), size=samples)]
        for iu, iv in edges:
            mask = (choice[:, iu] == iv) & (choice[:, iv] == iu)
            if not mask.any():
                continue
            tu, tv = toks[mask, iu], toks[mask, iv]
            toks[mask, iu] = lut_u[tu, tv]
            toks[mask, iv] = lut_v[tu, tv]

    out = {}
    for v in verts:
        counts = np.bincount(toks[:, pos[v]], minlength=d)
        out[v] = Distribution(
            {(t,): counts[t] / samples for t in range(d) if counts[t] > 0}
        )
    return out


def classical_diffuse(
    graph: OrientedGraph,
    initial_tokens: Mapping[str, int],
    rounds: int,
    exchange=SWAP_PAIRS,
    *,
    exact: bool = True,
    seed=None,
    samples: int = 100_000,
) -> dict[str, Distribution]:
    """Per-vertex token distributions of the classical diffusion process.

    Exact mode enumerates (rational arithmetic internally); sampling mode
    runs `samples` seeded Monte Carlo trajectories.
    """
    if exact:
        fracs = classical_marginals_exact(graph, initial_tokens, rounds, exchange)
        return {
            v: Distribution({(t,): float(p) for t, p in dist.items() if p > 0})
            for v, dist in fracs.items()
        }
    if samples < 1:
        raise ValueError("samples must be >= 1")
    return _sampled_marginals(graph, initial_tokens, rounds, exchange, seed, samples)


def edge_selection_probability(graph: OrientedGraph, u: str, v: str) -> Fraction:
    """P(edge is mutually selected) = 1 / (deg(u) * deg(v))."""
    if not graph.has_edge(u, v):
        raise UnknownVertexError(f"({u!r}, {v!r}) is not an edge")
    return Fraction(1, graph.degree(u) * graph.degree(v))


def solve_fixed_point(delta: int) -> float:
    """Unique root of p = (1 - p)^(2*delta) in [0, 1], by bisection.

    f(p) = p - (1-p)^(2*delta) is strictly increasing with f(0) = -1 and
    f(1) = 1; the returned root has residual below 1e-12.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    if delta == 0:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mid - (1.0 - mid) ** (2 * delta) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def check_probability_bound(graph: OrientedGraph) -> dict:
    """Evaluate, per edge, whether the realized selection probability stays
    below the product of the complements of all adjacent-edge probabilities,
    and verify the conditional-probability table (independence for disjoint
    edge pairs, zero for adjacent pairs) against full enumeration.
    """
    edges_report = []
    all_ok = True
    for u, v in graph.edges:
        lhs = edge_selection_probability(graph, u, v)
        rhs = Fraction(1)
        for t in graph.neighbors(u):
            if t != v:
                rhs *= 1 - edge_selection_probability(graph, t, u)
        for w in graph.neighbors(v):
            if w != u:
                rhs *= 1 - edge_selection_probability(graph, v, w)
        ok = lhs <= rhs
        all_ok = all_ok and ok
        edges_report.append(
            {"edge": (u, v), "selection": lhs, "bound": rhs, "satisfied": ok}
        )

    independence_failures = []
    pairs_checked = 0
    if _profile_count(graph) <= EXACT_PROFILE_CAP:
        mdist = matching_distribution(graph)

        def joint(e1, e2) -> Fraction:
            return sum(
                (w for m, w in mdist.items() if e1 in m and e2 in m),
                Fraction(0),
            )

        for e1, e2 in itertools.combinations(graph.edges, 2):
            pairs_checked += 1
            both = joint(e1, e2)
            adjacent = bool(set(e1) & set(e2))
            if adjacent:
                expected = Fraction(0)
            else:
                expected = edge_selection_probability(graph, *e1) * edge_selection_probability(
                    graph, *e2
                )
            if both != expected:
                independence_failures.append(
                    {"edges": (e1, e2), "joint": both, "expected": expected}
                )

    return {
        "edges": edges_report,
        "all_satisfied": all_ok,
        "independence_pairs": pairs_checked,
        "independence_ok": not independence_failures,
        "independence_failures": independence_failures,
    }
