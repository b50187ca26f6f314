"""The diffusion round: coin preparation, flag consolidation, controlled
token exchange, and multi-round iteration.

One round on graph G works on a register layout of one token qudit per
vertex and two flag qubits per (vertex, neighbor) pair:

1. prepare_coins     - every vertex's slot-1 flag block goes into a uniform
                       weight-1 superposition over its neighbors (one flag
                       raised), with slot-2 an identical copy, so measuring
                       either slot yields the vertex's chosen neighbor.
2. consolidate_flags - slot-1 flags are swapped across each edge; after
                       this, (v,u,1) holds u's choice of v and (v,u,2)
                       holds v's choice of u, so the pair reads (1,1)
                       exactly on mutual selection.
3. exchange_step     - for each oriented edge, the exchange rule acts on
                       the two endpoint qudits controlled on both flags
                       being 1. Mutually selected edges never share a
                       vertex, so these controlled operations commute.
4. finish_round      - Measured mode: all flags are measured, the outcome
                       is decoded into a matching, and the flags are reset
                       to |0> (a basis relabeling, valid post-measurement).
                       Coherent mode: flags are left untouched and a fresh
                       block of |0> flags is appended for the next round.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .graph import OrientedGraph
from .oracle import Matching, is_matching
from .registers import (
    EngineError,
    RegisterLabel,
    SparseState,
    Distribution,
    flag_block,
    flag_register,
    graph_register_space,
    vertex_register,
)

__all__ = [
    "ProtocolError",
    "InvariantViolation",
    "ExchangeRule",
    "RoundMode",
    "DiffusionRun",
    "build_w_unitary",
    "prepare_coins",
    "consolidate_flags",
    "exchange_step",
    "finish_round",
    "run_diffusion",
    "run_rounds",
    "measured_statistics",
    "vertex_marginals",
    "selection_probabilities",
    "joint_selection_probability",
    "verify_matching_invariant",
    "verify_token_conservation",
    "directed_exchange_matrix",
]


class ProtocolError(RuntimeError):
    """Diffusion pipeline misuse (wrong phase, dirty flags, round cap)."""


class InvariantViolation(Exception):
    """A runtime invariant of the protocol failed on the actual state."""


_SWAP_QUBITS = np.array(
    [
        [1, 0, 0, 0],
        [0, 0, 1, 0],
        [0, 1, 0, 0],
        [0, 0, 0, 1],
    ],
    dtype=complex,
)

# Two-qutrit rule that swaps |0> with anything but never swaps |1> with |2>;
# rows and columns are ordered 00,01,02,10,11,12,20,21,22.
_DIRECTED_QUTRIT = np.array(
    [
        [1, 0, 0, 0, 0, 0, 0, 0, 0],
        [0, 0, 0, 1, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, 1, 0, 0],
        [0, 1, 0, 0, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 1, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 1, 0, 0, 0],
        [0, 0, 1, 0, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, 0, 1, 0],
        [0, 0, 0, 0, 0, 0, 0, 0, 1],
    ],
    dtype=complex,
)


@dataclass(frozen=True, eq=False)
class ExchangeRule:
    """Two-qudit unitary applied across a selected edge.

    Asymmetric rules act with (tail, head) operand order of the oriented
    edge; the matrix is indexed row-major, first operand most significant.
    """

    token_dim: int
    matrix: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d2 = self.token_dim * self.token_dim
        if m.shape != (d2, d2):
            raise EngineError(
                f"exchange matrix must be {d2}x{d2} for token dimension {self.token_dim}"
            )
        defect = np.abs(m.conj().T @ m - np.eye(d2)).max()
        if defect > 1e-9:
            raise EngineError(f"exchange matrix is not unitary (max defect {defect:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def full_swap(cls, token_dim: int) -> "ExchangeRule":
        d = token_dim
        m = np.zeros((d * d, d * d), dtype=complex)
        for i in range(d):
            for j in range(d):
                m[j * d + i, i * d + j] = 1.0
        return cls(token_dim=d, matrix=m, name="FullSwap")

    @classmethod
    def directed_qutrit(cls) -> "ExchangeRule":
        return cls(token_dim=3, matrix=_DIRECTED_QUTRIT.copy(), name="DirectedQutrit")

    @classmethod
    def from_matrix(cls, matrix, name: str = "custom") -> "ExchangeRule":
        m = np.asarray(matrix, dtype=complex)
        d = math.isqrt(m.shape[0]) if m.ndim == 2 else 0
        if m.ndim != 2 or d * d != m.shape[0]:
            raise EngineError("exchange matrix must be square with a perfect-square size")
        return cls(token_dim=d, matrix=m, name=name)

    def pair_map(self) -> dict[tuple[int, int], tuple[int, int]] | None:
        """The rule as a basis-pair permutation, or None if it has genuine
        superposition structure (then no classical shadow exists)."""
        d = self.token_dim
        out: dict[tuple[int, int], tuple[int, int]] = {}
        for col in range(d * d):
            column = self.matrix[:, col]
            nz = np.flatnonzero(np.abs(column) > 1e-12)
            if len(nz) != 1 or abs(column[nz[0]] - 1.0) > 1e-12:
                return None
            row = int(nz[0])
            out[(col // d, col % d)] = (row // d, row % d)
        return out

    def fixes_pair(self, i: int, j: int) -> bool:
        col = i * self.token_dim + j
        column = self.matrix[:, col]
        return abs(column[col] - 1.0) <= 1e-12 and (
            np.abs(column).sum() - np.abs(column[col]) <= 1e-12
        )


def directed_exchange_matrix() -> ExchangeRule:
    """The two-qutrit rule of the directed-diffusion example (a permutation:
    |0> swaps with anything, |1> and |2> never swap with each other)."""
    return ExchangeRule.directed_qutrit()


class RoundMode(enum.Enum):
    MEASURED = "Measured"
    COHERENT = "Coherent"


@lru_cache(maxsize=None)
def build_w_unitary(deg: int) -> np.ndarray:
    """Unitary on 2*deg qubits sending |0...0> to the Bell-paired W state

        (1/sqrt(deg)) sum_j |e_j>|e_j>

    where e_j is the weight-1 string with the 1 in position j, the first
    deg qubits are the slot-1 flags and the last deg the slot-2 copies.
    The remaining columns come from Gram-Schmidt over the standard basis
    vectors in index order, exploiting that only the deg support
    coordinates of the target column interact.
    """
    if deg < 1:
        raise ProtocolError(f"no W state of size {deg}")
    dim = 1 << (2 * deg)
    support = sorted((1 << (deg - 1 - j)) * ((1 << deg) + 1) for j in range(deg))
    amp = 1.0 / math.sqrt(deg)

    # Gram-Schmidt restricted to the deg-dimensional support subspace.
    small: list[np.ndarray] = [np.full(deg, amp)]
    accepted: list[np.ndarray] = []
    for m in range(deg):
        v = np.zeros(deg)
        v[m] = 1.0
        for q in small:
            v = v - q * np.dot(q, v)
        nv = np.linalg.norm(v)
        if nv > 1e-9:
            v /= nv
            small.append(v)
            accepted.append(v)

    u = np.zeros((dim, dim), dtype=complex)
    u[support, 0] = amp
    support_set = set(support)
    col = 1
    small_pos = 0
    for i in range(dim):
        if col == dim:
            break
        if i in support_set:
            if small_pos < len(accepted):
                u[support, col] = accepted[small_pos]
                small_pos += 1
                col += 1
            # else: this standard vector is dependent on the earlier columns
        else:
            u[i, col] = 1.0
            col += 1
    u.setflags(write=False)
    return u


@dataclass
class DiffusionRun:
    """State of one diffusion execution: the graph, the evolving quantum
    state, the round counter, and the log of sampled matchings (Measured
    mode). Confined to a single logical thread; independent runs share
    nothing mutable.
    """

    graph: OrientedGraph
    rule: ExchangeRule
    mode: RoundMode
    seed: object
    state: SparseState
    rng: np.random.Generator
    round_index: int = 0
    coherent_cap: int = 3
    matching_log: list[Matching] = field(default_factory=list)
    phase: str = "ready"

    @classmethod
    def start(
        cls,
        graph: OrientedGraph,
        initial_tokens: Mapping[str, int],
        mode: RoundMode,
        rule: ExchangeRule,
        seed,
        coherent_cap: int = 3,
    ) -> "DiffusionRun":
        missing = [v for v in graph.vertices if v not in initial_tokens]
        if missing:
            raise ProtocolError(f"initial tokens missing for vertices {missing}")
        for v, t in initial_tokens.items():
            if not 0 <= t < rule.token_dim:
                raise ProtocolError(
                    f"token {t} at vertex {v!r} out of range for token dimension {rule.token_dim}"
                )
        space = graph_register_space(graph, rule.token_dim)
        values: dict[RegisterLabel, int] = {}
        for lab in space.labels:
            values[lab] = initial_tokens[lab.vertex] if lab.is_vertex else 0
        state = SparseState.from_basis(space, values)
        rng = np.random.default_rng(seed)
        return cls(graph=graph, rule=rule, mode=mode, seed=seed, state=state, rng=rng)

    @property
    def flag_round(self) -> int:
        """Round index of the flag block the current round operates on
        (always 0 in Measured mode, where flags are reset and reused)."""
        return self.round_index if self.mode is RoundMode.COHERENT else 0

    def _require_phase(self, expected: str, op: str):
        if self.phase != expected:
            raise ProtocolError(f"{op} called in phase {self.phase!r} (expected {expected!r})")


def _round_flags(graph: OrientedGraph, round_index: int) -> list[RegisterLabel]:
    return [lab for lab, _ in flag_block(graph, round_index)]


def _apply_coins(state: SparseState, graph: OrientedGraph, round_index: int) -> SparseState:
    flags = _round_flags(graph, round_index)
    pos = state.space.positions(flags)
    for key in state.amplitudes:
        dirty = [str(flags[i]) for i, p in enumerate(pos) if key[p] != 0]
        if dirty:
            raise ProtocolError(f"flag registers not in |0>: {dirty[:4]}")
    for v in graph.vertices:
        nbrs = graph.neighbors(v)
        if not nbrs:
            continue  # isolated vertex: no coin, token is inert
        targets = [flag_register(v, u, 1, round_index) for u in nbrs] + [
            flag_register(v, u, 2, round_index) for u in nbrs
        ]
        state = state.apply(targets, build_w_unitary(len(nbrs)))
    return state


def _apply_consolidation(state: SparseState, graph: OrientedGraph, round_index: int) -> SparseState:
    for v, u in graph.edges:
        state = state.apply(
            [flag_register(v, u, 1, round_index), flag_register(u, v, 1, round_index)],
            _SWAP_QUBITS,
        )
    return state


def _apply_exchange(
    state: SparseState, graph: OrientedGraph, rule: ExchangeRule, round_index: int
) -> SparseState:
    for v, u in graph.edges:
        state = state.apply_controlled(
            [
                (flag_register(v, u, 1, round_index), 1),
                (flag_register(v, u, 2, round_index), 1),
            ],
            [vertex_register(v), vertex_register(u)],
            rule.matrix,
        )
    return state


def prepare_coins(run: DiffusionRun) -> DiffusionRun:
    """Put every vertex's flag block into the Bell-paired W state (vertices
    in lexicographic order; the supports are disjoint, so order is moot)."""
    run._require_phase("ready", "prepare_coins")
    if run.mode is RoundMode.COHERENT and run.round_index >= run.coherent_cap:
        raise ProtocolError(
            f"coherent round cap exceeded ({run.round_index} rounds done, cap {run.coherent_cap})"
        )
    run.state = _apply_coins(run.state, run.graph, run.flag_round)
    run.phase = "prepared"
    return run


def consolidate_flags(run: DiffusionRun) -> DiffusionRun:
    """Swap slot-1 flags across every oriented edge, so each endpoint's flag
    pair reads (other side's choice, own choice)."""
    run._require_phase("prepared", "consolidate_flags")
    run.state = _apply_consolidation(run.state, run.graph, run.flag_round)
    run.phase = "consolidated"
    return run


def exchange_step(run: DiffusionRun) -> DiffusionRun:
    """Apply the exchange rule across each oriented edge, doubly controlled
    on its consolidated flag pair."""
    run._require_phase("consolidated", "exchange_step")
    run.state = _apply_exchange(run.state, run.graph, run.rule, run.flag_round)
    run.phase = "exchanged"
    return run


def _decode_matching(
    graph: OrientedGraph, flags: Sequence[RegisterLabel], outcome: tuple[int, ...]
) -> Matching:
    values = dict(zip(flags, outcome))
    selected = set()
    for v, u in graph.edges:
        if (
            values[flag_register(v, u, 1, flags[0].round_index)] == 1
            and values[flag_register(v, u, 2, flags[0].round_index)] == 1
        ):
            selected.add((v, u))
    return frozenset(selected)


def finish_round(run: DiffusionRun) -> DiffusionRun:
    """Close the round. Measured mode: measure all flags, log the decoded
    matching, reset flags to |0>. Coherent mode: append a fresh flag block
    for the next round, leaving this round's flags entangled."""
    run._require_phase("exchanged", "finish_round")
    if run.mode is RoundMode.MEASURED:
        flags = _round_flags(run.graph, 0)
        outcome, collapsed = run.state.measure(flags, run.rng)
        matching = _decode_matching(run.graph, flags, outcome)
        if not is_matching(matching):
            raise InvariantViolation(f"measured edge set {sorted(matching)} is not a matching")
        run.matching_log.append(matching)
        run.state = collapsed.reset_registers(flags)
    else:
        if run.round_index + 1 > run.coherent_cap:
            raise ProtocolError("coherent round cap exceeded")
        run.state = run.state.append_zero_registers(
            flag_block(run.graph, run.round_index + 1)
        )
    run.round_index += 1
    run.phase = "ready"
    return run


def vertex_marginals(state: SparseState, graph: OrientedGraph) -> dict[str, Distribution]:
    return {v: state.marginal([vertex_register(v)]) for v in graph.vertices}


def selection_probabilities(
    state: SparseState, graph: OrientedGraph, round_index: int = 0
) -> dict[tuple[str, str], float]:
    """P(flag pair = (1,1)) for every oriented edge of the given state;
    meaningful after consolidate_flags, where it equals the edge's mutual
    selection probability 1/(deg u * deg v)."""
    out = {}
    for v, u in graph.edges:
        dist = state.marginal(
            [flag_register(v, u, 1, round_index), flag_register(v, u, 2, round_index)]
        )
        out[(v, u)] = dist.prob((1, 1))
    return out


def joint_selection_probability(
    state: SparseState,
    e1: tuple[str, str],
    e2: tuple[str, str],
    round_index: int = 0,
) -> float:
    """P(both edges' consolidated flag pairs read (1,1))."""
    labels = [
        flag_register(e1[0], e1[1], 1, round_index),
        flag_register(e1[0], e1[1], 2, round_index),
        flag_register(e2[0], e2[1], 1, round_index),
        flag_register(e2[0], e2[1], 2, round_index),
    ]
    return state.marginal(labels).prob((1, 1, 1, 1))


def verify_matching_invariant(
    state: SparseState, graph: OrientedGraph, round_index: int = 0
) -> None:
    """Check, on every stored basis term, that the edges whose consolidated
    flag pair reads (1,1) are pairwise non-adjacent. Raises on violation."""
    pairs = [
        (
            e,
            state.space.position(flag_register(e[0], e[1], 1, round_index)),
            state.space.position(flag_register(e[0], e[1], 2, round_index)),
        )
        for e in graph.edges
    ]
    for key in state.amplitudes:
        selected = [e for e, p1, p2 in pairs if key[p1] == 1 and key[p2] == 1]
        if not is_matching(selected):
            raise InvariantViolation(
                f"basis term selects adjacent edges {selected}"
            )


def verify_token_conservation(
    state: SparseState, graph: OrientedGraph, initial_tokens: Mapping[str, int]
) -> None:
    """Check every basis term carries exactly the initial token multiset
    (holds for any permutation exchange rule, in particular the full swap)."""
    expected = tuple(sorted(initial_tokens[v] for v in graph.vertices))
    vpos = [state.space.position(vertex_register(v)) for v in graph.vertices]
    for key in state.amplitudes:
        got = tuple(sorted(key[p] for p in vpos))
        if got != expected:
            raise InvariantViolation(
                f"token multiset {got} differs from initial {expected}"
            )


def run_diffusion(
    graph: OrientedGraph,
    initial_tokens: Mapping[str, int],
    rounds: int,
    mode: RoundMode,
    rule: ExchangeRule,
    seed,
    coherent_cap: int = 3,
    check_invariants: bool = True,
) -> DiffusionRun:
    """Execute `rounds` full rounds and return the finished run."""
    if rounds < 0:
        raise ProtocolError("rounds must be >= 0")
    run = DiffusionRun.start(graph, initial_tokens, mode, rule, seed, coherent_cap)
    for _ in range(rounds):
        prepare_coins(run)
        consolidate_flags(run)
        if check_invariants:
            verify_matching_invariant(run.state, run.graph, run.flag_round)
        exchange_step(run)
        finish_round(run)
    return run


def run_rounds(
    graph: OrientedGraph,
    initial_tokens: Mapping[str, int],
    rounds: int,
    mode: RoundMode,
    rule: ExchangeRule,
    seed,
    coherent_cap: int = 3,
) -> tuple[dict[str, Distribution], list[Matching]]:
    """Run the pipeline and return (per-vertex marginals, matching log).

    Measured mode conditions the marginals on the sampled trajectory;
    coherent mode returns the exact marginals of the coherent state.
    """
    run = run_diffusion(graph, initial_tokens, rounds, mode, rule, seed, coherent_cap)
    return vertex_marginals(run.state, run.graph), list(run.matching_log)


def measured_statistics(
    graph: OrientedGraph,
    initial_tokens: Mapping[str, int],
    rounds: int,
    rule: ExchangeRule,
) -> dict[str, Distribution]:
    """Exact per-vertex statistics of the Measured-mode process, obtained by
    enumerating every flag-measurement outcome of every round (instead of
    sampling one trajectory) and averaging with Born weights.
    """
    start = DiffusionRun.start(graph, initial_tokens, RoundMode.MEASURED, rule, seed=0)
    flags = _round_flags(graph, 0)

    def fingerprint(st: SparseState):
        return tuple(
            (k, round(a.real, 10), round(a.imag, 10))
            for k, a in sorted(st.amplitudes.items())
        )

    branches: dict[tuple, tuple[float, SparseState]] = {
        fingerprint(start.state): (1.0, start.state)
    }
    for _ in range(rounds):
        nxt: dict[tuple, tuple[float, SparseState]] = {}
        for weight, st in branches.values():
            st = _apply_coins(st, graph, 0)
            st = _apply_consolidation(st, graph, 0)
            st = _apply_exchange(st, graph, rule, 0)
            for _outcome, p, collapsed in st.measurement_branches(flags):
                nst = collapsed.reset_registers(flags)
                key = fingerprint(nst)
                if key in nxt:
                    nxt[key] = (nxt[key][0] + weight * p, nxt[key][1])
                else:
                    nxt[key] = (weight * p, nst)
        branches = nxt

    acc: dict[str, dict[tuple[int, ...], float]] = {v: {} for v in graph.vertices}
    for weight, st in branches.values():
        for v, dist in vertex_marginals(st, graph).items():
            for outcome, p in dist.support.items():
                acc[v][outcome] = acc[v].get(outcome, 0.0) + weight * p
    return {v: Distribution(support) for v, support in acc.items()}
