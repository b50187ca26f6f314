"""Sparse state-vector engine over a heterogeneous labeled register set.

Registers are either vertex qudits (one per graph vertex, shared dimension)
or flag qubits (two per ordered (vertex, neighbor) pair). A state is a map
from full basis assignments to complex amplitudes; only nonzero amplitudes
are stored, which keeps diffusion states at support <= prod_v deg(v) while
the full Hilbert space is exponentially larger.

Basis assignments are tuples of ints aligned with the space's canonical
register order (vertex registers first, lexicographic; then flag registers
by (round, vertex, neighbor, slot)), so equal states have equal dicts and
iteration order is reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .graph import OrientedGraph

__all__ = [
    "EngineError",
    "RegisterLabel",
    "vertex_register",
    "flag_register",
    "RegisterSpace",
    "graph_register_space",
    "Distribution",
    "SparseState",
]

PRUNE_THRESHOLD = 1e-12
NORM_TOLERANCE = 1e-9
UNITARY_TOLERANCE = 1e-9
DENSITY_MATRIX_CAP = 64


class EngineError(ValueError):
    """Engine contract violation: bad labels, dimensions, or state."""


@dataclass(frozen=True)
class RegisterLabel:
    """Label of a single register.

    A vertex qudit has `neighbor is None`; a flag qubit carries the owning
    vertex, the neighbor it refers to, the slot (1 or 2), and the round it
    belongs to (0 unless coherent multi-round evolution appended fresh flag
    registers).
    """

    vertex: str
    neighbor: str | None = None
    slot: int | None = None
    round_index: int = 0

    @property
    def is_vertex(self) -> bool:
        return self.neighbor is None

    @property
    def is_flag(self) -> bool:
        return self.neighbor is not None

    def sort_key(self) -> tuple:
        """Canonical total order: vertex registers first (lexicographic), then
        flag registers by (round, vertex, neighbor, slot)."""
        if self.is_vertex:
            return (0, self.vertex, "", "", 0)
        return (1, self.round_index, self.vertex, self.neighbor, self.slot)

    def __str__(self) -> str:
        if self.is_vertex:
            return self.vertex
        base = f"{self.vertex},{self.neighbor},{self.slot}"
        return base if self.round_index == 0 else f"{base}@{self.round_index}"


def _label_sort_key(label: RegisterLabel) -> tuple:
    return label.sort_key()


def vertex_register(vertex: str) -> RegisterLabel:
    return RegisterLabel(vertex=vertex)


def flag_register(vertex: str, neighbor: str, slot: int, round_index: int = 0) -> RegisterLabel:
    if slot not in (1, 2):
        raise EngineError(f"flag slot must be 1 or 2, got {slot}")
    return RegisterLabel(vertex=vertex, neighbor=neighbor, slot=slot, round_index=round_index)


class RegisterSpace:
    """Ordered collection of labeled registers with fixed dimensions."""

    __slots__ = ("labels", "dims", "_index")

    def __init__(self, registers: Iterable[tuple[RegisterLabel, int]]):
        regs = sorted(registers, key=lambda r: _label_sort_key(r[0]))
        labels = tuple(lab for lab, _ in regs)
        dims = tuple(int(d) for _, d in regs)
        if len(set(labels)) != len(labels):
            raise EngineError("duplicate register labels")
        if any(d < 1 for d in dims):
            raise EngineError("register dimensions must be >= 1")
        self.labels = labels
        self.dims = dims
        self._index = {lab: i for i, lab in enumerate(labels)}

    def __len__(self) -> int:
        return len(self.labels)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, RegisterSpace)
            and self.labels == other.labels
            and self.dims == other.dims
        )

    def __hash__(self) -> int:
        return hash((self.labels, self.dims))

    def position(self, label: RegisterLabel) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise EngineError(f"unknown register {label}") from None

    def positions(self, labels: Sequence[RegisterLabel]) -> tuple[int, ...]:
        pos = tuple(self.position(lab) for lab in labels)
        if len(set(pos)) != len(pos):
            raise EngineError("register labels must be distinct")
        return pos

    def dim(self, label: RegisterLabel) -> int:
        return self.dims[self.position(label)]

    @property
    def total_dimension(self) -> int:
        return math.prod(self.dims)

    def assignment(self, values: Mapping[RegisterLabel, int]) -> tuple[int, ...]:
        """Full basis assignment from a label -> index map (total and in range)."""
        if set(values) != set(self.labels):
            missing = set(self.labels) - set(values)
            extra = set(values) - set(self.labels)
            parts = []
            if missing:
                parts.append(f"missing registers {sorted(str(m) for m in missing)}")
            if extra:
                parts.append(f"unknown registers {sorted(str(e) for e in extra)}")
            raise EngineError("; ".join(parts))
        key = []
        for lab, d in zip(self.labels, self.dims):
            v = values[lab]
            if not 0 <= v < d:
                raise EngineError(f"basis index {v} out of range for {lab} (dim {d})")
            key.append(v)
        return tuple(key)

    def appended(self, registers: Iterable[tuple[RegisterLabel, int]]) -> "RegisterSpace":
        """New space with extra registers; they must sort after every existing one."""
        extra = list(registers)
        new = RegisterSpace(list(zip(self.labels, self.dims)) + extra)
        if new.labels[: len(self.labels)] != self.labels:
            raise EngineError("appended registers must sort after the existing ones")
        return new


def graph_register_space(graph: OrientedGraph, token_dim: int, round_index: int = 0) -> RegisterSpace:
    """Register space for a graph: one token qudit per vertex plus the
    2*deg(v) flag qubits of every vertex (4|E| flags in total)."""
    if token_dim < 1:
        raise EngineError(f"token dimension must be >= 1, got {token_dim}")
    regs: list[tuple[RegisterLabel, int]] = [(vertex_register(v), token_dim) for v in graph.vertices]
    regs.extend(flag_block(graph, round_index))
    return RegisterSpace(regs)


def flag_block(graph: OrientedGraph, round_index: int) -> list[tuple[RegisterLabel, int]]:
    """The 4|E| flag registers of one round, each of dimension 2."""
    return [
        (flag_register(v, u, slot, round_index), 2)
        for v in graph.vertices
        for u in graph.neighbors(v)
        for slot in (1, 2)
    ]


@dataclass(frozen=True)
class Distribution:
    """Probabilities over joint basis values of some register subset.

    Only outcomes with nonzero probability are stored; `prob` returns 0.0
    for anything else.
    """

    support: Mapping[tuple[int, ...], float]

    def __post_init__(self):
        total = 0.0
        for outcome, p in self.support.items():
            if p < -1e-12:
                raise EngineError(f"negative probability {p} for outcome {outcome}")
            total += p
        if abs(total - 1.0) > NORM_TOLERANCE:
            raise EngineError(f"probabilities sum to {total}, expected 1")

    def prob(self, outcome: tuple[int, ...]) -> float:
        return self.support.get(tuple(outcome), 0.0)

    def items_sorted(self) -> list[tuple[tuple[int, ...], float]]:
        return sorted(self.support.items())


def _require_unitary(matrix: np.ndarray, dim: int) -> np.ndarray:
    m = np.asarray(matrix, dtype=complex)
    if m.shape != (dim, dim):
        raise EngineError(f"matrix shape {m.shape} does not match target dimension {dim}")
    defect = np.abs(m.conj().T @ m - np.eye(dim)).max()
    if defect > UNITARY_TOLERANCE:
        raise EngineError(f"matrix is not unitary (max defect {defect:.3e})")
    return m


def _flatten(values: Sequence[int], dims: Sequence[int]) -> int:
    idx = 0
    for v, d in zip(values, dims):
        idx = idx * d + v
    return idx


def _unflatten(index: int, dims: Sequence[int]) -> tuple[int, ...]:
    out = []
    for d in reversed(dims):
        out.append(index % d)
        index //= d
    return tuple(reversed(out))


class SparseState:
    """Normalized sparse amplitude map over a register space.

    Every public operation returns a fresh state; instances are never
    mutated after construction, so distinct states can be processed by
    concurrent workers without sharing anything mutable.
    """

    __slots__ = ("space", "amplitudes")

    def __init__(self, space: RegisterSpace, amplitudes: Mapping[tuple[int, ...], complex]):
        amps = {
            key: complex(a)
            for key, a in amplitudes.items()
            if abs(a) >= PRUNE_THRESHOLD
        }
        norm_sq = sum(abs(a) ** 2 for a in amps.values())
        if abs(norm_sq - 1.0) > NORM_TOLERANCE:
            raise EngineError(f"state norm^2 is {norm_sq}, expected 1 (corrupt state)")
        self.space = space
        self.amplitudes = amps

    @classmethod
    def from_basis(cls, space: RegisterSpace, values: Mapping[RegisterLabel, int]) -> "SparseState":
        """Single-term basis state (amplitude 1) from a total assignment."""
        return cls(space, {space.assignment(values): 1.0 + 0.0j})

    @property
    def support_size(self) -> int:
        return len(self.amplitudes)

    def norm_squared(self) -> float:
        return sum(abs(a) ** 2 for a in self.amplitudes.values())

    def amplitude(self, values: Mapping[RegisterLabel, int]) -> complex:
        return self.amplitudes.get(self.space.assignment(values), 0.0 + 0.0j)

    # ---------------------------------------------------------------- unitaries

    def apply(self, targets: Sequence[RegisterLabel], matrix: np.ndarray) -> "SparseState":
        """Apply a unitary on the listed target registers (row-major ordering:
        the first target is the most significant index of the matrix)."""
        pos = self.space.positions(targets)
        dims = [self.space.dims[p] for p in pos]
        block = math.prod(dims)
        m = _require_unitary(matrix, block)

        columns: dict[int, list[tuple[int, complex]]] = {}
        rows, cols = np.nonzero(m)
        for r, c in zip(rows.tolist(), cols.tolist()):
            columns.setdefault(c, []).append((r, complex(m[r, c])))
        row_values: dict[int, tuple[int, ...]] = {}

        new_amps: dict[tuple[int, ...], complex] = {}
        for key, amp in self.amplitudes.items():
            col = _flatten([key[p] for p in pos], dims)
            for r, entry in columns.get(col, ()):
                vals = row_values.get(r)
                if vals is None:
                    vals = row_values[r] = _unflatten(r, dims)
                nk = list(key)
                for p, v in zip(pos, vals):
                    nk[p] = v
                nk = tuple(nk)
                new_amps[nk] = new_amps.get(nk, 0.0) + entry * amp
        return SparseState(self.space, new_amps)

    def apply_controlled(
        self,
        controls: Sequence[tuple[RegisterLabel, int]],
        targets: Sequence[RegisterLabel],
        matrix: np.ndarray,
    ) -> "SparseState":
        """Apply the unitary on targets only where every control register holds
        its required basis value; identity elsewhere (the semaphore pattern
        I + |c><c| (U - I))."""
        ctrl_labels = [lab for lab, _ in controls]
        all_pos = self.space.positions(list(ctrl_labels) + list(targets))
        ctrl_pos = all_pos[: len(ctrl_labels)]
        ctrl_vals = []
        for (lab, v), p in zip(controls, ctrl_pos):
            d = self.space.dims[p]
            if not 0 <= v < d:
                raise EngineError(f"control value {v} out of range for {lab} (dim {d})")
            ctrl_vals.append(v)

        tgt_pos = all_pos[len(ctrl_labels):]
        dims = [self.space.dims[p] for p in tgt_pos]
        block = math.prod(dims)
        m = _require_unitary(matrix, block)

        columns: dict[int, list[tuple[int, complex]]] = {}
        rows, cols = np.nonzero(m)
        for r, c in zip(rows.tolist(), cols.tolist()):
            columns.setdefault(c, []).append((r, complex(m[r, c])))
        row_values: dict[int, tuple[int, ...]] = {}

        new_amps: dict[tuple[int, ...], complex] = {}
        for key, amp in self.amplitudes.items():
            if any(key[p] != v for p, v in zip(ctrl_pos, ctrl_vals)):
                new_amps[key] = new_amps.get(key, 0.0) + amp
                continue
            col = _flatten([key[p] for p in tgt_pos], dims)
            for r, entry in columns.get(col, ()):
                vals = row_values.get(r)
                if vals is None:
                    vals = row_values[r] = _unflatten(r, dims)
                nk = list(key)
                for p, v in zip(tgt_pos, vals):
                    nk[p] = v
                nk = tuple(nk)
                new_amps[nk] = new_amps.get(nk, 0.0) + entry * amp
        return SparseState(self.space, new_amps)

    # --------------------------------------------------------------- measurement

    def _grouped(self, labels: Sequence[RegisterLabel]):
        pos = self.space.positions(labels)
        groups: dict[tuple[int, ...], dict[tuple[int, ...], complex]] = {}
        for key, amp in self.amplitudes.items():
            outcome = tuple(key[p] for p in pos)
            groups.setdefault(outcome, {})[key] = amp
        return groups

    def marginal(self, labels: Sequence[RegisterLabel]) -> Distribution:
        """Joint probability of the listed registers' basis values; equals the
        diagonal of the reduced density matrix."""
        support = {
            outcome: sum(abs(a) ** 2 for a in terms.values())
            for outcome, terms in self._grouped(labels).items()
        }
        return Distribution(support)

    def measurement_branches(
        self, labels: Sequence[RegisterLabel]
    ) -> list[tuple[tuple[int, ...], float, "SparseState"]]:
        """All possible outcomes of a standard-basis measurement with their Born
        probabilities and collapsed (renormalized) states, sorted by outcome."""
        branches = []
        for outcome, terms in sorted(self._grouped(labels).items()):
            p = sum(abs(a) ** 2 for a in terms.values())
            scale = 1.0 / math.sqrt(p)
            collapsed = SparseState(self.space, {k: a * scale for k, a in terms.items()})
            branches.append((outcome, p, collapsed))
        return branches

    def measure(
        self, labels: Sequence[RegisterLabel], rng: np.random.Generator
    ) -> tuple[tuple[int, ...], "SparseState"]:
        """Projective measurement: sample one outcome, collapse, renormalize."""
        branches = self.measurement_branches(labels)
        u = rng.random()
        acc = 0.0
        for outcome, p, collapsed in branches:
            acc += p
            if u < acc:
                return outcome, collapsed
        outcome, _, collapsed = branches[-1]
        return outcome, collapsed

    # ------------------------------------------------------------ density matrix

    def reduced_density_matrix(self, labels: Sequence[RegisterLabel]) -> np.ndarray:
        """Reduced density matrix of a small subsystem (total dim <= 64); the
        diffusion pipeline itself needs only the diagonal (see marginal)."""
        pos = self.space.positions(labels)
        dims = [self.space.dims[p] for p in pos]
        sub_dim = math.prod(dims)
        if sub_dim > DENSITY_MATRIX_CAP:
            raise EngineError(
                f"subsystem dimension {sub_dim} exceeds density-matrix cap {DENSITY_MATRIX_CAP}"
            )
        rest_groups: dict[tuple[int, ...], list[tuple[int, complex]]] = {}
        pos_set = set(pos)
        for key, amp in self.amplitudes.items():
            rest = tuple(v for i, v in enumerate(key) if i not in pos_set)
            sub = _flatten([key[p] for p in pos], dims)
            rest_groups.setdefault(rest, []).append((sub, amp))
        rho = np.zeros((sub_dim, sub_dim), dtype=complex)
        for entries in rest_groups.values():
            for i, a in entries:
                for j, b in entries:
                    rho[i, j] += a * np.conj(b)
        return rho

    # ------------------------------------------------------------- restructuring

    def reset_registers(self, labels: Sequence[RegisterLabel]) -> "SparseState":
        """Relabel registers that hold one definite basis value back to |0>.

        Valid only after those registers were measured (every stored term must
        agree on their values); this is a basis relabeling, not a projection.
        """
        pos = self.space.positions(labels)
        seen = {tuple(key[p] for p in pos) for key in self.amplitudes}
        if len(seen) > 1:
            raise EngineError("registers are not in a definite product basis state")
        new_amps = {}
        for key, amp in self.amplitudes.items():
            nk = list(key)
            for p in pos:
                nk[p] = 0
            new_amps[tuple(nk)] = amp
        return SparseState(self.space, new_amps)

    def append_zero_registers(
        self, registers: Iterable[tuple[RegisterLabel, int]]
    ) -> "SparseState":
        """Extend the space with fresh registers initialized to |0>."""
        regs = list(registers)
        new_space = self.space.appended(regs)
        pad = (0,) * len(regs)
        return SparseState(new_space, {key + pad: a for key, a in self.amplitudes.items()})

    def permute_contents(self, moves: Mapping[RegisterLabel, RegisterLabel]) -> "SparseState":
        """Move register contents along a bijection of equal-dimension labels
        (e.g. a fixed shift permutation of vertex registers)."""
        if set(moves.values()) != set(moves.keys()):
            raise EngineError("content moves must form a permutation")
        src_pos = {lab: self.space.position(lab) for lab in moves}
        for src, dst in moves.items():
            if self.space.dim(src) != self.space.dim(dst):
                raise EngineError(f"cannot move contents of {src} into {dst}: dimensions differ")
        new_amps = {}
        for key, amp in self.amplitudes.items():
            nk = list(key)
            for src, dst in moves.items():
                nk[src_pos[dst]] = key[src_pos[src]]
            new_amps[tuple(nk)] = amp
        return SparseState(self.space, new_amps)

    # -------------------------------------------------------------------- output

    def dump(self) -> str:
        """Debug dump: one `<re>,<im>,<label=value;...>` line per basis term,
        sorted by canonical key. Used by golden tests."""
        lines = []
        for key in sorted(self.amplitudes):
            amp = self.amplitudes[key]
            assign = ";".join(
                f"{lab}={v}" for lab, v in zip(self.space.labels, key)
            )
            lines.append(f"{amp.real:.12g},{amp.imag:.12g},{assign}")
        return "\n".join(lines)

    def __repr__(self) -> str:
        return f"<SparseState registers={len(self.space)} support={self.support_size}>"
