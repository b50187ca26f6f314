"""Scenario configs, built-in scenarios, and the report generator.

A scenario fixes a graph, the initial token placement, the number of
rounds, the round mode, the exchange rule, a seed, and which engines to
run. run_scenario produces a JSON-serializable report whose content is a
pure function of (config, seed); the single wall-clock field (timing_ms)
is the only part that varies between identical runs.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping

import numpy as np

from . import oracle
from .graph import OrientedGraph, build_graph, parse_graph
from .oracle import EXACT_PROFILE_CAP, EXACT_ROUNDS_CAP
from .protocol import (
    ExchangeRule,
    RoundMode,
    run_diffusion,
    vertex_marginals,
)
from .registers import Distribution

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "BUILTIN_SCENARIOS",
    "builtin_scenario",
    "builtin_graph",
    "watrous_shift_map",
    "load_config",
    "run_scenario",
    "render_report",
    "report_without_volatile",
]

COHERENT_ROUND_CAP = 3


class ConfigError(ValueError):
    """Invalid scenario configuration; `field` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class ScenarioConfig:
    name: str
    graph: OrientedGraph
    initial_tokens: dict[str, str]
    rounds: int
    mode: RoundMode
    rule_spec: str
    seed: int
    engine: str = "both"
    samples: int = 100_000
    classical_method: str = "auto"
    shift: dict[str, str] | None = None
    skip_quiescent: bool = False
    coherent_cap: int = COHERENT_ROUND_CAP
    rule_matrix: object = None  # parsed matrix when rule_spec is a file

    def validate(self) -> None:
        if self.rounds < 0:
            raise ConfigError("rounds", "must be >= 0")
        if self.mode is RoundMode.COHERENT and self.rounds > self.coherent_cap:
            raise ConfigError(
                "rounds", f"coherent mode supports at most {self.coherent_cap} rounds"
            )
        if self.engine not in ("quantum", "classical", "both"):
            raise ConfigError("engine", f"unknown engine {self.engine!r}")
        if self.samples < 1:
            raise ConfigError("samples", "must be >= 1")
        if self.classical_method not in ("auto", "exact", "sample"):
            raise ConfigError("classical_method", f"unknown method {self.classical_method!r}")
        missing = [v for v in self.graph.vertices if v not in self.initial_tokens]
        if missing:
            raise ConfigError("initial_tokens", f"missing tokens for vertices {missing}")
        extra = [v for v in self.initial_tokens if v not in self.graph.adjacency]
        if extra:
            raise ConfigError("initial_tokens", f"unknown vertices {extra}")
        if self.shift is not None:
            if set(self.shift) != set(self.graph.vertices) or set(
                self.shift.values()
            ) != set(self.graph.vertices):
                raise ConfigError("shift", "must be a permutation of all vertices")


# ----------------------------------------------------------------- built-ins


def _paper_4node() -> OrientedGraph:
    return build_graph(
        ["A", "B", "C", "D"], [("A", "B"), ("A", "C"), ("B", "C"), ("C", "D")]
    )


def _triangle() -> OrientedGraph:
    return build_graph(["0", "1", "2"], [("0", "1"), ("0", "2"), ("1", "2")])


def _single_edge() -> OrientedGraph:
    return build_graph(["A", "B"], [("A", "B")])


def _watrous_blocks(n: int = 15) -> OrientedGraph:
    """n vertices grouped into triangles {3i, 3i+1, 3i+2}; the cycle itself
    only enters through the shift permutation."""
    width = len(str(n - 1))
    names = [str(i).zfill(width) for i in range(n)]
    edges = []
    for i in range(0, n, 3):
        block = names[i : i + 3]
        edges += [(block[0], block[1]), (block[0], block[2]), (block[1], block[2])]
    return build_graph(names, edges)


BUILTIN_GRAPHS = {
    "paper-4node": _paper_4node,
    "triangle": _triangle,
    "single-edge": _single_edge,
    "watrous-c15": _watrous_blocks,
}


def builtin_graph(name: str) -> OrientedGraph:
    try:
        return BUILTIN_GRAPHS[name]()
    except KeyError:
        raise ConfigError("graph", f"unknown builtin graph {name!r}") from None


def watrous_shift_map(n: int = 15) -> dict[str, str]:
    """Shift permutation of the cyclic block automaton: contents of block
    leaders (index 0 mod 3) move back three positions, block tails (2 mod 3)
    move forward three, middles stay."""
    width = len(str(n - 1))
    name = lambda i: str(i % n).zfill(width)
    shift = {}
    for i in range(n):
        if i % 3 == 0:
            shift[name(i)] = name(i - 3)
        elif i % 3 == 2:
            shift[name(i)] = name(i + 3)
        else:
            shift[name(i)] = name(i)
    return shift


def builtin_scenario(name: str) -> ScenarioConfig:
    """The ready-made scenarios, including both worked examples."""
    if name == "paper-4node":
        return ScenarioConfig(
            name=name,
            graph=_paper_4node(),
            initial_tokens={"A": "a", "B": "b", "C": "c", "D": "d"},
            rounds=1,
            mode=RoundMode.COHERENT,
            rule_spec="FullSwap",
            seed=7,
            engine="both",
        )
    if name == "watrous-c15":
        tokens = {v: "0" for v in _watrous_blocks().vertices}
        tokens["00"] = "1"
        return ScenarioConfig(
            name=name,
            graph=_watrous_blocks(),
            initial_tokens=tokens,
            rounds=1,
            mode=RoundMode.COHERENT,
            rule_spec="FullSwap",
            seed=7,
            engine="quantum",
            shift=watrous_shift_map(),
            skip_quiescent=True,
        )
    if name == "triangle":
        return ScenarioConfig(
            name=name,
            graph=_triangle(),
            initial_tokens={"0": "1", "1": "0", "2": "0"},
            rounds=1,
            mode=RoundMode.COHERENT,
            rule_spec="FullSwap",
            seed=7,
            engine="both",
        )
    if name == "single-edge":
        return ScenarioConfig(
            name=name,
            graph=_single_edge(),
            initial_tokens={"A": "a", "B": "b"},
            rounds=1,
            mode=RoundMode.MEASURED,
            rule_spec="FullSwap",
            seed=7,
            engine="both",
        )
    raise ConfigError("scenario", f"unknown builtin scenario {name!r}")


BUILTIN_SCENARIOS = ("paper-4node", "watrous-c15", "triangle", "single-edge")


# ------------------------------------------------------------- config loading


def _load_rule_matrix(path: Path):
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError("rule", f"cannot read matrix file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("rule", f"matrix file is not valid JSON: {exc}") from None
    rows = doc["matrix"] if isinstance(doc, dict) else doc
    try:
        m = np.array(
            [[complex(*e) if isinstance(e, list) else complex(e) for e in row] for row in rows]
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError("rule", f"bad matrix entries: {exc}") from None
    return m


def load_config(source: str | Path | Mapping) -> ScenarioConfig:
    """Build a ScenarioConfig from a JSON file path or an already-parsed
    mapping. Graph values may be a builtin graph name or a file path
    (resolved relative to the config file)."""
    base = Path(".")
    if isinstance(source, (str, Path)):
        path = Path(source)
        base = path.parent
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError("config", f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"config is not valid JSON: {exc}") from None
        default_name = path.stem
    else:
        doc = dict(source)
        default_name = "scenario"
    if not isinstance(doc, Mapping):
        raise ConfigError("config", "config document must be a JSON object")

    def need(key, typ, default=None, required=False):
        if key not in doc:
            if required:
                raise ConfigError(key, "missing required field")
            return default
        val = doc[key]
        if typ is int and isinstance(val, bool):
            raise ConfigError(key, "expected an integer")
        if not isinstance(val, typ):
            raise ConfigError(key, f"expected {typ.__name__}, got {type(val).__name__}")
        return val

    graph_ref = need("graph", str, required=True)
    if graph_ref in BUILTIN_GRAPHS:
        graph = builtin_graph(graph_ref)
    else:
        gpath = Path(graph_ref)
        if not gpath.is_absolute():
            gpath = base / gpath
        try:
            graph = parse_graph(gpath.read_text())
        except OSError as exc:
            raise ConfigError("graph", f"cannot read graph file: {exc}") from None

    tokens = need("initial_tokens", Mapping, required=True)
    mode_str = need("mode", str, default="Measured")
    try:
        mode = RoundMode(mode_str)
    except ValueError:
        raise ConfigError("mode", f"must be 'Measured' or 'Coherent', got {mode_str!r}") from None

    rule_spec = need("rule", str, default="FullSwap")
    rule_matrix = None
    if rule_spec not in ("FullSwap", "DirectedQutrit"):
        rpath = Path(rule_spec)
        if not rpath.is_absolute():
            rpath = base / rpath
        rule_matrix = _load_rule_matrix(rpath)

    shift = need("shift", Mapping, default=None)
    cfg = ScenarioConfig(
        name=need("name", str, default=default_name),
        graph=graph,
        initial_tokens={str(k): str(v) for k, v in tokens.items()},
        rounds=need("rounds", int, default=1),
        mode=mode,
        rule_spec=rule_spec,
        seed=need("seed", int, default=0),
        engine=need("engine", str, default="both"),
        samples=need("samples", int, default=100_000),
        classical_method=need("classical_method", str, default="auto"),
        shift=dict(shift) if shift is not None else None,
        skip_quiescent=bool(doc.get("skip_quiescent", False)),
        rule_matrix=rule_matrix,
    )
    cfg.validate()
    return cfg


# -------------------------------------------------------------- token codec


def _token_codec(cfg: ScenarioConfig) -> tuple[dict[str, int], list[str]]:
    """Map token labels to basis indices.

    Labels that are all decimal numerals map to their numeric values (so a
    directed rule's distinguished |0> can be addressed); otherwise labels
    get indices in order of first appearance over lexicographic vertices.
    """
    order: list[str] = []
    for v in cfg.graph.vertices:
        lab = cfg.initial_tokens[v]
        if lab not in order:
            order.append(lab)
    numeric = all(lab.isdigit() for lab in order)
    if numeric and len({int(lab) for lab in order}) == len(order):
        index_of = {lab: int(lab) for lab in order}
    else:
        index_of = {lab: i for i, lab in enumerate(order)}

    if cfg.rule_spec == "DirectedQutrit":
        fixed_dim = 3
    elif cfg.rule_matrix is not None:
        fixed_dim = math.isqrt(len(cfg.rule_matrix))
    else:
        fixed_dim = None

    needed = max(index_of.values()) + 1
    dim = fixed_dim if fixed_dim is not None else needed
    if needed > dim:
        raise ConfigError(
            "initial_tokens",
            f"{needed} token values do not fit the rule's token dimension {dim}",
        )
    names = [str(i) for i in range(dim)]
    for lab, i in index_of.items():
        names[i] = lab
    return index_of, names


def _build_rule(cfg: ScenarioConfig, token_dim: int) -> ExchangeRule:
    if cfg.rule_spec == "FullSwap":
        return ExchangeRule.full_swap(token_dim)
    if cfg.rule_spec == "DirectedQutrit":
        return ExchangeRule.directed_qutrit()
    return ExchangeRule.from_matrix(cfg.rule_matrix, name=cfg.rule_spec)


# ------------------------------------------------------------------ reporting


def _dec(p: float) -> str:
    return f"{p:.12g}"


def _marginal_entry(dist: Distribution, names: list[str], exact=None) -> list[dict]:
    rows = []
    for idx, label in enumerate(names):
        row = {"token": label, "prob": _dec(dist.prob((idx,)))}
        if exact is not None:
            row["exact"] = str(exact.get(idx, Fraction(0)))
        rows.append(row)
    return rows


def _quantum_section(cfg: ScenarioConfig, tokens_idx, rule, names) -> dict:
    graph = cfg.graph
    if cfg.skip_quiescent:
        marginals, matchings, support, quiescent = _run_componentwise(
            cfg, tokens_idx, rule
        )
    else:
        run = run_diffusion(
            graph, tokens_idx, cfg.rounds, cfg.mode, rule, cfg.seed, cfg.coherent_cap
        )
        marginals = vertex_marginals(run.state, graph)
        matchings = run.matching_log
        support = run.state.support_size
        quiescent = []

    section = {
        "marginals": {v: _marginal_entry(marginals[v], names) for v in graph.vertices},
        "support_size": support,
    }
    if cfg.mode is RoundMode.MEASURED:
        section["matchings"] = [sorted([list(e) for e in m]) for m in matchings]
    if cfg.skip_quiescent:
        section["quiescent"] = quiescent
    return section


def _run_componentwise(cfg: ScenarioConfig, tokens_idx, rule):
    """Run each connected component separately, skipping (but verifying)
    components whose vertices all hold one identical definite token that
    the rule provably leaves fixed."""
    graph = cfg.graph
    comps = graph.connected_components()
    quiescent: list[str] = []
    active: list[tuple[str, ...]] = []
    for comp in comps:
        values = {tokens_idx[v] for v in comp}
        if len(values) == 1 and rule.fixes_pair(*([next(iter(values))] * 2)):
            quiescent.extend(comp)
        else:
            active.append(comp)

    marginals: dict[str, Distribution] = {
        v: Distribution({(tokens_idx[v],): 1.0}) for v in quiescent
    }
    matchings_per_round: list[set] = [set() for _ in range(cfg.rounds)]
    support = 1
    seeds = np.random.SeedSequence(cfg.seed).spawn(max(len(active), 1))
    for comp, sub_seed in zip(active, seeds):
        sub = graph.subgraph(comp)
        sub_tokens = {v: tokens_idx[v] for v in comp}
        run = run_diffusion(
            sub, sub_tokens, cfg.rounds, cfg.mode, rule, sub_seed, cfg.coherent_cap
        )
        marginals.update(vertex_marginals(run.state, sub))
        support *= run.state.support_size
        for i, m in enumerate(run.matching_log):
            matchings_per_round[i] |= m
    matchings = [frozenset(m) for m in matchings_per_round]
    return marginals, matchings, support, sorted(quiescent)


def _classical_section(cfg: ScenarioConfig, tokens_idx, rule, names) -> dict:
    pair = rule.pair_map()
    if pair is None:
        raise ConfigError(
            "engine",
            "classical engine needs a basis-permutation rule; "
            f"{rule.name!r} has superposition structure",
        )
    graph = cfg.graph
    method = cfg.classical_method
    if method == "auto":
        feasible = (
            cfg.rounds <= EXACT_ROUNDS_CAP
            and math.prod(max(graph.degree(v), 1) for v in graph.vertices)
            <= EXACT_PROFILE_CAP
        )
        method = "exact" if feasible else "sample"

    if method == "exact":
        fracs = oracle.classical_marginals_exact(graph, tokens_idx, cfg.rounds, pair)
        section = {"method": "exact", "marginals": {}}
        for v in graph.vertices:
            dist = Distribution({(t,): float(p) for t, p in fracs[v].items() if p > 0})
            section["marginals"][v] = _marginal_entry(dist, names, exact=fracs[v])
        return section

    seed = np.random.SeedSequence(cfg.seed).spawn(1)[0]
    dists = oracle.classical_diffuse(
        graph, tokens_idx, cfg.rounds, pair, exact=False, seed=seed, samples=cfg.samples
    )
    return {
        "method": "sample",
        "samples": cfg.samples,
        "marginals": {v: _marginal_entry(dists[v], names) for v in graph.vertices},
    }


def _analysis_sections(graph: OrientedGraph) -> tuple[list, dict]:
    edge_probs = [
        {
            "edge": list(e),
            "prob": _dec(float(oracle.edge_selection_probability(graph, *e))),
            "exact": str(oracle.edge_selection_probability(graph, *e)),
        }
        for e in graph.edges
        if graph.degree(e[0]) and graph.degree(e[1])
    ]
    raw = oracle.check_probability_bound(graph)
    bound = {
        "all_satisfied": raw["all_satisfied"],
        "edges": [
            {
                "edge": list(r["edge"]),
                "selection": str(r["selection"]),
                "bound": str(r["bound"]),
                "satisfied": r["satisfied"],
            }
            for r in raw["edges"]
        ],
        "independence_ok": raw["independence_ok"],
        "independence_pairs": raw["independence_pairs"],
    }
    return edge_probs, bound


def run_scenario(cfg: ScenarioConfig) -> dict:
    """Execute the configured engines and assemble the report document."""
    cfg.validate()
    t0 = time.perf_counter()

    index_of, names = _token_codec(cfg)
    rule = _build_rule(cfg, len(names))
    tokens_idx = {v: index_of[cfg.initial_tokens[v]] for v in cfg.graph.vertices}
    if cfg.shift is not None:
        tokens_idx = {cfg.shift[v]: tokens_idx[v] for v in cfg.graph.vertices}

    engines: dict[str, dict] = {}
    if cfg.engine in ("quantum", "both"):
        engines["quantum"] = _quantum_section(cfg, tokens_idx, rule, names)
    if cfg.engine in ("classical", "both"):
        engines["classical"] = _classical_section(cfg, tokens_idx, rule, names)

    edge_probs, bound = _analysis_sections(cfg.graph)
    return {
        "scenario": cfg.name,
        "seed": cfg.seed,
        "rounds": cfg.rounds,
        "mode": cfg.mode.value,
        "rule": rule.name,
        "token_labels": names,
        "graph": {
            "vertices": list(cfg.graph.vertices),
            "edges": [list(e) for e in cfg.graph.edges],
        },
        "engines": engines,
        "edge_probabilities": edge_probs,
        "bound_check": bound,
        "timing_ms": int((time.perf_counter() - t0) * 1000),
    }


def report_without_volatile(report: dict) -> dict:
    """The report minus its single non-deterministic field (wall-clock)."""
    return {k: v for k, v in report.items() if k != "timing_ms"}


def render_report(report: dict, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=True)
    if fmt == "csv":
        lines = ["engine,vertex,token,prob"]
        for engine in sorted(report.get("engines", {})):
            marg = report["engines"][engine]["marginals"]
            for v in sorted(marg):
                for row in marg[v]:
                    lines.append(f"{engine},{v},{row['token']},{row['prob']}")
        return "\n".join(lines)
    raise ConfigError("format", f"unknown format {fmt!r}")
