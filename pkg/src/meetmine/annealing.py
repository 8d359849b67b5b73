"""Simulated-annealing search over templates.

The proposal kernel edits one structural element at a time: insert a node
(any position, any label), delete a node (incident back edges drop, the rest
reindex), insert a backward edge, or delete one.  The move kind is uniform
over the kinds that are feasible in the current state.

Improving proposals are always accepted; a worsening proposal is accepted
with probability exp(-dF / T).  The iteration counter advances only on
acceptance, and the temperature decays geometrically in that counter,
``T = t0 * cooling ** (iter mod restart_period)``: every ``restart_period``
accepted moves the temperature snaps back to ``t0`` and the search jumps to
the best template found so far.  The run stops after ``max_accepted``
acceptances or ``max_proposals`` proposals, whichever comes first.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Sequence

from .templates import (
    ObjectiveEvaluator,
    ObjectiveParams,
    Template,
    instantiation_signature,
)

__all__ = [
    "MOVE_KINDS",
    "AnnealConfig",
    "AcceptedMove",
    "AnnealTrace",
    "StartResult",
    "ConsensusGroup",
    "ConsensusReport",
    "MultiStartResult",
    "acceptance_probability",
    "metropolis_accept",
    "temperature_at",
    "propose_move",
    "anneal",
    "multi_start",
    "templates_equivalent",
    "trace_to_csv",
]

MOVE_KINDS = ("insert-node", "delete-node", "insert-edge", "delete-edge")


@dataclass(frozen=True)
class AnnealConfig:
    t0: float = 1000.0
    cooling: float = 0.95
    restart_period: int = 800
    max_accepted: int = 4000
    max_proposals: int | None = None  # None means 10 * max_accepted
    l_max: int = 20
    b_max: int = 5
    params: ObjectiveParams = field(default_factory=ObjectiveParams)
    mode: str = "exact"
    delta: float = 0.1
    seed: int = 0
    consensus_length_cap: int = 8

    def __post_init__(self) -> None:
        if self.t0 <= 0:
            raise ValueError("t0 must be positive")
        if not 0 < self.cooling < 1:
            raise ValueError("cooling must lie in (0, 1)")
        if self.restart_period < 1 or self.max_accepted < 1:
            raise ValueError("restart_period and max_accepted must be positive")
        if self.max_proposals is not None and self.max_proposals < 1:
            raise ValueError("max_proposals must be positive")
        if self.l_max < 1 or self.b_max < 0:
            raise ValueError("l_max must be >= 1 and b_max >= 0")

    @property
    def proposal_budget(self) -> int:
        return (
            self.max_proposals
            if self.max_proposals is not None
            else 10 * self.max_accepted
        )


@dataclass(frozen=True)
class AcceptedMove:
    iteration: int  # acceptance count after this move, 1-based
    kind: str
    delta_f: float
    temperature: float
    best_f: float


@dataclass
class AnnealTrace:
    accepted: list[AcceptedMove]
    best_f: float
    best_template: Template
    init_f: float
    proposals: int


def temperature_at(config: AnnealConfig, iteration: int) -> float:
    """Schedule value after ``iteration`` acceptances."""
    return config.t0 * config.cooling ** (iteration % config.restart_period)


def acceptance_probability(delta_f: float, temperature: float) -> float:
    """1 for improvements, exp(-dF/T) otherwise."""
    if delta_f < 0:
        return 1.0
    arg = -delta_f / temperature
    return math.exp(arg) if arg > -745.0 else 0.0


def metropolis_accept(delta_f: float, temperature: float, rng: random.Random) -> bool:
    """The annealer's accept rule; improving moves never consume randomness."""
    if delta_f < 0:
        return True
    return rng.random() < acceptance_probability(delta_f, temperature)


def _shift_after_insert(edges, pos):
    return frozenset(
        (f + (f >= pos), t + (t >= pos)) for f, t in edges
    )


def _shift_after_delete(edges, pos):
    return frozenset(
        (f - (f > pos), t - (t > pos))
        for f, t in edges
        if f != pos and t != pos
    )


def propose_move(
    template: Template,
    rng: random.Random,
    alphabet: Sequence[str],
    l_max: int,
    b_max: int,
) -> tuple[Template, str]:
    """One uniformly chosen feasible edit of the template."""
    n = len(template.nodes)
    edges = template.back_edges
    all_pairs = n * (n - 1) // 2
    feasible = []
    if n < l_max:
        feasible.append("insert-node")
    if n > 1:
        feasible.append("delete-node")
    if len(edges) < b_max and len(edges) < all_pairs:
        feasible.append("insert-edge")
    if edges:
        feasible.append("delete-edge")
    if not feasible:
        raise ValueError("no feasible move from this template under the caps")
    kind = feasible[rng.randrange(len(feasible))]

    if kind == "insert-node":
        pos = rng.randrange(n + 1)
        label = alphabet[rng.randrange(len(alphabet))]
        nodes = template.nodes[:pos] + (label,) + template.nodes[pos:]
        return Template(nodes, _shift_after_insert(edges, pos)), kind
    if kind == "delete-node":
        pos = rng.randrange(n)
        nodes = template.nodes[:pos] + template.nodes[pos + 1:]
        return Template(nodes, _shift_after_delete(edges, pos)), kind
    if kind == "insert-edge":
        absent = [
            (f, t)
            for f in range(n)
            for t in range(f)
            if (f, t) not in edges
        ]
        pair = absent[rng.randrange(len(absent))]
        return Template(template.nodes, edges | {pair}), kind
    victim = sorted(edges)[rng.randrange(len(edges))]
    return Template(template.nodes, edges - {victim}), kind


def anneal(
    sequences: Sequence[Sequence[str]],
    init: Template,
    config: AnnealConfig,
    alphabet: Sequence[str] | None = None,
    _evaluator: ObjectiveEvaluator | None = None,
) -> tuple[Template, AnnealTrace]:
    """Run the annealer from ``init``; returns best template and trace."""
    if len(init.nodes) > config.l_max or len(init.back_edges) > config.b_max:
        raise ValueError("initial template violates the size caps")
    if alphabet is None:
        seen: list[str] = []
        for seq in sequences:
            for lab in seq:
                if lab not in seen:
                    seen.append(lab)
        for lab in init.nodes:
            if lab not in seen:
                seen.append(lab)
        alphabet = tuple(seen)
    else:
        alphabet = tuple(alphabet)
    ev = _evaluator if _evaluator is not None else ObjectiveEvaluator(
        sequences, params=config.params, mode=config.mode, delta=config.delta
    )
    rng = random.Random(config.seed)

    current = init
    f_cur = ev.objective(current)
    best, best_f = current, f_cur
    init_f = f_cur
    accepted: list[AcceptedMove] = []
    iteration = 0
    proposals = 0
    budget = config.proposal_budget

    while iteration < config.max_accepted and proposals < budget:
        if iteration > 0 and iteration % config.restart_period == 0:
            current, f_cur = best, best_f  # restart from the incumbent
        temp = temperature_at(config, iteration)
        candidate, kind = propose_move(current, rng, alphabet, config.l_max, config.b_max)
        proposals += 1
        f_cand = ev.objective(candidate)
        delta_f = f_cand - f_cur
        if not metropolis_accept(delta_f, temp, rng):
            continue
        iteration += 1
        current, f_cur = candidate, f_cand
        if f_cur < best_f:
            best, best_f = current, f_cur
        accepted.append(
            AcceptedMove(
                iteration=iteration,
                kind=kind,
                delta_f=delta_f,
                temperature=temp,
                best_f=best_f,
            )
        )

    trace = AnnealTrace(
        accepted=accepted,
        best_f=best_f,
        best_template=best,
        init_f=init_f,
        proposals=proposals,
    )
    return best, trace


# ---------------------------------------------------------------------------
# multi-start and consensus


@dataclass(frozen=True)
class StartResult:
    start_id: int
    template: Template
    f: float


@dataclass(frozen=True)
class ConsensusGroup:
    representative: Template
    start_ids: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.start_ids)


@dataclass(frozen=True)
class ConsensusReport:
    groups: tuple[ConsensusGroup, ...]
    modal_fraction: float


@dataclass
class MultiStartResult:
    runs: list[StartResult]
    traces: list[AnnealTrace]
    consensus: ConsensusReport

    @property
    def best(self) -> StartResult:
        return min(self.runs, key=lambda r: (r.f, r.start_id))


def templates_equivalent(a: Template, b: Template, length_cap: int = 8) -> bool:
    """True when both spell the same instantiation label sets up to the cap."""
    return instantiation_signature(a, length_cap=length_cap) == instantiation_signature(
        b, length_cap=length_cap
    )


def build_consensus(
    results: Sequence[StartResult], length_cap: int = 8
) -> ConsensusReport:
    buckets: dict[object, list[StartResult]] = {}
    for res in results:
        key = instantiation_signature(res.template, length_cap=length_cap)
        buckets.setdefault(key, []).append(res)
    groups = []
    for members in buckets.values():
        members = sorted(members, key=lambda r: r.start_id)
        rep = min(members, key=lambda r: (r.f, r.start_id)).template
        groups.append(
            ConsensusGroup(representative=rep, start_ids=tuple(r.start_id for r in members))
        )
    groups.sort(key=lambda g: (-g.size, g.start_ids[0]))
    modal = groups[0].size / len(results) if results else 0.0
    return ConsensusReport(groups=tuple(groups), modal_fraction=modal)


def multi_start(
    sequences: Sequence[Sequence[str]],
    config: AnnealConfig,
    n_starts: int | None = None,
    alphabet: Sequence[str] | None = None,
) -> MultiStartResult:
    """One annealing run per meeting (or per the first ``n_starts`` meetings).

    Run ``i`` starts from the truncation of meeting ``i``'s sequence to
    ``l_max`` nodes with no back edges, with a seed derived from
    ``config.seed`` and ``i``.  Results are grouped by instantiation-set
    equivalence into a consensus report.
    """
    if len(sequences) == 0:
        raise ValueError("multi_start requires a nonempty corpus")
    picked = list(sequences) if n_starts is None else list(sequences[:n_starts])
    if n_starts is not None and n_starts > len(sequences):
        raise ValueError("n_starts exceeds the number of meetings")
    if alphabet is None:
        seen: list[str] = []
        for seq in sequences:
            for lab in seq:
                if lab not in seen:
                    seen.append(lab)
        alphabet = tuple(seen)
    else:
        alphabet = tuple(alphabet)
    evaluator = ObjectiveEvaluator(
        sequences, params=config.params, mode=config.mode, delta=config.delta
    )
    runs: list[StartResult] = []
    traces: list[AnnealTrace] = []
    for idx, seq in enumerate(picked):
        if len(seq) == 0:
            raise ValueError(f"meeting {idx} is empty; cannot build an initial template")
        init = Template(nodes=tuple(seq[: config.l_max]))
        run_cfg = replace(config, seed=config.seed * 1_000_003 + idx)
        best, trace = anneal(
            sequences, init, run_cfg, alphabet=alphabet, _evaluator=evaluator
        )
        runs.append(StartResult(start_id=idx, template=best, f=trace.best_f))
        traces.append(trace)
    consensus = build_consensus(runs, length_cap=config.consensus_length_cap)
    return MultiStartResult(runs=runs, traces=traces, consensus=consensus)


def trace_to_csv(trace: AnnealTrace) -> str:
    lines = ["iteration,kind,delta_f,temperature,best_f"]
    for move in trace.accepted:
        lines.append(
            f"{move.iteration},{move.kind},{move.delta_f:.12g},"
            f"{move.temperature:.12g},{move.best_f:.12g}"
        )
    return "\n".join(lines) + "\n"
