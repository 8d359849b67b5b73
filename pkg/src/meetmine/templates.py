"""Template formalism and edit-distance loss.

A template is an ordered chain of labeled nodes with implicit forward edges
``i -> i+1`` plus a bounded set of backward edges ``(from, to)`` with
``to < from``.  An instantiation is a walk through that graph: it may start
and end at any node and must visit at least one node.  The loss of a template
on a meeting is the Levenshtein distance between the meeting's label sequence
and the nearest instantiation's label sequence.

Exact loss is computed by a shortest-path dynamic program over the product of
meeting positions and template nodes (compiled in :mod:`meetmine._align`).
Windowed loss restricts instantiation length to a band around the meeting
length, which mirrors the enumeration originally used to define the measure;
the exact value is never larger than the windowed one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from ._align import loss_exact_kernel, loss_windowed_kernel

__all__ = [
    "Template",
    "Instantiation",
    "ObjectiveParams",
    "ObjectiveEvaluator",
    "successors",
    "enumerate_instantiations",
    "edit_distance",
    "loss",
    "objective",
    "template_to_json",
    "template_from_json",
    "template_to_dot",
]

DEFAULT_LENGTH_CAP = 12


@dataclass(frozen=True)
class Template:
    """Ordered node labels plus backward jump edges.

    ``back_edges`` contains pairs ``(from_index, to_index)`` with
    ``to_index < from_index``; the forward chain edges are implicit.
    """

    nodes: tuple[str, ...]
    back_edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if len(self.nodes) < 1:
            raise ValueError("template must have at least one node")
        object.__setattr__(self, "nodes", tuple(str(x) for x in self.nodes))
        edges = frozenset((int(f), int(t)) for f, t in self.back_edges)
        n = len(self.nodes)
        for f, t in edges:
            if not (0 <= t < f < n):
                raise ValueError(
                    f"back edge ({f}, {t}) must satisfy 0 <= to < from < {n}"
                )
        object.__setattr__(self, "back_edges", edges)

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def sorted_edges(self) -> tuple[tuple[int, int], ...]:
        return tuple(sorted(self.back_edges))


@dataclass(frozen=True)
class Instantiation:
    """A walk through a template: node indices and the labels they spell."""

    path: tuple[int, ...]
    labels: tuple[str, ...]


@dataclass(frozen=True)
class ObjectiveParams:
    """Regularization weights: c1 per node, c2 per backward edge."""

    c1: float = 1.0
    c2: float = 0.1

    def __post_init__(self) -> None:
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("regularization weights must be nonnegative")


def successors(template: Template, i: int) -> tuple[int, ...]:
    """Successor node indices of node ``i``, ascending."""
    n = len(template.nodes)
    if not 0 <= i < n:
        raise IndexError(f"node index {i} out of range for {n}-node template")
    out = {t for f, t in template.back_edges if f == i}
    if i + 1 < n:
        out.add(i + 1)
    return tuple(sorted(out))


def enumerate_instantiations(
    template: Template,
    min_len: int,
    max_len: int,
    *,
    length_cap: int = DEFAULT_LENGTH_CAP,
    max_count: int | None = None,
) -> list[Instantiation]:
    """All instantiations with length in ``[min_len, max_len]``.

    Intended as a small-scale oracle; ``max_len`` beyond ``length_cap`` is
    refused because the walk count grows exponentially.  Results are sorted
    lexicographically by node path.
    """
    if min_len < 1:
        raise ValueError("instantiations have length >= 1")
    if max_len < min_len:
        raise ValueError("max_len must be >= min_len")
    if max_len > length_cap:
        raise ValueError(
            f"max_len={max_len} exceeds enumeration cap {length_cap}; "
            "raise length_cap explicitly if this is intentional"
        )
    succ = [successors(template, i) for i in range(len(template.nodes))]
    out: list[Instantiation] = []

    def extend(path: list[int]) -> None:
        if len(path) >= min_len:
            out.append(
                Instantiation(
                    path=tuple(path),
                    labels=tuple(template.nodes[i] for i in path),
                )
            )
            if max_count is not None and len(out) > max_count:
                raise ValueError(f"instantiation count exceeds max_count={max_count}")
        if len(path) == max_len:
            return
        for s in succ[path[-1]]:
            path.append(s)
            extend(path)
            path.pop()

    for start in range(len(template.nodes)):
        extend([start])
    return out


def edit_distance(a: Sequence[str], b: Sequence[str]) -> int:
    """Levenshtein distance with unit insert, delete, and substitute costs."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, cb in enumerate(b, start=1):
            cur[j] = min(
                prev[j] + 1,
                cur[j - 1] + 1,
                prev[j - 1] + (ca != cb),
            )
        prev = cur
    return prev[len(b)]


# ---------------------------------------------------------------------------
# loss and objective


def _window_bounds(m: int, delta: float, template: Template) -> tuple[int, int]:
    slack = math.ceil(delta * m)
    lo, hi = max(1, m - slack), max(1, m + slack)
    if not template.back_edges:
        # acyclic templates admit no walk longer than the chain; clamp the
        # band to the nearest achievable lengths instead of failing
        hi = min(hi, len(template.nodes))
        lo = min(lo, hi)
    return lo, hi


class ObjectiveEvaluator:
    """Pre-encoded corpus against which templates are scored repeatedly.

    Encodes every meeting once, memoizes mean loss per template, and exposes
    the regularized objective F = mean loss + c1 * nodes + c2 * back edges.
    The annealer leans on the memo: plateau oscillation revisits the same
    neighborhoods many times.
    """

    def __init__(
        self,
        sequences: Sequence[Sequence[str]],
        params: ObjectiveParams | None = None,
        mode: str = "exact",
        delta: float = 0.1,
    ) -> None:
        if len(sequences) == 0:
            raise ValueError("objective requires a nonempty corpus")
        if mode not in ("exact", "windowed"):
            raise ValueError(f"unknown loss mode {mode!r}")
        if delta < 0:
            raise ValueError("delta must be nonnegative")
        self.params = params if params is not None else ObjectiveParams()
        self.mode = mode
        self.delta = delta
        self._table: dict[str, int] = {}
        self._meetings = [self._encode(seq) for seq in sequences]
        self._loss_cache: dict[Template, float] = {}

    def _encode(self, labels: Iterable[str]) -> np.ndarray:
        table = self._table
        return np.array(
            [table.setdefault(lab, len(table)) for lab in labels], dtype=np.int64
        )

    def _encode_template(
        self, template: Template
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        nodes = self._encode(template.nodes)
        edges = template.sorted_edges
        back_from = np.array([f for f, _ in edges], dtype=np.int64)
        back_to = np.array([t for _, t in edges], dtype=np.int64)
        return nodes, back_from, back_to

    def mean_loss(self, template: Template) -> float:
        cached = self._loss_cache.get(template)
        if cached is not None:
            return cached
        nodes, back_from, back_to = self._encode_template(template)
        total = 0
        for meeting in self._meetings:
            if self.mode == "exact":
                total += int(loss_exact_kernel(nodes, back_from, back_to, meeting))
            else:
                lo, hi = _window_bounds(meeting.shape[0], self.delta, template)
                total += int(
                    loss_windowed_kernel(nodes, back_from, back_to, meeting, lo, hi)
                )
        value = total / len(self._meetings)
        self._loss_cache[template] = value
        return value

    def objective(self, template: Template) -> float:
        return (
            self.mean_loss(template)
            + self.params.c1 * len(template.nodes)
            + self.params.c2 * len(template.back_edges)
        )


def loss(
    template: Template,
    sequence: Sequence[str],
    mode: str = "exact",
    *,
    delta: float = 0.1,
) -> int:
    """Edit distance from ``sequence`` to the nearest instantiation.

    ``mode="exact"`` minimizes over instantiations of every length;
    ``mode="windowed"`` only over lengths within ``ceil(delta * len)`` of the
    meeting length.  An empty meeting costs the shortest instantiation
    length, which is 1.
    """
    if mode not in ("exact", "windowed"):
        raise ValueError(f"unknown loss mode {mode!r}")
    table: dict[str, int] = {}
    meeting = np.array([table.setdefault(x, len(table)) for x in sequence], dtype=np.int64)
    nodes = np.array([table.setdefault(x, len(table)) for x in template.nodes], dtype=np.int64)
    edges = template.sorted_edges
    back_from = np.array([f for f, _ in edges], dtype=np.int64)
    back_to = np.array([t for _, t in edges], dtype=np.int64)
    if mode == "exact":
        return int(loss_exact_kernel(nodes, back_from, back_to, meeting))
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    lo, hi = _window_bounds(meeting.shape[0], delta, template)
    return int(loss_windowed_kernel(nodes, back_from, back_to, meeting, lo, hi))


def objective(
    template: Template,
    sequences: Sequence[Sequence[str]],
    params: ObjectiveParams | None = None,
    mode: str = "exact",
    *,
    delta: float = 0.1,
) -> float:
    """Mean loss over the corpus plus length and back-edge penalties."""
    ev = ObjectiveEvaluator(sequences, params=params, mode=mode, delta=delta)
    return ev.objective(template)


# ---------------------------------------------------------------------------
# serialization


def template_to_json(template: Template) -> str:
    payload = {
        "nodes": list(template.nodes),
        "back_edges": [list(e) for e in template.sorted_edges],
    }
    return json.dumps(payload, sort_keys=True)


def template_from_json(text: str) -> Template:
    payload = json.loads(text)
    try:
        nodes = tuple(payload["nodes"])
        edges = frozenset((int(f), int(t)) for f, t in payload["back_edges"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed template JSON: {exc}") from exc
    return Template(nodes=nodes, back_edges=edges)


def template_to_dot(template: Template, name: str = "template") -> str:
    """Graphviz rendering: solid forward chain, dashed backward edges."""
    lines = [f"digraph {name} {{", "  rankdir=LR;"]
    for i, lab in enumerate(template.nodes):
        lines.append(f'  n{i} [label="{lab}"];')
    for i in range(len(template.nodes) - 1):
        lines.append(f"  n{i} -> n{i + 1};")
    for f, t in template.sorted_edges:
        lines.append(f"  n{f} -> n{t} [style=dashed, constraint=false];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def instantiation_signature(
    template: Template,
    *,
    length_cap: int = 8,
    max_count: int | None = 200_000,
):
    """Equivalence key: the set of label strings spelled by short walks.

    Two templates are regarded as equivalent when they spell the same label
    sequences up to ``length_cap``.  Degenerate templates whose walk count
    explodes fall back to structural identity.
    """
    try:
        insts = enumerate_instantiations(
            template, 1, length_cap, length_cap=length_cap, max_count=max_count
        )
    except ValueError:
        return ("structure", template.nodes, template.sorted_edges)
    return frozenset(inst.labels for inst in insts)
