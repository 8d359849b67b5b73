"""Capacity counting and a uniform-convergence risk bound for templates.

The hypothesis class is every template with at most ``l_max`` nodes over an
alphabet of ``alphabet_size`` labels and at most ``b_max`` backward edges,
plus the empty template.  Its size is bounded by

    sum_{n=0}^{L} |A|^n * sum_{b=0}^{min(B, n)} C(n(n-1)/2, b)

where C(a, b) = 0 whenever b > a.  The bound can over-count relative to the
templates actually enumerable (it is an upper bound by construction), and the
risk bound built on it is

    emp_risk + sqrt((log_count + log(1/delta)) / (2 m))

with natural logarithms throughout.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .templates import Template

__all__ = [
    "BoundInputs",
    "count_templates",
    "log_count_templates",
    "risk_bound",
    "enumerate_templates",
]

# beyond this many estimated bits the exact-integer path is skipped
EXACT_BIT_BUDGET = 1 << 16


def _validate_class(l_max: int, b_max: int, alphabet_size: int) -> None:
    if l_max < 0 or b_max < 0:
        raise ValueError("l_max and b_max must be nonnegative")
    if alphabet_size < 1:
        raise ValueError("alphabet_size must be at least 1")


def count_templates(l_max: int, b_max: int, alphabet_size: int) -> int:
    """Exact integer value of the counting formula (includes the empty template)."""
    _validate_class(l_max, b_max, alphabet_size)
    total = 0
    for n in range(l_max + 1):
        pairs = n * (n - 1) // 2
        arrow_sum = sum(math.comb(pairs, b) for b in range(min(b_max, n) + 1))
        total += alphabet_size**n * arrow_sum
    return total


def _log_comb(a: int, b: int) -> float:
    if b < 0 or b > a:
        return float("-inf")
    return math.lgamma(a + 1) - math.lgamma(b + 1) - math.lgamma(a - b + 1)


def _logsumexp(values) -> float:
    peak = max(values)
    if peak == float("-inf"):
        return peak
    return peak + math.log(sum(math.exp(v - peak) for v in values))


def _estimated_bits(l_max: int, b_max: int, alphabet_size: int) -> float:
    # crude upper estimate of the count's bit length, used to gate exact math
    pairs = l_max * (l_max - 1) / 2
    per_term = l_max * math.log2(max(alphabet_size, 2)) + b_max * math.log2(pairs + 2)
    return per_term + math.log2(l_max + 1) + math.log2(b_max + 1) + 8


def log_count_templates(
    l_max: int, b_max: int, alphabet_size: int, *, exact_bit_budget: int = EXACT_BIT_BUDGET
) -> float:
    """Natural log of the counting formula.

    Uses exact integer arithmetic when the count is estimated to fit the bit
    budget, otherwise a log-sum-exp over log-gamma binomials; the two agree
    to near machine precision wherever both apply.
    """
    _validate_class(l_max, b_max, alphabet_size)
    if _estimated_bits(l_max, b_max, alphabet_size) <= exact_bit_budget:
        return math.log(count_templates(l_max, b_max, alphabet_size))
    log_a = math.log(alphabet_size)
    terms = []
    for n in range(l_max + 1):
        pairs = n * (n - 1) // 2
        for b in range(min(b_max, n) + 1):
            lc = _log_comb(pairs, b)
            if lc != float("-inf"):
                terms.append(n * log_a + lc)
    return _logsumexp(terms)


@dataclass(frozen=True)
class BoundInputs:
    emp_risk: float
    m: int
    l_max: int
    b_max: int
    alphabet_size: int
    delta: float

    def __post_init__(self) -> None:
        if self.emp_risk < 0:
            raise ValueError("emp_risk must be nonnegative")
        if self.m < 1:
            raise ValueError("m must be at least 1")
        _validate_class(self.l_max, self.b_max, self.alphabet_size)
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie strictly between 0 and 1")


def risk_bound(inputs: BoundInputs, *, loss_scale: float = 1.0) -> float:
    """High-probability bound on true risk.

    ``loss_scale`` rescales the deviation term when the loss range is not
    [0, 1]; the default of 1 matches the bound as stated.
    """
    if loss_scale <= 0:
        raise ValueError("loss_scale must be positive")
    log_count = log_count_templates(inputs.l_max, inputs.b_max, inputs.alphabet_size)
    dev = math.sqrt((log_count + math.log(1.0 / inputs.delta)) / (2.0 * inputs.m))
    return inputs.emp_risk + loss_scale * dev


def enumerate_templates(
    l_max: int, b_max: int, alphabet, *, cap: int = 10**6
) -> list[Template]:
    """Every nonempty template within the caps, in deterministic order.

    Order: node count ascending, labels lexicographic in alphabet order,
    then back-edge subsets by size and pair order.  The empty template is
    not constructible, so comparisons against the counting formula add one.
    Refuses when the enumeration would exceed ``cap`` templates.
    """
    labels = tuple(alphabet)
    if not labels:
        raise ValueError("alphabet must be nonempty")
    _validate_class(l_max, b_max, alphabet_size=len(labels))
    size = 0
    for n in range(1, l_max + 1):
        pairs = n * (n - 1) // 2
        arrow_sum = sum(math.comb(pairs, b) for b in range(min(b_max, pairs) + 1))
        size += len(labels) ** n * arrow_sum
    if size > cap:
        raise ValueError(
            f"enumeration of {size} templates exceeds cap {cap}; "
            "raise cap explicitly if this is intentional"
        )
    out: list[Template] = []
    for n in range(1, l_max + 1):
        pair_list = [(f, t) for f in range(n) for t in range(f)]
        for nodes in itertools.product(labels, repeat=n):
            for b in range(min(b_max, len(pair_list)) + 1):
                for edges in itertools.combinations(pair_list, b):
                    out.append(Template(nodes=nodes, back_edges=frozenset(edges)))
    return out
