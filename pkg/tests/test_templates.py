"""Template structure, edit distance, loss modes, and the objective."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meetmine.templates import (
    ObjectiveEvaluator,
    ObjectiveParams,
    Template,
    edit_distance,
    enumerate_instantiations,
    instantiation_signature,
    loss,
    objective,
    successors,
    template_from_json,
    template_to_dot,
    template_to_json,
)

CYCLE = Template(nodes=("A", "B", "C"), back_edges=frozenset({(2, 0)}))


class TestTemplateType:
    def test_back_edge_direction_enforced(self):
        with pytest.raises(ValueError):
            Template(nodes=("A", "B"), back_edges=frozenset({(0, 1)}))

    def test_self_loop_rejected(self):
        with pytest.raises(ValueError):
            Template(nodes=("A", "B"), back_edges=frozenset({(1, 1)}))

    def test_index_range_enforced(self):
        with pytest.raises(ValueError):
            Template(nodes=("A", "B"), back_edges=frozenset({(2, 0)}))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            Template(nodes=(), back_edges=frozenset())


class TestSuccessors:
    def test_back_edge_target(self):
        assert successors(CYCLE, 2) == (0,)

    def test_last_node_no_edges(self):
        chain = Template(nodes=("A", "B", "C"), back_edges=frozenset())
        assert successors(chain, 2) == ()

    def test_forward_chain(self):
        assert successors(CYCLE, 0) == (1,)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            successors(CYCLE, 3)


class TestEnumerate:
    def test_cycle_length_3(self):
        got = {"".join(inst.labels)
               for inst in enumerate_instantiations(CYCLE, 3, 3)}
        assert got == {"ABC", "BCA", "CAB"}

    def test_single_node(self):
        t = Template(nodes=("A",), back_edges=frozenset())
        assert len(enumerate_instantiations(t, 1, 1)) == 1

    def test_two_node_chain(self):
        t = Template(nodes=("A", "B"), back_edges=frozenset())
        got = {"".join(i.labels) for i in enumerate_instantiations(t, 1, 2)}
        assert got == {"A", "B", "AB"}

    def test_cap_refused(self):
        with pytest.raises(ValueError, match="cap"):
            enumerate_instantiations(CYCLE, 1, 50)

    def test_paths_are_valid_walks(self):
        for inst in enumerate_instantiations(CYCLE, 1, 6):
            for u, v in zip(inst.path, inst.path[1:]):
                assert v == u + 1 or (u, v) in CYCLE.back_edges


def brute_edit(a, b, memo=None):
    # literal recursive definition, exponential without the memo
    if memo is None:
        memo = {}
    key = (a, b)
    if key in memo:
        return memo[key]
    if not a:
        out = len(b)
    elif not b:
        out = len(a)
    else:
        out = min(
            brute_edit(a[1:], b, memo) + 1,
            brute_edit(a, b[1:], memo) + 1,
            brute_edit(a[1:], b[1:], memo) + (a[0] != b[0]),
        )
    memo[key] = out
    return out


class TestEditDistance:
    def test_identity(self):
        assert edit_distance(list("ABAB"), list("ABAB")) == 0

    def test_deletions(self):
        assert edit_distance(list("AB"), []) == 2

    def test_substitution(self):
        assert edit_distance(list("ABC"), list("AXC")) == 1

    @settings(max_examples=120, deadline=None)
    @given(st.text(alphabet="ABC", max_size=8), st.text(alphabet="ABC", max_size=8))
    def test_matches_recursive_definition(self, a, b):
        assert edit_distance(list(a), list(b)) == brute_edit(tuple(a), tuple(b))

    @settings(max_examples=100, deadline=None)
    @given(st.text(alphabet="ABCD", max_size=10),
           st.text(alphabet="ABCD", max_size=10),
           st.text(alphabet="ABCD", max_size=10))
    def test_metric_axioms(self, a, b, c):
        ab = edit_distance(list(a), list(b))
        assert ab == edit_distance(list(b), list(a))
        assert (ab == 0) == (a == b)
        assert ab <= edit_distance(list(a), list(c)) + edit_distance(list(c), list(b))

    @settings(max_examples=80, deadline=None)
    @given(st.text(alphabet="ABC", min_size=1, max_size=10),
           st.integers(0, 9), st.sampled_from("ABC"))
    def test_single_substitution_changes_by_at_most_one(self, s, pos, ch):
        pos %= len(s)
        t = s[:pos] + ch + s[pos + 1:]
        base = edit_distance(list(s), list("ABCAB"))
        moved = edit_distance(list(t), list("ABCAB"))
        assert abs(base - moved) <= 1


def oracle_loss(template, seq, extra=4):
    cap = len(seq) + len(template.nodes) + extra
    insts = enumerate_instantiations(template, 1, cap, length_cap=cap)
    return min(edit_distance(list(i.labels), list(seq)) for i in insts)


class TestLoss:
    def test_exact_instantiation_costs_zero(self):
        assert loss(CYCLE, list("ABCABC")) == 0

    def test_one_substitution(self):
        assert loss(CYCLE, list("AXC")) == 1

    def test_empty_meeting_costs_shortest_instantiation(self):
        assert loss(CYCLE, []) == 1

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            loss(CYCLE, list("ABC"), mode="fuzzy")

    def test_windowed_upper_bounds_exact(self):
        t = Template(nodes=("A", "B"), back_edges=frozenset({(1, 0)}))
        for seq in ("ABABAB", "A", "BBBB", "ABBA"):
            exact = loss(t, list(seq))
            windowed = loss(t, list(seq), mode="windowed", delta=0.1)
            assert exact <= windowed

    def test_back_edge_never_raises_loss(self):
        base = Template(nodes=("A", "B", "C"), back_edges=frozenset())
        more = Template(nodes=("A", "B", "C"), back_edges=frozenset({(2, 0)}))
        for seq in ("ABCABC", "CCC", "BAC", ""):
            assert loss(more, list(seq)) <= loss(base, list(seq))

    def test_witness_upper_bound(self):
        for inst in enumerate_instantiations(CYCLE, 1, 6):
            assert loss(CYCLE, list("BCAB")) <= edit_distance(
                list(inst.labels), list("BCAB"))


class TestObjective:
    def test_worked_example(self):
        seqs = [list("ABCABC"), list("CAB")]
        assert objective(CYCLE, seqs) == pytest.approx(3.1, abs=1e-12)

    def test_zero_penalties_equal_mean_loss(self):
        seqs = [list("ABCB"), list("AX")]
        params = ObjectiveParams(c1=0.0, c2=0.0)
        want = sum(loss(CYCLE, s) for s in seqs) / 2
        assert objective(CYCLE, seqs, params) == pytest.approx(want)

    def test_unused_back_edge_costs_exactly_c2(self):
        plain = Template(nodes=("A", "B", "C"), back_edges=frozenset())
        extra = Template(nodes=("A", "B", "C"), back_edges=frozenset({(2, 1)}))
        seqs = [list("ABC")]  # the forward chain already fits exactly
        f0 = objective(plain, seqs)
        f1 = objective(extra, seqs)
        assert f1 - f0 == pytest.approx(0.1, abs=1e-12)

    def test_matching_meeting_cannot_raise_f(self):
        seqs = [list("BBAC"), list("CCC")]
        f0 = objective(CYCLE, seqs)
        seqs[1] = list("ABCABC")  # replace with an exact instantiation
        assert objective(CYCLE, seqs) <= f0

    def test_evaluator_memoizes(self):
        ev = ObjectiveEvaluator([list("ABCABC")])
        first = ev.objective(CYCLE)
        assert ev.objective(CYCLE) == first


class TestSerialization:
    def test_json_round_trip(self):
        text = template_to_json(CYCLE)
        assert template_from_json(text) == CYCLE
        payload = json.loads(text)
        assert payload["back_edges"] == [[2, 0]]

    def test_malformed_json(self):
        with pytest.raises(ValueError):
            template_from_json('{"nodes": ["A"]}')

    def test_dot_styles(self):
        dot = template_to_dot(CYCLE)
        assert "n0 -> n1;" in dot
        assert "n2 -> n0 [style=dashed" in dot

    def test_signature_separates_structures(self):
        chain = Template(nodes=("A", "B", "C"), back_edges=frozenset())
        assert instantiation_signature(CYCLE) != instantiation_signature(chain)
        relabeled = Template(nodes=("B", "C", "A"), back_edges=frozenset({(2, 0)}))
        assert instantiation_signature(CYCLE) == instantiation_signature(relabeled)
