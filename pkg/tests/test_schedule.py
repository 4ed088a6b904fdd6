from __future__ import annotations

import math
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfg.errors import ContradictoryGraphError, ResourceLimitError
from qfg.factor_graph import FactorGraph, FunctionNode, ScheduleSpec, VariableNode, load_preset, xor_diag
from qfg.schedule import (
    TwoPhaseSpec,
    completion_curve,
    integer_partitions,
    monte_carlo_completion,
    parallel_exact_at,
    partition_weights,
    preset_priors,
    spec_from_graph,
)


def two_term_literal(p1, p2, q):
    a, b = (1 - p1) ** (q - 1), (1 - p2) ** (q - 1)
    return a * b * p1 * p2 + a * (1 - b) * p1 + b * (1 - a) * p2


def seven_term_literal(p0, p3, p6, q):
    h0, h3, h6 = ((1 - p) ** (q - 1) for p in (p0, p3, p6))
    return (h0 * h3 * h6 * p0 * p3 * p6
            + (1 - h0) * h3 * h6 * p3 * p6
            + h0 * (1 - h3) * h6 * p0 * p6
            + h0 * h3 * (1 - h6) * p0 * p3
            + (1 - h0) * (1 - h3) * h6 * p6
            + (1 - h0) * h3 * (1 - h6) * p3
            + h0 * (1 - h3) * (1 - h6) * p0)


def partition_count(k):
    # Euler's pentagonal recurrence, independent of the enumerator
    p = [1] + [0] * k
    for n in range(1, k + 1):
        j, total = 1, 0
        while True:
            for g in (j * (3 * j - 1) // 2, j * (3 * j + 1) // 2):
                if g > n:
                    break
                total += (-1) ** (j + 1) * p[n - g]
            if j * (3 * j - 1) // 2 > n:
                break
            j += 1
        p[n] = total
    return p[k]


def test_small_partitions():
    assert integer_partitions(0) == [()]
    assert integer_partitions(1) == [(1,)]
    assert set(integer_partitions(4)) == {(4,), (3, 1), (2, 2), (2, 1, 1), (1, 1, 1, 1)}


@pytest.mark.parametrize("k", [5, 10, 20, 30])
def test_partition_counts(k):
    parts = integer_partitions(k)
    assert len(parts) == partition_count(k)
    assert len(set(parts)) == len(parts)
    assert all(sum(p) == k and list(p) == sorted(p, reverse=True) for p in parts)


def test_partition_limits():
    with pytest.raises(ResourceLimitError):
        integer_partitions(61)
    with pytest.raises(ValueError):
        integer_partitions(-1)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=13, max_size=13))
def test_partition_weights_match_enumeration(weights):
    weights = [0.0] + weights[1:]
    w = partition_weights(weights, 12)
    for k in range(13):
        brute = sum(math.prod(weights[u] for u in v) for v in integer_partitions(k))
        assert w[k] == pytest.approx(brute, rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("p1, p2", [(0.82, 0.82), (0.3, 0.9), (0.05, 0.5)])
def test_two_node_expansion(p1, p2):
    for q in range(1, 51):
        assert parallel_exact_at((p1, p2), q) == pytest.approx(two_term_literal(p1, p2, q), abs=1e-12)


@pytest.mark.parametrize("ps", [(0.73, 0.73, 0.73), (0.2, 0.5, 0.95), (0.05, 0.1, 0.6)])
def test_three_node_expansion(ps):
    for q in range(1, 51):
        assert parallel_exact_at(ps, q) == pytest.approx(seven_term_literal(*ps, q), abs=1e-12)


def test_parallel_exact_at_values():
    assert parallel_exact_at((0.82, 0.82), 1) == pytest.approx(0.6724, abs=1e-12)
    assert parallel_exact_at((0.73,) * 3, 1) == pytest.approx(0.389017, abs=1e-12)
    assert parallel_exact_at((0.5,), 0) == 0.0


@pytest.mark.parametrize("ps", [(0.05,), (0.05, 0.3), (0.1, 0.2, 0.9)])
def test_parallel_exact_at_sums_to_one(ps):
    assert sum(parallel_exact_at(ps, q) for q in range(1, 2001)) == pytest.approx(1, abs=1e-9)


def test_two_phase_spec_validation():
    with pytest.raises(ValueError):
        TwoPhaseSpec((0.5,), 0.5, 0.3)
    with pytest.raises(ValueError):
        TwoPhaseSpec((1.5,), 0.5, 0.75)
    assert TwoPhaseSpec.from_parallel((0.5, 0.5), 0.5).joint_prob == 0.125


def test_chain4_spec():
    spec = spec_from_graph(load_preset("chain4"))
    assert spec.parallel_probs == pytest.approx((0.82, 0.82), abs=1e-12)
    assert spec.final_conditional == pytest.approx(0.6562 / 0.6724, abs=1e-12)
    assert spec.joint_prob == pytest.approx(0.6562, abs=1e-12)
    curve = completion_curve(spec, 5)
    assert curve.P_nondist[0] == pytest.approx(0.6562, abs=1e-12)


def test_nine_spec():
    spec = spec_from_graph(load_preset("nine"))
    assert spec.parallel_probs == pytest.approx((0.73,) * 3, abs=1e-12)
    joint = 0.9**9 + 0.1**9
    assert spec.final_conditional == pytest.approx(joint / 0.73**3, abs=1e-12)
    assert completion_curve(spec, 1).P_nondist[0] == pytest.approx(joint, abs=1e-12)


def test_contradicted_chain():
    g = load_preset("chain4").with_priors({"x0": (0.0, 1.0), "x1": (1.0, 0.0)})
    with pytest.raises(ContradictoryGraphError):
        spec_from_graph(g)


def test_u2_zero_variant():
    g = preset_priors(load_preset("chain4"), 0.9, 0.0)
    spec = spec_from_graph(g)
    assert spec.joint_prob == pytest.approx(0.001, abs=1e-12)
    curve = completion_curve(spec, 10)
    assert np.all(curve.p_m_renewal < 0.01)


def test_spec_from_graph_shape_checks():
    g = load_preset("fig2")
    with pytest.raises(ValueError):
        spec_from_graph(g)
    with pytest.raises(ValueError):
        spec_from_graph(g, [["f0"], ["f1"], []])
    with pytest.raises(ValueError):
        spec_from_graph(load_preset("fig3"), [["f0", "f1"], ["f2"]])


def test_deterministic_pipeline():
    spec = TwoPhaseSpec.from_parallel((1.0,), 1.0)
    curve = completion_curve(spec, 6)
    np.testing.assert_allclose(curve.p_m_renewal, [0, 1, 1, 1, 1, 1])
    np.testing.assert_allclose(curve.p_m_paper, [0, 1, 1, 1, 1, 1])
    np.testing.assert_allclose(curve.P_nondist, 1)


def test_degenerate_range():
    curve = completion_curve(spec_from_graph(load_preset("chain4")), 0)
    assert len(curve) == 0
    with pytest.raises(ValueError):
        completion_curve(spec_from_graph(load_preset("chain4")), 201)


def renewal_by_enumeration(spec, t):
    """First completion at t: ordered failed cycles, then a successful one."""
    probs, pf = spec.parallel_probs, spec.final_conditional
    arrow = lambda q: parallel_exact_at(probs, q - 1) * pf
    bar = lambda q: parallel_exact_at(probs, q - 1) * (1 - pf)

    def compositions(k):
        if k == 0:
            yield ()
            return
        for first in range(1, k + 1):
            for rest in compositions(k - first):
                yield (first,) + rest

    return sum(arrow(q) * sum(math.prod(bar(u) for u in c) for c in compositions(t - q))
               for q in range(2, t + 1))


def paper_by_enumeration(spec, t):
    probs, pf = spec.parallel_probs, spec.final_conditional
    arrow = lambda q: parallel_exact_at(probs, q - 1) * pf
    bar = lambda q: parallel_exact_at(probs, q - 1) * (1 - pf)
    return sum(arrow(q) * sum(math.prod(bar(u) for u in v) for v in integer_partitions(t - q))
               for q in range(2, t + 1))


@pytest.mark.parametrize("ps, pf", [((0.5, 0.4), 0.3), ((0.82, 0.82), 0.6562 / 0.6724), ((0.3, 0.6, 0.9), 0.5)])
def test_curves_match_enumeration(ps, pf):
    spec = TwoPhaseSpec.from_parallel(ps, pf)
    curve = completion_curve(spec, 12)
    for i, t in enumerate(curve.t):
        assert curve.p_e_renewal[i] == pytest.approx(renewal_by_enumeration(spec, int(t)), abs=1e-13)
        assert curve.p_e_paper[i] == pytest.approx(paper_by_enumeration(spec, int(t)), abs=1e-13)


def test_curve_invariants():
    for spec in (spec_from_graph(load_preset("chain4")), TwoPhaseSpec.from_parallel((0.3, 0.6), 0.2)):
        c = completion_curve(spec, 200)
        for pm in (c.p_m_paper, c.p_m_renewal, c.P_nondist):
            assert np.all(np.diff(pm) >= -1e-15) and np.all(pm <= 1 + 1e-12)
        np.testing.assert_allclose(c.survival_renewal, 1 - c.p_m_renewal, atol=1e-12)
        np.testing.assert_allclose(c.survival_nondist, 1 - c.P_nondist, atol=1e-12)
        # partition form never exceeds the renewal form: it drops orderings
        assert np.all(c.p_e_paper <= c.p_e_renewal + 1e-15)


def test_renewal_sums_to_one():
    c = completion_curve(TwoPhaseSpec.from_parallel((0.6, 0.7), 0.5), 200)
    assert c.p_m_renewal[-1] == pytest.approx(1, abs=1e-12)


def test_monte_carlo_deterministic_pipeline():
    g = FactorGraph(
        (VariableNode("a", (1, 0)), VariableNode("b", (1, 0))),
        (FunctionNode("fa", ("a",), xor_diag(1)), FunctionNode("fab", ("a", "b"), xor_diag(2))),
        ScheduleSpec("phased", (("fa",), ("fab",))),
    )
    mc = monte_carlo_completion(g, 5, 50)
    np.testing.assert_array_equal(mc.counts, [0, 50, 0, 0, 0])
    np.testing.assert_allclose(mc.p_m, [0, 1, 1, 1, 1])
    with pytest.raises(ValueError):
        monte_carlo_completion(g, 5, 0)


def test_monte_carlo_small_agreement():
    g = load_preset("chain4")
    mc = monte_carlo_completion(g, 10, 3000, seed=1)
    curve = completion_curve(spec_from_graph(g), 10)
    sigma = np.sqrt(curve.p_m_renewal * (1 - curve.p_m_renewal) / 3000)
    assert np.all(np.abs(mc.p_m - curve.p_m_renewal) <= 4 * sigma + 1e-12)


def test_monte_carlo_schedule_override():
    g = load_preset("chain4")
    flat = ScheduleSpec("phased", (("f01", "f23", "f12"),))
    mc = monte_carlo_completion(g, 3, 200, schedule=flat)
    assert mc.counts[0] > 0


def test_preset_priors():
    g = preset_priors(load_preset("nine"), 0.8, 0.1, uvars=("x0", "x4"))
    assert g.variable("x4").prior_probs == pytest.approx((0.1, 0.9))
    assert g.variable("x3").prior_probs == pytest.approx((0.8, 0.2))
    with pytest.raises(ValueError):
        preset_priors(g, 0.8, 0.1, uvars=("y",))


def test_monte_carlo_free_schedule_single_node():
    mc = monte_carlo_completion(load_preset("fig1"), 8, 4000, seed=2)
    # completion at tick t is geometric in the single-attempt success 0.48
    expected = 1 - 0.52 ** mc.t
    assert np.all(np.abs(mc.p_m - expected) <= 4 * np.sqrt(expected * (1 - expected) / 4000) + 1e-12)
