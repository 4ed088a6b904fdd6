from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfg.amplify import (
    amplify,
    amplify_step,
    amplify_step_pairwise,
    diag_extraction_perm,
    expected_copies,
    gamma_profile,
    sample_amplify_step,
)
from qfg.errors import ImpossibleOutcomeError
from qfg.statevector import StateVector, outcome_distribution

S_F = StateVector(["x0", "x1"], np.array([1, 0, 0, math.sqrt(2)]) / math.sqrt(3))


def test_q_and_p_mappings():
    np.testing.assert_array_equal(diag_extraction_perm(2).mapping, [0, 3, 1, 2])
    p = diag_extraction_perm(4).mapping
    np.testing.assert_array_equal(p[:4], [0, 5, 10, 15])
    assert sorted(p) == list(range(16))
    for bad in (1, 3, 6, 2.0):
        with pytest.raises(ValueError):
            diag_extraction_perm(bad)


def test_squaring_chain():
    p0, s1 = amplify_step(S_F)
    assert p0 == pytest.approx(5 / 9, abs=1e-12)
    np.testing.assert_allclose(s1.amps, np.array([1, 0, 0, 2]) / math.sqrt(5), atol=1e-12)
    p1, s2 = amplify_step(s1)
    assert p1 == pytest.approx(17 / 25, abs=1e-12)
    np.testing.assert_allclose(s2.amps, np.array([1, 0, 0, 4]) / math.sqrt(17), atol=1e-12)
    reads = [outcome_distribution(s, s.qubit_ids)["11"] for s in (S_F, s1, s2)]
    assert reads == pytest.approx([2 / 3, 4 / 5, 16 / 17], abs=1e-12)
    assert s2.qubit_ids == S_F.qubit_ids


def test_amplify_and_copies():
    probs, s = amplify(S_F, 2)
    assert probs == pytest.approx([5 / 9, 17 / 25], abs=1e-12)
    assert expected_copies(S_F, 0) == 1
    assert expected_copies(S_F, 1) == pytest.approx(3.6, abs=1e-12)
    assert expected_copies(S_F, 2) == pytest.approx(3.6 * 50 / 17, abs=1e-12)
    with pytest.raises(ValueError):
        expected_copies(S_F, -1)


def test_uniform_state_is_fixed():
    s = StateVector(["a", "b"], [0.5] * 4)
    p, out = amplify_step(s)
    assert p == pytest.approx(0.25, abs=1e-12)
    np.testing.assert_allclose(out.amps, [0.5] * 4, atol=1e-12)


def test_copy_id_collision():
    with pytest.raises(ValueError):
        amplify_step(StateVector(["a", "a'"], [1, 0, 0, 0]))


def test_zero_success_raises(monkeypatch):
    import qfg.amplify as amp

    monkeypatch.setattr(amp, "ZERO_PROB", 2.0)
    with pytest.raises(ImpossibleOutcomeError):
        amp.amplify_step(S_F)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_global_and_pairwise_agree(n, seed):
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    s = StateVector([f"q{i}" for i in range(n)], amps / np.linalg.norm(amps))
    pg, sg = amplify_step(s)
    pp, sp = amplify_step_pairwise(s)
    assert pg == pytest.approx(pp, abs=1e-12)
    np.testing.assert_allclose(sg.amps, sp.amps, atol=1e-12)
    # squaring law
    np.testing.assert_allclose(sg.amps * math.sqrt(pg), s.amps**2, atol=1e-12)
    assert pg == pytest.approx(float(np.sum(np.abs(s.amps) ** 4)), abs=1e-12)
    assert np.argmax(np.abs(sg.amps)) == np.argmax(np.abs(s.amps))


def test_gamma_profile_reference_point():
    prof = gamma_profile(0.62, 3)
    assert prof[3].gamma_k == pytest.approx(0.0223, abs=5e-4)
    assert prof[3].p_Mk == pytest.approx(0.9805, abs=5e-4)
    assert prof[0].gamma_k == 1.0


@pytest.mark.parametrize("a2", [0.5, 0.62, 0.75, 0.9, 0.99])
def test_gamma_telescopes(a2):
    prof = gamma_profile(a2, 20)
    for s in prof.steps:
        r_next = a2 ** (2**s.k) + (1 - a2) ** (2**s.k)
        assert s.gamma_k == pytest.approx(r_next, abs=1e-12)


def test_gamma_profile_monotone():
    for a2 in np.linspace(0.5, 1.0, 11):
        prof = gamma_profile(float(a2), 12)
        g = [s.gamma_k for s in prof.steps]
        m = [s.p_Mk for s in prof.steps]
        assert all(x >= y - 1e-15 for x, y in zip(g, g[1:]))
        assert all(y >= x - 1e-15 for x, y in zip(m, m[1:]))


def test_gamma_profile_edges():
    assert all(s.p_Mk == pytest.approx(0.5, abs=1e-12) for s in gamma_profile(0.5, 10).steps)
    assert all(s.gamma_k == 1.0 and s.p_Mk == 1.0 for s in gamma_profile(1.0, 6).steps)
    with pytest.raises(ValueError):
        gamma_profile(1.2, 3)
    with pytest.raises(ValueError):
        gamma_profile(0.5, -1)


def test_profile_matches_operational_single_qubit():
    a2 = 0.7
    s = StateVector(["q"], [math.sqrt(a2), math.sqrt(1 - a2)])
    prof = gamma_profile(a2, 4)
    for k in range(4):
        p, s_next = amplify_step(s)
        assert p == pytest.approx(prof[k].p_ak, abs=1e-12)
        assert s.probabilities()[0] == pytest.approx(prof[k].p_Mk, abs=1e-12)
        s = s_next


def test_sampled_amplification_matches_step_product():
    a2 = 0.7
    s0 = StateVector(["q"], [math.sqrt(a2), math.sqrt(1 - a2)])
    k, n = 3, 20000
    rng = np.random.default_rng(12)
    reached = 0
    for _ in range(n):
        s = s0
        for _ in range(k):
            s = sample_amplify_step(s, rng)
            if s is None:
                break
        else:
            reached += 1
    probs, _ = amplify(s0, k)
    expected = math.prod(probs)
    assert abs(reached / n - expected) < 4 * math.sqrt(expected * (1 - expected) / n)
