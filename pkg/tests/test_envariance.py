import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from envlab import (
    LocalOperator,
    SubsystemLayout,
    apply_operator,
    build_state,
    state_distance,
)
from envlab.envariance import (
    causality_check,
    composite_swap,
    is_envariant,
    phase_op,
    swap_op,
    verify_counter,
)
from envlab.errors import IdenticalLabels, TargetKindError, TargetOverlap, UnknownLabel

from conftest import dense_operator, random_state, random_unitary, two_branch


class TestBuilders:
    def test_phase(self):
        layout = SubsystemLayout([("S", ["S0", "S1"])])
        s = build_state(layout, [(("S0",), 1)])
        out = apply_operator(s, phase_op(layout, "S", "S0", 0.3))
        assert out.amplitude(("S0",)) == pytest.approx(np.exp(0.3j))

    def test_phase_zero_is_identity(self):
        layout = SubsystemLayout([("S", ["S0", "S1", "S2"])])
        np.testing.assert_array_equal(phase_op(layout, "S", "S1", 0.0).matrix, np.eye(3))

    def test_phase_undone_on_environment(self):
        s = two_branch(0.6, 0.8j)
        moved = apply_operator(s, phase_op(s.layout, "S", "S0", 1.1))
        back = apply_operator(moved, phase_op(s.layout, "E", "Ea", -1.1))
        assert state_distance(back, s) < 1e-12

    def test_swap_matrix(self):
        layout = SubsystemLayout([("S", ["S0", "S1"])])
        np.testing.assert_array_equal(swap_op(layout, "S", "S0", "S1").matrix, [[0, 1], [1, 0]])

    def test_swap_involution(self):
        layout = SubsystemLayout([("S", ["a", "b", "c", "d"])])
        m = swap_op(layout, "S", "b", "d").matrix
        np.testing.assert_array_equal(m @ m, np.eye(4))

    def test_swap_errors(self):
        layout = SubsystemLayout([("S", ["S0", "S1"])])
        with pytest.raises(IdenticalLabels):
            swap_op(layout, "S", "S0", "S0")
        with pytest.raises(UnknownLabel):
            swap_op(layout, "S", "S0", "S7")
        with pytest.raises(UnknownLabel):
            phase_op(layout, "S", "S7", 1.0)

    def test_composite_swap_unitary_and_involution(self):
        layout = SubsystemLayout([("S", ["S0", "S1"]), ("X", ["x"]), ("F", ["F1", "F2", "F3", "F4"])])
        op = composite_swap(layout, ["S", "F"], ("S0", "F1"), ("S1", "F4"))
        m = op.matrix
        np.testing.assert_allclose(m.conj().T @ m, np.eye(8), atol=1e-12)
        np.testing.assert_array_equal(m @ m, np.eye(8))

    def test_composite_swap_target_order(self):
        layout = SubsystemLayout([("S", ["S0", "S1"]), ("F", ["F1", "F2"])])
        a = composite_swap(layout, ["S", "F"], ("S0", "F1"), ("S1", "F2"))
        b = composite_swap(layout, ["F", "S"], ("F1", "S0"), ("F2", "S1"))
        assert a.targets == b.targets == ("S", "F")
        np.testing.assert_array_equal(a.matrix, b.matrix)

    def test_composite_swap_untouched_state(self):
        layout = SubsystemLayout([("S", ["S0", "S1"]), ("F", ["F1", "F2"])])
        s = build_state(layout, [(("S0", "F2"), 1)])
        op = composite_swap(layout, ["S", "F"], ("S0", "F1"), ("S1", "F2"))
        assert state_distance(apply_operator(s, op), s) == 0
        s2 = build_state(layout, [(("S1", "F1"), 1)])
        assert state_distance(apply_operator(s2, op), s2) == 0

    def test_composite_swap_identical(self):
        layout = SubsystemLayout([("S", ["S0", "S1"]), ("F", ["F1", "F2"])])
        with pytest.raises(IdenticalLabels):
            composite_swap(layout, ["S", "F"], ("S0", "F1"), ("S0", "F1"))


class TestIsEnvariant:
    def test_equal_weight_swap(self, eq3):
        verdict = is_envariant(eq3, swap_op(eq3.layout, "S", "S0", "S1"), ["E"])
        assert verdict.envariant
        assert verdict.residual < 1e-9
        np.testing.assert_allclose(verdict.counter_op.matrix, swap_op(eq3.layout, "E", "Ea", "Eb").matrix, atol=1e-12)

    def test_unequal_swap(self):
        s = two_branch(math.sqrt(3) / 2, 0.5)
        verdict = is_envariant(s, swap_op(s.layout, "S", "S0", "S1"), ["E"])
        assert not verdict.envariant
        assert verdict.counter_op is None

    def test_shared_environment_phase(self):
        s = two_branch(math.sqrt(3) / 2, 0.5, same_env=True)
        assert not is_envariant(s, phase_op(s.layout, "S", "S0", 0.7), ["E"]).envariant

    def test_phase_counter_is_inverse_phase(self):
        s = two_branch(math.sqrt(3) / 2, 0.5)
        verdict = is_envariant(s, phase_op(s.layout, "S", "S0", 0.7), ["E"])
        assert verdict.envariant
        np.testing.assert_allclose(verdict.counter_op.matrix, np.diag([np.exp(-0.7j), 1]), atol=1e-12)

    def test_overlap_rejected(self, eq3):
        with pytest.raises(TargetOverlap):
            is_envariant(eq3, swap_op(eq3.layout, "E", "Ea", "Eb"), ["E"])

    def test_multi_subsystem_environment(self):
        # environment split over two subsystems; the system swap is undone jointly
        layout = {"S": ["S0", "S1"], "A": ["a0", "a1"], "B": ["b0", "b1"]}
        s = build_state(layout, [(("S0", "a0", "b1"), 1), (("S1", "a1", "b0"), 1)], normalize=True)
        verdict = is_envariant(s, swap_op(s.layout, "S", "S0", "S1"), ["A", "B"])
        assert verdict.envariant
        assert verdict.counter_op.targets == ("A", "B")
        assert verify_counter(s, swap_op(s.layout, "S", "S0", "S1"), verdict.counter_op) < 1e-9

    def test_degenerate_spectrum_with_phases(self):
        # three equal weights with distinct phases and a scrambled environment
        layout = {"S": ["s0", "s1", "s2"], "E": ["e0", "e1", "e2", "e3"]}
        comps = [(("s0", "e2"), np.exp(0.4j)), (("s1", "e0"), np.exp(2.0j)), (("s2", "e3"), -1)]
        s = build_state(layout, comps, normalize=True)
        for a, b in [("s0", "s1"), ("s0", "s2"), ("s1", "s2")]:
            op = swap_op(s.layout, "S", a, b)
            verdict = is_envariant(s, op, ["E"])
            assert verdict.envariant
            assert verify_counter(s, op, verdict.counter_op) < 1e-9


class TestVerifyCounter:
    def test_phase_pair(self):
        s = two_branch(math.sqrt(3) / 2, 0.5)
        r = verify_counter(s, phase_op(s.layout, "S", "S0", 0.9), phase_op(s.layout, "E", "Ea", -0.9))
        assert r < 1e-12

    def test_swap_pair(self, eq3):
        r = verify_counter(eq3, swap_op(eq3.layout, "S", "S0", "S1"), swap_op(eq3.layout, "E", "Ea", "Eb"))
        assert r < 1e-12

    def test_unequal_swap_residual(self, psi1):
        # dense brute force: ||(X x 1 x X) psi1 - psi1||
        x = np.array([[0, 1], [1, 0]])
        u = dense_operator(psi1.layout, ["S"], x) @ dense_operator(psi1.layout, ["E"], x)
        vec = psi1.to_array().reshape(-1)
        expected = np.linalg.norm(u @ vec - vec)
        r = verify_counter(psi1, swap_op(psi1.layout, "S", "S0", "S1"), swap_op(psi1.layout, "E", "E0", "E1"))
        assert r == pytest.approx(expected, abs=1e-12)
        assert r == pytest.approx(math.sqrt(2), abs=1e-12)

    def test_unequal_swap_residual_two_party(self):
        s = two_branch(math.sqrt(3) / 2, 0.5)
        r = verify_counter(s, swap_op(s.layout, "S", "S0", "S1"), swap_op(s.layout, "E", "Ea", "Eb"))
        assert r == pytest.approx((math.sqrt(6) - math.sqrt(2)) / 2, abs=1e-12)

    def test_overlap(self, eq3):
        op = swap_op(eq3.layout, "S", "S0", "S1")
        with pytest.raises(TargetOverlap):
            verify_counter(eq3, op, op)


class TestCausality:
    def test_random_env_unitary(self, psi1):
        rng = np.random.default_rng(7)
        u = LocalOperator(("E",), random_unitary(rng, 2))
        assert causality_check(psi1, u, ["S", "P"])

    def test_ancilla_swap(self):
        layout = {"S": ["S0", "S1"], "F": [f"F{i}" for i in range(1, 5)], "G": [f"G{i}" for i in range(1, 5)]}
        comps = [(("S0", f"F{i}", f"G{i}"), 0.5) for i in (1, 2, 3)] + [(("S1", "F4", "G4"), 0.5)]
        s = build_state(layout, comps)
        assert causality_check(s, swap_op(s.layout, "G", "G1", "G4"), ["S"])

    def test_projector_rejected(self, psi1):
        proj = LocalOperator(("E",), [[1, 0], [0, 0]], "projector")
        with pytest.raises(TargetKindError):
            causality_check(psi1, proj, ["S"])

    def test_overlap(self, psi1):
        with pytest.raises(TargetOverlap):
            causality_check(psi1, swap_op(psi1.layout, "S", "S0", "S1"), ["S"])


# properties ---------------------------------------------------------------

angles = st.floats(0, 2 * math.pi, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(theta=st.floats(0.05, math.pi / 2 - 0.05), pa=angles, pb=angles, phi=angles)
def test_phase_envariance_complete_and_sound(theta, pa, pb, phi):
    s = two_branch(math.cos(theta) * np.exp(1j * pa), math.sin(theta) * np.exp(1j * pb))
    for label in ("S0", "S1"):
        op = phase_op(s.layout, "S", label, phi)
        verdict = is_envariant(s, op, ["E"])
        assert verdict.envariant
        assert verify_counter(s, op, verdict.counter_op) < 1e-9


@settings(max_examples=50, deadline=None)
@given(theta=st.floats(0.05, math.pi / 2 - 0.05), pa=angles, pb=angles)
def test_swap_envariant_iff_equal_moduli(theta, pa, pb):
    s = two_branch(math.cos(theta) * np.exp(1j * pa), math.sin(theta) * np.exp(1j * pb))
    verdict = is_envariant(s, swap_op(s.layout, "S", "S0", "S1"), ["E"])
    equal = abs(math.cos(theta) - math.sin(theta)) < 1e-9
    assert verdict.envariant == equal
    if verdict.envariant:
        assert verdict.residual < 1e-9


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_envariant_verdicts_are_sound_on_random_states(seed):
    rng = np.random.default_rng(seed)
    dims = tuple(int(d) for d in rng.integers(1, 5, size=3))
    state = random_state(rng, dims, density=float(rng.uniform(0.3, 1)))
    ids = state.layout.ids
    op = LocalOperator((ids[0],), random_unitary(rng, dims[0]))
    verdict = is_envariant(state, op, [ids[2]])
    if verdict.envariant:
        assert verify_counter(state, op, verdict.counter_op) < 1e-9
    else:
        assert verdict.counter_op is None


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_causality_holds_for_unitaries(seed):
    rng = np.random.default_rng(seed)
    dims = tuple(int(d) for d in rng.integers(1, 6, size=rng.integers(2, 4)))
    state = random_state(rng, dims, density=0.7)
    ids = state.layout.ids
    u = LocalOperator((ids[-1],), random_unitary(rng, dims[-1]))
    assert causality_check(state, u, ids[:-1])
