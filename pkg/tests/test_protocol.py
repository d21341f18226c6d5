import logging
import math

import numpy as np
import pytest

from app.core.errors import DimensionMismatchError, DomainError, IndistinguishableError
from app.core.hmetric import HamiltonianSchedule, dist0
from app.core.protocol import (
    DiscriminationProtocol,
    ProtocolStep,
    decompose_pair,
    discrimination_measurement,
    first_orthogonality_time,
    integrated_speed_limit,
    optimal_probe,
    pair_angle,
    run_protocol,
    run_schedule_protocol,
    saturation_protocol,
    speed_limit_check,
    theta_from_overlap,
)
from app.core.spectral import (
    HermitianOperator,
    QuantumState,
    SpaceLayout,
    extend_to_layout,
    random_hermitian,
    random_state,
    random_unitary,
)
from tests.conftest import qubit

QUBIT = SpaceLayout(2, 0, 1)


def _dwells(layout, dwells, controls=None):
    n = layout.total_dim
    controls = controls or [np.eye(n)] * len(dwells)
    return tuple(ProtocolStep(t, u) for t, u in zip(dwells, controls))


class TestRunProtocol:
    def test_opposite_fields_overlap_is_cos_2t(self, sz):
        proto = DiscriminationProtocol(QUBIT, qubit([1, 1]), _dwells(QUBIT, [0.3]))
        traj = run_protocol(proto, sz, -sz)
        assert traj.final_overlap == pytest.approx(math.cos(0.6), abs=1e-12)
        assert traj.final_theta == pytest.approx(0.6, abs=1e-12)
        assert np.allclose(traj.times, [0.0, 0.3])

    def test_constant_shift_with_nobox_branch(self):
        layout = SpaceLayout(1, 1, 1)
        initial = QuantumState.normalized(layout, [1, 1])
        proto = DiscriminationProtocol(layout, initial, _dwells(layout, [math.pi]))
        traj = run_protocol(proto, HermitianOperator([[1.0]]), HermitianOperator([[0.0]]))
        assert abs(traj.final_overlap) <= 1e-12
        assert traj.final_theta == pytest.approx(math.pi / 2, abs=1e-9)

    def test_zero_dwell_never_separates(self, rng):
        for _ in range(20):
            layout = SpaceLayout(3, 1, 2)
            controls = [random_unitary(layout.total_dim, rng) for _ in range(4)]
            proto = DiscriminationProtocol(layout, random_state(layout, rng), _dwells(layout, [0] * 4, controls))
            traj = run_protocol(proto, random_hermitian(3, rng), random_hermitian(3, rng))
            assert np.max(np.abs(np.abs(traj.overlaps) - 1)) <= 1e-12
            assert np.max(traj.thetas) <= 1e-12

    def test_control_does_not_move_overlap(self, rng, caplog):
        layout = SpaceLayout(3, 1, 1)
        controls = [np.eye(4), random_unitary(4, rng)]
        proto = DiscriminationProtocol(layout, random_state(layout, rng), _dwells(layout, [0.4, 0.0], controls))
        with caplog.at_level(logging.WARNING, logger="app.core.protocol"):
            traj = run_protocol(proto, random_hermitian(3, rng), random_hermitian(3, rng))
        assert abs(traj.overlaps[2] - traj.overlaps[1]) <= 1e-12
        assert "controls moved the overlap" not in caplog.text

    def test_dimension_checks(self, sz):
        with pytest.raises(DimensionMismatchError):
            DiscriminationProtocol(SpaceLayout(3), qubit([1, 0]), ())
        with pytest.raises(DimensionMismatchError):
            DiscriminationProtocol(QUBIT, qubit([1, 0]), (ProtocolStep(0.1, np.eye(3)),))
        proto = DiscriminationProtocol(QUBIT, qubit([1, 0]), ())
        with pytest.raises(DimensionMismatchError):
            run_protocol(proto, sz, HermitianOperator.zeros(3))

    def test_step_validation(self):
        with pytest.raises(DomainError):
            ProtocolStep(-0.1, np.eye(2))
        with pytest.raises(DomainError):
            ProtocolStep(0.1, np.array([[1, 1], [0, 1]]))

    def test_empty_protocol(self, sz):
        traj = run_protocol(DiscriminationProtocol(QUBIT, qubit([1, 1]), ()), sz, -sz)
        assert traj.final_theta <= 1e-12
        assert speed_limit_check(traj, 4.0) == 0.0


class TestPairAngle:
    def test_examples(self):
        assert theta_from_overlap(1.0) == 0
        assert theta_from_overlap(0.0) == pytest.approx(math.pi / 2)
        assert theta_from_overlap(1 + 1e-15) == 0
        e0, e1 = np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)
        assert pair_angle(e0, e0) == 0
        assert pair_angle(e0, 1j * e1) == pytest.approx(math.pi / 2)
        assert pair_angle(e0, (e0 + e1) / math.sqrt(2)) == pytest.approx(math.pi / 4, abs=1e-14)


class TestDecomposePair:
    def test_identical(self):
        pair = decompose_pair(qubit([1, 0]), qubit([1, 0]))
        assert pair.theta <= 1e-12
        assert abs(pair.psi_par.inner(pair.psi_perp)) <= 1e-12

    def test_orthogonal(self):
        assert decompose_pair(qubit([1, 0]), qubit([0, 1])).theta == pytest.approx(math.pi / 2)

    def test_known_overlap(self):
        pair = decompose_pair(qubit([1, 0]), qubit([0.6, 0.8]))
        assert pair.theta == pytest.approx(math.acos(0.6), abs=1e-12)
        assert pair.chi == pytest.approx(0.0, abs=1e-15)

    def test_one_dimensional_space(self):
        layout = SpaceLayout(1)
        psi = QuantumState(layout, [1.0])
        with pytest.raises(DomainError):
            decompose_pair(psi, psi)

    def test_random_pairs(self, rng):
        for _ in range(1000):
            layout = SpaceLayout(int(rng.integers(2, 7)))
            psi1, psi2 = random_state(layout, rng), random_state(layout, rng)
            pair = decompose_pair(psi1, psi2)
            r1, r2 = pair.reconstruct()
            assert np.max(np.abs(r1 - psi1.amplitudes)) <= 1e-9
            assert np.max(np.abs(r2 - psi2.amplitudes)) <= 1e-9
            assert abs(pair.psi_par.inner(pair.psi_perp)) <= 1e-9
            assert abs(math.cos(pair.theta) - abs(psi1.inner(psi2))) <= 1e-9


class TestDiscriminationMeasurement:
    def test_orthogonal_states_are_certain(self):
        basis = discrimination_measurement(qubit([1, 0]), qubit([0, 1]))
        assert basis.error_probability(qubit([1, 0]), qubit([0, 1])) == pytest.approx(0, abs=1e-15)

    def test_identical_states_are_a_coin_flip(self):
        psi = qubit([0.6, 0.8j])
        basis = discrimination_measurement(psi, psi)
        assert basis.error_probability(psi, psi) == pytest.approx(0.5, abs=1e-12)

    def test_quarter_angle(self):
        psi1, psi2 = qubit([1, 0]), qubit([1, 1])
        basis = discrimination_measurement(psi1, psi2)
        assert basis.error_probability(psi1, psi2) == pytest.approx((1 - math.sqrt(0.5)) / 2, abs=1e-12)
        assert basis.error_probability(psi1, psi2) == pytest.approx(0.1464466, abs=1e-6)

    def test_outcomes_sum_to_one_in_span(self, rng):
        layout = SpaceLayout(4)
        psi1, psi2 = random_state(layout, rng), random_state(layout, rng)
        basis = discrimination_measurement(psi1, psi2)
        assert sum(basis.probabilities(psi1)) == pytest.approx(1.0, abs=1e-12)
        assert basis.error_probability(psi1, psi2) <= 0.5


class TestSpeedLimit:
    def test_saturated_by_opposite_fields(self, sz):
        Hd = extend_to_layout(sz - (-sz), QUBIT)
        proto = DiscriminationProtocol(QUBIT, optimal_probe(Hd, QUBIT), _dwells(QUBIT, [0.05] * 10))
        traj = run_protocol(proto, sz, -sz)
        assert np.allclose(np.diff(traj.thetas), 2.0 * 0.05, atol=1e-8)
        assert abs(speed_limit_check(traj, 4.0)) <= 1e-8
        assert abs(integrated_speed_limit(traj, 4.0)) <= 1e-8

    def test_random_protocols_obey_the_limit(self, rng):
        for _ in range(1000):
            box = int(rng.integers(2, 7))
            layout = SpaceLayout(box, int(rng.integers(0, 2)), int(rng.integers(1, 3)))
            H1, H2 = random_hermitian(box, rng), random_hermitian(box, rng)
            n_steps = int(rng.integers(1, 6))
            controls = [random_unitary(layout.total_dim, rng) for _ in range(n_steps)]
            dwells = rng.uniform(0, 0.5, size=n_steps)
            proto = DiscriminationProtocol(layout, random_state(layout, rng), _dwells(layout, dwells, controls))
            traj = run_protocol(proto, H1, H2)
            d0 = dist0(H1, H2)
            assert speed_limit_check(traj, d0) <= 1e-6
            assert integrated_speed_limit(traj, d0) <= 1e-6


class TestOptimalProbe:
    def test_pauli_x(self, sx):
        probe = optimal_probe(sx, QUBIT)
        assert abs(probe.amplitudes[0]) == pytest.approx(1.0, abs=1e-12)

    def test_box_extension_uses_nobox(self):
        layout = SpaceLayout(2, 1, 1)
        probe = optimal_probe(extend_to_layout(HermitianOperator.identity(2), layout), layout)
        assert abs(probe.amplitudes[layout.nobox_index(0)]) == pytest.approx(1 / math.sqrt(2), abs=1e-12)

    def test_signed_difference_stays_in_box(self, sz):
        layout = SpaceLayout(2, 1, 1)
        probe = optimal_probe(extend_to_layout(sz * 2, layout), layout)
        assert abs(probe.amplitudes[2]) <= 1e-12
        assert np.allclose(np.abs(probe.amplitudes[:2]), 1 / math.sqrt(2))

    def test_degenerate_difference(self):
        with pytest.raises(DomainError):
            optimal_probe(HermitianOperator.zeros(2), QUBIT)


class TestSaturationProtocol:
    layout = SpaceLayout(2, 1, 1)

    def test_commuting_pair_single_step(self, sz):
        proto = saturation_protocol(sz, -sz, QUBIT, N=1)
        assert proto.total_time == pytest.approx(math.pi / 4)
        assert abs(run_protocol(proto, sz, -sz).final_overlap) <= 1e-12

    @pytest.mark.parametrize("nu", [0.0, 0.5])
    @pytest.mark.parametrize("N, tol", [(1000, 1e-2), (10000, 1e-3)])
    def test_non_commuting_pair(self, sx, sz, N, tol, nu):
        proto = saturation_protocol(sx, sz, self.layout, N=N, nu=nu)
        assert proto.total_time == pytest.approx(math.pi / (2 * math.sqrt(2)))
        traj = run_protocol(proto, sx, sz)
        assert abs(traj.final_overlap) <= tol

    def _angle_errors(self, sx, sz, ns, nu):
        errors = []
        for n in ns:
            traj = run_protocol(saturation_protocol(sx, sz, self.layout, N=int(n), nu=nu), sx, sz)
            errors.append(max(math.pi / 2 - traj.final_theta, 1e-15))
        return np.array(errors), traj

    def test_error_is_first_order_with_half_nu(self, sx, sz):
        ns = np.array([10, 100, 1000, 10000])
        errors, last = self._angle_errors(sx, sz, ns, nu=0.5)
        slope = np.polyfit(np.log(ns), np.log(errors), 1)[0]
        assert abs(slope + 1) <= 0.1
        assert abs(last.final_overlap) <= 1e-3

    def test_zero_nu_cancels_first_order_error(self, sx, sz):
        ns = np.array([10, 100, 1000, 10000])
        errors, _ = self._angle_errors(sx, sz, ns, nu=0.0)
        slope = np.polyfit(np.log(ns), np.log(errors), 1)[0]
        assert slope <= -1.5
        assert np.max(ns * errors) <= 1

    def test_half_nu_freezes_second_hypothesis(self, sx, sz):
        proto = saturation_protocol(sx, sz, self.layout, N=1000, nu=0.5)
        traj = run_protocol(proto, sx, sz)
        assert traj.final_states[1].fidelity(proto.initial) >= 1 - 1e-2
        assert abs(traj.final_overlap) <= 1e-2

    def test_explicit_duration(self, sz):
        proto = saturation_protocol(sz, -sz, QUBIT, N=4, duration=0.2)
        assert proto.total_time == pytest.approx(0.2)
        assert run_protocol(proto, sz, -sz).final_theta == pytest.approx(0.4, abs=1e-12)

    def test_rejects_bad_input(self, sz):
        with pytest.raises(DomainError):
            saturation_protocol(sz, -sz, QUBIT, N=0)
        with pytest.raises(IndistinguishableError):
            saturation_protocol(sz, sz, QUBIT, N=10)

    def test_warns_without_nobox_branch(self, caplog):
        H1, H2 = HermitianOperator.diagonal([3, 1]), HermitianOperator.zeros(2)
        with caplog.at_level(logging.WARNING, logger="app.core.protocol"):
            proto = saturation_protocol(H1, H2, QUBIT, N=1)
        assert "no no-box branch" in caplog.text
        assert proto.total_time == pytest.approx(math.pi / 2)


class TestScheduleProtocol:
    def test_constant_segment_reaches_orthogonality(self, sz):
        schedule = HamiltonianSchedule.from_triples([(math.pi / 4, sz, -sz)])
        probe = optimal_probe(extend_to_layout(sz * 2, QUBIT), QUBIT)
        traj = run_schedule_protocol(schedule, QUBIT, probe, substeps=5)
        assert traj.final_theta == pytest.approx(math.pi / 2, abs=1e-9)
        assert len(traj.times) == 6

    def test_short_schedules_never_separate(self, rng):
        for _ in range(200):
            box = int(rng.integers(2, 5))
            layout = SpaceLayout(box, 1, 1)
            pairs = [(random_hermitian(box, rng), random_hermitian(box, rng)) for _ in range(int(rng.integers(1, 4)))]
            raw = rng.uniform(0.1, 1.0, size=len(pairs))
            integral = sum(t * dist0(a, b) for t, (a, b) in zip(raw, pairs))
            scale = (math.pi - 0.02) / integral * rng.uniform(0.2, 1.0)
            schedule = HamiltonianSchedule.from_triples([(t * scale, a, b) for t, (a, b) in zip(raw, pairs)])
            controls = [random_unitary(layout.total_dim, rng) for _ in pairs]
            traj = run_schedule_protocol(schedule, layout, random_state(layout, rng), controls=controls)
            assert traj.final_theta < math.pi / 2 - 1e-3

    def test_control_count_checked(self, sz):
        schedule = HamiltonianSchedule.from_triples([(0.1, sz, -sz)])
        with pytest.raises(DomainError):
            run_schedule_protocol(schedule, QUBIT, qubit([1, 0]), controls=[], substeps=1)
        with pytest.raises(DomainError):
            run_schedule_protocol(schedule, QUBIT, qubit([1, 0]), substeps=0)


class TestFirstOrthogonality:
    def test_opposite_fields(self, sz):
        result = first_orthogonality_time(sz, -sz, QUBIT, qubit([1, 1]))
        assert result.time == pytest.approx(math.pi / 4, abs=1e-9)
        assert result.overlap_magnitude <= 1e-9

    def test_never_orthogonal(self, sz):
        with pytest.raises(DomainError):
            first_orthogonality_time(sz, -sz, QUBIT, qubit([1, 0]))
