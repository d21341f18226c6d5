import math

import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st
from scipy.linalg import expm
from scipy.optimize import brentq

from app.core.errors import DimensionMismatchError, DomainError, NormalizationError, NotHermitianError
from app.core.spectral import (
    EigenSystem,
    HermitianOperator,
    QuantumState,
    SpaceLayout,
    add_ancilla_hamiltonian,
    eig_hermitian,
    evolve,
    extend_to_layout,
    is_unitary,
    pauli,
    propagator,
    random_hermitian,
    random_state,
    random_unitary,
)
from tests.conftest import qubit


def _char_poly_roots(H: HermitianOperator) -> np.ndarray:
    """Eigenvalues by bracketing sign changes of det(H - lambda I)."""
    bound = float(np.linalg.norm(H.entries)) + 1.0
    grid = np.linspace(-bound, bound, 4001)
    det = lambda lam: float(np.real(np.linalg.det(H.entries - lam * np.eye(H.dim))))
    values = [det(x) for x in grid]
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(brentq(det, a, b, xtol=1e-14))
    return np.array(sorted(roots))


class TestHermitianOperator:
    def test_rejects_non_hermitian(self):
        with pytest.raises(NotHermitianError):
            HermitianOperator([[0, 1], [0, 0]])

    def test_symmetrizes_within_tolerance(self):
        H = HermitianOperator([[1, 1 + 1e-14], [1, 0]])
        assert np.array_equal(H.entries, H.entries.conj().T)

    def test_rejects_empty_and_non_square(self):
        with pytest.raises(DomainError):
            HermitianOperator(np.zeros((2, 3)))
        with pytest.raises(DomainError):
            HermitianOperator(np.zeros((0, 0)))

    def test_entries_are_read_only(self, sz):
        with pytest.raises(ValueError):
            sz.entries[0, 0] = 5

    def test_arithmetic(self, sz, sx):
        assert np.allclose((sz + sx).entries, [[1, 1], [1, -1]])
        assert np.allclose((sz * 3).entries, np.diag([3, -3]))
        assert np.allclose((2 * sz).entries, np.diag([2, -2]))
        assert np.allclose((-sz).entries, np.diag([-1, 1]))
        assert np.allclose(sz.shifted(0.5).entries, np.diag([1.5, -0.5]))
        with pytest.raises(NotHermitianError):
            sz * 1j
        with pytest.raises(DimensionMismatchError):
            sz + HermitianOperator.identity(3)


class TestEigHermitian:
    def test_diagonal(self):
        es = eig_hermitian(HermitianOperator.diagonal([1, -1]))
        assert np.allclose(es.values, [-1, 1])

    def test_pauli_x(self, sx):
        es = eig_hermitian(sx)
        assert np.allclose(es.values, [-1, 1])
        assert abs(np.vdot(es.vector(0), np.array([1, -1]) / math.sqrt(2))) == pytest.approx(1.0, abs=1e-12)
        assert abs(np.vdot(es.vector(1), np.array([1, 1]) / math.sqrt(2))) == pytest.approx(1.0, abs=1e-12)

    def test_matches_characteristic_polynomial_roots(self):
        H = random_hermitian(6, np.random.default_rng(11))
        roots = _char_poly_roots(H)
        assert roots.shape == (6,)
        assert np.max(np.abs(eig_hermitian(H).values - roots)) <= 1e-8

    def test_phase_fixed_leading_component(self, rng):
        es = eig_hermitian(random_hermitian(5, rng))
        for k in range(5):
            v = es.vector(k)
            lead = v[np.argmax(np.abs(v) > 1e-12)]
            assert abs(lead.imag) <= 1e-12 and lead.real > 0

    def test_max_index_prefers_lowest_tied(self):
        es = EigenSystem(values=np.array([0.0, 1.0, 1.0]), vectors=np.eye(3, dtype=complex))
        assert es.max_index == 1
        assert es.min_index == 0

    @seed(7)
    @settings(max_examples=60, deadline=None)
    @given(dim=st.integers(2, 8), key=st.integers(0, 2**32 - 1))
    def test_reconstruction_and_unitarity(self, dim, key):
        H = random_hermitian(dim, np.random.default_rng(key))
        es = eig_hermitian(H)
        V = es.vectors
        assert np.all(np.diff(es.values) >= 0)
        recon = (V * es.values) @ V.conj().T
        assert np.max(np.abs(recon - H.entries)) <= 1e-9 * max(1.0, H.max_abs_entry())
        assert np.max(np.abs(V.conj().T @ V - np.eye(dim))) <= 1e-10


class TestEvolve:
    def test_zero_hamiltonian(self):
        psi = qubit([0.6, 0.8j])
        out = evolve(HermitianOperator.zeros(2), 3.7, psi)
        assert np.allclose(out.amplitudes, psi.amplitudes, atol=1e-14)

    def test_zero_time_is_identity(self, sx):
        psi = qubit([1, 1])
        assert evolve(sx, 0.0, psi) is psi

    def test_precession_about_z(self, sz):
        out = evolve(sz, math.pi / 2, qubit([1, 1]))
        down_x = qubit([1, -1])
        assert out.fidelity(down_x) == pytest.approx(1.0, abs=1e-12)

    def test_rabi_against_expm(self, sx):
        out = evolve(sx, 0.7, qubit([1, 0]))
        assert np.allclose(out.amplitudes, [math.cos(0.7), -1j * math.sin(0.7)], atol=1e-12)
        assert np.allclose(out.amplitudes, expm(-1j * 0.7 * sx.entries) @ [1, 0], atol=1e-12)

    def test_dimension_mismatch(self, sx):
        with pytest.raises(DimensionMismatchError):
            evolve(HermitianOperator.identity(3), 1.0, qubit([1, 0]))

    def test_norm_and_composition_over_random_instances(self, rng):
        for _ in range(1000):
            dim = int(rng.integers(2, 9))
            layout = SpaceLayout(dim)
            H = random_hermitian(dim, rng)
            psi = random_state(layout, rng)
            t1, t2 = rng.uniform(0, 3, size=2)
            once = evolve(H, t1 + t2, psi)
            twice = evolve(H, t2, evolve(H, t1, psi))
            assert abs(np.linalg.norm(once.amplitudes) - 1) <= 1e-9
            assert np.max(np.abs(once.amplitudes - twice.amplitudes)) <= 1e-9

    def test_propagator_is_unitary(self, rng):
        U = propagator(random_hermitian(4, rng), 1.3)
        assert is_unitary(U)


class TestLayouts:
    def test_single_level_box(self):
        H = extend_to_layout(HermitianOperator([[2]]), SpaceLayout(1, 1, 1))
        assert np.array_equal(H.entries, np.diag([2, 0]).astype(complex))

    def test_ancilla_tensor(self, sz):
        H = extend_to_layout(sz, SpaceLayout(2, 0, 2))
        assert np.allclose(H.entries, np.kron(sz.entries, np.eye(2)))
        assert np.allclose(eig_hermitian(H).values, [-1, -1, 1, 1])

    def test_nobox_branch(self, sx):
        H = extend_to_layout(sx, SpaceLayout(2, 1, 1))
        assert np.allclose(eig_hermitian(H).values, [-1, 0, 1])

    def test_mismatch(self, sx):
        with pytest.raises(DimensionMismatchError):
            extend_to_layout(sx, SpaceLayout(3))

    def test_spectrum_property(self, rng):
        for _ in range(50):
            box, nobox, anc = (int(v) for v in rng.integers(1, 4, size=3))
            H = random_hermitian(box, rng)
            ext = eig_hermitian(extend_to_layout(H, SpaceLayout(box, nobox, anc))).values
            expected = np.sort(np.repeat(np.concatenate([eig_hermitian(H).values, np.zeros(nobox)]), anc))
            assert np.allclose(ext, expected, atol=1e-10)

    def test_index_helpers(self):
        layout = SpaceLayout(2, 1, 2)
        assert layout.total_dim == 6
        assert layout.box_index(1, 1) == 3
        assert layout.nobox_index(0, 0) == 4
        with pytest.raises(DomainError):
            layout.nobox_index(1)

    def test_invalid_layout(self):
        with pytest.raises(DomainError):
            SpaceLayout(0)


class TestAncillaHamiltonian:
    def test_zero_ancilla_term(self, sz):
        out = add_ancilla_hamiltonian(sz, HermitianOperator.zeros(2))
        assert np.allclose(out.entries, np.kron(sz.entries, np.eye(2)))

    def test_scalars_add(self):
        out = add_ancilla_hamiltonian(HermitianOperator([[1.5]]), HermitianOperator([[-0.25]]))
        assert out.entries[0, 0] == pytest.approx(1.25)

    def test_pauli_sum_spectrum(self, sz, sx):
        out = add_ancilla_hamiltonian(sz, sx)
        assert np.allclose(eig_hermitian(out).values, [-2, 0, 0, 2], atol=1e-12)


class TestQuantumState:
    def test_norm_enforced(self):
        with pytest.raises(NormalizationError):
            QuantumState(SpaceLayout(2), [1, 1])
        with pytest.raises(NormalizationError):
            QuantumState.normalized(SpaceLayout(2), [0, 0])

    def test_length_enforced(self):
        with pytest.raises(DimensionMismatchError):
            QuantumState(SpaceLayout(2, 1), [1, 0])

    def test_random_unitary(self, rng):
        assert is_unitary(random_unitary(5, rng))

    def test_pauli_names(self):
        assert np.allclose(pauli("y").entries, [[0, -1j], [1j, 0]])
