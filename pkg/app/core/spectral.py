"""Dense Hermitian linear algebra on small Hilbert spaces.

Energies are in units with hbar = 1. All values are immutable; arrays held
by the dataclasses below are flagged read-only after validation.
"""

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from app.core.errors import DimensionMismatchError, DomainError, NormalizationError, NotHermitianError

HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-10
UNITARY_TOL = 1e-10
DEGENERACY_TOL = 1e-9


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    entries: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise DomainError(f"operator must be a non-empty square matrix, got shape {m.shape}")
        scale = max(1.0, float(np.max(np.abs(m))))
        asym = float(np.max(np.abs(m - m.conj().T)))
        if asym > HERMITIAN_TOL * scale:
            raise NotHermitianError(f"operator is not Hermitian (max |H - H^dag| = {asym:.3e})")
        object.__setattr__(self, "entries", _frozen((m + m.conj().T) / 2))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def zeros(cls, dim: int) -> "HermitianOperator":
        return cls(np.zeros((dim, dim), dtype=complex))

    @classmethod
    def identity(cls, dim: int) -> "HermitianOperator":
        return cls(np.eye(dim, dtype=complex))

    @classmethod
    def diagonal(cls, values: Iterable[float]) -> "HermitianOperator":
        return cls(np.diag(np.asarray(list(values), dtype=float)).astype(complex))

    def _check_same_dim(self, other: "HermitianOperator") -> None:
        if self.dim != other.dim:
            raise DimensionMismatchError(f"operator dims differ: {self.dim} vs {other.dim}")

    def __add__(self, other: "HermitianOperator") -> "HermitianOperator":
        self._check_same_dim(other)
        return HermitianOperator(self.entries + other.entries)

    def __sub__(self, other: "HermitianOperator") -> "HermitianOperator":
        self._check_same_dim(other)
        return HermitianOperator(self.entries - other.entries)

    def __mul__(self, scalar: float) -> "HermitianOperator":
        if isinstance(scalar, complex) and scalar.imag != 0:
            raise NotHermitianError("scaling by a complex number breaks Hermiticity")
        return HermitianOperator(self.entries * float(np.real(scalar)))

    __rmul__ = __mul__

    def __neg__(self) -> "HermitianOperator":
        return HermitianOperator(-self.entries)

    def shifted(self, energy: float) -> "HermitianOperator":
        """H + energy * I."""
        return HermitianOperator(self.entries + energy * np.eye(self.dim))

    def max_abs_entry(self) -> float:
        return float(np.max(np.abs(self.entries)))


@dataclass(frozen=True, eq=False)
class EigenSystem:
    values: np.ndarray
    vectors: np.ndarray

    @property
    def min_index(self) -> int:
        return 0

    @property
    def max_index(self) -> int:
        # lowest index among the eigenvalues tied with the largest one
        top = self.values[-1]
        scale = max(1.0, abs(float(top)))
        return int(np.argmax(self.values >= top - DEGENERACY_TOL * scale))

    @property
    def e_min(self) -> float:
        return float(self.values[0])

    @property
    def e_max(self) -> float:
        return float(self.values[-1])

    def vector(self, index: int) -> np.ndarray:
        return self.vectors[:, index]


@dataclass(frozen=True)
class SpaceLayout:
    box_dim: int
    nobox_dim: int = 0
    ancilla_dim: int = 1

    def __post_init__(self) -> None:
        if self.box_dim < 1:
            raise DomainError(f"box_dim must be >= 1, got {self.box_dim}")
        if self.nobox_dim < 0:
            raise DomainError(f"nobox_dim must be >= 0, got {self.nobox_dim}")
        if self.ancilla_dim < 1:
            raise DomainError(f"ancilla_dim must be >= 1, got {self.ancilla_dim}")

    @property
    def system_dim(self) -> int:
        return self.box_dim + self.nobox_dim

    @property
    def total_dim(self) -> int:
        return self.system_dim * self.ancilla_dim

    def box_index(self, i: int, ancilla: int = 0) -> int:
        if not 0 <= i < self.box_dim:
            raise DomainError(f"box index {i} out of range")
        return i * self.ancilla_dim + ancilla

    def nobox_index(self, j: int, ancilla: int = 0) -> int:
        if not 0 <= j < self.nobox_dim:
            raise DomainError(f"no-box index {j} out of range")
        return (self.box_dim + j) * self.ancilla_dim + ancilla


@dataclass(frozen=True, eq=False)
class QuantumState:
    layout: SpaceLayout
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if v.shape[0] != self.layout.total_dim:
            raise DimensionMismatchError(
                f"state has {v.shape[0]} amplitudes, layout needs {self.layout.total_dim}"
            )
        norm = float(np.sum(np.abs(v) ** 2))
        if abs(norm - 1.0) > NORM_TOL:
            raise NormalizationError(f"state norm^2 is {norm:.12f}, expected 1")
        object.__setattr__(self, "amplitudes", _frozen(v))

    @classmethod
    def normalized(cls, layout: SpaceLayout, amplitudes: Iterable[complex]) -> "QuantumState":
        v = np.array(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise NormalizationError("cannot normalize the zero vector")
        return cls(layout, v / norm)

    @classmethod
    def basis(cls, layout: SpaceLayout, index: int) -> "QuantumState":
        v = np.zeros(layout.total_dim, dtype=complex)
        v[index] = 1.0
        return cls(layout, v)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def inner(self, other: "QuantumState") -> complex:
        """<self|other>."""
        if self.dim != other.dim:
            raise DimensionMismatchError(f"state dims differ: {self.dim} vs {other.dim}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "QuantumState") -> float:
        return abs(self.inner(other)) ** 2


def is_unitary(matrix: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) <= tol)


def eig_hermitian(H: HermitianOperator) -> EigenSystem:
    """Ascending eigenvalues with eigenvectors as columns.

    Each eigenvector is phase-fixed so that its first component of
    magnitude above 1e-12 is real and positive; this keeps probe states
    built from eigenvectors reproducible across LAPACK builds.
    """
    values, vectors = np.linalg.eigh(H.entries)
    vectors = np.array(vectors, dtype=complex)
    for k in range(vectors.shape[1]):
        column = vectors[:, k]
        lead = int(np.argmax(np.abs(column) > 1e-12))
        vectors[:, k] = column * (abs(column[lead]) / column[lead])
    return EigenSystem(values=_frozen(np.array(values, dtype=float)), vectors=_frozen(vectors))


def propagator_from_eigensystem(es: EigenSystem, t: float) -> np.ndarray:
    phases = np.exp(-1j * es.values * t)
    return (es.vectors * phases) @ es.vectors.conj().T


def propagator(H: HermitianOperator, t: float) -> np.ndarray:
    """exp(-iHt) through the eigendecomposition of H."""
    return propagator_from_eigensystem(eig_hermitian(H), t)


def evolve(H: HermitianOperator, t: float, psi: QuantumState) -> QuantumState:
    if H.dim != psi.dim:
        raise DimensionMismatchError(f"operator dim {H.dim} does not act on state dim {psi.dim}")
    if t == 0:
        return psi
    return QuantumState(psi.layout, propagator(H, t) @ psi.amplitudes)


def extend_to_layout(H_box: HermitianOperator, layout: SpaceLayout) -> HermitianOperator:
    """(H_box + 0_nobox) tensored with the ancilla identity."""
    if H_box.dim != layout.box_dim:
        raise DimensionMismatchError(f"operator dim {H_box.dim} != layout box_dim {layout.box_dim}")
    system = np.zeros((layout.system_dim, layout.system_dim), dtype=complex)
    system[: layout.box_dim, : layout.box_dim] = H_box.entries
    return HermitianOperator(np.kron(system, np.eye(layout.ancilla_dim)))


def add_ancilla_hamiltonian(H_sys: HermitianOperator, H_anc: HermitianOperator) -> HermitianOperator:
    """H_sys x I + I x H_anc on the composite space."""
    return HermitianOperator(
        np.kron(H_sys.entries, np.eye(H_anc.dim)) + np.kron(np.eye(H_sys.dim), H_anc.entries)
    )


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> HermitianOperator:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return HermitianOperator(scale * (a + a.conj().T) / 2)


def random_state(layout: SpaceLayout, rng: np.random.Generator) -> QuantumState:
    """Haar-uniform pure state."""
    v = rng.normal(size=layout.total_dim) + 1j * rng.normal(size=layout.total_dim)
    return QuantumState.normalized(layout, v)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def pauli(name: str) -> HermitianOperator:
    matrices = {
        "x": [[0, 1], [1, 0]],
        "y": [[0, -1j], [1j, 0]],
        "z": [[1, 0], [0, -1]],
    }
    return HermitianOperator(np.array(matrices[name], dtype=complex))
