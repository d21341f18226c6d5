"""Discrimination protocols: dwell under the unknown Hamiltonian, then a control unitary.

Both hypotheses start from the same state and receive the same controls, so
the controls cancel in <psi1|psi2>; only the dwell times move the pair angle.
"""

import cmath
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from app.core.errors import DimensionMismatchError, DomainError, IndistinguishableError
from app.core.hmetric import HamiltonianSchedule, dist0
from app.core.spectral import (
    EigenSystem,
    HermitianOperator,
    QuantumState,
    SpaceLayout,
    eig_hermitian,
    extend_to_layout,
    is_unitary,
    propagator,
    propagator_from_eigensystem,
)

logger = logging.getLogger(__name__)

CONTROL_CANCEL_TOL = 1e-10
ORTHOGONALITY_SCAN_TOL = 0.05
PARALLEL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ProtocolStep:
    dwell: float
    control: np.ndarray

    def __post_init__(self) -> None:
        if self.dwell < 0:
            raise DomainError(f"dwell must be non-negative, got {self.dwell}")
        u = np.array(self.control, dtype=complex)
        if not is_unitary(u):
            raise DomainError("control is not unitary within 1e-10")
        u.setflags(write=False)
        object.__setattr__(self, "dwell", float(self.dwell))
        object.__setattr__(self, "control", u)


@dataclass(frozen=True, eq=False)
class DiscriminationProtocol:
    layout: SpaceLayout
    initial: QuantumState
    steps: Tuple[ProtocolStep, ...]

    def __post_init__(self) -> None:
        if self.initial.dim != self.layout.total_dim:
            raise DimensionMismatchError(
                f"initial state dim {self.initial.dim} != layout total_dim {self.layout.total_dim}"
            )
        steps = tuple(self.steps)
        for k, step in enumerate(steps):
            if step.control.shape[0] != self.layout.total_dim:
                raise DimensionMismatchError(f"control {k} has dim {step.control.shape[0]}")
        object.__setattr__(self, "steps", steps)

    @property
    def total_time(self) -> float:
        return sum(step.dwell for step in self.steps)


@dataclass(frozen=True, eq=False)
class PairDecomposition:
    theta: float
    chi: float
    psi_par: QuantumState
    psi_perp: QuantumState

    def reconstruct(self) -> Tuple[np.ndarray, np.ndarray]:
        c, s = math.cos(self.theta / 2), math.sin(self.theta / 2)
        par, perp = self.psi_par.amplitudes, self.psi_perp.amplitudes
        psi1 = cmath.exp(0.5j * self.chi) * (c * par + s * perp)
        psi2 = cmath.exp(-0.5j * self.chi) * (c * par - s * perp)
        return psi1, psi2


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    overlaps: np.ndarray
    thetas: np.ndarray
    final_states: Tuple[QuantumState, QuantumState]

    @property
    def dwells(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def final_overlap(self) -> complex:
        return complex(self.overlaps[-1])

    @property
    def final_theta(self) -> float:
        return float(self.thetas[-1])


@dataclass(frozen=True, eq=False)
class MeasurementBasis:
    plus: QuantumState
    minus: QuantumState

    def probabilities(self, state: QuantumState) -> Tuple[float, float]:
        """Born probabilities of the two outcomes; the remainder lies outside their span."""
        return self.plus.fidelity(state), self.minus.fidelity(state)

    def error_probability(self, psi1: QuantumState, psi2: QuantumState) -> float:
        """Equal-prior error when outcome plus is read as psi1 and minus as psi2."""
        return 0.5 * (self.probabilities(psi1)[1] + self.probabilities(psi2)[0])


@dataclass(frozen=True)
class OrthogonalityResult:
    time: float
    overlap_magnitude: float


def theta_from_overlap(overlap: complex) -> float:
    return math.acos(min(1.0, max(0.0, abs(overlap))))


def pair_angle(psi1: np.ndarray, psi2: np.ndarray) -> float:
    """arccos|<psi1|psi2>| via a half-angle form that stays exact for identical states."""
    ov = np.vdot(psi1, psi2)
    mag = abs(ov)
    aligned = psi2 * (np.conj(ov) / mag) if mag > 0 else psi2
    return 2.0 * math.atan2(float(np.linalg.norm(psi1 - aligned)), float(np.linalg.norm(psi1 + aligned)))


def _simulate(
    layout: SpaceLayout,
    initial: QuantumState,
    moves: Iterable[Tuple[float, Optional[np.ndarray], Optional[np.ndarray], Optional[np.ndarray]]],
) -> Trajectory:
    """Each move is (dwell, U1, U2, control); None means identity."""
    psi1 = initial.amplitudes.copy()
    psi2 = initial.amplitudes.copy()
    t = 0.0
    times: List[float] = [0.0]
    overlaps: List[complex] = [complex(np.vdot(psi1, psi2))]
    thetas: List[float] = [pair_angle(psi1, psi2)]
    worst_control_drift = 0.0

    for dwell, u1, u2, control in moves:
        if u1 is not None:
            psi1 = u1 @ psi1
            psi2 = u2 @ psi2
        if control is not None:
            before = np.vdot(psi1, psi2)
            psi1 = control @ psi1
            psi2 = control @ psi2
            worst_control_drift = max(worst_control_drift, abs(np.vdot(psi1, psi2) - before))
        t += dwell
        times.append(t)
        overlaps.append(complex(np.vdot(psi1, psi2)))
        thetas.append(pair_angle(psi1, psi2))

    if worst_control_drift > CONTROL_CANCEL_TOL:
        logger.warning("controls moved the overlap by %.3e (> %.0e)", worst_control_drift, CONTROL_CANCEL_TOL)

    return Trajectory(
        times=np.array(times),
        overlaps=np.array(overlaps),
        thetas=np.array(thetas),
        final_states=(QuantumState(layout, psi1), QuantumState(layout, psi2)),
    )


class _PropagatorCache:
    def __init__(self, es1: EigenSystem, es2: EigenSystem):
        self.es1 = es1
        self.es2 = es2
        self._cache: Dict[float, Tuple[np.ndarray, np.ndarray]] = {}

    def get(self, dwell: float) -> Tuple[Optional[np.ndarray], Optional[np.ndarray]]:
        if dwell == 0:
            return None, None
        if dwell not in self._cache:
            self._cache[dwell] = (
                propagator_from_eigensystem(self.es1, dwell),
                propagator_from_eigensystem(self.es2, dwell),
            )
        return self._cache[dwell]


def run_protocol(
    proto: DiscriminationProtocol, H1_box: HermitianOperator, H2_box: HermitianOperator
) -> Trajectory:
    layout = proto.layout
    if H1_box.dim != layout.box_dim or H2_box.dim != layout.box_dim:
        raise DimensionMismatchError(
            f"Hamiltonian dims ({H1_box.dim}, {H2_box.dim}) != layout box_dim {layout.box_dim}"
        )
    cache = _PropagatorCache(
        eig_hermitian(extend_to_layout(H1_box, layout)),
        eig_hermitian(extend_to_layout(H2_box, layout)),
    )

    def moves():
        for step in proto.steps:
            u1, u2 = cache.get(step.dwell)
            yield step.dwell, u1, u2, step.control

    return _simulate(layout, proto.initial, moves())


def run_schedule_protocol(
    schedule: HamiltonianSchedule,
    layout: SpaceLayout,
    initial: QuantumState,
    controls: Optional[Sequence[np.ndarray]] = None,
    substeps: int = 1,
) -> Trajectory:
    """Piecewise-constant time-dependent pair; each segment is cut into `substeps` dwells."""
    if schedule.dim != layout.box_dim:
        raise DimensionMismatchError(f"schedule dim {schedule.dim} != layout box_dim {layout.box_dim}")
    if substeps < 1:
        raise DomainError(f"substeps must be >= 1, got {substeps}")
    n_moves = len(schedule.segments) * substeps
    if controls is not None:
        if len(controls) != n_moves:
            raise DomainError(f"expected {n_moves} controls, got {len(controls)}")
        for k, u in enumerate(controls):
            if not is_unitary(u) or np.shape(u)[0] != layout.total_dim:
                raise DomainError(f"control {k} is not a unitary on the layout's total space")

    def moves():
        k = 0
        for seg in schedule.segments:
            dwell = seg.duration / substeps
            u1 = propagator(extend_to_layout(seg.H1, layout), dwell)
            u2 = propagator(extend_to_layout(seg.H2, layout), dwell)
            for _ in range(substeps):
                yield dwell, u1, u2, None if controls is None else np.asarray(controls[k], dtype=complex)
                k += 1

    return _simulate(layout, initial, moves())


def decompose_pair(psi1: QuantumState, psi2: QuantumState) -> PairDecomposition:
    ov = psi1.inner(psi2)
    chi = -cmath.phase(ov) if abs(ov) > 0 else 0.0
    a = cmath.exp(-0.5j * chi) * psi1.amplitudes
    b = cmath.exp(0.5j * chi) * psi2.amplitudes
    total, diff = a + b, a - b
    n_total, n_diff = float(np.linalg.norm(total)), float(np.linalg.norm(diff))
    theta = 2.0 * math.atan2(n_diff, n_total)

    par = total / n_total
    if n_diff > PARALLEL_TOL:
        perp = diff / n_diff
    else:
        perp = _orthogonal_completion(par)

    layout = psi1.layout
    return PairDecomposition(
        theta=theta,
        chi=chi,
        psi_par=QuantumState.normalized(layout, par),
        psi_perp=QuantumState.normalized(layout, perp),
    )


def _orthogonal_completion(par: np.ndarray) -> np.ndarray:
    """Gram-Schmidt of the first basis vector not parallel to `par`."""
    for k in range(par.shape[0]):
        c = np.conj(par[k])
        if abs(c) < 1 - 1e-9:
            v = -c * par
            v[k] += 1.0
            return v / np.linalg.norm(v)
    raise DomainError("no orthogonal complement in a one-dimensional space")


def discrimination_measurement(psi1: QuantumState, psi2: QuantumState) -> MeasurementBasis:
    """Basis (psi_par +/- psi_perp)/sqrt(2); outcome plus favours psi1."""
    pair = decompose_pair(psi1, psi2)
    par, perp = pair.psi_par.amplitudes, pair.psi_perp.amplitudes
    layout = psi1.layout
    return MeasurementBasis(
        plus=QuantumState.normalized(layout, (par + perp) / math.sqrt(2)),
        minus=QuantumState.normalized(layout, (par - perp) / math.sqrt(2)),
    )


def speed_limit_check(traj: Trajectory, D0: float) -> float:
    """Largest per-step excess of the theta increment over D0/2 times the dwell."""
    if traj.thetas.shape[0] < 2:
        return 0.0
    return float(np.max(np.diff(traj.thetas) - 0.5 * D0 * traj.dwells))


def integrated_speed_limit(traj: Trajectory, D0: float) -> float:
    return float(traj.thetas[-1] - traj.thetas[0] - 0.5 * D0 * (traj.times[-1] - traj.times[0]))


def optimal_probe(Hd_extended: HermitianOperator, layout: SpaceLayout) -> QuantumState:
    """Equal-weight superposition of the extremal eigenvectors of the extended difference."""
    if Hd_extended.dim != layout.total_dim:
        raise DimensionMismatchError(f"operator dim {Hd_extended.dim} != layout total_dim {layout.total_dim}")
    es = eig_hermitian(Hd_extended)
    if es.e_max - es.e_min <= 1e-12 * max(1.0, Hd_extended.max_abs_entry()):
        raise DomainError("difference operator is fully degenerate; no probe separates the pair")
    return QuantumState.normalized(layout, es.vector(es.max_index) + es.vector(es.min_index))


def saturation_protocol(
    H1_box: HermitianOperator,
    H2_box: HermitianOperator,
    layout: SpaceLayout,
    N: int,
    nu: float = 0.0,
    duration: Optional[float] = None,
) -> DiscriminationProtocol:
    """Probe on the extremal eigenvectors, N dwells of tau, control exp(-i nu tau Hd) exp(+i H+ tau).

    Without `duration` the protocol runs for T = pi / D, where D is the spread
    of the extended difference (equal to D0 whenever the layout has a no-box
    branch).
    """
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    H1t = extend_to_layout(H1_box, layout)
    H2t = extend_to_layout(H2_box, layout)
    Hd = H1t - H2t
    Hplus = (H1t + H2t) * 0.5
    es_d = eig_hermitian(Hd)
    reach = es_d.e_max - es_d.e_min
    if reach <= 1e-12 * max(1.0, H1_box.max_abs_entry(), H2_box.max_abs_entry()):
        raise IndistinguishableError("extended difference has zero spread")
    d0 = dist0(H1_box, H2_box)
    if reach < d0 * (1 - 1e-9):
        logger.warning(
            "layout %s has no no-box branch: reachable distance %.6g < D0 %.6g", layout, reach, d0
        )

    total = math.pi / reach if duration is None else float(duration)
    if total < 0:
        raise DomainError(f"duration must be non-negative, got {total}")
    tau = total / N
    control = propagator_from_eigensystem(es_d, nu * tau) @ propagator(Hplus, -tau)
    step = ProtocolStep(dwell=tau, control=control)
    logger.debug("saturation protocol: N=%d tau=%.6g nu=%.3g T=%.6g", N, tau, nu, total)
    return DiscriminationProtocol(layout=layout, initial=optimal_probe(Hd, layout), steps=(step,) * N)


def overlap_magnitude_at(
    es1: EigenSystem, es2: EigenSystem, initial: QuantumState, t: float
) -> float:
    psi = initial.amplitudes
    return abs(
        np.vdot(propagator_from_eigensystem(es1, t) @ psi, propagator_from_eigensystem(es2, t) @ psi)
    )


def first_orthogonality_time(
    H1_box: HermitianOperator,
    H2_box: HermitianOperator,
    layout: SpaceLayout,
    initial: QuantumState,
    t_max: Optional[float] = None,
    samples: int = 2001,
) -> OrthogonalityResult:
    """First zero of |<psi1(t)|psi2(t)>| under free evolution, refined by bounded Brent search."""
    es1 = eig_hermitian(extend_to_layout(H1_box, layout))
    es2 = eig_hermitian(extend_to_layout(H2_box, layout))
    if t_max is None:
        d0 = dist0(H1_box, H2_box)
        if d0 == 0:
            raise IndistinguishableError("D0 = 0")
        t_max = 4 * math.pi / d0
    grid = np.linspace(0.0, t_max, samples)
    mags = np.array([overlap_magnitude_at(es1, es2, initial, t) for t in grid])
    for i in range(1, samples - 1):
        if mags[i] <= mags[i - 1] and mags[i] <= mags[i + 1] and mags[i] < ORTHOGONALITY_SCAN_TOL:
            # search in the offset from the bracket start so the relative tolerance stays small
            start = grid[i - 1]
            res = minimize_scalar(
                lambda s: overlap_magnitude_at(es1, es2, initial, start + s),
                bounds=(0.0, grid[i + 1] - start),
                method="bounded",
                options={"xatol": 1e-14},
            )
            return OrthogonalityResult(time=float(start + res.x), overlap_magnitude=float(res.fun))
    raise DomainError(f"no orthogonality found before t = {t_max:.6g}")
