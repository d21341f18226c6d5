"""The D0 norm and distance on Hamiltonians and the discrimination-time bounds."""

import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

from app.core.errors import DimensionMismatchError, DomainError, IndistinguishableError
from app.core.spectral import HermitianOperator, add_ancilla_hamiltonian, eig_hermitian

logger = logging.getLogger(__name__)

ZERO_DISTANCE_TOL = 1e-12
BOUND_TOL = 1e-9


def norm0(H: HermitianOperator) -> float:
    """max{E_max - E_min, |E_max|, |E_min|}."""
    es = eig_hermitian(H)
    return max(es.e_max - es.e_min, abs(es.e_max), abs(es.e_min))


def spread(H: HermitianOperator) -> float:
    """E_max - E_min, the distance available without an out-of-box branch."""
    es = eig_hermitian(H)
    return es.e_max - es.e_min


def dist0(H1: HermitianOperator, H2: HermitianOperator) -> float:
    if H1.dim != H2.dim:
        raise DimensionMismatchError(f"cannot compare operators of dims {H1.dim} and {H2.dim}")
    # norm0(M) == norm0(-M); a canonical operand order makes the result bitwise symmetric
    if H1.entries.tobytes() > H2.entries.tobytes():
        H1, H2 = H2, H1
    return norm0(H1 - H2)


def _is_zero_distance(d: float, H1: HermitianOperator, H2: HermitianOperator) -> bool:
    scale = max(1.0, H1.max_abs_entry(), H2.max_abs_entry())
    return d <= ZERO_DISTANCE_TOL * scale


def discrimination_distance(H1: HermitianOperator, H2: HermitianOperator, use_box_extension: bool = True) -> float:
    if H1.dim != H2.dim:
        raise DimensionMismatchError(f"cannot compare operators of dims {H1.dim} and {H2.dim}")
    return dist0(H1, H2) if use_box_extension else spread(H1 - H2)


def min_discrimination_time(H1: HermitianOperator, H2: HermitianOperator, use_box_extension: bool = True) -> float:
    """pi / D, the shortest time after which H1 and H2 can be told apart with certainty."""
    d = discrimination_distance(H1, H2, use_box_extension)
    if _is_zero_distance(d, H1, H2):
        detail = "D0 = 0" if use_box_extension else "spread of H1 - H2 is 0 without the box extension"
        raise IndistinguishableError(detail)
    return math.pi / d


@dataclass(frozen=True, eq=False)
class ScheduleSegment:
    duration: float
    H1: HermitianOperator
    H2: HermitianOperator


@dataclass(frozen=True, eq=False)
class HamiltonianSchedule:
    segments: Tuple[ScheduleSegment, ...]

    def __post_init__(self) -> None:
        segments = tuple(self.segments)
        if not segments:
            raise DomainError("schedule must have at least one segment")
        dim = segments[0].H1.dim
        for k, seg in enumerate(segments):
            if seg.duration <= 0:
                raise DomainError(f"segment {k} has non-positive duration {seg.duration}")
            if seg.H1.dim != dim or seg.H2.dim != dim:
                raise DimensionMismatchError(f"segment {k} operators are not all of dim {dim}")
        object.__setattr__(self, "segments", segments)

    @classmethod
    def from_triples(cls, triples: Sequence[Tuple[float, HermitianOperator, HermitianOperator]]) -> "HamiltonianSchedule":
        return cls(tuple(ScheduleSegment(float(d), h1, h2) for d, h1, h2 in triples))

    @property
    def dim(self) -> int:
        return self.segments[0].H1.dim

    @property
    def total_duration(self) -> float:
        return sum(seg.duration for seg in self.segments)


@dataclass(frozen=True)
class TimeDependentBound:
    integral: float
    certain_discrimination_possible: bool


def time_dependent_bound(schedule: HamiltonianSchedule) -> TimeDependentBound:
    integral = sum(seg.duration * dist0(seg.H1, seg.H2) for seg in schedule.segments)
    possible = integral >= math.pi - BOUND_TOL
    logger.debug("schedule integral of D0 dt = %.12g (pi = %.12g)", integral, math.pi)
    return TimeDependentBound(integral=integral, certain_discrimination_possible=possible)


def ancilla_invariance_check(
    H1: HermitianOperator, H2: HermitianOperator, H_anc: HermitianOperator
) -> Tuple[float, float]:
    d_base = dist0(H1, H2)
    d_composite = dist0(add_ancilla_hamiltonian(H1, H_anc), add_ancilla_hamiltonian(H2, H_anc))
    return d_base, d_composite
