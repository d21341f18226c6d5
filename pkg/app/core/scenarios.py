"""End-to-end worked examples, each producing a ScenarioResult with its bound and measured values."""

import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from app.core.errors import DomainError, IndistinguishableError
from app.core.hmetric import dist0, min_discrimination_time
from app.core.protocol import (
    DiscriminationProtocol,
    ProtocolStep,
    first_orthogonality_time,
    run_protocol,
)
from app.core.sampling import block_ranges, stream_generator
from app.core.spectral import (
    HermitianOperator,
    QuantumState,
    SpaceLayout,
    evolve,
    extend_to_layout,
    pauli,
)

logger = logging.getLogger(__name__)

SCENARIO_NAMES = ("spin-fields", "phase-box", "farhi-gutmann", "shared-eigenbasis")
SLOPE_TARGET = 0.5
SLOPE_TOL = 0.05


@dataclass
class ScenarioResult:
    name: str
    metrics: Dict[str, float]
    passed: bool
    sweep: List[Dict[str, float]] = field(default_factory=list)


def _expectation(op: HermitianOperator, state: QuantumState) -> float:
    v = state.amplitudes
    return float(np.real(np.vdot(v, op.entries @ v)))


def scenario_spin_fields(muB0: float) -> ScenarioResult:
    if muB0 <= 0:
        raise DomainError(f"muB0 must be positive, got {muB0}")
    H1 = pauli("z") * muB0
    H2 = pauli("z") * -muB0
    layout = SpaceLayout(2, 0, 1)
    up_x = QuantumState.normalized(layout, [1.0, 1.0])

    bound = min_discrimination_time(H1, H2)
    found = first_orthogonality_time(H1, H2, layout, up_x)
    t = found.time
    sigma_y = pauli("y")
    y1 = _expectation(sigma_y, evolve(extend_to_layout(H1, layout), t, up_x))
    y2 = _expectation(sigma_y, evolve(extend_to_layout(H2, layout), t, up_x))
    quoted = math.pi / muB0

    passed = (
        abs(t - bound) <= 1e-9 * max(1.0, bound)
        and abs(y1 - 1.0) <= 1e-9
        and abs(y2 + 1.0) <= 1e-9
    )
    return ScenarioResult(
        name="spin-fields",
        metrics={
            "mu_b0": muB0,
            "d0": dist0(H1, H2),
            "bound_time": bound,
            "orthogonality_time": t,
            "overlap_at_orthogonality": found.overlap_magnitude,
            "sigma_y_h1": y1,
            "sigma_y_h2": y2,
            "quoted_time": quoted,
            "discrepancy_factor": quoted / t,
        },
        passed=passed,
    )


def _overlap_magnitudes(
    H1: HermitianOperator, H2: HermitianOperator, layout: SpaceLayout, initial: QuantumState, T: float, steps: int
) -> np.ndarray:
    identity = np.eye(layout.total_dim, dtype=complex)
    step = ProtocolStep(dwell=T / steps, control=identity)
    traj = run_protocol(DiscriminationProtocol(layout, initial, (step,) * steps), H1, H2)
    return np.abs(traj.overlaps)


def scenario_phase_box(
    phi1: float, phi2: float, H0: Optional[HermitianOperator] = None, samples: int = 50
) -> ScenarioResult:
    """Constant-shift pair H0 + phi I, probed through and around the box."""
    if H0 is None:
        H0 = HermitianOperator.zeros(1)
    H1, H2 = H0.shifted(phi1), H0.shifted(phi2)
    T = min_discrimination_time(H1, H2)

    with_branch = SpaceLayout(H0.dim, 1, 1)
    amplitudes = np.zeros(with_branch.total_dim, dtype=complex)
    amplitudes[[with_branch.box_index(0), with_branch.nobox_index(0)]] = 1.0
    initial = QuantumState.normalized(with_branch, amplitudes)
    single = DiscriminationProtocol(
        with_branch, initial, (ProtocolStep(dwell=T, control=np.eye(with_branch.total_dim, dtype=complex)),)
    )
    final_overlap = abs(run_protocol(single, H1, H2).final_overlap)

    box_only = SpaceLayout(H0.dim, 0, 1)
    box_state = QuantumState.basis(box_only, 0)
    curve_with = _overlap_magnitudes(H1, H2, with_branch, initial, 2 * T, samples)
    curve_without = _overlap_magnitudes(H1, H2, box_only, box_state, 2 * T, samples)
    deviation = float(np.max(np.abs(curve_without - 1.0)))

    try:
        min_discrimination_time(H1, H2, use_box_extension=False)
        restricted_indistinguishable = False
    except IndistinguishableError:
        restricted_indistinguishable = True

    times = np.linspace(0.0, 2 * T, samples + 1)
    sweep = [
        {"time": float(t), "overlap_with_nobox": float(a), "overlap_without_nobox": float(b)}
        for t, a, b in zip(times, curve_with, curve_without)
    ]
    return ScenarioResult(
        name="phase-box",
        metrics={
            "delta_phi": abs(phi1 - phi2),
            "d0": dist0(H1, H2),
            "bound_time": T,
            "final_overlap": final_overlap,
            "max_deviation_without_nobox": deviation,
            "restricted_indistinguishable": float(restricted_indistinguishable),
        },
        passed=final_overlap <= 1e-9 and deviation <= 1e-9 and restricted_indistinguishable,
        sweep=sweep,
    )


def analog_search_probability(E: float, d: int, t: float) -> float:
    """Identification probability of the resonant driven search after time t."""
    return 1.0 / d + (1.0 - 1.0 / d) * math.sin(E * t / math.sqrt(d)) ** 2


def analog_search_time(E: float, d: int, threshold: float) -> float:
    x = (threshold - 1.0 / d) / (1.0 - 1.0 / d)
    if x <= 0:
        return 0.0
    return math.sqrt(d) / E * math.asin(math.sqrt(x))


def identification_time(E: float, threshold: float, d: int, step_fraction: float = 0.005) -> float:
    """Earliest time the worst-case probability of reading k reaches threshold.

    Column k of the state matrix is the probe evolved under H_k = E|k><k|;
    after each dwell the driver exp(-i E tau |s><s|) is applied as a control.
    """
    tau = step_fraction / E
    s = np.full(d, 1.0 / math.sqrt(d), dtype=complex)
    psi = np.tile(s[:, None], (1, d))
    dwell_phase = np.exp(-1j * E * tau)
    driver_phase = dwell_phase - 1.0
    diag = np.arange(d)
    t_max = math.pi * math.sqrt(d) / E
    n_steps = int(math.ceil(t_max / tau))

    previous = float(np.min(np.abs(psi[diag, diag]) ** 2))
    if previous >= threshold:
        return 0.0
    for step in range(1, n_steps + 1):
        psi[diag, diag] *= dwell_phase
        psi += driver_phase * np.outer(s, s.conj() @ psi)
        worst = float(np.min(np.abs(psi[diag, diag]) ** 2))
        if worst >= threshold:
            return (step - 1 + (threshold - previous) / (worst - previous)) * tau
        previous = worst
    raise DomainError(f"threshold {threshold} not reached for d = {d} before t = {t_max:.6g}")


def scenario_farhi_gutmann(
    E: float, dims: Sequence[int], threshold: float = 0.9, map_fn: Callable = map
) -> ScenarioResult:
    if E <= 0:
        raise DomainError(f"E must be positive, got {E}")
    if not 0.5 < threshold < 1.0:
        raise DomainError(f"threshold must lie in (0.5, 1), got {threshold}")
    dims = [int(d) for d in dims]
    if not dims or min(dims) < 2:
        raise DomainError("dims must be non-empty and each >= 2")

    times = list(map_fn(partial(identification_time, E, threshold), dims))
    analytic = [analog_search_time(E, d, threshold) for d in dims]
    gap = max(abs(t - a) / a for t, a in zip(times, analytic))

    metrics = {"E": E, "threshold": threshold, "max_relative_gap_analytic": gap}
    passed = gap <= 0.05
    if len(set(dims)) >= 2:
        slope, intercept = np.polyfit(np.log(dims), np.log(times), 1)
        metrics.update(slope=float(slope), intercept=float(intercept), slope_target=SLOPE_TARGET)
        passed = passed and abs(slope - SLOPE_TARGET) <= SLOPE_TOL
        logger.info("identification time ~ d^%.4f over d in [%d, %d]", slope, min(dims), max(dims))
    sweep = [
        {"d": float(d), "time": t, "analytic_time": a, "sqrt_d_over_E": math.sqrt(d) / E}
        for d, t, a in zip(dims, times, analytic)
    ]
    return ScenarioResult(name="farhi-gutmann", metrics=metrics, passed=bool(passed), sweep=sweep)


def _k0_frequency(dim: int, k0: int, samples: int, seed: int) -> float:
    """Fraction of Haar-random states whose basis measurement returns k0."""
    hits = 0
    for block, start, stop in block_ranges(samples):
        rng = stream_generator(seed, 0, block)
        n = stop - start
        z = rng.normal(size=(n, dim)) + 1j * rng.normal(size=(n, dim))
        probs = np.abs(z) ** 2
        probs /= probs.sum(axis=1, keepdims=True)
        u = rng.random(n)
        outcome = (np.cumsum(probs, axis=1) <= u[:, None]).sum(axis=1)
        hits += int(np.count_nonzero(np.minimum(outcome, dim - 1) == k0))
    return hits / samples


def scenario_shared_eigenbasis(
    E1: Sequence[float], E2: Sequence[float], k0: int, samples: int = 100_000, seed: int = 0
) -> ScenarioResult:
    """Measure in the shared eigenbasis first; only outcome k0 needs a timed discrimination."""
    e1, e2 = np.asarray(E1, dtype=float), np.asarray(E2, dtype=float)
    if e1.shape != e2.shape or e1.ndim != 1 or e1.shape[0] < 1:
        raise DomainError("E1 and E2 must be non-empty vectors of equal length")
    dim = e1.shape[0]
    if not 0 <= k0 < dim:
        raise DomainError(f"k0 = {k0} out of range for dim {dim}")
    others = np.delete(np.abs(e1 - e2), k0)
    if others.size and np.max(others) > 1e-12:
        raise DomainError("spectra must coincide everywhere except at k0")

    gap = abs(e1[k0] - e2[k0])
    per_outcome = np.zeros(dim)
    per_outcome[k0] = min_discrimination_time(HermitianOperator([[e1[k0]]]), HermitianOperator([[e2[k0]]]))
    expected = float(np.sum(per_outcome / dim))
    formula = math.pi / (dim * gap)

    freq = _k0_frequency(dim, k0, samples, seed)
    p = 1.0 / dim
    sigma = math.sqrt(p * (1 - p) / samples)
    z = (freq - p) / sigma if sigma > 0 else 0.0
    mc_time = freq * per_outcome[k0]

    passed = abs(expected - formula) <= 1e-12 * formula and (abs(z) <= 3.0 if sigma > 0 else freq == 1.0)
    return ScenarioResult(
        name="shared-eigenbasis",
        metrics={
            "dim": float(dim),
            "delta_e": gap,
            "formula_time": formula,
            "expected_time": expected,
            "k0_frequency": freq,
            "k0_frequency_sigma": sigma,
            "k0_z_score": z,
            "monte_carlo_time": mc_time,
            "monte_carlo_time_sigma": sigma * per_outcome[k0],
        },
        passed=passed,
    )
