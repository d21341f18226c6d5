"""Binary Hamiltonian estimation: Helstrom error, MAP guessing and the dichotomic closed form."""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from app.core.errors import DimensionMismatchError, DomainError, IndistinguishableError, UnsupportedPriorsError
from app.core.hmetric import dist0
from app.core.protocol import discrimination_measurement, optimal_probe, run_protocol, saturation_protocol
from app.core.sampling import uniform_draws
from app.core.spectral import HermitianOperator, SpaceLayout, extend_to_layout

logger = logging.getLogger(__name__)

PRODUCT_BOUND = 0.25
PRODUCT_SLACK = 0.01
DISTRIBUTION_TOL = 1e-10

GuessRule = Callable[[float, float, HermitianOperator, HermitianOperator], HermitianOperator]


@dataclass(frozen=True, eq=False)
class HypothesisPair:
    H1: HermitianOperator
    H2: HermitianOperator
    p1: float = 0.5
    p2: float = 0.5

    def __post_init__(self) -> None:
        if self.H1.dim != self.H2.dim:
            raise DimensionMismatchError(f"hypotheses have dims {self.H1.dim} and {self.H2.dim}")
        if self.p1 < 0 or self.p2 < 0 or abs(self.p1 + self.p2 - 1.0) > 1e-12:
            raise DomainError(f"priors must be non-negative and sum to 1, got ({self.p1}, {self.p2})")

    @property
    def dim(self) -> int:
        return self.H1.dim

    @property
    def d0(self) -> float:
        return dist0(self.H1, self.H2)


@dataclass(frozen=True)
class UncertaintyReport:
    delta_t: float
    delta_H: float
    product: float
    bound_satisfied: bool
    extras: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.delta_H < 0:
            raise DomainError(f"delta_H must be non-negative, got {self.delta_H}")
        if abs(self.product - self.delta_t * self.delta_H) > 1e-12:
            raise DomainError("product must equal delta_t * delta_H")

    @classmethod
    def from_values(
        cls, delta_t: float, delta_H: float, bound: float = PRODUCT_BOUND, extras: Optional[Dict[str, float]] = None
    ) -> "UncertaintyReport":
        product = delta_t * delta_H
        return cls(
            delta_t=float(delta_t),
            delta_H=float(delta_H),
            product=float(product),
            bound_satisfied=bool(product >= bound),
            extras=dict(extras or {}),
        )


@dataclass(frozen=True)
class EstimationSample:
    delta_t: float
    mean: float
    stderr: float
    error_rate: float
    overlap_magnitude: float
    trials: int


@dataclass(frozen=True)
class SweepRow:
    delta_t: float
    delta_h_closed: float
    delta_h_empirical: float
    stderr: float
    product: float
    bound_025_ok: bool


def helstrom_error(overlap_magnitude: float) -> float:
    if not -1e-12 <= overlap_magnitude <= 1 + 1e-12:
        raise DomainError(f"overlap magnitude must lie in [0, 1], got {overlap_magnitude}")
    ov = min(1.0, max(0.0, overlap_magnitude))
    return 0.5 * (1.0 - math.sqrt(1.0 - ov * ov))


def overlap_lower_bound(D0: float, t: float) -> float:
    """cos(D0 t / 2) up to the first certain-discrimination time, then 0."""
    if D0 <= 0:
        raise DomainError(f"D0 must be positive, got {D0}")
    if t < 0:
        raise DomainError(f"time must be non-negative, got {t}")
    x = 0.5 * D0 * t
    return math.cos(x) if x < math.pi / 2 else 0.0


def _check_distribution(probabilities: Sequence[float], what: str) -> None:
    if any(p < -DISTRIBUTION_TOL for p in probabilities):
        raise DomainError(f"{what} has negative entries")
    total = math.fsum(probabilities)
    if abs(total - 1.0) > DISTRIBUTION_TOL:
        raise DomainError(f"{what} sums to {total:.12f}, expected 1")


def estimation_uncertainty(
    hypotheses: Sequence[HermitianOperator],
    priors: Sequence[float],
    guesses: Sequence[Sequence[Tuple[float, HermitianOperator]]],
    distance: Callable[[HermitianOperator, HermitianOperator], float] = dist0,
) -> float:
    """sum_i p(H_i) sum_j p(j|H_i) D(H_i, guess_j).

    guesses[i] lists (p(j|H_i), guess for outcome j) for hypothesis i.
    """
    if len(hypotheses) != len(priors) or len(hypotheses) != len(guesses):
        raise DomainError("hypotheses, priors and guesses must have the same length")
    _check_distribution(priors, "priors")
    total = 0.0
    for i, (H, prior, table) in enumerate(zip(hypotheses, priors, guesses)):
        _check_distribution([p for p, _ in table], f"conditional distribution of hypothesis {i}")
        total += prior * math.fsum(p * distance(H, G) for p, G in table)
    return total


def optimal_guess(
    posterior1: float, posterior2: float, H1: HermitianOperator, H2: HermitianOperator
) -> HermitianOperator:
    """MAP choice; ties go to H1."""
    if abs(posterior1 + posterior2 - 1.0) > 1e-9:
        raise DomainError(f"posteriors must sum to 1, got {posterior1} + {posterior2}")
    return H1 if posterior1 >= posterior2 else H2


def dichotomic_uncertainty(D0: float, delta_t: float) -> float:
    if D0 <= 0:
        raise DomainError(f"D0 must be positive, got {D0}")
    if delta_t < 0:
        raise DomainError(f"delta_t must be non-negative, got {delta_t}")
    x = 0.5 * D0 * delta_t
    if x >= math.pi / 2:
        return 0.0
    return max(0.0, 0.5 * D0 * (1.0 - math.sin(x)))


def uncertainty_product_curve(D0: float, grid: Iterable[float]) -> List[UncertaintyReport]:
    return [UncertaintyReport.from_values(dt, dichotomic_uncertainty(D0, dt)) for dt in grid]


def _product_in_x(x: float) -> float:
    return x * (1.0 - math.sin(x))


def max_uncertainty_product(D0: float) -> Tuple[float, float]:
    """(delta_t*, product*) for the dichotomic closed form; product* does not depend on D0."""
    if D0 <= 0:
        raise DomainError(f"D0 must be positive, got {D0}")
    res = minimize_scalar(
        lambda x: -_product_in_x(x), bounds=(0.0, math.pi / 2), method="bounded", options={"xatol": 1e-10}
    )
    x_star = float(res.x)
    product_star = _product_in_x(x_star)
    if product_star < PRODUCT_BOUND:
        raise DomainError(f"maximised product {product_star:.6f} fell below 1/4")
    return 2.0 * x_star / D0, product_star


def simulate_dichotomic_estimation(
    pair: HypothesisPair,
    delta_t: float,
    trials: int,
    seed: int,
    trotter_steps: int = 1000,
    nu: float = 0.0,
    layout: Optional[SpaceLayout] = None,
    guess_rule: GuessRule = optimal_guess,
    stream: int = 0,
) -> EstimationSample:
    """Saturation protocol truncated at delta_t, the optimal two-outcome measurement, sampled outcomes.

    The loss of each trial is dist0(truth, guess). Returns the mean loss and
    its standard error.
    """
    if abs(pair.p1 - pair.p2) > 1e-12:
        raise UnsupportedPriorsError(pair.p1, pair.p2)
    if delta_t < 0:
        raise DomainError(f"delta_t must be non-negative, got {delta_t}")
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    d0 = pair.d0
    if d0 <= 1e-12 * max(1.0, pair.H1.max_abs_entry(), pair.H2.max_abs_entry()):
        raise IndistinguishableError("D0 = 0")
    if layout is None:
        layout = SpaceLayout(pair.dim, 1, 1)

    duration = min(delta_t, math.pi / d0)
    if duration > 0:
        proto = saturation_protocol(pair.H1, pair.H2, layout, trotter_steps, nu=nu, duration=duration)
        psi1, psi2 = run_protocol(proto, pair.H1, pair.H2).final_states
    else:
        psi1 = psi2 = optimal_probe(extend_to_layout(pair.H1, layout) - extend_to_layout(pair.H2, layout), layout)
    overlap = abs(psi1.inner(psi2))

    basis = discrimination_measurement(psi1, psi2)
    plus_given = np.array([basis.probabilities(psi1)[0], basis.probabilities(psi2)[0]])
    plus_given = np.clip(plus_given, 0.0, 1.0)

    # loss[truth, outcome]; outcome 0 is "plus"
    truths = (pair.H1, pair.H2)
    loss = np.zeros((2, 2))
    for outcome in range(2):
        likelihood = plus_given if outcome == 0 else 1.0 - plus_given
        norm = likelihood.sum()
        post1 = likelihood[0] / norm if norm > 0 else 0.5
        guess = guess_rule(post1, 1.0 - post1, pair.H1, pair.H2)
        for truth in range(2):
            loss[truth, outcome] = dist0(truths[truth], guess)

    u = uniform_draws(seed, stream, trials, width=2)
    truth_idx = (u[:, 0] >= 0.5).astype(int)
    outcome_idx = (u[:, 1] >= plus_given[truth_idx]).astype(int)
    losses = loss[truth_idx, outcome_idx]

    mean = float(np.mean(losses))
    stderr = float(np.std(losses, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    error_rate = float(np.mean(losses > 0))
    logger.debug(
        "estimation at dt=%.6g: mean=%.6g stderr=%.3g |overlap|=%.6g", delta_t, mean, stderr, overlap
    )
    return EstimationSample(
        delta_t=float(delta_t),
        mean=mean,
        stderr=stderr,
        error_rate=error_rate,
        overlap_magnitude=float(overlap),
        trials=trials,
    )


def estimation_sweep(
    pair: HypothesisPair,
    grid: int,
    trials: int,
    seed: int,
    trotter_steps: int = 1000,
    nu: float = 0.0,
    layout: Optional[SpaceLayout] = None,
    map_fn: Callable = map,
) -> List[SweepRow]:
    """Evaluates `grid` evenly spaced delta_t in [0, pi/D0]; grid point k uses random stream k.

    bound_025_ok carries the sweep verdict: the largest empirical product
    reaches 1/4 less a grid and sampling slack.
    """
    if grid < 2:
        raise DomainError(f"grid must have at least 2 points, got {grid}")
    d0 = pair.d0
    times = np.linspace(0.0, math.pi / d0, grid)

    def point(k: int) -> EstimationSample:
        return simulate_dichotomic_estimation(
            pair, float(times[k]), trials, seed, trotter_steps=trotter_steps, nu=nu, layout=layout, stream=k
        )

    samples = list(map_fn(point, range(grid)))
    best = max(s.delta_t * s.mean for s in samples)
    verdict = best >= PRODUCT_BOUND - PRODUCT_SLACK
    if not verdict:
        logger.warning("largest empirical product %.4f is below 1/4 - %.2f", best, PRODUCT_SLACK)
    return [
        SweepRow(
            delta_t=s.delta_t,
            delta_h_closed=dichotomic_uncertainty(d0, s.delta_t),
            delta_h_empirical=s.mean,
            stderr=s.stderr,
            product=s.delta_t * s.mean,
            bound_025_ok=verdict,
        )
        for s in samples
    ]
