"""Energy-measurement accuracy, the spy lower bound and the radiative-decay line model."""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import quad

from app.core.errors import DimensionMismatchError, DomainError, NormalizationError
from app.core.estimation import UncertaintyReport, dichotomic_uncertainty, max_uncertainty_product
from app.core.hmetric import dist0
from app.core.protocol import discrimination_measurement, run_protocol, saturation_protocol
from app.core.sampling import uniform_draws
from app.core.spectral import DEGENERACY_TOL, HermitianOperator, QuantumState, SpaceLayout, eig_hermitian

logger = logging.getLogger(__name__)

ROW_TOL = 1e-9
DENSITY_TOL = 1e-6
NEGLIGIBLE_WEIGHT = 1e-14
SPY_REDUCTION_TOL = 1e-9
DEFAULT_CUTOFFS = (10.0, 100.0, 1000.0)
MIN_DECAY_TRIALS = 10_000


@dataclass(frozen=True)
class AccuracyResult:
    value: float
    divergent: bool = False
    cutoff_growth: Tuple[Tuple[float, float], ...] = ()


@dataclass(frozen=True, eq=False)
class EnergyDistribution:
    energies: np.ndarray
    probabilities: np.ndarray

    def as_dict(self) -> Dict[float, float]:
        return {float(e): float(p) for e, p in zip(self.energies, self.probabilities)}


def _energy_match(a: float, b: float) -> bool:
    return abs(a - b) <= DEGENERACY_TOL * max(1.0, abs(a), abs(b))


@dataclass(frozen=True, eq=False)
class DiscreteReporter:
    """p(E'|E) as a finite table: true energy -> {reported energy: probability}."""

    table: Mapping[float, Mapping[float, float]]

    def __post_init__(self) -> None:
        rows = {}
        for E, row in self.table.items():
            probs = [float(p) for p in row.values()]
            if any(p < 0 for p in probs):
                raise NormalizationError(f"row for E={E} has negative probabilities")
            total = math.fsum(probs)
            if abs(total - 1.0) > ROW_TOL:
                raise NormalizationError(f"row for E={E} sums to {total:.12f}")
            rows[float(E)] = {float(k): float(v) for k, v in row.items()}
        object.__setattr__(self, "table", rows)

    def conditional(self, E: float) -> Dict[float, float]:
        for key, row in self.table.items():
            if _energy_match(key, E):
                return row
        raise DomainError(f"energy {E} is outside the reporter's domain")

    def accuracy(self, E: float) -> AccuracyResult:
        row = self.conditional(E)
        return AccuracyResult(value=math.fsum(p * abs(Ep - E) for Ep, p in row.items()))


@dataclass(frozen=True)
class DensityReporter:
    """Reported energy = true energy + noise with a registered density of the given width."""

    kind: str
    width: float

    def __post_init__(self) -> None:
        if self.kind not in ("lorentzian", "gaussian"):
            raise DomainError(f"unknown density kind {self.kind!r}")
        if self.width <= 0:
            raise DomainError(f"width must be positive, got {self.width}")

    def density(self, offset: float) -> float:
        w = self.width
        if self.kind == "gaussian":
            return math.exp(-0.5 * (offset / w) ** 2) / (w * math.sqrt(2 * math.pi))
        return (w / math.pi) / (w * w + offset * offset)

    def truncated_accuracy(self, cutoff: float) -> float:
        """Integral of |x| p(x) over [-cutoff, cutoff]."""
        w = self.width
        if self.kind == "gaussian":
            return w * math.sqrt(2 / math.pi) * (1.0 - math.exp(-0.5 * (cutoff / w) ** 2))
        return (w / math.pi) * math.log1p((cutoff / w) ** 2)

    def accuracy(self, E: float) -> AccuracyResult:
        if self.kind == "gaussian":
            return AccuracyResult(value=self.width * math.sqrt(2 / math.pi))
        growth = tuple((c * self.width, self.truncated_accuracy(c * self.width)) for c in DEFAULT_CUTOFFS)
        return AccuracyResult(value=math.inf, divergent=True, cutoff_growth=growth)


@dataclass(frozen=True, eq=False)
class NumericReporter:
    """Translation-invariant reporter given by a noise density pdf(E' - E).

    Divergence of the first absolute moment is decided by doubling the cutoff
    from `scale` and watching whether the added mass per doubling dies out.
    """

    pdf: Callable[[float], float]
    scale: float = 1.0
    doublings: int = 40

    def __post_init__(self) -> None:
        if self.scale <= 0:
            raise DomainError(f"scale must be positive, got {self.scale}")
        left, _ = quad(self.pdf, -np.inf, 0.0, limit=200)
        right, _ = quad(self.pdf, 0.0, np.inf, limit=200)
        if abs(left + right - 1.0) > DENSITY_TOL:
            raise NormalizationError(f"density integrates to {left + right:.9f}")

    def _moment(self, a: float, b: float) -> float:
        pos, _ = quad(lambda x: x * self.pdf(x), a, b, limit=200)
        neg, _ = quad(lambda x: x * self.pdf(-x), a, b, limit=200)
        return pos + neg

    def truncated_accuracy(self, cutoff: float) -> float:
        return self._moment(0.0, cutoff)

    def accuracy(self, E: float) -> AccuracyResult:
        value = self._moment(0.0, self.scale)
        cutoff = self.scale
        increment = value
        growth: List[Tuple[float, float]] = [(cutoff, value)]
        for _ in range(self.doublings):
            increment = self._moment(cutoff, 2 * cutoff)
            cutoff *= 2
            value += increment
            growth.append((cutoff, value))
        if increment > DENSITY_TOL * max(1.0, value):
            logger.debug("numeric reporter: truncated accuracy still growing by %.3g at cutoff %.3g", increment, cutoff)
            return AccuracyResult(value=math.inf, divergent=True, cutoff_growth=tuple(growth[-3:]))
        return AccuracyResult(value=value)


MeasurementModel = Union[DiscreteReporter, DensityReporter, NumericReporter]


def ideal_energy_distribution(H: HermitianOperator, psi: QuantumState) -> EnergyDistribution:
    """Born distribution over the spectrum of H; degenerate levels are merged."""
    if H.dim != psi.dim:
        raise DimensionMismatchError(f"operator dim {H.dim} does not match state dim {psi.dim}")
    es = eig_hermitian(H)
    weights = np.abs(es.vectors.conj().T @ psi.amplitudes) ** 2
    energies: List[float] = []
    probabilities: List[float] = []
    for value, weight in zip(es.values, weights):
        if energies and _energy_match(energies[-1], float(value)):
            probabilities[-1] += float(weight)
        else:
            energies.append(float(value))
            probabilities.append(float(weight))
    return EnergyDistribution(energies=np.array(energies), probabilities=np.array(probabilities))


def accuracy_eigenstate(model: MeasurementModel, E: float) -> AccuracyResult:
    return model.accuracy(E)


def accuracy_state(model: MeasurementModel, H: HermitianOperator, psi: QuantumState) -> AccuracyResult:
    dist = ideal_energy_distribution(H, psi)
    terms = [
        (float(p), model.accuracy(float(E)))
        for E, p in zip(dist.energies, dist.probabilities)
        if p > NEGLIGIBLE_WEIGHT
    ]
    if len(terms) == 1:
        return terms[0][1]
    if any(result.divergent for _, result in terms):
        return AccuracyResult(value=math.inf, divergent=True)
    return AccuracyResult(value=math.fsum(p * result.value for p, result in terms))


def spy_bound_experiment(H0: HermitianOperator, level_index: int, delta_t: float) -> UncertaintyReport:
    """Lower-bounds energy accuracy by the dichotomic problem H0 versus H0 + eps I.

    eps is chosen so that delta_t sits at the product-maximising point of the
    dichotomic curve. Once H0 has been measured the pair reduces to two
    energies E_k and E_k + eps, which is simulated on a one-level box with a
    no-box branch.
    """
    if delta_t <= 0:
        raise DomainError(f"delta_t must be positive, got {delta_t}")
    es = eig_hermitian(H0)
    if not 0 <= level_index < H0.dim:
        raise DomainError(f"level index {level_index} out of range for dim {H0.dim}")
    E_k = float(es.values[level_index])

    dt_star_unit, _ = max_uncertainty_product(1.0)
    x_star = 0.5 * dt_star_unit
    eps = 2.0 * x_star / delta_t
    d0 = dist0(H0, H0.shifted(eps))
    delta_h = dichotomic_uncertainty(d0, delta_t)

    layout = SpaceLayout(1, 1, 1)
    low, high = HermitianOperator([[E_k]]), HermitianOperator([[E_k + eps]])
    proto = saturation_protocol(low, high, layout, 1, duration=delta_t)
    psi1, psi2 = run_protocol(proto, low, high).final_states
    p_error = discrimination_measurement(psi1, psi2).error_probability(psi1, psi2)
    delta_e_spy = eps * p_error

    gap = abs(delta_e_spy - delta_h)
    if gap > SPY_REDUCTION_TOL:
        logger.warning("spy reduction differs from the closed form by %.3e", gap)
    return UncertaintyReport.from_values(
        delta_t,
        delta_e_spy,
        extras={
            "epsilon": eps,
            "d0": d0,
            "x_star": x_star,
            "energy_level": E_k,
            "p_error": p_error,
            "delta_h_closed": delta_h,
            "reduction_gap": gap,
        },
    )


@dataclass(frozen=True)
class DecayModel:
    gamma: float
    E0: float = 0.0

    def __post_init__(self) -> None:
        if self.gamma <= 0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")

    def line_density(self, E: float) -> float:
        return (self.gamma / math.pi) / (self.gamma ** 2 + (E - self.E0) ** 2)

    def truncated_accuracy(self, cutoff: float) -> float:
        return (self.gamma / math.pi) * math.log1p((cutoff / self.gamma) ** 2)


@dataclass(frozen=True)
class CutoffRow:
    cutoff: float
    empirical: float
    stderr: float
    closed_form: float


@dataclass(frozen=True)
class DecayReport:
    trials: int
    mean_time: float
    mean_time_stderr: float
    fwhm: float
    cutoff_table: Tuple[CutoffRow, ...]
    lifetime_linewidth_product: float
    empirical_lifetime_linewidth: float
    extras: Dict[str, float] = field(default_factory=dict)


def _histogram_fwhm(offsets: np.ndarray, gamma: float) -> float:
    """Width at half maximum of the binned line, bins of gamma/20 over +-20 gamma."""
    width = gamma / 20.0
    edges = np.linspace(-20.0 * gamma, 20.0 * gamma, 801)
    counts, _ = np.histogram(offsets, bins=edges)
    smooth = np.convolve(counts.astype(float), np.ones(5) / 5.0, mode="same")
    centers = edges[:-1] + 0.5 * width
    peak = int(np.argmax(smooth))
    half = 0.5 * smooth[peak]

    left = peak
    while left > 0 and smooth[left] >= half:
        left -= 1
    right = peak
    while right < smooth.shape[0] - 1 and smooth[right] >= half:
        right += 1
    if smooth[left] >= half or smooth[right] >= half:
        raise DomainError("line is wider than the histogram window")

    x_left = np.interp(half, [smooth[left], smooth[left + 1]], [centers[left], centers[left + 1]])
    x_right = np.interp(half, [smooth[right], smooth[right - 1]], [centers[right], centers[right - 1]])
    return float(x_right - x_left)


def decay_measurement_simulation(
    model: DecayModel, trials: int, seed: int, cutoffs: Sequence[float] = DEFAULT_CUTOFFS
) -> DecayReport:
    """Samples decay times and photon energies; cutoffs are in units of gamma."""
    if trials < MIN_DECAY_TRIALS:
        raise DomainError(f"decay simulation needs at least {MIN_DECAY_TRIALS} trials, got {trials}")
    gamma = model.gamma
    times = -np.log1p(-uniform_draws(seed, 0, trials)[:, 0]) / gamma
    offsets = gamma * np.tan(math.pi * (uniform_draws(seed, 1, trials)[:, 0] - 0.5))

    mean_time = float(np.mean(times))
    stderr = float(np.std(times, ddof=1) / math.sqrt(trials))
    fwhm = _histogram_fwhm(offsets, gamma)

    magnitudes = np.abs(offsets)
    table = []
    for c in cutoffs:
        cutoff = c * gamma
        kept = np.where(magnitudes <= cutoff, magnitudes, 0.0)
        table.append(
            CutoffRow(
                cutoff=cutoff,
                empirical=float(np.mean(kept)),
                stderr=float(np.std(kept, ddof=1) / math.sqrt(trials)),
                closed_form=model.truncated_accuracy(cutoff),
            )
        )

    logger.info("decay: mean time %.5g (1/gamma = %.5g), fwhm %.5g (2 gamma = %.5g)", mean_time, 1 / gamma, fwhm, 2 * gamma)
    return DecayReport(
        trials=trials,
        mean_time=mean_time,
        mean_time_stderr=stderr,
        fwhm=fwhm,
        cutoff_table=tuple(table),
        lifetime_linewidth_product=1.0,
        empirical_lifetime_linewidth=mean_time * gamma,
        extras={"E0": model.E0, "gamma": gamma, "line_center": float(model.E0 + np.median(offsets))},
    )
