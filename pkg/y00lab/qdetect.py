"""
Small-scale quantum detection theory for Eve's collective measurement

Coherent states are truncated Fock vectors. Ensembles of up to three slots
are handled in span coordinates: an orthonormal basis of the subspace the
hypothesis states span, so every measurement operator is at most 16 x 16.
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaln
from scipy.stats import unitary_group

logger = logging.getLogger(__name__)

MAX_SLOTS = 3
MAX_HYPOTHESES = 16
SPAN_TOLERANCE = 1e-10
COMPLETENESS_TOLERANCE = 1e-8
POSITIVITY_TOLERANCE = 1e-10
KRAUS_TOLERANCE = 1e-10


def fock_cutoff(alpha: complex) -> int:
    """Smallest n_max with |alpha|^2 + 10 sqrt(|alpha|^2 + 1) + 20 <= n_max"""
    mean = abs(alpha) ** 2
    return int(np.ceil(mean + 10 * np.sqrt(mean + 1) + 20))


@dataclass
class FockVector:
    """Amplitudes over number states 0..n_max"""
    amplitudes: np.ndarray

    @property
    def n_max(self) -> int:
        return len(self.amplitudes) - 1

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def padded(self, n_max: int) -> np.ndarray:
        out = np.zeros(n_max + 1, dtype=complex)
        out[:len(self.amplitudes)] = self.amplitudes
        return out

    def inner(self, other: "FockVector") -> complex:
        """<self|other>"""
        n = min(len(self.amplitudes), len(other.amplitudes))
        return complex(np.vdot(self.amplitudes[:n], other.amplitudes[:n]))


def coherent_fock(alpha: complex, n_max: Optional[int] = None) -> FockVector:
    """
    Coherent state |alpha> truncated to number states 0..n_max

    Args:
        alpha: Complex amplitude
        n_max: Cutoff; the default and minimum is fock_cutoff(alpha)

    Returns:
        FockVector with amplitudes exp(-|alpha|^2/2) alpha^n / sqrt(n!)
    """
    minimum = fock_cutoff(alpha)
    if n_max is None:
        n_max = minimum
    elif n_max < minimum:
        raise ValueError(f"n_max = {n_max} is below the cutoff {minimum} for |alpha| = {abs(alpha):.4g}")
    n = np.arange(n_max + 1)
    amplitudes = np.zeros(n_max + 1, dtype=complex)
    if alpha == 0:
        amplitudes[0] = 1.0
        return FockVector(amplitudes)
    log_mag = -abs(alpha) ** 2 / 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    amplitudes = np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))
    return FockVector(amplitudes)


def coherent_overlap(alpha: complex, beta: complex) -> complex:
    """Closed form <beta|alpha> = exp(-(|alpha|^2 + |beta|^2)/2 + conj(beta) alpha)"""
    return complex(np.exp(-(abs(alpha) ** 2 + abs(beta) ** 2) / 2 + np.conj(beta) * alpha))


class PureStateEnsemble:
    """
    Labelled pure-state hypotheses with priors

    Args:
        labels: Hypothesis labels
        priors: Prior probabilities, summing to one
        states: Per hypothesis, a tuple of FockVectors (one per slot)
    """

    def __init__(self, labels: Sequence, priors: Sequence[float],
                 states: Sequence[Sequence[FockVector]]):
        self.labels = list(labels)
        self.priors = np.asarray(priors, dtype=float)
        self.states = [tuple(s) if not isinstance(s, FockVector) else (s,) for s in states]
        if not len(self.labels) == len(self.priors) == len(self.states):
            raise ValueError("labels, priors and states must have equal length")
        if len(self.states) > MAX_HYPOTHESES:
            raise ValueError(f"at most {MAX_HYPOTHESES} hypotheses supported")
        slots = {len(s) for s in self.states}
        if len(slots) != 1 or not 1 <= slots.pop() <= MAX_SLOTS:
            raise ValueError(f"every state needs the same number of slots, 1..{MAX_SLOTS}")
        if abs(self.priors.sum() - 1.0) > 1e-12 or self.priors.min() < 0:
            raise ValueError("priors must be non-negative and sum to 1")
        for state in self.states:
            for vector in state:
                if abs(vector.norm - 1.0) > 1e-10:
                    raise ValueError(f"state norm {vector.norm!r} deviates from 1")
        self.basis, self.coordinates = self._span()

    @property
    def n_slots(self) -> int:
        return len(self.states[0])

    @property
    def dimension(self) -> int:
        return self.coordinates.shape[0]

    def gram(self) -> np.ndarray:
        """G[i, j] = <psi_i|psi_j>, slot-wise product of overlaps"""
        k = len(self.states)
        gram = np.ones((k, k), dtype=complex)
        for i in range(k):
            for j in range(k):
                for a, b in zip(self.states[i], self.states[j]):
                    gram[i, j] *= a.inner(b)
        return gram

    def _span(self) -> Tuple[Optional[np.ndarray], np.ndarray]:
        if self.n_slots == 1:
            n_max = max(s[0].n_max for s in self.states)
            psi = np.column_stack([s[0].padded(n_max) for s in self.states])
            u, sv, _ = np.linalg.svd(psi, full_matrices=False)
            rank = int(np.sum(sv > SPAN_TOLERANCE * sv[0]))
            basis = u[:, :rank]
            return basis, basis.conj().T @ psi
        w, v = np.linalg.eigh(self.gram())
        keep = w > SPAN_TOLERANCE ** 2 * w.max()
        return None, np.sqrt(w[keep])[:, None] * v[:, keep].conj().T

    def densities(self) -> List[np.ndarray]:
        """rho(r) = |psi_r><psi_r| in span coordinates"""
        return [np.outer(c, c.conj()) for c in self.coordinates.T]

    def to_span(self, operator: np.ndarray) -> np.ndarray:
        """Restrict a single-slot Fock-space operator to span coordinates"""
        if self.basis is None:
            raise ValueError("Fock-space operators need a single-slot ensemble")
        n = operator.shape[0]
        basis = self.basis
        if basis.shape[0] < n:
            basis = np.vstack([basis, np.zeros((n - basis.shape[0], basis.shape[1]))])
        elif basis.shape[0] > n:
            raise ValueError(f"operator dimension {n} is below the ensemble cutoff")
        return basis.conj().T @ operator @ basis


def psk_ensemble(order: int, alpha: float, priors: Optional[Sequence[float]] = None,
                 n_max: Optional[int] = None, phase_offset: float = 0.0) -> PureStateEnsemble:
    """Single-slot PSK ensemble |alpha exp(i(2 pi k / order + offset))>"""
    priors = np.full(order, 1.0 / order) if priors is None else priors
    amplitudes = [alpha * np.exp(1j * (2 * np.pi * k / order + phase_offset)) for k in range(order)]
    n_max = n_max or max(fock_cutoff(a) for a in amplitudes)
    return PureStateEnsemble(list(range(order)), priors,
                             [(coherent_fock(a, n_max),) for a in amplitudes])


@dataclass
class MeasurementSet:
    """POVM elements in the coordinates of the ensemble they act on"""
    operators: List[np.ndarray]
    support_only: bool = False

    def completeness_error(self) -> float:
        total = sum(self.operators)
        return float(np.linalg.norm(total - np.eye(total.shape[0]), 2))

    def min_eigenvalue(self) -> float:
        return float(min(np.linalg.eigvalsh((m + m.conj().T) / 2).min() for m in self.operators))

    def validate(self, tolerance: float = COMPLETENESS_TOLERANCE):
        if self.completeness_error() > tolerance:
            raise ValueError(f"measurement incomplete: {self.completeness_error():.3g}")
        if self.min_eigenvalue() < -POSITIVITY_TOLERANCE:
            raise ValueError(f"measurement not positive: {self.min_eigenvalue():.3g}")


def success_probability(priors: Sequence[float], densities: Sequence[np.ndarray],
                        measurement: MeasurementSet) -> float:
    """sum_r Pr(r) tr[M(r) rho(r)]"""
    return float(sum(p * np.trace(m @ rho).real
                     for p, m, rho in zip(priors, measurement.operators, densities)))


def _inverse_sqrt(matrix: np.ndarray) -> Tuple[np.ndarray, bool]:
    w, v = np.linalg.eigh((matrix + matrix.conj().T) / 2)
    keep = w > SPAN_TOLERANCE * max(w.max(), 1e-300)
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / np.sqrt(w[keep])
    return (v * inv) @ v.conj().T, not keep.all()


def _sqrt_psd(matrix: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((matrix + matrix.conj().T) / 2)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def srm_densities(priors: Sequence[float], densities: Sequence[np.ndarray]) -> Tuple[MeasurementSet, float]:
    """Square-root measurement for (possibly mixed) densities"""
    weighted = [p * rho for p, rho in zip(priors, densities)]
    inv_sqrt, singular = _inverse_sqrt(sum(weighted))
    if singular:
        logger.warning("Ensemble operator singular on the span: using the pseudo-inverse, "
                       "completeness holds on its support only")
    measurement = MeasurementSet([inv_sqrt @ w @ inv_sqrt for w in weighted], support_only=singular)
    return measurement, success_probability(priors, densities, measurement)


def srm(ensemble: PureStateEnsemble) -> Tuple[MeasurementSet, float]:
    """
    Square-root measurement M(r) = S^-1/2 Pr(r)|psi_r><psi_r| S^-1/2

    Args:
        ensemble: Pure-state hypotheses

    Returns:
        (MeasurementSet in span coordinates, success probability)
    """
    return srm_densities(ensemble.priors, ensemble.densities())


def trace_norm(matrix: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvalsh((matrix + matrix.conj().T) / 2)).sum())


def helstrom_binary(rho0: np.ndarray, rho1: np.ndarray, p0: float) -> float:
    """Optimal binary success 1/2 + 1/2 ||p0 rho0 - p1 rho1||_1"""
    if not 0 <= p0 <= 1:
        raise ValueError("p0 must lie in [0, 1]")
    return 0.5 + 0.5 * trace_norm(p0 * rho0 - (1 - p0) * rho1)


def pairwise_helstrom_bound(priors: Sequence[float], densities: Sequence[np.ndarray]) -> float:
    """
    Upper bound on any measurement's success from pairwise Helstrom terms

    Each pair (i, j) bounds p_i tr[rho_i M_i] + p_j tr[rho_j M_j] by
    (p_i + p_j + ||p_i rho_i - p_j rho_j||_1) / 2; summing over pairs counts
    every term N - 1 times.
    """
    n = len(priors)
    if n == 1:
        return 1.0
    total = sum(0.5 * (priors[i] + priors[j]
                       + trace_norm(priors[i] * densities[i] - priors[j] * densities[j]))
                for i, j in combinations(range(n), 2))
    return min(1.0, total / (n - 1))


@dataclass
class LagrangeReport:
    """Optimality diagnostics of a measurement against an ensemble"""
    gamma: np.ndarray
    hermiticity_gap: float
    stationarity: float
    symmetry: float
    min_eigenvalue: float
    eigenvalues: List[np.ndarray] = field(default_factory=list)
    success: float = 0.0

    def optimal(self, tolerance: float = 1e-6) -> bool:
        return (max(self.hermiticity_gap, self.stationarity, self.symmetry) <= tolerance
                and self.min_eigenvalue >= -tolerance)


def _lagrange(priors, densities, measurement: MeasurementSet) -> LagrangeReport:
    risks = [-p * rho for p, rho in zip(priors, densities)]
    gamma = sum(m @ w for m, w in zip(measurement.operators, risks))
    norm = lambda a: float(np.linalg.norm(a, 2))
    stationarity = max(max(norm((w - gamma) @ m), norm(m @ (w - gamma)))
                       for w, m in zip(risks, measurement.operators))
    symmetry = max(norm(measurement.operators[r] @ (risks[q] - risks[r]) @ measurement.operators[q])
                   for r in range(len(risks)) for q in range(len(risks)))
    spectra = [np.linalg.eigvalsh(((w - gamma) + (w - gamma).conj().T) / 2) for w in risks]
    return LagrangeReport(
        gamma=gamma,
        hermiticity_gap=norm(gamma - gamma.conj().T),
        stationarity=stationarity,
        symmetry=symmetry,
        min_eigenvalue=float(min(s.min() for s in spectra)),
        eigenvalues=spectra,
        success=float(-np.trace(gamma).real)
    )


def optimality_residuals(ensemble: PureStateEnsemble, measurement: MeasurementSet) -> LagrangeReport:
    """
    Risk operators W(r) = -Pr(r) rho(r), Gamma = sum_r M(r) W(r) and the
    residuals of the optimality conditions; W(r) - Gamma >= 0 is tested as
    written and the full spectra are kept for audit.
    """
    return _lagrange(ensemble.priors, ensemble.densities(), measurement)


@dataclass
class OptimizationResult:
    measurement: MeasurementSet
    report: LagrangeReport
    iterations: int
    converged: bool


def optimal_measurement(ensemble: PureStateEnsemble, tolerance: float = 1e-8,
                        max_iterations: int = 10_000) -> OptimizationResult:
    """
    Refine the SRM toward the minimum-error optimum

    Iterates M(r) <- G^-1 p_r rho_r M(r) rho_r p_r G^-1 with
    G = (sum_r p_r^2 rho_r M(r) rho_r)^1/2 until the stationarity residual
    falls below tolerance.
    """
    priors, densities = ensemble.priors, ensemble.densities()
    measurement, _ = srm(ensemble)
    weighted = [p * rho for p, rho in zip(priors, densities)]
    report = _lagrange(priors, densities, measurement)
    best = (measurement, report)
    iterations = 0
    while report.stationarity > tolerance and iterations < max_iterations:
        iterations += 1
        products = [w @ m @ w for w, m in zip(weighted, measurement.operators)]
        g_inv, _ = _inverse_sqrt(sum(products))
        measurement = MeasurementSet([g_inv @ a @ g_inv for a in products])
        report = _lagrange(priors, densities, measurement)
        if report.success > best[1].success:
            best = (measurement, report)
    converged = report.stationarity <= tolerance
    if not converged:
        logger.warning(f"Measurement refinement stopped after {iterations} iterations "
                       f"(residual {report.stationarity:.3g})")
        # the iteration is not monotone; keep the best iterate seen
        measurement, report = best
    return OptimizationResult(measurement, report, iterations, converged)


@dataclass
class CauchySchwarzReport:
    bound: float
    achieved: float
    cs_rhs: float
    prior_gap: float
    overlaps: np.ndarray
    strict: bool


def cs_bound(ensemble: PureStateEnsemble, measurement: MeasurementSet) -> CauchySchwarzReport:
    """
    Cauchy-Schwarz bound for a rank-one measurement M(r) = |mu_r><mu_r|

    With o_r = |<psi_r|mu_r>|^2 the achieved success sum_r p_r o_r is at most
    sqrt(sum p_r^2) sqrt(sum o_r^2); the prior o_r / sum o attains it and
    gives the bound sum o^2 / sum o, strictly below one unless every o_r = 1.
    """
    overlaps = []
    for psi, m in zip(ensemble.coordinates.T, measurement.operators):
        w, v = np.linalg.eigh((m + m.conj().T) / 2)
        if len(w) > 1 and w[-2] > 1e-8 * max(w[-1], 1e-300):
            raise ValueError("cs_bound needs a rank-one measurement")
        mu = np.sqrt(max(w[-1], 0.0)) * v[:, -1]
        overlaps.append(abs(np.vdot(psi, mu)) ** 2)
    o = np.asarray(overlaps)
    priors = ensemble.priors
    bound = float((o ** 2).sum() / o.sum()) if o.sum() > 0 else 0.0
    report = CauchySchwarzReport(
        bound=bound,
        achieved=float(priors @ o),
        cs_rhs=float(np.sqrt((priors ** 2).sum() * (o ** 2).sum())),
        prior_gap=float(np.abs(priors - o / o.sum()).max()) if o.sum() > 0 else 1.0,
        overlaps=o,
        strict=bool(bound < 1.0)
    )
    if (o < 1 - 1e-12).any() and not report.strict:
        raise ArithmeticError("bound reached one with a non-unit overlap")
    return report


def validate_kraus(kraus: Sequence[np.ndarray], tolerance: float = KRAUS_TOLERANCE):
    dim = kraus[0].shape[1]
    total = sum(k.conj().T @ k for k in kraus)
    error = float(np.linalg.norm(total - np.eye(dim), 2))
    if error > tolerance:
        raise ValueError(f"Kraus operators are not trace preserving (error {error:.3g})")


def apply_channel(rho: np.ndarray, kraus: Sequence[np.ndarray]) -> np.ndarray:
    return sum(k @ rho @ k.conj().T for k in kraus)


def random_channel(dim: int, ancilla_dim: int, rng) -> List[np.ndarray]:
    """
    Haar-random TPCP map: a unitary on system x ancilla applied to rho x |0><0|,
    then the ancilla traced out

    Returns:
        ancilla_dim Kraus operators of shape (dim, dim)
    """
    u = unitary_group.rvs(dim * ancilla_dim, random_state=rng)
    isometry = u[:, ::ancilla_dim]
    blocks = isometry.reshape(dim, ancilla_dim, dim)
    return [blocks[:, a, :] for a in range(ancilla_dim)]


def depolarizing_channel(dim: int) -> List[np.ndarray]:
    """rho -> tr(rho) I / dim"""
    kraus = []
    for i in range(dim):
        for j in range(dim):
            k = np.zeros((dim, dim), dtype=complex)
            k[i, j] = 1.0 / np.sqrt(dim)
            kraus.append(k)
    return kraus


@dataclass
class DpiReport:
    trials: int
    violations: int
    max_increase: float
    before: float
    after: List[float] = field(default_factory=list)


def _best_success(priors, densities) -> float:
    if len(priors) == 2:
        return helstrom_binary(densities[0], densities[1], priors[0])
    return srm_densities(priors, densities)[1]


def dpi_check(ensemble: PureStateEnsemble, channels: Optional[Sequence[Sequence[np.ndarray]]] = None,
              trials: int = 100, ancilla_dim: int = 2, seed=None,
              tolerance: float = 1e-9) -> DpiReport:
    """
    Check that local channels never raise Eve's discrimination success

    Binary ensembles compare Helstrom before and after. Larger ensembles
    compare the SRM after the channel with the pairwise Helstrom bound
    before it.

    Args:
        ensemble: Hypotheses
        channels: Kraus sets on the span; Haar-random channels are drawn when None
        trials: Number of random channels
        ancilla_dim: Ancilla dimension of the random channels
        seed: RNG seed for the random channels
        tolerance: Allowed numerical increase

    Returns:
        DpiReport
    """
    priors, densities = ensemble.priors, ensemble.densities()
    dim = ensemble.dimension
    if len(priors) == 2:
        before = helstrom_binary(densities[0], densities[1], priors[0])
    else:
        before = pairwise_helstrom_bound(priors, densities)
    if channels is None:
        rng = np.random.default_rng(seed)
        channels = [random_channel(dim, ancilla_dim, rng) for _ in range(trials)]

    after = []
    for kraus in channels:
        validate_kraus(kraus)
        outputs = [apply_channel(rho, kraus) for rho in densities]
        after.append(_best_success(priors, outputs))
    increase = max((a - before for a in after), default=0.0)
    report = DpiReport(
        trials=len(after),
        violations=sum(1 for a in after if a > before + tolerance),
        max_increase=increase,
        before=before,
        after=after
    )
    logger.info(f"DPI check: {report.violations} violations in {report.trials} channels, "
                f"max increase {increase:.3g}")
    return report


class MixedEnsemble:
    """
    Hypotheses that are mixtures of pure states, as produced by randomising
    the transmitted state per hypothesis

    Args:
        priors: Prior per hypothesis
        components: Per hypothesis, (weight, state) pairs with weights summing to one;
            a state is a tuple of FockVectors
    """

    def __init__(self, priors: Sequence[float], components: Sequence[Sequence[Tuple[float, Sequence[FockVector]]]]):
        self.priors = np.asarray(priors, dtype=float)
        if abs(self.priors.sum() - 1.0) > 1e-12:
            raise ValueError("priors must sum to 1")
        flat_states, owners, weights = [], [], []
        for r, mixture in enumerate(components):
            total = sum(w for w, _ in mixture)
            if abs(total - 1.0) > 1e-12:
                raise ValueError(f"mixture weights of hypothesis {r} sum to {total}")
            for w, state in mixture:
                flat_states.append(tuple(state) if not isinstance(state, FockVector) else (state,))
                owners.append(r)
                weights.append(w)
        if len(flat_states) > MAX_HYPOTHESES:
            raise ValueError(f"at most {MAX_HYPOTHESES} mixture components supported")
        uniform = np.full(len(flat_states), 1.0 / len(flat_states))
        self._span = PureStateEnsemble(range(len(flat_states)), uniform, flat_states)
        self._owners = np.asarray(owners)
        self._weights = np.asarray(weights)

    def densities(self) -> List[np.ndarray]:
        vectors = self._span.coordinates.T
        out = []
        for r in range(len(self.priors)):
            members = np.flatnonzero(self._owners == r)
            out.append(sum(self._weights[i] * np.outer(vectors[i], vectors[i].conj()) for i in members))
        return out


@dataclass
class DsrComparison:
    mixed: float
    pure: Optional[float]

    @property
    def increased(self) -> bool:
        return self.pure is not None and self.mixed > self.pure + 1e-9


def mixed_ensemble_success(mixed: MixedEnsemble, pure: Optional[PureStateEnsemble] = None,
                           measurement: Optional[MeasurementSet] = None) -> DsrComparison:
    """
    Eve's success against randomised (mixed) hypotheses, paired with the
    unrandomised ensemble

    Each side uses its best available measurement (Helstrom for two
    hypotheses, SRM otherwise) unless a measurement in the mixed ensemble's
    coordinates is supplied.
    """
    densities = mixed.densities()
    if measurement is not None:
        success = success_probability(mixed.priors, densities, measurement)
    else:
        success = _best_success(mixed.priors, densities)
    reference = None
    if pure is not None:
        reference = _best_success(pure.priors, pure.densities())
    return DsrComparison(mixed=success, pure=reference)


def quantized_povm(M: int, n_max: int) -> MeasurementSet:
    """
    Heterodyne outcome binned into 2M phase sectors, in the truncated Fock basis

    Sector j is centred on phase pi j / M with width pi / M, matching the
    classical decision regions. Elements:
    <n|P_j|k> = Gamma((n + k)/2 + 1) / (2 pi sqrt(n! k!)) * int_sector exp(i(n - k) phi) dphi
    """
    n = np.arange(n_max + 1)
    nn, kk = np.meshgrid(n, n, indexing='ij')
    radial = np.exp(gammaln((nn + kk) / 2 + 1) - 0.5 * (gammaln(nn + 1) + gammaln(kk + 1))) / (2 * np.pi)
    diff = nn - kk
    width = np.pi / M
    operators = []
    for j in range(2 * M):
        lo, hi = j * width - width / 2, j * width + width / 2
        with np.errstate(divide='ignore', invalid='ignore'):
            angular = np.where(diff == 0, width,
                               (np.exp(1j * diff * hi) - np.exp(1j * diff * lo)) / (1j * np.where(diff == 0, 1, diff)))
        operators.append(radial * angular)
    return MeasurementSet(operators)
