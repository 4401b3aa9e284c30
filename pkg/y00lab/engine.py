"""
Scenario orchestration engine
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from y00lab.breach import (BreachParams, BreachReport, Classification, average_success,
                           breach_report, key_prior, mp, reference_params)
from y00lab.channel import (decide_symbol, decision_regions, pattern_dist, symbol_error_dist,
                            tap_and_measure, bob_receive)
from y00lab.config import DsrSpec, MappingTable, ScenarioConfig, Y00Config
from y00lab.errors import RefreshAbortedError, Y00LabError
from y00lab.fca import attack_running_key, leak_crossovers
from y00lab.keyfresh import (ExtractorParams, eve_bit_guess_probability, guess_probability_bound,
                             optimal_tau, plan_refresh, refresh_roundtrip)
from y00lab.prng import LfsrSpec, expand_running_key, running_key_period
from y00lab.qdetect import (MixedEnsemble, PureStateEnsemble, coherent_fock, coherent_overlap,
                            cs_bound, dpi_check, fock_cutoff, helstrom_binary, mixed_ensemble_success,
                            optimal_measurement, optimality_residuals, psk_ensemble, quantized_povm,
                            srm, MeasurementSet)
from y00lab.utils import format_duration, parse_grid, render_csv
from y00lab.y00core import SymbolTrace, demodulate_bob, dsr_words, modulate, modulate_dsr

logger = logging.getLogger(__name__)


def fmt(value) -> str:
    """Stable text form of floats and mpf values for artifacts"""
    if value is None:
        return ""
    if value == mp.inf or value == np.inf:
        return "inf"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return mp.nstr(mp.mpf(value), 17) if not isinstance(value, float) else f"{value:.12g}"


@dataclass
class TrialResult:
    """Result of one correlation attack trial"""
    trial: int
    success: bool
    true_seed: int = 0
    recovered_seed: Optional[int] = None
    crossover: float = 0.5
    confidence: float = 0.0
    iterations: int = 0
    converged: bool = False
    error_message: Optional[str] = None
    duration_seconds: float = 0.0


@dataclass
class CampaignResult:
    """Overall attack campaign result"""
    total_trials: int
    successful: int = 0
    failed: int = 0
    refused: int = 0
    trial_results: List[TrialResult] = field(default_factory=list)
    start_time: float = field(default_factory=time.perf_counter)
    duration_seconds: float = 0.0

    def add_result(self, result: TrialResult):
        """Add a trial result and update counters"""
        self.trial_results.append(result)

        if result.success:
            self.successful += 1
        elif result.error_message:
            self.refused += 1
        else:
            self.failed += 1

    def finalize(self):
        """Order trials by index and record timing"""
        self.trial_results.sort(key=lambda r: r.trial)
        self.duration_seconds = time.perf_counter() - self.start_time

    @property
    def success_rate(self) -> float:
        return self.successful / self.total_trials if self.total_trials else 0.0


@dataclass
class SimulationResult:
    """One simulated transmission as seen by Alice, Eve and Bob"""
    trace: SymbolTrace
    eve_symbols: np.ndarray
    bob_bits: np.ndarray
    bob_errors: int
    t_lcm: Optional[int]

    @property
    def bob_ber(self) -> float:
        return self.bob_errors / len(self.trace) if len(self.trace) else 0.0


@dataclass
class RefreshRun:
    run: int
    status: str
    transcript: object = None
    message: str = ""


class ScenarioEngine:
    """Runs every analysis of one scenario file"""

    def __init__(self, config: ScenarioConfig):
        """
        Initialize scenario engine

        Args:
            config: Loaded scenario configuration
        """
        self.config = config
        self.cfg: Y00Config = config.y00

    @property
    def seed(self) -> int:
        return self.config.seed

    def csv(self, columns, rows, metadata: Sequence[str] = ()) -> str:
        return render_csv(columns, rows, digest=self.config.digest, seed=self.seed, metadata=metadata)

    def _random_keys(self, rng: np.random.Generator) -> Tuple[int, int]:
        keys = []
        for generator in (self.cfg.prng_s, self.cfg.prng_dx):
            low = 1 if isinstance(generator, LfsrSpec) else 0
            keys.append(int(rng.integers(low, 1 << generator.seed_width)))
        return keys[0], keys[1]

    def _transmit(self, keys: Tuple[int, int], x: np.ndarray, rng: np.random.Generator):
        running_key = expand_running_key(keys[0], keys[1], self.cfg, len(x),
                                         self.config.breach.period_cap)
        if self.cfg.dsr.mode == 'none':
            trace = modulate(running_key, x, self.cfg)
        else:
            trace = modulate_dsr(running_key, x, dsr_words(self.cfg, len(x), rng), self.cfg)
        return running_key, trace

    # Simulation

    def simulate(self, horizon: Optional[int] = None) -> SimulationResult:
        """
        Transmit random plaintext under the configured keys

        Args:
            horizon: Number of slots (simulation.horizon by default)

        Returns:
            SimulationResult
        """
        horizon = horizon or self.config.simulation.horizon
        rng = np.random.default_rng([self.seed, 0])
        x = rng.integers(0, 2, size=horizon).astype(np.uint8)
        keys = (self.cfg.prng_s.seed, self.cfg.prng_dx.seed)
        running_key, trace = self._transmit(keys, x, rng)

        eve = tap_and_measure(trace, self.cfg, [self.seed, 1])
        bob = bob_receive(trace, self.cfg, [self.seed, 2])
        decision = demodulate_bob(bob, running_key, self.cfg, x_true=x,
                                  d=trace.d if self.cfg.dsr.mode == 'keyed' else None)
        result = SimulationResult(
            trace=trace,
            eve_symbols=decide_symbol(eve, decision_regions(self.cfg)),
            bob_bits=decision.bits,
            bob_errors=decision.errors,
            t_lcm=running_key.t_lcm
        )
        logger.info(f"Simulated {horizon} slots: Bob BER {result.bob_ber:.3g}, T_LCM={result.t_lcm}")
        return result

    def simulation_csv(self, result: SimulationResult) -> str:
        rows = [row + (int(e), int(b)) for row, e, b in
                zip(result.trace.to_rows(), result.eve_symbols, result.bob_bits)]
        metadata = [f"bob_errors={result.bob_errors}", f"bob_ber={fmt(result.bob_ber)}",
                    f"t_lcm={fmt(result.t_lcm)}"]
        return self.csv(["t", "m", "re", "im", "x", "d", "eve_m", "bob_x"], rows, metadata)

    # Breach analytics

    def breach_params(self, p_th: Optional[float] = None) -> BreachParams:
        """Breach parameters of the configured design under its uniform key prior"""
        cfg, settings = self.cfg, self.config.breach
        p_th = settings.p_th if p_th is None else p_th
        t_lcm = running_key_period(cfg, settings.period_cap)
        r = x = None
        if cfg.geometry == 'isk' and t_lcm is not None:
            rng = np.random.default_rng([self.seed, 3])
            x = rng.integers(0, 2, size=t_lcm).astype(np.uint8)
            r = expand_running_key(cfg.prng_s.seed, cfg.prng_dx.seed, cfg, t_lcm, settings.period_cap)
        dist = pattern_dist(cfg, r, x, t_lcm=t_lcm, settings=settings)
        nonzero = tuple(isinstance(g, LfsrSpec) for g in (cfg.prng_s, cfg.prng_dx))
        return BreachParams.from_dist(dist, key_prior(cfg.key_widths, nonzero), p_th)

    def analyze_breach(self, grid: Optional[str] = None, p_th: Optional[float] = None,
                       reference: bool = False) -> List[Tuple[str, BreachReport]]:
        """
        Breach reports for the scenario, or for the three reference curves

        Returns:
            (label, BreachReport) pairs
        """
        n_grid = parse_grid(grid or self.config.breach.grid)
        if reference:
            params = reference_params()
            labels = ["1-2^-13", "1-2^-26", "1-2^-52"]
            if p_th is not None:
                params = [replace(p, p_th=mp.mpf(p_th)) for p in params]
        else:
            params = [self.breach_params(p_th)]
            labels = ["scenario"]
        reports = [(label, breach_report(p, n_grid)) for label, p in zip(labels, params)]
        for label, report in reports:
            logger.info(f"Breach [{label}]: 1/N_Breach={fmt(report.inv_n_breach)} "
                        f"-> {report.classification.value}")
        return reports

    def breach_csv(self, reports: List[Tuple[str, BreachReport]]) -> str:
        rows = []
        metadata = []
        for label, report in reports:
            metadata.append(f"curve={label} inv_n_breach={fmt(report.inv_n_breach)} "
                            f"classification={report.classification.value} "
                            f"n_at_threshold={fmt(report.n_at_threshold)} p_th={fmt(report.p_th)} "
                            f"prior={fmt(report.prior)}")
            for point in report.curve:
                rows.append((label, fmt(point.n), fmt(point.upper_bound), fmt(point.distance_to_one)))
        return self.csv(["curve", "n", "upper_bound", "distance_to_one"], rows, metadata)

    # Fast correlation attack

    def run_fca(self, trials: Optional[int] = None, horizon: Optional[int] = None) -> CampaignResult:
        """
        Correlation attack campaign against fresh random keys

        Args:
            trials: Number of trials
            horizon: Slots observed per trial

        Returns:
            CampaignResult with trials in index order
        """
        settings = self.config.attack
        trials = trials or settings.trials
        horizon = horizon or settings.horizon
        logger.info(f"Starting correlation attack campaign: {trials} trial(s), {horizon} slots each")
        result = CampaignResult(total_trials=trials)

        with ThreadPoolExecutor(max_workers=max(1, min(settings.workers, trials))) as executor:
            future_to_trial = {
                executor.submit(self._attack_trial, trial, horizon): trial
                for trial in range(trials)
            }

            for future in as_completed(future_to_trial):
                trial = future_to_trial[future]
                try:
                    trial_result = future.result()
                except Y00LabError as e:
                    trial_result = TrialResult(trial=trial, success=False, error_message=str(e))
                result.add_result(trial_result)

                if trial_result.success:
                    logger.info(f"✓ trial {trial}: seed recovered ({trial_result.iterations} rounds)")
                else:
                    logger.debug(f"✗ trial {trial}: {trial_result.error_message or 'wrong seed'}")

        result.finalize()
        logger.info(f"Campaign completed in {format_duration(result.duration_seconds)}: "
                    f"{result.successful}/{result.total_trials} recovered, {result.refused} refused")
        return result

    def _attack_trial(self, trial: int, horizon: int) -> TrialResult:
        start = time.perf_counter()
        rng = np.random.default_rng([self.seed, trial])
        keys = self._random_keys(rng)
        x = rng.integers(0, 2, size=horizon).astype(np.uint8)
        _, trace = self._transmit(keys, x, rng)
        outcomes = tap_and_measure(trace, self.cfg, [self.seed, trial, 1])
        symbols = decide_symbol(outcomes, decision_regions(self.cfg))

        outcome = TrialResult(trial=trial, success=False, true_seed=keys[0])
        try:
            attack = attack_running_key(symbols, self.cfg, self.config.attack)
        except Y00LabError as e:
            outcome.error_message = str(e)
        else:
            outcome.recovered_seed = attack.source_seed
            outcome.success = attack.source_seed == keys[0]
            outcome.confidence = attack.confidence
            outcome.iterations = attack.iterations
            outcome.converged = attack.converged
            outcome.crossover = float(min(leak_crossovers(self.cfg)))
        outcome.duration_seconds = time.perf_counter() - start
        return outcome

    def fca_csv(self, result: CampaignResult) -> str:
        width = -(-self.cfg.prng_s.seed_width // 4)
        hexed = lambda v: "" if v is None else format(v, f'0{width}x')
        rows = [(r.trial, int(r.success), hexed(r.true_seed), hexed(r.recovered_seed),
                 fmt(r.crossover), fmt(r.confidence), r.iterations, int(r.converged),
                 r.error_message or "")
                for r in result.trial_results]
        metadata = [f"trials={result.total_trials} recovered={result.successful} "
                    f"refused={result.refused}"]
        return self.csv(["trial", "success", "true_seed", "recovered_seed", "crossover",
                         "confidence", "iterations", "converged", "note"], rows, metadata)

    # Quantum detection

    def run_qdetect(self) -> List[Tuple[str, float, float, bool]]:
        """
        Desk-scale quantum detection checks at the configured amplitude

        Returns:
            (quantity, value, reference, ok) rows
        """
        settings = self.config.qdetect
        alpha = settings.alpha
        rows = []

        overlap = abs(coherent_fock(alpha).inner(coherent_fock(-alpha))) ** 2
        rows.append(("overlap_pm_alpha", overlap, float(np.exp(-4 * alpha ** 2)),
                     abs(overlap - np.exp(-4 * alpha ** 2)) <= 1e-10))

        binary = psk_ensemble(2, alpha)
        rho = binary.densities()
        helstrom = helstrom_binary(rho[0], rho[1], 0.5)
        closed = 0.5 * (1 + np.sqrt(1 - abs(coherent_overlap(alpha, -alpha)) ** 2))
        rows.append(("helstrom_binary", helstrom, closed, abs(helstrom - closed) <= 1e-9))

        measurement, success = srm(binary)
        rows.append(("srm_binary", success, closed, abs(success - closed) <= 1e-9))
        cs = cs_bound(binary, measurement)
        rows.append(("cs_bound_binary", cs.bound, cs.achieved, cs.achieved <= cs.bound + 1e-12 and cs.strict))

        ensemble = psk_ensemble(settings.psk_order, alpha)
        measurement, success = srm(ensemble)
        report = optimality_residuals(ensemble, measurement)
        rows.append(("srm_psk_success", success, report.success, abs(success - report.success) <= 1e-12))
        rows.append(("srm_psk_stationarity", report.stationarity, 1e-8, report.stationarity <= 1e-8))
        rows.append(("srm_psk_symmetry", report.symmetry, 1e-8, report.symmetry <= 1e-8))

        skewed = psk_ensemble(settings.psk_order, alpha,
                              priors=np.arange(1, settings.psk_order + 1) / np.arange(1, settings.psk_order + 1).sum())
        refined = optimal_measurement(skewed)
        rows.append(("optimal_skewed_success", refined.report.success, srm(skewed)[1],
                     refined.report.success >= srm(skewed)[1] - 1e-9))

        dpi = dpi_check(binary, trials=settings.channel_trials, ancilla_dim=settings.ancilla_dim,
                        seed=[self.seed, 4])
        rows.append(("dpi_violations", float(dpi.violations), 0.0, dpi.violations == 0))

        n_max = fock_cutoff(alpha)
        mixed = MixedEnsemble([0.5, 0.5], [
            [(0.5, (coherent_fock(alpha, n_max),)), (0.5, (coherent_fock(1j * alpha, n_max),))],
            [(0.5, (coherent_fock(-alpha, n_max),)), (0.5, (coherent_fock(-1j * alpha, n_max),))],
        ])
        comparison = mixed_ensemble_success(mixed, binary)
        rows.append(("dsr_mixed_vs_pure", comparison.mixed, comparison.pure, not comparison.increased))

        bridge, reference = self._quantized_bridge(settings.psk_order, alpha)
        rows.append(("quantized_bridge", bridge, reference, abs(bridge - reference) <= 1e-9))

        failed = [row[0] for row in rows if not row[3]]
        if failed:
            logger.warning(f"Quantum detection checks failed: {failed}")
        return rows

    def _quantized_bridge(self, order: int, beta: float) -> Tuple[float, float]:
        """Quantized-measurement success against the classical sector model"""
        M = order // 2
        ensemble = PureStateEnsemble(
            list(range(order)), np.full(order, 1.0 / order),
            [(coherent_fock(beta * np.exp(1j * np.pi * m / M)),) for m in range(order)])
        n_max = max(s[0].n_max for s in ensemble.states)
        povm = quantized_povm(M, n_max)
        measurement = MeasurementSet([ensemble.to_span(op) for op in povm.operators])
        quantum = optimality_residuals(ensemble, measurement).success

        sector_cfg = replace(self.cfg, M=M, geometry='psk', mapping=MappingTable(), dsr=DsrSpec())
        row = symbol_error_dist(0, sector_cfg, scale=np.sqrt(2) * beta, variance=1.0)
        prior = {m: 1.0 / order for m in range(order)}
        classical = average_success({m: row[0] for m in range(order)}, prior)
        return quantum, classical

    def qdetect_csv(self, rows) -> str:
        return self.csv(["quantity", "value", "reference", "ok"],
                        [(q, fmt(float(v)), fmt(float(r)), int(ok)) for q, v, r, ok in rows],
                        [f"alpha={fmt(self.config.qdetect.alpha)} psk_order={self.config.qdetect.psk_order}"])

    # Key refreshment

    def run_keyfresh(self, hinf_mode: Optional[str] = None, tau: Optional[str] = None) -> List[RefreshRun]:
        """
        Consecutive refresh rounds starting from the configured keys

        Aborted rounds keep the current keys.
        """
        settings = self.config.refresh
        hinf_mode = hinf_mode or settings.hinf_mode
        tau = tau or settings.tau
        guess = eve_bit_guess_probability(self.cfg, settings.rate, hinf_mode)
        plan = plan_refresh(self.cfg, guess.h_per_bit, settings.rate)
        if tau != 'auto':
            params = ExtractorParams.from_h_inf(plan.h_inf, self.config.breach.p_th, tau=int(tau))
        else:
            params = ExtractorParams.from_h_inf(plan.h_inf, self.config.breach.p_th)
        bound = guess_probability_bound(params, settings.margin)
        logger.info(f"Refresh plan: {plan.slots} slots, H_inf={plan.h_inf:.6g}, "
                    f"tau*={optimal_tau(plan.h_inf).tau}, guess bound {bound.bound:.3g}")
        if not bound.satisfied:
            logger.warning(f"Guess bound {bound.bound:.3g} is not below p_th/{settings.margin:g}")

        keys = (self.cfg.prng_s.seed, self.cfg.prng_dx.seed)
        runs = []
        for run in range(settings.runs):
            rng = np.random.default_rng([self.seed, 5, run])
            try:
                transcript = refresh_roundtrip(self.cfg, keys, rng, plan=plan)
            except RefreshAbortedError as e:
                runs.append(RefreshRun(run, "aborted", message=str(e)))
                logger.warning(f"✗ refresh {run}: {e}")
                continue
            keys = transcript.alice_keys
            runs.append(RefreshRun(run, "ok", transcript))
            logger.info(f"✓ refresh {run}: new keys adopted")
        self._refresh_bound = bound
        return runs

    def keyfresh_csv(self, runs: List[RefreshRun]) -> str:
        rows = []
        for run in runs:
            t = run.transcript
            if t is None:
                rows.append((run.run, run.status, "", "", "", "", "", "", run.message))
                continue
            rows.append((run.run, run.status, t.plan.slots, t.plan.n_raw, t.plan.tau,
                         t.raw_errors, t.corrected_errors,
                         format(t.alice_keys[0], 'x'), format(t.alice_keys[1], 'x')))
        bound = getattr(self, '_refresh_bound', None)
        metadata = [f"guess_bound={fmt(bound.bound)} satisfied={int(bound.satisfied)}"] if bound else []
        return self.csv(["run", "status", "slots", "n_raw", "tau", "raw_errors", "corrected_errors",
                         "k_new", "dk_new"], rows, metadata)

    # Report

    def generate_report(self, report: BreachReport, t_lcm: Optional[int]) -> str:
        """
        One-page ITS classification summary

        Args:
            report: Breach report of the scenario
            t_lcm: Period in slots

        Returns:
            Formatted report as string
        """
        cfg = self.cfg
        lines = []
        lines.append("=" * 70)
        lines.append("Y00 SECURITY REPORT")
        lines.append("=" * 70)
        lines.append(f"Config digest: {self.config.digest}")
        lines.append(f"Seed:          {self.seed}")
        lines.append("")
        lines.append("SYSTEM")
        lines.append("-" * 70)
        lines.append(f"Geometry:         {cfg.geometry.upper()}, M = {cfg.M}")
        lines.append(f"Mapping:          {cfg.mapping.kind}")
        lines.append(f"DSR:              {cfg.dsr.mode}")
        lines.append(f"alpha0 / eta:     {fmt(cfg.alpha0)} / {fmt(cfg.eta)}")
        lines.append(f"T_LCM (slots):    {fmt(t_lcm)}")
        lines.append("")
        lines.append("BREACH ANALYSIS")
        lines.append("-" * 70)
        lines.append(f"1/N_Breach:       {fmt(report.inv_n_breach)}")
        lines.append(f"N_Breach:         {fmt(report.n_breach)}")
        lines.append(f"Classification:   {report.classification.value}")
        lines.append(f"Key prior Pr(r):  {fmt(report.prior)}")
        lines.append(f"P_Th:             {fmt(report.p_th)}")
        lines.append(f"Periods to P_Th:  {fmt(report.n_at_threshold)}")
        lines.append("")
        lines.append("KEY REFRESHMENT")
        lines.append("-" * 70)
        if report.classification is Classification.IDEAL:
            lines.append("Recommended refresh period: inf (bound never reaches P_Th)")
        else:
            periods = mp.floor(report.n_at_threshold)
            slots = "" if t_lcm is None else f" ({fmt(periods * t_lcm)} slots)"
            lines.append(f"Recommended refresh period: {fmt(periods)} periods{slots}")
        crossovers = leak_crossovers(cfg) if cfg.mapping.kind != 'scrambled' else None
        if crossovers is not None:
            lines.append("")
            lines.append("KEYSTREAM LEAKAGE")
            lines.append("-" * 70)
            for position, p in enumerate(crossovers):
                lines.append(f"  • bit {position}: crossover {p:.6f}")
        lines.append("")
        lines.append("=" * 70)
        return "\n".join(lines) + "\n"
