"""
Monte Carlo estimation of satisfaction probabilities under the discretized
and the (PL-approximated) continuous semantics, convergence sweeps over the
grid resolution, and the canned experiments with their CSV/JSON reports.

All estimates in one run share per-path random streams. When every
resolution divides the finest one, each path is sampled once on the finest
grid and coarsened (nested grids), which couples the estimates path by path.
"""
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
from scipy.stats import norm

from config import get_settings
from csem import holds_at
from dsem import eval_all, reach_steps
from errors import DomainError, HorizonExceeded
from formula import (
    AtomMap,
    atoms_of,
    counterexample_formulas,
    flat_diamond_formula,
    flat_zero_formula,
    parse,
    temporal_depth,
    to_text,
)
from stochastic import SamplerConfig, brownian_hitting_prob, sample_paths, stay_nonpositive_prob
from timeset import make_interval, parse_region
from traces import GridTrace, first_passage, lambda_index

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["semantics", "n", "trials", "successes", "p_hat", "ci_lo", "ci_hi", "oracle", "verdict"]


# ==================== ESTIMATES ====================

def wilson_ci(successes, trials, confidence=0.95):
    """Wilson score interval for a binomial proportion"""
    if trials < 1 or not 0 <= successes <= trials:
        raise DomainError(f"need 0 <= successes <= trials and trials >= 1, got {successes}/{trials}")
    if not 0 < confidence < 1:
        raise DomainError(f"confidence must lie in (0, 1), got {confidence}")
    z = float(norm.ppf(1 - (1 - confidence) / 2))
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


@dataclass
class Estimate:
    trials: int
    successes: int
    semantics: str
    resolution: int
    confidence: float = 0.95
    oracle: Optional[float] = None
    verdict: Optional[str] = None
    ci_lo: float = field(init=False)
    ci_hi: float = field(init=False)

    def __post_init__(self):
        self.ci_lo, self.ci_hi = wilson_ci(self.successes, self.trials, self.confidence)

    @property
    def p_hat(self):
        return self.successes / self.trials

    @property
    def label(self):
        if self.semantics == "discrete":
            return f"discrete-{self.resolution}"
        if self.semantics == "continuous-pl":
            return f"continuous-PL-{self.resolution}"
        return f"{self.semantics}-PL-{self.resolution}"

    def interval(self, confidence):
        return wilson_ci(self.successes, self.trials, confidence)

    def overlaps(self, other):
        return self.ci_lo <= other.ci_hi and other.ci_lo <= self.ci_hi

    def as_row(self):
        return {
            "semantics": self.semantics,
            "n": self.resolution,
            "trials": self.trials,
            "successes": self.successes,
            "p_hat": self.p_hat,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "oracle": self.oracle,
            "verdict": self.verdict,
        }


# ==================== PER-PATH CHECKS ====================

@dataclass(frozen=True)
class Check:
    """One Bernoulli outcome per path: a formula under one semantics, or a debut event"""

    semantics: str
    resolution: int
    phi: object = None
    region: object = None
    window: object = None


@dataclass(frozen=True)
class _Job:
    sampler: SamplerConfig
    fine_n: int
    horizon: float
    seed: int
    start: int
    stop: int
    checks: tuple
    atoms: AtomMap
    t: float
    pl_horizon: float


def _pl_horizon(checks, t, horizon):
    needed = 0.0
    for check in checks:
        if check.semantics == "continuous-pl":
            needed = max(needed, t + temporal_depth(check.phi))
        elif check.semantics == "debut":
            needed = max(needed, min(check.window.hi.value, horizon))
    return min(needed, horizon)


def _evaluate_path(values, job):
    grid = GridTrace(job.fine_n, values)
    pl_traces = {}
    outcome = []
    for check in job.checks:
        r = check.resolution
        coarse = grid if r == job.fine_n else grid.coarsen(job.fine_n // r)
        if check.semantics == "discrete":
            truth = eval_all(check.phi, coarse, job.atoms)[lambda_index(job.t, r)]
            if truth is np.ma.masked:
                raise HorizonExceeded(job.t + reach_steps(check.phi, r) / r, coarse.horizon)
            outcome.append(bool(truth))
            continue
        pl = pl_traces.get(r)
        if pl is None:
            pl = coarse.to_pl().truncate(job.pl_horizon)
            pl_traces[r] = pl
        if check.semantics == "continuous-pl":
            outcome.append(holds_at(check.phi, pl, job.atoms, job.t))
        else:
            outcome.append(check.window.contains(first_passage(pl, check.region)))
    return outcome


def _run_job(job):
    paths = sample_paths(job.sampler, job.fine_n, job.horizon, job.seed, range(job.start, job.stop))
    return np.array([_evaluate_path(row, job) for row in paths], dtype=bool).reshape(-1, len(job.checks))


def _plan(checks):
    """Group checks into sampling passes: everything nested in the finest grid shares one pass"""
    fine = max(c.resolution for c in checks)
    passes = {}
    for j, check in enumerate(checks):
        key = fine if fine % check.resolution == 0 else check.resolution
        passes.setdefault(key, []).append(j)
    return passes


def _check_fits(checks, t, horizon):
    for check in checks:
        if check.semantics == "discrete":
            n = check.resolution
            needed = lambda_index(t, n) + reach_steps(check.phi, n)
            if needed > lambda_index(horizon, n):
                raise HorizonExceeded(needed / n, horizon)
        elif check.semantics == "continuous-pl":
            needed = t + temporal_depth(check.phi)
            if needed > horizon and not math.isclose(needed, horizon, rel_tol=1e-12):
                raise HorizonExceeded(needed, horizon)


def run_checks(sampler, horizon, checks, atoms, t, trials, seed, workers=None, chunk_size=None):
    """
    Boolean matrix (trials x checks). Paths are cut into fixed chunks of
    path indices, so the result does not depend on the number of workers.
    """
    settings = get_settings()
    workers = workers or settings.workers
    chunk_size = chunk_size or settings.chunk_size
    checks = tuple(checks)
    if trials < 1:
        raise DomainError(f"trials must be at least 1, got {trials}")
    _check_fits(checks, t, horizon)
    atoms = atoms if atoms is not None else AtomMap()
    for check in checks:
        if check.phi is not None:
            for name in sorted(atoms_of(check.phi)):
                atoms.region(name)

    outcomes = np.zeros((trials, len(checks)), dtype=bool)
    for fine_n, columns in _plan(checks).items():
        selected = tuple(checks[j] for j in columns)
        pl_horizon = _pl_horizon(selected, t, horizon)
        jobs = [
            _Job(sampler, fine_n, horizon, seed, start, min(start + chunk_size, trials), selected, atoms, t, pl_horizon)
            for start in range(0, trials, chunk_size)
        ]
        logger.info("📊 Sampling %d paths of %s on N/%d (%d chunks, %d workers)", trials, sampler, fine_n, len(jobs), workers)
        if workers == 1 or len(jobs) == 1:
            blocks = [_run_job(job) for job in jobs]
        else:
            with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
                blocks = list(pool.map(_run_job, jobs))
        outcomes[:, columns] = np.vstack(blocks)
    return outcomes


def _estimates(checks, outcomes, confidence):
    return [
        Estimate(int(outcomes.shape[0]), int(outcomes[:, j].sum()), c.semantics, c.resolution, confidence)
        for j, c in enumerate(checks)
    ]


def _defaults(seed, confidence):
    settings = get_settings()
    return (settings.seed if seed is None else seed), (settings.confidence if confidence is None else confidence)


def estimate_discrete(phi, sampler, atoms, t, n, trials, seed=None, confidence=None, horizon=None, **pool):
    """Estimate P(X, Lambda_n(t) |=_n phi) over `trials` paths on N/n"""
    seed, confidence = _defaults(seed, confidence)
    horizon = horizon or max(t + temporal_depth(phi), 1.0 / n)
    checks = [Check("discrete", n, phi)]
    outcomes = run_checks(sampler, horizon, checks, atoms, t, trials, seed, **pool)
    estimate = _estimates(checks, outcomes, confidence)[0]
    logger.info("✅ %s of %s: p_hat=%.6g", estimate.label, to_text(phi), estimate.p_hat)
    return estimate


def estimate_continuous_pl(phi, sampler, atoms, t, m, trials, seed=None, confidence=None, horizon=None, **pool):
    """Estimate P(X, t |= phi) with X replaced by its PL interpolation on N/m"""
    seed, confidence = _defaults(seed, confidence)
    horizon = horizon or max(t + temporal_depth(phi), 1.0 / m)
    checks = [Check("continuous-pl", m, phi)]
    outcomes = run_checks(sampler, horizon, checks, atoms, t, trials, seed, **pool)
    estimate = _estimates(checks, outcomes, confidence)[0]
    logger.info("✅ %s of %s: p_hat=%.6g", estimate.label, to_text(phi), estimate.p_hat)
    return estimate


def estimate_debut_window(sampler, region, window, m, trials, seed=None, confidence=None, horizon=None, **pool):
    """Estimate P(first entry time of the PL path into region lies in window)"""
    seed, confidence = _defaults(seed, confidence)
    if horizon is None:
        if math.isinf(window.hi.value):
            raise DomainError("an unbounded debut window needs an explicit horizon")
        horizon = window.hi.value
    checks = [Check("debut", m, region=region, window=window)]
    outcomes = run_checks(sampler, horizon, checks, None, 0.0, trials, seed, **pool)
    return _estimates(checks, outcomes, confidence)[0]


@dataclass
class SweepResult:
    estimates: List[Estimate]
    outcomes: np.ndarray
    reference: Optional[Estimate] = None

    def monotone_violations(self):
        """Paths whose discrete truth drops as the resolution grows"""
        order = sorted(range(len(self.estimates)), key=lambda j: self.estimates[j].resolution)
        truth = self.outcomes[:, order].astype(np.int8)
        return int(np.any(np.diff(truth, axis=1) < 0, axis=1).sum())

    def frame(self):
        rows = [e.as_row() for e in self.estimates]
        if self.reference is not None:
            rows.append(self.reference.as_row())
        return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def convergence_sweep(phi, sampler, atoms, t, ns, trials, seed=None, reference_m=None, confidence=None, horizon=None, **pool):
    """One discrete estimate per n, plus an optional continuous-PL reference, on common random numbers"""
    seed, confidence = _defaults(seed, confidence)
    resolutions = list(ns) + ([reference_m] if reference_m else [])
    horizon = horizon or max(t + temporal_depth(phi), 1.0 / min(resolutions))
    checks = [Check("discrete", n, phi) for n in ns]
    if reference_m:
        checks.append(Check("continuous-pl", reference_m, phi))
    outcomes = run_checks(sampler, horizon, checks, atoms, t, trials, seed, **pool)
    estimates = _estimates(checks, outcomes, confidence)
    reference = estimates.pop() if reference_m else None
    return SweepResult(estimates, outcomes[:, : len(ns)], reference)


# ==================== EXPERIMENTS ====================

@dataclass
class ExperimentReport:
    experiment: str
    seed: int
    trials: int
    rows: list
    verdict: str
    success: bool

    def frame(self):
        return pd.DataFrame(self.rows, columns=REPORT_COLUMNS)

    def as_dict(self):
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "trials": self.trials,
            "verdict": self.verdict,
            "success": self.success,
            "rows": [dict(row) for row in self.rows],
        }


def write_report(report, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{report.experiment}.csv"
    json_path = out / f"{report.experiment}.json"
    report.frame().to_csv(csv_path, index=False, lineterminator="\n")
    json_path.write_text(json.dumps(report.as_dict(), indent=2) + "\n", encoding="utf-8")
    logger.info("✅ Wrote %s and %s", csv_path, json_path)
    return csv_path, json_path


def _counterexample(trials, seed, confidence, pool):
    psi = counterexample_formulas()["psi"]
    atoms = AtomMap({"p": parse_region("[1,inf)")})
    ns, m = [2, 3, 4, 8, 16, 32], 4096
    window = make_interval(8, False, 9, False)
    checks = [Check("discrete", n, psi) for n in ns]
    checks.append(Check("continuous-pl", m, psi))
    checks.append(Check("debut", m, region=atoms.region("p"), window=window))
    outcomes = run_checks(SamplerConfig("bm"), 15.0, checks, atoms, 0.0, trials, seed, **pool)
    estimates = _estimates(checks, outcomes, confidence)
    discrete, continuous, event = estimates[: len(ns)], estimates[-2], estimates[-1]

    oracle = brownian_hitting_prob(1.0, 0.0, window)
    for e in discrete:
        e.oracle = 0.0
        e.verdict = "PASS" if e.successes == 0 else "FAIL"
    continuous.oracle = oracle
    continuous.verdict = "PASS" if continuous.ci_lo <= 1.2 * oracle and continuous.ci_hi >= 0.8 * oracle else "FAIL"
    event.oracle = oracle
    event.verdict = "PASS" if event.overlaps(continuous) else "FAIL"

    gap = all(e.successes == 0 for e in discrete) and continuous.interval(0.99)[0] > 0
    verdict = "GAP-CONFIRMED" if gap else "NO-GAP"
    success = gap and all(e.verdict == "PASS" for e in estimates)
    return estimates, verdict, success


def _flat_zero(trials, seed, confidence, pool):
    phi = flat_zero_formula()
    atoms = AtomMap({"p": parse_region("(0,inf)")})
    ns = [2, 4, 8, 16, 32]
    sweep = convergence_sweep(phi, SamplerConfig("bm"), atoms, 0.0, ns, trials, seed, confidence=confidence, horizon=1.0, **pool)
    for e in sweep.estimates:
        e.oracle = stay_nonpositive_prob(e.resolution - 1)
        e.verdict = "PASS" if e.ci_lo <= e.oracle <= e.ci_hi else "FAIL"
    p_hats = [e.p_hat for e in sweep.estimates]
    decreasing = all(a > b for a, b in zip(p_hats, p_hats[1:]))
    success = decreasing and all(e.verdict == "PASS" for e in sweep.estimates)
    return sweep.estimates, "PASS" if success else "FAIL", success


def _flat_diamond(trials, seed, confidence, pool):
    phi = flat_diamond_formula()
    atoms = AtomMap({"p": parse_region("[1,inf)")})
    ns = [2 ** k for k in range(2, 11)]
    sweep = convergence_sweep(
        phi, SamplerConfig("bm"), atoms, 0.0, ns, trials, seed, reference_m=8192, confidence=confidence, horizon=2.0, **pool
    )
    violations = sweep.monotone_violations()
    monotone = violations == 0
    for e in sweep.estimates:
        e.verdict = "PASS" if monotone else "FAIL"
    finest, reference = sweep.estimates[-1], sweep.reference
    reference.verdict = "PASS" if finest.overlaps(reference) else "FAIL"
    finest.oracle = reference.p_hat
    if not monotone:
        logger.warning("⚠️ %d paths lost a witness when the grid was refined", violations)
    success = monotone and reference.verdict == "PASS"
    return sweep.estimates + [reference], "PASS" if success else "FAIL", success


def _non_separated(trials, seed, confidence, pool):
    atoms = AtomMap({"a": parse_region("(-inf,1)"), "b": parse_region("(1,inf)")})
    phi = parse("F(1,2) !(a | b)")
    ns, m = [4, 16, 64, 256], 4096
    sweep = convergence_sweep(
        phi, SamplerConfig("bm"), atoms, 0.0, ns, trials, seed, reference_m=m, confidence=confidence, horizon=2.0, **pool
    )
    bound = brownian_hitting_prob(1.0, 0.0, make_interval(1, False, 2, False))
    for e in sweep.estimates:
        e.oracle = 0.0
        e.verdict = "PASS" if e.successes == 0 else "FAIL"
    reference = sweep.reference
    reference.oracle = bound
    reference.verdict = "PASS" if reference.ci_hi >= bound else "FAIL"
    gap = all(e.successes == 0 for e in sweep.estimates) and reference.interval(0.99)[0] > 0
    success = gap and reference.verdict == "PASS"
    return sweep.estimates + [reference], "GAP-CONFIRMED" if gap else "NO-GAP", success


EXPERIMENTS = {
    "counterexample": (_counterexample, 100_000),
    "flat-zero": (_flat_zero, 200_000),
    "flat-diamond": (_flat_diamond, 10_000),
    "non-separated": (_non_separated, 10_000),
}


def run_experiment(name, trials=None, seed=None, out_dir=None, workers=None, chunk_size=None, confidence=None, write=True):
    """Run a canned experiment and (by default) write `<out>/<name>.csv` and `.json`"""
    if name not in EXPERIMENTS:
        raise DomainError(f"unknown experiment '{name}' (expected one of: {', '.join(EXPERIMENTS)})")
    settings = get_settings()
    runner, default_trials = EXPERIMENTS[name]
    trials = trials or default_trials
    seed = settings.seed if seed is None else seed
    confidence = confidence or settings.confidence
    pool = {"workers": workers, "chunk_size": chunk_size}

    logger.info("🔄 Running experiment '%s' with %d trials (seed %d)", name, trials, seed)
    estimates, verdict, success = runner(trials, seed, confidence, pool)
    report = ExperimentReport(name, seed, trials, [e.as_row() for e in estimates], verdict, success)
    logger.info("%s Experiment '%s': %s", "✅" if success else "❌", name, verdict)
    if write:
        write_report(report, out_dir or settings.out_dir)
    return report
