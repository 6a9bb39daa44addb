"""
Seeded path samplers: Brownian motion, Euler-Maruyama for one-dimensional
SDEs dX = b(X) dt + sigma(X) dW, and random piecewise-linear ramps.

Every path owns a Philox stream keyed by (master seed, path index), so a
path never depends on which batch, chunk or worker produced it.
"""
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy.stats import norm

from errors import DomainError, FormatError, NonFiniteState
from timeset import Interval
from traces import GridTrace, PLTrace, grid_project, lambda_index

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SeedSpec:
    seed: int
    index: int

    def generator(self):
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.index,))
        return np.random.Generator(np.random.Philox(sequence))


# ==================== COEFFICIENT CATALOG ====================

@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.value)


@dataclass(frozen=True)
class Linear:
    """x -> slope * x + offset"""

    slope: float
    offset: float = 0.0

    def __call__(self, x):
        return self.slope * np.asarray(x, dtype=float) + self.offset


@dataclass(frozen=True)
class SdeSpec:
    drift: object
    diffusion: object
    x0: float = 0.0


def brownian_spec(x0=0.0):
    return SdeSpec(Constant(0.0), Constant(1.0), x0)


def ou_spec(theta, sigma=1.0, x0=0.0):
    return SdeSpec(Linear(-theta), Constant(sigma), x0)


# ==================== SAMPLERS ====================

def _steps(n, horizon):
    if n < 1:
        raise DomainError(f"grid resolution must be at least 1, got {n}")
    if not horizon > 0:
        raise DomainError(f"horizon must be positive, got {horizon}")
    return lambda_index(horizon, n)


def _increments(seed_spec, steps, n):
    return seed_spec.generator().standard_normal(steps) / math.sqrt(n)


def sample_brownian(n, horizon, x0, seed):
    """Brownian path on N/n with exact N(0, 1/n) increments"""
    steps = _steps(n, horizon)
    values = np.empty(steps + 1)
    values[0] = x0
    values[1:] = x0 + np.cumsum(_increments(seed, steps, n))
    return GridTrace(n, values)


def _euler(spec, n, dw):
    paths, steps = dw.shape
    values = np.empty((paths, steps + 1))
    values[:, 0] = spec.x0
    dt = 1.0 / n
    x = values[:, 0]
    for k in range(steps):
        with np.errstate(all="ignore"):
            x = x + spec.drift(x) * dt + spec.diffusion(x) * dw[:, k]
        if not np.all(np.isfinite(x)):
            raise NonFiniteState(f"state became non-finite at step {k + 1} (t={(k + 1) / n})")
        values[:, k + 1] = x
    return values


def sample_sde_euler(spec, n, horizon, seed):
    """Euler-Maruyama path on N/n, step 1/n"""
    steps = _steps(n, horizon)
    dw = _increments(seed, steps, n)[None, :]
    return GridTrace(n, _euler(spec, n, dw)[0])


def random_ramp(horizon, seed, low=-2.0, high=3.0, max_breakpoints=8):
    """Random piecewise-linear path with a handful of breakpoints"""
    rng = seed.generator()
    inner = int(rng.integers(0, max_breakpoints - 1))
    times = np.concatenate(([0.0], np.sort(rng.uniform(0.0, horizon, inner)), [float(horizon)]))
    times = np.unique(times)
    values = rng.uniform(low, high, len(times))
    return PLTrace(times, values)


# ==================== SAMPLER CONFIGS ====================

@dataclass(frozen=True)
class SamplerConfig:
    """A named path model from the catalog, with its parameters and start value"""

    kind: str
    params: Tuple[float, ...] = field(default_factory=tuple)
    x0: float = 0.0

    @property
    def spec(self):
        if self.kind == "bm":
            return brownian_spec(self.x0)
        if self.kind == "ou":
            theta = self.params[0]
            sigma = self.params[1] if len(self.params) > 1 else 1.0
            return ou_spec(theta, sigma, self.x0)
        if self.kind == "const-sigma":
            return SdeSpec(Constant(0.0), Constant(self.params[0]), self.x0)
        raise DomainError(f"sampler '{self.kind}' has no SDE form")

    def sample(self, n, horizon, seed):
        return GridTrace(n, self.sample_batch(n, horizon, seed.seed, [seed.index])[0])

    def sample_batch(self, n, horizon, seed, indices):
        """Matrix of paths on N/n, one row per path index"""
        steps = _steps(n, horizon)
        specs = [SeedSpec(seed, int(i)) for i in indices]
        if self.kind == "ramp":
            rows = [grid_project(random_ramp(horizon, s), n).values for s in specs]
            return np.vstack(rows) if rows else np.empty((0, steps + 1))
        dw = np.vstack([_increments(s, steps, n) for s in specs]) if specs else np.empty((0, steps))
        if self.kind == "bm":
            values = np.empty((len(specs), steps + 1))
            values[:, 0] = self.x0
            values[:, 1:] = self.x0 + np.cumsum(dw, axis=1)
            return values
        return _euler(self.spec, n, dw)

    def __str__(self):
        if not self.params:
            return self.kind
        return f"{self.kind}({','.join(f'{p:g}' for p in self.params)})"


_SAMPLER_RE = re.compile(r"^\s*([a-z][a-z-]*)\s*(?:\(\s*([^)]*)\)\s*)?$")
_ARITY = {"bm": (0, 0), "ou": (1, 2), "const-sigma": (1, 1), "ramp": (0, 0)}


def parse_sampler(text, x0=0.0):
    """`bm`, `ou(theta[,sigma])`, `const-sigma(c)` or `ramp`"""
    m = _SAMPLER_RE.match(text)
    if not m or m.group(1) not in _ARITY:
        raise FormatError(f"unknown sampler '{text}' (expected one of: {', '.join(_ARITY)})")
    kind, args = m.group(1), m.group(2)
    try:
        params = tuple(float(a) for a in args.split(",")) if args and args.strip() else ()
    except ValueError:
        raise FormatError(f"sampler '{text}' has a non-numeric parameter") from None
    lo, hi = _ARITY[kind]
    if not lo <= len(params) <= hi:
        raise FormatError(f"sampler '{kind}' takes {lo}..{hi} parameters, got {len(params)}")
    return SamplerConfig(kind, params, float(x0))


def sample_paths(sampler, n, horizon, seed, indices):
    """Rows of grid values, one per path index; row i depends only on (seed, indices[i])"""
    return sampler.sample_batch(n, horizon, seed, indices)


# ==================== ASSUMPTION SPOT-CHECK ====================

@dataclass
class AssumptionReport:
    min_abs_sigma: float
    sigma_lipschitz: float
    max_abs_drift: float
    drift_growth: float
    warnings: list

    @property
    def passed(self):
        return not self.warnings

    def as_dict(self):
        return {
            "status": "pass" if self.passed else "warn",
            "min_abs_sigma": self.min_abs_sigma,
            "sigma_lipschitz": self.sigma_lipschitz,
            "max_abs_drift": self.max_abs_drift,
            "drift_growth": self.drift_growth,
            "warnings": list(self.warnings),
        }


LIPSCHITZ_GROWTH = 1.5


def _steepest_slope(fn, xs):
    dx = np.diff(xs)
    if not dx.size or dx[0] <= 0:
        return 0.0
    values = np.asarray(fn(xs), dtype=float)
    return float(np.max(np.abs(np.diff(values)) / dx))


def validate_sde_assumptions(spec, probe, samples=1001):
    """
    Numeric spot-check of non-degenerate diffusion, Lipschitz diffusion and
    bounded drift on a probe grid. Advisory only: a pass proves nothing.
    """
    if not isinstance(probe, Interval) or not probe.bounded:
        raise DomainError("probe range must be a bounded interval")
    lo, hi = probe.lo.value, probe.hi.value
    xs = np.linspace(lo, hi, max(int(samples), 2))
    sigma = np.asarray(spec.diffusion(xs), dtype=float)
    drift = np.asarray(spec.drift(xs), dtype=float)
    warnings = []
    if not (np.all(np.isfinite(sigma)) and np.all(np.isfinite(drift))):
        warnings.append("drift or diffusion is not finite on the probe range")

    min_abs_sigma = float(np.min(np.abs(sigma)))
    if not min_abs_sigma > 1e-12:
        warnings.append(f"min |sigma| = {min_abs_sigma:g} on [{lo:g},{hi:g}]: diffusion degenerates")

    # a Lipschitz sigma keeps its steepest difference quotient when the grid is
    # refined; at a jump the quotient grows with 1/dx
    coarse = _steepest_slope(spec.diffusion, xs)
    sigma_lipschitz = _steepest_slope(spec.diffusion, np.linspace(lo, hi, 2 * len(xs) - 1))
    if not math.isfinite(sigma_lipschitz) or (coarse > 0 and sigma_lipschitz > LIPSCHITZ_GROWTH * coarse):
        warnings.append(
            f"sigma slope grows from {coarse:g} to {sigma_lipschitz:g} when the probe grid is halved: "
            "sigma does not look Lipschitz continuous"
        )

    max_abs_drift = float(np.max(np.abs(drift)))
    centre, half = (lo + hi) / 2, (hi - lo) / 2
    wide = np.linspace(centre - 2 * half, centre + 2 * half, max(int(samples), 2))
    wide_max = float(np.max(np.abs(np.asarray(spec.drift(wide), dtype=float))))
    drift_growth = wide_max / max_abs_drift if max_abs_drift > 0 else (math.inf if wide_max > 0 else 1.0)
    if drift_growth > 1.5:
        warnings.append(f"|b| grows from {max_abs_drift:g} to {wide_max:g} when the range doubles: drift looks unbounded")

    report = AssumptionReport(min_abs_sigma, sigma_lipschitz, max_abs_drift, drift_growth, warnings)
    for message in warnings:
        logger.warning("⚠️ %s", message)
    return report


# ==================== ORACLES ====================

def _hit_by(t, distance):
    if t <= 0:
        return 0.0
    if math.isinf(t):
        return 1.0
    return float(2.0 * norm.sf(distance / math.sqrt(t)))


def brownian_hitting_prob(level, x0, window):
    """P(first passage of standard BM from x0 to level lies in the window)"""
    if not level > x0:
        raise DomainError(f"level {level} must lie above the start {x0}")
    if window.lo.value < 0:
        raise DomainError(f"window {window} must lie in [0, inf)")
    distance = level - x0
    return max(_hit_by(window.hi.value, distance) - _hit_by(window.lo.value, distance), 0.0)


def stay_nonpositive_prob(points):
    """P(a symmetric random walk stays <= 0 at each of `points` steps): C(2m, m) / 4^m"""
    if points < 0:
        raise DomainError(f"number of points must be non-negative, got {points}")
    return math.comb(2 * points, points) / 4 ** points
