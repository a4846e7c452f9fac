"""Plain Monte Carlo estimates of compound and n-fold tails.

Used as an oracle for the lattice engine.  Streams are counter-based
(Philox) and spawned from one SeedSequence, so results are bit-identical
for a given seed regardless of chunking.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .asymptotics import REPORT_COLUMNS
from .counts import CountModel, factorial_moments
from .models import HeavyTailModel

MIN_SAMPLES = 10_000
CHUNK = 1 << 18


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class SimulationEstimate:
    x: float
    estimate: float
    std_error: float
    n_samples: int
    seed: int

    @property
    def exceedances(self) -> int:
        return int(round(self.estimate * self.n_samples))

    def contains(self, lo: float, hi: float, k: float = 3.0) -> bool:
        """Whether the estimate lies in [lo - k se, hi + k se]."""
        return lo - k * self.std_error <= self.estimate <= hi + k * self.std_error


def sample_model(model: HeavyTailModel, u):
    """Inverse-survival transform; u in (0, 1)."""
    return model.sample(u)


def _uniforms(rng: np.random.Generator, size: int) -> np.ndarray:
    # open interval (0, 1): random() is [0, 1), so reflect
    return 1.0 - rng.random(size)


def _chunk_sums(model: HeavyTailModel, count: CountModel, rng: np.random.Generator, size: int) -> np.ndarray:
    n = np.asarray(count.sample(rng, size), dtype=np.int64)
    total = int(n.sum())
    sums = np.zeros(size)
    if total == 0:
        return sums
    draws = model.sample(_uniforms(rng, total))
    owner = np.repeat(np.arange(size), n)
    sums += np.bincount(owner, weights=draws, minlength=size)
    return sums


def _check(n_samples: int, seed) -> None:
    if seed is None:
        raise SimulationError("a seed is required")
    if int(n_samples) < MIN_SAMPLES:
        raise SimulationError(f"n_samples must be >= {MIN_SAMPLES}")


def simulate_compound_tail(
    model: HeavyTailModel, count: CountModel, x_grid, n_samples: int, seed: int
) -> list[SimulationEstimate]:
    """P(S_N > x) for every x in the grid, all from one sample set."""
    _check(n_samples, seed)
    xs = np.asarray(x_grid, dtype=float)
    exceed = np.zeros(len(xs), dtype=np.int64)
    n_chunks = math.ceil(n_samples / CHUNK)
    streams = np.random.SeedSequence(int(seed)).spawn(n_chunks)
    for i, ss in enumerate(streams):
        size = min(CHUNK, n_samples - i * CHUNK)
        rng = np.random.Generator(np.random.Philox(ss))
        sums = np.sort(_chunk_sums(model, count, rng, size))
        exceed += size - np.searchsorted(sums, xs, side="right")
    return [_estimate(float(x), int(k), n_samples, int(seed)) for x, k in zip(xs, exceed)]


def simulate_nfold_tail(model: HeavyTailModel, n: int, x_grid, n_samples: int, seed: int) -> list[SimulationEstimate]:
    from .counts import Deterministic

    return simulate_compound_tail(model, Deterministic(n), x_grid, n_samples, seed)


def _estimate(x: float, k: int, n: int, seed: int) -> SimulationEstimate:
    p = k / n
    return SimulationEstimate(x, p, math.sqrt(p * (1 - p) / n), n, seed)


def checkable(estimates, reference, min_exceedances: float = 100.0) -> np.ndarray:
    """Points where plain MC expects at least ``min_exceedances`` hits."""
    ref = np.asarray(reference, dtype=float)
    n = np.array([e.n_samples for e in estimates], dtype=float)
    return n * ref >= min_exceedances


def oracle_agreement(estimates, lo, hi, min_exceedances: float = 100.0, k: float = 3.0) -> tuple[float, np.ndarray]:
    """Fraction of checkable points whose estimate lies in the bracket +- k se."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    mask = checkable(estimates, 0.5 * (lo + hi), min_exceedances)
    inside = np.array([e.contains(a, b, k) for e, a, b in zip(estimates, lo, hi)])
    if not mask.any():
        return math.nan, inside
    return float(inside[mask].mean()), inside


def estimates_to_csv(estimates, model: HeavyTailModel, count: CountModel, path) -> None:
    """Write in the approximation report schema; the band is estimate +- 3 se."""
    m1, m2f = factorial_moments(count, check=False)
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for e in estimates:
            first = m1 * model.tail(e.x)
            lm = model.local_mass(e.x, 1.0)
            second = first + model.mean * m2f * lm
            rr = (e.estimate - first) / lm if lm > 0 else math.nan
            lo = max(e.estimate - 3 * e.std_error, 0.0)
            w.writerow([repr(float(v)) for v in (e.x, lo, e.estimate + 3 * e.std_error, first, second, rr)])
