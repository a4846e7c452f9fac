"""Lattice discretisation, convolution powers and compound tails.

A model is moved onto the grid {0, h, 2h, ...} twice: rounding every
interval mass ((k-1)h, kh] up to kh gives a stochastically larger lattice
variable, rounding down to (k-1)h a smaller one.  Sums and compound sums
preserve the order, so the pair brackets every tail computed here.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal

from .counts import CountError, CountModel, series_truncation
from .models import HeavyTailModel

# grid length times number of powers
DEFAULT_BUDGET = 200_000_000
# Tails built from FFT products carry an absolute error that grows with the
# grid length M.  Against exact or far-tail references the worst seen was
# 3e-16 at M = 3e4 and 4e-15 at M = 3e5..1e6; the bound below sits 17x or
# more above those.  Values under it have no relative precision.
FFT_ABS_ERROR_SCALE = 1e-16


def fft_abs_error(size: int) -> float:
    return FFT_ABS_ERROR_SCALE * math.sqrt(size)


class LatticeError(ValueError):
    """Grid too short, bad step, or off-grid evaluation."""


class ResourceError(RuntimeError):
    """Requested convolution work exceeds the configured budget."""


class TruncationError(ArithmeticError):
    """The neglected part of the n-series is not small against the result."""


class Rounding(str, enum.Enum):
    UPPER = "upper"
    LOWER = "lower"


@dataclass(frozen=True, eq=False)
class LatticeDistribution:
    """Masses at k * step for k = 0..len(masses)-1 plus mass beyond the grid.

    ``tails[k]`` is P(X > k * step).  It is stored separately from the masses
    because reverse-summing masses would lose relative accuracy far out.
    """

    step: float
    masses: np.ndarray
    tail_beyond: float
    rounding: Rounding
    tails: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if not self.step > 0:
            raise LatticeError("step must be > 0")
        m = np.asarray(self.masses, dtype=float)
        if np.any(m < 0):
            raise LatticeError("masses must be nonnegative")
        object.__setattr__(self, "masses", m)
        if self.tails is None:
            rev = np.cumsum(m[::-1].astype(np.longdouble))[::-1]
            t = np.empty(len(m))
            t[:-1] = (rev[1:] + self.tail_beyond).astype(float)
            t[-1] = self.tail_beyond
            object.__setattr__(self, "tails", t)

    @property
    def size(self) -> int:
        return len(self.masses)

    @property
    def x_max(self) -> float:
        return (self.size - 1) * self.step

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.size) * self.step

    def index(self, x) -> np.ndarray:
        """Grid indices of x; x must sit on the grid."""
        x = np.asarray(x, dtype=float)
        k = np.rint(x / self.step)
        if np.any(np.abs(k * self.step - x) > 1e-9 * np.maximum(1.0, np.abs(x))):
            raise LatticeError("x is not a grid point")
        if np.any(k < 0) or np.any(k >= self.size):
            raise LatticeError("x outside the grid")
        return k.astype(int)

    def tail_at(self, x):
        out = self.tails[self.index(x)]
        return float(out) if np.ndim(x) == 0 else out

    def mean(self) -> float:
        """Mean of the mass on the grid (mass beyond the grid is ignored)."""
        return float(math.fsum(self.grid * self.masses))

    def total(self) -> float:
        return math.fsum(self.masses) + self.tail_beyond

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "x", "mass", "tail"])
            for k in range(self.size):
                w.writerow([k, repr(k * self.step), repr(self.masses[k]), repr(self.tails[k])])


def snap(x, step: float) -> np.ndarray:
    """Nearest grid points k * step, rounded to 10 decimals for clean output."""
    return np.round(np.rint(np.asarray(x, dtype=float) / step) * step, 10)


def discretize(model: HeavyTailModel, step: float, x_max: float, rounding: Rounding | str) -> LatticeDistribution:
    """Round the model onto {0, step, ..., x_max}."""
    rounding = Rounding(rounding)
    if not step > 0:
        raise LatticeError("step must be > 0")
    if not x_max >= step:
        raise LatticeError("x_max must be at least one step")
    n = int(round(x_max / step))
    k = np.arange(n + 1, dtype=float)
    atom0 = 1.0 - model.tail(0.0)
    if rounding is Rounding.UPPER:
        masses = np.empty(n + 1)
        masses[0] = atom0
        masses[1:] = model.local_mass(k[:-1] * step, step)
        tails = model.tail(k * step)
    else:
        masses = model.local_mass(k * step, step)
        masses[0] += atom0
        tails = model.tail((k + 1) * step)
    tail_beyond = float(tails[-1])
    if tail_beyond > 0.5:
        raise LatticeError(f"grid far too short: mass {tail_beyond:.3g} beyond x_max={x_max}")
    return LatticeDistribution(step, masses, tail_beyond, rounding, tails)


def degenerate_lattice(step: float, size: int, k: int, rounding: Rounding | str = Rounding.UPPER) -> LatticeDistribution:
    """Unit atom at k * step."""
    m = np.zeros(size)
    m[k] = 1.0
    return LatticeDistribution(step, m, 0.0, Rounding(rounding))


def _conv(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    if min(len(a), len(b)) < 64:
        out = np.convolve(a, b)[:n]
    else:
        out = signal.fftconvolve(a, b)[:n]
    return np.maximum(out, 0.0)


def convolve(a: LatticeDistribution, b: LatticeDistribution) -> LatticeDistribution:
    """Distribution of A + B on a's grid; mass past the grid goes to tail_beyond."""
    if not math.isclose(a.step, b.step) or a.size != b.size:
        raise LatticeError("convolution needs identical grids")
    n = a.size
    masses = _conv(a.masses, b.masses, n)
    # P(A + B > x) = P(A > x) + sum_k P(A = k h) P(B > x - k h)
    tails = a.tails + _conv(a.masses, b.tails, n)
    return LatticeDistribution(a.step, masses, float(tails[-1]), a.rounding, tails)


def sum_tail_at(a: LatticeDistribution, b: LatticeDistribution, x) -> np.ndarray:
    """P(A + B > x) at grid points by direct positive sums.

    Costs O(k) per point but keeps full relative precision, which the FFT
    route loses once the tail drops below roughly 1e-14.
    """
    ks = np.atleast_1d(a.index(x))
    out = np.empty(len(ks))
    for i, k in enumerate(ks):
        out[i] = a.tails[k] + math.fsum(a.masses[: k + 1] * b.tails[k::-1])
    return float(out[0]) if np.ndim(x) == 0 else out


@dataclass(eq=False)
class ConvolutionPowers:
    base: LatticeDistribution
    powers: dict[int, LatticeDistribution]

    @property
    def max_n(self) -> int:
        return max(self.powers)

    def __getitem__(self, n: int) -> LatticeDistribution:
        return self.powers[n]

    def tail_at(self, n: int, x, exact: bool = True):
        """P(S_n > x); ``exact`` uses direct sums against the base tails."""
        if n == 0:
            x = np.asarray(x, dtype=float)
            return np.where(x >= 0, 0.0, 1.0) if x.ndim else 0.0
        if n == 1 or not exact:
            return self.powers[n].tail_at(x)
        return sum_tail_at(self.powers[n - 1], self.base, x)


def convolve_powers(base: LatticeDistribution, max_n: int, budget: int = DEFAULT_BUDGET) -> ConvolutionPowers:
    """Iterated self-convolutions F^{n*}, n = 1..max_n, on base's grid."""
    if max_n < 1:
        raise LatticeError("max_n must be >= 1")
    if base.size * max_n > budget:
        raise ResourceError(f"grid length {base.size} x max_n {max_n} exceeds budget {budget}")
    powers = {1: base}
    for n in range(2, max_n + 1):
        powers[n] = convolve(powers[n - 1], base)
    return ConvolutionPowers(base, powers)


# -- compound distributions ------------------------------------------------


@dataclass(frozen=True, eq=False)
class CompoundResult:
    x: np.ndarray
    tail: np.ndarray
    remainder_bound: float
    n_max: int | None
    method: str
    abs_error: float = 0.0  # floor on absolute accuracy of FFT-based tails


def compound_tail(
    base: LatticeDistribution,
    count: CountModel,
    x_grid,
    method: str = "auto",
    growth: float = 1.5,
    series_eps: float = 1e-13,
    budget: int = DEFAULT_BUDGET,
) -> CompoundResult:
    """Tail of S_N at grid points x.

    ``method`` is "panjer", "series" or "auto" (Panjer recursion for the
    (a, b, 0) families, the truncated n-series otherwise).  The series is
    cut where sum_{n > N} p_n growth**n < series_eps; since every tail is at
    most one, sum_{n > N} p_n bounds the neglected part.
    """
    count._check()
    x = np.atleast_1d(np.asarray(x_grid, dtype=float))
    ks = base.index(x)
    if method == "auto":
        method = "panjer" if count.panjer_ab is not None else "series"
    if method == "panjer":
        g = panjer(base, count)
        return CompoundResult(x, g.tails[ks], 0.0, None, "panjer", fft_abs_error(base.size))
    if method != "series":
        raise ValueError(f"unknown method {method!r}")
    try:
        n_max = series_truncation(count, growth, series_eps)
    except CountError:
        n_max = series_truncation(count, 1.0, series_eps)
    if base.size * max(n_max, 1) > budget:
        raise ResourceError(f"series needs {n_max} convolutions of length {base.size}")
    p = count.pmf_array(n_max)
    acc = np.zeros(base.size)
    # S_0 = 0 contributes nothing to tails at x >= 0
    cur = base
    for n in range(1, n_max + 1):
        if p[n] > 0:
            acc += p[n] * cur.tails
        if n < n_max:
            cur = convolve(cur, base)
    remainder = count.weighted_tail(n_max, 1.0)
    vals = acc[ks]
    bad = remainder > 1e-3 * vals
    if np.any(bad & (vals > 0)) or (remainder > 0 and np.any(vals == 0)):
        raise TruncationError(f"series remainder {remainder:.3g} exceeds 1e-3 of the compound tail")
    floor = fft_abs_error(base.size) if n_max > 1 else 0.0
    return CompoundResult(x, vals, remainder, n_max, "series", floor)


def panjer(base: LatticeDistribution, count: CountModel, direct: bool = False) -> LatticeDistribution:
    """Compound distribution of an (a, b, 0) count over a lattice severity.

    g_k = sum_{j=1..k} (a + b j / k) f_j g_{k-j} / (1 - a f_0).  The default
    evaluates the recursion by divide and conquer with FFT block products,
    O(M log^2 M); ``direct=True`` runs the plain O(M^2) loop.
    """
    ab = count.panjer_ab
    if ab is None:
        raise CountError(f"{count.label} is not in the Panjer (a, b, 0) class")
    a, b = ab
    f = base.masses
    g0 = count.pgf(f[0])
    denom = 1.0 - a * f[0]
    g = _panjer_direct(f, a, b, g0, denom) if direct else _panjer_cdq(f, a, b, g0, denom)
    g = np.maximum(g, 0.0)
    tails = np.maximum((1 - np.cumsum(g.astype(np.longdouble))).astype(float), 0.0)
    return LatticeDistribution(base.step, g, float(tails[-1]), base.rounding, tails)


def _panjer_direct(f, a, b, g0, denom):
    n = len(f)
    g = np.zeros(n)
    g[0] = g0
    jf = np.arange(n) * f
    for k in range(1, n):
        gk = g[k - 1 :: -1]
        g[k] = (a * np.dot(f[1 : k + 1], gk) + b * np.dot(jf[1 : k + 1], gk) / k) / denom
    return g


_LEAF = 128


def _panjer_cdq(f, a, b, g0, denom):
    n = len(f)
    g = np.zeros(n)
    g[0] = g0
    jf = np.arange(n) * f
    acc_a = np.zeros(n)  # sum_j f_j g_{k-j} over already finished blocks
    acc_b = np.zeros(n)

    def solve(lo, hi):
        if hi - lo <= _LEAF:
            for k in range(max(lo, 1), hi):
                fr = f[k - lo : 0 : -1]
                jr = jf[k - lo : 0 : -1]
                sa = acc_a[k] + np.dot(fr, g[lo:k])
                sb = acc_b[k] + np.dot(jr, g[lo:k])
                g[k] = (a * sa + b * sb / k) / denom
            return
        mid = (lo + hi) // 2
        solve(lo, mid)
        # push g[lo:mid] into k in [mid, hi); lag k - i >= 1 always
        blk = g[lo:mid]
        acc_a[mid:hi] += signal.fftconvolve(blk, f[: hi - lo])[mid - lo : hi - lo]
        acc_b[mid:hi] += signal.fftconvolve(blk, jf[: hi - lo])[mid - lo : hi - lo]
        solve(mid, hi)

    solve(0, n)
    return g


class LatticeBracket:
    """UPPER and LOWER lattices of one model with lazily built powers.

    ``tail(n, x)`` returns (lower, upper) bounds on P(S_n > x) at grid points.
    The last convolution step is always done by direct summation against the
    base tails, so n = 2 never touches the FFT.
    """

    def __init__(self, model: HeavyTailModel, step: float, x_max: float, budget: int = DEFAULT_BUDGET):
        self.model = model
        self.step = step
        self.x_max = x_max
        self.budget = budget
        self.base = {r: discretize(model, step, x_max, r) for r in Rounding}
        self._powers = {r: {1: self.base[r]} for r in Rounding}

    @property
    def size(self) -> int:
        return self.base[Rounding.UPPER].size

    def snap(self, x) -> np.ndarray:
        return snap(x, self.step)

    def _check_budget(self, n: int) -> None:
        if self.size * n > self.budget:
            raise ResourceError(f"grid length {self.size} x n {n} exceeds budget {self.budget}")

    def power(self, rounding: Rounding | str, n: int) -> LatticeDistribution:
        rounding = Rounding(rounding)
        cache = self._powers[rounding]
        if n not in cache:
            self._check_budget(n)
            top = max(cache)
            for k in range(top + 1, n + 1):
                cache[k] = convolve(cache[k - 1], self.base[rounding])
        return cache[n]

    def powers(self, rounding: Rounding | str, max_n: int) -> ConvolutionPowers:
        rounding = Rounding(rounding)
        self.power(rounding, max_n)
        return ConvolutionPowers(self.base[rounding], {k: self._powers[rounding][k] for k in range(1, max_n + 1)})

    def tail(self, n: int, x) -> tuple[np.ndarray, np.ndarray]:
        self._check_budget(n)
        out = []
        for r in (Rounding.LOWER, Rounding.UPPER):
            if n == 1:
                out.append(self.base[r].tail_at(x))
            else:
                out.append(sum_tail_at(self.power(r, n - 1), self.base[r], x))
        if n >= 3:
            # powers beyond the second come from FFT products
            err = fft_abs_error(self.size)
            return np.maximum(out[0] - err, 0.0), out[1] + err
        return out[0], out[1]

    def halved(self) -> "LatticeBracket":
        return LatticeBracket(self.model, self.step / 2, self.x_max, self.budget)
