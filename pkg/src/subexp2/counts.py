"""Count (subordinator) distributions for the number of summands N."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats


class CountError(ValueError):
    """Invalid count model, or a request outside its radius of convergence."""


class CountModel:
    """Distribution {p_n} of N with factorial-moment summaries.

    Subclasses define ``pmf``, the closed-form moments ``m1``/``m2f`` and
    ``pgf_radius``.  Families in the Panjer (a, b, 0) class also define
    ``panjer_ab``.
    """

    label = "count"
    pgf_radius: float = math.inf

    def pmf(self, n):
        raise NotImplementedError

    def pgf(self, z: float) -> float:
        raise NotImplementedError

    @property
    def m1(self) -> float:
        raise NotImplementedError

    @property
    def m2f(self) -> float:
        raise NotImplementedError

    @property
    def panjer_ab(self) -> tuple[float, float] | None:
        return None

    @property
    def max_support(self) -> float:
        return math.inf

    def pmf_array(self, n_max: int) -> np.ndarray:
        return np.asarray(self.pmf(np.arange(n_max + 1)), dtype=float)

    def weighted_tail(self, n_max: int, growth: float = 1.0) -> float:
        """sum_{n > n_max} p_n growth**n."""
        return _weighted_tail(self, n_max, growth)

    def truncation_bound(self, eps: float, growth: float = 1.0) -> int:
        return series_truncation(self, growth, eps)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def _check(self):
        if not self.pgf_radius > 1:
            raise CountError(f"{self.label}: pgf radius {self.pgf_radius} <= 1, E z^N not analytic at 1")


@dataclass(frozen=True)
class Poisson(CountModel):
    lam: float = 1.0
    label: str = field(default="poisson", compare=False)
    pgf_radius: float = field(default=math.inf, init=False, compare=False)

    def __post_init__(self):
        if not self.lam >= 0:
            raise CountError("poisson: lam must be >= 0")

    def pmf(self, n):
        return stats.poisson.pmf(n, self.lam)

    def pgf(self, z):
        return math.exp(self.lam * (z - 1))

    @property
    def m1(self):
        return self.lam

    @property
    def m2f(self):
        return self.lam**2

    @property
    def panjer_ab(self):
        return 0.0, self.lam

    def sample(self, rng, size):
        return rng.poisson(self.lam, size)


@dataclass(frozen=True)
class Geometric(CountModel):
    """p_n = (1 - rho) rho**n, n >= 0."""

    rho: float = 0.5
    label: str = field(default="geometric", compare=False)
    pgf_radius: float = field(init=False, compare=False, default=math.inf)

    def __post_init__(self):
        if not 0 <= self.rho < 1:
            raise CountError("geometric: rho must lie in [0, 1)")
        object.__setattr__(self, "pgf_radius", math.inf if self.rho == 0 else 1.0 / self.rho)

    def pmf(self, n):
        n = np.asarray(n)
        return np.where(n >= 0, (1 - self.rho) * self.rho ** np.maximum(n, 0), 0.0)

    def pgf(self, z):
        return (1 - self.rho) / (1 - self.rho * z)

    @property
    def m1(self):
        return self.rho / (1 - self.rho)

    @property
    def m2f(self):
        return 2 * self.rho**2 / (1 - self.rho) ** 2

    @property
    def panjer_ab(self):
        return self.rho, 0.0

    def sample(self, rng, size):
        # numpy's geometric counts trials, starting at 1
        return rng.geometric(1 - self.rho, size) - 1


@dataclass(frozen=True)
class NegativeBinomial(CountModel):
    """p_n = C(n + r - 1, n) (1 - rho)**r rho**n."""

    r: float = 2.0
    rho: float = 0.5
    label: str = field(default="negative_binomial", compare=False)
    pgf_radius: float = field(init=False, compare=False, default=math.inf)

    def __post_init__(self):
        if not self.r > 0:
            raise CountError("negative_binomial: r must be > 0")
        if not 0 <= self.rho < 1:
            raise CountError("negative_binomial: rho must lie in [0, 1)")
        object.__setattr__(self, "pgf_radius", math.inf if self.rho == 0 else 1.0 / self.rho)

    def pmf(self, n):
        return stats.nbinom.pmf(n, self.r, 1 - self.rho)

    def pgf(self, z):
        return ((1 - self.rho) / (1 - self.rho * z)) ** self.r

    @property
    def m1(self):
        return self.r * self.rho / (1 - self.rho)

    @property
    def m2f(self):
        return self.r * (self.r + 1) * self.rho**2 / (1 - self.rho) ** 2

    @property
    def panjer_ab(self):
        return self.rho, (self.r - 1) * self.rho

    def sample(self, rng, size):
        return rng.negative_binomial(self.r, 1 - self.rho, size)


@dataclass(frozen=True)
class FiniteSupport(CountModel):
    """Arbitrary pmf on finitely many nonnegative integers."""

    support: tuple[int, ...] = (1,)
    probs: tuple[float, ...] = (1.0,)
    label: str = field(default="finite", compare=False)
    pgf_radius: float = field(default=math.inf, init=False, compare=False)

    def __post_init__(self):
        if len(self.support) != len(self.probs) or not self.support:
            raise CountError("finite: support and probs must be nonempty and of equal length")
        if any(int(n) != n or n < 0 for n in self.support):
            raise CountError("finite: support must be nonnegative integers")
        if len(set(self.support)) != len(self.support):
            raise CountError("finite: duplicate support points")
        if any(p < 0 for p in self.probs) or abs(math.fsum(self.probs) - 1) > 1e-12:
            raise CountError("finite: probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "support", tuple(int(n) for n in self.support))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[int, float]]) -> "FiniteSupport":
        ns, ps = zip(*pairs)
        return cls(tuple(ns), tuple(ps))

    def pmf(self, n):
        table = dict(zip(self.support, self.probs))
        n = np.asarray(n)
        return np.vectorize(lambda k: table.get(int(k), 0.0), otypes=[float])(n) if n.ndim else table.get(int(n), 0.0)

    def pgf(self, z):
        return math.fsum(p * z**n for n, p in zip(self.support, self.probs))

    @property
    def max_support(self):
        return max(self.support)

    @property
    def m1(self):
        return math.fsum(n * p for n, p in zip(self.support, self.probs))

    @property
    def m2f(self):
        return math.fsum(n * (n - 1) * p for n, p in zip(self.support, self.probs))

    def sample(self, rng, size):
        return rng.choice(np.asarray(self.support), size=size, p=np.asarray(self.probs))


def Deterministic(n0: int) -> FiniteSupport:
    """N = n0 with probability one."""
    return FiniteSupport((int(n0),), (1.0,), label="deterministic")


def _weighted_tail(count: CountModel, n_max: int, growth: float) -> float:
    if n_max >= count.max_support:
        return 0.0
    if growth >= count.pgf_radius:
        return math.inf
    # terms eventually decay geometrically because growth < pgf_radius
    total = 0.0
    chunk = 256
    start = n_max + 1
    while True:
        n = np.arange(start, start + chunk)
        with np.errstate(over="ignore", under="ignore", divide="ignore"):
            terms = np.exp(np.log(count.pmf(n)) + n * math.log(growth))
        if not np.all(np.isfinite(terms)):
            return math.inf
        total += math.fsum(terms)
        last = terms[-1]
        if last == 0.0 or (last < terms[0] and last <= 1e-17 * total):
            return total
        start += chunk
        chunk = min(chunk * 2, 1 << 16)


def series_truncation(count: CountModel, growth: float, eps: float) -> int:
    """Smallest N_max with sum_{n > N_max} p_n growth**n < eps."""
    if not growth >= 1:
        raise CountError("growth must be >= 1")
    if not eps > 0:
        raise CountError("eps must be > 0")
    if growth >= count.pgf_radius:
        raise CountError(f"growth {growth} >= pgf radius {count.pgf_radius}: series diverges")
    if math.isfinite(count.max_support):
        # finite support: walk down from the top
        n_max = int(count.max_support)
        while n_max > 0 and _weighted_tail(count, n_max - 1, growth) < eps:
            n_max -= 1
        return n_max
    # exponential search, then bisection
    hi = 1
    while _weighted_tail(count, hi, growth) >= eps:
        hi *= 2
        if hi > 1 << 24:
            raise CountError("series truncation did not converge")
    lo = -1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _weighted_tail(count, mid, growth) < eps:
            hi = mid
        else:
            lo = mid
    return max(hi, 0)


def factorial_moments(count: CountModel, check: bool = True) -> tuple[float, float]:
    """(sum n p_n, sum n(n-1) p_n), closed form, cross-checked by summation."""
    count._check()
    m1, m2f = float(count.m1), float(count.m2f)
    if check:
        n_max = series_truncation(count, 1.0, 1e-15)
        n = np.arange(n_max + 1, dtype=float)
        p = count.pmf_array(n_max)
        s1 = math.fsum(n * p)
        s2 = math.fsum(n * (n - 1) * p)
        for name, closed, summed in (("m1", m1, s1), ("m2f", m2f, s2)):
            if abs(closed - summed) > 1e-8 * max(1.0, abs(closed)):
                raise CountError(f"{count.label}: {name} closed form {closed} disagrees with sum {summed}")
    return m1, m2f


COUNT_FAMILIES = {
    "poisson": Poisson,
    "geometric": Geometric,
    "negative_binomial": NegativeBinomial,
    "finite": FiniteSupport,
}


def make_count(family: str, **params) -> CountModel:
    if family == "deterministic":
        try:
            return Deterministic(params["n0"])
        except KeyError:
            raise CountError("deterministic: parameter n0 required") from None
    if family == "finite" and "pairs" in params:
        return FiniteSupport.from_pairs([tuple(p) for p in params["pairs"]])
    try:
        cls = COUNT_FAMILIES[family]
    except KeyError:
        raise CountError(f"unknown count family {family!r}") from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise CountError(f"{family}: {exc}") from None
