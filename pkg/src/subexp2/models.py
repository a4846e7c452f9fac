"""Heavy-tailed distributions on [0, inf) with survival-form evaluation.

Every family exposes the tail F(x, inf), the interval mass F(x, x+t],
the mean and an inverse-survival sampler.  Tails are never computed as
``1 - cdf`` so that ratios of very small quantities keep their relative
accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special


class ModelError(ValueError):
    """Invalid model parameters or evaluation domain."""


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ModelError("x must be nonnegative")
    return arr


def _out(arr, scalar_like):
    return float(arr) if np.ndim(scalar_like) == 0 else arr


class HeavyTailModel:
    """Base class.  Subclasses implement ``_log_tail`` and ``_quantile``.

    ``_local_mass`` has a generic implementation ``tail(x) - tail(x+t)``
    which subclasses override where a cancellation-free form exists.
    """

    label: str = "model"
    has_density: bool = True

    # -- to be provided by subclasses -------------------------------------
    @property
    def mean(self) -> float:
        raise NotImplementedError

    @property
    def support_min(self) -> float:
        return 0.0

    def _log_tail(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _quantile(self, u: np.ndarray) -> np.ndarray:
        """Smallest x with tail(x) <= u."""
        raise NotImplementedError

    # -- public surface ---------------------------------------------------
    def tail(self, x):
        arr = _as_array(x)
        return _out(np.exp(self._log_tail(arr)), x)

    def log_tail(self, x):
        arr = _as_array(x)
        return _out(self._log_tail(arr), x)

    def cdf(self, x):
        arr = _as_array(x)
        return _out(-np.expm1(self._log_tail(arr)), x)

    def local_mass(self, x, t):
        """F(x, x+t]."""
        arr = _as_array(x)
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise ModelError("interval length t must be positive")
        res = self._local_mass(arr, t)
        return _out(np.maximum(res, 0.0), np.broadcast(x, t))

    def local_rel(self, x, t):
        """F(x, x+t] / F_bar(x), computed from log tails so it never underflows."""
        arr = _as_array(x)
        with np.errstate(invalid="ignore"):
            out = -np.expm1(self._log_tail(arr + t) - self._log_tail(arr))
        return _out(out, np.broadcast(x, t))

    def _local_mass(self, x, t):
        lo = self._log_tail(x)
        hi = self._log_tail(x + t)
        # tail(x) * (1 - exp(hi - lo)), exact when both tails are tiny
        with np.errstate(invalid="ignore"):
            out = np.exp(lo) * -np.expm1(hi - lo)
        return np.where(np.isneginf(lo), 0.0, out)

    def sample(self, u):
        """Inverse-survival transform of uniforms on (0, 1)."""
        arr = np.asarray(u, dtype=float)
        if np.any((arr <= 0) | (arr >= 1)):
            raise ModelError("u must lie in (0, 1)")
        return _out(self._quantile(arr), u)

    def breakpoints(self, a: float, b: float) -> np.ndarray:
        """Points in (a, b) where the tail is not smooth."""
        pts = np.array([self.support_min])
        return pts[(pts > a) & (pts < b)]

    def tail_integral(self, a: float, b: float) -> float:
        """Integral of the tail over [a, b] by adaptive quadrature."""
        val, _ = integrate.quad(lambda s: float(self.tail(s)), a, b, limit=200, epsabs=0.0, epsrel=1e-12)
        return val


@dataclass(frozen=True)
class ParetoModel(HeavyTailModel):
    """tail(x) = min(1, c * x**-alpha)."""

    c: float = 1.0
    alpha: float = 2.0
    label: str = field(default="pareto", compare=False)
    has_density: bool = field(default=True, init=False, compare=False)

    def __post_init__(self):
        if not self.c > 0:
            raise ModelError("pareto: c must be > 0")
        if not self.alpha > 1:
            raise ModelError("pareto: alpha must be > 1 (finite mean)")

    @property
    def x0(self) -> float:
        return self.c ** (1.0 / self.alpha)

    @property
    def support_min(self) -> float:
        return self.x0

    @property
    def mean(self) -> float:
        return self.x0 * self.alpha / (self.alpha - 1.0)

    def _log_tail(self, x):
        with np.errstate(divide="ignore"):
            lt = math.log(self.c) - self.alpha * np.log(x)
        return np.minimum(lt, 0.0)

    def _quantile(self, u):
        return np.maximum((self.c / u) ** (1.0 / self.alpha), self.x0)


@dataclass(frozen=True)
class LognormalModel(HeavyTailModel):
    """tail(x) = Phi_bar((ln x - mu_log) / sigma), through log_ndtr."""

    mu_log: float = 0.0
    sigma: float = 1.0
    label: str = field(default="lognormal", compare=False)
    has_density: bool = field(default=True, init=False, compare=False)

    def __post_init__(self):
        if not self.sigma > 0:
            raise ModelError("lognormal: sigma must be > 0")

    @property
    def mean(self) -> float:
        return math.exp(self.mu_log + 0.5 * self.sigma**2)

    def _log_tail(self, x):
        with np.errstate(divide="ignore"):
            z = (np.log(x) - self.mu_log) / self.sigma
        return special.log_ndtr(-z)

    def _quantile(self, u):
        return np.exp(self.mu_log - self.sigma * special.ndtri(u))

    def density(self, x):
        x = np.asarray(x, dtype=float)
        z = (np.log(x) - self.mu_log) / self.sigma
        return np.exp(-0.5 * z * z) / (x * self.sigma * math.sqrt(2 * math.pi))


@dataclass(frozen=True)
class WeibullModel(HeavyTailModel):
    """tail(x) = exp(-x**beta), 0 < beta < 1."""

    beta: float = 0.5
    label: str = field(default="weibull", compare=False)
    has_density: bool = field(default=True, init=False, compare=False)

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ModelError("weibull: beta must lie in (0, 1)")

    @property
    def mean(self) -> float:
        return math.gamma(1.0 + 1.0 / self.beta)

    def _log_tail(self, x):
        return -(x**self.beta)

    def _local_mass(self, x, t):
        a = x**self.beta
        b = (x + t) ** self.beta
        return np.exp(-a) * -np.expm1(a - b)

    def _quantile(self, u):
        return (-np.log(u)) ** (1.0 / self.beta)


@dataclass(frozen=True)
class PiecewiseParetoModel(HeavyTailModel):
    """Discontinuous Pareto-type tail without a density.

    tail(x) = c (1 + 1/n) x**-alpha on [n**beta, (n+1)**beta) for n >= 3.
    Below 3**beta the n = 2 formula c * 1.5 * x**-alpha is used down to the
    point s0 where it reaches 1, and tail = 1 on [0, s0).
    """

    c: float = 1.0
    alpha: float = 2.0
    beta: float = 1.5
    label: str = field(default="piecewise_pareto", compare=False)
    has_density: bool = field(default=False, init=False, compare=False)

    def __post_init__(self):
        if not self.c > 0:
            raise ModelError("piecewise_pareto: c must be > 0")
        if not self.alpha > 1:
            raise ModelError("piecewise_pareto: alpha must be > 1 (finite mean)")
        if not 1 < self.beta < 2:
            raise ModelError("piecewise_pareto: beta must lie in (1, 2)")
        if self.s0 > 2.0**self.beta:
            raise ModelError("piecewise_pareto: s0 exceeds 2**beta, tail would not be monotone")

    @property
    def s0(self) -> float:
        return (1.5 * self.c) ** (1.0 / self.alpha)

    @property
    def support_min(self) -> float:
        return self.s0

    def segment(self, x):
        """Segment index n with n**beta <= x < (n+1)**beta, floored at 2."""
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            n = np.floor(x ** (1.0 / self.beta))
        # floating point guard at the boundaries
        n = np.where((n + 1) ** self.beta <= x, n + 1, n)
        n = np.where(n**self.beta > x, n - 1, n)
        return np.maximum(n, 2.0)

    def _log_tail(self, x):
        n = self.segment(x)
        with np.errstate(divide="ignore"):
            lt = math.log(self.c) + np.log1p(1.0 / n) - self.alpha * np.log(x)
        return np.where(x < self.s0, 0.0, lt)

    def _local_mass(self, x, t):
        lo = self._log_tail(x)
        hi = self._log_tail(x + t)
        return np.exp(lo) * -np.expm1(hi - lo)

    def breakpoints(self, a: float, b: float) -> np.ndarray:
        n_lo = max(3, int(math.floor(max(a, 0.0) ** (1.0 / self.beta))))
        n_hi = int(math.ceil(b ** (1.0 / self.beta))) + 1
        pts = np.concatenate(([self.s0], np.arange(n_lo, n_hi + 1, dtype=float) ** self.beta))
        return pts[(pts > a) & (pts < b)]

    @property
    def mean(self) -> float:
        return _piecewise_mean(self.c, self.alpha, self.beta)

    def _end_tail(self, n):
        # left limit of the tail at the end of segment n
        return self.c * (1 + 1 / n) * (n + 1) ** (-self.alpha * self.beta)

    def _quantile(self, u):
        shape = np.shape(u)
        u = np.atleast_1d(u)
        # segment n holds the quantile iff end_tail(n) < u <= end_tail(n-1)
        n = np.maximum(np.floor((self.c / u) ** (1.0 / (self.alpha * self.beta))) - 1, 2.0)
        for _ in range(100):
            up = self._end_tail(n) >= u
            down = (n > 2) & (self._end_tail(np.maximum(n - 1, 1.0)) < u)
            if not (up.any() or down.any()):
                break
            n = n + up - down
        start = np.where(n == 2, self.s0, n**self.beta)
        inner = (self.c * (1 + 1 / n) / u) ** (1.0 / self.alpha)
        # u inside a downward jump maps to the segment start
        return np.maximum(inner, start).reshape(shape)


def _piecewise_mean(c: float, alpha: float, beta: float) -> float:
    s0 = (1.5 * c) ** (1.0 / alpha)
    g = 1.0 - alpha  # exponent of the antiderivative x**g / g
    # [0, s0) contributes s0; [s0, 3**beta) uses the n=2 formula
    total = s0 + 1.5 * c * (3.0 ** (beta * g) - s0**g) / g
    # segments n >= 3: c (1 + 1/n) (n+1)**(beta g) - n**(beta g)) / g
    n_max = 200_000
    n = np.arange(3, n_max + 1, dtype=float)
    seg = (1 + 1 / n) * ((n + 1) ** (beta * g) - n ** (beta * g))
    total += c * math.fsum(seg) / g
    # remainder: sum over n > n_max, approximated by the integral of
    # (1 + 1/n) * d/dn n**(beta g); error is O(n_max**(beta g - 2))
    m = n_max + 1.0
    rem = -(m ** (beta * g)) - beta * g / (beta * g - 1) * m ** (beta * g - 1)
    total += c * rem / g
    return total


@dataclass(frozen=True)
class AtomModel(HeavyTailModel):
    """Point mass at ``location``; a non-subexponential reference case."""

    location: float = 1.0
    label: str = field(default="atom", compare=False)
    has_density: bool = field(default=False, init=False, compare=False)

    def __post_init__(self):
        if not self.location > 0:
            raise ModelError("atom: location must be > 0")

    @property
    def support_min(self) -> float:
        return self.location

    @property
    def mean(self) -> float:
        return self.location

    def _log_tail(self, x):
        return np.where(x < self.location, 0.0, -np.inf)

    def _quantile(self, u):
        return np.full_like(u, self.location)


FAMILIES = {
    "pareto": ParetoModel,
    "lognormal": LognormalModel,
    "weibull": WeibullModel,
    "piecewise_pareto": PiecewiseParetoModel,
    "atom": AtomModel,
}


def make_model(family: str, **params) -> HeavyTailModel:
    try:
        cls = FAMILIES[family]
    except KeyError:
        raise ModelError(f"unknown model family {family!r}") from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise ModelError(f"{family}: {exc}") from None


def eval_tail(model: HeavyTailModel, x):
    return model.tail(x)


def eval_local_mass(model: HeavyTailModel, x, t):
    return model.local_mass(x, t)


def eval_mean(model: HeavyTailModel) -> float:
    return model.mean
