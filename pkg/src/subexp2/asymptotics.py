"""First- and second-order approximations to compound and n-fold tails."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

from .counts import CountModel, factorial_moments
from .lattice import Rounding, compound_tail, discretize, snap
from .models import HeavyTailModel


class QuadratureError(ArithmeticError):
    pass


def first_order_tail(model: HeavyTailModel, count: CountModel, x):
    m1, _ = factorial_moments(count, check=False)
    return m1 * model.tail(x)


def second_order_correction(model: HeavyTailModel, count: CountModel, x):
    """mu * sum n(n-1) p_n * F(x, x+1]."""
    _, m2f = factorial_moments(count, check=False)
    return model.mean * m2f * model.local_mass(x, 1.0)


def second_order_tail(model: HeavyTailModel, count: CountModel, x):
    return first_order_tail(model, count, x) + second_order_correction(model, count, x)


def nfold_expansion(model: HeavyTailModel, n: int, x):
    """n F_bar(x) + n(n-1) mu F(x, x+1], the approximation to the n-fold tail."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return n * model.tail(x) + n * (n - 1) * model.mean * model.local_mass(x, 1.0)


# -- approximation report ----------------------------------------------------

REPORT_COLUMNS = ("x", "exact_lo", "exact_hi", "first_order", "second_order", "residual_ratio")


@dataclass
class ApproximationReport:
    x_grid: np.ndarray
    exact_lo: np.ndarray
    exact_hi: np.ndarray
    first_order: np.ndarray
    second_order: np.ndarray
    local_mass: np.ndarray
    target: float
    meta: dict = field(default_factory=dict)

    @property
    def exact(self) -> np.ndarray:
        return 0.5 * (self.exact_lo + self.exact_hi)

    @property
    def residual_ratio(self) -> np.ndarray:
        """(exact - first order) / F(x, x+1], from the bracket midpoint."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.local_mass > 0, (self.exact - self.first_order) / self.local_mass, np.nan)

    @property
    def residual_band(self) -> tuple[np.ndarray, np.ndarray]:
        with np.errstate(divide="ignore", invalid="ignore"):
            lo = (self.exact_lo - self.first_order) / self.local_mass
            hi = (self.exact_hi - self.first_order) / self.local_mass
        return lo, hi

    @property
    def bracket_fraction(self) -> np.ndarray:
        """Bracket width over the second-order numerator exact - first order."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return (self.exact_hi - self.exact_lo) / np.abs(self.exact - self.first_order)

    def rows(self):
        rr = self.residual_ratio
        for i in range(len(self.x_grid)):
            yield (
                float(self.x_grid[i]),
                float(self.exact_lo[i]),
                float(self.exact_hi[i]),
                float(self.first_order[i]),
                float(self.second_order[i]),
                float(rr[i]),
            )

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(REPORT_COLUMNS)
            for row in self.rows():
                w.writerow([repr(v) for v in row])

    def to_dict(self) -> dict:
        return {
            "columns": list(REPORT_COLUMNS),
            "rows": [list(r) for r in self.rows()],
            "target_residual_ratio": self.target,
            "meta": self.meta,
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, allow_nan=True))


def approximation_report(
    model: HeavyTailModel,
    count: CountModel,
    x_grid,
    step: float,
    x_max: float | None = None,
    method: str = "auto",
) -> ApproximationReport:
    """Exact compound tail bracket against both asymptotic approximations."""
    x = snap(x_grid, step)
    if x_max is None:
        x_max = float(x.max()) + 2.0
    m1, m2f = factorial_moments(count)
    vals, floor = {}, 0.0
    for r in Rounding:
        base = discretize(model, step, x_max, r)
        res = compound_tail(base, count, x, method=method)
        vals[r] = res.tail
        floor = max(floor, res.abs_error)
    first = m1 * model.tail(x)
    lm = model.local_mass(x, 1.0)
    return ApproximationReport(
        x_grid=x,
        # the bracket is widened by the absolute accuracy floor
        exact_lo=np.maximum(vals[Rounding.LOWER] - floor, 0.0),
        exact_hi=vals[Rounding.UPPER] + floor,
        first_order=first,
        second_order=first + model.mean * m2f * lm,
        local_mass=lm,
        target=model.mean * m2f,
        meta={
            "model": repr(model),
            "count": repr(count),
            "step": step,
            "x_max": x_max,
            "method": method,
            "abs_error_floor": floor,
        },
    )


# -- tail-equivalent construction with a density ------------------------------


@dataclass(frozen=True, eq=False)
class EquivalentTailModel:
    """H with density K * F(x, x+1], K = 1 / int_0^1 F_bar.

    ``excess(x)`` is H_bar(x) - K F_bar(x) = -K int_0^1 F(x, x+z] dz, computed
    directly rather than as a difference of two nearly equal tails.
    """

    source: HeavyTailModel
    K: float

    def density(self, x):
        return self.K * self.source.local_mass(x, 1.0)

    def tail(self, x) -> float:
        return self.K * _quad(lambda s: self.source.tail(s), x, x + 1.0)

    def excess(self, x) -> float:
        return -self.K * _quad(lambda z: self.source.local_mass(x, z) if z > 0 else 0.0, 0.0, 1.0)

    def local_mass(self, x, t: float) -> float:
        """H(x, x+t] = K int_x^{x+t} F(s, s+1] ds."""
        return self.K * _quad(lambda s: self.source.local_mass(s, 1.0), x, x + t)

    def density_integral(self, upper: float) -> float:
        """int_0^upper of the density, by quadrature over geometric pieces."""
        edges = [0.0, 1.0]
        while edges[-1] < upper:
            edges.append(min(edges[-1] * 2.0, upper))
        pts = sorted(set(edges) | {self.source.support_min})
        pts = [p for p in pts if p <= upper]
        total = 0.0
        for lo, hi in zip(pts[:-1], pts[1:]):
            total += _quad(lambda s: self.density(s), lo, hi, rel=1e-13)
        return total


def _quad(fn, a: float, b: float, rel: float = 1e-12) -> float:
    # quad warns when it cannot reach rel; the explicit bound below decides
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(lambda s: float(fn(s)), a, b, epsabs=0.0, epsrel=rel, limit=400)
    if err > max(1e-10 * abs(val), 1e-300):
        raise QuadratureError(f"quadrature error {err:.3g} on [{a}, {b}] exceeds 1e-10 relative")
    return val


def build_equivalent_tail(model: HeavyTailModel) -> EquivalentTailModel:
    pts = [p for p in (model.support_min,) if 0 < p < 1]
    if pts:
        head = _quad(lambda s: model.tail(s), 0.0, pts[0]) + _quad(lambda s: model.tail(s), pts[0], 1.0)
    else:
        head = _quad(lambda s: model.tail(s), 0.0, 1.0)
    return EquivalentTailModel(model, 1.0 / head)
