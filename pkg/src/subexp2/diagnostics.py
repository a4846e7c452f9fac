"""Numerical evidence for class membership and the limit relations.

Each limit relation becomes a :class:`RatioCurve` sampled on a geometric
x-grid.  A verdict is read off the last window of the curve.  Verdicts are
numerical evidence, not proofs.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np

from .asymptotics import EquivalentTailModel, build_equivalent_tail
from .lattice import LatticeBracket, LatticeError, Rounding, snap
from .models import HeavyTailModel, LognormalModel

Target = Union[float, str]  # a number, "zero" or "bounded"


class Verdict(str, enum.Enum):
    CONVERGES = "CONVERGES"
    BOUNDED = "BOUNDED"
    DIVERGES = "DIVERGES"
    INCONCLUSIVE = "INCONCLUSIVE"


class UndefinedRatio(ArithmeticError):
    """Denominator is zero or has underflowed."""


class Flag(str, enum.Enum):
    OK = ""
    UNDEFINED = "undefined"
    CANCELLATION = "cancellation"


@dataclass(frozen=True)
class Interval:
    value: float
    lo: float
    hi: float
    flag: Flag = Flag.OK

    @classmethod
    def exact(cls, v: float) -> "Interval":
        return cls(v, v, v)

    @property
    def width(self) -> float:
        return self.hi - self.lo


def geometric_grid(x_min: float, x_max: float, ratio: float = 10 ** (1 / 8)) -> np.ndarray:
    """Points x_max / ratio**i down to x_min, ascending; anchored at x_max."""
    if not (0 < x_min < x_max) or not ratio > 1:
        raise ValueError("need 0 < x_min < x_max and ratio > 1")
    n = int(math.floor(math.log(x_max / x_min) / math.log(ratio) + 1e-9))
    return x_max / ratio ** np.arange(n, -1, -1)


# -- verdicts ------------------------------------------------------------------


def judge(values: np.ndarray, usable: np.ndarray, target: Target, tol: float, window: int = 8):
    """Verdict, last-window estimate and spread of a sampled ratio curve."""
    vals = np.asarray(values, dtype=float)[-window:]
    ok = np.asarray(usable, dtype=bool)[-window:] & np.isfinite(vals)
    w = vals[ok]
    if len(w) < max(2, (window + 1) // 2):
        return Verdict.INCONCLUSIVE, math.nan, math.nan
    est = float(np.median(w))
    spread = float(w.max() - w.min())
    half = len(w) // 2
    if target == "bounded":
        prev = np.asarray(values, dtype=float)[-2 * window : -window]
        prev = prev[np.isfinite(prev)]
        ref = float(np.max(np.abs(prev))) if len(prev) else float(np.max(np.abs(w[:half])))
        top = float(np.max(np.abs(w)))
        if top <= (1 + tol) * ref or top <= tol:
            return Verdict.BOUNDED, est, spread
        if np.all(np.diff(np.abs(w)) > 0):
            return Verdict.DIVERGES, est, spread
        return Verdict.INCONCLUSIVE, est, spread
    if target == "zero":
        mags = np.abs(w)
        if mags.max() < tol:
            return Verdict.CONVERGES, est, spread
        if mags[half:].mean() >= mags[:half].mean():
            return Verdict.DIVERGES, est, spread
        return Verdict.INCONCLUSIVE, est, spread
    t = float(target)
    scale = abs(t) if t != 0 else 1.0
    rel_spread = spread / scale
    off = abs(est - t) / scale
    if rel_spread < tol and off < tol:
        return Verdict.CONVERGES, est, rel_spread
    if rel_spread < tol:
        # settled, but somewhere else
        return Verdict.DIVERGES, est, rel_spread
    dist = np.abs(w - t)
    if off >= tol and dist[half:].mean() > dist[:half].mean():
        return Verdict.DIVERGES, est, rel_spread
    return Verdict.INCONCLUSIVE, est, rel_spread


def combine(verdicts: Sequence[Verdict]) -> Verdict:
    verdicts = list(verdicts)
    if verdicts and all(v in (Verdict.CONVERGES, Verdict.BOUNDED) for v in verdicts):
        return Verdict.CONVERGES
    if any(v is Verdict.DIVERGES for v in verdicts):
        return Verdict.DIVERGES
    return Verdict.INCONCLUSIVE


@dataclass
class RatioCurve:
    name: str
    x_grid: np.ndarray
    values: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    flags: list
    target: Target
    tol: float
    window: int = 8
    uses_lattice: bool = False
    note: str = ""
    verdict: Verdict = field(init=False)
    last_window_estimate: float = field(init=False)
    spread: float = field(init=False)
    halving_verdict: Verdict | None = None
    halving_estimate: float | None = None

    def __post_init__(self):
        self.rejudge()

    def rejudge(self) -> None:
        usable = np.array([f is Flag.OK for f in self.flags])
        self.verdict, self.last_window_estimate, self.spread = judge(self.values, usable, self.target, self.tol, self.window)

    def apply_halving(self, other: "RatioCurve") -> None:
        """Downgrade a CONVERGES verdict that does not survive step halving."""
        self.halving_verdict = other.verdict
        self.halving_estimate = other.last_window_estimate
        if self.verdict is Verdict.CONVERGES and other.verdict is not Verdict.CONVERGES:
            self.verdict = Verdict.INCONCLUSIVE
            self.note = (self.note + "; " if self.note else "") + f"verdict flipped to {other.verdict.value} at half step"

    @property
    def window_x(self) -> np.ndarray:
        return self.x_grid[-self.window :]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "target": self.target,
            "tol": self.tol,
            "verdict": self.verdict.value,
            "last_window_estimate": _num(self.last_window_estimate),
            "spread": _num(self.spread),
            "halving_verdict": self.halving_verdict.value if self.halving_verdict else None,
            "halving_estimate": _num(self.halving_estimate),
            "note": self.note,
            "points": [
                {"x": float(x), "value": _num(v), "lo": _num(a), "hi": _num(b), "flag": f.value}
                for x, v, a, b, f in zip(self.x_grid, self.values, self.lo, self.hi, self.flags)
            ],
        }

    def csv_rows(self):
        for x, v, a, b, f in zip(self.x_grid, self.values, self.lo, self.hi, self.flags):
            yield [self.name, repr(float(x)), repr(float(v)), repr(float(a)), repr(float(b)), f.value]


CURVE_COLUMNS = ("curve", "x", "value", "lo", "hi", "flag")


def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def ratio_curve(
    name: str,
    fn: Callable[[float], Interval],
    x_grid,
    target: Target,
    tol: float,
    window: int = 8,
    uses_lattice: bool = False,
    note: str = "",
) -> RatioCurve:
    xs = np.asarray(x_grid, dtype=float)
    vals, los, his, flags = [], [], [], []
    for x in xs:
        try:
            iv = fn(float(x))
        except UndefinedRatio:
            iv = Interval(math.nan, math.nan, math.nan, Flag.UNDEFINED)
        vals.append(iv.value)
        los.append(iv.lo)
        his.append(iv.hi)
        flags.append(iv.flag)
    return RatioCurve(name, xs, np.array(vals), np.array(los), np.array(his), flags, target, tol, window, uses_lattice, note)


# -- lattice-based ratios ----------------------------------------------------------


def _positive(v: float, what: str) -> float:
    if not v > 0 or not math.isfinite(v):
        raise UndefinedRatio(f"{what} is zero or underflowed")
    return v


def subexp_ratio(powers: LatticeBracket, model: HeavyTailModel, x: float) -> Interval:
    """F2*_bar(x) / F_bar(x); target 2."""
    den = _positive(model.tail(x), "F_bar(x)")
    lo, hi = powers.tail(2, x)
    return Interval(0.5 * (lo + hi) / den, lo / den, hi / den)


def local_subexp_ratio(powers: LatticeBracket, model: HeavyTailModel, x: float, t: float) -> Interval:
    """F2*(x, x+t] / F(x, x+t]; target 2."""
    den = _positive(model.local_mass(x, t), "F(x, x+t]")
    a_lo, a_hi = powers.tail(2, x)
    b_lo, b_hi = powers.tail(2, x + t)
    mid = 0.5 * ((a_lo + a_hi) - (b_lo + b_hi))
    return Interval(mid / den, (a_lo - b_hi) / den, (a_hi - b_lo) / den)


def nfold_ratio(powers: LatticeBracket, model: HeavyTailModel, n: int, x: float) -> Interval:
    """(Fn*_bar(x) - n F_bar(x)) / F(x, x+1]; target n(n-1) mu.

    n F_bar(x) comes from the closed form; only the n-fold tail carries
    lattice error.  Points whose bracket is wider than half the numerator
    are flagged.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    den = _positive(model.local_mass(x, 1.0), "F(x, x+1]")
    lo, hi = powers.tail(n, x)
    nf = n * model.tail(x)
    num = 0.5 * (lo + hi) - nf
    flag = Flag.CANCELLATION if (hi - lo) > 0.5 * abs(num) else Flag.OK
    return Interval(num / den, (lo - nf) / den, (hi - nf) / den, flag)


def second_order_ratio(powers: LatticeBracket, model: HeavyTailModel, x: float) -> Interval:
    """(F2*_bar(x) - 2 F_bar(x)) / F(x, x+1]; target 2 mu."""
    return nfold_ratio(powers, model, 2, x)


# -- closed-form ratios -----------------------------------------------------------


_GL_HI = np.polynomial.legendre.leggauss(40)
_GL_LO = np.polynomial.legendre.leggauss(20)


def _gauss(fn, a: float, b: float, rule) -> float:
    nodes, weights = rule
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return half * math.fsum(weights * fn(mid + half * nodes))


def sstar_ratio(model: HeavyTailModel, x: float) -> Interval:
    """int_0^x F_bar(y) F_bar(x-y) dy / F_bar(x); target 2 mu.

    Integrates over [0, x/2] and doubles, in log space, with fixed
    Gauss-Legendre rules on pieces split at dyadic points and at every
    point where either factor is not smooth.  The gap between a 40-point
    and a 20-point rule serves as the error estimate.
    """
    lt_x = model.log_tail(x)
    if not math.isfinite(lt_x):
        raise UndefinedRatio("F_bar(x) underflowed")

    def integrand(y):
        return np.exp(model.log_tail(y) + model.log_tail(x - y) - lt_x)

    half = 0.5 * x
    dyadic = 2.0 ** np.arange(-20, 64)
    kinks = model.breakpoints(0.0, x)
    edges = np.concatenate(([0.0, half], dyadic, kinks, x - kinks))
    edges = np.unique(edges[(edges >= 0.0) & (edges <= half)])
    total = err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        hi = _gauss(integrand, a, b, _GL_HI)
        total += hi
        err += abs(hi - _gauss(integrand, a, b, _GL_LO))
    if err > 0.01 * total:
        raise ArithmeticError(f"S* quadrature error {err:.3g} exceeds 1% of {total:.3g}")
    return Interval(2 * total, 2 * (total - err), 2 * (total + err))


def local_ratio_limit(model: HeavyTailModel, x: float, t: float) -> Interval:
    """F(x, x+t] / F(x, x+1]; target t."""
    if not t > 0:
        raise ValueError("t must be > 0")
    den = model.local_rel(x, 1.0)
    if not den > 0:
        raise UndefinedRatio("F(x, x+1] is zero")
    return Interval.exact(model.local_rel(x, t) / den)


def long_tail_deviation(model: HeavyTailModel, x: float, t: float, n_y: int = 41) -> Interval:
    """sup over y in [0, 1] of |F(x+y, x+y+t] / F(x, x+t] - 1|; target 0."""
    ys = np.linspace(0.0, 1.0, n_y)
    den = model.local_rel(x, t)
    if not den > 0:
        raise UndefinedRatio("F(x, x+t] is zero")
    lt = model.log_tail(x + ys)
    num = np.exp(lt - model.log_tail(x)) * model.local_rel(x + ys, t)
    return Interval.exact(float(np.max(np.abs(num / den - 1.0))))


def smallness_ratios(model: HeavyTailModel, x: float) -> tuple[float, float]:
    """(F_bar(x)^2, F_bar(x/2)^2) each over F(x, x+1]; both should vanish."""
    rel = model.local_rel(x, 1.0)
    lt_x = model.log_tail(x)
    if not (rel > 0 and math.isfinite(lt_x)):
        return math.nan, math.nan
    # F_bar(a)^2 / F(x, x+1] = exp(2 lt(a) - lt(x)) / rel
    r1 = math.exp(lt_x) / rel
    r2 = math.exp(2 * model.log_tail(0.5 * x) - lt_x) / rel
    return r1, r2


def hazard_quotient(model: HeavyTailModel, x: float) -> float:
    """q(x) = F(x, x+1] / F_bar(x)."""
    return model.local_rel(x, 1.0)


def hazard_quotient_boundedness(
    model: HeavyTailModel, y_set: Sequence[float], x_grid, tol: float = 0.1, window: int = 8
) -> dict[str, RatioCurve]:
    """Curves q(xy)/q(x) and h(xy)/h(x), each judged for boundedness."""
    out = {}
    for y in y_set:

        def q_ratio(x, y=y):
            qx = hazard_quotient(model, x)
            if not qx > 0:
                raise UndefinedRatio("q(x) is zero")
            return Interval.exact(hazard_quotient(model, x * y) / qx)

        def h_ratio(x, y=y):
            qx = hazard_quotient(model, x)
            if not qx > 0:
                raise UndefinedRatio("h(x) is zero")
            return Interval.exact(math.exp(model.log_tail(x * y) - model.log_tail(x)) * hazard_quotient(model, x * y) / qx)

        out[f"q_ratio_y{y:g}"] = ratio_curve(f"q_ratio_y{y:g}", q_ratio, x_grid, "bounded", tol, window)
        out[f"h_ratio_y{y:g}"] = ratio_curve(f"h_ratio_y{y:g}", h_ratio, x_grid, "bounded", tol, window)
    return out


# -- the integral criterion over the middle range ------------------------------------------


def integral_criterion(model: HeavyTailModel, A: float, x: float, step: float) -> Interval:
    """[int_A^{x-A} (F_bar(x-y) - F_bar(x)) dF(y) - F_bar(x)^2] / F(x, x+1].

    The Stieltjes integral is summed against lattice cell masses of F; the
    integrand is increasing in y, so evaluating it at the right and left
    cell ends brackets the integral.
    """
    den = _positive(model.local_mass(x, 1.0), "F(x, x+1]")
    fx = model.tail(x)
    sq = fx * fx
    if x <= 2 * A:
        v = -sq / den
        return Interval.exact(v)
    k0 = int(round(A / step))
    k1 = int(round((x - A) / step))
    k = np.arange(k0 + 1, k1 + 1, dtype=float)
    cells = model.local_mass((k - 1) * step, step)
    right = model.tail(np.maximum(x - k * step, 0.0)) - fx
    left = model.tail(np.maximum(x - (k - 1) * step, 0.0)) - fx
    hi = math.fsum(cells * right)
    lo = math.fsum(cells * left)
    return Interval((0.5 * (lo + hi) - sq) / den, (lo - sq) / den, (hi - sq) / den)


def integral_criterion_matrix(model: HeavyTailModel, A_values, x_values, step: float) -> dict:
    """Rows indexed by A, columns by x.  The double limit is x first, then A."""
    rows = []
    for A in A_values:
        row = []
        for x in x_values:
            try:
                row.append(integral_criterion(model, A, float(x), step).value)
            except UndefinedRatio:
                row.append(math.nan)
        rows.append(row)
    return {"A": [float(a) for a in A_values], "x": [float(x) for x in x_values], "values": rows}


def stieltjes_decomposition(model: HeavyTailModel, x: float, A: float, step: float) -> dict:
    """Split F2*_bar(x) - 2 F_bar(x) on the UPPER lattice into its pieces.

    On a lattice the identity  T2 - 2 T1 = sum_k m_k (T1(x - kh) - T1(x)) - T1(x)^2
    is exact, so head + middle + end - square reproduces the lattice value.
    """
    k_max = int(round(x / step))
    k = np.arange(0, k_max + 1, dtype=float)
    masses = np.empty(k_max + 1)
    masses[0] = 1.0 - model.tail(0.0)
    masses[1:] = model.local_mass((k[1:] - 1) * step, step)
    fx = model.tail(x)
    terms = masses * (model.tail(np.maximum(x - k * step, 0.0)) - fx)
    ka = int(round(A / step))
    kb = int(round((x - A) / step))
    return {
        "head": math.fsum(terms[: ka + 1]),
        "middle": math.fsum(terms[ka + 1 : kb + 1]),
        "end": math.fsum(terms[kb + 1 :]),
        "square": fx * fx,
    }


# -- uniform bound over n -----------------------------------------------------------------


@dataclass
class KestenResult:
    eps: float
    A: float
    s: dict[int, float]
    scaled: dict[int, float]
    K_hat: float
    n0: int | None
    passed: bool
    beta: dict[int, float]
    lower_bound_ok: bool

    def nonincreasing_between(self, n_lo: int, n_hi: int) -> bool:
        vals = [self.scaled[n] for n in range(n_lo, n_hi + 1)]
        return all(b <= a for a, b in zip(vals[:-1], vals[1:]))

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "A": self.A,
            "s": {str(k): v for k, v in self.s.items()},
            "scaled": {str(k): v for k, v in self.scaled.items()},
            "K_hat": self.K_hat,
            "n0": self.n0,
            "passed": self.passed,
            "beta": {str(k): v for k, v in self.beta.items()},
            "lower_bound_ok": self.lower_bound_ok,
        }


def smallness_threshold(model: HeavyTailModel, x_max: float, step: float) -> float:
    """Smallest grid A with sup_{A <= x <= x_max} F_bar(x)^2 / F(x, x+1] <= 1."""
    x = np.arange(0, int(round(x_max / step)) + 1) * step
    lm = model.local_mass(x, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(lm > 0, model.tail(x) ** 2 / lm, np.inf)
    sup_from = np.maximum.accumulate(r[::-1])[::-1]
    ok = np.nonzero(sup_from <= 1.0)[0]
    if len(ok) == 0:
        raise LatticeError("no A on the grid satisfies the smallness condition")
    return float(x[ok[0]])


def kesten_bound_check(powers: LatticeBracket, model: HeavyTailModel, eps: float, A: float, n_max: int) -> KestenResult:
    """s_n = sup_{x >= A} |Fn*_bar(x) - n F_bar(x)| / F(x, x+1] over the grid.

    s_n uses the bracket midpoint; beta_n (the signed infimum) uses the LOWER
    lattice, which under-estimates every tail, so beta_n >= -n^2 there is a
    safe statement.
    """
    if not eps > 0:
        raise ValueError("eps must be > 0")
    base = powers.base[Rounding.UPPER]
    k0 = base.index(powers.snap(A))
    x = base.grid[k0:]
    fx = model.tail(x)
    lm = model.local_mass(x, 1.0)
    keep = lm > 0
    s, scaled, beta = {1: 0.0}, {1: 0.0}, {1: 0.0}
    for n in range(2, n_max + 1):
        up = powers.power(Rounding.UPPER, n).tails[k0:]
        lo = powers.power(Rounding.LOWER, n).tails[k0:]
        mid = 0.5 * (up + lo)
        s[n] = float(np.max(np.abs(mid[keep] - n * fx[keep]) / lm[keep]))
        beta[n] = float(np.min((lo[keep] - n * fx[keep]) / lm[keep]))
    for n in s:
        scaled[n] = s[n] / (1 + eps) ** n
    K_hat = max(scaled.values())
    # n0: first n from which the scaled sequence never increases again
    n0 = None
    for start in range(2, n_max + 1):
        seq = [scaled[n] for n in range(start, n_max + 1)]
        if all(b <= a for a, b in zip(seq[:-1], seq[1:])):
            n0 = start
            break
    passed = n0 is not None and n0 < n_max
    lower_ok = all(beta[n] >= -(n**2) for n in range(2, n_max + 1))
    return KestenResult(eps, float(x[0]), s, scaled, K_hat, n0, passed, beta, lower_ok)


# -- tail equivalence -------------------------------------------------------------------


def tail_equivalence_check(H: EquivalentTailModel, x_grid, tol: float = 0.02, t: float = 1.0, window: int = 8) -> tuple[RatioCurve, RatioCurve]:
    """(H_bar - K F_bar)/F(x, x+1] -> -K/2 and H(x, x+t]/F(x, x+t] -> K."""
    src = H.source

    def excess(x):
        den = _positive(src.local_mass(x, 1.0), "F(x, x+1]")
        return Interval.exact(H.excess(x) / den)

    def local(x):
        den = _positive(src.local_mass(x, t), "F(x, x+t]")
        return Interval.exact(H.local_mass(x, t) / den)

    c1 = ratio_curve("equivalence_excess", excess, x_grid, -H.K / 2, tol, window)
    c2 = ratio_curve(f"equivalence_local_t{t:g}", local, x_grid, H.K, tol, window)
    return c1, c2


# -- class report -------------------------------------------------------------------


@dataclass
class DiagnosticsSettings:
    step: float = 0.01
    x_min: float = 10.0
    x_max: float = 1000.0
    ratio: float = 10 ** (1 / 8)
    window: int = 8
    closed_x_max: float = 1e6
    probe_t: tuple = (0.5, 1.0, 2.0)
    tol: float = 0.10
    local_ratio_tol: float = 0.01
    zero_tol: float = 0.05
    bounded_tol: float = 0.10
    y_set: tuple = (0.5, 2.0)
    A_values: tuple = (10.0, 50.0)
    check_halving: bool = True
    nfold: tuple = ()
    budget: int = 200_000_000


DEFAULT_SETTINGS = {
    "pareto": DiagnosticsSettings(),
    "piecewise_pareto": DiagnosticsSettings(x_max=1e4),
    "lognormal": DiagnosticsSettings(x_max=1e4),
    "weibull": DiagnosticsSettings(step=0.05, x_min=100.0, x_max=10**4.5),
    "atom": DiagnosticsSettings(step=0.01, x_min=0.1, x_max=100.0),
}

def default_settings(model: HeavyTailModel) -> DiagnosticsSettings:
    return dataclasses.replace(DEFAULT_SETTINGS.get(model.label, DiagnosticsSettings()))


SLOW_NOTE = "lognormal: second-order ratio converges slowly (corrections of order ln x / x)"


@dataclass
class ClassReport:
    label: str
    model: str
    settings: dict
    curves: dict[str, RatioCurve]
    verdicts: dict[str, Verdict]
    integral_matrix: dict
    notes: list[str] = field(default_factory=list)
    halved_curves: dict[str, RatioCurve] = field(default_factory=dict)

    @property
    def overall(self) -> Verdict:
        return self.verdicts["S2"]

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "model": self.model,
            "settings": self.settings,
            "verdicts": {k: v.value for k, v in self.verdicts.items()},
            "overall_S2": self.overall.value,
            "curves": {k: c.to_dict() for k, c in self.curves.items()},
            "integral_criterion": self.integral_matrix,
            "notes": self.notes,
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CURVE_COLUMNS)
            for c in self.curves.values():
                w.writerows(c.csv_rows())

    def summary_table(self) -> str:
        lines = [f"model: {self.model}", f"{'curve':<28}{'target':>12}{'estimate':>12}{'verdict':>15}{'halved':>15}"]
        for c in self.curves.values():
            tgt = c.target if isinstance(c.target, str) else f"{c.target:.4g}"
            est = f"{c.last_window_estimate:.4g}" if math.isfinite(c.last_window_estimate) else "nan"
            hv = c.halving_verdict.value if c.halving_verdict else "-"
            lines.append(f"{c.name:<28}{tgt:>12}{est:>12}{c.verdict.value:>15}{hv:>15}")
        lines.append("class verdicts: " + ", ".join(f"{k}={v.value}" for k, v in self.verdicts.items()))
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines)


def _lattice_curves(bracket: LatticeBracket, model: HeavyTailModel, s: DiagnosticsSettings, xs: np.ndarray) -> dict[str, RatioCurve]:
    mu = model.mean
    curves = {}
    kw = dict(window=s.window, uses_lattice=True)
    curves["S"] = ratio_curve("S", lambda x: subexp_ratio(bracket, model, x), xs, 2.0, s.tol, **kw)
    for t in s.probe_t:
        name = f"S_delta_t{t:g}"
        curves[name] = ratio_curve(name, lambda x, t=t: local_subexp_ratio(bracket, model, x, t), xs, 2.0, s.tol, **kw)
    note = SLOW_NOTE if isinstance(model, LognormalModel) else ""
    curves["S2_eq"] = ratio_curve("S2_eq", lambda x: second_order_ratio(bracket, model, x), xs, 2 * mu, s.tol, note=note, **kw)
    for n in s.nfold:
        name = f"nfold_n{n}"
        curves[name] = ratio_curve(name, lambda x, n=n: nfold_ratio(bracket, model, n, x), xs, n * (n - 1) * mu, s.tol, **kw)
    return curves


def diagnose(model: HeavyTailModel, settings: DiagnosticsSettings | None = None, bracket: LatticeBracket | None = None) -> ClassReport:
    """Run every curve for ``model`` and collect class verdicts."""
    s = settings or default_settings(model)
    mu = model.mean
    xs = geometric_grid(s.x_min, s.x_max, s.ratio)
    xs = np.unique(snap(xs, s.step))
    xc = geometric_grid(s.x_min, s.closed_x_max, s.ratio)
    x_lat = s.x_max + max(s.probe_t) + 1.0
    if bracket is None or bracket.step != s.step or bracket.x_max < x_lat:
        bracket = LatticeBracket(model, s.step, x_lat, s.budget)
    curves = _lattice_curves(bracket, model, s, xs)
    halved = {}
    if s.check_halving:
        half = bracket.halved()
        xs_half = snap(xs, half.step)
        halved = _lattice_curves(half, model, s, xs_half)
        for k, c in curves.items():
            c.apply_halving(halved[k])
    for t in s.probe_t:
        name = f"L_delta_t{t:g}"
        curves[name] = ratio_curve(name, lambda x, t=t: long_tail_deviation(model, x, t), xc, "zero", s.zero_tol, s.window)
    curves["S_star"] = ratio_curve("S_star", lambda x: sstar_ratio(model, x), xs, 2 * mu, s.tol, s.window)
    curves["smallness_r1"] = ratio_curve("smallness_r1", lambda x: Interval.exact(_defined(smallness_ratios(model, x)[0])), xc, "zero", s.zero_tol, s.window)
    curves["smallness_r2"] = ratio_curve("smallness_r2", lambda x: Interval.exact(_defined(smallness_ratios(model, x)[1])), xc, "zero", s.zero_tol, s.window)
    curves.update(hazard_quotient_boundedness(model, s.y_set, xc, s.bounded_tol, s.window))
    for t in s.probe_t:
        if t == 1.0:
            continue
        name = f"local_ratio_t{t:g}"
        curves[name] = ratio_curve(name, lambda x, t=t: local_ratio_limit(model, x, t), xc, t, s.local_ratio_tol, s.window)

    v = {name: c.verdict for name, c in curves.items()}
    L = combine([v[f"L_delta_t{t:g}"] for t in s.probe_t])
    S_delta = combine([L] + [v[f"S_delta_t{t:g}"] for t in s.probe_t])
    verdicts = {
        "S": v["S"],
        "L_delta": L,
        "S_delta": S_delta,
        "S_star": v["S_star"],
        "S2_relation": v["S2_eq"],
        "S2": combine([S_delta, v["S2_eq"]]),
        "smallness": combine([v["smallness_r1"], v["smallness_r2"]]),
        "q_bounded": combine([v[k] for k in v if k.startswith("q_ratio")]),
        "h_bounded": combine([v[k] for k in v if k.startswith("h_ratio")]),
        "local_ratio_limit": combine([v[k] for k in v if k.startswith("local_ratio")]),
    }
    # sufficient route: L_delta, S*, F_bar^2(x/2) = o(F(x,x+1]) and bounded q
    verdicts["S2_sufficient"] = combine([L, v["S_star"], v["smallness_r2"], verdicts["q_bounded"]])
    # second route: the same without S*, with bounded h in place of bounded q
    verdicts["S2_sufficient_h"] = combine([L, v["smallness_r2"], verdicts["h_bounded"]])
    notes = []
    if isinstance(model, LognormalModel):
        notes.append(SLOW_NOTE)
    if any(Flag.CANCELLATION in c.flags for c in curves.values()):
        notes.append("some points excluded for cancellation (bracket wider than half the numerator)")
    A_vals = [a for a in s.A_values if 2 * a < s.x_max]
    mat_x = [float(x) for x in xs[-s.window :] if all(x > 2 * a for a in A_vals)]
    matrix = integral_criterion_matrix(model, A_vals, mat_x, s.step) if A_vals and mat_x else {}
    return ClassReport(model.label, repr(model), _settings_dict(s), curves, verdicts, matrix, notes, halved)


def _defined(v: float) -> float:
    if not math.isfinite(v):
        raise UndefinedRatio("0/0")
    return v


def _settings_dict(s: DiagnosticsSettings) -> dict:
    out = {}
    for k, v in s.__dict__.items():
        out[k] = list(v) if isinstance(v, tuple) else v
    return out


def equivalence_curves(model: HeavyTailModel, x_grid, tol: float = 0.02) -> tuple[RatioCurve, RatioCurve]:
    return tail_equivalence_check(build_equivalent_tail(model), x_grid, tol)
