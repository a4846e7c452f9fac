"""Acceptance criteria, one test each.

Every test appends a ``PASS criterion k: ...`` or ``FAIL criterion k: ...``
line that is echoed at the end of the pytest run.  Run this file directly
(``python tests/test_acceptance.py``) to print the lines without pytest.
Heavy computations are shared between criteria through ``functools.cache``.
"""

from __future__ import annotations

import dataclasses
import functools
import math
import sys
from pathlib import Path

import numpy as np
import pytest

from subexp2.asymptotics import approximation_report, build_equivalent_tail
from subexp2.cli import residual_curve
from subexp2.counts import Geometric, Poisson
from subexp2.diagnostics import (
    Verdict,
    default_settings,
    diagnose,
    geometric_grid,
    kesten_bound_check,
    local_ratio_limit,
    smallness_threshold,
)
from subexp2.lattice import LatticeBracket, snap
from subexp2.models import LognormalModel, ParetoModel, PiecewiseParetoModel, WeibullModel
from subexp2.montecarlo import checkable, oracle_agreement, simulate_compound_tail, simulate_nfold_tail

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script from elsewhere
    ACCEPTANCE_LINES = []

PARETO = ParetoModel(1, 2)
FAMILIES = {
    "pareto": PARETO,
    "weibull": WeibullModel(0.5),
    "lognormal": LognormalModel(0, 1),
    "piecewise_pareto": PiecewiseParetoModel(1, 2, 1.5),
}
COUNTS = {"geometric": Geometric(0.5), "poisson": Poisson(1.0)}
STEP = 0.01
COMPOUND_GRID = (10.0, 1e4)
MC_SAMPLES = 1_000_000
MC_SEED = 20240611


# -- shared computations ----------------------------------------------------------------


@functools.cache
def pareto_bracket() -> LatticeBracket:
    s = default_settings(PARETO)
    return LatticeBracket(PARETO, s.step, s.x_max + max(s.probe_t) + 1.0)


@functools.cache
def family_report(label: str):
    model = FAMILIES[label]
    s = default_settings(model)
    if label == "pareto":
        s = dataclasses.replace(s, nfold=(3, 4))
        return diagnose(model, s, pareto_bracket())
    return diagnose(model, s)


def _compound_x() -> np.ndarray:
    return np.unique(snap(geometric_grid(*COMPOUND_GRID), STEP))


@functools.cache
def compound_report(count: str, step: float = STEP):
    return approximation_report(PARETO, COUNTS[count], _compound_x(), step, COMPOUND_GRID[1] + 2.0)


@functools.cache
def compound_curve(count: str):
    curve = residual_curve(compound_report(count), 8, 0.10)
    curve.apply_halving(residual_curve(compound_report(count, STEP / 2), 8, 0.10))
    return curve


# -- criteria ----------------------------------------------------------------------------


def _within(est: float, target: float, rel: float) -> bool:
    return math.isfinite(est) and abs(est - target) <= rel * abs(target)


def criterion_1():
    c = family_report("pareto").curves["S2_eq"]
    ok = _within(c.last_window_estimate, 4.0, 0.10)
    return ok, f"second-order relation for Pareto(1,2): estimate {c.last_window_estimate:.4f}, target 4 ({c.verdict.value})"


def criterion_2():
    curves = family_report("pareto").curves
    n3, n4 = curves["nfold_n3"], curves["nfold_n4"]
    ok = _within(n3.last_window_estimate, 12.0, 0.15) and _within(n4.last_window_estimate, 24.0, 0.20)
    return ok, (
        f"n-fold expansion: n=3 estimate {n3.last_window_estimate:.3f} (target 12, 15%), "
        f"n=4 estimate {n4.last_window_estimate:.3f} (target 24, 20%)"
    )


def criterion_3():
    parts, ok = [], True
    for name, target in (("geometric", 4.0), ("poisson", 2.0)):
        rep = compound_report(name)
        curve = compound_curve(name)
        frac = float(np.max(rep.bracket_fraction[-curve.window :]))
        good = _within(curve.last_window_estimate, target, 0.10) and frac < 0.10
        ok &= good
        parts.append(f"{name} {curve.last_window_estimate:.4f} vs {target:g}, max bracket fraction {frac:.4f}")
    return ok, "compound expansion: " + "; ".join(parts)


def criterion_4():
    parts, ok = [], True
    for label in FAMILIES:
        rep = family_report(label)
        v = rep.verdicts["S2"]
        good = v is Verdict.CONVERGES
        if label == "lognormal" and not good:
            # only the second-order curve may be inconclusive, and only with the slow note
            good = (
                rep.verdicts["S_delta"] is Verdict.CONVERGES
                and rep.verdicts["S2_relation"] is Verdict.INCONCLUSIVE
                and "slowly" in rep.curves["S2_eq"].note
            )
        ok &= good
        parts.append(f"{label} {v.value}")
    return ok, "family membership: " + ", ".join(parts)


def criterion_5():
    H = build_equivalent_tail(PARETO)
    x = 1e4
    rel = H.excess(x) / PARETO.local_mass(x, 1.0)
    total = H.density_integral(1e6)
    ok = abs(H.K - 1.0) < 1e-12 and abs(rel + H.K / 2) <= 0.02 * H.K / 2 and abs(total - 1.0) <= 1e-6
    return ok, f"tail-equivalent construction: K={H.K:.12g}, ratio at 1e4 {rel:.5f} (target -0.5), density mass {total:.9f}"


def criterion_6():
    br = pareto_bracket()
    A = smallness_threshold(PARETO, br.x_max, br.step)
    res = kesten_bound_check(br, PARETO, 0.5, A, 8)
    mono = res.nonincreasing_between(3, 8)
    scaled = ", ".join(f"{n}:{res.scaled[n]:.3g}" for n in range(3, 9))
    return mono and res.lower_bound_ok, (
        f"uniform bound: A={A:g}, s_n/1.5^n for n=3..8 [{scaled}] nonincreasing={mono}, "
        f"lower bound holds={res.lower_bound_ok}"
    )


@functools.cache
def _oracle_points():
    """(estimates, lo, hi) pooled over every acceptance configuration."""
    est, lo, hi = [], [], []
    for name, count in COUNTS.items():
        rep = compound_report(name)
        sims = simulate_compound_tail(PARETO, count, rep.x_grid, MC_SAMPLES, MC_SEED)
        est += sims
        lo += list(rep.exact_lo)
        hi += list(rep.exact_hi)
    for i, (label, model) in enumerate(FAMILIES.items()):
        s = default_settings(model)
        xs = np.unique(snap(geometric_grid(s.x_min, s.x_max, s.ratio), s.step))
        br = pareto_bracket() if label == "pareto" else LatticeBracket(model, s.step, s.x_max + 1.0)
        a, b = br.tail(2, xs)
        est += simulate_nfold_tail(model, 2, xs, MC_SAMPLES, MC_SEED + 1 + i)
        lo += list(a)
        hi += list(b)
    return est, np.array(lo), np.array(hi)


def criterion_7():
    est, lo, hi = _oracle_points()
    frac, inside = oracle_agreement(est, lo, hi)
    n_check = int(checkable(est, 0.5 * (lo + hi)).sum())
    ok = math.isfinite(frac) and frac >= 0.95
    return ok, f"Monte Carlo agreement: {frac:.3f} of {n_check} checkable points inside bracket +- 3 se"


def criterion_8():
    worst, where = 0.0, ""
    for label, model in FAMILIES.items():
        for t in (0.5, 2.0):
            dev = abs(local_ratio_limit(model, 1e4, t).value - t) / t
            if dev > worst:
                worst, where = dev, f"{label} t={t:g}"
    return worst <= 0.01, f"local ratio limit at 1e4: worst relative deviation {worst:.2e} ({where})"


def criterion_9():
    flipped, checked = [], 0
    for label in FAMILIES:
        for c in family_report(label).curves.values():
            if c.halving_verdict is None:
                continue
            checked += 1
            if "flipped" in c.note:
                flipped.append(f"{label}/{c.name}")
    for name in COUNTS:
        c = compound_curve(name)
        checked += 1
        if "flipped" in c.note:
            flipped.append(f"compound/{name}")
    detail = f"step halving: {checked} lattice curves rechecked at h/2, flips: {', '.join(flipped) or 'none'}"
    return not flipped, detail


CRITERIA = {k: globals()[f"criterion_{k}"] for k in range(1, 10)}


def _record(k: int) -> tuple[bool, str]:
    ok, detail = CRITERIA[k]()
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok, line


@pytest.mark.parametrize("k", list(CRITERIA))
def test_criterion(k):
    ok, line = _record(k)
    assert ok, line


if __name__ == "__main__":
    sys.path.insert(0, str(Path(__file__).parent))
    results = [_record(k)[0] for k in CRITERIA]
    sys.exit(0 if all(results) else 1)
