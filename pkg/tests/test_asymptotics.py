import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from subexp2.asymptotics import (
    REPORT_COLUMNS,
    approximation_report,
    build_equivalent_tail,
    first_order_tail,
    nfold_expansion,
    second_order_correction,
    second_order_tail,
)
from subexp2.counts import Deterministic, Geometric, NegativeBinomial, Poisson
from subexp2.lattice import LatticeBracket
from subexp2.models import AtomModel, LognormalModel, ParetoModel, PiecewiseParetoModel, WeibullModel


def test_second_order_deterministic_one_is_tail():
    m = ParetoModel(1, 2)
    xs = np.array([2.0, 10.0, 100.0])
    np.testing.assert_array_equal(second_order_tail(m, Deterministic(1), xs), m.tail(xs))


def test_second_order_geometric_pareto():
    val = second_order_tail(ParetoModel(1, 2), Geometric(0.5), 100.0)
    assert val == pytest.approx(1e-4 + 4 * (1e-4 - 1 / 10201), rel=1e-12)
    assert val == pytest.approx(1.0788e-4, rel=1e-4)


def test_second_order_poisson_weibull():
    val = second_order_tail(WeibullModel(0.5), Poisson(2.0), 100.0)
    ref = 2 * math.exp(-10) + 2 * 4 * (math.exp(-10) - math.exp(-math.sqrt(101)))
    assert val == pytest.approx(ref, rel=1e-12)


def test_nfold_expansion_values():
    m = ParetoModel(1, 2)
    assert nfold_expansion(m, 2, 100.0) == pytest.approx(2e-4 + 4 * (1e-4 - 1 / 10201), rel=1e-12)
    assert nfold_expansion(m, 2, 100.0) == pytest.approx(2.0788e-4, rel=1e-4)
    with pytest.raises(ValueError):
        nfold_expansion(m, 1, 10.0)


def test_nfold_expansion_without_local_mass():
    # all mass at 1: nothing in (x, x+1] for x >= 1
    m = AtomModel(1.0)
    assert nfold_expansion(m, 5, 3.0) == 5 * m.tail(3.0) == 0.0
    assert nfold_expansion(m, 5, 0.5) == 5.0 + 20 * m.mean


def test_nfold_two_matches_lattice_at_500():
    m = ParetoModel(1, 2)
    br = LatticeBracket(m, 0.01, 520.0)
    lo, hi = br.tail(2, np.array([500.0]))
    ratio = (0.5 * (lo[0] + hi[0]) - 2 * m.tail(500.0)) / m.local_mass(500.0, 1.0)
    assert ratio == pytest.approx(4.0, rel=0.10)


@given(
    st.sampled_from([ParetoModel(1, 2), WeibullModel(0.5), LognormalModel(0, 1), PiecewiseParetoModel(1, 2, 1.5)]),
    st.sampled_from([Poisson(2.0), Geometric(0.5), NegativeBinomial(2.0, 0.3), Deterministic(3)]),
    st.floats(0, 1e6),
)
def test_second_minus_first_is_the_correction(model, count, x):
    diff = second_order_tail(model, count, x) - first_order_tail(model, count, x)
    corr = second_order_correction(model, count, x)
    assert diff == pytest.approx(corr, rel=1e-12, abs=4 * np.spacing(first_order_tail(model, count, x)))


# -- tail-equivalent construction ------------------------------------------------------


@pytest.fixture(scope="module")
def pareto_h():
    return build_equivalent_tail(ParetoModel(1, 2))


def test_equivalent_tail_constant_pareto(pareto_h):
    assert pareto_h.K == pytest.approx(1.0, rel=1e-12)


def test_equivalent_tail_excess_pareto(pareto_h):
    m = ParetoModel(1, 2)
    x = 1e4
    rel = pareto_h.excess(x) / m.local_mass(x, 1.0)
    assert rel == pytest.approx(-0.5, rel=0.02)
    # the direct excess agrees with the difference of tails where that is well conditioned
    assert pareto_h.excess(10.0) == pytest.approx(pareto_h.tail(10.0) - m.tail(10.0), rel=1e-8)


def test_equivalent_density_integrates_to_one(pareto_h):
    assert pareto_h.density_integral(1e6) == pytest.approx(1.0, abs=1e-6)


def test_equivalent_tail_constant_weibull():
    h = build_equivalent_tail(WeibullModel(0.5))
    # int_0^1 exp(-sqrt s) ds = 2 - 4/e
    assert h.K == pytest.approx(1 / (2 - 4 / math.e), rel=1e-10)


# -- approximation report --------------------------------------------------------------


@pytest.fixture(scope="module")
def small_report():
    return approximation_report(ParetoModel(1, 2), Geometric(0.5), [10.0, 31.6, 100.0], step=0.05, x_max=120.0)


def test_report_bracket_and_orders(small_report):
    r = small_report
    assert np.all(r.exact_lo <= r.exact_hi)
    assert r.target == pytest.approx(4.0)
    np.testing.assert_allclose(r.x_grid, [10.0, 31.6, 100.0])
    # the second-order value sits closer to the exact tail than the first
    mid = r.exact
    assert np.all(np.abs(r.second_order - mid) < np.abs(r.first_order - mid))


def test_report_csv_and_json(small_report, tmp_path):
    small_report.to_csv(tmp_path / "r.csv")
    small_report.to_json(tmp_path / "r.json")
    with open(tmp_path / "r.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == REPORT_COLUMNS
    assert len(rows) == 4
    assert float(rows[1][1]) == small_report.exact_lo[0]
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["columns"] == list(REPORT_COLUMNS)
    assert data["target_residual_ratio"] == pytest.approx(4.0)
    assert len(data["rows"]) == 3
