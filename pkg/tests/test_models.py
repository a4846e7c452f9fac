import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy import integrate

from subexp2.models import (
    AtomModel,
    LognormalModel,
    ModelError,
    ParetoModel,
    PiecewiseParetoModel,
    WeibullModel,
    eval_local_mass,
    eval_mean,
    eval_tail,
    make_model,
)


# -- point values ---------------------------------------------------------------


def test_pareto_tail_capped_below_support():
    assert eval_tail(ParetoModel(1, 2), 0.5) == 1.0
    assert ParetoModel(4, 2).x0 == 2.0


def test_weibull_tail_value():
    assert eval_tail(WeibullModel(0.5), 4.0) == pytest.approx(math.exp(-2.0), rel=1e-15)


def test_piecewise_tail_picks_segment():
    # 4**1.5 = 8 <= 9 < 5**1.5, so the n = 4 formula applies
    assert eval_tail(PiecewiseParetoModel(1, 2, 1.5), 9.0) == pytest.approx(1.25 / 81, rel=1e-14)


def test_piecewise_below_first_segment():
    m = PiecewiseParetoModel(1, 2, 1.5)
    s0 = math.sqrt(1.5)
    assert m.s0 == pytest.approx(s0)
    assert m.tail(s0 * 0.999) == 1.0
    # n = 2 formula between s0 and 3**1.5
    assert m.tail(4.0) == pytest.approx(1.5 / 16)


def test_piecewise_rejects_non_monotone_start():
    with pytest.raises(ModelError):
        PiecewiseParetoModel(c=5.0, alpha=1.1, beta=1.5)


def test_pareto_local_mass_value():
    assert eval_local_mass(ParetoModel(1, 2), 100.0, 1.0) == pytest.approx(1e-4 - 1 / 10201, rel=1e-12)
    assert eval_local_mass(ParetoModel(1, 2), 100.0, 1.0) == pytest.approx(1.9704e-6, rel=1e-4)


@pytest.mark.parametrize("t", [0.0, -1.0])
def test_local_mass_rejects_empty_interval(t):
    with pytest.raises(ModelError):
        eval_local_mass(ParetoModel(), 1.0, t)


def test_negative_x_rejected():
    with pytest.raises(ModelError):
        eval_tail(WeibullModel(), -1.0)


def test_weibull_local_mass_against_asymptotic_form_at_100():
    # beta t x**(beta-1) exp(-x**beta) = 0.05 e^-10
    exact = eval_local_mass(WeibullModel(0.5), 100.0, 1.0)
    approx = 0.5 * 1.0 * 100.0 ** (-0.5) * math.exp(-10.0)
    assert approx == pytest.approx(2.270e-6, rel=1e-3)
    assert exact == pytest.approx(approx, rel=0.01)


def test_weibull_local_mass_asymptotic_tightens():
    m = WeibullModel(0.5)
    ratios = []
    for x in (1e2, 1e3, 1e4):
        approx = 0.5 * x**-0.5 * math.exp(-math.sqrt(x))
        ratios.append(m.local_mass(x, 1.0) / approx)
    assert abs(ratios[2] - 1) < 0.01
    assert abs(ratios[0] - 1) > abs(ratios[1] - 1) > abs(ratios[2] - 1)
    # evaluated at the interval midpoint the density form is already close at 100
    mid = 0.5 * 100.5**-0.5 * math.exp(-math.sqrt(100.5))
    assert m.local_mass(100.0, 1.0) == pytest.approx(mid, rel=1e-3)


def test_means_closed_form():
    assert eval_mean(ParetoModel(1, 2)) == pytest.approx(2.0)
    assert eval_mean(WeibullModel(0.5)) == pytest.approx(2.0)
    assert eval_mean(LognormalModel(0, 1)) == pytest.approx(math.exp(0.5))


def _tail_integral_pieces(model, edges):
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, _ = integrate.quad(lambda s: float(model.tail(s)), a, b, epsabs=0.0, epsrel=1e-12, limit=200)
        total += v
    return total


def test_mean_matches_tail_integral_pareto():
    m = ParetoModel(1, 2)
    num = _tail_integral_pieces(m, [0.0, 1.0, 1e3]) + 1e-3
    assert num == pytest.approx(m.mean, rel=1e-6)


def test_mean_matches_tail_integral_weibull_lognormal():
    for m, top in ((WeibullModel(0.5), 5e3), (LognormalModel(0, 1), 1e5)):
        edges = [0.0] + list(np.geomspace(1e-3, top, 40))
        assert _tail_integral_pieces(m, edges) == pytest.approx(m.mean, rel=1e-6)


def test_mean_matches_tail_integral_piecewise():
    m = PiecewiseParetoModel(1, 2, 1.5)
    n_top = 10_000
    edges = [0.0, m.s0] + [n**1.5 for n in range(3, n_top + 1)]
    head = _tail_integral_pieces(m, edges)
    # beyond n_top**1.5 the (1 + 1/n) factor is within 1e-4 of 1
    x = n_top**1.5
    rest = (1 + 1 / n_top) / x
    assert head + rest == pytest.approx(m.mean, rel=1e-6)


def test_pareto_local_mass_asymptotic():
    m = ParetoModel(1, 2)
    x = 1e4
    assert m.local_mass(x, 1.0) / (2 * x**-3) == pytest.approx(1.0, abs=1e-3)


def test_piecewise_local_mass_asymptotic_trend():
    m = PiecewiseParetoModel(1, 2, 1.5)
    devs = []
    for x in (1e4, 1e5, 1e6):
        # keep a segment boundary out of (x, x+1]
        assert m.segment(x) == m.segment(x + 1.0)
        devs.append(abs(m.local_mass(x, 1.0) / (2 * x**-3) - 1))
    assert devs[0] > devs[1] > devs[2]
    assert devs[2] < 1e-3


def test_lognormal_deep_tail_keeps_precision():
    m = LognormalModel(0, 1)
    # survival form: no underflow to 0 and no 1 - cdf cancellation
    assert m.tail(1e6) > 0
    assert m.local_mass(1e4, 1.0) > 0
    assert m.local_mass(1e4, 1.0) / m.tail(1e4) == pytest.approx(math.log(1e4) / 1e4, rel=0.15)


def test_sampling_inverse_values():
    assert ParetoModel(1, 2).sample(0.25) == pytest.approx(2.0)
    assert WeibullModel(0.5).sample(math.exp(-1)) == pytest.approx(1.0)


def test_piecewise_sample_inside_jump_returns_boundary():
    m = PiecewiseParetoModel(1, 2, 1.5)
    # tail jumps down at x = 8; any u between the two sides maps to 8
    left = m._end_tail(3.0)
    right = m.tail(8.0)
    u = 0.5 * (left + right)
    assert m.sample(u) == pytest.approx(8.0)


def test_atom_model():
    m = AtomModel(1.0)
    assert m.tail(0.5) == 1.0 and m.tail(1.0) == 0.0
    assert m.local_mass(0.5, 1.0) == 1.0
    assert m.local_mass(1.5, 1.0) == 0.0


def test_make_model_errors():
    with pytest.raises(ModelError, match="alpha"):
        make_model("pareto", c=1, alpha=0.5)
    with pytest.raises(ModelError):
        make_model("cauchy")
    with pytest.raises(ModelError):
        make_model("weibull", beta=1.5)
    with pytest.raises(ModelError):
        make_model("pareto", shape=2)


def test_models_are_immutable():
    m = ParetoModel()
    with pytest.raises(AttributeError):
        m.alpha = 3.0


# -- properties -----------------------------------------------------------------

def _safe(build):
    try:
        return build()
    except ModelError:
        return None


@st.composite
def valid_models(draw):
    m = draw(st.one_of(
        st.builds(lambda a, b: _safe(lambda: ParetoModel(a, b)), st.floats(0.1, 10), st.floats(1.05, 5)),
        st.builds(lambda a, b: _safe(lambda: LognormalModel(a, b)), st.floats(-2, 2), st.floats(0.2, 2.5)),
        st.builds(lambda b: _safe(lambda: WeibullModel(b)), st.floats(0.1, 0.95)),
        st.builds(
            lambda a, b, c: _safe(lambda: PiecewiseParetoModel(a, b, c)),
            st.floats(0.2, 1.5),
            st.floats(1.5, 4),
            st.floats(1.1, 1.9),
        ),
    ))
    assume(m is not None)
    return m


@given(valid_models(), st.lists(st.floats(0, 1e4), min_size=2, max_size=50))
def test_tail_nonincreasing(model, xs):
    xs = np.sort(np.array(xs))
    tails = model.tail(xs)
    assert np.all(np.diff(tails) <= 0)
    assert np.all((tails >= 0) & (tails <= 1))
    assert model.tail(0.0) == 1.0


@given(valid_models(), st.floats(0, 1e3), st.floats(1e-3, 10))
def test_local_mass_consistency(model, x, t):
    lm = model.local_mass(x, t)
    fx = model.tail(x)
    assert 0 <= lm <= fx
    assert lm + model.tail(x + t) == pytest.approx(fx, rel=1e-12, abs=1e-300)


@given(valid_models(), st.floats(1e-12, 1 - 1e-12, exclude_min=True, exclude_max=True))
def test_sample_is_generalized_inverse(model, u):
    x = model.sample(u)
    assert model.tail(x) <= u * (1 + 1e-9)
    # just below x the tail is at least u
    below = x * (1 - 1e-9)
    if below > 0:
        assert model.tail(below) >= u * (1 - 1e-9)


@given(valid_models(), st.floats(1.0, 1e5), st.floats(0.1, 5))
def test_local_rel_matches_ratio(model, x, t):
    fx = model.tail(x)
    assume(fx > 1e-250)
    assert model.local_rel(x, t) == pytest.approx(model.local_mass(x, t) / fx, rel=1e-9, abs=1e-300)
