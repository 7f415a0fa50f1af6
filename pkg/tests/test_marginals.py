import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from orderstat import marginals as mg
from orderstat.errors import DomainError

from conftest import FAMILIES

# scipy.stats laws used as independent oracles for the closed forms
ORACLES = [
    (mg.Gaussian(1.7), stats.norm(scale=1.7)),
    (mg.Laplace(0.8), stats.laplace(scale=0.8)),
    (mg.Uniform(2.0), stats.uniform(loc=-2.0, scale=4.0)),
    (mg.HalfNormalModulus(1.3), stats.halfnorm(scale=1.3)),
    (mg.ShiftedExponential(2.0, True), stats.expon(loc=-0.5, scale=0.5)),
    (mg.ShiftedExponential(2.0, False), stats.expon(scale=0.5)),
]


@pytest.mark.parametrize("m,law", ORACLES, ids=lambda x: getattr(x, "label", lambda: "")())
def test_closed_forms_match_scipy(m, law):
    for t in [0.0, 0.1, 0.5, 1.0, 1.9, 3.0]:
        surv = 1.0 if t == 0 else law.sf(t) + law.cdf(-t)
        assert m.survival_abs(t) == pytest.approx(surv, abs=1e-12)
        trunc = law.expect(abs, lb=t, epsabs=1e-13) + law.expect(abs, ub=-t, epsabs=1e-13)
        assert m.truncated_abs_mean(t) == pytest.approx(trunc, abs=1e-9)
        assert m.survival_signed(t) == pytest.approx(law.sf(t), abs=1e-12)
    assert m.mean() == pytest.approx(law.mean(), abs=1e-12)
    assert m.variance() == pytest.approx(law.var(), rel=1e-12)
    for p in (1.0, 2.0, 3.5):
        oracle = law.expect(lambda x: abs(x) ** p, epsrel=1e-12) ** (1 / p)
        assert m.moment_p(p) == pytest.approx(oracle, rel=1e-8)


def test_closed_forms_agree_with_quadrature(family):
    for t in np.linspace(0.0, 4 * family.scale, 9):
        assert family.truncated_abs_mean(t) == pytest.approx(family.quad_truncated_abs_mean(t), abs=1e-10)
    assert family.moment_p(3.0) == pytest.approx(family.quad_abs_moment(3.0) ** (1 / 3), rel=1e-9)


def test_monotone_on_grid(family):
    ts = np.linspace(0, 5 * family.scale, 100)
    surv = family.survival_abs(ts)
    trunc = family.truncated_abs_mean(ts)
    assert np.all(np.diff(surv) <= 1e-15)
    assert np.all(np.diff(trunc) <= 1e-15)


def test_truncated_mean_at_zero_is_abs_mean(family):
    assert abs(mg.truncated_abs_mean(family, 0.0) - mg.abs_mean(family)) <= 1e-10


def test_centered_families_have_mean_zero():
    for m in FAMILIES:
        if m.centered:
            assert abs(m.mean()) < 1e-14
            assert abs(m.quad_mean()) < 1e-10


def test_grunbaum_equality_for_centered_exponential():
    m = mg.ShiftedExponential(1.0, True)
    assert m.survival_signed(0.0) == pytest.approx(1 / math.e, abs=1e-15)


def test_moment_growth_constant():
    for m in FAMILIES:
        c1 = mg.moment_growth_constant(m)
        assert math.isfinite(c1)
        assert c1 <= mg.MOMENT_GROWTH_C1 + 1e-12


def test_sampling_matches_law(family):
    rng = np.random.default_rng(3)
    x = family.sample(rng, 100_000)
    for t in (0.5 * family.scale, family.scale, 2 * family.scale):
        p = family.survival_abs(t)
        assert np.mean(np.abs(x) >= t) == pytest.approx(p, abs=5 * math.sqrt(p * (1 - p) / x.size) + 1e-12)


def test_scaled_collapses_and_rescales():
    assert mg.scaled(mg.Gaussian(1.0), -2.0) == mg.Gaussian(2.0)
    assert mg.scaled(mg.Laplace(1.0), 0.5) == mg.Laplace(0.5)
    pe = mg.scaled(mg.ShiftedExponential(1.0), -2.0)
    assert pe.survival_abs(1.0) == pytest.approx(mg.ShiftedExponential(1.0).survival_abs(0.5))
    zero = mg.scaled(mg.Gaussian(1.0), 0.0)
    assert zero.degenerate and zero.survival_abs(0.1) == 0.0


@given(st.floats(0.05, 20.0), st.floats(0.0, 10.0))
def test_scaling_law_of_tails(w, t):
    base = mg.Laplace(1.0)
    m = mg.PointScaledCopy(base, w)
    assert m.survival_abs(w * t) == pytest.approx(base.survival_abs(t), abs=1e-14)
    assert m.truncated_abs_mean(w * t) == pytest.approx(w * base.truncated_abs_mean(t), rel=1e-12, abs=1e-300)


def test_config_round_trip():
    for m in FAMILIES:
        assert mg.marginal_from_config(m.to_config()) == m
    assert mg.marginal_from_config({"family": "normal", "params": {"sigma": 2}}) == mg.Gaussian(2.0)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        mg.Gaussian(-1.0)
    with pytest.raises(DomainError):
        mg.Gaussian(1.0).survival_abs(-0.5)
    with pytest.raises(ValueError):
        mg.marginal_from_config({"family": "cauchy", "params": {}})
