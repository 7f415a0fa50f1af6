import math

import numpy as np
import pytest

from orderstat import marginals as mg
from orderstat import verify as vf
from orderstat.errors import ConfigError
from orderstat.models import (
    FullyCorrelatedGaussian,
    GaussianCovariance,
    IndependentProduct,
    SignSharedGaussian,
    UniformCube,
)
from orderstat.reports import FAIL, HYPOTHESIS_NOT_MET, INFORMATIONAL, PASS

COUNT = 5000
SEED = 7


def test_c_alpha():
    assert vf.c_alpha(1.0) == pytest.approx(1 / 972, rel=1e-15)
    assert vf.c_alpha(0.0) == pytest.approx(1 / 180)


def test_calibration_file():
    cal = vf.Calibration.load()
    assert isinstance(cal.meta["sweep_seed"], int)
    assert set(vf.CALIBRATED_IDS) <= set(cal.windows)
    for lo, hi in cal.windows.values():
        assert 0 < lo < hi


def test_lemma_grid_passes_where_applicable():
    reps = vf.lemma_grid()
    assert {r.verdict for r in reps} <= {PASS, HYPOTHESIS_NOT_MET}
    for r in reps:
        if r.theorem_id == "lemma62_dilation":
            assert r.lhs >= -1e-12
        if r.theorem_id == "lemma63_smallball":
            assert r.details["points"] > 0


class ThreePoint(mg.Marginal):
    """0 with probability 1/2, +-1 with probability 1/4 each: not log-concave."""

    family = "three_point"
    symmetric = True
    centered = True

    def survival_abs(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= 0, 1.0, np.where(t <= 1.0, 0.5, 0.0))

    def truncated_abs_mean(self, t):
        return np.where(np.asarray(t, dtype=float) <= 1.0, 0.5, 0.0)

    def survival_signed(self, t):
        return 0.25 if t > 0 else (0.75 if t == 0 else 1.0)

    def mean(self):
        return 0.0

    def variance(self):
        return 0.5

    def moment_p(self, p):
        return 0.5 ** (1 / p)

    def params(self):
        return {}


def test_lemma_grid_detects_violation():
    reps = {r.theorem_id: r for r in vf.lemma_reports(ThreePoint())}
    assert reps["grunbaum"].verdict == FAIL
    assert reps["lemma62_dilation"].verdict == FAIL


def test_prop_upper_and_negcorr():
    iid = IndependentProduct.iid(mg.Laplace(1.0), 64)
    rep = vf.check_prop_upper(iid, 8, COUNT, SEED)
    assert rep.verdict == PASS and rep.lhs <= rep.rhs
    rep = vf.check_thm_negcorr(iid, 8, 1.0, COUNT, SEED)
    assert rep.verdict == PASS
    assert rep.ratio >= 10
    assert rep.details["alpha_source"] == "analytic"
    rep = vf.check_thm_negcorr(FullyCorrelatedGaussian(64), 8, 1.0, COUNT, SEED)
    assert rep.verdict == HYPOTHESIS_NOT_MET
    assert rep.details["alpha_hat"] > 1


def test_logconcave_gating():
    rep = vf.check_thm_logconcave(SignSharedGaussian(256), 16, COUNT, SEED)
    assert rep.verdict == HYPOTHESIS_NOT_MET
    assert math.isfinite(rep.ratio)
    rep = vf.check_thm_logconcave(UniformCube(64), 4, COUNT, SEED)
    assert rep.verdict == PASS
    empty = vf.Calibration()
    rep = vf.check_thm_logconcave(UniformCube(64), 4, COUNT, SEED, calibration=empty)
    assert rep.verdict == INFORMATIONAL


def test_kmax_chain_and_tail():
    for model in (GaussianCovariance.ar1(64, 0.5), UniformCube(64)):
        chain, ratio = vf.check_thm_kmax(model, 4, COUNT, SEED)
        assert chain.verdict == PASS
        assert ratio.verdict in (PASS, HYPOTHESIS_NOT_MET)
    rep = vf.check_lemma_tailkmin(UniformCube(64), 4, COUNT, SEED)
    assert rep.verdict == PASS
    tail, mean = vf.check_thm_revkmax(IndependentProduct.iid(mg.Gaussian(1.0), 64), 4, COUNT, SEED)
    assert tail.verdict == PASS and mean.verdict == PASS
    assert mean.details["level"] == pytest.approx(4 - 0.5 * 4 ** (5 / 6))


def test_isotropic_corollary():
    reps = vf.check_cor_isotropic(UniformCube(64), [1, 8, 32], COUNT, SEED)
    assert {r.verdict for r in reps} == {PASS}
    reps = vf.check_cor_isotropic(SignSharedGaussian(64), [1], COUNT, SEED)
    assert {r.verdict for r in reps} == {HYPOTHESIS_NOT_MET}


def test_weak_strong():
    rep = vf.check_weak_strong(IndependentProduct.iid(mg.Gaussian(1.0), 32), [1.0] * 16 + [0.5] * 16,
                               (2.0, 4.0), 20_000, SEED)
    assert rep.verdict == PASS
    assert rep.details["beta"] > 1
    assert set(rep.details["per_p"]) == {"2.0", "4.0"}


def test_weak_strong_refuses_noisy_moments():
    rep = vf.check_weak_strong(IndependentProduct.iid(mg.Laplace(1.0), 2), None, (30.0,), 1000, SEED)
    assert rep.details["refused"] == [30.0]
    assert rep.verdict == INFORMATIONAL


def test_ratio_stability_iid_symmetric():
    models = [m for m in vf.default_models() if isinstance(m, IndependentProduct)]
    reps = vf.run_suite(vf.Grid(models), ["thm13"], COUNT, SEED)
    ratios = [r.ratio for r in reps]
    assert max(ratios) / min(ratios) < 4


def test_run_suite_order_and_errors():
    grid = vf.grid_from_config({"models": [{"kind": "uniform_cube", "n": 16, "k": [1, 4]},
                                           {"kind": "example2", "n": 16}]})
    a = vf.run_suite(grid, ["prop11", "thm14"], 2000, SEED)
    b = vf.run_suite(grid, ["thm14", "prop11"], 2000, SEED)
    assert [r.row() for r in a] == [r.row() for r in b]
    assert not vf.suite_failed(a)
    with pytest.raises(ConfigError):
        vf.run_suite(grid, ["thm99"], 2000, SEED)
    with pytest.raises(ConfigError):
        vf.load_grid("/nonexistent/grid.json")


def test_identity_suite():
    reps = vf.identity_suite(count=3000, seed=SEED)
    assert len(reps) == 11
    assert {r.verdict for r in reps} == {PASS}


def test_counterexample_trend_small():
    reps = vf.counterexample_trend(k=4, exponents=(4, 8), count=5000, seed=SEED)
    assert reps[0].verdict == INFORMATIONAL
    assert reps[1].ratio < reps[0].ratio
