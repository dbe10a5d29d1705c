import math
from types import SimpleNamespace

import numpy as np
import pytest

from alignor.fitkit import (
    COMPOSITE_PARAM_NAMES,
    RAISED_COS_10_90,
    CompositeContourModel,
    DegenerateFitError,
    _arctan_fn,
    _arctan_jac,
    _composite_fn,
    _composite_jac,
    _lorentz_fn,
    _lorentz_jac,
    composite_eval,
    extract_transition,
    fit_record,
    fit_trend,
    levenberg_marquardt,
)

RNG = np.random.default_rng(7)


def make_record(model, bx=None, noise=0.0, seed=0):
    if bx is None:
        bx = np.linspace(-12.0, 12.0, 241)
    rng = np.random.default_rng(seed)
    s_up = composite_eval(model, bx, "up") + noise * rng.standard_normal(bx.size)
    s_dn = composite_eval(model, bx, "down") + noise * rng.standard_normal(bx.size)
    t = np.arange(bx.size) / 100.0
    return SimpleNamespace(bx_up=bx, s_up=s_up, t_up=t,
                           bx_down=bx[::-1], s_down=s_dn[::-1], t_down=t)


class TestCompositeEval:
    def test_symmetric_peak_value(self):
        m = CompositeContourModel(a_anti=0.0, w_anti=1.0, a_sym=1.0, w_sym=2.0,
                                  center=0.3)
        assert composite_eval(m, 0.3, "up") == pytest.approx(1.0)

    def test_antisymmetric_zero_at_center_and_extremum(self):
        m = CompositeContourModel(a_anti=1.0, w_anti=2.0, a_sym=0.0, w_sym=1.0)
        assert composite_eval(m, 0.0, "up") == pytest.approx(0.0)
        bx = np.linspace(-20, 20, 200001)
        vals = composite_eval(m, bx, "up")
        assert np.max(np.abs(vals)) == pytest.approx(3 * math.sqrt(3) / 16, abs=1e-6)
        assert bx[np.argmax(vals)] == pytest.approx(2.0 / math.sqrt(3), abs=1e-3)

    def test_branch_difference_is_twice_symmetric(self):
        m = CompositeContourModel(a_anti=0.7, w_anti=1.5, a_sym=0.4, w_sym=2.0,
                                  offset=0.2)
        bx = np.linspace(-8, 8, 101)
        diff = composite_eval(m, bx, "up") - composite_eval(m, bx, "down")
        v = bx / m.w_sym
        assert diff == pytest.approx(2 * 0.4 / (1 + v**2) ** 2)

    def test_parity_branch_sign_flips_only_symmetric_part(self):
        m = CompositeContourModel(a_anti=0.7, w_anti=1.5, a_sym=0.4, w_sym=2.0)
        bx = np.linspace(-8, 8, 101)
        up = composite_eval(m, bx, "up")
        dn = composite_eval(m, bx, "down")
        anti = bx / m.w_anti / (1 + (bx / m.w_anti) ** 2) ** 2 * m.a_anti
        assert up + dn == pytest.approx(2 * anti, abs=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            CompositeContourModel(1, 0.0, 1, 1)
        with pytest.raises(ValueError):
            CompositeContourModel(1, 1, 1, 1, hysteresis_h=-0.5)
        m = CompositeContourModel(1, 1, 1, 1)
        with pytest.raises(ValueError):
            composite_eval(m, 0.0, "sideways")


class TestJacobians:
    def check(self, fn, jac, x, p, extra=()):
        j = jac(x, p, *extra)
        eps = 1e-6
        for k in range(len(p)):
            dp = np.zeros(len(p))
            dp[k] = eps * max(abs(p[k]), 1.0)
            fd = (fn(x, p + dp, *extra) - fn(x, p - dp, *extra)) / (2 * dp[k])
            scale = max(np.max(np.abs(fd)), 1e-6)
            assert np.max(np.abs(j[:, k] - fd)) / scale < 1e-5

    def test_composite_jacobian_matches_fd(self):
        bx = np.linspace(-10, 10, 37)
        sigma = np.where(np.arange(37) % 2 == 0, 1.0, -1.0)
        for _ in range(100):
            p = np.array([RNG.uniform(-2, 2), RNG.uniform(0.5, 4),
                          RNG.uniform(-2, 2), RNG.uniform(0.5, 4),
                          RNG.uniform(-2, 2), RNG.uniform(0, 3),
                          RNG.uniform(-1, 1)])
            self.check(_composite_fn, _composite_jac, (bx, sigma), p, ((1.0, -1.0),))

    def test_arctan_jacobian_matches_fd(self):
        x = np.linspace(-5, 5, 23)
        for _ in range(100):
            p = np.array([RNG.uniform(-3, 3), RNG.uniform(0.3, 4), RNG.uniform(-2, 2)])
            self.check(_arctan_fn, _arctan_jac, x, p)

    def test_lorentz_jacobian_matches_fd(self):
        x = np.linspace(-5, 5, 23)
        for _ in range(100):
            p = np.array([RNG.uniform(-3, 3), RNG.uniform(0.3, 4), RNG.uniform(-2, 2)])
            self.check(_lorentz_fn, _lorentz_jac, x, p)


class TestLevenbergMarquardt:
    TRUE = CompositeContourModel(a_anti=0.12, w_anti=3.0, a_sym=0.15, w_sym=2.2,
                                 center=0.4, hysteresis_h=1.6, offset=0.03)

    def joint_data(self, noise=0.0, seed=0):
        bx = np.linspace(-12, 12, 961)
        rng = np.random.default_rng(seed)
        up = composite_eval(self.TRUE, bx, "up")
        dn = composite_eval(self.TRUE, bx, "down")
        x = (np.concatenate([bx, bx]),
             np.concatenate([np.ones(bx.size), -np.ones(bx.size)]))
        y = np.concatenate([up, dn]) + noise * rng.standard_normal(2 * bx.size)
        return x, y

    def test_noiseless_recovery(self):
        x, y = self.joint_data()
        p_true = self.TRUE.free_params()
        init = p_true * (1 + 0.2 * np.array([1, -1, 1, -1, 1, 1, -1]))
        res = levenberg_marquardt(lambda x, p: _composite_fn(x, p, (1.0, -1.0)),
                                  lambda x, p: _composite_jac(x, p, (1.0, -1.0)),
                                  x, y, init, param_names=COMPOSITE_PARAM_NAMES)
        assert res.converged
        assert np.max(np.abs(res.params - p_true) / np.maximum(np.abs(p_true), 1e-3)) < 1e-6

    def test_monte_carlo_snr100(self):
        p_true = self.TRUE.free_params()
        amp = self.TRUE.a_sym
        errs = []
        for seed in range(50):
            x, y = self.joint_data(noise=amp / 100.0, seed=seed)
            init = p_true * (1 + 0.1 * np.array([1, -1, 1, -1, 0.5, 1, -1]))
            res = levenberg_marquardt(
                lambda x, p: _composite_fn(x, p, (1.0, -1.0)),
                lambda x, p: _composite_jac(x, p, (1.0, -1.0)),
                x, y, init, param_names=COMPOSITE_PARAM_NAMES)
            errs.append(res.params - p_true)
        rms = np.sqrt(np.mean(np.square(errs), axis=0))
        # amplitudes and widths within 1% RMS, hysteresis within 2%
        for k in (0, 1, 2, 3):
            assert rms[k] / abs(p_true[k]) < 0.01
        assert rms[5] / p_true[5] < 0.02

    def test_cost_monotone_on_accepted_steps(self):
        x, y = self.joint_data(noise=0.003, seed=3)
        init = self.TRUE.free_params() * 1.15
        res = levenberg_marquardt(lambda x, p: _composite_fn(x, p, (1.0, -1.0)),
                                  lambda x, p: _composite_jac(x, p, (1.0, -1.0)),
                                  x, y, init)
        hist = res.cost_history
        assert all(b < a for a, b in zip(hist, hist[1:]))

    def test_covariance_symmetric_psd(self):
        x, y = self.joint_data(noise=0.002, seed=5)
        res = levenberg_marquardt(lambda x, p: _composite_fn(x, p, (1.0, -1.0)),
                                  lambda x, p: _composite_jac(x, p, (1.0, -1.0)),
                                  x, y, self.TRUE.free_params() * 1.1)
        c = res.covariance
        assert np.max(np.abs(c - c.T)) < 1e-10
        assert np.linalg.eigvalsh(c).min() >= -1e-12 * np.trace(c)

    def test_idempotence(self):
        x, y = self.joint_data(noise=0.002, seed=6)
        res = levenberg_marquardt(lambda x, p: _composite_fn(x, p, (1.0, -1.0)),
                                  lambda x, p: _composite_jac(x, p, (1.0, -1.0)),
                                  x, y, self.TRUE.free_params() * 1.1)
        res2 = levenberg_marquardt(lambda x, p: _composite_fn(x, p, (1.0, -1.0)),
                                   lambda x, p: _composite_jac(x, p, (1.0, -1.0)),
                                   x, y, res.params)
        assert np.max(np.abs(res2.params - res.params)) < 1e-10

    def test_linear_model_one_iteration(self):
        x = np.linspace(0, 10, 20)
        y = 2.0 * x + 1.0

        def fn(x, p):
            return p[0] * x + p[1]

        def jc(x, p):
            return np.column_stack([x, np.ones_like(x)])

        res = levenberg_marquardt(fn, jc, x, y, [0.0, 0.0])
        assert res.params == pytest.approx([2.0, 1.0], abs=1e-8)
        assert res.converged
        # damping makes the first step 99.9% of the exact Gauss-Newton one;
        # a handful of polish steps reach machine precision
        assert res.iterations <= 8

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            levenberg_marquardt(_lorentz_fn, _lorentz_jac,
                                np.array([1.0, 2.0]), np.array([1.0, 2.0]),
                                [1.0, 1.0, 0.0])

    def test_nonfinite_data(self):
        x = np.linspace(-3, 3, 20)
        y = _lorentz_fn(x, [1.0, 1.0, 0.0])
        y[3] = np.nan
        with pytest.raises(ValueError):
            levenberg_marquardt(_lorentz_fn, _lorentz_jac, x, y, [1.0, 1.0, 0.0])


class TestFitRecord:
    TRUE = CompositeContourModel(a_anti=0.1, w_anti=3.2, a_sym=0.15, w_sym=2.5,
                                 center=0.2, hysteresis_h=1.8, offset=6.0)

    def test_recovers_generator_parameters(self):
        rec = make_record(self.TRUE, noise=0.0005, seed=1)
        res = fit_record(rec)
        assert res.converged
        assert res.model.hysteresis_h == pytest.approx(1.8, rel=0.05)
        assert res.model.w_sym == pytest.approx(2.5, rel=0.05)
        assert res.model.a_anti == pytest.approx(0.1, rel=0.05)

    def test_no_antisymmetric_part_consistent_with_zero(self):
        m = CompositeContourModel(a_anti=0.0, w_anti=3.0, a_sym=0.15, w_sym=2.5,
                                  hysteresis_h=0.0, offset=6.0)
        rec = make_record(m, noise=0.0005, seed=2)
        res = fit_record(rec)
        i = res.param_names.index("a_anti")
        sigma = math.sqrt(max(res.covariance[i, i], 0.0))
        assert abs(res.params[i]) < 2 * sigma + 1e-3

    def test_no_symmetric_part_flags_unidentifiable_width(self):
        m = CompositeContourModel(a_anti=0.1, w_anti=3.0, a_sym=0.0, w_sym=2.5,
                                  hysteresis_h=0.0, offset=6.0)
        rec = make_record(m, noise=0.0, seed=3)
        res = fit_record(rec, init=np.array([0.1, 3.0, 0.0, 2.5, 0.0, 0.0, 6.0]))
        assert "w_sym" in res.unidentifiable

    def test_single_branch_fixes_hysteresis(self):
        rec = make_record(self.TRUE, noise=0.0005, seed=4)
        one = SimpleNamespace(bx_up=rec.bx_up, s_up=rec.s_up, t_up=rec.t_up,
                              bx_down=None, s_down=None, t_down=None)
        res = fit_record(one)
        assert res.model.hysteresis_h == 0.0
        assert any("single branch" in w for w in res.warnings)


class TestExtractTransition:
    def latch_record(self, tau_flip=0.05, b_flip=1.0, rate=2.0, fs=2000.0):
        # bx ramps up through +b_flip and down through -b_flip; the signal
        # steps between levels following a raised cosine in time.
        t = np.arange(0.0, 2.0, 1.0 / fs)
        bx_up = -2.0 + rate * t
        bx_dn = 2.0 - rate * t

        def ramp(bx, t, b0, lo, hi):
            i0 = np.searchsorted(bx, b0) if bx[0] < bx[-1] else bx.size - np.searchsorted(bx[::-1], b0)
            t0 = t[min(i0, t.size - 1)]
            phase = np.clip((t - t0) / tau_flip, 0.0, math.pi)
            return lo + (hi - lo) * 0.5 * (1 - np.cos(phase))

        s_up = ramp(bx_up, t, +b_flip, -0.1, 0.1)
        s_dn = ramp(bx_dn, t, -b_flip, 0.1, -0.1)
        return SimpleNamespace(bx_up=bx_up, s_up=s_up, t_up=t,
                               bx_down=bx_dn, s_down=s_dn, t_down=t)

    def test_raised_cosine_duration(self):
        tau = 0.05
        rec = self.latch_record(tau_flip=tau)
        res = extract_transition(rec)
        assert not res.monostable
        assert res.dt == pytest.approx(RAISED_COS_10_90 * math.pi * tau, rel=0.1)

    def test_transition_fields_and_hysteresis(self):
        # max slope sits mid-flip: b_flip plus rate * pi * tau / 2 of ramp travel
        tau, rate = 0.05, 2.0
        rec = self.latch_record(tau_flip=tau, b_flip=1.0, rate=rate)
        res = extract_transition(rec)
        mid = 1.0 + rate * math.pi * tau / 2.0
        assert res.bx_up == pytest.approx(mid, abs=0.05)
        assert res.bx_down == pytest.approx(-mid, abs=0.05)
        assert res.hysteresis == pytest.approx(2 * mid, abs=0.1)

    def test_monostable_record(self):
        bx = np.linspace(-5, 5, 500)
        t = np.arange(bx.size) / 100.0
        rng = np.random.default_rng(0)
        s = 0.02 * bx + 0.001 * rng.standard_normal(bx.size)
        rec = SimpleNamespace(bx_up=bx, s_up=s, t_up=t,
                              bx_down=bx[::-1], s_down=s[::-1], t_down=t)
        res = extract_transition(rec)
        assert res.monostable
        assert math.isnan(res.bx_up)


class TestFitTrend:
    def test_exact_line(self):
        x = np.linspace(-3, 7, 15)
        res = fit_trend(x, 2.0 * x + 1.0, "linear")
        assert res.params == pytest.approx([2.0, 1.0], abs=1e-10)
        assert res.residual_rms < 1e-12

    def test_broadening_budget_slope(self):
        from alignor.estimators import BroadeningBudget, broadening_rate, circular_power

        b = BroadeningBudget()
        chi = np.linspace(0.05, 1.0, 12)
        width = np.array([10.0 + (b.k_lb + b.k_serf * b.k_ls) * circular_power(b.p_in, c)
                          for c in chi])
        res = fit_trend(chi, width, "linear")
        assert abs(res.params[0] - broadening_rate(b)) / broadening_rate(b) < 0.03
        assert abs(res.params[0] - 4.0) / 4.0 < 0.03

    def test_hyperbola(self):
        x = np.linspace(0.2, 5.0, 30)
        y = 1.5 + 0.8 / x
        res = fit_trend(x, y, "hyperbola")
        assert res.params == pytest.approx([1.5, 0.8], abs=1e-10)
        with pytest.raises(ValueError):
            fit_trend(np.array([0.0, 1.0, 2.0]), np.zeros(3), "hyperbola")

    def test_hyperbola_matches_inverse_field_hysteresis(self):
        # H = 2 Gamma my0 / (gamma m0) with m0 ~ x: pure b/x trend
        x = np.linspace(0.1, 1.0, 25)
        y = 0.3 / x
        rng = np.random.default_rng(1)
        y_noisy = y + 0.002 * rng.standard_normal(x.size)
        res = fit_trend(x, y_noisy, "hyperbola")
        resid = y_noisy - (res.params[0] + res.params[1] / x)
        assert np.sqrt(np.mean(resid**2)) < 0.05 * (y.max() - y.min())

    def test_arctan(self):
        x = np.linspace(-6, 6, 60)
        y = 1.2 * np.arctan(x / 0.8) - 0.3
        res = fit_trend(x, y, "arctan")
        assert res.converged
        assert res.params == pytest.approx([1.2, 0.8, -0.3], rel=1e-6)

    def test_lorentzian(self):
        x = np.linspace(-30, 30, 80)
        y = 2.0 / (1 + (x / 8.0) ** 2) + 0.5
        res = fit_trend(x, y, "lorentzian")
        assert res.converged
        assert res.params == pytest.approx([2.0, 8.0, 0.5], rel=1e-6)

    def test_polynomial(self):
        x = np.linspace(-2, 2, 25)
        y = 0.5 - x + 0.25 * x**3
        res = fit_trend(x, y, "polynomial", degree=3)
        assert res.params == pytest.approx([0.5, -1.0, 0.0, 0.25], abs=1e-9)
        with pytest.raises(ValueError):
            fit_trend(x[:2], y[:2], "polynomial", degree=3)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            fit_trend(np.arange(5.0), np.arange(5.0), "spline")
