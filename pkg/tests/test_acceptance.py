"""End-to-end acceptance suite.

One test per numbered criterion; each prints a single ``criterion N: PASS``
/ ``FAIL`` line (visible with ``pytest -s`` and in failure reports) and
enforces its runtime budget.
"""

import math
import time
from types import SimpleNamespace

import numpy as np
import pytest

from alignor import (
    BroadeningBudget,
    CompositeContourModel,
    CouplingParams,
    DipoleConfig,
    EnsembleParams,
    NormalizedField,
    ScanConfig,
    SignalMix,
    StudyConfig,
    SweepProtocol,
    alignment_signal_closed_form,
    alignment_signal_shape,
    alignment_steady_state_grid,
    broadening_rate,
    build_spin2_generators,
    composite_eval,
    cs_number_density,
    dipole_field,
    effective_params,
    ensemble_volume,
    fit_record,
    fit_trend,
    lockin_demodulate,
    measure_point,
    predict_flip_field,
    run_study,
    run_sweep,
    synthesize_record,
)
from alignor.spincore import ALIGNMENT_SIGNAL_CALIBRATION
from alignor.study import DEFAULT_GRIDS, StudyPreset
from alignor.fitkit import (
    _arctan_fn,
    _arctan_jac,
    _composite_fn,
    _composite_jac,
    _lorentz_fn,
    _lorentz_jac,
)

GEN = build_spin2_generators()


def _verdict(n, ok, detail):
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {n}: {detail}"


def test_criterion_01_steady_state_matches_closed_form_oracle():
    start = time.monotonic()
    p = EnsembleParams(relax_rate=40.0, a0=0.7)
    ax = np.linspace(-3.0, 3.0, 21)
    bx, by, bz = np.meshgrid(ax, ax, ax, indexing="ij")
    f = p.width_nt  # nT per unit of normalized field
    obs = alignment_steady_state_grid(bx * f, by * f, bz * f, p, GEN)[..., 4]
    closed = np.array([
        alignment_signal_closed_form(NormalizedField(x, y, z))
        for x, y, z in zip(bx.ravel(), by.ravel(), bz.ravel())
    ]).reshape(bx.shape)
    mask = np.abs(closed) > 1e-12
    # one scalar calibration between model and oracle normalizations
    cal = float(np.sum(obs[mask] * closed[mask]) / np.sum(closed[mask] ** 2))
    rel = np.abs(cal * closed[mask] - obs[mask]) / np.abs(obs[mask])
    elapsed = time.monotonic() - start
    _verdict(1, rel.max() < 1e-6 and elapsed < 5.0,
             f"max rel err {rel.max():.2e} over 21^3 grid, {elapsed:.2f}s")


def _demod_derivative_error(mod_amplitude):
    ramp = SweepProtocol(bx_start=-8.0, bx_end=8.0, rate=0.2,
                         direction_pattern="up", static_by=0.6)
    cfg = ScanConfig(ramp=ramp, mod_amplitude=mod_amplitude, sample_rate=1000.0)
    p = EnsembleParams(gamma_over_2pi=3.5, relax_rate=60.0, m0=0.0)
    rec = synthesize_record(cfg, p, CouplingParams(kappa=0.0, my0=0.0),
                            SignalMix(c_al=1.0, c_or=0.0))
    dem = lockin_demodulate(rec)
    f = p.gamma_rad / p.relax_rate

    def curve(bx):
        return alignment_signal_shape(bx * f, 0.6 * f, 0.0) \
            / ALIGNMENT_SIGNAL_CALIBRATION

    h = 1e-4
    deriv = (curve(dem.bx_up + h) - curve(dem.bx_up - h)) / (2 * h)
    expected = mod_amplitude / 2.0 * deriv
    mid = slice(dem.bx_up.size // 8, -dem.bx_up.size // 8)
    return float(np.max(np.abs(dem.s_up[mid] - expected[mid]))
                 / np.max(np.abs(expected)))


def test_criterion_02_lockin_equals_half_amplitude_times_derivative():
    start = time.monotonic()
    width = 60.0 / (2.0 * math.pi * 3.5)  # resonance width, nT
    errs = [_demod_derivative_error(frac * width) for frac in (0.3, 0.2, 0.1)]
    elapsed = time.monotonic() - start
    ok = errs[-1] < 0.02 and errs[0] > errs[1] > errs[2] and elapsed < 30.0
    _verdict(2, ok, f"errors at (0.3,0.2,0.1)*width: "
                    f"{errs[0]:.4f} > {errs[1]:.4f} > {errs[2]:.4f}, "
                    f"{elapsed:.1f}s")


def test_criterion_03_broadening_budget():
    rate = broadening_rate(BroadeningBudget(p_in=2.0, k_lb=30.0, k_serf=0.3,
                                            k_ls=90.0))
    _verdict(3, abs(rate - 4.0) <= 0.1, f"{rate:.3f} nT/deg vs 4.0 +/- 0.1")


def test_criterion_04_dipole_field_and_ensemble_volume():
    b = dipole_field(DipoleConfig(n_atoms=5e11, distance_mm=1.0))
    volume, side = ensemble_volume(5e11, 2e14)
    ok = 0.85 <= b <= 1.0 and abs(volume - 2.5) <= 0.05 \
        and abs(side - 1.36) <= 0.03
    _verdict(4, ok, f"dipole {b:.3f} nT, volume {volume:.3f} mm^3, "
                    f"side {side:.3f} mm")


def test_criterion_05_vapor_density_anchors():
    n145 = cs_number_density(145.0)
    n150 = cs_number_density(150.0)
    ok = abs(n145 / 1.8e14 - 1.0) <= 0.15 and abs(n150 / 2.2e14 - 1.0) <= 0.15
    _verdict(5, ok, f"145C: {n145:.3g} cm^-3, 150C: {n150:.3g} cm^-3")


def test_criterion_06_hysteresis_mechanics():
    start = time.monotonic()
    p = EnsembleParams(gamma_over_2pi=3.5, relax_rate=8.0 * 2 * math.pi * 3.5)
    my0 = 0.15 * math.sin(math.radians(0.6))  # threshold below every m0_eff
    c = CouplingParams(kappa=100.0, my0=my0)
    chis = np.array([0.3, 0.45, 0.6, 0.8, 1.0])
    sym_ok, pred_ok, hvalues = True, True, []
    for chi in chis:
        proto = SweepProtocol(bx_start=-16.0, bx_end=16.0, rate=1.0,
                              sample_rate=128.0, ellipticity_deg=float(chi))
        traj = run_sweep(proto, p, c)
        bx_up = next(e.bx for e in traj.flips if e.direction > 0)
        bx_down = next(e.bx for e in traj.flips if e.direction < 0)
        sym_ok &= abs(bx_up + bx_down) <= 1e-9
        h = bx_up - bx_down
        hvalues.append(h)
        h_pred = 2.0 * predict_flip_field(effective_params(p, proto), c)
        pred_ok &= abs(h / h_pred - 1.0) <= 0.05
    hyp = fit_trend(chis, np.array(hvalues), "hyperbola")
    rel_rms = hyp.residual_rms / (max(hvalues) - min(hvalues))
    elapsed = time.monotonic() - start
    ok = sym_ok and pred_ok and hyp.converged and rel_rms < 0.05 \
        and elapsed < 120.0
    _verdict(6, ok, f"symmetric={sym_ok}, within 5% of 2*Bx0={pred_ok}, "
                    f"hyperbola rms/range {rel_rms:.4f}, {elapsed:.1f}s")


def test_criterion_07_effective_field_recovery():
    start = time.monotonic()
    preset = StudyPreset()
    pt = measure_point(preset, preset.chi_deg, preset.residual_by_nt, 0.0,
                       seed=3)
    configured = preset.latch_field_nt
    elapsed = time.monotonic() - start
    ok = abs(pt.b_yeff / configured - 1.0) <= 0.10 \
        and abs(pt.b_yeff - 1.1) <= 0.15 and elapsed < 60.0
    _verdict(7, ok, f"recovered {pt.b_yeff:.3f} nT vs configured "
                    f"{configured} nT (target window 1.1 +/- 0.15), "
                    f"{elapsed:.1f}s")


def test_criterion_08_fit_recovery_and_jacobians():
    start = time.monotonic()
    true = CompositeContourModel(a_anti=0.12, w_anti=3.0, a_sym=0.15,
                                 w_sym=2.2, center=0.4, hysteresis_h=1.6,
                                 offset=0.03)
    p_true = true.free_params()
    bx = np.linspace(-12.0, 12.0, 961)
    errs = []
    for seed in range(50):
        rng = np.random.default_rng(seed)
        noise = true.a_sym / 100.0  # SNR 100 on the symmetric amplitude
        up = composite_eval(true, bx, "up") + noise * rng.standard_normal(bx.size)
        dn = composite_eval(true, bx, "down") + noise * rng.standard_normal(bx.size)
        rec = SimpleNamespace(bx_up=bx, s_up=up,
                              bx_down=bx[::-1], s_down=dn[::-1])
        res = fit_record(rec)
        assert res.converged
        errs.append(res.params - p_true)
    rms = np.sqrt(np.mean(np.square(errs), axis=0))
    rel = rms / np.abs(p_true)
    shapes_ok = bool(np.all(rel[:4] < 0.01))   # amplitudes and widths
    h_ok = rel[5] < 0.02

    # analytic Jacobians vs complex-step differentiation (exact to roundoff)
    def jac_err(fn, jac, x, p, *extra):
        j = jac(x, p, *extra)
        worst = 0.0
        for k in range(p.size):
            pc = p.astype(complex)
            pc[k] += 1e-200j
            cs = np.imag(fn(x, pc, *extra)) / 1e-200
            worst = max(worst, np.max(np.abs(j[:, k] - cs))
                        / max(np.max(np.abs(cs)), 1e-12))
        return worst

    rng = np.random.default_rng(1)
    sigma = np.where(np.arange(61) % 2 == 0, 1.0, -1.0)
    xj = (np.linspace(-10, 10, 61), sigma)
    xr = np.linspace(-5, 5, 41)
    jworst = 0.0
    for _ in range(25):
        p7 = np.array([rng.uniform(-2, 2), rng.uniform(0.5, 4),
                       rng.uniform(-2, 2), rng.uniform(0.5, 4),
                       rng.uniform(-2, 2), rng.uniform(0.1, 3),
                       rng.uniform(-1, 1)])
        jworst = max(jworst, jac_err(_composite_fn, _composite_jac, xj, p7,
                                     (1.0, -1.0)))
        p3 = np.array([rng.uniform(-3, 3), rng.uniform(0.3, 4),
                       rng.uniform(-2, 2)])
        jworst = max(jworst, jac_err(_arctan_fn, _arctan_jac, xr, p3))
        jworst = max(jworst, jac_err(_lorentz_fn, _lorentz_jac, xr, p3))
    elapsed = time.monotonic() - start
    ok = shapes_ok and h_ok and jworst < 1e-6 and elapsed < 120.0
    _verdict(8, ok, f"RMS rel: widths/amps {rel[:4].max():.4f} (<0.01), "
                    f"H {rel[5]:.4f} (<0.02), jacobian err {jworst:.1e}, "
                    f"{elapsed:.1f}s")


def test_criterion_09_bistability_persists_through_zero_field_hold():
    start = time.monotonic()
    p = EnsembleParams(gamma_over_2pi=3.5, relax_rate=8.0 * 2 * math.pi * 3.5)
    c = CouplingParams(kappa=100.0, my0=0.15 * math.sin(math.radians(0.6)))
    proto = SweepProtocol(bx_start=-16.0, bx_end=16.0, rate=1.0,
                          sample_rate=50.0, hold_on_zero=True,
                          hold_time=300.0, ellipticity_deg=0.5)
    traj = run_sweep(proto, p, c)
    # both triangle legs dwell at zero; each dwell must hold its own state
    idx = np.flatnonzero(traj.direction == 0)
    segments = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    held, unchanged, no_dwell_flips = math.inf, True, True
    for seg in segments:
        held = min(held, float(traj.t[seg[-1]] - traj.t[seg[0]]))
        unchanged &= float(np.ptp(traj.latch[seg])) == 0.0
        no_dwell_flips &= all(not traj.t[seg[0]] <= e.t <= traj.t[seg[-1]]
                              for e in traj.flips)
    elapsed = time.monotonic() - start
    ok = len(segments) == 2 and held >= 300.0 - 1.0 / proto.sample_rate \
        and unchanged and no_dwell_flips and len(traj.flips) >= 2 \
        and elapsed < 30.0
    _verdict(9, ok, f"latch constant over both {held:.1f}s zero-field "
                    f"dwells, {elapsed:.1f}s")


def test_criterion_10_determinism_and_bracketing_only(tmp_path):
    # The experimental absolute slopes (5.25/4.55 nT/deg), 25-32 nT Lorentzian
    # widths and the smoothed transverse-offset dependences come from
    # uncalibrated experimental physics; on synthetic data this suite asserts
    # only bracketing ranges, functional forms, and full determinism.
    cfg = StudyConfig(kind="chi_grid", grid=DEFAULT_GRIDS["chi_grid"], seed=3)
    res_a = run_study(cfg, tmp_path / "a")
    res_b = run_study(cfg, tmp_path / "b")
    identical = (
        (tmp_path / "a" / "points.txt").read_bytes()
        == (tmp_path / "b" / "points.txt").read_bytes()
        and (tmp_path / "a" / "trends.txt").read_bytes()
        == (tmp_path / "b" / "trends.txt").read_bytes())
    slopes = {t.quantity: t.params[0] for t in res_a.trends
              if t.kind == "linear" and t.quantity.startswith("w_")}
    slopes_ok = all(4.0 <= slopes[q] <= 6.0 for q in ("w_anti", "w_sym"))
    hyp = next(t for t in res_a.trends
               if t.quantity == "loop_hysteresis" and t.kind == "hyperbola")
    bz = run_study(StudyConfig(kind="bz_grid", grid=DEFAULT_GRIDS["bz_grid"],
                               seed=3), tmp_path / "bz")
    widths = {t.quantity: abs(t.params[1]) for t in bz.trends
              if t.kind == "lorentzian"}
    widths_ok = all(20.0 <= widths[q] <= 40.0
                    for q in ("loop_hysteresis", "b_yeff"))
    ok = identical and slopes_ok and hyp.converged and hyp.params[1] > 0 \
        and widths_ok
    _verdict(10, ok, f"identical tables={identical}, width slopes "
                     f"({slopes['w_anti']:.2f}, {slopes['w_sym']:.2f}) in "
                     f"[4,6] nT/deg, hyperbolic H (b={hyp.params[1]:.2f}>0), "
                     f"Lorentzian widths ({widths['loop_hysteresis']:.1f}, "
                     f"{widths['b_yeff']:.1f}) in [20,40] nT")
