"""Parameter-sweep studies over the simulated hysteresis pipeline.

A study point runs the full measurement chain three times at one setting:

* two prepared-state envelope scans with the latch pinned in each state
  (the bistability curves), jointly fitted with the composite contour to
  get the antisymmetric/symmetric amplitudes and widths;
* one triangle loop scan with the latch live, from which the transition
  fields, the loop hysteresis, the flip duration and the recovered
  effective transverse field are extracted.

``run_study`` sweeps a grid (pump ellipticity, pump-axis field, or
transverse offset), writes a points table, per-point demodulated records,
trend fits, and SVG plots into an output directory.  ``report`` rebuilds
tables and plots from a saved points table without re-simulation.
"""

from dataclasses import dataclass, field, fields, replace
import math
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .dynamics import CouplingParams, SweepProtocol, effective_field_from_transient
from .fitkit import extract_transition, fit_record, fit_trend
from .instrument import ScanConfig, lockin_demodulate, synthesize_record
from .plotsvg import Series, emit_plot
from .recordio import write_record
from .spincore import EnsembleParams, SignalMix, experiment_signal_mix

STUDY_KINDS = ("chi_grid", "bz_grid", "by_grid", "single")


@dataclass(frozen=True)
class StudyPreset:
    """Frozen instrument/physics operating point for studies.

    The latch threshold is a fixed fraction of the orientation moment that
    is available at the smallest ellipticity of interest, so every grid
    point stays bistable while the loop width shrinks hyperbolically with
    ellipticity.  ``residual_by_nt``/``residual_bz_nt`` model imperfect
    compensation of the static transverse and pump-axis fields.
    """

    gamma_over_2pi: float = 3.5          # Hz/nT
    base_width_nt: float = 8.0           # zero-ellipticity resonance HWHM
    broadening_nt_per_deg: float = 4.0   # simulated width growth with chi
    relax_ratio_alignment: float = 2.2   # rank-2 vs rank-1 relaxation
    latch_threshold: float = 0.49 * math.sin(math.radians(0.2))
    latch_field_nt: float = 1.1          # kappa * my0
    residual_by_nt: float = 0.4
    residual_bz_nt: float = 0.5
    serf_width_nt: float = 28.0          # latch-threshold survival vs B_z
    chi_deg: float = 0.25                # reference ellipticity
    bx_span_nt: float = 30.0
    ramp_rate: float = 0.8               # nT/s
    sample_rate: float = 500.0
    mod_amplitude: float = 2.5
    mod_freq: float = 5.0
    noise_rms: float = 0.002
    lpf_cutoff: float = 2.0

    @property
    def kappa(self) -> float:
        return self.latch_field_nt / self.latch_threshold

    def ensemble(self, chi_deg: float) -> EnsembleParams:
        width = self.base_width_nt + self.broadening_nt_per_deg * chi_deg
        return EnsembleParams(
            gamma_over_2pi=self.gamma_over_2pi,
            relax_rate=width * 2.0 * math.pi * self.gamma_over_2pi,
            relax_ratio_alignment=self.relax_ratio_alignment)

    def coupling(self, bz_pump_nt: float = 0.0) -> CouplingParams:
        """Latch coupling; a pump-axis field suppresses the threshold."""
        survive = 1.0 / (1.0 + (bz_pump_nt / self.serf_width_nt) ** 2)
        return CouplingParams(kappa=self.kappa, my0=self.latch_threshold * survive)

    def signal_mix(self) -> SignalMix:
        return experiment_signal_mix()


@dataclass(frozen=True)
class StudyConfig:
    """One study: which variable is swept and over which grid."""

    kind: str
    grid: tuple
    seed: int = 0
    preset: StudyPreset = field(default_factory=StudyPreset)

    def __post_init__(self):
        if self.kind not in STUDY_KINDS:
            raise ValueError(f"kind must be one of {STUDY_KINDS}, got {self.kind!r}")
        grid = tuple(float(g) for g in self.grid)
        if not grid:
            raise ValueError("grid must not be empty")
        if self.kind == "single" and len(grid) != 1:
            raise ValueError("a 'single' study takes exactly one grid value")
        if len(set(grid)) != len(grid):
            raise ValueError("grid values must be unique")
        if not all(math.isfinite(g) for g in grid):
            raise ValueError("grid values must be finite")
        object.__setattr__(self, "grid", grid)


def study_config_from_dict(flat: dict) -> StudyConfig:
    """Build a StudyConfig from flat ``study.*`` / ``preset.*`` config keys."""
    grid = flat.get("study.grid", ())
    if not isinstance(grid, (list, tuple)):
        grid = (grid,)
    preset_kwargs = {}
    names = {f.name for f in fields(StudyPreset)}
    for key, value in flat.items():
        if key.startswith("preset."):
            name = key[len("preset."):]
            if name not in names:
                raise ValueError(f"unknown preset field {name!r}")
            preset_kwargs[name] = value
    return StudyConfig(kind=flat.get("study.kind", "single"), grid=tuple(grid),
                       seed=int(flat.get("study.seed", 0)),
                       preset=StudyPreset(**preset_kwargs))


# ---------------------------------------------------------------------------
# one study point

POINT_COLUMNS = (
    "x", "chi_deg", "static_by", "bz_pump", "a_anti", "w_anti", "a_sym",
    "w_sym", "center", "hysteresis_h", "offset", "bx_up", "bx_down",
    "loop_hysteresis", "dt", "max_slope", "b_yeff", "fit_converged",
)


@dataclass(frozen=True)
class StudyPoint:
    """Measured quantities at one grid setting."""

    x: float
    chi_deg: float
    static_by: float
    bz_pump: float
    a_anti: float
    w_anti: float
    a_sym: float
    w_sym: float
    center: float
    hysteresis_h: float
    offset: float
    bx_up: float
    bx_down: float
    loop_hysteresis: float
    dt: float
    max_slope: float
    b_yeff: float
    fit_converged: bool

    def row(self):
        return tuple(float(getattr(self, c)) for c in POINT_COLUMNS)


def _scan_config(preset: StudyPreset, ramp: SweepProtocol, seed: int) -> ScanConfig:
    return ScanConfig(ramp=ramp, mod_amplitude=preset.mod_amplitude,
                      mod_freq=preset.mod_freq, sample_rate=preset.sample_rate,
                      noise_rms=preset.noise_rms, seed=seed)


def measure_point(preset: StudyPreset, chi_deg: float, static_by: float,
                  bz_pump: float, seed: int, x: float | None = None,
                  records: dict | None = None) -> StudyPoint:
    """Run envelope-pair and loop scans at one setting and reduce them."""
    p = preset.ensemble(chi_deg)
    c = preset.coupling(bz_pump)
    span, rate = preset.bx_span_nt, preset.ramp_rate
    mix = preset.signal_mix()

    # prepared-state envelopes: latch pinned, so the transverse offset is
    # the static residual plus the latched field of each state
    envelopes = {}
    for i, sign in enumerate((+1, -1)):
        ramp = SweepProtocol(bx_start=-span, bx_end=span, rate=rate,
                             direction_pattern="up", ellipticity_deg=chi_deg,
                             static_by=static_by + sign * c.latched_field,
                             static_bz=preset.residual_bz_nt)
        rec = synthesize_record(_scan_config(preset, ramp, seed + i), p,
                                CouplingParams(kappa=0.0, my0=0.0), mix)
        envelopes[sign] = lockin_demodulate(rec, lpf_cutoff=preset.lpf_cutoff)
    pair = SimpleNamespace(
        bx_up=envelopes[+1].bx_up, s_up=envelopes[+1].s_up,
        bx_down=envelopes[-1].bx_up, s_down=envelopes[-1].s_up)
    fit = fit_record(pair)

    # live-latch triangle loop for transitions and flip timing
    ramp = SweepProtocol(bx_start=-span, bx_end=span, rate=rate,
                         ellipticity_deg=chi_deg, static_by=static_by,
                         static_bz=preset.residual_bz_nt)
    rec = synthesize_record(_scan_config(preset, ramp, seed + 2), p, c, mix)
    loop = lockin_demodulate(rec, lpf_cutoff=preset.lpf_cutoff)
    tr = extract_transition(loop)
    b_yeff = effective_field_from_transient(tr.dt, p) if tr.dt and tr.dt > 0 \
        else math.nan

    if records is not None:
        records["env_plus"] = envelopes[+1]
        records["env_minus"] = envelopes[-1]
        records["loop"] = loop

    m = fit.model
    return StudyPoint(
        x=float(x if x is not None else chi_deg), chi_deg=chi_deg,
        static_by=static_by, bz_pump=bz_pump,
        a_anti=m.a_anti, w_anti=m.w_anti, a_sym=m.a_sym, w_sym=m.w_sym,
        center=m.center, hysteresis_h=m.hysteresis_h, offset=m.offset,
        bx_up=tr.bx_up, bx_down=tr.bx_down, loop_hysteresis=tr.hysteresis,
        dt=tr.dt, max_slope=tr.max_slope, b_yeff=b_yeff,
        fit_converged=fit.converged)


# ---------------------------------------------------------------------------
# trend mapping

# quantity -> trend kinds fitted against the grid variable
TREND_MAP = {
    "chi_grid": (
        ("w_anti", ("linear",)),
        ("w_sym", ("linear",)),
        ("a_anti", ("linear", "lorentzian")),
        ("a_sym", ("linear", "lorentzian")),
        ("loop_hysteresis", ("hyperbola",)),
        ("max_slope", ("arctan",)),
    ),
    "bz_grid": (
        ("loop_hysteresis", ("lorentzian",)),
        ("b_yeff", ("lorentzian",)),
    ),
    "by_grid": (
        ("a_anti", ("polynomial",)),
        ("a_sym", ("polynomial",)),
    ),
    "single": (),
}


@dataclass(frozen=True)
class TrendFit:
    quantity: str
    kind: str
    params: tuple
    param_names: tuple
    residual_rms: float
    converged: bool
    n_points: int


@dataclass(frozen=True)
class StudyResult:
    config: StudyConfig
    points: tuple
    trends: tuple
    out_dir: Path


def _fit_trends(kind: str, points) -> tuple:
    trends = []
    for quantity, trend_kinds in TREND_MAP[kind]:
        x = np.array([pt.x for pt in points])
        y = np.array([getattr(pt, quantity) for pt in points])
        ok = np.isfinite(x) & np.isfinite(y)
        if quantity in ("a_anti", "a_sym"):
            y = np.abs(y)
        for tk in trend_kinds:
            # closed-form fits need as many points as parameters; the
            # iterative fits want a 2x margin
            needed = {"linear": 2, "hyperbola": 2, "polynomial": 4,
                      "arctan": 6, "lorentzian": 6}[tk]
            if ok.sum() < needed:
                continue
            try:
                res = fit_trend(x[ok], y[ok], tk)
            except Exception:
                continue
            names = tuple(res.param_names) if res.param_names else \
                tuple(f"p{i}" for i in range(len(res.params)))
            trends.append(TrendFit(
                quantity=quantity, kind=tk,
                params=tuple(float(v) for v in res.params),
                param_names=names, residual_rms=float(res.residual_rms),
                converged=bool(res.converged), n_points=int(ok.sum())))
    return tuple(trends)


# ---------------------------------------------------------------------------
# tables and figures

_X_LABEL = {"chi_grid": "ellipticity (deg)", "bz_grid": "pump-axis field (nT)",
            "by_grid": "transverse offset (nT)", "single": "x"}


def _write_points_table(cfg: StudyConfig, points, path: Path):
    lines = [f"# alignor-study points", f"# kind: {cfg.kind}",
             f"# seed: {cfg.seed}", "# columns: " + " ".join(POINT_COLUMNS)]
    for pt in points:
        lines.append(" ".join(repr(v) for v in pt.row()))
    path.write_text("\n".join(lines) + "\n")


def read_points_table(path) -> tuple:
    """Read a saved points table back into StudyPoint tuples."""
    kind = None
    seed = 0
    points = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# kind:"):
            kind = line.split(":", 1)[1].strip()
        elif line.startswith("# seed:"):
            seed = int(line.split(":", 1)[1].strip())
        elif line and not line.startswith("#"):
            vals = [float(v) for v in line.split()]
            if len(vals) != len(POINT_COLUMNS):
                raise ValueError("points table has wrong column count")
            kwargs = dict(zip(POINT_COLUMNS, vals))
            kwargs["fit_converged"] = bool(kwargs["fit_converged"])
            points.append(StudyPoint(**kwargs))
    if kind is None:
        raise ValueError("not a study points table: missing kind header")
    return kind, seed, tuple(points)


def _write_trends_table(trends, path: Path):
    lines = ["# alignor-study trends",
             "# quantity kind n_points residual_rms converged params..."]
    for tr in trends:
        pieces = [tr.quantity, tr.kind, str(tr.n_points), repr(tr.residual_rms),
                  str(tr.converged)]
        pieces += [f"{n}={v!r}" for n, v in zip(tr.param_names, tr.params)]
        lines.append(" ".join(pieces))
    path.write_text("\n".join(lines) + "\n")


_TREND_EVAL = {
    "linear": lambda x, p: p[0] * x + p[1],
    "hyperbola": lambda x, p: p[0] + p[1] / x,
    "arctan": lambda x, p: p[0] * np.arctan(x / p[1]) + p[2],
    "lorentzian": lambda x, p: p[0] / (1.0 + (x / p[1]) ** 2) + p[2],
    "polynomial": lambda x, p: np.polyval(list(p)[::-1], x),
}


def _plot_trend(points, trend: TrendFit, xlabel: str, path: Path):
    x = np.array([pt.x for pt in points])
    y = np.array([getattr(pt, trend.quantity) for pt in points])
    if trend.quantity in ("a_anti", "a_sym"):
        y = np.abs(y)
    ok = np.isfinite(x) & np.isfinite(y)
    if not np.any(ok):
        return
    xs = np.linspace(x[ok].min(), x[ok].max(), 200)
    if trend.kind == "hyperbola":
        xs = xs[np.abs(xs) > 1e-12]
    fitted = _TREND_EVAL[trend.kind](xs, np.array(trend.params))
    emit_plot([Series("measured", x[ok], y[ok], markers=True),
               Series(f"{trend.kind} fit", xs, fitted, dashed=True)],
              path, title=f"{trend.quantity} vs {xlabel}", xlabel=xlabel,
              ylabel=trend.quantity)


def _point_settings(cfg: StudyConfig, value: float):
    preset = cfg.preset
    chi, by, bz = preset.chi_deg, preset.residual_by_nt, 0.0
    if cfg.kind in ("chi_grid", "single"):
        chi = value
    elif cfg.kind == "bz_grid":
        bz = value
    elif cfg.kind == "by_grid":
        by = value
    return chi, by, bz


def run_study(cfg: StudyConfig, out_dir) -> StudyResult:
    """Run every grid point, then write tables, records, and figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    points = []
    for i, value in enumerate(cfg.grid):
        chi, by, bz = _point_settings(cfg, value)
        records = {}
        pt = measure_point(cfg.preset, chi, by, bz, seed=cfg.seed + 10 * i,
                           x=value, records=records)
        points.append(pt)
        for name, rec in records.items():
            write_record(rec, out / f"point_{i:02d}_{name}.txt")
    points = tuple(points)
    trends = _fit_trends(cfg.kind, points)
    _write_points_table(cfg, points, out / "points.txt")
    _write_trends_table(trends, out / "trends.txt")
    xlabel = _X_LABEL[cfg.kind]
    for tr in trends:
        _plot_trend(points, tr, xlabel,
                    out / f"trend_{tr.quantity}_{tr.kind}.svg")
    if points:
        _plot_points_overview(cfg, out)
    return StudyResult(config=cfg, points=points, trends=trends, out_dir=out)


def _plot_points_overview(cfg: StudyConfig, out: Path):
    """Overlay the loop contours of the first and last grid point."""
    series = []
    for i in (0, len(cfg.grid) - 1):
        path = out / f"point_{i:02d}_loop.txt"
        if not path.exists():
            continue
        from .recordio import read_record
        rec = read_record(path)
        label = f"{cfg.grid[i]:g}"
        series.append(Series(f"up {label}", rec.bx_up, rec.s_up))
        series.append(Series(f"down {label}", rec.bx_down, rec.s_down,
                             dashed=True))
    if series:
        emit_plot(series, out / "loops.svg", title="hysteresis loops",
                  xlabel="B_x (nT)", ylabel="demodulated signal")


def report(study_dir) -> StudyResult:
    """Regenerate trends and figures from a saved points table.

    No simulation is re-run; the table written by ``run_study`` is the sole
    input, so a report is cheap and reproducible.
    """
    out = Path(study_dir)
    kind, seed, points = read_points_table(out / "points.txt")
    trends = _fit_trends(kind, points)
    _write_trends_table(trends, out / "trends.txt")
    xlabel = _X_LABEL[kind]
    for tr in trends:
        _plot_trend(points, tr, xlabel,
                    out / f"trend_{tr.quantity}_{tr.kind}.svg")
    cfg = StudyConfig(kind=kind, grid=tuple(pt.x for pt in points), seed=seed)
    return StudyResult(config=cfg, points=points, trends=trends, out_dir=out)


DEFAULT_GRIDS = {
    "chi_grid": (0.1, 0.25, 0.4, 0.55, 0.7, 0.85, 1.0),
    "bz_grid": (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0),
    "by_grid": (-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5),
}
