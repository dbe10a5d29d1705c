"""Command-line interface: simulate, demodulate, fit, study, estimate, report.

Configs are flat ``section.key = value`` text files; sections map onto the
library dataclasses (``ramp.*`` -> SweepProtocol, ``instrument.*`` ->
ScanConfig, ``physics.*`` -> EnsembleParams, ``coupling.*`` ->
CouplingParams, ``mix.*`` -> SignalMix, ``study.*``/``preset.*`` ->
StudyConfig).  Exit codes: 0 success, 1 usage error, 2 data error, 3 fit
non-convergence (partial output is still printed).  The ALIGNOR_OUT
environment variable overrides the base output directory.
"""

import argparse
from dataclasses import fields
import json
import math
import os
from pathlib import Path
import sys

from .dynamics import CouplingParams, SweepProtocol
from .estimators import (
    BroadeningBudget,
    DipoleConfig,
    broadening_rate,
    cs_number_density,
    dipole_field,
    ensemble_volume,
)
from .fitkit import DegenerateFitError, extract_transition, fit_record
from .instrument import ScanConfig, lockin_demodulate, synthesize_record
from .recordio import load_config, read_record, write_record
from .spincore import EnsembleParams, SignalMix, experiment_signal_mix
from .study import (
    DEFAULT_GRIDS,
    StudyPreset,
    report,
    run_study,
    study_config_from_dict,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_FIT = 3


class _UsageError(Exception):
    """Raised instead of argparse's default SystemExit(2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


# ---------------------------------------------------------------------------
# config plumbing


def _section(flat: dict, prefix: str, cls, **extra):
    """Instantiate a dataclass from the ``prefix.*`` keys of a flat config."""
    names = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in flat.items():
        if key.startswith(prefix + "."):
            name = key[len(prefix) + 1:]
            if name not in names:
                raise ValueError(f"unknown {prefix} field {name!r}")
            kwargs[name] = value
    kwargs.update(extra)
    return cls(**kwargs)


def default_simulate_config() -> dict:
    """Flat config for the reference triangle-loop simulation."""
    preset = StudyPreset()
    p = preset.ensemble(preset.chi_deg)
    c = preset.coupling()
    mix = preset.signal_mix()
    flat = {
        "ramp.bx_start": -preset.bx_span_nt,
        "ramp.bx_end": preset.bx_span_nt,
        "ramp.rate": preset.ramp_rate,
        "ramp.direction_pattern": "triangle",
        "ramp.static_by": preset.residual_by_nt,
        "ramp.static_bz": preset.residual_bz_nt,
        "ramp.ellipticity_deg": preset.chi_deg,
        "instrument.mod_amplitude": preset.mod_amplitude,
        "instrument.mod_freq": preset.mod_freq,
        "instrument.sample_rate": preset.sample_rate,
        "instrument.noise_rms": preset.noise_rms,
        "instrument.seed": 0,
    }
    for name in ("gamma_over_2pi", "relax_rate", "m0", "a0",
                 "relax_ratio_alignment"):
        flat[f"physics.{name}"] = getattr(p, name)
    flat["coupling.kappa"] = c.kappa
    flat["coupling.my0"] = c.my0
    for f in fields(SignalMix):
        flat[f"mix.{f.name}"] = getattr(mix, f.name)
    return flat


def _load_flat(args) -> dict:
    flat = default_simulate_config()
    if args.config:
        flat.update(load_config(args.config))
    if args.seed is not None:
        flat["instrument.seed"] = args.seed
    return flat


def _out_dir(args) -> Path:
    env = os.environ.get("ALIGNOR_OUT")
    out = Path(args.out) if args.out else None
    if out is None:
        out = Path(env) if env else Path(".")
    elif env and not out.is_absolute():
        out = Path(env) / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(rows, fmt: str):
    """Print (quantity, value, unit) rows as csv or json."""
    if fmt == "json":
        print(json.dumps({name: {"value": value, "unit": unit}
                          for name, value, unit in rows}, indent=2))
    else:
        print("quantity,value,unit")
        for name, value, unit in rows:
            if isinstance(value, float):
                value = f"{value:.6g}"
            print(f"{name},{value},{unit}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    flat = _load_flat(args)
    ramp = _section(flat, "ramp", SweepProtocol)
    cfg = _section(flat, "instrument", ScanConfig, ramp=ramp)
    p = _section(flat, "physics", EnsembleParams)
    c = _section(flat, "coupling", CouplingParams)
    mix = _section(flat, "mix", SignalMix)
    rec = synthesize_record(cfg, p, c, mix)
    path = write_record(rec, _out_dir(args) / "scan.txt")
    print(path)
    return EXIT_OK


def cmd_demod(args) -> int:
    rec = read_record(args.record)
    if not hasattr(rec, "sb_raw"):
        raise ValueError(f"{args.record}: expected a raw scan record")
    demod = lockin_demodulate(rec, phase_deg=args.phase_deg,
                              lpf_cutoff=args.lpf_cutoff, gain=args.gain)
    path = write_record(demod, _out_dir(args) / "demod.txt")
    print(path)
    return EXIT_OK


def cmd_fit(args) -> int:
    rec = read_record(args.record)
    if not hasattr(rec, "bx_up"):
        raise ValueError(f"{args.record}: expected a demodulated record")
    res = fit_record(rec)
    rows = [(n, float(v), "") for n, v in zip(res.param_names, res.params)]
    rows.append(("residual_rms", float(res.residual_rms), ""))
    rows.append(("converged", bool(res.converged), ""))
    if args.transition:
        tr = extract_transition(rec)
        rows += [("bx_up", tr.bx_up, "nT"), ("bx_down", tr.bx_down, "nT"),
                 ("loop_hysteresis", tr.hysteresis, "nT"), ("dt", tr.dt, "s")]
    _emit(rows, args.format)
    return EXIT_OK if res.converged else EXIT_FIT


def cmd_study(args) -> int:
    flat = load_config(args.config) if args.config else {}
    if args.kind:
        flat["study.kind"] = args.kind
    kind = flat.get("study.kind", "single")
    if "study.grid" not in flat:
        flat["study.grid"] = list(
            DEFAULT_GRIDS.get(kind, (StudyPreset().chi_deg,)))
    if args.seed is not None:
        flat["study.seed"] = args.seed
    cfg = study_config_from_dict(flat)
    res = run_study(cfg, _out_dir(args))
    converged = sum(pt.fit_converged for pt in res.points)
    print(f"study {cfg.kind}: {len(res.points)} points "
          f"({converged} converged), {len(res.trends)} trend fits "
          f"-> {res.out_dir}")
    return EXIT_OK


def cmd_report(args) -> int:
    res = report(args.study_dir)
    print(f"report {res.config.kind}: {len(res.points)} points, "
          f"{len(res.trends)} trend fits -> {res.out_dir}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    what = args.what
    if what == "broadening":
        budget = BroadeningBudget(p_in=args.p_in, k_lb=args.k_lb,
                                  k_serf=args.k_serf, k_ls=args.k_ls)
        rows = [("broadening_rate", broadening_rate(budget), "nT/deg")]
    elif what == "dipole":
        d = DipoleConfig(n_atoms=args.n, distance_mm=args.l_mm,
                         geometry=args.geometry)
        rows = [("dipole_field", dipole_field(d), "nT")]
    elif what == "volume":
        volume_mm3, side_mm = ensemble_volume(args.n, args.density)
        rows = [("volume", volume_mm3, "mm^3"), ("cube_side", side_mm, "mm")]
    else:  # density
        rows = [("number_density", cs_number_density(args.temp_c), "cm^-3")]
    if any(not math.isfinite(v) for _, v, _ in rows
           if isinstance(v, float)):
        raise ValueError("estimate produced a non-finite value")
    _emit(rows, args.format)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="override the simulation seed")
    common.add_argument("--config", default=None,
                        help="flat key=value config file")
    common.add_argument("--out", default=None,
                        help="output directory (default: ALIGNOR_OUT or .)")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="result output format")

    parser = _Parser(prog="alignor",
                     description="Simulate and analyze bistable "
                                 "hysteresis scan records.")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common],
                       help="synthesize one raw scan record")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("demod", parents=[common],
                       help="lock-in demodulate a raw scan record")
    p.add_argument("record", help="scan record file")
    p.add_argument("--phase-deg", type=float, default=0.0)
    p.add_argument("--lpf-cutoff", type=float, default=0.5)
    p.add_argument("--gain", type=float, default=1.0)
    p.set_defaults(func=cmd_demod)

    p = sub.add_parser("fit", parents=[common],
                       help="fit the composite contour to a demod record")
    p.add_argument("record", help="demodulated record file")
    p.add_argument("--transition", action="store_true",
                   help="also report transition fields and flip duration")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("study", parents=[common],
                       help="run a parameter-sweep study")
    p.add_argument("--kind", choices=("chi_grid", "bz_grid", "by_grid",
                                      "single"), default=None)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("report", parents=[common],
                       help="regenerate tables/figures from a study directory")
    p.add_argument("study_dir", help="directory containing points.txt")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("estimate", parents=[common],
                       help="physical back-of-the-envelope estimates")
    est = p.add_subparsers(dest="what", required=True, parser_class=_Parser)
    e = est.add_parser("broadening", parents=[common])
    e.add_argument("--p-in", type=float, default=2.0, help="pump power, mW")
    e.add_argument("--k-lb", type=float, default=30.0)
    e.add_argument("--k-serf", type=float, default=0.3)
    e.add_argument("--k-ls", type=float, default=90.0)
    e.set_defaults(func=cmd_estimate)
    e = est.add_parser("dipole", parents=[common])
    e.add_argument("--n", type=float, required=True, help="number of atoms")
    e.add_argument("--l-mm", type=float, required=True, help="distance, mm")
    e.add_argument("--geometry", choices=("on_axis", "equatorial"),
                   default="on_axis")
    e.set_defaults(func=cmd_estimate)
    e = est.add_parser("volume", parents=[common])
    e.add_argument("--n", type=float, required=True, help="number of atoms")
    e.add_argument("--density", type=float, default=2e14,
                   help="number density, cm^-3")
    e.set_defaults(func=cmd_estimate)
    e = est.add_parser("density", parents=[common])
    e.add_argument("--temp-c", type=float, required=True,
                   help="cell temperature, deg C")
    e.set_defaults(func=cmd_estimate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help / --version paths
        return int(e.code or 0)
    try:
        return args.func(args)
    except DegenerateFitError as e:
        print(f"fit failed: {e}", file=sys.stderr)
        return EXIT_FIT
    except (ValueError, KeyError, TypeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
