"""Coupled time-domain evolution, sweep protocols and the hysteresis latch.

Two simulation modes:

* latch mode (default) implements the threshold hypothesis directly: the
  orientation moment follows its quasi-static steady state, and the sign of
  the alignment-driving effective transverse field is a latched variable that
  flips only when M_y crosses +/-my0, ramping through zero as a raised cosine
  of duration pi*tau_flip.
* ode mode integrates both moments with classical RK4 under the applied field
  plus the kappa*M1 effective field, with no latch; it is exploratory.
"""

from dataclasses import dataclass
import math

import numpy as np

from .spincore import (
    EnsembleParams,
    FieldVector,
    Spin2Generators,
    ALIGNMENT_PUMP_X,
    alignment_steady_state_grid,
    build_spin2_generators,
    orientation_steady_state_grid,
)

# 10-90% fraction of the half-period of a raised-cosine step
RAISED_COS_10_90 = (math.acos(-0.8) - math.acos(0.8)) / math.pi


class UnreachableThresholdError(ValueError):
    """Flip threshold exceeds the available orientation moment."""


class StepSizeError(ValueError):
    """Integrator step violates the stability bound."""


@dataclass(frozen=True)
class CouplingParams:
    """Orientation-to-alignment coupling and the latch threshold.

    kappa maps the latched orientation moment onto an effective transverse
    field (nT per unit M1); my0 is the flip threshold on M1_y; tau_flip is
    the flip time constant (None picks the default that ties the 10-90%
    transition duration to 1/((gamma/2pi)*B_latch)); back_action optionally
    slows orientation precession in proportion to the alignment norm.
    """

    kappa: float
    my0: float
    tau_flip: float | None = None
    back_action: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.kappa):
            raise ValueError("kappa must be finite")
        if self.my0 < 0:
            raise ValueError("my0 must be >= 0")
        if self.tau_flip is not None and self.tau_flip <= 0:
            raise ValueError("tau_flip must be > 0")
        if self.back_action < 0:
            raise ValueError("back_action must be >= 0")

    @property
    def latched_field(self) -> float:
        """Effective transverse field magnitude held by the latch, nT."""
        return abs(self.kappa * self.my0)


def default_tau_flip(p: EnsembleParams, c: CouplingParams) -> float:
    """Flip time constant making the 10-90% duration equal 1/((gamma/2pi)*B).

    The raised-cosine ramp spends RAISED_COS_10_90 of its half period between
    the 10% and 90% levels, so tau = 1/(frac*pi*(gamma/2pi)*B_latch).
    """
    b = c.latched_field
    if b == 0.0:
        return 0.01
    return 1.0 / (RAISED_COS_10_90 * math.pi * p.gamma_over_2pi * b)


@dataclass(frozen=True)
class LatchState:
    """Sign memory of the frozen alignment-driving field."""

    s: int = 1
    flipping: bool = False
    flip_progress: float = 0.0

    def __post_init__(self):
        if self.s not in (-1, 1):
            raise ValueError("latch sign must be +1 or -1")
        if not 0.0 <= self.flip_progress <= 1.0:
            raise ValueError("flip_progress must be in [0, 1]")


@dataclass(frozen=True)
class SweepProtocol:
    """A linear field-scan protocol along B_x with optional zero-field dwell."""

    bx_start: float
    bx_end: float
    rate: float                       # nT/s
    direction_pattern: str = "triangle"   # up | down | triangle
    hold_on_zero: bool = False
    hold_time: float = 300.0          # s, dwell at B_x = 0
    static_by: float = 0.0
    static_bz: float = 0.0
    ellipticity_deg: float | None = None
    sample_rate: float = 100.0        # Hz

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("rate must be > 0")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be > 0")
        if self.bx_start == self.bx_end:
            raise ValueError("bx_start and bx_end must differ")
        if self.direction_pattern not in ("up", "down", "triangle"):
            raise ValueError("direction_pattern must be up, down or triangle")
        if self.ellipticity_deg is not None and abs(self.ellipticity_deg) > 45.0:
            raise ValueError("|ellipticity_deg| must be <= 45")
        if self.hold_time < 0:
            raise ValueError("hold_time must be >= 0")


@dataclass(frozen=True)
class FlipEvent:
    """A threshold crossing of the latch."""

    t: float
    bx: float
    direction: int        # +1 for - -> +, -1 for + -> -


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled sweep output.

    latch holds the continuous latch variable in [-1, 1] (NaN in ode mode);
    b_eff is the field the alignment moment actually evolved under.
    """

    t: np.ndarray              # (N,)
    b_applied: np.ndarray      # (N, 3)
    b_eff: np.ndarray          # (N, 3)
    m1: np.ndarray             # (N, 3)
    m2: np.ndarray             # (N, 5)
    latch: np.ndarray          # (N,)
    direction: np.ndarray      # (N,) ramp slope sign
    flips: tuple = ()
    mode: str = "latch"

    @property
    def bx(self) -> np.ndarray:
        return self.b_applied[:, 0]

    @property
    def coherence(self) -> np.ndarray:
        """The polarimeter-visible alignment component (m2s)."""
        return self.m2[:, 4]


def predict_flip_field(p: EnsembleParams, c: CouplingParams) -> float:
    """First-order flip field B_x0 = Gamma*my0/(gamma*m0); hysteresis is 2*B_x0."""
    if p.m0 <= 0:
        raise ValueError("m0 must be > 0")
    if c.my0 > p.m0:
        raise UnreachableThresholdError(
            f"threshold my0={c.my0} exceeds available moment m0={p.m0}: no flip occurs")
    return p.relax_rate * c.my0 / (p.gamma_rad * p.m0)


def effective_field_from_transient(dt_transition: float, p: EnsembleParams) -> float:
    """Effective transverse field from a flip duration: 1/(dt*(gamma/2pi)), nT."""
    if dt_transition <= 0:
        raise ValueError("dt_transition must be > 0")
    return 1.0 / (dt_transition * p.gamma_over_2pi)


# ---------------------------------------------------------------------------
# sweep profile construction


def _segments(proto: SweepProtocol):
    if proto.direction_pattern == "up":
        legs = [(proto.bx_start, proto.bx_end)]
    elif proto.direction_pattern == "down":
        legs = [(proto.bx_end, proto.bx_start)]
    else:
        legs = [(proto.bx_start, proto.bx_end), (proto.bx_end, proto.bx_start)]
    segs = []          # (duration, bx at segment start, slope)
    for b0, b1 in legs:
        slope = math.copysign(proto.rate, b1 - b0)
        if proto.hold_on_zero and min(b0, b1) < 0.0 < max(b0, b1):
            segs.append(((0.0 - b0) / slope, b0, slope))
            segs.append((proto.hold_time, 0.0, 0.0))
            segs.append((b1 / slope, 0.0, slope))
        else:
            segs.append(((b1 - b0) / slope, b0, slope))
    return segs


def sweep_profile(proto: SweepProtocol):
    """Sample the scan: returns (t, bx, direction) on a uniform grid."""
    segs = _segments(proto)
    durations = np.array([s[0] for s in segs])
    edges = np.concatenate([[0.0], np.cumsum(durations)])
    dt = 1.0 / proto.sample_rate
    n = int(math.floor(edges[-1] / dt)) + 1
    t = np.arange(n) * dt
    k = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, len(segs) - 1)
    b0 = np.array([s[1] for s in segs])[k]
    slope = np.array([s[2] for s in segs])[k]
    bx = b0 + slope * (t - edges[k])
    return t, bx, np.sign(slope)


# ---------------------------------------------------------------------------
# the latch


def latch_scan(t, my, direction, my0: float, tau_flip: float, s0: int | None = None):
    """Scan the latch over a sampled trajectory of the slow M_y.

    Returns the continuous latch variable (raised-cosine ramps between -1 and
    +1) and the list of flip start indices.  With my0 = 0 the latch simply
    tracks sign crossings of M_y in either sweep direction.
    """
    t = np.asarray(t, float)
    my = np.asarray(my, float)
    n = t.size
    ell = np.empty(n)
    flips = []
    if s0 is None:
        s0 = -1 if my[0] < 0 else 1
    s, s_old = float(s0), float(s0)
    flipping = False
    t0 = 0.0
    for i in range(n):
        if flipping:
            phase = (t[i] - t0) / tau_flip
            if phase >= math.pi:
                flipping = False
                ell[i] = s
            else:
                ell[i] = s_old + (s - s_old) * 0.5 * (1.0 - math.cos(phase))
            continue
        trig = 0
        if my0 == 0.0:
            if s < 0 and my[i] > 0.0:
                trig = 1
            elif s > 0 and my[i] < 0.0:
                trig = -1
        elif direction[i] > 0 and s < 0 and my[i] >= my0:
            trig = 1
        elif direction[i] < 0 and s > 0 and my[i] <= -my0:
            trig = -1
        if trig:
            flipping = True
            t0 = t[i]
            s_old, s = s, float(trig)
            flips.append(i)
            ell[i] = s_old
        else:
            ell[i] = s
    return ell, flips


def effective_params(p: EnsembleParams, proto: SweepProtocol) -> EnsembleParams:
    """Scale m0 by sin|2*chi| when the protocol specifies a pump ellipticity."""
    if proto.ellipticity_deg is None:
        return p
    return p.with_m0(p.m0 * math.sin(abs(2.0 * proto.ellipticity_deg) * math.pi / 180.0))


def _flip_events(t, bx, my, flips, my0, direction):
    events = []
    for i in flips:
        d = 1 if my[i] >= 0 else -1
        thr = my0 * d if my0 > 0 else 0.0
        if i > 0 and my[i] != my[i - 1]:
            frac = (thr - my[i - 1]) / (my[i] - my[i - 1])
            frac = min(max(frac, 0.0), 1.0)
        else:
            frac = 0.0
        events.append(FlipEvent(t=float(t[i - 1] + frac * (t[i] - t[i - 1])) if i > 0 else float(t[i]),
                                bx=float(bx[i - 1] + frac * (bx[i] - bx[i - 1])) if i > 0 else float(bx[i]),
                                direction=d))
    return tuple(events)


# ---------------------------------------------------------------------------
# coupled ODE stepping


_GEN = build_spin2_generators()


def _coupled_rhs(m1, m2, b, p: EnsembleParams, c: CouplingParams):
    v = np.asarray(p.pump_axis, float)
    scale = 1.0 / (1.0 + c.back_action * np.linalg.norm(m2))
    dm1 = scale * p.gamma_rad * np.cross(m1, b) - p.relax_rate * (m1 - p.m0 * v)
    b_eff = b + c.kappa * m1
    dm2 = (-p.gamma_rad * (_GEN.contract(*b_eff) @ m2)
           - p.alignment_relax_rate * (m2 - p.a0 * ALIGNMENT_PUMP_X))
    return dm1, dm2


@dataclass(frozen=True)
class CoupledState:
    """Instantaneous state of the coupled integrator."""

    m1: np.ndarray
    m2: np.ndarray
    t: float = 0.0


def _rk4(state: CoupledState, b, p, c, dt) -> CoupledState:
    m1, m2 = state.m1, state.m2
    k1 = _coupled_rhs(m1, m2, b, p, c)
    k2 = _coupled_rhs(m1 + 0.5 * dt * k1[0], m2 + 0.5 * dt * k1[1], b, p, c)
    k3 = _coupled_rhs(m1 + 0.5 * dt * k2[0], m2 + 0.5 * dt * k2[1], b, p, c)
    k4 = _coupled_rhs(m1 + dt * k3[0], m2 + dt * k3[1], b, p, c)
    return CoupledState(
        m1=m1 + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        m2=m2 + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
        t=state.t + dt)


def max_stable_dt(B: FieldVector, p: EnsembleParams) -> float:
    """Stability bound: dt <= 0.1/Gamma and dt <= 0.05/(gamma |B|)."""
    bound = 0.1 / max(p.relax_rate, p.alignment_relax_rate)
    bmag = B.magnitude if isinstance(B, FieldVector) else float(np.linalg.norm(B))
    if bmag > 0:
        bound = min(bound, 0.05 / (p.gamma_rad * bmag))
    return bound


def step_coupled(state: CoupledState, B_applied: FieldVector, p: EnsembleParams,
                 c: CouplingParams, dt: float) -> CoupledState:
    """One RK4 step of the coupled moments under a constant applied field."""
    bound = max_stable_dt(B_applied, p)
    if dt > bound:
        raise StepSizeError(
            f"dt={dt:.3e} s exceeds the stability bound {bound:.3e} s "
            f"(Gamma={p.relax_rate:.3g}/s, |B|={B_applied.magnitude:.3g} nT)")
    return _rk4(state, B_applied.as_array(), p, c, dt)


# ---------------------------------------------------------------------------
# sweeps


def run_sweep(proto: SweepProtocol, p: EnsembleParams, c: CouplingParams,
              mode: str = "latch", initial_sign: int | None = None) -> Trajectory:
    """Run a field scan and return the sampled trajectory.

    latch mode: both moments follow their quasi-static steady states; the
    alignment sees static_by plus the latched effective field
    kappa*my0*latch(t).  ode mode: RK4 time integration with the kappa*M1
    effective field and no latch.
    """
    if mode not in ("latch", "ode"):
        raise ValueError("mode must be 'latch' or 'ode'")
    t, bx, direction = sweep_profile(proto)
    pe = effective_params(p, proto)
    by = np.full_like(bx, proto.static_by)
    bz = np.full_like(bx, proto.static_bz)
    b_applied = np.stack([bx, by, bz], axis=-1)

    if mode == "latch":
        m1 = orientation_steady_state_grid(bx, by, bz, pe)
        tau = c.tau_flip if c.tau_flip is not None else default_tau_flip(pe, c)
        ell, flip_idx = latch_scan(t, m1[:, 1], direction, c.my0, tau, s0=initial_sign)
        by_eff = by + c.kappa * c.my0 * ell
        m2 = alignment_steady_state_grid(bx, by_eff, bz, pe, _GEN)
        b_eff = np.stack([bx, by_eff, bz], axis=-1)
        flips = _flip_events(t, bx, m1[:, 1], flip_idx, c.my0, direction)
        return Trajectory(t=t, b_applied=b_applied, b_eff=b_eff, m1=m1, m2=m2,
                          latch=ell, direction=direction, flips=flips, mode="latch")

    # ode mode
    m1 = np.empty((t.size, 3))
    m2 = np.empty((t.size, 5))
    b_eff = np.empty((t.size, 3))
    state = CoupledState(
        m1=orientation_steady_state_grid(bx[0], by[0], bz[0], pe),
        m2=alignment_steady_state_grid(bx[0], by[0], bz[0], pe, _GEN))
    dt_out = t[1] - t[0] if t.size > 1 else 0.0
    for i in range(t.size):
        m1[i] = state.m1
        m2[i] = state.m2
        b_eff[i] = b_applied[i] + c.kappa * state.m1
        if i == t.size - 1:
            break
        bound = max_stable_dt(FieldVector(*b_applied[i]), pe)
        nsub = max(1, int(math.ceil(dt_out / bound)))
        dt = dt_out / nsub
        for k in range(nsub):
            # field interpolated linearly across the output interval
            frac = (k + 0.5) / nsub
            b = b_applied[i] * (1 - frac) + b_applied[i + 1] * frac
            state = _rk4(state, b, pe, c, dt)
    return Trajectory(t=t, b_applied=b_applied, b_eff=b_eff, m1=m1, m2=m2,
                      latch=np.full(t.size, math.nan), direction=direction,
                      flips=(), mode="ode")
