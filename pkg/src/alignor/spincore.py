"""Multipole algebra and steady states for coexisting orientation and alignment.

The vapor carries two moments: a rank-1 orientation (a Bloch vector pumped by
the circular light component) and a rank-2 alignment (pumped by the linear
component, polarization axis x, light along z).  Both precess about the applied
magnetic field and relax at a common rate.  This module holds the value types,
the real spin-2 rotation generators, the closed-form alignment lineshape and
the linear steady-state solvers that the rest of the package builds on.
"""

from dataclasses import dataclass, replace
import math

import numpy as np

TWO_PI = 2.0 * math.pi

# Gyromagnetic slopes of the zero-field resonance, Hz/nT.
WEAK_PUMP_GAMMA_HZ_PER_NT = 1.27
STRONG_PUMP_GAMMA_HZ_PER_NT = 3.5


@dataclass(frozen=True)
class FieldVector:
    """Magnetic field (bx, by, bz) in nT."""

    bx: float = 0.0
    by: float = 0.0
    bz: float = 0.0

    def __post_init__(self):
        for v in (self.bx, self.by, self.bz):
            if not math.isfinite(v):
                raise ValueError("field components must be finite")

    @property
    def magnitude(self) -> float:
        return math.sqrt(self.bx**2 + self.by**2 + self.bz**2)

    def as_array(self) -> np.ndarray:
        return np.array([self.bx, self.by, self.bz])


@dataclass(frozen=True)
class EnsembleParams:
    """Ensemble constants: gyromagnetic slope, relaxation, pump equilibria.

    ``relax_rate`` is the half-width at half-maximum of the zero-field
    resonance in angular units (s^-1), so that the dimensionless field is
    b_i = gamma * B_i / relax_rate with gamma = 2*pi*gamma_over_2pi.
    """

    gamma_over_2pi: float = WEAK_PUMP_GAMMA_HZ_PER_NT  # Hz/nT
    relax_rate: float = 60.0                           # s^-1, HWHM convention
    m0: float = 1.0        # equilibrium orientation magnitude
    a0: float = 1.0        # equilibrium alignment magnitude
    pump_axis: tuple = (0.0, 0.0, 1.0)
    # rank-2 coherences usually relax faster than the rank-1 moment; the
    # alignment relaxation rate is relax_ratio_alignment * relax_rate
    relax_ratio_alignment: float = 1.0

    def __post_init__(self):
        if self.relax_rate <= 0:
            raise ValueError("relax_rate must be > 0")
        if self.relax_ratio_alignment <= 0:
            raise ValueError("relax_ratio_alignment must be > 0")
        if self.gamma_over_2pi <= 0:
            raise ValueError("gamma_over_2pi must be > 0")
        axis = np.asarray(self.pump_axis, dtype=float)
        if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
            raise ValueError("pump_axis must be a unit vector")

    @property
    def gamma_rad(self) -> float:
        """Angular gyromagnetic ratio, rad/s per nT."""
        return TWO_PI * self.gamma_over_2pi

    @property
    def width_nt(self) -> float:
        """Resonance half-width in field units, relax_rate / gamma."""
        return self.relax_rate / self.gamma_rad

    @property
    def alignment_relax_rate(self) -> float:
        """Relaxation rate of the rank-2 moment, s^-1."""
        return self.relax_ratio_alignment * self.relax_rate

    def with_m0(self, m0: float) -> "EnsembleParams":
        return replace(self, m0=m0)


@dataclass(frozen=True)
class NormalizedField:
    """Dimensionless field b_i = gamma*B_i/relax_rate.

    Keeps a reference to the source field so normalize/denormalize round-trips
    are bit-exact.
    """

    bx: float
    by: float
    bz: float
    source: FieldVector | None = None

    @property
    def byz2(self) -> float:
        return self.by**2 + self.bz**2

    @classmethod
    def from_field(cls, B: FieldVector, p: EnsembleParams) -> "NormalizedField":
        f = p.gamma_rad / p.relax_rate
        return cls(B.bx * f, B.by * f, B.bz * f, source=B)

    def denormalize(self, p: EnsembleParams) -> FieldVector:
        if self.source is not None:
            return self.source
        f = p.relax_rate / p.gamma_rad
        return FieldVector(self.bx * f, self.by * f, self.bz * f)


@dataclass(frozen=True)
class OrientationMoment:
    """Dimensionless orientation (rank-1) moment components."""

    mx: float = 0.0
    my: float = 0.0
    mz: float = 0.0

    @property
    def norm(self) -> float:
        return math.sqrt(self.mx**2 + self.my**2 + self.mz**2)

    def as_array(self) -> np.ndarray:
        return np.array([self.mx, self.my, self.mz])


@dataclass(frozen=True)
class AlignmentMultipole:
    """Rank-2 moment in the real z-quantized basis (m0c, m1c, m1s, m2c, m2s).

    m_qc = sqrt(2)*Re rho_q and m_qs = -sqrt(2)*Im rho_q for q > 0; m0c = rho_0.
    """

    m0c: float = 0.0
    m1c: float = 0.0
    m1s: float = 0.0
    m2c: float = 0.0
    m2s: float = 0.0

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))

    @property
    def coherence_signal(self) -> float:
        """The component seen by the balanced polarimeter (probe along z).

        Frozen to m2s by the closed-form equivalence test: it is the unique
        component proportional to ``alignment_signal_closed_form``.
        """
        return self.m2s

    def as_array(self) -> np.ndarray:
        return np.array([self.m0c, self.m1c, self.m1s, self.m2c, self.m2s])

    @classmethod
    def from_array(cls, a) -> "AlignmentMultipole":
        return cls(*(float(v) for v in a))


@dataclass(frozen=True)
class Spin2Generators:
    """Real antisymmetric 5x5 rotation generators of the alignment basis."""

    gx: np.ndarray
    gy: np.ndarray
    gz: np.ndarray

    def contract(self, bx, by, bz) -> np.ndarray:
        """B.G for scalar field components."""
        return bx * self.gx + by * self.gy + bz * self.gz


def build_spin2_generators() -> Spin2Generators:
    """Construct the spin-2 generators in the (m0c, m1c, m1s, m2c, m2s) basis.

    Built from the complex j=2 angular momentum matrices (ladder coefficients
    sqrt(6 - q(q+-1))) transformed to the real basis; the results satisfy
    cyclic commutators [gx, gy] = gz and Casimir gx^2+gy^2+gz^2 = -6 I.
    """
    q = np.arange(-2, 3)
    jz = np.diag(q).astype(complex)
    jp = np.zeros((5, 5), dtype=complex)
    for i in range(4):
        jp[i + 1, i] = math.sqrt(6.0 - q[i] * (q[i] + 1))
    jm = jp.conj().T
    jx = (jp + jm) / 2.0
    jy = (jp - jm) / 2.0j

    # rows: real components; columns: rho_q ordered q = -2..2
    s = 1.0 / math.sqrt(2.0)
    u = np.zeros((5, 5), dtype=complex)
    u[0, 2] = 1.0
    u[1, 3], u[1, 1] = s, -s            # m1c = (rho_1 - rho_-1)/sqrt2
    u[2, 3], u[2, 1] = 1j * s, 1j * s   # m1s = i(rho_1 + rho_-1)/sqrt2
    u[3, 4], u[3, 0] = s, s             # m2c
    u[4, 4], u[4, 0] = 1j * s, -1j * s  # m2s

    def to_real(j):
        g = u @ (-1j * j) @ u.conj().T
        if np.abs(g.imag).max() > 1e-12:
            raise AssertionError("generator not real in this basis")
        out = g.real.copy()
        out.flags.writeable = False
        return out

    return Spin2Generators(gx=to_real(jx), gy=to_real(jy), gz=to_real(jz))


# Rank-2 pump tensor for linear polarization along x: the q=0 tensor rotated
# from z to x (Wigner d: d200 = -1/2, d2(+-2)0 = sqrt(3/8), times the sqrt(2)
# basis normalization on the cosine components).  Unit Euclidean norm.
ALIGNMENT_PUMP_X = np.array([-0.5, 0.0, 0.0, math.sqrt(3.0) / 2.0, 0.0])
ALIGNMENT_PUMP_X.flags.writeable = False


def alignment_signal_shape(bx, by, bz):
    """Closed-form alignment coherence lineshape on dimensionless fields.

    Array-friendly: accepts scalars or broadcastable arrays.  This is the
    exact steady-state m2s observable of the rank-2 linear model, up to a
    single calibration scalar.
    """
    bx = np.asarray(bx, dtype=float)
    by = np.asarray(by, dtype=float)
    bz = np.asarray(bz, dtype=float)
    bx2 = bx * bx
    byz2 = by * by + bz * bz
    num = bz * (1.0 + 4.0 * bx2 + byz2) - bx * by * (1.0 + 4.0 * bx2 - 2.0 * byz2)
    den = (4.0 * bx2 + 4.0 * byz2 + 1.0) * (bx2 + byz2 + 1.0)
    return num / den


def alignment_signal_closed_form(b: NormalizedField) -> float:
    """Closed-form alignment signal for a normalized field point."""
    return float(alignment_signal_shape(b.bx, b.by, b.bz))


def orientation_steady_state(B: FieldVector, p: EnsembleParams) -> OrientationMoment:
    """Steady state of dM/dt = gamma M x B - Gamma (M - m0 * pump_axis).

    Equivalent linear system: (Gamma I + gamma [B]_x) M = Gamma m0 pump_axis,
    with [B]_x the cross-product matrix of B.
    """
    w = p.gamma_rad * B.as_array()
    a = p.relax_rate * np.eye(3) + np.array([
        [0.0, -w[2], w[1]],
        [w[2], 0.0, -w[0]],
        [-w[1], w[0], 0.0],
    ])
    m = np.linalg.solve(a, p.relax_rate * p.m0 * np.asarray(p.pump_axis, dtype=float))
    return OrientationMoment(*m)


def orientation_steady_state_grid(bx, by, bz, p: EnsembleParams) -> np.ndarray:
    """Vectorized orientation steady state; returns shape (..., 3).

    Uses the closed inverse of (aI + [w]_x):
    M = m0 (Gamma^2 v - Gamma w x v + (w.v) w) / (Gamma^2 + |w|^2), v = pump.
    """
    g = p.gamma_rad
    w = np.stack(np.broadcast_arrays(g * np.asarray(bx, float),
                                     g * np.asarray(by, float),
                                     g * np.asarray(bz, float)), axis=-1)
    v = np.asarray(p.pump_axis, dtype=float)
    gam = p.relax_rate
    wv = w @ v
    num = gam**2 * v - gam * np.cross(w, np.broadcast_to(v, w.shape)) + wv[..., None] * w
    return p.m0 * num / (gam**2 + np.sum(w * w, axis=-1))[..., None]


def alignment_steady_state(B: FieldVector, p: EnsembleParams,
                           g: Spin2Generators) -> AlignmentMultipole:
    """Steady state of the rank-2 moment under field B with x-aligned pump.

    Solves (gamma B.G + Gamma I) m = Gamma a0 p_x.  The sign of the precession
    term (multipole components transform contragrediently) is frozen by the
    closed-form equivalence test.
    """
    gam = p.alignment_relax_rate
    a = p.gamma_rad * g.contract(B.bx, B.by, B.bz) + gam * np.eye(5)
    m = np.linalg.solve(a, gam * p.a0 * ALIGNMENT_PUMP_X)
    return AlignmentMultipole.from_array(m)


def alignment_steady_state_grid(bx, by, bz, p: EnsembleParams,
                                g: Spin2Generators) -> np.ndarray:
    """Vectorized alignment steady state; returns shape (..., 5)."""
    bx, by, bz = np.broadcast_arrays(np.asarray(bx, float), np.asarray(by, float),
                                     np.asarray(bz, float))
    gal = p.alignment_relax_rate
    a = (p.gamma_rad * (bx[..., None, None] * g.gx + by[..., None, None] * g.gy
                        + bz[..., None, None] * g.gz)
         + gal * np.eye(5))
    rhs = np.broadcast_to(gal * p.a0 * ALIGNMENT_PUMP_X, bx.shape + (5,))
    return np.linalg.solve(a, rhs[..., None])[..., 0]


# Scalar c with c * m2s == alignment_signal_shape for the conventions above
# (a0 = 1): the single calibration scalar of the equivalence test.
ALIGNMENT_SIGNAL_CALIBRATION = -1.0 / math.sqrt(3.0)


@dataclass(frozen=True)
class SignalMix:
    """Mixing coefficients turning moments into photodetector-like signals."""

    c_al: float = 1.0        # alignment coherence -> S_B
    c_or: float = 0.0        # orientation M_z -> S_B (circular birefringence)
    c_t: float = 1.0         # alignment m0c -> S_T (absorption)
    baseline_t: float = 0.0
    baseline_b: float = 0.0


def signals_from_state(m1: OrientationMoment, m2: AlignmentMultipole,
                       mix: SignalMix) -> tuple[float, float]:
    """Photocurrent-like (S_T, S_B) pair from the two moments."""
    st = mix.baseline_t + mix.c_t * m2.m0c
    sb = mix.baseline_b + mix.c_al * m2.coherence_signal + mix.c_or * m1.mz
    return st, sb


def experiment_signal_mix(by_eff_norm: float = 0.1) -> SignalMix:
    """Signal mixing at the experiment's scale (microamp units).

    Transmission baseline ~6 uA with the alignment dip riding on it; the
    alignment S_B swing is ~0.3 uA for the given normalized effective B_y.
    ``by_eff_norm`` is the dimensionless transverse field that sets the
    symmetric-signal amplitude the 0.3 uA is referred to.
    """
    # peak of |m2s| over bx at (by, 0): |calibration| * max |shape|
    bx = np.linspace(-5.0, 5.0, 4001)
    peak = np.max(np.abs(alignment_signal_shape(bx, by_eff_norm, 0.0)))
    peak /= abs(ALIGNMENT_SIGNAL_CALIBRATION)
    c_al = 0.3 / peak
    # m0c equilibrium is -a0/2; baseline_t set so S_T sits at 6 uA
    return SignalMix(c_al=c_al, c_or=0.3, c_t=1.0, baseline_t=6.5, baseline_b=0.0)
