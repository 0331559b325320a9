"""Single-atom density-matrix dynamics: right-hand side and RK4 propagation.

Two forms of the coherent coupling terms are available through
``SystemParams.coupling_form``:

``"verbatim"``
    The six element equations in their literal form, with the undefined
    detuning of the third level taken as zero.  The remaining three elements
    follow by conjugation.  This form has no probe coupling in the level-2
    population equation and does not conserve trace even without relaxation.

``"corrected"`` (default)
    Coherent terms come from -i[H, rho] with the rotating-frame Hamiltonian::

        H = [[ E1,    -g_p,   0   ],
             [-g_p*,   0,    -G_c ],
             [ 0,     -G_c*,  E3  ]]

    where ``E1 = delta12`` and ``E3 = delta23 + d``.  Relaxation, pumping and
    the ``V`` terms are the same in both forms.

In the infinite-splitting mode the 1-3 coherence is held at zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import (
    PulseSequence,
    SystemParams,
    Transition,
    from_real,
    hermitian_basis,
    hermitize,
    to_real,
)

C_LIGHT = 299_792_458.0

# Indices of (Re rho13, Im rho13) in the real coordinate vector.
_RHO13 = (5, 6)


@dataclass(frozen=True)
class AtomContext:
    """Per-atom detunings (rad/s).  Values may be arrays for a batch of atoms."""

    delta12: float | np.ndarray = 0.0
    delta23: float | np.ndarray = 0.0
    velocity: float | np.ndarray = 0.0

    def shifted(self, probe: float, coupling: float) -> "AtomContext":
        if probe == 0.0 and coupling == 0.0:
            return self
        return replace(self, delta12=self.delta12 + probe, delta23=self.delta23 + coupling)


@dataclass(frozen=True)
class Fields:
    """Couplings active at one instant."""

    g_p: complex = 0.0
    G_c: complex = 0.0
    v_on: bool = False

    @property
    def strength(self) -> float:
        return max(abs(self.g_p), abs(self.G_c))


@dataclass(frozen=True)
class Trajectory:
    t_grid: np.ndarray
    states: np.ndarray  # (n_samples, 3, 3)


def _rhs(rho, params: SystemParams, fields: Fields, ctx: AtomContext):
    r = rho
    g = fields.g_p
    G = fields.G_c
    gc, Gc = np.conj(g), np.conj(G)
    V = params.V if fields.v_on else 0.0
    lam = params.lambda_pump
    g1, g2, g3 = params.gamma1, params.gamma2, params.gamma3
    inf_d = params.d_infinite
    d = 0.0 if inf_d else params.d_split
    d1 = np.asarray(ctx.delta12, dtype=float)
    d2 = np.asarray(ctx.delta23, dtype=float)

    r11, r22, r33 = r[..., 0, 0], r[..., 1, 1], r[..., 2, 2]
    r12, r13, r23 = r[..., 0, 1], r[..., 0, 2], r[..., 1, 2]
    r21, r31, r32 = r[..., 1, 0], r[..., 2, 0], r[..., 2, 1]
    if inf_d:
        r13 = r31 = np.zeros_like(r12)
    vmix = V * (r31 + r13)

    if params.coupling_form == "verbatim":
        delta3 = 0.0
        dr11 = -2 * g1 * r11 + 2 * lam * r22 - vmix + 1j * g * r21 - 1j * gc * r12
        dr22 = -2 * g2 * r22 - vmix + 1j * G * r23 - 1j * Gc * r32
        dr33 = -2 * g3 * r33 + 2 * lam * r22 - vmix + 1j * G * r12 - 1j * Gc * r21
        dr12 = -(g1 + lam + 1j * d1) * r12 - V * r23 + 1j * g * (r22 - r11) - G * r13
        dr13 = -(g1 + g3 + 1j * (delta3 - d1 - d)) * r13 + 1j * g * r32 - 1j * Gc * r23
        dr23 = (-(g2 + lam - 1j * (delta3 - d2 - d)) * r23 - V * r13 - 1j * g * r21
                + 1j * G * (r33 - r22))
    else:
        e1 = d1
        e3 = d2 + d
        # -i[H, rho] for the Hamiltonian in the module docstring.
        dr11 = 1j * g * r21 - 1j * gc * r12
        dr22 = 1j * gc * r12 - 1j * g * r21 + 1j * G * r32 - 1j * Gc * r23
        dr33 = 1j * Gc * r23 - 1j * G * r32
        dr12 = -1j * e1 * r12 + 1j * g * (r22 - r11) - 1j * Gc * r13
        dr13 = -1j * (e1 - e3) * r13 + 1j * g * r23 - 1j * G * r12
        dr23 = 1j * e3 * r23 + 1j * G * (r33 - r22) + 1j * gc * r13
        dr11 = dr11 - 2 * g1 * r11 + 2 * lam * r22 - vmix
        dr22 = dr22 - 2 * g2 * r22 - vmix
        dr33 = dr33 - 2 * g3 * r33 + 2 * lam * r22 - vmix
        dr12 = dr12 - (g1 + lam) * r12 - V * r23
        dr13 = dr13 - (g1 + g3) * r13
        dr23 = dr23 - (g2 + lam) * r23 - V * r13

    if inf_d:
        dr13 = np.zeros_like(dr12)
    shape = np.broadcast(r11, dr12, dr23).shape
    out = np.empty(shape + (3, 3), dtype=complex)
    out[..., 0, 0] = np.real(dr11)
    out[..., 1, 1] = np.real(dr22)
    out[..., 2, 2] = np.real(dr33)
    out[..., 0, 1] = dr12
    out[..., 0, 2] = dr13
    out[..., 1, 2] = dr23
    out[..., 1, 0] = np.conj(dr12)
    out[..., 2, 0] = np.conj(dr13)
    out[..., 2, 1] = np.conj(dr23)
    return out


def rhs(rho, params: SystemParams, fields: Fields, ctx: AtomContext, t: float | None = None):
    """Time derivative of ``rho`` (shape ``(..., 3, 3)``).

    The six independent element equations are evaluated and the other three
    filled by conjugation.  ``t`` is accepted for interface symmetry; the
    equations have no explicit time dependence inside a pulse.
    """
    rho = np.asarray(rho, dtype=complex)
    if params.d_infinite and np.any(np.abs(rho[..., 0, 2]) > 0):
        raise ValueError("infinite d_split requires rho13 = 0")
    return _rhs(rho, params, fields, ctx)


def liouvillian(params: SystemParams, fields: Fields, ctx: AtomContext) -> np.ndarray:
    """Real matrix L with d/dt to_real(rho) = L @ to_real(rho).

    Shape is ``(..., 9, 9)`` following the broadcast shape of the context
    arrays.  The equations are real-linear on Hermitian matrices, so L is
    assembled column by column from the Hermitian basis.
    """
    basis = hermitian_basis()
    shape = np.broadcast(np.asarray(ctx.delta12), np.asarray(ctx.delta23)).shape
    cols = []
    for k in range(9):
        e = np.broadcast_to(basis[k], shape + (3, 3))
        if params.d_infinite and k in _RHO13:
            cols.append(np.zeros(shape + (9,)))
            continue
        cols.append(to_real(_rhs(e, params, fields, ctx)))
    return np.stack(cols, axis=-1)


def rk4_propagator(L: np.ndarray, dt: float) -> np.ndarray:
    """One classical RK4 step for x' = L x, written as a matrix polynomial."""
    A = dt * L
    eye = np.broadcast_to(np.eye(L.shape[-1]), L.shape)
    A2 = A @ A
    A3 = A2 @ A
    A4 = A3 @ A
    return eye + A + A2 / 2.0 + A3 / 6.0 + A4 / 24.0


def dt_max(params: SystemParams, ctx: AtomContext, g0: float = 0.0) -> float:
    """Largest permitted RK4 step: (1/50) over the fastest frequency scale.

    The scale is the largest of |delta12|, |delta23|, |delta23 + d|, g0, the
    finite splitting d, |V| and every rate.  When all of them are zero the
    bound is infinite.
    """
    d = 0.0 if params.d_infinite else params.d_split
    d1 = np.abs(np.asarray(ctx.delta12, dtype=float))
    d2 = np.asarray(ctx.delta23, dtype=float)
    scales = [
        float(np.max(d1)) if d1.size else 0.0,
        float(np.max(np.abs(d2))) if d2.size else 0.0,
        float(np.max(np.abs(d2 + d))) if d2.size else 0.0,
        abs(g0),
        d,
        abs(params.V),
        *params.rates().values(),
    ]
    top = max(scales)
    return math.inf if top == 0.0 else (1.0 / 50.0) / top


def step_rk4(rho, t: float, dt: float, params: SystemParams, fields: Fields, ctx: AtomContext):
    """Classical fourth-order Runge-Kutta step followed by hermitization."""
    limit = dt_max(params, ctx, fields.strength)
    if not dt > 0:
        raise ValueError("dt must be positive")
    if dt > limit * (1 + 1e-12):
        raise ValueError(f"step too large: dt={dt:.3e} > dt_max={limit:.3e}")
    rho = np.asarray(rho, dtype=complex)
    k1 = rhs(rho, params, fields, ctx, t)
    k2 = _rhs(rho + 0.5 * dt * k1, params, fields, ctx)
    k3 = _rhs(rho + 0.5 * dt * k2, params, fields, ctx)
    k4 = _rhs(rho + dt * k3, params, fields, ctx)
    return hermitize(rho + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))


# --- pulse schedule ---------------------------------------------------------

def _fields_for(seq: PulseSequence, key) -> Fields:
    ip, ic = key
    g = seq.pulses[ip].rabi if ip is not None else 0.0
    G = seq.pulses[ic].rabi if ic is not None else 0.0
    return Fields(g_p=g, G_c=G, v_on=(ip is not None or ic is not None))


class Schedule:
    """Uniform step grid over a pulse sequence.

    Step k starts at ``t_start + k * dt``; a pulse is active for the step if
    that start lies in ``[start, start + duration)``.  Pulse edges are thus
    snapped to the step grid.
    """

    def __init__(self, seq: PulseSequence, dt: float, sample_stride: int = 1):
        if sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")
        self.seq = seq
        self.dt = dt
        self.stride = int(sample_stride)
        span = (seq.t_end - seq.t_start) / dt
        self.n_steps = int(math.ceil(span - 1e-9))
        self.n_samples = self.n_steps // self.stride + 1
        self.t_grid = seq.t_start + dt * self.stride * np.arange(self.n_samples)
        self._edges = []
        for i, p in enumerate(seq.pulses):
            kb = int(math.ceil((p.start - seq.t_start) / dt - 1e-9))
            ke = int(math.ceil((p.end - seq.t_start) / dt - 1e-9))
            self._edges.append((i, p.transition, kb, ke))

    def key_at(self, k: int):
        ip = ic = None
        for i, tr, kb, ke in self._edges:
            if kb <= k < ke:
                if tr == Transition.PROBE_12:
                    ip = i
                else:
                    ic = i
        return ip, ic

    def segments(self, k0: int, k1: int):
        """Runs of identical field configuration covering steps [k0, k1)."""
        cuts = {k0, k1}
        for _, _, kb, ke in self._edges:
            for k in (kb, ke):
                if k0 < k < k1:
                    cuts.add(k)
        cuts = sorted(cuts)
        return [(self.key_at(a), b - a) for a, b in zip(cuts, cuts[1:])]

    def max_rabi(self) -> float:
        return max((p.rabi_amplitude for p in self.seq.pulses), default=0.0)


def choose_dt(seq: PulseSequence, params: SystemParams, ctx: AtomContext, sample_dt: float | None = None):
    """Pick (dt, stride): dt <= dt_max and, if given, stride * dt == sample_dt."""
    g0 = max((p.rabi_amplitude for p in seq.pulses), default=0.0)
    limit = dt_max(params, ctx, g0)
    if sample_dt is not None:
        stride = max(1, int(math.ceil(sample_dt / limit - 1e-12))) if math.isfinite(limit) else 1
        return sample_dt / stride, stride
    base = min((p.duration for p in seq.pulses), default=seq.t_end - seq.t_start)
    n = max(1, int(math.ceil(base / limit - 1e-12))) if math.isfinite(limit) else 1
    return base / n, 1


class Propagator:
    """Advance a batch of atoms sample by sample with cached RK4 step matrices."""

    def __init__(self, params: SystemParams, seq: PulseSequence, ctx: AtomContext, schedule: Schedule):
        self.params = params
        self.seq = seq
        self.ctx = ctx.shifted(seq.frame_detuning(Transition.PROBE_12),
                               seq.frame_detuning(Transition.COUPLING_23))
        self.schedule = schedule
        limit = dt_max(params, self.ctx, schedule.max_rabi())
        if schedule.dt > limit * (1 + 1e-12):
            raise ValueError(f"step too large: dt={schedule.dt:.3e} > dt_max={limit:.3e}")
        self._step = {}
        self._power = {}

    def _step_matrix(self, key):
        if key not in self._step:
            L = liouvillian(self.params, _fields_for(self.seq, key), self.ctx)
            self._step[key] = rk4_propagator(L, self.schedule.dt)
        return self._step[key]

    def _matrix(self, key, n):
        if (key, n) not in self._power:
            self._power[(key, n)] = np.linalg.matrix_power(self._step_matrix(key), n)
        return self._power[(key, n)]

    def run(self, x0: np.ndarray):
        """Yield the real state vectors (..., 9) at every sample, starting with x0."""
        x = np.array(x0, dtype=float)
        yield x
        s = self.schedule.stride
        for m in range(1, self.schedule.n_samples):
            for key, n in self.schedule.segments((m - 1) * s, m * s):
                x = np.einsum("...ij,...j->...i", self._matrix(key, n), x)
            yield x


def integrate_sequence(rho0, seq: PulseSequence, params: SystemParams, ctx: AtomContext | None = None,
                       sample_stride: int = 1, dt: float | None = None) -> Trajectory:
    """Integrate one atom through ``seq`` with fixed-step RK4.

    Couplings are on while a pulse is active and off otherwise, so between
    pulses only detuning and relaxation act.
    """
    ctx = ctx or AtomContext()
    rho0 = np.asarray(rho0, dtype=complex)
    if abs(np.trace(rho0) - 1) > 1e-9:
        raise ValueError("rho0 must have unit trace")
    if np.max(np.abs(rho0 - rho0.conj().T)) > 1e-12:
        raise ValueError("rho0 must be Hermitian")
    if params.d_infinite and abs(rho0[0, 2]) > 0:
        raise ValueError("infinite d_split requires rho13 = 0")
    if dt is None:
        dt, _ = choose_dt(seq, params, ctx.shifted(seq.frame_detuning(Transition.PROBE_12),
                                                    seq.frame_detuning(Transition.COUPLING_23)))
    sched = Schedule(seq, dt, sample_stride)
    prop = Propagator(params, seq, ctx, sched)
    xs = np.array(list(prop.run(to_real(rho0))))
    return Trajectory(sched.t_grid, from_real(xs))


def free_phase_shift(level: int, params: SystemParams, velocity: float, t0: float, t12: float, T: float) -> float:
    """Doppler phase picked up by a level during the two emission periods.

    Level 3: (T - t0) (omega12 - omega23) v / c.  Level 2: (v omega12 / c) (T - t12).
    """
    if level == 3:
        return (T - t0) * (params.omega12 - params.omega23) * velocity / C_LIGHT
    if level == 2:
        return velocity * params.omega12 / C_LIGHT * (T - t12)
    raise ValueError("level must be 2 or 3")
