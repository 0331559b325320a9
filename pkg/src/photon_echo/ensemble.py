"""Doppler-broadened ensembles and macroscopic polarization.

The signal is the weighted sum of every atom's 2-3 coherence, normalised so
that the free-induction peak after the first pulse equals one.  Sums over
atoms use a fixed pairwise tree so results do not depend on how the atoms
were split between workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .bloch import C_LIGHT, AtomContext, Propagator, Schedule, Trajectory, choose_dt
from .model import PulseSequence, SystemParams, Transition, from_real, ground_state, to_real

SCHEMES = ("uniform_grid", "gauss_hermite", "monte_carlo")
CHUNK = 64


@dataclass(frozen=True)
class EnsembleSpec:
    """How the Doppler distribution is sampled.

    ``sigma_doppler`` is the standard deviation of the 1-2 detuning.  For the
    grid schemes with ``ratio_lock`` off the 2-3 detunings are sampled on an
    independent axis and the ensemble is the tensor product (n_atoms**2
    members).  ``t_star`` defaults to the half-width implied by
    ``sigma_doppler``.
    """

    n_atoms: int
    sigma_doppler: float
    scheme: str = "uniform_grid"
    seed: int = 0
    ratio_lock: bool = True
    t_star: float | None = None
    grid_halfwidth: float = 5.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.n_atoms < 1:
            raise ValueError("n_atoms must be >= 1")
        if not self.sigma_doppler >= 0:
            raise ValueError("sigma_doppler must be >= 0")


@dataclass(frozen=True)
class EnsembleSample:
    ctx: AtomContext
    weights: np.ndarray

    def __len__(self):
        return len(self.weights)

    def __iter__(self):
        d12 = np.broadcast_to(self.ctx.delta12, self.weights.shape)
        d23 = np.broadcast_to(self.ctx.delta23, self.weights.shape)
        v = np.broadcast_to(self.ctx.velocity, self.weights.shape)
        for a, b, c, w in zip(d12, d23, v, self.weights):
            yield AtomContext(float(a), float(b), float(c)), float(w)


@dataclass(frozen=True)
class SignalTrace:
    t_grid: np.ndarray
    polarization: np.ndarray
    intensity: np.ndarray = field(default=None)

    def __post_init__(self):
        t = np.asarray(self.t_grid, dtype=float)
        p = np.asarray(self.polarization, dtype=complex)
        object.__setattr__(self, "t_grid", t)
        object.__setattr__(self, "polarization", p)
        object.__setattr__(self, "intensity", p.real ** 2 + p.imag ** 2)

    @property
    def dt(self) -> float:
        return float(self.t_grid[1] - self.t_grid[0]) if len(self.t_grid) > 1 else 0.0


def _axis(n, halfwidth, scheme):
    if scheme == "uniform_grid":
        if n == 1:
            return np.zeros(1), np.ones(1)
        x = np.linspace(-halfwidth, halfwidth, n)
        w = np.exp(-0.5 * x ** 2)
        return x, w / w.sum()
    x, w = np.polynomial.hermite_e.hermegauss(n)
    return x, w / w.sum()


def sample_detunings(spec: EnsembleSpec, params: SystemParams) -> EnsembleSample:
    """Place or draw the per-atom Doppler detunings.

    delta12 follows N(0, sigma^2); with the ratio lock delta23 is
    delta12 * omega23 / omega12, otherwise it is independent with standard
    deviation sigma * omega23 / omega12.
    """
    if spec.n_atoms < 1:
        raise ValueError("n_atoms must be >= 1")
    s12 = spec.sigma_doppler
    k = params.omega23 / params.omega12
    if spec.scheme == "monte_carlo":
        rng = np.random.default_rng(spec.seed)
        x = rng.standard_normal(spec.n_atoms)
        d12 = s12 * x
        if spec.ratio_lock:
            d23 = d12 * k
        else:
            d23 = s12 * k * rng.standard_normal(spec.n_atoms)
        w = np.full(spec.n_atoms, 1.0 / spec.n_atoms)
    else:
        x, w = _axis(spec.n_atoms, spec.grid_halfwidth, spec.scheme)
        d12 = s12 * x
        if spec.ratio_lock:
            d23 = d12 * k
        else:
            d12, d23 = [a.ravel() for a in np.meshgrid(s12 * x, s12 * k * x, indexing="ij")]
            w = np.outer(w, w).ravel()
            w = w / w.sum()
    velocity = d12 * C_LIGHT / params.omega12
    return EnsembleSample(AtomContext(d12, d23, velocity), w)


def t_star_from_sigma(sigma23: float) -> float:
    """Half-width of the echo envelope exp(-((t - tc) / T*)^2) for a Gaussian spread."""
    return math.sqrt(2.0) / sigma23


def pairwise_sum(a: np.ndarray) -> np.ndarray:
    """Sum along axis 0 with a fixed pairwise tree."""
    a = np.asarray(a)
    while a.shape[0] > 1:
        n = a.shape[0]
        head = a[0:n - 1:2] + a[1:n:2]
        a = np.concatenate([head, a[n - 1:]]) if n % 2 else head
    return a[0]


def first_pulse_window(seq: PulseSequence) -> tuple[float, float]:
    """Free-induction interval after the first pulse group."""
    first = seq.pulses[0]
    group = [p for p in seq.pulses if p.start == first.start]
    t_a = max(p.end for p in group)
    later = [p.start for p in seq.pulses if p.start >= t_a]
    t_b = min(later) if later else seq.t_end
    return t_a, t_b


def _p0(t_grid, s12, s23, seq: PulseSequence | None):
    if seq is None or not seq.pulses:
        return 1.0
    t_a, t_b = first_pulse_window(seq)
    mask = (t_grid >= t_a) & (t_grid < t_b)
    if not mask.any():
        return 1.0
    peak = max(float(np.max(np.abs(s12[mask]))), float(np.max(np.abs(s23[mask]))))
    return peak if peak > 0 else 1.0


def accumulate_polarization(trajectories: Sequence[Trajectory], weights, seq: PulseSequence | None = None,
                            normalize: bool = True) -> SignalTrace:
    """P(t) = sum_i w_i rho23_i(t), scaled so the first free-induction peak is 1."""
    if not trajectories:
        raise ValueError("no trajectories")
    t = trajectories[0].t_grid
    for tr in trajectories[1:]:
        if tr.t_grid.shape != t.shape or not np.array_equal(tr.t_grid, t):
            raise ValueError("trajectories do not share one time grid")
    w = np.asarray(weights, dtype=float)
    states = np.stack([tr.states for tr in trajectories])
    s23 = pairwise_sum(w[:, None] * states[:, :, 1, 2])
    s12 = pairwise_sum(w[:, None] * states[:, :, 0, 1])
    p0 = _p0(t, s12, s23, seq) if normalize else 1.0
    return SignalTrace(t, s23 / p0)


@dataclass
class EnsembleRun:
    trace: SignalTrace
    p0: float
    n_atoms: int
    dt: float
    sample_dt: float
    trace_min: float
    min_eigenvalue: float
    coherence12: np.ndarray


def _run_chunk(params, seq, ctx, schedule, rho0):
    prop = Propagator(params, seq, ctx, schedule)
    n = np.broadcast(np.asarray(ctx.delta12), np.asarray(ctx.delta23)).shape[0]
    x0 = np.broadcast_to(to_real(rho0), (n, 9))
    S = schedule.n_samples
    c12 = np.empty((n, S), dtype=complex)
    c23 = np.empty((n, S), dtype=complex)
    tr_min = math.inf
    eig_min = math.inf
    for m, x in enumerate(prop.run(x0)):
        c12[:, m] = x[:, 3] + 1j * x[:, 4]
        c23[:, m] = x[:, 7] + 1j * x[:, 8]
        tr_min = min(tr_min, float(np.min(x[:, 0] + x[:, 1] + x[:, 2])))
        if m % 16 == 0:
            eig_min = min(eig_min, float(np.min(np.linalg.eigvalsh(from_real(x)))))
    return c12, c23, tr_min, eig_min


def simulate_ensemble(params: SystemParams, seq: PulseSequence, spec: EnsembleSpec,
                      sample_dt: float = 5e-14, workers: int = 1, rho0=None,
                      sample: EnsembleSample | None = None) -> EnsembleRun:
    """Integrate every ensemble member and accumulate the macroscopic signal.

    Atoms are integrated in fixed chunks of 64 which may run on ``workers``
    threads; the reduction order never depends on the worker count.
    """
    sample = sample or sample_detunings(spec, params)
    rho0 = ground_state() if rho0 is None else np.asarray(rho0, dtype=complex)
    d12 = np.atleast_1d(np.asarray(sample.ctx.delta12, dtype=float))
    d23 = np.atleast_1d(np.asarray(sample.ctx.delta23, dtype=float))
    full = AtomContext(d12, d23).shifted(seq.frame_detuning(Transition.PROBE_12),
                                         seq.frame_detuning(Transition.COUPLING_23))
    dt, stride = choose_dt(seq, params, full, sample_dt)
    schedule = Schedule(seq, dt, stride)
    bounds = [(i, min(i + CHUNK, len(d12))) for i in range(0, len(d12), CHUNK)]
    jobs = [AtomContext(d12[a:b], d23[a:b]) for a, b in bounds]

    def work(ctx):
        return _run_chunk(params, seq, ctx, schedule, rho0)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(c) for c in jobs]
    c12 = np.concatenate([r[0] for r in results])
    c23 = np.concatenate([r[1] for r in results])
    w = sample.weights[:, None]
    s12 = pairwise_sum(w * c12)
    s23 = pairwise_sum(w * c23)
    p0 = _p0(schedule.t_grid, s12, s23, seq)
    trace = SignalTrace(schedule.t_grid, s23 / p0)
    return EnsembleRun(trace=trace, p0=p0, n_atoms=len(d12), dt=dt, sample_dt=dt * stride,
                       trace_min=min(r[2] for r in results), min_eigenvalue=min(r[3] for r in results),
                       coherence12=s12 / p0)


# --- analytic oracle ----------------------------------------------------------

def analytic_envelope(t, t0: float, t12: float, params: SystemParams, t_star: float,
                      p0: float = 1.0, form: str = "gaussian"):
    """Echo envelope centred on t0 + (omega12 / omega23) t12.

    ``form="gaussian"`` gives p0 exp(-((t - tc) / t_star)^2), so the value at
    tc +- t_star is p0 / e.  ``form="literal"`` gives the signed exponential
    p0 exp(-(t - tc) / t_star), which grows without bound before the centre.
    """
    if not t_star > 0:
        raise ValueError("t_star must be positive")
    tc = t0 + params.omega12 / params.omega23 * t12
    x = (np.asarray(t, dtype=float) - tc) / t_star
    if form == "gaussian":
        return p0 * np.exp(-x ** 2)
    if form == "literal":
        return p0 * np.exp(-x)
    raise ValueError("form must be 'gaussian' or 'literal'")


class Distribution:
    """Detuning density f(x) for the ensemble average.

    ``pdf`` may accept complex arguments when the density is analytic; then
    the Fourier integral is taken along a line shifted into the complex plane
    by ``shift(tau)``, which avoids cancellation for large sigma * tau.  An
    optional ``logpdf`` lets the shifted integrand be formed in log space so
    huge and tiny factors never meet in floating point.
    """

    def __init__(self, pdf: Callable, width: float, shift: Callable | None = None,
                 logpdf: Callable | None = None):
        self.pdf = pdf
        self.width = width
        self.shift = shift or (lambda tau: 0.0)
        self.logpdf = logpdf


class GaussianDistribution(Distribution):
    def __init__(self, sigma: float):
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        self.sigma = sigma
        lognorm = -0.5 * math.log(2 * math.pi * sigma ** 2)
        super().__init__(lambda z: np.exp(lognorm - z ** 2 / (2 * sigma ** 2)), sigma,
                         lambda tau: tau * sigma ** 2,
                         lambda z: lognorm - z ** 2 / (2 * sigma ** 2))


class DeltaDistribution(Distribution):
    def __init__(self):
        super().__init__(None, 0.0)


def gaussian_average_integral(t, f: Distribution, t12: float = 0.0, p0: float = 1.0,
                              rtol: float = 1e-8) -> float:
    """-p0 * integral of cos(x (t - t12)) f(x) dx.

    The window is at least six widths wide and is doubled until the result
    changes by less than ``rtol``.
    """
    tau = float(t) - t12
    if isinstance(f, DeltaDistribution):
        return -p0
    w = f.width
    lim = 6.0 * w
    mass, _ = integrate.quad(lambda x: float(np.real(f.pdf(x))), -lim * 2, lim * 2,
                             epsabs=0, epsrel=1e-12, limit=200)
    if abs(mass - 1.0) > 1e-8:
        raise ValueError(f"distribution not normalized (mass {mass:.12g})")
    y = f.shift(tau)

    def integrand(u):
        z = u + 1j * y
        if f.logpdf is not None:
            return float(np.real(np.exp(1j * tau * z + f.logpdf(z))))
        return float(np.real(np.exp(1j * tau * z) * f.pdf(z)))

    def window(half):
        if y == 0.0 and tau != 0.0:
            # oscillatory along the real axis: let quad know the period
            return integrate.quad(integrand, -half, half, epsabs=0, epsrel=1e-12,
                                  limit=max(200, int(4 * half * abs(tau)) + 50))[0]
        return integrate.quad(integrand, -half, half, epsabs=0, epsrel=1e-12, limit=200)[0]

    prev = window(lim)
    for _ in range(8):
        lim *= 2
        cur = window(lim)
        if abs(cur - prev) <= rtol * abs(cur) or cur == prev:
            return -p0 * cur
        prev = cur
    return -p0 * prev
