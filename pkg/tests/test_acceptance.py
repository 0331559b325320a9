"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test records a one-line verdict; the lines are printed in the pytest
terminal summary (see conftest.py) and by running this file directly.
"""
import math
import time

import numpy as np
import pytest

from photon_echo.analysis import (
    beat_period,
    detect_echo_peak,
    fit_exponential_decay,
    predict_echo_time,
    theoretical_decay_coefficient,
)
from photon_echo.bloch import AtomContext, Fields, dt_max, integrate_sequence, step_rk4
from photon_echo.ensemble import (
    EnsembleSpec,
    GaussianDistribution,
    gaussian_average_integral,
    simulate_ensemble,
    t_star_from_sigma,
)
from photon_echo.model import (
    D_INFINITE,
    Pulse,
    PulseSequence,
    SystemParams,
    Transition,
    echo_sequence,
    ground_state,
    hermiticity_error,
)
from photon_echo.runner import delay_scan

RESULTS: dict[int, str] = {}

OMEGA = 2.4e15
GAMMA = 1e10  # gamma21 = gamma23 = gamma12
CAP_GAMMA = 1e12
SIGMA = 50 * GAMMA  # Doppler spread of the 1-2 detuning


def preset(ratio=1.0, relax=True, d=0.0):
    rates = dict(gamma1=GAMMA / 2, gamma3=GAMMA / 2) if relax else {}
    return SystemParams(omega12=ratio * OMEGA, omega23=OMEGA, gamma12=GAMMA, capital_gamma=CAP_GAMMA,
                        d_split=d, **rates)


def record(n, name, ok, detail):
    RESULTS[n] = f"criterion {n} ({name}): {'PASS' if ok else 'FAIL'}  {detail}"
    return ok


def echo_window(seq, params, sigma=SIGMA, k=4.0):
    T = predict_echo_time(seq.t0, seq.t12, params.omega12, params.omega23)
    half = k * t_star_from_sigma(sigma / params.ratio)
    return T, (T - half, T + half)


def test_criterion_1_echo_timing():
    t12 = 20e-12
    worst, slowest, ok = 0.0, 0.0, True
    for ratio in (1.0, 1.2, 1.5):
        params = preset(ratio)
        seq = echo_sequence(t12, ratio=ratio)
        t = time.perf_counter()
        run = simulate_ensemble(params, seq, EnsembleSpec(201, SIGMA), sample_dt=5e-14)
        elapsed = time.perf_counter() - t
        T, window = echo_window(seq, params)
        t_det, _ = detect_echo_peak(run.trace, window)
        err = abs(t_det - T) / t12
        worst, slowest = max(worst, err), max(slowest, elapsed)
        ok &= err < 0.02 and elapsed < 60
    assert record(1, "echo timing", ok, f"max |T_det - T| / t12 = {worst:.2e} (< 0.02), "
                                        f"slowest ratio {slowest:.2f} s (< 60 s)")


def test_criterion_2_decay_coefficient():
    params = preset()
    t12s = np.arange(1, 9) * 20e-12
    points = []
    for t12 in t12s:
        seq = echo_sequence(t12)
        run = simulate_ensemble(params, seq, EnsembleSpec(201, SIGMA), sample_dt=5e-14)
        points.append((t12, detect_echo_peak(run.trace, echo_window(seq, params)[1])[1]))
    fit = fit_exponential_decay(points)
    target = theoretical_decay_coefficient(SIGMA, SIGMA / params.ratio, GAMMA)
    rel = abs(abs(fit.a) - target) / target
    assert record(2, "decay coefficient", rel < 0.15,
                  f"|a| = {abs(fit.a):.6e} 1/s vs {target:.1e} 1/s, rel. error {rel:.2e} (< 0.15)")


def test_criterion_3_envelope_oracle():
    worst = 0.0
    for ratio in (1.0, 1.5):
        params = preset(ratio, relax=False)
        seq = echo_sequence(20e-12, ratio=ratio)
        run = simulate_ensemble(params, seq, EnsembleSpec(201, SIGMA), sample_dt=5e-14)
        sigma23 = SIGMA / ratio
        t_star = t_star_from_sigma(sigma23)
        tc = predict_echo_time(seq.t0, seq.t12, params.omega12, params.omega23)
        mask = np.abs(run.trace.t_grid - tc) <= 2 * t_star
        dist = GaussianDistribution(sigma23)
        oracle = np.array([abs(gaussian_average_integral(t, dist, t12=tc)) for t in run.trace.t_grid[mask]])
        rms = float(np.sqrt(np.mean((np.abs(run.trace.polarization[mask]) - oracle) ** 2)))
        worst = max(worst, rms)
    assert record(3, "envelope oracle", worst < 0.03,
                  f"RMS deviation over centre +- 2T* = {worst:.4f} of P0 (< 0.03)")


def _beat_scan(d):
    params = preset(d=d)
    t12s = np.arange(1, 26) * 20e-12
    peaks = []
    for t12 in t12s:
        seq = echo_sequence(t12, coupling_area1=math.pi / 8, probe_area2=math.pi / 4, tail=8e-12)
        run = simulate_ensemble(params, seq, EnsembleSpec(901, SIGMA), sample_dt=2e-13)
        peaks.append(detect_echo_peak(run.trace, echo_window(seq, params, k=2.0)[1])[1])
    return t12s, np.array(peaks)


@pytest.mark.slow
def test_criterion_4_quantum_beats():
    scans = {name: _beat_scan(d) for name, d in
             (("0", 0.0), ("0.05", 0.05 * CAP_GAMMA), ("0.10", 0.10 * CAP_GAMMA), ("inf", D_INFINITE))}
    periods = {k: beat_period(delay_scan(*v)) for k, v in scans.items()}
    p05, p10 = periods["0.05"], periods["0.10"]
    ratio = p10 / p05 if (p05 and p10) else math.nan
    monotone = bool(np.all(np.diff(scans["0"][1]) < 0))
    ok = abs(ratio - 0.5) <= 0.05 * 0.5 and periods["0"] is None and monotone and periods["inf"] is None
    detail = (f"period(0.05) = {_ps(p05)}, period(0.10) = {_ps(p10)}, ratio {ratio:.4f} (0.5 +- 5%); "
              f"d=0 line {_ps(periods['0'])}, monotone decay {monotone}; d=inf line {_ps(periods['inf'])}")
    assert record(4, "quantum beats", ok, detail)


def _ps(p):
    return "none" if p is None else f"{p * 1e12:.2f} ps"


def _rabi_run(g0, dt, n_periods):
    params = SystemParams(omega12=OMEGA, omega23=OMEGA)
    t_end = n_periods * math.pi / g0  # populations oscillate with period pi / g0
    seq = PulseSequence((Pulse(0.0, 2 * t_end, Transition.PROBE_12, g0),), t0=0.0, t12=t_end / 4, t_end=t_end)
    traj = integrate_sequence(ground_state(), seq, params, dt=dt)
    exact = np.cos(g0 * traj.t_grid) ** 2
    return float(np.max(np.abs(traj.states[:, 1, 1].real - exact)))


def test_criterion_5_rabi_oracle():
    g0 = 1e13
    dt = dt_max(SystemParams(omega12=OMEGA, omega23=OMEGA), AtomContext(), g0)
    err = _rabi_run(g0, dt, 10)
    assert record(5, "two-level Rabi oracle", err < 1e-6,
                  f"max |rho22 - cos^2(g0 t)| over 10 periods at dt_max = {err:.3e} (< 1e-6)")


def test_criterion_6_invariants():
    checks = {}

    # Hermiticity after every step, for the stepper and the cached propagator
    params = preset(d=0.05 * CAP_GAMMA)
    seq = echo_sequence(20e-12, coupling_area1=math.pi / 8)
    ctx = AtomContext(2e11, 2e11)
    dt = dt_max(params, ctx, max(p.rabi_amplitude for p in seq.pulses))
    rho, herm = ground_state(), 0.0
    t = 0.0
    while t < seq.t_end:
        p_on = [p for p in seq.on(Transition.PROBE_12) if p.start <= t < p.end]
        c_on = [p for p in seq.on(Transition.COUPLING_23) if p.start <= t < p.end]
        fields = Fields(p_on[0].rabi if p_on else 0.0, c_on[0].rabi if c_on else 0.0, bool(p_on or c_on))
        rho = step_rk4(rho, t, dt, params, fields, ctx)
        herm = max(herm, hermiticity_error(rho))
        t += dt
    traj = integrate_sequence(ground_state(), seq, params, ctx)
    herm = max(herm, hermiticity_error(traj.states))
    checks["hermiticity"] = (herm < 1e-12, f"{herm:.1e}")

    # trace with every rate zero
    free = preset(relax=False, d=0.05 * CAP_GAMMA)
    traj = integrate_sequence(ground_state(), seq, free, ctx)
    drift = float(np.max(np.abs(np.trace(traj.states, axis1=1, axis2=2) - 1)))
    checks["trace drift"] = (drift < 1e-9, f"{drift:.1e}")

    # global order across a decade of step sizes
    g0 = 1e13
    h = dt_max(SystemParams(omega12=OMEGA, omega23=OMEGA), AtomContext(), g0)
    order = _rabi_run(g0, h, 10) / _rabi_run(g0, h / 10, 10)
    checks["dt^4 order"] = (1e4 / 2 <= order <= 1e4 * 2, f"error ratio {order:.0f}")

    # a common phase on every field leaves populations unchanged
    base = integrate_sequence(ground_state(), seq, params, ctx)
    phased_seq = echo_sequence(20e-12, coupling_area1=math.pi / 8, phase_p=0.7, phase_c=0.7)
    phased = integrate_sequence(ground_state(), phased_seq, params, ctx)
    pops = lambda tr: tr.states.diagonal(axis1=1, axis2=2).real  # noqa: E731
    gauge = float(np.max(np.abs(pops(base) - pops(phased))))
    checks["gauge"] = (gauge < 1e-10, f"{gauge:.1e}")

    # byte-identical reruns under different worker counts
    spec = EnsembleSpec(301, SIGMA)
    runs = [simulate_ensemble(params, seq, spec, workers=w).trace.polarization.tobytes() for w in (1, 4, 3)]
    checks["determinism"] = (runs[0] == runs[1] == runs[2], "workers 1/4/3")

    ok = all(v[0] for v in checks.values())
    detail = "; ".join(f"{k} {'ok' if v[0] else 'FAILED'} ({v[1]})" for k, v in checks.items())
    assert record(6, "invariant suite", ok, detail)


def test_criterion_7_gaussian_average():
    sigma = 3.7e11
    worst = 0.0
    for st in np.linspace(0.0, 10.0, 101):
        t = st / sigma
        got = -gaussian_average_integral(t, GaussianDistribution(sigma))
        exact = math.exp(-0.5 * st ** 2)
        worst = max(worst, abs(got - exact) / exact)
    assert record(7, "Gaussian average", worst < 1e-8,
                  f"max relative error over s*t in [0, 10] = {worst:.2e} (< 1e-8)")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
