"""Sweep execution and artifact emission for scenarios."""
from __future__ import annotations

import shutil
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    EchoReport,
    NoPeakError,
    _fmt,
    beat_period,
    detect_echo_peak,
    fit_exponential_decay,
    predict_echo_time,
)
from .config import ConfigError, Scenario, build_sequence, scenario_to_sections
from .ensemble import EnsembleRun, SignalTrace, simulate_ensemble, t_star_from_sigma

TRACE_HEADER = "t_seconds,re_P,im_P,abs_P,intensity"
AGGREGATE_HEADER = "sweep_value,t_echo_detected,t_echo_predicted,peak_intensity"


@dataclass
class PointResult:
    sweep_value: float | None
    run: EnsembleRun
    report: EchoReport


@dataclass
class RunResult:
    points: list[PointResult]
    decay_fit: object
    beat_period: float | None
    files: list[Path]


def trace_csv(trace: SignalTrace) -> str:
    p = trace.polarization
    rows = [TRACE_HEADER]
    for t, z, i in zip(trace.t_grid, p, trace.intensity):
        rows.append(",".join(_fmt(v) for v in (t, z.real, z.imag, abs(z), i)))
    return "\n".join(rows) + "\n"


def read_trace(path) -> SignalTrace:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip()
        if header != TRACE_HEADER:
            raise ValueError(f"{path}: expected header {TRACE_HEADER!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[0] < 2 or data.shape[1] != 5:
        raise ValueError(f"{path}: need at least two rows of five columns")
    return SignalTrace(data[:, 0], data[:, 1] + 1j * data[:, 2])


def delay_scan(t12_values, peaks) -> SignalTrace:
    """Echo peak intensity against delay, packed as a trace for beat analysis."""
    t = np.asarray(t12_values, dtype=float)
    return SignalTrace(t, np.sqrt(np.clip(np.asarray(peaks, dtype=float), 0, None)).astype(complex))


def _uniform(x) -> bool:
    d = np.diff(np.asarray(x, dtype=float))
    return d.size >= 1 and bool(np.allclose(d, d[0], rtol=1e-9, atol=0))


def envelope_halfwidth(sc: Scenario) -> float:
    if sc.ensemble.t_star is not None:
        return sc.ensemble.t_star
    if sc.ensemble.sigma_doppler > 0:
        return t_star_from_sigma(sc.ensemble.sigma_doppler / sc.system.ratio)
    return 1e-12


def simulate_point(sc: Scenario, sweep_value=None) -> PointResult:
    seq = sc.sequence
    run = simulate_ensemble(sc.system, seq, sc.ensemble, sample_dt=sc.sample_dt)
    predicted = predict_echo_time(seq.t0, seq.t12, sc.system.omega12, sc.system.omega23)
    half = sc.search_halfwidth if sc.search_halfwidth is not None else 4 * envelope_halfwidth(sc)
    window = (predicted - half, min(predicted + half, seq.t_end))
    trace = run.trace
    try:
        t_det, peak = detect_echo_peak(trace, window)
        found = True
    except NoPeakError:
        mask = (trace.t_grid >= window[0]) & (trace.t_grid <= window[1])
        t_det, peak, found = None, float(np.max(trace.intensity[mask], initial=0.0)), False
    diag = {
        "echo_found": found,
        "p0": run.p0,
        "dt": run.dt,
        "sample_dt": run.sample_dt,
        "n_atoms": run.n_atoms,
        "trace_min": run.trace_min,
        "min_eigenvalue": run.min_eigenvalue,
        "window_start": window[0],
        "window_end": window[1],
    }
    return PointResult(sweep_value, run, EchoReport(t_det, predicted, peak, diagnostics=diag))


def simulate_sweep(sc: Scenario) -> list[PointResult]:
    """Simulate every sweep point; points run on ``sc.workers`` threads."""
    if not sc.sweep_axis:
        return [simulate_point(sc)]
    values = sc.sweep_si()
    try:
        jobs = [(sc.with_sweep_value(v), v) for v in values]
    except ValueError as exc:
        raise ConfigError(f"[sweep] {exc}") from None
    if sc.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=sc.workers) as pool:
            return list(pool.map(lambda j: simulate_point(*j), jobs))
    return [simulate_point(*j) for j in jobs]


def summarize(sc: Scenario, points: list[PointResult]):
    """Decay fit and beat period over a delay sweep ('insufficient points' below three)."""
    if sc.sweep_axis != "t12":
        return ("not applicable" if sc.sweep_axis else "insufficient points"), None
    x = [p.sweep_value for p in points]
    y = [p.report.peak_intensity for p in points]
    fit = "insufficient points"
    if len(points) >= 3:
        try:
            fit = fit_exponential_decay(list(zip(x, y)))
        except ValueError as exc:
            fit = f"failed: {exc}"
    beats = None
    if len(points) >= 8 and _uniform(x):
        beats = beat_period(delay_scan(x, y))
    return fit, beats


def manifest_text(sc: Scenario, points: list[PointResult], fit, beats, files) -> str:
    lines = ["manifest.version = 1", "code.package = photon_echo", f"code.version = {__version__}",
             f"code.numpy = {np.__version__}"]
    for name, items in scenario_to_sections(sc).items():
        lines.extend(f"config.{name}.{k} = {v}" for k, v in items.items())
    lines.append(f"result.n_points = {len(points)}")
    for i, p in enumerate(points):
        lines.append(f"result.point.{i}.sweep_value = {_fmt(p.sweep_value)}")
        lines.append(f"result.point.{i}.dt = {_fmt(p.run.dt)}")
        lines.append(f"result.point.{i}.sample_dt = {_fmt(p.run.sample_dt)}")
        lines.append(f"result.point.{i}.n_samples = {len(p.run.trace.t_grid)}")
    if hasattr(fit, "a"):
        lines += [f"result.decay_I0 = {_fmt(fit.I0)}", f"result.decay_a = {_fmt(fit.a)}",
                  f"result.decay_residual_rms = {_fmt(fit.residual_rms)}"]
    else:
        lines.append(f"result.decay_fit = {fit}")
    lines.append(f"result.beat_period = {_fmt(beats)}")
    lines.append("result.files = " + ", ".join(files))
    return "\n".join(lines) + "\n"


def _plots(sc: Scenario, points: list[PointResult], stage: Path) -> list[str]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = []
    with matplotlib.rc_context({"svg.hashsalt": "photon-echo", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(7, 4))
        for p in points:
            label = None if p.sweep_value is None else f"{sc.sweep_axis} = {p.sweep_value:.4g}"
            ax.plot(p.run.trace.t_grid * 1e12, p.run.trace.intensity, lw=0.8, label=label)
        ax.set_xlabel("t (ps)")
        ax.set_ylabel("echo intensity |P|^2 / P0^2")
        if len(points) > 1:
            ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(stage / "intensity_vs_time.svg", metadata={"Date": None})
        plt.close(fig)
        names.append("intensity_vs_time.svg")

        if sc.sweep_axis:
            fig, ax = plt.subplots(figsize=(6, 4))
            x = np.array([p.sweep_value for p in points])
            y = np.array([p.report.peak_intensity for p in points])
            xs, xl = (x * 1e12, "t12 (ps)") if sc.sweep_axis == "t12" else (x, "d (rad/s)")
            ax.plot(xs, y, "o-")
            ax.set_xlabel(xl)
            ax.set_ylabel("peak echo intensity")
            if sc.sweep_axis == "t12" and np.all(y > 0):
                ax.set_yscale("log")
            fig.tight_layout()
            fig.savefig(stage / "peak_vs_sweep.svg", metadata={"Date": None})
            plt.close(fig)
            names.append("peak_vs_sweep.svg")
    return names


def run(sc: Scenario, output_dir=None, plots: bool = True) -> RunResult:
    """Simulate the scenario and write traces, reports, aggregate, plots and manifest.

    Files are first written to a staging directory next to the output
    directory and moved into place only once everything succeeded; the
    staging directory is removed on any failure.
    """
    out = Path(output_dir) if output_dir is not None else sc.output_dir
    points = simulate_sweep(sc)
    fit, beats = summarize(sc, points)

    out.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=f".{out.name}.partial-", dir=out.parent))
    try:
        files = []
        agg = [AGGREGATE_HEADER]
        for i, p in enumerate(points):
            name = f"trace_{i:03d}.csv"
            (stage / name).write_text(trace_csv(p.run.trace))
            rep = f"report_{i:03d}.txt"
            (stage / rep).write_text(f"sweep_value = {_fmt(p.sweep_value)}\n" + p.report.to_text())
            files += [name, rep]
            agg.append(p.report.csv_row(p.sweep_value))
        (stage / "aggregate.csv").write_text("\n".join(agg) + "\n")
        files.append("aggregate.csv")
        if hasattr(fit, "a"):
            fit_text = (f"decay_I0 = {_fmt(fit.I0)}\ndecay_a = {_fmt(fit.a)}\n"
                        f"decay_residual_rms = {_fmt(fit.residual_rms)}\n")
        else:
            fit_text = f"decay_fit = {fit}\n"
        (stage / "fit.txt").write_text(fit_text + f"beat_period = {_fmt(beats)}\n")
        files.append("fit.txt")
        if plots:
            files += _plots(sc, points, stage)
        (stage / "manifest.txt").write_text(manifest_text(sc, points, fit, beats, files))
        files.append("manifest.txt")

        out.mkdir(parents=True, exist_ok=True)
        for name in files:
            shutil.move(str(stage / name), str(out / name))
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    return RunResult(points, fit, beats, [out / f for f in files])


# --- polarization modes ---------------------------------------------------------

@dataclass
class ModeComparison:
    phase_difference: float
    peak_offset: float | None
    beat_offset: float | None
    t_echo_equal: list
    t_echo_unequal: list
    peaks_equal: list
    peaks_unequal: list

    def lines(self) -> list[str]:
        return [
            f"phase_difference = {_fmt(self.phase_difference)}",
            f"peak_offset = {_fmt(self.peak_offset)}",
            f"beat_offset = {_fmt(self.beat_offset)}",
            "t_echo_equal = " + ", ".join(_fmt(v) for v in self.t_echo_equal),
            "t_echo_unequal = " + ", ".join(_fmt(v) for v in self.t_echo_unequal),
            "peak_intensity_equal = " + ", ".join(_fmt(v) for v in self.peaks_equal),
            "peak_intensity_unequal = " + ", ".join(_fmt(v) for v in self.peaks_unequal),
        ]


def _with_phases(sc: Scenario, phase_p: float, phase_c: float) -> Scenario:
    if sc.sequence_spec.get("kind", "raman_echo") != "raman_echo":
        raise ConfigError("compare-modes needs [sequence] kind = raman_echo")
    spec = dict(sc.sequence_spec, phase_p=phase_p, phase_c=phase_c)
    return replace(sc, sequence_spec=spec, sequence=build_sequence(spec, sc.system))


def _lag(x, a, b) -> float:
    """Shift s (in units of x) maximizing the overlap of b(x) with a(x - s)."""
    a = np.asarray(a, float) - np.mean(a)
    b = np.asarray(b, float) - np.mean(b)
    if not (np.any(a) and np.any(b)):
        return 0.0
    c = np.correlate(b, a, mode="full")
    k = int(np.argmax(c))
    shift = 0.0
    if 0 < k < len(c) - 1:
        denom = c[k - 1] - 2 * c[k] + c[k + 1]
        shift = 0.5 * (c[k - 1] - c[k + 1]) / denom if denom != 0 else 0.0
    return float((k - (len(a) - 1) + shift) * (x[1] - x[0]))


def compare_modes(sc: Scenario, phase_difference: float | None = None) -> ModeComparison:
    """Equal-phase run (phase_p = phase_c) against phase_p = phase_c + phase_difference.

    The peak offset is the mean difference of detected echo times.  For
    uniform delay sweeps the beat offset is the lag maximizing the
    cross-correlation of the two peak-intensity series.
    """
    dphi = sc.phase_difference if phase_difference is None else phase_difference
    phase_c = float(sc.sequence_spec.get("phase_c", 0.0))
    res = []
    for phase_p in (phase_c, phase_c + dphi):
        res.append(simulate_sweep(_with_phases(sc, phase_p, phase_c)))
    t_eq = [p.report.t_echo_detected for p in res[0]]
    t_un = [p.report.t_echo_detected for p in res[1]]
    pk_eq = [p.report.peak_intensity for p in res[0]]
    pk_un = [p.report.peak_intensity for p in res[1]]
    pairs = [(a, b) for a, b in zip(t_eq, t_un) if a is not None and b is not None]
    peak_offset = float(np.mean([b - a for a, b in pairs])) if pairs else None
    beat_offset = None
    if sc.sweep_axis == "t12" and len(res[0]) >= 3 and _uniform(sc.sweep_si()):
        beat_offset = _lag(sc.sweep_si(), pk_eq, pk_un)
    return ModeComparison(dphi, peak_offset, beat_offset, t_eq, t_un, pk_eq, pk_un)
