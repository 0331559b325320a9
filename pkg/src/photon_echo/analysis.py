"""Echo observables and the closed-form laws they are checked against."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .ensemble import SignalTrace


class NoPeakError(ValueError):
    pass


@dataclass
class EchoReport:
    t_echo_detected: float
    t_echo_predicted: float
    peak_intensity: float
    decay_fit: tuple[float, float] | None = None
    beat_period: float | None = None
    diagnostics: dict = field(default_factory=dict)

    FIELDS = ("t_echo_detected", "t_echo_predicted", "peak_intensity", "decay_I0", "decay_a",
              "beat_period")

    def flat(self) -> dict:
        out = {
            "t_echo_detected": self.t_echo_detected,
            "t_echo_predicted": self.t_echo_predicted,
            "peak_intensity": self.peak_intensity,
            "decay_I0": self.decay_fit[0] if self.decay_fit else None,
            "decay_a": self.decay_fit[1] if self.decay_fit else None,
            "beat_period": self.beat_period,
        }
        for k, v in sorted(self.diagnostics.items()):
            out[f"diag.{k}"] = v
        return out

    def to_text(self) -> str:
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self.flat().items())

    def csv_row(self, sweep_value: float) -> str:
        vals = [sweep_value, self.t_echo_detected, self.t_echo_predicted, self.peak_intensity]
        return ",".join(_fmt(v) for v in vals)


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def predict_echo_time(t0: float, t12: float, omega12: float, omega23: float) -> float:
    """T = t0 + (omega12 / omega23) t12."""
    if not omega23 > 0:
        raise ValueError("omega23 must be positive")
    return t0 + omega12 / omega23 * t12


def detect_echo_peak(trace: SignalTrace, search_window) -> tuple[float, float]:
    """Maximum of the intensity inside ``search_window``, refined by a parabola
    through the three samples around it.
    """
    t_a, t_b = search_window
    t = trace.t_grid
    idx = np.nonzero((t >= t_a) & (t <= t_b))[0]
    if idx.size == 0:
        raise NoPeakError("empty window")
    y = trace.intensity[idx]
    k = int(np.argmax(y))
    if k == 0 or k == idx.size - 1:
        raise NoPeakError("no interior peak")
    y0, y1, y2 = y[k - 1], y[k], y[k + 1]
    denom = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
    dt = t[idx[k + 1]] - t[idx[k]]
    t_peak = t[idx[k]] + shift * dt
    i_peak = y1 - 0.25 * (y0 - y2) * shift
    return float(t_peak), float(i_peak)


@dataclass(frozen=True)
class DecayFit:
    I0: float
    a: float
    residual_rms: float

    def __iter__(self):
        return iter((self.I0, self.a))


def fit_exponential_decay(points) -> DecayFit:
    """Least-squares line through (t12, ln I); I = I0 exp(a t12)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise ValueError("need at least 3 points")
    x, y = pts[:, 0], pts[:, 1]
    if np.any(y <= 0):
        raise ValueError("intensities must be positive")
    if np.ptp(x) == 0:
        raise ValueError("degenerate abscissae")
    ly = np.log(y)
    xm, ym = x.mean(), ly.mean()
    a = float(np.sum((x - xm) * (ly - ym)) / np.sum((x - xm) ** 2))
    b = float(ym - a * xm)
    resid = ly - (a * x + b)
    return DecayFit(math.exp(b), a, float(np.sqrt(np.mean(resid ** 2))))


def theoretical_decay_coefficient(delta12: float, delta23: float, gamma12: float) -> float:
    """(delta12 / delta23) gamma12."""
    if delta23 == 0:
        raise ValueError("delta23 must be non-zero")
    return delta12 / delta23 * gamma12


@dataclass(frozen=True)
class PhotonDecay:
    rate: float
    number_linear: np.ndarray
    density: np.ndarray


def photon_number_decay(N0: float, omega1: float, omega2: float, gamma12: float, t,
                        delta_E12: float = 1.0, rho0: float = 1.0) -> PhotonDecay:
    """Photon-number and spectral-density laws with B = rho = 1 and unit volume.

    Linear form: N(t) = N0 - (omega2 / omega1) gamma12 t.
    Exponential form: rho(t) = rho0 exp(-delta_E12 (omega2 / omega1) gamma12 t).
    """
    if not (omega1 > 0 and omega2 > 0):
        raise ValueError("frequencies must be positive")
    t = np.asarray(t, dtype=float)
    rate = omega2 / omega1 * gamma12
    return PhotonDecay(rate, N0 - rate * t, rho0 * np.exp(-delta_E12 * rate * t))


def spectrum(x: np.ndarray, dt: float, pad: int = 1):
    """One-sided magnitude spectrum of the detrended, Hann-windowed samples."""
    y = signal.detrend(np.asarray(x, dtype=float), type="linear") * np.hanning(len(x))
    n = len(x) * pad
    return np.fft.rfftfreq(n, dt), np.abs(np.fft.rfft(y, n))


def beat_period(trace: SignalTrace, window=None, threshold: float = 5.0, pad: int = 16,
                min_modulation: float = 1e-3) -> float | None:
    """Period of the dominant intensity modulation, or None.

    The intensity inside ``window`` is detrended, Hann-windowed and
    transformed.  A line must be a local maximum of the unpadded spectrum at
    two or more cycles per window and exceed ``threshold`` times the median
    spectral floor.  Traces whose detrended modulation is below
    ``min_modulation`` of the mean intensity carry no line.  The frequency is
    refined on a ``pad``-times zero-padded spectrum.
    """
    t = trace.t_grid
    mask = np.ones_like(t, dtype=bool) if window is None else (t >= window[0]) & (t <= window[1])
    x = trace.intensity[mask]
    if x.size < 2:
        raise ValueError("window shorter than 2 samples")
    if x.size < 8:
        return None
    dt = float(t[mask][1] - t[mask][0])
    resid = signal.detrend(x, type="linear")
    scale = max(float(np.mean(np.abs(x))), np.finfo(float).tiny)
    if np.std(resid) < min_modulation * scale:
        return None
    f0, a0 = spectrum(x, dt)
    floor = float(np.median(a0[1:]))
    k0 = np.arange(2, len(a0) - 1)
    peaks = k0[(a0[k0] > a0[k0 - 1]) & (a0[k0] >= a0[k0 + 1])]
    if peaks.size == 0:
        return None
    k = int(peaks[np.argmax(a0[peaks])])
    if a0[k] < threshold * floor:
        return None
    f, a = spectrum(x, dt, pad)
    lo, hi = max(1, (k - 1) * pad), min(len(a) - 2, (k + 1) * pad)
    j = lo + int(np.argmax(a[lo:hi + 1]))
    y0, y1, y2 = np.log(a[j - 1:j + 2])
    denom = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
    return float(1.0 / (f[j] + shift * (f[1] - f[0])))


@dataclass(frozen=True)
class MemoryEstimate:
    amplification: float
    pulse_to_interval: float
    impulse_area: float | None
    impulse_area_ok: bool | None
    stated_ratio: float = 1e-6
    stated_gain: float = 1e9

    def lines(self) -> list[str]:
        out = [
            f"memory amplification t12/tau_pulse = {self.amplification:.6g}",
            f"pulse-to-interval ratio tau_pulse/t12 = {self.pulse_to_interval:.6g}",
            f"stated ratio ~ {self.stated_ratio:.0e}; stated gain ~ {self.stated_gain:.0e}"
            " (these two stated figures do not agree with each other)",
        ]
        if self.impulse_area is not None:
            out.append(f"impulse area g_p*t12 = {self.impulse_area:.6g} (pi condition: {self.impulse_area_ok})")
        return out


def memory_time_estimate(tau_pulse: float, t12: float, g_p: float | None = None,
                         area_rtol: float = 1e-9) -> MemoryEstimate:
    """Memory amplification t12 / tau_pulse and the impulse-area check g_p t12 ~ pi."""
    if not (tau_pulse > 0 and t12 > 0):
        raise ValueError("tau_pulse and t12 must be positive")
    area = ok = None
    if g_p is not None:
        area = g_p * t12
        ok = math.isclose(area, math.pi, rel_tol=area_rtol)
    return MemoryEstimate(t12 / tau_pulse, tau_pulse / t12, area, ok)
