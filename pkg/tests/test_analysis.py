import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from photon_echo.analysis import (
    EchoReport,
    NoPeakError,
    beat_period,
    detect_echo_peak,
    fit_exponential_decay,
    memory_time_estimate,
    photon_number_decay,
    predict_echo_time,
    spectrum,
    theoretical_decay_coefficient,
)
from photon_echo.ensemble import SignalTrace


def trace_from_intensity(t, intensity):
    return SignalTrace(t, np.sqrt(intensity).astype(complex))


class TestPredict:
    def test_equal_frequencies(self):
        assert predict_echo_time(0.0, 10e-12, 1.0, 1.0) == pytest.approx(10e-12)

    def test_ratio(self):
        assert predict_echo_time(2e-12, 10e-12, 3.0, 2.0) == pytest.approx(17e-12)

    def test_bad_frequency(self):
        with pytest.raises(ValueError):
            predict_echo_time(0.0, 1.0, 1.0, 0.0)


class TestDetectPeak:
    def test_gaussian_bump(self):
        t = np.arange(0, 15e-12, 1e-15)
        tr = trace_from_intensity(t, np.exp(-((t - 7e-12) / 5e-13) ** 2))
        t_peak, i_peak = detect_echo_peak(tr, (5e-12, 9e-12))
        assert abs(t_peak - 7e-12) <= 0.5e-15
        assert i_peak == pytest.approx(1.0, abs=1e-6)

    def test_off_grid_centre(self):
        t = np.arange(0, 15e-12, 1e-15)
        tr = trace_from_intensity(t, np.exp(-((t - 7.0003e-12) / 5e-13) ** 2))
        assert abs(detect_echo_peak(tr, (5e-12, 9e-12))[0] - 7.0003e-12) < 1e-17

    def test_monotone(self):
        t = np.linspace(0, 1e-11, 500)
        tr = trace_from_intensity(t, np.exp(-t / 1e-12))
        with pytest.raises(NoPeakError, match="no interior peak"):
            detect_echo_peak(tr, (0.0, 1e-11))

    def test_empty_window(self):
        t = np.linspace(0, 1e-11, 50)
        with pytest.raises(NoPeakError, match="empty"):
            detect_echo_peak(trace_from_intensity(t, np.ones(50)), (2e-11, 3e-11))

    def test_two_atom_refocusing(self):
        # two dipoles with detunings +-delta, dephased at t = 0 and conjugated at t12
        delta, t12 = 3e11, 4e-12
        t = np.arange(t12, 3 * t12, 2e-15)
        phase = delta * (t - 2 * t12)
        p = 0.5 * (np.exp(1j * phase) + np.exp(-1j * phase)) * np.exp(-((t - 2 * t12) / 2e-12) ** 2)
        t_peak, _ = detect_echo_peak(SignalTrace(t, p), (1.5 * t12, 2.5 * t12))
        assert t_peak == pytest.approx(2 * t12, abs=2e-16)


class TestDecayFit:
    def test_exact(self):
        x = np.linspace(1e-11, 1.6e-10, 8)
        fit = fit_exponential_decay(np.column_stack([x, np.exp(-2e10 * x)]))
        assert fit.I0 == pytest.approx(1.0, rel=1e-12)
        assert fit.a == pytest.approx(-2e10, rel=1e-12)
        I0, a = fit
        assert (I0, a) == (fit.I0, fit.a)

    def test_noisy_slopes(self):
        x = np.linspace(1e-11, 2e-10, 20)
        truth = -1e10
        slopes = []
        for seed in range(100):
            rng = np.random.default_rng(seed)
            y = np.exp(truth * x) * (1 + 0.01 * rng.standard_normal(20))
            slopes.append(fit_exponential_decay(np.column_stack([x, y])).a)
        slopes = np.array(slopes)
        assert np.all(np.abs(slopes - truth) <= 0.05 * abs(truth))
        # ordinary least squares: the mean slope is unbiased to within its standard error
        sx = np.sqrt(np.sum((x - x.mean()) ** 2))
        assert abs(slopes.mean() - truth) < 3 * 0.01 / sx / math.sqrt(100)

    @pytest.mark.parametrize("pts", [[(0, 1), (1, 0.5)], [(0, 1), (1, 0.0), (2, 0.1)], [(1, 1), (1, 2), (1, 3)]])
    def test_bad_input(self, pts):
        with pytest.raises(ValueError):
            fit_exponential_decay(pts)


class TestLaws:
    def test_decay_coefficient(self):
        g = 1e10
        assert theoretical_decay_coefficient(50 * g, 50 * g, g) == pytest.approx(1e10)
        assert theoretical_decay_coefficient(0.0, 1.0, g) == 0.0
        assert theoretical_decay_coefficient(2.0, 1.0, 3.0) == 6.0
        with pytest.raises(ValueError):
            theoretical_decay_coefficient(1.0, 0.0, 1.0)

    def test_photon_number_constant(self):
        out = photon_number_decay(5.0, 1.0, 2.0, 0.0, np.linspace(0, 1, 5))
        assert np.all(out.number_linear == 5.0)

    def test_equal_frequencies(self):
        assert photon_number_decay(1.0, 2.0, 2.0, 3e9, 0.0).rate == 3e9

    @given(st.floats(0, 1e-9), st.floats(0, 1e10), st.floats(0.1, 10))
    def test_exponential_self_consistent(self, t, g, r):
        one = photon_number_decay(1.0, 1.0, r, g, t).density
        two = photon_number_decay(1.0, 1.0, r, g, 2 * t).density
        assert two == pytest.approx(one ** 2, rel=1e-12)

    def test_bad_frequencies(self):
        with pytest.raises(ValueError):
            photon_number_decay(1.0, 0.0, 1.0, 1.0, 0.0)


class TestBeatPeriod:
    def test_synthetic_tone(self):
        d = 2 * math.pi * 1e11
        t = np.arange(0, 200e-12, 0.1e-12)
        period = beat_period(trace_from_intensity(t, 1 + 0.5 * np.cos(d * t)))
        assert period == pytest.approx(10e-12, rel=0.02)

    @given(st.floats(5e-12, 40e-12), st.floats(0.05, 0.9), st.floats(0, 2 * math.pi))
    @settings(max_examples=40, deadline=None)
    def test_decaying_tones(self, period, depth, phi):
        t = np.arange(0, 400e-12, 1e-12)
        y = np.exp(-t / 300e-12) * (1 + depth * np.cos(2 * math.pi * t / period + phi))
        assert beat_period(trace_from_intensity(t, y)) == pytest.approx(period, rel=0.02)

    def test_no_beats(self):
        t = np.arange(0, 400e-12, 1e-12)
        assert beat_period(trace_from_intensity(t, np.exp(-t / 100e-12))) is None
        assert beat_period(trace_from_intensity(t, np.full(t.size, 0.38))) is None

    def test_noise_floor(self):
        rng = np.random.default_rng(1)
        t = np.arange(0, 400e-12, 1e-12)
        y = 1 + 1e-5 * rng.standard_normal(t.size)
        assert beat_period(trace_from_intensity(t, y)) is None

    def test_window(self):
        t = np.arange(0, 400e-12, 1e-12)
        y = np.where(t < 200e-12, 1 + 0.5 * np.cos(2 * math.pi * t / 20e-12), 1.0)
        assert beat_period(trace_from_intensity(t, y), window=(0, 199e-12)) == pytest.approx(20e-12, rel=0.02)
        assert beat_period(trace_from_intensity(t, y), window=(201e-12, 400e-12)) is None

    def test_short_window(self):
        t = np.arange(10) * 1.0
        with pytest.raises(ValueError):
            beat_period(trace_from_intensity(t, np.ones(10)), window=(0, 0.5))

    def test_spectrum_peak(self):
        t = np.arange(256) * 1e-12
        f, a = spectrum(np.cos(2 * math.pi * 3.2e10 * t), 1e-12)
        assert f[np.argmax(a)] == pytest.approx(3.2e10, abs=f[1])


class TestMemory:
    def test_paper_values(self):
        est = memory_time_estimate(100e-15, 500e-6)
        assert est.amplification == pytest.approx(5e9)
        assert est.pulse_to_interval == pytest.approx(2e-10)
        text = "\n".join(est.lines())
        assert "1e-06" in text and "1e+09" in text and "do not agree" in text

    def test_unit(self):
        assert memory_time_estimate(1.0, 1.0).amplification == 1.0

    def test_impulse_area(self):
        t12 = 3e-11
        assert memory_time_estimate(1e-13, t12, g_p=math.pi / t12).impulse_area_ok is True
        assert memory_time_estimate(1e-13, t12, g_p=1.1 * math.pi / t12).impulse_area_ok is False

    def test_bad_input(self):
        with pytest.raises(ValueError):
            memory_time_estimate(0.0, 1.0)


class TestReport:
    def test_text_and_row(self):
        rep = EchoReport(4.0e-11, 4.005e-11, 0.5, decay_fit=(1.0, -1e10), beat_period=None,
                         diagnostics={"echo_found": True, "n_atoms": 201})
        text = rep.to_text()
        assert "t_echo_detected = 4e-11" in text
        assert "beat_period = none" in text
        assert "diag.echo_found = true" in text
        assert rep.csv_row(2e-11) == "2e-11,4e-11,4.005e-11,0.5"
        assert float(rep.csv_row(1 / 3).split(",")[0]) == 1 / 3
