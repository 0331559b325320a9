"""Physical parameter types and density-matrix helpers.

Levels are labelled 1, 2, 3 with level 2 the common (ground) state.  Matrix
storage uses index ``level - 1``, so ``rho[0, 1]`` is the 1-2 coherence.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

#: Marker for the infinitely split limit of the quasi-degenerate levels.
D_INFINITE = math.inf

#: Supported forms of the coherent coupling terms.
COUPLING_FORMS = ("corrected", "verbatim")


class ValidationError(ValueError):
    """Raised when a parameter set violates one of its invariants."""


class Transition(str, enum.Enum):
    PROBE_12 = "probe_12"
    COUPLING_23 = "coupling_23"


@dataclass(frozen=True)
class SystemParams:
    """Atomic constants of the three-level system.

    All frequencies are angular (rad/s) and all rates are in 1/s.  ``gamma1``,
    ``gamma2`` and ``gamma3`` are half-rates: the population of level i decays
    at ``2 * gamma_i``.  ``gamma12`` only enters the decay law used to check
    echo intensity against delay.  ``d_split`` may be :data:`D_INFINITE`.
    """

    omega12: float
    omega23: float
    gamma1: float = 0.0
    gamma2: float = 0.0
    gamma3: float = 0.0
    gamma12: float = 0.0
    capital_gamma: float = 0.0
    capital_gamma13: float = 0.0
    lambda_pump: float = 0.0
    d_split: float = 0.0
    V: float = 0.0
    coupling_form: str = "corrected"

    @property
    def ratio(self) -> float:
        """omega12 / omega23."""
        return self.omega12 / self.omega23

    @property
    def d_infinite(self) -> bool:
        return math.isinf(self.d_split)

    def rates(self) -> dict[str, float]:
        return {
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "gamma3": self.gamma3,
            "gamma12": self.gamma12,
            "capital_gamma": self.capital_gamma,
            "capital_gamma13": self.capital_gamma13,
            "lambda_pump": self.lambda_pump,
        }


@dataclass(frozen=True)
class Pulse:
    """Rectangular pulse active on ``[start, start + duration)``."""

    start: float
    duration: float
    transition: Transition
    rabi_amplitude: float
    phase: float = 0.0
    detuning: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "transition", Transition(self.transition))

    @property
    def end(self) -> float:
        return self.start + self.duration

    @property
    def center(self) -> float:
        return self.start + 0.5 * self.duration

    @property
    def rabi(self) -> complex:
        """Complex Rabi frequency g0 * exp(i phase)."""
        return self.rabi_amplitude * complex(math.cos(self.phase), math.sin(self.phase))


@dataclass(frozen=True)
class PulseSequence:
    """Timed pulses plus the echo bookkeeping times.

    ``t0`` is the instant the rephasing period starts (centre of the coupling
    pulse that converts the optical coherence) and ``t12`` the delay between
    the two probe pulses, so the echo is expected at ``t0 + ratio * t12``.
    """

    pulses: tuple[Pulse, ...]
    t0: float
    t12: float
    t_end: float
    t_start: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "pulses", tuple(self.pulses))

    def on(self, transition: Transition) -> list[Pulse]:
        return [p for p in self.pulses if p.transition == transition]

    def frame_detuning(self, transition: Transition) -> float:
        """Laboratory detuning shared by all pulses on ``transition`` (0 if none)."""
        dets = {p.detuning for p in self.on(transition)}
        return dets.pop() if dets else 0.0


def validate(params: SystemParams, seq: PulseSequence | None = None):
    """Check every type invariant, raising :class:`ValidationError` on the first failure.

    Returns ``(params, seq)`` unchanged when everything holds.
    """
    for name in ("omega12", "omega23"):
        value = getattr(params, name)
        if not (math.isfinite(value) and value > 0):
            raise ValidationError(f"{name} must be positive")
    for name, value in params.rates().items():
        if math.isnan(value) or value < 0:
            raise ValidationError(f"{name} negative")
        if not math.isfinite(value):
            raise ValidationError(f"{name} not finite")
    if math.isnan(params.d_split) or params.d_split < 0:
        raise ValidationError("d_split negative")
    if not math.isfinite(params.V):
        raise ValidationError("V not finite")
    if params.coupling_form not in COUPLING_FORMS:
        raise ValidationError(f"coupling_form must be one of {COUPLING_FORMS}")
    if seq is None:
        return params, seq

    for i, p in enumerate(seq.pulses):
        if not (p.duration > 0):
            raise ValidationError(f"pulse {i}: duration must be positive")
        if not (p.rabi_amplitude >= 0):
            raise ValidationError(f"pulse {i}: rabi_amplitude negative")
        if not all(math.isfinite(x) for x in (p.start, p.duration, p.phase, p.detuning, p.rabi_amplitude)):
            raise ValidationError(f"pulse {i}: non-finite field")
    starts = [p.start for p in seq.pulses]
    if starts != sorted(starts):
        raise ValidationError("pulses not sorted by start")
    for tr in Transition:
        group = seq.on(tr)
        for a, b in zip(group, group[1:]):
            if b.start < a.end:
                raise ValidationError(f"overlap on {tr.value}")
        if len({p.detuning for p in group}) > 1:
            raise ValidationError(f"pulses on {tr.value} disagree on detuning")
    if not (seq.t12 > 0):
        raise ValidationError("t12 must be positive")
    if not (seq.t_end > seq.t0 + seq.t12):
        raise ValidationError("t_end must exceed t0 + t12")
    if seq.pulses and seq.pulses[0].start < seq.t_start:
        raise ValidationError("pulse starts before t_start")
    return params, seq


def hermitize(rho: np.ndarray) -> np.ndarray:
    """Return (rho + rho^dagger) / 2; works on stacks of matrices too."""
    rho = np.asarray(rho, dtype=complex)
    if not np.all(np.isfinite(rho)):
        raise ValueError("density matrix has non-finite entries")
    out = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
    idx = np.arange(rho.shape[-1])
    out[..., idx, idx] = out[..., idx, idx].real
    return out


def ground_state() -> np.ndarray:
    """All population in the common level 2."""
    rho = np.zeros((3, 3), dtype=complex)
    rho[1, 1] = 1.0
    return rho


def hermiticity_error(rho: np.ndarray) -> float:
    rho = np.asarray(rho)
    return float(np.max(np.abs(rho - np.conj(np.swapaxes(rho, -1, -2))))) if rho.size else 0.0


# Real coordinates of a Hermitian 3x3 matrix: three populations followed by
# (Re, Im) of rho12, rho13, rho23.
_OFFDIAG = ((0, 1), (0, 2), (1, 2))


def to_real(rho: np.ndarray) -> np.ndarray:
    """Pack Hermitian matrices (..., 3, 3) into real vectors (..., 9)."""
    rho = np.asarray(rho)
    parts = [rho[..., 0, 0].real, rho[..., 1, 1].real, rho[..., 2, 2].real]
    for i, j in _OFFDIAG:
        parts.append(rho[..., i, j].real)
        parts.append(rho[..., i, j].imag)
    return np.stack(parts, axis=-1)


def from_real(x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_real`; the result is exactly Hermitian."""
    x = np.asarray(x, dtype=float)
    rho = np.zeros(x.shape[:-1] + (3, 3), dtype=complex)
    for k in range(3):
        rho[..., k, k] = x[..., k]
    for n, (i, j) in enumerate(_OFFDIAG):
        z = x[..., 3 + 2 * n] + 1j * x[..., 4 + 2 * n]
        rho[..., i, j] = z
        rho[..., j, i] = np.conj(z)
    return rho


def hermitian_basis() -> np.ndarray:
    """Matrices E_k with rho = sum_k x_k E_k for x = to_real(rho)."""
    basis = np.zeros((9, 3, 3), dtype=complex)
    for k in range(3):
        basis[k, k, k] = 1.0
    for n, (i, j) in enumerate(_OFFDIAG):
        basis[3 + 2 * n, i, j] = 1.0
        basis[3 + 2 * n, j, i] = 1.0
        basis[4 + 2 * n, i, j] = 1j
        basis[4 + 2 * n, j, i] = -1j
    return basis


def sorted_pulses(pulses: Sequence[Pulse]) -> tuple[Pulse, ...]:
    return tuple(sorted(pulses, key=lambda p: p.start))


def echo_sequence(t12: float, ratio: float = 1.0, pulse_duration: float = 1e-13,
                  probe_area1: float = math.pi / 4, coupling_area: float = math.pi / 2,
                  probe_area2: float = math.pi / 2, coupling_area1: float = 0.0,
                  phase_p: float = 0.0, phase_c: float = 0.0, lead: float | None = None,
                  tail: float = 2e-11, probe_detuning: float = 0.0,
                  coupling_detuning: float = 0.0) -> PulseSequence:
    """Three-pulse Raman echo sequence.

    A probe pulse at ``lead`` creates the 1-2 coherence.  A coupling pulse
    ending where the second probe pulse begins moves it into the 1-3
    coherence, and the second probe pulse, centred ``t12`` after the first,
    converts it into the 2-3 coherence that radiates the echo.  ``t0`` is the
    centre of the coupling pulse.  Areas are ``g0 * duration``; with this
    convention a population inversion needs area pi/2.  A non-zero
    ``coupling_area1`` adds a coupling pulse coincident with the first probe.
    """
    tau = pulse_duration
    lead = tau if lead is None else lead
    if t12 < 2 * tau:
        raise ValidationError("t12 must leave room for the coupling pulse")
    pulses = [Pulse(lead, tau, Transition.PROBE_12, probe_area1 / tau, phase_p, probe_detuning)]
    if coupling_area1 > 0:
        pulses.append(Pulse(lead, tau, Transition.COUPLING_23, coupling_area1 / tau, phase_c,
                            coupling_detuning))
    store = Pulse(lead + t12 - tau, tau, Transition.COUPLING_23, coupling_area / tau, phase_c,
                  coupling_detuning)
    pulses.append(store)
    pulses.append(Pulse(lead + t12, tau, Transition.PROBE_12, probe_area2 / tau, phase_p, probe_detuning))
    t0 = store.center
    t_end = t0 + max(ratio, 1.0) * t12 + tail
    return PulseSequence(sorted_pulses(pulses), t0=t0, t12=t12, t_end=t_end)
