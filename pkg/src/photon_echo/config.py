"""Scenario files: INI-style key/value sections, presets and run manifests.

Sections
--------
``[system]``    SystemParams fields; ``d_split`` accepts ``inf``;
                ``d_split_units`` is ``si`` (rad/s, default) or
                ``capital_gamma`` (multiples of the homogeneous width).
``[sequence]``  ``kind = raman_echo`` (default) builds the three-pulse echo
                from ``t12``, ``pulse_duration``, pulse areas and phases;
                ``kind = explicit`` reads ``t0``, ``t12``, ``t_end`` here and
                pulses from ``[pulse.N]`` sections.
``[ensemble]``  EnsembleSpec fields.
``[sweep]``     ``axis`` (t12 or d_split), comma-separated ``values`` and
                ``units`` (si or capital_gamma, d_split only).
``[run]``       ``output_dir``, ``seed``, ``sample_dt``, ``workers``,
                ``search_halfwidth`` (s, default four envelope half-widths).
``[compare]``   ``phase_difference`` (rad) for compare-modes.

All times are SI seconds.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .ensemble import SCHEMES, EnsembleSpec
from .model import (
    Pulse,
    PulseSequence,
    SystemParams,
    Transition,
    ValidationError,
    echo_sequence,
    sorted_pulses,
    validate,
)


class ConfigError(ValueError):
    pass


SYSTEM_KEYS = {f.name for f in fields(SystemParams)} | {"d_split_units"}
RAMAN_KEYS = {"kind", "t12", "pulse_duration", "probe_area1", "coupling_area", "probe_area2",
              "coupling_area1", "phase_p", "phase_c", "lead", "tail", "probe_detuning",
              "coupling_detuning"}
EXPLICIT_KEYS = {"kind", "t0", "t12", "t_end", "t_start"}
PULSE_KEYS = {"start", "duration", "transition", "rabi_amplitude", "phase", "detuning"}
ENSEMBLE_KEYS = {"n_atoms", "sigma_doppler", "scheme", "ratio_lock", "t_star", "grid_halfwidth"}
SWEEP_KEYS = {"axis", "values", "units"}
RUN_KEYS = {"output_dir", "seed", "sample_dt", "workers", "search_halfwidth"}
COMPARE_KEYS = {"phase_difference"}
REQUIRED = {"system": ("omega12", "omega23"), "sequence": ("t12",), "ensemble": ("n_atoms", "sigma_doppler")}


@dataclass(frozen=True)
class Scenario:
    system: SystemParams
    sequence: PulseSequence
    ensemble: EnsembleSpec
    sequence_spec: dict
    sweep_axis: str | None = None
    sweep_values: tuple[float, ...] = ()
    output_dir: Path = Path("out")
    seed: int = 0
    sample_dt: float = 5e-14
    workers: int = 1
    search_halfwidth: float | None = None
    phase_difference: float = math.pi / 2
    sweep_units: str = "si"
    d_split_units: str = "si"

    def with_sweep_value(self, value: float) -> "Scenario":
        """Scenario for one sweep point (value in SI units)."""
        if self.sweep_axis == "t12":
            spec = dict(self.sequence_spec, t12=value)
            return replace(self, sequence=build_sequence(spec, self.system), sequence_spec=spec)
        if self.sweep_axis == "d_split":
            system = replace(self.system, d_split=value)
            return replace(self, system=system, sequence=build_sequence(self.sequence_spec, system))
        return self

    def sweep_si(self) -> list[float]:
        if self.sweep_axis == "d_split" and self.sweep_units == "capital_gamma":
            return [v * self.system.capital_gamma for v in self.sweep_values]
        return list(self.sweep_values)


def _float(section, key, raw):
    text = raw.strip().lower()
    if text in ("inf", "infinity", "+inf"):
        return math.inf
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: not a number: {raw!r}") from None


def _bool(section, key, raw):
    text = raw.strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"[{section}] {key}: not a boolean: {raw!r}")


def _check_keys(name, section, allowed):
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"[{name}] unknown key(s): {', '.join(unknown)}")


def build_sequence(spec: dict, system: SystemParams) -> PulseSequence:
    if spec.get("kind", "raman_echo") == "explicit":
        seq = PulseSequence(sorted_pulses(spec["pulses"]), t0=spec["t0"], t12=spec["t12"],
                            t_end=spec["t_end"], t_start=spec.get("t_start", 0.0))
        return seq
    kwargs = {k: v for k, v in spec.items() if k not in ("kind", "t12")}
    return echo_sequence(spec["t12"], ratio=system.ratio, **kwargs)


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from None

    missing = [f"[{s}] {k}" for s, keys in REQUIRED.items() for k in keys
               if not parser.has_option(s, k)]
    if missing:
        raise ConfigError("missing required keys: " + ", ".join(missing))
    known = {"system", "sequence", "ensemble", "sweep", "run", "compare"}
    for name in parser.sections():
        if name not in known and not name.startswith("pulse."):
            raise ConfigError(f"unknown section [{name}]")

    sec = parser["system"]
    _check_keys("system", sec, SYSTEM_KEYS)
    sys_kwargs = {}
    for k, v in sec.items():
        if k == "coupling_form":
            sys_kwargs[k] = v.strip()
        elif k != "d_split_units":
            sys_kwargs[k] = _float("system", k, v)
    d_units = sec.get("d_split_units", "si").strip()
    if d_units not in ("si", "capital_gamma"):
        raise ConfigError("[system] d_split_units must be si or capital_gamma")
    system = SystemParams(**sys_kwargs)
    if d_units == "capital_gamma" and "d_split" in sys_kwargs:
        system = replace(system, d_split=sys_kwargs["d_split"] * system.capital_gamma)

    sec = parser["sequence"]
    kind = sec.get("kind", "raman_echo").strip()
    if kind == "raman_echo":
        _check_keys("sequence", sec, RAMAN_KEYS)
        seq_spec = {k: _float("sequence", k, v) for k, v in sec.items() if k != "kind"}
        seq_spec["kind"] = kind
        if any(s.startswith("pulse.") for s in parser.sections()):
            raise ConfigError("[pulse.N] sections need [sequence] kind = explicit")
    elif kind == "explicit":
        _check_keys("sequence", sec, EXPLICIT_KEYS)
        seq_spec = {k: _float("sequence", k, v) for k, v in sec.items() if k != "kind"}
        for k in ("t0", "t_end"):
            if k not in seq_spec:
                raise ConfigError(f"missing required keys: [sequence] {k}")
        pulses = []
        for name in sorted((s for s in parser.sections() if s.startswith("pulse.")),
                           key=lambda s: int(s.split(".", 1)[1]) if s.split(".", 1)[1].isdigit() else s):
            psec = parser[name]
            _check_keys(name, psec, PULSE_KEYS)
            try:
                pulses.append(Pulse(
                    start=_float(name, "start", psec["start"]),
                    duration=_float(name, "duration", psec["duration"]),
                    transition=Transition(psec["transition"].strip()),
                    rabi_amplitude=_float(name, "rabi_amplitude", psec["rabi_amplitude"]),
                    phase=_float(name, "phase", psec.get("phase", "0")),
                    detuning=_float(name, "detuning", psec.get("detuning", "0")),
                ))
            except KeyError as exc:
                raise ConfigError(f"[{name}] missing key {exc}") from None
            except ValueError as exc:
                raise ConfigError(f"[{name}] {exc}") from None
        seq_spec["kind"] = kind
        seq_spec["pulses"] = pulses
    else:
        raise ConfigError("[sequence] kind must be raman_echo or explicit")

    sec = parser["ensemble"]
    _check_keys("ensemble", sec, ENSEMBLE_KEYS)
    scheme = sec.get("scheme", "uniform_grid").strip()
    if scheme not in SCHEMES:
        raise ConfigError(f"[ensemble] scheme must be one of {SCHEMES}")
    n_atoms = _float("ensemble", "n_atoms", sec["n_atoms"])
    if n_atoms != int(n_atoms):
        raise ConfigError("[ensemble] n_atoms must be an integer")

    run = parser["run"] if parser.has_section("run") else {}
    _check_keys("run", run, RUN_KEYS)
    seed = int(_float("run", "seed", run.get("seed", "0")))
    try:
        ensemble = EnsembleSpec(
            n_atoms=int(n_atoms),
            sigma_doppler=_float("ensemble", "sigma_doppler", sec["sigma_doppler"]),
            scheme=scheme,
            seed=seed,
            ratio_lock=_bool("ensemble", "ratio_lock", sec.get("ratio_lock", "true")),
            t_star=_float("ensemble", "t_star", sec["t_star"]) if "t_star" in sec else None,
            grid_halfwidth=_float("ensemble", "grid_halfwidth", sec.get("grid_halfwidth", "5")),
        )
    except ValueError as exc:
        raise ConfigError(f"[ensemble] {exc}") from None

    axis, values, units = None, (), "si"
    if parser.has_section("sweep"):
        sw = parser["sweep"]
        _check_keys("sweep", sw, SWEEP_KEYS)
        axis = sw.get("axis", "").strip()
        if axis not in ("t12", "d_split"):
            raise ConfigError("[sweep] axis must be t12 or d_split")
        values = tuple(_float("sweep", "values", v) for v in sw.get("values", "").split(",") if v.strip())
        if not values:
            raise ConfigError("[sweep] values empty")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ConfigError("[sweep] values must be strictly increasing")
        units = sw.get("units", "si").strip()
        if units not in ("si", "capital_gamma"):
            raise ConfigError("[sweep] units must be si or capital_gamma")
        if axis == "t12" and kind == "explicit":
            raise ConfigError("[sweep] t12 sweeps need kind = raman_echo")

    cmp_sec = parser["compare"] if parser.has_section("compare") else {}
    _check_keys("compare", cmp_sec, COMPARE_KEYS)

    try:
        sequence = build_sequence(seq_spec, system)
        validate(system, sequence)
    except ValidationError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"[sequence] {exc}") from None

    return Scenario(
        system=system,
        sequence=sequence,
        ensemble=ensemble,
        sequence_spec=seq_spec,
        sweep_axis=axis,
        sweep_values=values,
        output_dir=Path(run.get("output_dir", "out").strip()),
        seed=seed,
        sample_dt=_float("run", "sample_dt", run.get("sample_dt", "5e-14")),
        workers=int(_float("run", "workers", run.get("workers", "1"))),
        search_halfwidth=_float("run", "search_halfwidth", run["search_halfwidth"]) if "search_halfwidth" in run else None,
        phase_difference=_float("compare", "phase_difference", cmp_sec.get("phase_difference", repr(math.pi / 2))),
        sweep_units=units,
        d_split_units="si",
    )


def load_scenario(path) -> Scenario:
    """Read a scenario file; unknown keys and invariant violations are errors."""
    path = Path(path)
    text = path.read_text()
    if _looks_like_manifest(text):
        text = manifest_to_config(text)
    return parse_scenario(text, source=str(path))


# --- serialisation -------------------------------------------------------------

def _num(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def scenario_to_sections(sc: Scenario) -> dict[str, dict[str, str]]:
    out: dict[str, dict[str, str]] = {}
    out["system"] = {f.name: _num(getattr(sc.system, f.name)) for f in fields(SystemParams)}
    spec = sc.sequence_spec
    out["sequence"] = {k: _num(v) for k, v in spec.items() if k != "pulses"}
    if spec.get("kind") == "explicit":
        for i, p in enumerate(spec["pulses"]):
            out[f"pulse.{i}"] = {
                "start": _num(p.start), "duration": _num(p.duration),
                "transition": p.transition.value, "rabi_amplitude": _num(p.rabi_amplitude),
                "phase": _num(p.phase), "detuning": _num(p.detuning),
            }
    e = sc.ensemble
    out["ensemble"] = {
        "n_atoms": str(e.n_atoms), "sigma_doppler": _num(e.sigma_doppler), "scheme": e.scheme,
        "ratio_lock": _num(e.ratio_lock), "grid_halfwidth": _num(e.grid_halfwidth),
    }
    if e.t_star is not None:
        out["ensemble"]["t_star"] = _num(e.t_star)
    if sc.sweep_axis:
        out["sweep"] = {"axis": sc.sweep_axis, "values": ", ".join(_num(v) for v in sc.sweep_values),
                        "units": sc.sweep_units}
    out["run"] = {"output_dir": str(sc.output_dir), "seed": str(sc.seed),
                  "sample_dt": _num(sc.sample_dt), "workers": str(sc.workers)}
    if sc.search_halfwidth is not None:
        out["run"]["search_halfwidth"] = _num(sc.search_halfwidth)
    out["compare"] = {"phase_difference": _num(sc.phase_difference)}
    return out


def scenario_to_config(sc: Scenario) -> str:
    lines = []
    for name, items in scenario_to_sections(sc).items():
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {v}" for k, v in items.items())
        lines.append("")
    return "\n".join(lines)


def _looks_like_manifest(text: str) -> bool:
    first = next((ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")), "")
    return first.startswith("manifest.")


def manifest_to_config(text: str) -> str:
    """Rebuild a scenario file from the ``config.*`` entries of a manifest."""
    sections: dict[str, list[str]] = {}
    for ln in text.splitlines():
        if not ln.startswith("config."):
            continue
        key, _, value = ln[len("config."):].partition(" = ")
        name, _, item = key.rpartition(".")
        sections.setdefault(name, []).append(f"{item} = {value}")
    return "\n".join(f"[{n}]\n" + "\n".join(items) + "\n" for n, items in sections.items())


# --- presets -----------------------------------------------------------------------

_BASE = """\
# Reference parameter set: 100 fs pulses, relaxation
# probabilities gamma21 = 2*gamma1 and gamma23 = 2*gamma3 of 1e10 1/s,
# homogeneous width 1e12 1/s, gamma13 = Gamma13 = 0, Doppler detuning scale
# Delta12 = 50 gamma and Delta12/Delta23 = 1.
[system]
omega12 = 2.4e15
omega23 = 2.4e15
gamma1 = 5e9
gamma2 = 0
gamma3 = 5e9
gamma12 = 1e10
capital_gamma = 1e12
capital_gamma13 = 0
lambda_pump = 0
d_split = {d_split}
d_split_units = capital_gamma
V = 0

[sequence]
kind = raman_echo
t12 = {t12}
pulse_duration = 1e-13
probe_area1 = 0.7853981633974483
coupling_area = 1.5707963267948966
probe_area2 = {probe_area2}
coupling_area1 = {coupling_area1}
tail = 8e-12

[ensemble]
n_atoms = {n_atoms}
sigma_doppler = 5e11
scheme = uniform_grid
ratio_lock = true

[run]
output_dir = {output_dir}
seed = 0
sample_dt = {sample_dt}
workers = 1
"""

PRESETS = {
    "paper_sec3": _BASE.format(d_split="0", t12="2e-11", probe_area2="1.5707963267948966",
                               coupling_area1="0", n_atoms=201, output_dir="out/paper_sec3",
                               sample_dt="5e-14"),
    "paper_sec3_delay": _BASE.format(d_split="0", t12="2e-11", probe_area2="1.5707963267948966",
                                     coupling_area1="0", n_atoms=201, output_dir="out/paper_sec3_delay",
                                     sample_dt="5e-14")
    + "\n[sweep]\naxis = t12\nvalues = 2e-11, 4e-11, 6e-11, 8e-11, 1e-10, 1.2e-10, 1.4e-10, 1.6e-10\n",
    "paper_sec3_dsweep": _BASE.format(d_split="0.05", t12="6e-11", probe_area2="0.7853981633974483",
                                      coupling_area1="0.39269908169744964", n_atoms=201,
                                      output_dir="out/paper_sec3_dsweep", sample_dt="1e-13")
    + "\n[sweep]\naxis = d_split\nvalues = 0.02, 0.05, 0.10\nunits = capital_gamma\n",
    "paper_sec3_beats": _BASE.format(d_split="0.05", t12="2e-11", probe_area2="0.7853981633974483",
                                     coupling_area1="0.39269908169744964", n_atoms=901,
                                     output_dir="out/paper_sec3_beats", sample_dt="2e-13")
    + "\n[sweep]\naxis = t12\nvalues = " + ", ".join(repr(round(20e-12 * k, 15)) for k in range(1, 26)) + "\n",
}


def preset(name: str) -> str:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
