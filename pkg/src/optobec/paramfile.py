"""Flat ``key = value`` parameter files.

Schema (one key per line, ``#`` starts a comment)::

    N_atoms          integer
    cavity_length    m
    pump_wavelength  m
    mirror_mass      kg
    temperature      K
    n_ph             mean thermal photon number (optional, default 0)

and the frequency keys ``kappa g0 Delta_a omega_R omega_sw gamma_c omega_m
gamma_m eta delta_c_detuning Gamma_l omega_N gamma_tilde``.  Every frequency
key needs a companion ``<key>_is_angular`` flag: ``true`` means the number
is already in rad/s, ``false`` means it is in Hz and gets multiplied by 2pi.

Override values (``--override KEY=VAL`` on the command line) may carry a
unit suffix: ``Hz kHz MHz GHz`` (multiplied by 2pi), ``rad/s``, or a
reference frequency ``kappa omega_R omega_m omega_N``.
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict
from pathlib import Path

from .errors import ParameterError, ParseError
from .model import TWO_PI, PhaseNoiseParams, SystemParams

PLAIN_KEYS = ("N_atoms", "cavity_length", "pump_wavelength", "mirror_mass", "temperature", "n_ph")
FREQUENCY_KEYS = ("kappa", "g0", "Delta_a", "omega_R", "omega_sw", "gamma_c", "omega_m",
                  "gamma_m", "eta", "delta_c_detuning", "Gamma_l", "omega_N", "gamma_tilde")
NOISE_KEYS = ("Gamma_l", "omega_N", "gamma_tilde")
OPTIONAL = {"n_ph": 0.0}
FLAG_SUFFIX = "_is_angular"
KEY_ORDER = PLAIN_KEYS + FREQUENCY_KEYS

_TRUE = {"true", "yes", "1", "on"}
_FALSE = {"false", "no", "0", "off"}


def _read(text: str) -> dict:
    entries, problems = {}, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append((f"line {lineno}", f"expected 'key = value', got {raw.strip()!r}"))
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key in entries:
            problems.append((key, f"duplicate key (line {lineno})"))
        entries[key] = (value, lineno)
    if problems:
        raise ParseError(problems)
    return entries


def _resolve(entries: dict) -> dict:
    """Validate keys and flags, return values with frequencies in rad/s."""
    problems = []
    known = set(KEY_ORDER) | {k + FLAG_SUFFIX for k in FREQUENCY_KEYS}
    for key in entries:
        if key not in known:
            problems.append((key, "unknown key"))
    for key in KEY_ORDER:
        if key not in entries and key not in OPTIONAL:
            problems.append((key, "missing"))
    for key in FREQUENCY_KEYS:
        if key in entries and key + FLAG_SUFFIX not in entries:
            problems.append((key + FLAG_SUFFIX, "unit flag required (true = rad/s, false = Hz)"))
    out = {}
    for key in KEY_ORDER:
        if key not in entries:
            if key in OPTIONAL:
                out[key] = OPTIONAL[key]
            continue
        value, lineno = entries[key]
        try:
            if key == "N_atoms":
                num = float(value)
                if not num.is_integer():
                    raise ValueError
                out[key] = int(num)
            else:
                out[key] = float(value)
                if not math.isfinite(out[key]):
                    raise ValueError
        except ValueError:
            problems.append((key, f"not a valid number: {value!r} (line {lineno})"))
            continue
        if key in FREQUENCY_KEYS and key + FLAG_SUFFIX in entries:
            flag, flag_line = entries[key + FLAG_SUFFIX]
            if flag.lower() in _TRUE:
                pass
            elif flag.lower() in _FALSE:
                out[key] *= TWO_PI
            else:
                problems.append((key + FLAG_SUFFIX, f"expected true/false, got {flag!r} (line {flag_line})"))
    if problems:
        raise ParseError(problems)
    return out


def _format(values: dict) -> str:
    lines = ["# optobec parameter file; frequencies in rad/s"]
    for key in KEY_ORDER:
        v = values[key]
        lines.append(f"{key} = {v if key == 'N_atoms' else repr(float(v))}")
        if key in FREQUENCY_KEYS:
            lines.append(f"{key}{FLAG_SUFFIX} = true")
    return "\n".join(lines) + "\n"


def params_from_dict(values: dict) -> SystemParams:
    flat = dict(values)
    noise = PhaseNoiseParams(**{k: flat.pop(k) for k in NOISE_KEYS})
    return SystemParams(phase_noise=noise, **flat)


def params_to_dict(params: SystemParams) -> dict:
    d = asdict(params)
    d.update(d.pop("phase_noise"))
    return {k: d[k] for k in KEY_ORDER}


def parse_params_text(text: str) -> SystemParams:
    values = _resolve(_read(text))
    try:
        return params_from_dict(values)
    except ParameterError as exc:
        raise ParseError([(exc.field, str(exc).split(": ", 1)[-1])]) from exc


def parse_params(path) -> SystemParams:
    """Read a parameter file; frequencies come back in rad/s."""
    return parse_params_text(Path(path).read_text(encoding="utf-8"))


def serialize(params: SystemParams) -> str:
    return _format(params_to_dict(params))


def normalize(text: str) -> str:
    """Canonical form of a parameter file: fixed key order, rad/s values,
    comments dropped."""
    return _format(_resolve(_read(text)))


_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*\*?\s*([A-Za-z_/]*)\s*$")
_HZ = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
REFERENCE_UNITS = ("kappa", "omega_R", "omega_m", "omega_N")


def parse_quantity(text: str, params: SystemParams | None = None) -> float:
    """Parse ``"100kappa"``, ``"1kHz"``, ``"0.5 omega_R"``, ``"-3e6"`` etc."""
    m = _QUANTITY.match(str(text))
    if not m:
        raise ValueError(f"cannot parse quantity {text!r}")
    value, unit = float(m.group(1)), m.group(2)
    if not unit or unit == "rad/s":
        return value
    if unit.lower() in _HZ:
        return value * _HZ[unit.lower()] * TWO_PI
    if unit in REFERENCE_UNITS:
        if params is None:
            raise ValueError(f"unit {unit!r} needs a parameter set to resolve against")
        ref = params.phase_noise.omega_N if unit == "omega_N" else getattr(params, unit)
        return value * ref
    raise ValueError(f"unknown unit {unit!r} in {text!r}")


def apply_overrides(params: SystemParams, overrides) -> SystemParams:
    """Apply ``(key, value)`` overrides in order; values may carry units."""
    problems = []
    for key, value in overrides:
        if key not in KEY_ORDER:
            problems.append((key, "unknown parameter"))
            continue
        try:
            if key == "N_atoms":
                v = int(float(value))
            elif key in FREQUENCY_KEYS:
                v = parse_quantity(value, params)
            else:
                v = float(value)
            params = params.with_updates(**{key: v})
        except (ValueError, ParameterError) as exc:
            problems.append((key, str(exc)))
    if problems:
        raise ParseError(problems)
    return params
