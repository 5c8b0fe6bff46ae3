"""Physical parameters of the BEC + movable-mirror cavity and derived constants.

All frequencies are angular frequencies in rad/s.  Two different quantities
are commonly called "omega_c" in this context: the bare optical cavity
frequency (here ``omega0``, fixed by the pump wavelength) and the Bogoliubov
mode frequency (here ``omega_c``).  They are kept under separate names.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

from scipy import constants

from .errors import ParameterError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PhaseNoiseParams:
    """Classical laser phase-noise process.

    Attributes
    ----------
    Gamma_l : float
        Laser linewidth [rad/s].  Zero switches the noise drive off exactly.
    omega_N : float
        Central frequency of the filtered noise [rad/s].
    gamma_tilde : float
        Bandwidth of the filter [rad/s].
    """

    Gamma_l: float = 0.0
    omega_N: float = 1.0
    gamma_tilde: float = 0.0

    def __post_init__(self):
        _require(self.Gamma_l >= 0, "Gamma_l", "must be >= 0")
        _require(self.omega_N > 0, "omega_N", "must be > 0")
        _require(self.gamma_tilde >= 0, "gamma_tilde", "must be >= 0")


@dataclass(frozen=True)
class SystemParams:
    """Raw physical inputs.  Validated on construction."""

    N_atoms: int
    cavity_length: float
    pump_wavelength: float
    kappa: float
    g0: float
    Delta_a: float
    omega_R: float
    omega_sw: float
    gamma_c: float
    mirror_mass: float
    omega_m: float
    gamma_m: float
    eta: float
    delta_c_detuning: float
    temperature: float
    n_ph: float = 0.0
    phase_noise: PhaseNoiseParams = field(default_factory=PhaseNoiseParams)

    def __post_init__(self):
        n = self.N_atoms
        _require(
            isinstance(n, int) and not isinstance(n, bool) and n > 0,
            "N_atoms",
            "must be a positive integer",
        )
        for name in ("cavity_length", "pump_wavelength", "kappa", "omega_R",
                     "mirror_mass", "omega_m"):
            _require(_finite(getattr(self, name)) and getattr(self, name) > 0,
                     name, "must be finite and > 0")
        for name in ("omega_sw", "gamma_c", "gamma_m", "eta", "temperature", "n_ph"):
            _require(_finite(getattr(self, name)) and getattr(self, name) >= 0,
                     name, "must be finite and >= 0")
        _require(_finite(self.g0), "g0", "must be finite")
        _require(_finite(self.delta_c_detuning), "delta_c_detuning", "must be finite")
        _require(_finite(self.Delta_a) and self.Delta_a != 0, "Delta_a",
                 "must be finite and non-zero")
        _require(isinstance(self.phase_noise, PhaseNoiseParams), "phase_noise",
                 "must be a PhaseNoiseParams")

    def with_updates(self, **updates) -> "SystemParams":
        """Copy with some fields replaced.  Phase-noise keys are routed to
        the nested :class:`PhaseNoiseParams`."""
        noise_keys = {f.name for f in fields(PhaseNoiseParams)}
        noise = {k: updates.pop(k) for k in list(updates) if k in noise_keys}
        new = self
        if noise:
            new = replace(new, phase_noise=replace(new.phase_noise, **noise))
        if updates:
            new = replace(new, **updates)
        return new


@dataclass(frozen=True)
class DerivedModel:
    """Constants computed from :class:`SystemParams` by :func:`derive`."""

    omega0: float
    U0: float
    zeta: float
    Omega_c: float
    Omega_c_plus: float
    Omega_c_minus: float
    chi: float
    omega_c: float
    xi_c: float
    xi_m: float
    n_m: float
    n_c: float
    gamma_m_prime: float
    gamma_c_prime: float
    omega_m: float  # copied from the raw parameters

    @property
    def kerr(self) -> float:
        """Coefficient of |alpha|^2 in the radiation-pressure detuning shift [rad/s]."""
        return self.xi_m ** 2 / self.omega_m + self.xi_c ** 2 / self.omega_c


def bose_occupation(omega: float, temperature: float) -> float:
    """Mean thermal occupation ``1 / (exp(hbar*omega/kT) - 1)``; exactly 0 at T = 0."""
    if temperature <= 0.0:
        return 0.0
    x = constants.hbar * omega / (constants.k * temperature)
    if x > 700.0:
        return 0.0
    return 1.0 / math.expm1(x)


def derive(params: SystemParams, *, xi_m=None, xi_c=None, omega_c=None) -> DerivedModel:
    """Compute every derived model constant.

    The keyword overrides replace the corresponding computed value before the
    thermal quantities are evaluated; they exist for reduced-parameter studies
    that fix couplings or the Bogoliubov frequency directly.
    """
    p = params
    U0 = p.g0 ** 2 / p.Delta_a
    zeta = 0.5 * math.sqrt(p.N_atoms) * U0
    Omega_c = 4.0 * p.omega_R + p.omega_sw
    Om_plus = Omega_c + 0.5 * p.omega_sw
    Om_minus = Omega_c - 0.5 * p.omega_sw
    chi = (Om_plus / Om_minus) ** 0.25
    w_c = math.sqrt(Om_plus * Om_minus) if omega_c is None else float(omega_c)
    omega0 = TWO_PI * constants.c / p.pump_wavelength
    if xi_m is None:
        xi_m = (omega0 / p.cavity_length) * math.sqrt(
            constants.hbar / (p.mirror_mass * p.omega_m))
    if xi_c is None:
        xi_c = zeta / chi
    n_m = bose_occupation(p.omega_m, p.temperature)
    n_c = bose_occupation(w_c, p.temperature)
    return DerivedModel(
        omega0=omega0,
        U0=U0,
        zeta=zeta,
        Omega_c=Omega_c,
        Omega_c_plus=Om_plus,
        Omega_c_minus=Om_minus,
        chi=chi,
        omega_c=w_c,
        xi_c=float(xi_c),
        xi_m=float(xi_m),
        n_m=n_m,
        n_c=n_c,
        gamma_m_prime=p.gamma_m * (2.0 * n_m + 1.0),
        gamma_c_prime=p.gamma_c * (2.0 * n_c + 1.0),
        omega_m=p.omega_m,
    )


def weak_interaction_ok(model: DerivedModel, params: SystemParams, photon_number: float) -> bool:
    """Bogoliubov single-mode validity: ``|U0| * |alpha|^2 <= 10 omega_R``."""
    return abs(model.U0) * photon_number <= 10.0 * params.omega_R


def paper_defaults() -> SystemParams:
    """Experimental parameter set for Rb atoms in a 187 um cavity.

    Pump rate eta = 100 kappa, detuning delta_c = -15 kappa, linewidth
    2pi x 1 kHz.  ``omega_R`` and ``omega_m`` are taken as angular values
    (23.7e3 and 1e5 rad/s), which puts the Bogoliubov frequency next to the
    mechanical one.  ``Delta_a`` is the difference between the bare cavity
    frequency 2.41494e15 rad/s and the D2 line 2.41419e15 rad/s.
    """
    kappa = TWO_PI * 1.3e6
    omega_R = 23.7e3
    omega_N = TWO_PI * 140e3
    return SystemParams(
        N_atoms=100_000,
        cavity_length=187e-6,
        pump_wavelength=780e-9,
        kappa=kappa,
        g0=TWO_PI * 14.1e6,
        Delta_a=2.41494e15 - 2.41419e15,
        omega_R=omega_R,
        omega_sw=0.2 * omega_R,
        gamma_c=1e-3 * kappa,
        mirror_mass=1e-12,
        omega_m=1e5,
        gamma_m=TWO_PI * 100.0,
        eta=100.0 * kappa,
        delta_c_detuning=-15.0 * kappa,
        temperature=0.1e-6,
        n_ph=0.0,
        phase_noise=PhaseNoiseParams(
            Gamma_l=TWO_PI * 1e3, omega_N=omega_N, gamma_tilde=omega_N / 2.0),
    )


def _finite(x) -> bool:
    try:
        return math.isfinite(x)
    except TypeError:
        return False


def _require(cond, name, message):
    if not cond:
        raise ParameterError(name, message)
