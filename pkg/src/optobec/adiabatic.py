"""Effective two-mode model after adiabatic elimination of the cavity field.

When kappa dominates the mechanical and Bogoliubov rates, the field
quadratures follow the oscillators quasi-statically.  The field then acts as
an optical spring: it shifts both oscillator frequencies by ``nu_i``, couples
their position quadratures, and feeds the laser phase noise and its own
vacuum noise ``dZ`` into both momentum equations.

With ``lam = 2 |alpha|^2 Delta_d / (kappa^2 + Delta_d^2)`` every quantity
below is a product of ``lam`` with the bare couplings, which keeps the
``xi -> 0`` limits finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateModelError
from .linsys import LinearSystem
from .model import DerivedModel, SystemParams

REDUCED_MODE_INDEX = {"mirror": (0, 1), "atom": (2, 3), "phase": (4, 5)}
REDUCED_LABELS = ("q", "p", "Q", "P", "psi", "theta")


@dataclass(frozen=True)
class EffectiveModel:
    """Parameters of the effective mirror/condensate model.

    Fields that do not exist at this detuning (an oscillator pushed past
    zero stiffness, ``nu > omega``) are ``None``; ``defined`` records which.
    """

    Delta_d: float
    photon_number: float
    g_m: float
    g_c: float
    nu_m: float
    nu_c: float
    coupling_mc: float  # signed q-Q coupling in the momentum equations
    chi_m_tilde: float | None
    chi_c_tilde: float | None
    omega_m_eff: float | None
    omega_c_eff: float | None
    G_mc: float | None
    r_m: float | None
    r_c: float | None
    psi_drive_m: float
    psi_drive_c: float
    degenerate: bool = False
    regime_warnings: tuple = ()
    defined: dict = field(default_factory=dict)


def _stiffness(omega, nu):
    """Return (chi_tilde, omega_eff, degenerate)."""
    rest = omega - nu
    if rest < 0.0:
        return None, None, False
    if rest == 0.0:
        return None, 0.0, True
    return (rest / omega) ** 0.25, math.sqrt(omega * rest), False


def regime_warnings(model: DerivedModel, params: SystemParams, ratio: float = 10.0):
    """Names of rates that are not at least ``ratio`` times below kappa."""
    rates = {"gamma_m": params.gamma_m, "gamma_c": params.gamma_c,
             "xi_m": abs(model.xi_m), "xi_c": abs(model.xi_c)}
    return tuple(f"kappa/{k} = {params.kappa / v:.3g} < {ratio:g}"
                 for k, v in rates.items() if v > 0 and params.kappa < ratio * v)


def effective_from_detuning(model: DerivedModel, params: SystemParams, Delta_d: float,
                            photon_number: float, *, ratio: float = 10.0) -> EffectiveModel:
    k = params.kappa
    lam = 2.0 * photon_number * Delta_d / (k * k + Delta_d * Delta_d)
    xm, xc = model.xi_m, model.xi_c
    wm, wc = params.omega_m, model.omega_c
    nu_m, nu_c = xm * xm * lam, xc * xc * lam
    chi_m, wm_eff, deg_m = _stiffness(wm, nu_m)
    chi_c, wc_eff, deg_c = _stiffness(wc, nu_c)
    G = r_m = r_c = None
    if chi_m is not None and chi_c is not None:
        G = abs(xm * xc * lam) / (chi_m * chi_c)
    if chi_m is not None:
        r_m = xm * lam / chi_m
    if chi_c is not None:
        r_c = xc * lam / chi_c
    amp = math.sqrt(2.0 * photon_number)
    return EffectiveModel(
        Delta_d=Delta_d, photon_number=photon_number,
        g_m=amp * xm, g_c=amp * xc, nu_m=nu_m, nu_c=nu_c,
        coupling_mc=xm * xc * lam,
        chi_m_tilde=chi_m, chi_c_tilde=chi_c,
        omega_m_eff=wm_eff, omega_c_eff=wc_eff,
        G_mc=G, r_m=r_m, r_c=r_c,
        psi_drive_m=xm * lam, psi_drive_c=-xc * lam,
        degenerate=deg_m or deg_c,
        regime_warnings=regime_warnings(model, params, ratio),
        defined={"omega_m_eff": wm_eff is not None, "omega_c_eff": wc_eff is not None,
                 "G_mc": G is not None, "r_m": r_m is not None, "r_c": r_c is not None},
    )


def effective_model(model: DerivedModel, params: SystemParams, ss, *, ratio: float = 10.0
                    ) -> EffectiveModel:
    """Effective two-mode parameters at steady state ``ss``."""
    return effective_from_detuning(model, params, ss.Delta_d, ss.photon_number, ratio=ratio)


@dataclass
class EffectiveCurve:
    Delta_d: np.ndarray
    nu_m: np.ndarray
    nu_c: np.ndarray
    omega_m_eff: np.ndarray
    omega_c_eff: np.ndarray
    G_mc: np.ndarray
    r_m: np.ndarray
    r_c: np.ndarray

    def defined(self, name) -> np.ndarray:
        return ~np.isnan(getattr(self, name))


def _nan(v):
    return math.nan if v is None else v


def effective_sweep(model: DerivedModel, params: SystemParams, Delta_d_grid: Sequence[float],
                    *, eta: float | None = None) -> EffectiveCurve:
    """Effective parameters with ``Delta_d`` as the independent variable.

    The photon number is the linear-cavity value
    ``eta^2 / (kappa^2 + Delta_d^2)``; no cubic is solved.  Undefined
    values are NaN.
    """
    eta = params.eta if eta is None else eta
    grid = np.asarray(Delta_d_grid, dtype=float)
    cols = {k: [] for k in ("nu_m", "nu_c", "omega_m_eff", "omega_c_eff", "G_mc", "r_m", "r_c")}
    for Dd in grid:
        n = eta ** 2 / (params.kappa ** 2 + Dd ** 2)
        eff = effective_from_detuning(model, params, float(Dd), n)
        for k in cols:
            cols[k].append(_nan(getattr(eff, k)))
    return EffectiveCurve(Delta_d=grid, **{k: np.array(v, dtype=float) for k, v in cols.items()})


def dZ_diffusion(eff: EffectiveModel, params: SystemParams) -> float:
    """Symmetrised white-noise strength of the field noise ``dZ``."""
    k = params.kappa
    return 2.0 * k * eff.photon_number * (2.0 * params.n_ph + 1.0) / (k * k + eff.Delta_d ** 2)


def effective_two_mode_system(eff: EffectiveModel, model: DerivedModel,
                              params: SystemParams) -> LinearSystem:
    """Reduced 6x6 system over ``(q, p, Q, P, psi, theta)``.

    The field noise ``dZ`` enters the mirror momentum with ``+xi_m`` and the
    condensate momentum with ``-xi_c``, so the two momentum noises are
    correlated with strength ``-xi_m xi_c <dZ dZ>``.
    """
    if eff.degenerate:
        raise DegenerateModelError("an effective oscillator has zero stiffness")
    pn = params.phase_noise
    wm, wc = params.omega_m, model.omega_c
    K = eff.coupling_mc
    A = np.array([
        [0.0, wm, 0.0, 0.0, 0.0, 0.0],
        [-(wm - eff.nu_m), -params.gamma_m, -K, 0.0, eff.psi_drive_m, 0.0],
        [0.0, 0.0, 0.0, wc, 0.0, 0.0],
        [-K, 0.0, -(wc - eff.nu_c), -params.gamma_c, eff.psi_drive_c, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, pn.omega_N],
        [0.0, 0.0, 0.0, 0.0, -pn.omega_N, -pn.gamma_tilde],
    ])
    Z = dZ_diffusion(eff, params)
    D = np.zeros((6, 6))
    D[1, 1] = model.gamma_m_prime + model.xi_m ** 2 * Z
    D[3, 3] = model.gamma_c_prime + model.xi_c ** 2 * Z
    D[1, 3] = D[3, 1] = -model.xi_m * model.xi_c * Z
    D[5, 5] = 2.0 * pn.Gamma_l * pn.omega_N ** 2
    return LinearSystem(A=A, D=D, kappa=params.kappa, mode_index=dict(REDUCED_MODE_INDEX),
                        labels=REDUCED_LABELS)
