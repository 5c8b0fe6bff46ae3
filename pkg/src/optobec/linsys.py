"""Linearised fluctuation dynamics: drift and diffusion matrices.

State ordering of the full system is ``[q, p, X, Y, Q, P, psi, theta]``:
mirror, cavity field, Bogoliubov mode and the classical phase-noise pair.

Sign convention: the mirror couples as ``-xi_m a^dag a q`` and the condensate
as ``+xi_c a^dag a Q``, so the ``P`` row carries ``-G_Rc, -G_Ic`` while the
``p`` row carries ``+G_Rm, +G_Im``.  Flipping the sign of ``Q`` absorbs the
asymmetry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .model import DerivedModel, SystemParams

STATE_LABELS = ("q", "p", "X", "Y", "Q", "P", "psi", "theta")
FULL_MODE_INDEX = {"mirror": (0, 1), "field": (2, 3), "atom": (4, 5), "phase": (6, 7)}
STABILITY_EPS = 1e-9  # in units of kappa

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class LinearSystem:
    """Drift ``A`` and diffusion ``D`` of ``du/dt = A u + noise``.

    ``kappa`` sets the marginal-stability threshold.  ``couplings`` holds
    ``G_Rm, G_Im, G_Rc, G_Ic`` for the full model (empty for reduced ones).
    """

    A: np.ndarray
    D: np.ndarray
    kappa: float
    mode_index: dict = field(default_factory=lambda: dict(FULL_MODE_INDEX))
    labels: tuple = STATE_LABELS
    couplings: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.A.shape[0]

    @property
    def quantum_indices(self):
        return [i for name, pair in self.mode_index.items() if name != "phase" for i in pair]

    def dump(self) -> str:
        """Plain-text grids of A and D with a header naming the ordering."""
        header = "# ordering: [" + ", ".join(self.labels) + "]"
        parts = [header]
        for name, M in (("A", self.A), ("D", self.D)):
            parts.append(f"# {name}")
            for row in M:
                parts.append(" ".join(f"{v: .17e}" for v in row))
        return "\n".join(parts) + "\n"


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    max_real_eig: float
    eigenvalues: np.ndarray


def couplings_for(model: DerivedModel, alpha: complex) -> dict:
    aR, aI = alpha.real, alpha.imag
    return {
        "G_Rm": SQRT2 * aR * model.xi_m,
        "G_Im": SQRT2 * aI * model.xi_m,
        "G_Rc": SQRT2 * aR * model.xi_c,
        "G_Ic": SQRT2 * aI * model.xi_c,
    }


def diffusion_matrix(model: DerivedModel, params: SystemParams) -> np.ndarray:
    pn = params.phase_noise
    field_noise = params.kappa * (2.0 * params.n_ph + 1.0)
    return np.diag([0.0, model.gamma_m_prime, field_noise, field_noise,
                    0.0, model.gamma_c_prime, 0.0, 2.0 * pn.Gamma_l * pn.omega_N ** 2])


def build_linear_system(model: DerivedModel, params: SystemParams, ss) -> LinearSystem:
    """Assemble the 8x8 drift and diffusion matrices around steady state ``ss``."""
    g = couplings_for(model, ss.alpha)
    aR, aI = ss.alpha.real, ss.alpha.imag
    wm, wc = params.omega_m, model.omega_c
    k, Dd = params.kappa, ss.Delta_d
    wN, gt = params.phase_noise.omega_N, params.phase_noise.gamma_tilde
    A = np.array([
        [0.0, wm, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [-wm, -params.gamma_m, g["G_Rm"], g["G_Im"], 0.0, 0.0, 0.0, 0.0],
        [-g["G_Im"], 0.0, -k, Dd, g["G_Ic"], 0.0, -SQRT2 * aI, 0.0],
        [g["G_Rm"], 0.0, -Dd, -k, -g["G_Rc"], 0.0, SQRT2 * aR, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, wc, 0.0, 0.0],
        [0.0, 0.0, -g["G_Rc"], -g["G_Ic"], -wc, -params.gamma_c, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, wN],
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -wN, -gt],
    ])
    return LinearSystem(A=A, D=diffusion_matrix(model, params), kappa=k, couplings=g)


def check_stability(sys: LinearSystem, eps: float = STABILITY_EPS) -> StabilityReport:
    """Stable iff every eigenvalue of ``A`` has real part below ``-eps*kappa``.

    Marginal modes (e.g. an undamped noise filter) therefore count as unstable.
    """
    A = np.asarray(sys.A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise NumericalError("drift matrix contains non-finite entries")
    try:
        ev = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue solver failed: {exc}") from exc
    if not np.all(np.isfinite(ev)):
        raise NumericalError("eigenvalue solver returned non-finite values")
    max_re = float(ev.real.max())
    return StabilityReport(stable=max_re < -eps * sys.kappa, max_real_eig=max_re, eigenvalues=ev)


def hamiltonian_matrix(model: DerivedModel, params: SystemParams, ss) -> np.ndarray:
    """Symmetric matrix ``H`` with ``dH/hbar = u^T H u / 2`` for the
    linearised Hamiltonian (the phase pair enters only through its own
    oscillator term and as an external drive of the field)."""
    aR, aI = ss.alpha.real, ss.alpha.imag
    H = np.zeros((8, 8))
    # -sqrt2 (aR X + aI Y)(xi_m q - xi_c Q + psi)
    field_vec = {2: -SQRT2 * aR, 3: -SQRT2 * aI}
    other_vec = {0: model.xi_m, 4: -model.xi_c, 6: 1.0}
    for i, a in field_vec.items():
        for j, b in other_vec.items():
            H[i, j] += a * b
            H[j, i] += a * b
    for i, w in ((2, ss.Delta_d), (3, ss.Delta_d), (0, params.omega_m), (1, params.omega_m),
                 (4, model.omega_c), (5, model.omega_c),
                 (6, params.phase_noise.omega_N), (7, params.phase_noise.omega_N)):
        H[i, i] += w
    return H


def consistency_check_hamiltonian(sys: LinearSystem, model: DerivedModel, params: SystemParams,
                                  ss) -> float:
    """Rebuild ``A`` from Hamilton's equations plus damping and return the
    max-abs deviation from ``sys.A`` relative to ``max|A|``."""
    H = hamiltonian_matrix(model, params, ss)
    A = np.zeros((8, 8))
    # quantum pairs: x' = dH/dy, y' = -dH/dx
    for i in (0, 2, 4):
        A[i] = H[i + 1]
        A[i + 1] = -H[i]
    # the phase pair only feels its own oscillator term
    A[6, 6:] = H[7, 6:]
    A[7, 6:] = -H[6, 6:]
    for i, rate in ((1, params.gamma_m), (2, params.kappa), (3, params.kappa),
                    (5, params.gamma_c), (7, params.phase_noise.gamma_tilde)):
        A[i, i] -= rate
    scale = np.abs(sys.A).max()
    return float(np.abs(A - sys.A).max() / scale) if scale > 0 else float(np.abs(A).max())
