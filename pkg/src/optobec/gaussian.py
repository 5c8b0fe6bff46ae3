"""Stationary covariance matrices and bipartite logarithmic negativity.

Covariances use the symmetrised convention
``V_ij = <du_i du_j + du_j du_i> / 2``, so the vacuum has ``V = I/2`` and a
two-mode state is entangled iff the smallest symplectic eigenvalue of its
partial transpose is below 1/2.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import IllConditionedError, NumericalError, UnstableSystemError
from .linsys import LinearSystem, build_linear_system, check_stability
from .model import DerivedModel, SystemParams, derive
from .steadystate import follow_branch

LYAPUNOV_RTOL = 1e-10
MAX_CONDITION = 1e14


class Bipartition(str, enum.Enum):
    mirror_atom = "mirror_atom"
    mirror_field = "mirror_field"
    atom_field = "atom_field"

    @property
    def modes(self):
        return {"mirror_atom": ("mirror", "atom"),
                "mirror_field": ("mirror", "field"),
                "atom_field": ("atom", "field")}[self.value]


@dataclass(frozen=True)
class CovarianceMatrix:
    V: np.ndarray
    residual: float
    mode_index: dict = field(default_factory=dict)

    def block(self, *modes) -> np.ndarray:
        idx = [i for m in modes for i in self.mode_index[m]]
        return self.V[np.ix_(idx, idx)]

    def bipartition(self, pair) -> np.ndarray:
        """4x4 covariance of the two modes of ``pair`` (others traced out)."""
        return self.block(*Bipartition(pair).modes)

    def quantum_block(self) -> np.ndarray:
        return self.block(*[m for m in self.mode_index if m != "phase"])


def lyapunov_residual(A, V, D) -> float:
    A, V, D = (np.asarray(M, dtype=float) for M in (A, V, D))
    scale = np.abs(D).max()
    r = np.abs(A @ V + V @ A.T + D).max()
    return float(r / scale) if scale > 0 else float(r)


def solve_lyapunov(sys: LinearSystem, *, check=True) -> CovarianceMatrix:
    """Solve ``A V + V A^T = -D`` by a dense Kronecker-product linear solve.

    Raises
    ------
    UnstableSystemError
        If ``A`` is not strictly stable; no stationary state exists.
    IllConditionedError
        If the vectorised operator is numerically singular.
    """
    A = np.asarray(sys.A, dtype=float)
    D = np.asarray(sys.D, dtype=float)
    if check:
        report = check_stability(sys)
        if not report.stable:
            raise UnstableSystemError(report.max_real_eig)
    n = A.shape[0]
    # rescaling time leaves V unchanged and keeps K near unit norm
    s = np.abs(A).max() or 1.0
    As, Ds = A / s, D / s
    eye = np.eye(n)
    K = np.kron(eye, As) + np.kron(As, eye)
    cond = np.linalg.cond(K)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise IllConditionedError(cond)
    # row-major vec: (A V)_ij -> kron(A, I), (V A^T)_ij -> kron(I, A)
    V = np.linalg.solve(K, -Ds.reshape(-1)).reshape(n, n)
    V = 0.5 * (V + V.T)
    res = lyapunov_residual(A, V, D)
    if res > LYAPUNOV_RTOL:
        raise NumericalError(f"Lyapunov residual {res:.3g} exceeds {LYAPUNOV_RTOL}")
    return CovarianceMatrix(V=V, residual=res, mode_index=dict(sys.mode_index))


def symplectic_form(n_modes: int) -> np.ndarray:
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def symplectic_eigenvalues(V) -> np.ndarray:
    """Symplectic spectrum of a ``2n x 2n`` covariance (ascending, length n)."""
    V = np.asarray(V, dtype=float)
    n = V.shape[0] // 2
    ev = np.abs(np.linalg.eigvals(1j * symplectic_form(n) @ V))
    return np.sort(ev)[::2]


def min_partial_transpose_eigenvalue(V_bp) -> float:
    """Smallest symplectic eigenvalue of the partial transpose of a 4x4 covariance.

    Taken from the spectrum of ``i Omega V~`` rather than the closed
    determinant formula, which loses about half the digits near product
    states.
    """
    V_bp = np.asarray(V_bp, dtype=float)
    flip = np.diag([1.0, 1.0, 1.0, -1.0])
    return float(symplectic_eigenvalues(flip @ V_bp @ flip)[0])


def log_negativity(V, pair=None) -> float:
    """Logarithmic negativity ``max(0, -ln(2 eta_minus))`` of a bipartition.

    ``V`` may be a :class:`CovarianceMatrix` together with a ``pair``
    selector, or directly a 4x4 two-mode covariance.
    """
    if isinstance(V, CovarianceMatrix):
        V_bp = V.bipartition(pair)
    else:
        V_bp = np.asarray(V, dtype=float)
        if pair is not None or V_bp.shape != (4, 4):
            raise ValueError("pass a CovarianceMatrix with a pair, or a 4x4 matrix alone")
    eta_minus = min_partial_transpose_eigenvalue(V_bp)
    if eta_minus <= 0.0:
        raise NumericalError("partial-transpose symplectic eigenvalue is zero")
    return max(0.0, -math.log(2.0 * eta_minus))


PAIRS = (Bipartition.mirror_atom, Bipartition.atom_field, Bipartition.mirror_field)


@dataclass
class EntanglementCurve:
    """Per-point entanglement results; failed points are NaN with a status."""

    x: np.ndarray
    EN: dict
    status: list
    stable: np.ndarray
    branch_id: list
    photon_number: np.ndarray
    Delta_d: np.ndarray
    min_symplectic: np.ndarray

    def peak(self, pair=Bipartition.mirror_atom):
        y = self.EN[Bipartition(pair)]
        if np.all(np.isnan(y)):
            return math.nan, math.nan
        i = int(np.nanargmax(y))
        return float(y[i]), float(self.x[i])


def _point(args):
    model, params, ss = args
    sys = build_linear_system(model, params, ss)
    rep = check_stability(sys)
    if not rep.stable:
        return "unstable", False, None, math.nan
    try:
        cov = solve_lyapunov(sys, check=False)
        ens = {p: log_negativity(cov, p) for p in PAIRS}
    except NumericalError:
        return "undefined", True, None, math.nan
    nu = float(symplectic_eigenvalues(cov.quantum_block()).min())
    return ("fold_point" if ss.fold_point else "ok"), True, ens, nu


def _evaluate(jobs_args, jobs):
    if jobs and jobs > 1 and len(jobs_args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_point, jobs_args, chunksize=max(1, len(jobs_args) // (4 * jobs))))
    return [_point(a) for a in jobs_args]


def _collect(xs, states, results):
    EN = {p: np.full(len(xs), np.nan) for p in PAIRS}
    status, stable, nus = [], [], []
    for i, (st, stab, ens, nu) in enumerate(results):
        status.append(st)
        stable.append(stab)
        nus.append(nu)
        if ens is not None:
            for p in PAIRS:
                EN[p][i] = ens[p]
    return EntanglementCurve(
        x=np.asarray(xs, dtype=float), EN=EN, status=status, stable=np.array(stable),
        branch_id=[s.branch_id for s in states],
        photon_number=np.array([s.photon_number for s in states]),
        Delta_d=np.array([s.Delta_d for s in states]),
        min_symplectic=np.array(nus),
    )


def entanglement_sweep(model: DerivedModel | None, params: SystemParams,
                       delta_c_grid: Sequence[float], *, branch="continuation",
                       jobs: int | None = None) -> EntanglementCurve:
    """E_N of all three bipartitions versus cavity-pump detuning [rad/s].

    Unstable points are reported as NaN with status ``"unstable"`` rather
    than as zero entanglement.
    """
    model = derive(params) if model is None else model
    grid = np.asarray(delta_c_grid, dtype=float)
    states = follow_branch(model, params, grid, branch)
    args = [(model, params.with_updates(delta_c_detuning=float(dc)), s)
            for dc, s in zip(grid, states)]
    return _collect(grid, states, _evaluate(args, jobs))


def entanglement_vs_pump(params: SystemParams, eta_grid: Sequence[float], *,
                         delta_c: float | None = None, branch="continuation",
                         jobs: int | None = None) -> EntanglementCurve:
    """E_N versus pump rate ``eta`` [rad/s] at fixed detuning."""
    if delta_c is not None:
        params = params.with_updates(delta_c_detuning=float(delta_c))
    model = derive(params)
    grid = np.asarray(eta_grid, dtype=float)
    states = follow_branch(model, params, grid, branch, variable="eta")
    args = [(model, params.with_updates(eta=float(e)), s) for e, s in zip(grid, states)]
    return _collect(grid, states, _evaluate(args, jobs))


def stationary_covariance(params: SystemParams, *, model=None, branch="continuation"):
    """Convenience: steady state, linear system and covariance at ``params``."""
    model = derive(params) if model is None else model
    ss = follow_branch(model, params, [params.delta_c_detuning], branch)[0]
    sys = build_linear_system(model, params, ss)
    return ss, sys, solve_lyapunov(sys)
