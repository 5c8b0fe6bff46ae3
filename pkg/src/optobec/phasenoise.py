"""Laser phase noise: analytic spectrum and a stochastic integrator.

The phase-rate fluctuation ``psi`` is white noise filtered by a damped
oscillator (centre ``omega_N``, bandwidth ``gamma_tilde``).  The integrator
below works for any linear system ``du = A u dt + B dW`` with ``B B^T = D``;
it treats the quantum input noises as classical Gaussian white noise with the
same symmetrised correlators, which reproduces every stationary second
moment of a linear system.  That makes it an independent check on the
Lyapunov solver.
"""

from __future__ import annotations

import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import linalg, signal

from .errors import SimulationDivergedError, UnstableSystemError
from .linsys import LinearSystem, check_stability
from .model import PhaseNoiseParams

SCHEMES = ("euler", "exact")
DUMP_MAGIC = b"OPTOBEC1"
_CHUNK = 512


@dataclass(frozen=True)
class NoiseSpectrumPoint:
    omega: float
    S: float


def spectral_density(omega, pn: PhaseNoiseParams):
    """Two-sided power spectral density of ``psi`` at angular frequency ``omega``.

    ``(1/2pi) * integral S domega`` equals the stationary variance.
    """
    w = np.asarray(omega, dtype=float)
    wN2 = pn.omega_N ** 2
    return 2.0 * pn.Gamma_l * wN2 * wN2 / ((w * w - wN2) ** 2 + pn.gamma_tilde ** 2 * w * w)


def spectrum(pn: PhaseNoiseParams, omega_grid) -> list[NoiseSpectrumPoint]:
    grid = np.asarray(omega_grid, dtype=float)
    if not np.all(np.isfinite(grid)):
        raise ValueError("omega grid must be finite")
    return [NoiseSpectrumPoint(float(w), float(s)) for w, s in zip(grid, spectral_density(grid, pn))]


def peak_frequency(pn: PhaseNoiseParams) -> float:
    """Location of the spectral maximum (0 for an overdamped filter)."""
    arg = pn.omega_N ** 2 - 0.5 * pn.gamma_tilde ** 2
    return math.sqrt(arg) if arg > 0 else 0.0


def stationary_variance(pn: PhaseNoiseParams) -> float:
    return pn.Gamma_l * pn.omega_N ** 2 / pn.gamma_tilde


@dataclass(frozen=True)
class SdeRunConfig:
    """Integration settings.

    ``scheme="euler"`` is plain Euler-Maruyama and requires
    ``dt * ||A||_2 < 0.1``.  ``scheme="exact"`` uses the exact one-step
    transition of the linear SDE (matrix exponential plus the integrated
    noise covariance) and has no step-size restriction; it is needed for
    stiff systems whose fast optical rotation would force billions of
    Euler steps.
    """

    dt: float
    n_steps: int
    n_trajectories: int = 200
    burn_in_fraction: float = 0.2
    seed: int = 0
    scheme: str = "euler"
    jobs: int = 1
    max_norm: float | None = None
    dump_path: str | None = None

    def validate(self, A=None):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be finite and > 0")
        if self.n_steps < 2 or self.n_trajectories < 2:
            raise ValueError("need at least 2 steps and 2 trajectories")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            raise ValueError("burn_in_fraction must lie in [0, 1)")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.n_steps - self.burn_in_steps < 1:
            raise ValueError("no steps left after burn-in")
        if A is not None and self.scheme == "euler":
            bound = self.dt * np.linalg.norm(A, 2)
            if bound >= 0.1:
                raise ValueError(f"Euler-Maruyama needs dt*||A|| < 0.1, got {bound:.3g}")

    @property
    def burn_in_steps(self) -> int:
        return int(self.burn_in_fraction * self.n_steps)


def relaxation_time(A) -> float:
    return 1.0 / float(np.min(np.abs(np.linalg.eigvals(A).real)))


def default_config(sys: LinearSystem, *, scheme="exact", relaxation_times=60.0,
                   n_steps=20_000, n_trajectories=200, seed=0, max_euler_steps=5_000_000,
                   **kw) -> SdeRunConfig:
    """Pick ``dt`` and ``n_steps`` so the run spans ``relaxation_times`` of
    the slowest mode."""
    total = relaxation_times * relaxation_time(sys.A)
    if scheme == "euler":
        dt = 0.05 / np.linalg.norm(sys.A, 2)
        n_steps = int(math.ceil(total / dt))
        if n_steps > max_euler_steps:
            raise ValueError(f"Euler-Maruyama would need {n_steps} steps; use scheme='exact'")
    else:
        dt = total / n_steps
    return SdeRunConfig(dt=dt, n_steps=n_steps, n_trajectories=n_trajectories, seed=seed,
                        scheme=scheme, **kw)


def _psd_sqrt(M):
    M = 0.5 * (M + M.T)
    w, U = np.linalg.eigh(M)
    w = np.clip(w, 0.0, None)
    return U * np.sqrt(w)


def discretize(A, D, dt, scheme):
    """One-step map ``u -> Phi u + L xi`` with ``xi ~ N(0, I)``."""
    A = np.asarray(A, dtype=float)
    D = np.asarray(D, dtype=float)
    n = A.shape[0]
    if scheme == "euler":
        return np.eye(n) + dt * A, math.sqrt(dt) * _psd_sqrt(D)
    # integrated covariance Q(dt) = int_0^dt e^{As} D e^{A^T s} ds by doubling
    norm = np.abs(A).sum(axis=1).max()
    k = max(0, int(math.ceil(math.log2(max(dt * norm, 1e-300) / 1e-3))))
    h = dt / 2 ** k
    Ah = A * h
    AD = Ah @ D
    Q = D * h + 0.5 * h * (AD + AD.T) + h / 6.0 * (Ah @ AD + 2.0 * AD @ Ah.T + (Ah @ AD).T)
    Phi = linalg.expm(Ah)
    for _ in range(k):
        Q = Q + Phi @ Q @ Phi.T
        Phi = Phi @ Phi
    return Phi, _psd_sqrt(Q)


@dataclass
class SdeResult:
    V_est: np.ndarray
    stderr: np.ndarray
    per_trajectory: np.ndarray
    config: SdeRunConfig


class _Kahan:
    def __init__(self, shape):
        self.s = np.zeros(shape)
        self.c = np.zeros(shape)

    def add(self, x):
        y = x - self.c
        t = self.s + y
        self.c = (t - self.s) - y
        self.s = t


def _norm_bound(D, dt, n_steps):
    return 1e6 * (math.sqrt(float(np.abs(D).max()) * dt * n_steps) + 1.0)


def _run_group(Phi, L, seeds, n_steps, burn, max_norm, record=None, dump=None, dt=None):
    """Simulate one group of trajectories; returns per-trajectory covariance
    estimates and optionally the recorded time series of one coordinate."""
    rngs = [np.random.default_rng(s) for s in seeds]
    nt, n = len(seeds), Phi.shape[0]
    m = L.shape[1]
    X = np.zeros((nt, n))
    PhiT, LT = Phi.T, L.T
    acc = _Kahan((nt, n, n))
    rec = np.empty((nt, n_steps - burn)) if record is not None else None
    fh = None
    if dump is not None:
        fh = open(dump, "wb")
        fh.write(DUMP_MAGIC + struct.pack("<qqd", n_steps, n, dt))
    try:
        step = 0
        while step < n_steps:
            T = min(_CHUNK, n_steps - step)
            W = np.stack([r.standard_normal((T, m)) for r in rngs]) @ LT
            states = np.empty((nt, T, n))
            for t in range(T):
                X = X @ PhiT + W[:, t]
                states[:, t] = X
            peak = np.abs(states).max()
            if not np.isfinite(peak) or peak > max_norm:
                bad = np.argmax(~np.isfinite(states).all(axis=(0, 2)) |
                                (np.abs(states).max(axis=(0, 2)) > max_norm))
                raise SimulationDivergedError(step + int(bad), float(peak))
            if fh is not None:
                fh.write(states[0].astype("<f8").tobytes())
            lo = max(0, burn - step)
            if lo < T:
                kept = states[:, lo:]
                acc.add(np.einsum("bti,btj->bij", kept, kept))
                if rec is not None:
                    rec[:, step + lo - burn: step + T - burn] = kept[:, :, record]
            step += T
    finally:
        if fh is not None:
            fh.close()
    return acc.s / (n_steps - burn), rec


def _seeds(cfg):
    return np.random.SeedSequence(cfg.seed).spawn(cfg.n_trajectories)


def _groups(items, jobs):
    jobs = max(1, min(jobs, len(items)))
    size = math.ceil(len(items) / jobs)
    return [items[i:i + size] for i in range(0, len(items), size)]


def _simulate(A, D, cfg, record=None):
    Phi, L = discretize(A, D, cfg.dt, cfg.scheme)
    burn = cfg.burn_in_steps
    max_norm = cfg.max_norm or _norm_bound(D, cfg.dt, cfg.n_steps)
    seeds = _seeds(cfg)
    groups = _groups(seeds, cfg.jobs)
    args = [(Phi, L, g, cfg.n_steps, burn, max_norm, record,
             cfg.dump_path if i == 0 else None, cfg.dt) for i, g in enumerate(groups)]
    if len(groups) > 1:
        with ProcessPoolExecutor(max_workers=len(groups)) as ex:
            out = list(ex.map(_run_group, *zip(*args)))
    else:
        out = [_run_group(*a) for a in args]
    covs = np.concatenate([o[0] for o in out])
    recs = np.concatenate([o[1] for o in out]) if record is not None else None
    return covs, recs


def _fsum_mean(a):
    n = a.shape[0]
    flat = a.reshape(n, -1)
    mean = np.array([math.fsum(flat[:, j]) / n for j in range(flat.shape[1])])
    return mean.reshape(a.shape[1:])


def simulate_sde(sys: LinearSystem, cfg: SdeRunConfig) -> SdeResult:
    """Ensemble- and time-averaged stationary covariance of ``sys``.

    Each trajectory contributes one time average after burn-in; the standard
    error is the spread of those averages over ``sqrt(n_trajectories)``.
    Per-trajectory random streams derive from ``(seed, index)`` so results do
    not depend on ``cfg.jobs``.
    """
    rep = check_stability(sys)
    if not rep.stable:
        raise UnstableSystemError(rep.max_real_eig)
    cfg.validate(sys.A)
    covs, _ = _simulate(sys.A, sys.D, cfg)
    covs = 0.5 * (covs + covs.transpose(0, 2, 1))
    mean = _fsum_mean(covs)
    stderr = covs.std(axis=0, ddof=1) / math.sqrt(covs.shape[0])
    return SdeResult(V_est=mean, stderr=stderr, per_trajectory=covs, config=cfg)


@dataclass
class EmpiricalSpectrum:
    omega: np.ndarray
    S_empirical: np.ndarray
    stderr: np.ndarray
    S_analytic: np.ndarray | None = None


def spectrum_from_trajectories(sys: LinearSystem, cfg: SdeRunConfig, *, nperseg=1024,
                               pn: PhaseNoiseParams | None = None) -> EmpiricalSpectrum:
    """Welch-averaged two-sided spectrum of ``psi`` from simulated trajectories.

    Only the phase pair is integrated when it is dynamically autonomous
    (nothing else feeds into it), which is always the case for the systems
    built by this package.
    """
    rep = check_stability(sys)
    if not rep.stable:
        raise UnstableSystemError(rep.max_real_eig)
    idx = list(sys.mode_index["phase"])
    others = [i for i in range(sys.dim) if i not in idx]
    if np.any(sys.A[np.ix_(idx, others)] != 0) or np.any(sys.D[np.ix_(idx, others)] != 0):
        A, D, rec = sys.A, sys.D, idx[0]
    else:
        A, D, rec = sys.A[np.ix_(idx, idx)], sys.D[np.ix_(idx, idx)], 0
    cfg.validate(A)
    cfg = replace(cfg, dump_path=None)
    _, series = _simulate(A, D, cfg, record=rec)
    f, P = signal.welch(series, fs=1.0 / cfg.dt, nperseg=min(nperseg, series.shape[1]),
                        return_onesided=False, detrend=False, scaling="density", axis=-1)
    keep = f >= 0
    omega = 2.0 * math.pi * f[keep]
    P = P[:, keep]
    order = np.argsort(omega)
    omega, P = omega[order], P[:, order]
    S = P.mean(axis=0)
    err = P.std(axis=0, ddof=1) / math.sqrt(P.shape[0])
    return EmpiricalSpectrum(omega=omega, S_empirical=S, stderr=err,
                             S_analytic=None if pn is None else spectral_density(omega, pn))


def read_trajectory_dump(path) -> tuple[float, np.ndarray]:
    """Read a dump written with ``SdeRunConfig(dump_path=...)``.

    Layout: 8-byte magic ``OPTOBEC1``, little-endian int64 ``n_steps``,
    int64 ``dim``, float64 ``dt``, then ``n_steps`` rows of ``dim``
    little-endian float64 values.
    """
    raw = Path(path).read_bytes()
    if raw[:8] != DUMP_MAGIC:
        raise ValueError("not a trajectory dump")
    n_steps, dim, dt = struct.unpack("<qqd", raw[8:32])
    data = np.frombuffer(raw[32:], dtype="<f8").reshape(n_steps, dim)
    return dt, data
