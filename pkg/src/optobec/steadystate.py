"""Semiclassical steady state of the driven cavity and its bistable branches.

With ``n = |alpha|^2`` the self-consistency condition
``alpha = -eta / (kappa + i Delta_d)``, ``Delta_d = delta_c - kerr * n``
reduces to the real cubic ``n * (kappa^2 + (delta_c - kerr*n)^2) = eta^2``.
The cubic is solved through its companion matrix and polished by Newton
steps, so middle (unstable) branches are never missed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .model import DerivedModel, SystemParams

FOLD_RTOL = 1e-6
BRANCH_MODES = ("continuation", "lower", "middle", "upper")


@dataclass(frozen=True)
class SteadyState:
    """One steady-state solution.

    ``branch_id`` is ``"single"`` when the cubic has one root, otherwise one
    of ``"lower"``, ``"middle"``, ``"upper"`` ordered by photon number.
    ``dynamically_stable`` stays ``None`` until the drift matrix is checked.
    """

    alpha: complex
    photon_number: float
    Delta_d: float
    delta_c: float
    branch_id: str = "single"
    fold_point: bool = False
    dynamically_stable: bool | None = None

    @property
    def alpha_R(self) -> float:
        return self.alpha.real

    @property
    def alpha_I(self) -> float:
        return self.alpha.imag


def cubic_residual(n, kerr, delta_c, kappa, eta):
    """``n*(kappa^2 + (delta_c - kerr*n)^2) - eta^2`` (vectorised)."""
    n = np.asarray(n, dtype=float)
    return n * (kappa ** 2 + (delta_c - kerr * n) ** 2) - eta ** 2


def photon_number_roots(kerr: float, delta_c: float, kappa: float, eta: float):
    """All real non-negative roots of the steady-state cubic.

    Returns
    -------
    roots : ndarray
        Ascending photon numbers.
    folds : ndarray of bool
        True where two roots coalesced within the fold tolerance and were
        reported once.
    """
    if eta == 0.0:
        return np.array([0.0]), np.array([False])
    # Work in units of kappa; the bound n <= (eta/kappa)^2 always holds.
    x = delta_c / kappa
    b = kerr / kappa
    e2 = (eta / kappa) ** 2
    if b == 0.0:
        return np.array([e2 / (1.0 + x * x)]), np.array([False])

    raw = np.roots([b * b, -2.0 * x * b, 1.0 + x * x, -e2])
    cands = []
    for r in raw:
        if abs(r.imag) <= 1e-6 * max(abs(r), 1e-300) and r.real > 0.0:
            cands.append(_polish(r.real, b, x, e2))
    cands = sorted(c for c in cands if c is not None)

    roots, folds = [], []
    for c in cands:
        if roots and abs(c - roots[-1]) < FOLD_RTOL * max(roots[-1], 1.0):
            roots[-1] = 0.5 * (roots[-1] + c)
            folds[-1] = True
        else:
            roots.append(c)
            folds.append(False)
    if not roots:
        # Only possible right at a fold where the pair is numerically complex.
        best = min(raw, key=lambda r: abs(r.imag))
        roots, folds = [_polish(best.real, b, x, e2, force=True)], [True]
    return np.array(roots) * 1.0, np.array(folds)


def _polish(n, b, x, e2, force=False):
    def f(v):
        return v * (1.0 + (x - b * v) ** 2) - e2

    best, fbest = n, abs(f(n))
    for _ in range(30):
        u = x - b * best
        d = 1.0 + u * u - 2.0 * b * best * u
        if d == 0.0:
            break
        cand = best - f(best) / d
        fc = abs(f(cand))
        if not fc < fbest:
            break
        best, fbest = cand, fc
        if fbest <= 1e-15 * e2:
            break
    if force or fbest <= 1e-9 * e2:
        return best
    return None


def steady_state_from_photon_number(n: float, model: DerivedModel, params: SystemParams,
                                    delta_c: float | None = None, **meta) -> SteadyState:
    delta_c = params.delta_c_detuning if delta_c is None else delta_c
    Delta_d = delta_c - model.kerr * n
    alpha = -params.eta / complex(params.kappa, Delta_d)
    return SteadyState(alpha=alpha, photon_number=float(n), Delta_d=Delta_d,
                       delta_c=delta_c, **meta)


def solve_steady_state(model: DerivedModel, params: SystemParams) -> list[SteadyState]:
    """Every steady state at ``params.delta_c_detuning``, ascending in |alpha|^2."""
    roots, folds = photon_number_roots(model.kerr, params.delta_c_detuning,
                                       params.kappa, params.eta)
    labels = ["single"] if len(roots) == 1 else ["lower", "middle", "upper"][:len(roots)]
    if len(roots) == 2:
        # one fold pair merged: name the survivors by position
        labels = ["lower", "upper"]
    return [steady_state_from_photon_number(n, model, params, branch_id=lab, fold_point=bool(fp))
            for n, lab, fp in zip(roots, labels, folds)]


@dataclass
class PhotonCurve:
    """Flat table of steady-state branches over a detuning grid.

    Each row is one root; ``curve`` identifies the continuous branch it
    belongs to (tracked by root proximity between neighbouring grid points).
    """

    delta_c: np.ndarray
    curve: np.ndarray
    branch_id: list
    photon_number: np.ndarray
    Delta_d: np.ndarray
    stable: np.ndarray
    fold_point: np.ndarray

    def branch(self, curve_id):
        m = self.curve == curve_id
        return self.delta_c[m], self.photon_number[m]

    @property
    def n_curves(self):
        return int(self.curve.max()) + 1 if len(self.curve) else 0


def sweep_photon_number(model: DerivedModel, params: SystemParams,
                        delta_c_grid: Sequence[float], *, check_stability=True) -> PhotonCurve:
    """Photon number on every branch for each detuning in ``delta_c_grid`` [rad/s]."""
    from .linsys import build_linear_system, check_stability as _stab

    grid = np.asarray(delta_c_grid, dtype=float)
    if not np.all(np.isfinite(grid)):
        raise ValueError("delta_c grid must be finite")
    if np.any(np.diff(grid) < 0):
        raise ValueError("delta_c grid must be sorted")
    rows = []
    active = {}  # curve id -> last photon number
    next_id = 0
    for dc in grid:
        p = params.with_updates(delta_c_detuning=float(dc))
        states = solve_steady_state(model, p)
        ns = [s.photon_number for s in states]
        assign = _match(active, ns)
        new_active = {}
        for k, s in enumerate(states):
            cid = assign.get(k)
            if cid is None:
                cid = next_id
                next_id += 1
            new_active[cid] = s.photon_number
            stable = None
            if check_stability:
                stable = _stab(build_linear_system(model, p, s)).stable
            rows.append((dc, cid, s.branch_id, s.photon_number, s.Delta_d, stable, s.fold_point))
        active = new_active
    cols = list(zip(*rows)) if rows else [[]] * 7
    return PhotonCurve(
        delta_c=np.array(cols[0], dtype=float),
        curve=np.array(cols[1], dtype=int),
        branch_id=list(cols[2]),
        photon_number=np.array(cols[3], dtype=float),
        Delta_d=np.array(cols[4], dtype=float),
        stable=np.array(cols[5], dtype=object),
        fold_point=np.array(cols[6], dtype=bool),
    )


def _distance(a, b):
    return abs(a - b) / max(a, b, 1e-12)


def _match(active: dict, ns: list) -> dict:
    """Assign root indices to active curve ids minimising total relative jump."""
    ids = list(active)
    if not ids or not ns:
        return {}
    k = min(len(ids), len(ns))
    best, best_cost = {}, math.inf
    for chosen_ids in itertools.permutations(ids, k):
        for chosen_roots in itertools.combinations(range(len(ns)), k):
            cost = sum(_distance(active[c], ns[r]) for c, r in zip(chosen_ids, chosen_roots))
            if cost < best_cost:
                best_cost = cost
                best = dict(zip(chosen_roots, chosen_ids))
    return best


def follow_branch(model: DerivedModel, params: SystemParams, grid: Sequence[float],
                  mode: str = "continuation", variable: str = "delta_c_detuning"):
    """Pick one steady state per grid point.

    ``mode="continuation"`` starts from the first grid point with a unique
    root and follows the nearest root in both directions; the other modes
    select the named branch where it exists and the unique root elsewhere.
    Returns a list of ``SteadyState`` (``None`` never occurs: a real cubic
    always has a root).
    """
    if mode not in BRANCH_MODES:
        raise ValueError(f"unknown branch mode {mode!r}; expected one of {BRANCH_MODES}")
    all_states = []
    for v in grid:
        p = params.with_updates(**{variable: float(v)})
        all_states.append(solve_steady_state(model, p))

    if mode != "continuation":
        out = []
        for states in all_states:
            match = [s for s in states if s.branch_id == mode]
            out.append(match[0] if match else (states[0] if len(states) == 1 else
                                               states[{"lower": 0, "middle": len(states) // 2,
                                                       "upper": -1}[mode]]))
        return out

    start = next((i for i, s in enumerate(all_states) if len(s) == 1), 0)
    chosen = [None] * len(all_states)
    chosen[start] = all_states[start][0] if len(all_states[start]) == 1 else all_states[start][-1]
    for rng in (range(start + 1, len(all_states)), range(start - 1, -1, -1)):
        prev = chosen[start]
        for i in rng:
            cur = min(all_states[i], key=lambda s: _distance(s.photon_number, prev.photon_number))
            chosen[i] = cur
            prev = cur
    return chosen


def with_stability(ss: SteadyState, stable: bool) -> SteadyState:
    return replace(ss, dynamically_stable=bool(stable))
