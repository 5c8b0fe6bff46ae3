"""Named experiments (preset reproductions and custom sweeps) and their output files.

Each run writes one CSV per variant plus ``manifest.json``.  CSVs are plain
RFC-4180 with a header row; undefined or unstable values are empty fields,
and every row carries a ``status`` in ``{ok, unstable, undefined, fold_point}``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .adiabatic import effective_from_detuning, effective_sweep
from .gaussian import PAIRS, entanglement_sweep, entanglement_vs_pump, solve_lyapunov
from .linsys import LinearSystem, build_linear_system
from .model import DerivedModel, SystemParams, derive, paper_defaults
from .paramfile import apply_overrides, params_to_dict, parse_quantity
from .phasenoise import (SdeRunConfig, default_config, peak_frequency, simulate_sde,
                         spectral_density, spectrum_from_trajectories)
from .steadystate import follow_branch, sweep_photon_number

KINDS = ("photon_sweep", "entanglement_sweep", "entanglement_vs_pump", "collision_sweep",
         "effective_sweep", "spectrum", "oracle_check")
STATUSES = ("ok", "unstable", "undefined", "fold_point")
MODEL_OVERRIDE_KEYS = ("xi_m", "xi_c", "omega_c")


@dataclass(frozen=True)
class Grid:
    start: float
    stop: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 2:
            raise ValueError("grid needs n_points >= 2")
        if not (math.isfinite(self.start) and math.isfinite(self.stop)):
            raise ValueError("grid bounds must be finite")

    @classmethod
    def parse(cls, text: str) -> "Grid":
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid must look like start:stop:n, got {text!r}")
        return cls(float(parts[0]), float(parts[1]), int(parts[2]))

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.n_points)


@dataclass
class ExperimentSpec:
    """What to run.

    ``grid`` is in the normalised units of the swept axis (``delta_c/kappa``,
    ``Delta_d/kappa``, ``eta/kappa`` or ``omega/omega_N``).  Each variant is
    a dict of parameter overrides applied on top of ``params``.
    """

    kind: str
    params: SystemParams
    grid: Grid | None = None
    variants: list = field(default_factory=lambda: [{}])
    model_overrides: dict = field(default_factory=dict)
    seed: int = 0
    jobs: int = 1
    variable: str = "delta_c"
    branch: str = "continuation"
    fixed_delta_c: str | None = None
    trajectories: int | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if not self.variants:
            raise ValueError("variants must be non-empty")
        for k in self.model_overrides:
            if k not in MODEL_OVERRIDE_KEYS:
                raise ValueError(f"unknown model override {k!r}")
        if self.variable not in ("delta_c", "eta"):
            raise ValueError("variable must be 'delta_c' or 'eta'")

    def echo(self) -> dict:
        return {
            "kind": self.kind,
            "label": self.label,
            "params": params_to_dict(self.params),
            "grid": None if self.grid is None else [self.grid.start, self.grid.stop, self.grid.n_points],
            "variants": [dict(v) for v in self.variants],
            "model_overrides": dict(self.model_overrides),
            "seed": self.seed,
            "variable": self.variable,
            "branch": self.branch,
            "fixed_delta_c": self.fixed_delta_c,
            "trajectories": self.trajectories,
        }

    def input_hash(self) -> str:
        blob = json.dumps(self.echo(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


def _preset(name, params, **kw):
    return ExperimentSpec(params=params, label=name, **kw)


def figure_spec(name: str, params: SystemParams | None = None) -> ExperimentSpec:
    """Built-in experiment presets, keyed by subcommand name."""
    p = paper_defaults() if params is None else params
    fig2_model = {"xi_c": "0.2kappa", "xi_m": "0.05kappa", "omega_c": "1omega_m"}
    presets = {
        "fig2": dict(kind="effective_sweep", grid=Grid(-150, 50, 2001),
                     variants=[{"eta": "30kappa"}], model_overrides=fig2_model),
        "fig3": dict(kind="effective_sweep", grid=Grid(-10, 10, 801),
                     variants=[{"eta": "30kappa"}, {"eta": "60kappa"}], model_overrides=fig2_model),
        "fig4": dict(kind="photon_sweep", grid=Grid(-150, 150, 601), variants=[{"eta": "100kappa"}]),
        "fig5": dict(kind="entanglement_sweep", grid=Grid(-60, 20, 321),
                     variants=[{"Gamma_l": "1kHz"}, {"Gamma_l": "10kHz"}, {"Gamma_l": "100kHz"}]),
        "fig6": dict(kind="entanglement_vs_pump", grid=Grid(1, 150, 150), fixed_delta_c="-40kappa",
                     variants=[{"Gamma_l": "1kHz"}, {"Gamma_l": "10kHz"}, {"Gamma_l": "100kHz"}]),
        "fig7": dict(kind="collision_sweep", grid=Grid(-60, 20, 321),
                     variants=[{"Gamma_l": "10kHz", "omega_sw": "0omega_R"},
                               {"Gamma_l": "10kHz", "omega_sw": "0.5omega_R"},
                               {"Gamma_l": "10kHz", "omega_sw": "1omega_R"}]),
        "spectrum": dict(kind="spectrum", grid=Grid(0, 3, 301)),
        "oracle-check": dict(kind="oracle_check"),
        "sweep": dict(kind="entanglement_sweep", grid=Grid(-60, 20, 161)),
    }
    if name not in presets:
        raise ValueError(f"unknown experiment {name!r}")
    return _preset(name, p, **presets[name])


def resolve_variant(spec: ExperimentSpec, variant: dict) -> tuple[SystemParams, DerivedModel]:
    params = apply_overrides(spec.params, list(variant.items()))
    if spec.fixed_delta_c is not None:
        params = apply_overrides(params, [("delta_c_detuning", spec.fixed_delta_c)])
    over = {k: parse_quantity(v, params) for k, v in spec.model_overrides.items()}
    return params, derive(params, **over)


def _variant_name(variant: dict, i: int) -> str:
    if not variant:
        return f"v{i}"
    parts = [f"{k}={v}" for k, v in variant.items()]
    safe = "_".join(parts).replace("/", "per").replace(" ", "")
    return f"v{i}_{safe}"


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "" if not math.isfinite(v) else repr(float(v))
    return str(v)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _effective_columns(model, params, n, Dd):
    eff = effective_from_detuning(model, params, float(Dd), float(n))
    wm = params.omega_m
    ratio = lambda v: None if v is None else v / wm  # noqa: E731
    return [ratio(eff.G_mc), ratio(eff.omega_m_eff), ratio(eff.omega_c_eff), eff.r_m, eff.r_c]


EN_HEADER = ["EN_mirror_atom", "EN_atom_field", "EN_mirror_field"]
EFF_HEADER = ["G_mc_over_omega_m", "omega_m_eff_over_omega_m", "omega_c_eff_over_omega_m",
              "r_m", "r_c"]


def _run_entanglement(spec, params, model, axis):
    k = params.kappa
    norm = spec.grid.values()
    xs = norm * k
    if axis == "eta":
        curve = entanglement_vs_pump(params, xs, branch=spec.branch, jobs=spec.jobs)
        head = ["eta", "eta_over_kappa"]
    else:
        curve = entanglement_sweep(model, params, xs, branch=spec.branch, jobs=spec.jobs)
        head = ["delta_c", "delta_c_over_kappa"]
    header = head + EN_HEADER + ["stable_flag", "branch_id", "photon_number", "Delta_d",
                                 "Delta_d_over_omega_m", "min_symplectic"] + EFF_HEADER + ["status"]
    rows = []
    for i, x in enumerate(xs):
        p_i = params.with_updates(eta=float(x)) if axis == "eta" else params
        eff = _effective_columns(model, p_i, curve.photon_number[i], curve.Delta_d[i])
        rows.append([x, norm[i]] + [curve.EN[pair][i] for pair in PAIRS] +
                    [bool(curve.stable[i]), curve.branch_id[i], curve.photon_number[i],
                     curve.Delta_d[i], curve.Delta_d[i] / params.omega_m,
                     curve.min_symplectic[i]] + eff + [curve.status[i]])
    return header, rows, list(curve.status)


def _run_photon(spec, params, model):
    k = params.kappa
    norm = spec.grid.values()
    curve = sweep_photon_number(model, params, norm * k)
    # one row per (grid point, root); map each row back to its exact grid value
    where = np.searchsorted(norm * k, curve.delta_c)
    header = ["delta_c", "delta_c_over_kappa", "curve", "branch_id", "photon_number",
              "Delta_d", "Delta_d_over_omega_m", "stable", "status"]
    rows, status = [], []
    for i in range(len(curve.delta_c)):
        st = "fold_point" if curve.fold_point[i] else ("ok" if curve.stable[i] else "unstable")
        status.append(st)
        rows.append([curve.delta_c[i], norm[where[i]], curve.curve[i], curve.branch_id[i],
                     curve.photon_number[i], curve.Delta_d[i], curve.Delta_d[i] / params.omega_m,
                     bool(curve.stable[i]), st])
    return header, rows, status


def _run_effective(spec, params, model):
    k, wm = params.kappa, params.omega_m
    norm = spec.grid.values()
    c = effective_sweep(model, params, norm * k)
    header = ["Delta_d", "Delta_d_over_kappa", "nu_m", "nu_c", "nu_m_over_kappa", "nu_c_over_kappa",
              "omega_m_eff", "omega_c_eff", "omega_m_eff_over_omega_m", "omega_c_eff_over_omega_m",
              "G_mc", "G_mc_over_omega_m", "r_m", "r_c", "defined_flags", "status"]
    rows, status = [], []
    names = ("omega_m_eff", "omega_c_eff", "G_mc", "r_m", "r_c")
    for i, Dd in enumerate(c.Delta_d):
        flags = {n: not math.isnan(getattr(c, n)[i]) for n in names}
        st = "ok" if all(flags.values()) else "undefined"
        status.append(st)
        rows.append([Dd, norm[i], c.nu_m[i], c.nu_c[i], c.nu_m[i] / k, c.nu_c[i] / k,
                     c.omega_m_eff[i], c.omega_c_eff[i], c.omega_m_eff[i] / wm,
                     c.omega_c_eff[i] / wm, c.G_mc[i], c.G_mc[i] / wm, c.r_m[i], c.r_c[i],
                     ";".join(f"{n}:{int(f)}" for n, f in flags.items()), st])
    return header, rows, status


def phase_system(params: SystemParams) -> LinearSystem:
    """The autonomous 2x2 phase-noise filter as a linear system."""
    pn = params.phase_noise
    A = np.array([[0.0, pn.omega_N], [-pn.omega_N, -pn.gamma_tilde]])
    D = np.diag([0.0, 2.0 * pn.Gamma_l * pn.omega_N ** 2])
    return LinearSystem(A=A, D=D, kappa=params.kappa, mode_index={"phase": (0, 1)},
                        labels=("psi", "theta"))


SPECTRUM_NPERSEG = 4096


def spectrum_config(params: SystemParams, seed=0, n_trajectories=200, n_steps=2 ** 16, jobs=1):
    wN = params.phase_noise.omega_N
    return SdeRunConfig(dt=0.05 / wN, n_steps=n_steps, n_trajectories=n_trajectories,
                        burn_in_fraction=0.05, seed=seed, scheme="exact", jobs=jobs)


def _run_spectrum(spec, params, model):
    pn = params.phase_noise
    cfg = spectrum_config(params, seed=spec.seed, n_trajectories=spec.trajectories or 200,
                          jobs=spec.jobs)
    emp = spectrum_from_trajectories(phase_system(params), cfg, pn=pn, nperseg=SPECTRUM_NPERSEG)
    lo, hi = spec.grid.start * pn.omega_N, spec.grid.stop * pn.omega_N
    m = (emp.omega >= lo) & (emp.omega <= hi)
    header = ["omega", "omega_over_omega_N", "S_analytic", "S_empirical", "stderr", "status"]
    rows = [[w, w / pn.omega_N, sa, se, er, "ok"]
            for w, sa, se, er in zip(emp.omega[m], emp.S_analytic[m], emp.S_empirical[m],
                                     emp.stderr[m])]
    return header, rows, ["ok"] * len(rows)


def oracle_comparison(params: SystemParams, *, model=None, seed=0, n_trajectories=200,
                      n_sigma=3.0, jobs=1, branch="continuation"):
    """Lyapunov covariance versus the Monte Carlo estimate at ``params``.

    Returns ``(passed, V_lyapunov, sde_result, labels)``.
    """
    model = derive(params) if model is None else model
    ss = follow_branch(model, params, [params.delta_c_detuning], branch)[0]
    sys = build_linear_system(model, params, ss)
    cov = solve_lyapunov(sys)
    cfg = default_config(sys, scheme="exact", seed=seed, n_trajectories=n_trajectories, jobs=jobs)
    res = simulate_sde(sys, cfg)
    diff = np.abs(res.V_est - cov.V)
    ok = diff <= n_sigma * res.stderr
    exact = res.stderr == 0
    ok[exact] = diff[exact] <= 1e-12 * max(1.0, np.abs(cov.V).max())
    return bool(ok.all()), cov.V, res, sys.labels


def _run_oracle(spec, params, model):
    passed, V, res, labels = oracle_comparison(
        params, model=model, seed=spec.seed, n_trajectories=spec.trajectories or 200,
        jobs=spec.jobs, branch=spec.branch)
    header = ["i", "j", "label_i", "label_j", "V_lyapunov", "V_sde", "stderr", "z",
              "within_tolerance", "status"]
    rows = []
    n = V.shape[0]
    for i in range(n):
        for j in range(i, n):
            se = res.stderr[i, j]
            z = (res.V_est[i, j] - V[i, j]) / se if se > 0 else 0.0
            rows.append([i, j, labels[i], labels[j], V[i, j], res.V_est[i, j], se, z,
                         abs(z) <= 3.0, "ok"])
    return header, rows, ["ok"] * len(rows), passed


def _derived_summary(model: DerivedModel) -> dict:
    d = {k: getattr(model, k) for k in model.__dataclass_fields__}
    d["kerr"] = model.kerr
    return d


def run(spec: ExperimentSpec, out_dir) -> int:
    """Execute ``spec``; returns the process exit status (0 ok, 3 numerical failure)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    manifest = {"optobec_version": __version__, "spec": spec.echo(),
                "input_hash": spec.input_hash(), "outputs": []}
    exit_code = 0
    for i, variant in enumerate(spec.variants):
        params, model = resolve_variant(spec, variant)
        name = f"{spec.label or spec.kind}_{_variant_name(variant, i)}.csv"
        extra = {}
        if spec.kind == "photon_sweep":
            header, rows, status = _run_photon(spec, params, model)
        elif spec.kind in ("entanglement_sweep", "collision_sweep"):
            header, rows, status = _run_entanglement(spec, params, model, spec.variable)
        elif spec.kind == "entanglement_vs_pump":
            header, rows, status = _run_entanglement(spec, params, model, "eta")
        elif spec.kind == "effective_sweep":
            header, rows, status = _run_effective(spec, params, model)
        elif spec.kind == "spectrum":
            header, rows, status = _run_spectrum(spec, params, model)
            extra["peak_frequency"] = peak_frequency(params.phase_noise)
            extra["S_at_peak"] = float(spectral_density(extra["peak_frequency"], params.phase_noise))
        else:
            header, rows, status, passed = _run_oracle(spec, params, model)
            extra["passed"] = passed
            if not passed:
                exit_code = 3
        write_csv(out / name, header, rows)
        counts = {s: status.count(s) for s in STATUSES if s in status}
        manifest["outputs"].append({"file": name, "variant": dict(variant),
                                    "params": params_to_dict(params),
                                    "derived": _derived_summary(model),
                                    "status_counts": counts, "status": status, **extra})
    manifest["wall_time_s"] = time.perf_counter() - t0
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    return exit_code
