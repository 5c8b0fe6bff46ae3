import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad
from scipy.linalg import expm, solve_continuous_lyapunov

from optobec.errors import SimulationDivergedError, UnstableSystemError
from optobec.linsys import LinearSystem
from optobec.model import PhaseNoiseParams
from optobec.phasenoise import (SdeRunConfig, discretize, peak_frequency, read_trajectory_dump,
                                simulate_sde, spectral_density, spectrum, stationary_variance)

PN = PhaseNoiseParams(Gamma_l=2 * math.pi * 1e3, omega_N=2 * math.pi * 140e3,
                      gamma_tilde=math.pi * 140e3)


def _oscillator(w=1.0, g=0.2, n_bar=0.5):
    return LinearSystem(A=np.array([[0.0, w], [-w, -g]]), D=np.diag([0.0, g * (2 * n_bar + 1)]),
                        kappa=1.0, mode_index={"phase": (0, 1)}, labels=("q", "p"))


def test_spectrum_limits():
    assert spectral_density(0.0, PN) == pytest.approx(2 * PN.Gamma_l)
    big = 1e3 * PN.omega_N
    assert spectral_density(big, PN) == pytest.approx(2 * PN.Gamma_l * PN.omega_N ** 4 / big ** 4, rel=1e-5)
    assert spectral_density(PN.omega_N, PN) == pytest.approx(
        2 * PN.Gamma_l * PN.omega_N ** 2 / PN.gamma_tilde ** 2)


@given(st.floats(0, 1e8))
def test_spectrum_is_even(w):
    assert spectral_density(w, PN) == spectral_density(-w, PN)


def test_spectrum_integrates_to_variance():
    half, _ = quad(lambda x: spectral_density(x * PN.omega_N, PN), 0, np.inf, limit=400)
    total = 2 * PN.omega_N * half
    assert total / (2 * math.pi) == pytest.approx(stationary_variance(PN), rel=1e-8)
    A = np.array([[0.0, PN.omega_N], [-PN.omega_N, -PN.gamma_tilde]])
    D = np.diag([0.0, 2 * PN.Gamma_l * PN.omega_N ** 2])
    assert solve_continuous_lyapunov(A, -D)[0, 0] == pytest.approx(stationary_variance(PN), rel=1e-10)


def test_peak_frequency_by_dense_search():
    w = np.linspace(0, 3 * PN.omega_N, 600_001)
    best = w[np.argmax(spectral_density(w, PN))]
    assert peak_frequency(PN) == pytest.approx(best, rel=1e-5)
    assert spectrum(PN, [0.0])[0].S == spectral_density(0.0, PN)


def test_exact_step_matches_lyapunov_identity():
    sys = _oscillator()
    dt = 0.7
    Phi, L = discretize(sys.A, sys.D, dt, "exact")
    V = solve_continuous_lyapunov(sys.A, -sys.D)
    np.testing.assert_allclose(Phi, expm(sys.A * dt), atol=1e-13)
    # stationarity: V = Phi V Phi^T + Q
    np.testing.assert_allclose(L @ L.T, V - Phi @ V @ Phi.T, atol=1e-12)


def test_euler_step_converges_to_exact():
    sys = _oscillator()
    errs = []
    for dt in (1e-2, 5e-3):
        Pe, _ = discretize(sys.A, sys.D, dt, "euler")
        Px, _ = discretize(sys.A, sys.D, dt, "exact")
        errs.append(np.abs(Pe - Px).max())
    assert errs[1] / errs[0] == pytest.approx(0.25, rel=0.05)


def test_euler_reproduces_thermal_variance():
    n_bar = 1.5
    sys = _oscillator(n_bar=n_bar)
    cfg = SdeRunConfig(dt=0.01, n_steps=40_000, n_trajectories=40, seed=3)
    res = simulate_sde(sys, cfg)
    expected = (2 * n_bar + 1) / 2
    for i in (0, 1):
        assert abs(res.V_est[i, i] - expected) < 4 * res.stderr[i, i]
    # Euler-Maruyama has an O(dt) bias; halving dt must not move the estimate beyond noise
    half = simulate_sde(sys, SdeRunConfig(dt=0.005, n_steps=80_000, n_trajectories=40, seed=4))
    diff = abs(half.V_est[0, 0] - res.V_est[0, 0])
    assert diff < 4 * math.hypot(res.stderr[0, 0], half.stderr[0, 0])


def test_same_seed_same_result_and_jobs_do_not_matter():
    sys = _oscillator()
    cfg = SdeRunConfig(dt=0.05, n_steps=2_000, n_trajectories=8, seed=11, scheme="exact")
    a = simulate_sde(sys, cfg)
    b = simulate_sde(sys, cfg)
    c = simulate_sde(sys, SdeRunConfig(**{**cfg.__dict__, "jobs": 3}))
    np.testing.assert_array_equal(a.V_est, b.V_est)
    np.testing.assert_array_equal(a.per_trajectory, c.per_trajectory)
    d = simulate_sde(sys, SdeRunConfig(**{**cfg.__dict__, "seed": 12}))
    assert not np.array_equal(a.V_est, d.V_est)


def test_euler_step_size_is_checked():
    with pytest.raises(ValueError):
        simulate_sde(_oscillator(), SdeRunConfig(dt=0.5, n_steps=100, n_trajectories=2))


@pytest.mark.parametrize("bad", [dict(dt=0.0), dict(n_steps=1), dict(burn_in_fraction=1.0),
                                 dict(scheme="rk4"), dict(n_trajectories=1)])
def test_invalid_configs(bad):
    cfg = SdeRunConfig(**{**dict(dt=0.01, n_steps=100, n_trajectories=4), **bad})
    with pytest.raises(ValueError):
        cfg.validate()


def test_unstable_system_is_rejected():
    sys = LinearSystem(A=np.array([[0.1, 1.0], [-1.0, 0.0]]), D=np.eye(2), kappa=1.0,
                       mode_index={}, labels=("a", "b"))
    with pytest.raises(UnstableSystemError):
        simulate_sde(sys, SdeRunConfig(dt=0.01, n_steps=100, n_trajectories=2))


def test_divergence_guard():
    cfg = SdeRunConfig(dt=0.05, n_steps=1_000, n_trajectories=2, scheme="exact", max_norm=1e-3)
    with pytest.raises(SimulationDivergedError) as info:
        simulate_sde(_oscillator(), cfg)
    assert info.value.step < 1_000


def test_dump_round_trip(tmp_path):
    path = tmp_path / "traj.bin"
    cfg = SdeRunConfig(dt=0.05, n_steps=700, n_trajectories=3, scheme="exact", dump_path=str(path))
    simulate_sde(_oscillator(), cfg)
    dt, data = read_trajectory_dump(path)
    assert dt == 0.05 and data.shape == (700, 2)
    assert np.all(np.isfinite(data)) and np.any(data != 0)
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"nope" * 10)
    with pytest.raises(ValueError):
        read_trajectory_dump(bad)
