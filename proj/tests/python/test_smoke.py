import json
import math
from pathlib import Path

import numpy as np
import pytest

import qfilter

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def test_qubit_model_operators():
    m = qfilter.qubit_model([0.0, 0.0, 0.0], 1.0)
    assert m.dim == 2
    np.testing.assert_allclose(m.K, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(m.channels[0], math.sqrt(2) * np.diag([1, -1]), atol=1e-15)


def test_unitary_limit_trajectory():
    m = qfilter.qubit_model([1.0, 0.0, 0.0], 0.0)
    psi0 = np.array([1, 0], dtype=complex)
    r = qfilter.run_trajectory(m, psi0, dt=1e-4, n_steps=10000, record_stride=1000)
    exact = qfilter.solve_unitary(m, psi0, 1.0)
    assert abs(np.vdot(r["states"][-1], exact)) ** 2 >= 1 - 1e-4
    assert r["states"].shape == (11, 2)


def test_noise_is_reproducible():
    a = qfilter.generate_noise(3, 1, 0.01, 100)
    b = qfilter.generate_noise(3, 1, 0.01, 100)
    assert a.shape == (100, 1)
    assert np.array_equal(a, b)


def test_master_dephasing():
    m = qfilter.qubit_model([0.0, 0.0, 0.0], 1.0)
    rho0 = np.full((2, 2), 0.5, dtype=complex)
    times, states = qfilter.solve_master(m, rho0, 1e-3, 500, 500)
    assert times[-1] == pytest.approx(0.5)
    assert abs(states[-1][0, 1] - 0.5 * math.exp(-2.0)) <= 1e-6


def test_grid_packet():
    m = qfilter.grid_model(-10, 10, 256, 0.0)
    psi = qfilter.gaussian_packet(m, 1.0)
    x = m.coordinates
    dx = x[1] - x[0]
    assert np.sum(np.abs(psi) ** 2) * dx == pytest.approx(1.0)
    assert np.sum(x * np.abs(psi) ** 2) * dx == pytest.approx(1.0)


def test_errors_are_python_exceptions(tmp_path):
    with pytest.raises(qfilter.ValidationError):
        qfilter.qubit_model([1.0, 0.0, 0.0], -1.0)
    with pytest.raises(qfilter.Error):
        qfilter.run_trajectory(qfilter.qubit_model([1.0, 0.0, 0.0], 1.0), np.zeros(3, dtype=complex), 0.01, 10)
    with pytest.raises(qfilter.ValidationError):
        qfilter.simulate(tmp_path / "missing.json", tmp_path / "out")


def test_simulate_and_export(tmp_path):
    out = tmp_path / "run"
    assert qfilter.simulate(CONFIGS / "qubit.json", out, trajectories=3) == 0
    assert qfilter.export_plot(out, "expectation:sigma_z", tmp_path / "sz.csv") == 0
    lines = (tmp_path / "sz.csv").read_text().splitlines()
    assert lines[0] == "t,traj0,traj1,traj2,mean"
    assert len(lines) == 102


def test_verify_report():
    rep = json.loads(qfilter.verify("gauge", CONFIGS / "qubit.json", ["verify.n_seeds=2"]))
    assert rep["suite"] == "gauge"
    assert rep["pass"] is True
