import json
import math

import numpy as np
import pytest

import quasicontact as qc


def two_mark(mortality=None):
    space = qc.MarkSpace(["a", "b"], np.array([0.5, 0.5]))
    q = np.array([[2.0, 1.0], [1.0, 2.0]])
    return qc.MarkKernel(space, q) if mortality is None else qc.MarkKernel(space, q, np.asarray(mortality, float))


def test_two_mark_eigendata():
    e = qc.leading_eigen(two_mark())
    assert e.r == pytest.approx(1.5, abs=1e-12)
    assert e.kappa_cr == pytest.approx(2.0 / 3.0, abs=1e-12)
    np.testing.assert_allclose(e.q, [1.0, 1.0], atol=1e-12)
    assert qc.asymptotic_density(e, two_mark().space, 1.0, np.array([2.0, 0.0])) == pytest.approx(1.0)


def test_rescaled_operator():
    k = two_mark([2.0, 1.0])
    np.testing.assert_allclose(qc.apply_kernel(k, np.ones(2), True), [0.75, 1.5])
    e = qc.leading_eigen(k, rescaled=True)
    assert e.r == pytest.approx((1.5 + math.sqrt(0.75)) / 2.0, abs=1e-12)


def test_markless_pair_transform():
    disp = qc.DispersalKernel.isotropic_gaussian(3, math.sqrt(2.0 * math.log(2.0)))
    # alpha_hat(e1) = 1/2, so rho (2 a) / (2 - 2 a) = 1
    assert qc.markless_pair_hat(disp, 1.0, [1.0, 0.0, 0.0]) == pytest.approx(1.0, abs=1e-12)
    model = qc.CorrelationModel.critical(qc.MarkKernel(qc.MarkSpace.single(), np.ones((1, 1))), disp)
    x = qc.solve_pair_mode(model, 1.0, [1.0, 0.0, 0.0])
    assert x[0, 0] == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ArithmeticError):
        qc.markless_pair_hat(disp, 1.0, [0.0, 0.0, 0.0])


def test_k1_relaxation():
    k = two_mark()
    times, values = qc.evolve_k1(k, 2.0 / 3.0, np.array([2.0, 0.0]), 6.0, sample_interval=1.0)
    t = np.asarray(times)
    # closed form (1, 1) + exp(-2t/3) (1, -1)
    np.testing.assert_allclose(values[:, 0], 1.0 + np.exp(-2.0 * t / 3.0), atol=1e-9)
    np.testing.assert_allclose(values[:, 1], 1.0 - np.exp(-2.0 * t / 3.0), atol=1e-9)


def test_simulate_mean_is_conserved_at_criticality():
    model = qc.CorrelationModel.critical(two_mark(), qc.DispersalKernel.isotropic_gaussian(3, 1.0))
    res = qc.simulate(model, 8.0, 2.0, 1.0, model.eigen.q, replicas=200, seed=5, sample_times=[0.0, 2.0])
    mean, err = qc.replica_density(res)
    assert res["counts"].shape == (200, 2, 2)
    assert abs(mean[1] - 1.0) < 4.0 * err[1] + 0.01


def test_run_spectrum(tmp_path):
    cfg = {"model": {"dim": 3, "kappa": "critical", "marks": {"weights": [0.5, 0.5]},
                     "kernel": {"matrix": [[2, 1], [1, 2]]}}}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    res = qc.run("spectrum", str(path), str(tmp_path / "out"))
    assert res["exit_code"] == 0
    doc = json.loads((tmp_path / "out" / "spectrum" / "spectrum.json").read_text())
    assert doc["kappa_cr"] == pytest.approx(2.0 / 3.0)


def test_config_errors_surface():
    with pytest.raises(ValueError):
        qc.run("spectrum", "/nonexistent/config.json")
