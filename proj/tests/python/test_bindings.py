import math

import numpy as np
import pytest

import sofari


@pytest.fixture(scope="module")
def instance():
    return sofari.simulate(setting=1, seed=3)


def test_simulate_shapes(instance):
    assert instance["x"].shape == (200, 25)
    assert instance["y"].shape == (200, 15)
    t = instance["truth"]
    assert np.allclose(t["d"], [100, 15, 5])
    assert np.allclose(t["v"].T @ t["v"], np.eye(3), atol=1e-12)
    assert np.allclose(t["u"], t["l"] * t["d"])
    assert instance["components"][0] == [0, 1, 2, 22, 23, 24]


def test_simulate_is_deterministic():
    a, b = sofari.simulate(2, 9), sofari.simulate(2, 9)
    assert np.array_equal(a["x"], b["x"]) and np.array_equal(a["y"], b["y"])


def test_fit_and_infer(instance):
    f = sofari.fit(instance["x"], instance["y"], rank=3)
    assert f["converged"]
    assert np.allclose(f["c"], f["u"] @ f["v"].T)
    assert all(np.diff(f["objective"]) <= 1e-10)

    r = sofari.infer(instance["x"], instance["y"], rank=3)
    assert r["variant"] == "weak" and r["rank"] == 3 and r["n_used"] == 200
    u_star = instance["truth"]["u"]
    for layer in r["layers"]:
        assert layer["ok"]
        k = layer["k"]
        sign = np.sign(r["estimate"]["u"][:, k] @ u_star[:, k])
        err = np.abs(layer["u_hat"] - sign * u_star[:, k]) / np.sqrt(layer["var_u"] / 200)
        assert np.median(err) < 3
        assert abs(layer["d2_hat"] - instance["truth"]["d"][k] ** 2) < 5 * math.sqrt(layer["var_d2"] / 200)

    s = sofari.infer(instance["x"], instance["y"], rank=3, variant="split", seed=4)
    assert s["variant"] == "split" and s["n_used"] == 100


def test_diagnose_identity_design():
    rng = np.random.default_rng(0)
    n, p, q = 50, 5, 4
    x = math.sqrt(n) * np.linalg.qr(rng.standard_normal((n, p)))[0]
    l = np.linalg.qr(rng.standard_normal((p, 2)))[0]
    v = np.linalg.qr(rng.standard_normal((q, 2)))[0]
    rep = sofari.diagnose(x, x @ l @ np.diag([3.0, 1.0]) @ v.T, l, np.array([3.0, 1.0]), v)
    assert np.max(np.abs(rep["strong"])) < 1e-12
    assert rep["recommended"] == "strong"
    assert rep["threshold"] == pytest.approx(1 / math.sqrt(n))


def test_coverage_small():
    res = sofari.coverage(setting=1, reps=8, seed=2)
    rows = res["summaries"]
    assert len(rows) == 21
    assert [r["component"] for r in rows[:7]] == ["u1,1", "u1,2", "u1,3", "u1,23", "u1,24", "u1,25", "d1^2"]
    for r in rows:
        assert r["cp"] == r["covered"] / r["replications"]
        assert len(r["stats"]) == 8


def test_report_helpers():
    lo, hi = sofari.ci(0.0, 1.0, 1, 0.05)
    assert hi == pytest.approx(1.959964, abs=1e-5) and lo == -hi
    assert sofari.pvalue_two_sided(1.959964) == pytest.approx(0.05, abs=1e-5)
    assert sofari.standardized_stat(1.0, 1.0, 2.0, 10) == 0.0
    assert sofari.bh_fdr([0.5, 0.03, 0.001, 0.035], 0.05) == [1, 2, 3]
    grid, dens, h = sofari.kde(list(np.random.default_rng(1).standard_normal(2000)), 401)
    assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-3)
    assert h > 0


def test_precision_and_manifold(instance):
    theta, viol = sofari.nodewise_precision(instance["x"])
    assert theta.shape == (25, 25)
    assert viol <= 1.5 * math.sqrt(math.log(25) / 200)
    v = np.array([1.0, 0.0, 0.0])
    w = sofari.exp_map(v, np.array([0.0, 0.3, 0.4]))
    assert np.linalg.norm(w) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(sofari.log_map(v, w), [0.0, 0.3, 0.4], atol=1e-12)


def test_errors(instance):
    with pytest.raises(sofari.InvalidArgument):
        sofari.exp_map(np.array([1.0, 0.0]), np.array([1.0, 0.0]))
    with pytest.raises(sofari.SofariError):
        sofari.fit(instance["x"], instance["y"], rank=16)
    with pytest.raises(sofari.InvalidArgument):
        sofari.coverage(reps=0)
    with pytest.raises(sofari.InvalidArgument):
        sofari.infer(instance["x"], instance["y"], variant="medium")
