import math

import numpy as np
import pytest

import acvmlr


@pytest.fixture(scope="module")
def data():
    X, y, w0 = acvmlr.generate(n_features=20, n_classes=3, alpha=4, sigma_xi2=0.1, seed=3)
    return np.asarray(X), np.asarray(y), np.asarray(w0)


def test_generate_shapes(data):
    X, y, w0 = data
    assert X.shape == (80, 20)
    assert w0.shape == (3, 20)
    assert set(y) <= {0, 1, 2}


def test_generate_rejects_unknown_keys():
    with pytest.raises(acvmlr.ParseError):
        acvmlr.generate({"n_features": 5, "colour": 1})
    with pytest.raises(ValueError):
        acvmlr.generate('{"n_classes": 1}')


def test_fit_acv_saacv_literal(data):
    X, y, _ = data
    lam = acvmlr.lambda_max(X, y) / 5
    f = acvmlr.fit(X, y, lam)
    assert f.converged
    assert f.kkt_violation <= 1e-6
    assert f.weights.shape == (3, 20)
    a = acvmlr.acv(X, y, f.weights, lam)
    s = acvmlr.saacv(X, y, f.weights, lam)
    lit = acvmlr.literal_cv(X, y, lam)
    assert a.loo_overlaps.shape == (80, 3)
    assert s["converged"]
    assert abs(a.looe - lit["eps_cv"]) / lit["eps_cv"] <= 0.1
    assert abs(s["looe"] - lit["eps_cv"]) / lit["eps_cv"] <= 0.15


def test_zero_weights_give_ln_l(data):
    X, y, _ = data
    a = acvmlr.acv(X, y, np.zeros((3, 20)), 1.0)
    assert a.looe == pytest.approx(math.log(3), rel=1e-12)


def test_sweep_report(data):
    X, y, _ = data
    rep = acvmlr.sweep(X, y, n_lambda=4, decades=1.0, literal_k=5, record_timings=False)
    assert rep["schema_version"] == acvmlr.REPORT_SCHEMA_VERSION
    assert len(rep["records"]) == 4
    assert rep["provenance"]["literal_k"] == 5
    assert all(r["wall_times"]["fit"] == 0 for r in rep["records"])
    assert "acv" in rep["argmin"]
    with pytest.raises(TypeError):
        acvmlr.sweep(X, y, bogus=1)
    with pytest.raises(acvmlr.ContractViolation):
        acvmlr.sweep(X, y, eta=2.0)


def test_dataset_round_trip(data, tmp_path):
    X, y, _ = data
    for name in ("d.csv", "d.svm"):
        path = str(tmp_path / name)
        acvmlr.write_dataset(path, X, y)
        X2, y2, n_classes = acvmlr.read_dataset(path)
        assert n_classes == 3
        np.testing.assert_array_equal(np.asarray(X2), X)
        np.testing.assert_array_equal(np.asarray(y2), y)
    with pytest.raises(acvmlr.ParseError):
        acvmlr.read_dataset(str(tmp_path / "missing.csv"))
