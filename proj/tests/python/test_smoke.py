import numpy as np
import pytest

import gmr


def test_simulate_shape():
    sim = gmr.simulate(n=800, K=2, p=2, G=10, sigma=2.0, delta_beta=12.0, seed=1)
    assert sim["X"].shape == (800, 2)
    assert sim["y"].shape == (800,)
    assert len(set(sim["groups"])) == 20
    assert sim["beta_true"].shape == (2, 2)


def test_fit_recovers_easy_regime():
    sim = gmr.simulate(n=800, K=2, p=2, G=10, sigma=2.0, delta_beta=12.0, seed=3)
    model = gmr.fit(sim["groups"], sim["y"], sim["X"], K=2, seed=5)
    assert model.converged
    assert gmr.nmi(sim["labels"], model.labels) == pytest.approx(1.0)
    assert gmr.beta_error(sim["beta_true"], model.beta, sim["labels"], model.labels) < 1.0
    assert np.all(np.diff(model.ll_trace) >= -1e-8 * (1 + np.abs(model.ll_trace[1:])))


def test_predict_and_round_trip():
    sim = gmr.simulate(n=200, K=2, p=2, G=5, sigma=0.0, delta_beta=6.0, seed=2)
    model = gmr.fit(sim["groups"], sim["y"], sim["X"], K=2, restarts=3)
    pred = model.predict(sim["groups"][::-1], sim["X"][::-1])
    assert gmr.rmse(sim["y"][::-1], pred) < 1e-6
    back = gmr.Model.from_json(model.to_json())
    np.testing.assert_array_equal(back.beta, model.beta)


def test_unknown_group_policy():
    sim = gmr.simulate(n=200, K=2, p=2, G=5, sigma=1.0, delta_beta=6.0, seed=2)
    model = gmr.fit(sim["groups"], sim["y"], sim["X"], K=2, restarts=2)
    x = np.array([[1.0, 2.0]])
    with pytest.raises(gmr.GmrError):
        model.predict(["nope"], x)
    expected = model.pi @ (model.beta.T @ x[0])
    assert model.predict(["nope"], x, fallback="prior")[0] == pytest.approx(expected)


def test_select_k_reports_baselines():
    sim = gmr.simulate(n=400, K=2, p=2, G=10, sigma=2.0, delta_beta=12.0, seed=4)
    report = gmr.select_k(sim["groups"], sim["y"], sim["X"], [2, 3], n_reps=2, restarts=2)
    assert set(report["rmse_by_k"]) == {0, 1, 2, 3}
    assert report["best_mixture_k"] in (2, 3)


def test_errors_are_value_errors():
    with pytest.raises(ValueError):
        gmr.simulate(n=10, K=5, p=2, G=1, sigma=1.0, delta_beta=1.0)
