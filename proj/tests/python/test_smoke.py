import math

import numpy as np
import pytest

import vropt


@pytest.fixture(scope="module")
def problem():
    data = vropt.load_dataset("synthetic:dense:80:6:9")
    obj = vropt.Objective(data, "logistic", l2=1.0 / 80)
    return obj, vropt.solve_reference(obj)


def test_dataset_from_numpy():
    a = np.array([[1.0, 0.0, 2.0], [0.0, 0.0, -1.0]])
    data = vropt.Dataset(a, [1.0, -1.0])
    assert (data.n, data.d, data.nnz) == (2, 3, 3)
    assert np.array_equal(data.row(0), a[0])
    with pytest.raises(vropt.DimensionError):
        vropt.Dataset(a, [1.0])


def test_objective_matches_numpy():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(20, 4))
    b = np.where(rng.uniform(size=20) < 0.5, -1.0, 1.0)
    obj = vropt.Objective(vropt.Dataset(a, b), "logistic", l2=0.1)
    x = rng.normal(size=4)
    margins = b * (a @ x)
    f = np.mean(np.log1p(np.exp(-margins))) + 0.05 * x @ x
    g = a.T @ (-b / (1.0 + np.exp(margins))) / 20 + 0.1 * x
    assert obj.value(x) == pytest.approx(f, rel=1e-13)
    assert np.allclose(obj.grad(x), g, rtol=1e-12, atol=1e-14)
    s = obj.smoothness()
    assert s.l_max >= s.l_mean > 0
    assert s.mu == pytest.approx(0.1)


def test_saga_reaches_reference(problem):
    obj, ref = problem
    assert ref.residual <= 1e-12
    out = vropt.run(obj, "saga", epochs=60, f_star=ref.f)
    assert out["trace"][0]["epoch"] == 0.0
    assert out["trace"][-1]["epoch"] == pytest.approx(60.0)
    assert out["trace"][-1]["subopt"] <= 1e-10
    assert out["gamma"] == pytest.approx(1.0 / obj.smoothness().l_max)


def test_runs_are_deterministic(problem):
    obj, _ = problem
    a = vropt.run(obj, "svrg", epochs=5, seed=3)
    b = vropt.run(obj, "svrg", epochs=5, seed=3)
    assert np.array_equal(a["x"], b["x"])
    assert [r["f"] for r in a["trace"]] == [r["f"] for r in b["trace"]]


def test_every_method_runs(problem):
    obj, ref = problem
    for m in vropt.methods().split(", "):
        kwargs = {"epochs": 2}
        if m in ("sgd", "sgd_momentum"):
            kwargs["gamma"] = 0.05
        if m == "sgd_star":
            kwargs["x_star"] = ref.x
        out = vropt.run(obj, m, **kwargs)
        assert math.isfinite(out["trace"][-1]["f"]), m


def test_errors(problem):
    obj, _ = problem
    with pytest.raises(vropt.ConfigError, match="saga"):
        vropt.run(obj, "adam")
    with pytest.raises(vropt.ConfigError):
        vropt.run(obj, "sgd_star")
    hinge = vropt.Objective(obj.data, "hinge", l2=0.1)
    with pytest.raises(vropt.ConfigError):
        vropt.run(hinge, "saga")
    assert vropt.run(hinge, "sdca", epochs=5)["trace"][-1]["gap"] >= 0
    ls = vropt.Objective(vropt.load_dataset("synthetic:regression:40:5:2"), "half_squared", l2=0.0)
    with pytest.raises(vropt.DivergenceError):
        vropt.run(ls, "sgd", gamma=1e6, epochs=50)


def test_rate_fit():
    k = np.arange(30.0)
    fit = vropt.fit_linear_rate(k, 2.0 * 0.9**k)
    assert fit["ok"]
    assert fit["rho_hat"] == pytest.approx(0.1, abs=1e-10)
    assert fit["c_hat"] == pytest.approx(2.0, rel=1e-10)


def test_validate_single_check():
    assert len(vropt.check_ids()) == 14
    (res,) = vropt.validate(["lemma1"])
    assert res["id"] == "lemma1" and res["passed"]
    (bad,) = vropt.validate(["unbiasedness"], inject_fault="saga-covariate-sign")
    assert not bad["passed"]
