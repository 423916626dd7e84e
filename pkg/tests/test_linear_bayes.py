import numpy as np
import pytest
from scipy.optimize import approx_fprime

from conftest import blobs
from tabrisk.errors import NonBinaryLabels, SingleClass
from tabrisk.learners.bayes import GaussianNBModel, fit_gnb
from tabrisk.learners.linear import LinearModel, fit_logreg, objective, smooth_gradient


def test_separable_1d_positive_weight():
    m = fit_logreg(np.array([[-1.0], [1.0]]), np.array([0, 1]), C=10)
    assert m.weights[0] > 0


def test_heavy_regularization_shrinks():
    X, y = blobs(100, seed=0)
    for pen in ("l1", "l2"):
        m = fit_logreg(X, y, C=1e-6, penalty=pen)
        assert np.abs(m.weights).max() < 0.01


def test_gradient_matches_finite_differences():
    g = np.random.default_rng(4)
    X = g.normal(size=(5, 2))
    y = np.array([0, 1, 1, 0, 1])
    w, b = g.normal(size=2), 0.3
    gw, gb = smooth_gradient(X, y, w, b, 1.0, "l2")

    def f(theta):
        return objective(X, y, theta[:2], theta[2], 1.0, "l2")

    fd = approx_fprime(np.append(w, b), f, 1e-7)
    assert np.max(np.abs(fd - np.append(gw, gb))) < 1e-5


def test_l2_optimum_has_zero_gradient():
    X, y = blobs(80, seed=6, sep=1.0)
    m = fit_logreg(X, y, C=1.0, penalty="l2", max_iter=5000, tol=1e-10)
    gw, gb = smooth_gradient(X, y, m.weights, m.intercept, 1.0, "l2")
    assert np.max(np.abs(np.append(gw, gb))) < 1e-6


def test_l1_subgradient_condition():
    X, y = blobs(80, seed=7, sep=1.0, f=4)
    C = 0.5
    m = fit_logreg(X, y, C=C, penalty="l1", max_iter=20000, tol=1e-11)
    gw, gb = smooth_gradient(X, y, m.weights, m.intercept, C, "l1")
    lam = 1.0 / (C * len(y))
    assert abs(gb) < 1e-6
    for w, g in zip(m.weights, gw):
        if w != 0:
            assert g + lam * np.sign(w) == pytest.approx(0.0, abs=1e-6)
        else:
            assert abs(g) <= lam + 1e-6


def test_logreg_validation_and_round_trip():
    X, y = blobs(30, seed=1)
    with pytest.raises(NonBinaryLabels):
        fit_logreg(X, y * 2)
    m = fit_logreg(X, y)
    back = LinearModel.from_dict(m.to_dict())
    assert np.array_equal(back.predict_proba(X), m.predict_proba(X))


def test_gnb_symmetry():
    X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
    y = np.array([0, 0, 1, 1])
    p = fit_gnb(X, y).predict_proba(np.array([[0.0]]))
    assert p[0] == pytest.approx([0.5, 0.5], abs=1e-12)


def test_gnb_far_point_matches_density_ratio():
    X = np.array([[0.0], [1.0], [2.0], [10.0], [11.0], [12.0]])
    y = np.array([0, 0, 0, 1, 1, 1])
    m = fit_gnb(X, y, var_smoothing=0.0 + 1e-9)
    var = 2.0 / 3.0 + m.epsilon
    x = 11.0
    # equal priors and variances: log ratio = ((x-1)^2 - (x-11)^2) / (2 var)
    expect = 1.0 / (1.0 + np.exp(-((x - 1) ** 2 - (x - 11) ** 2) / (2 * var)))
    got = m.predict_proba(np.array([[x]]))[0, 1]
    assert got > 0.99 and got == pytest.approx(expect, rel=1e-12)


def test_gnb_zero_variance_feature():
    X = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 5.0], [1.0, 6.0]])
    y = np.array([0, 0, 1, 1])
    p = fit_gnb(X, y).predict_proba(X)
    assert np.isfinite(p).all() and np.allclose(p.sum(axis=1), 1)
    allconst = fit_gnb(np.ones((4, 1)), y)
    assert allconst.epsilon > 0 and np.isfinite(allconst.predict_proba(np.ones((1, 1)))).all()


def test_gnb_single_class_and_round_trip():
    with pytest.raises(SingleClass):
        fit_gnb(np.zeros((3, 1)), np.zeros(3))
    X, y = blobs(30, seed=2)
    m = fit_gnb(X, y)
    assert m.priors.sum() == pytest.approx(1.0)
    back = GaussianNBModel.from_dict(m.to_dict())
    assert np.array_equal(back.predict_proba(X), m.predict_proba(X))
