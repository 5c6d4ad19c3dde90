import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkpse import gaussian as G
from qkpse.kernelml import Dataset, KernelEvaluationError, kernel_matrix, predict, ridge_fit


def rbf(x, y):
    return float(np.exp(-((x - y) ** 2)))


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset([1, 2], [1.0])
    with pytest.raises(ValueError):
        Dataset([], [])


def test_kernel_matrix_symmetric_and_thread_invariant():
    d = Dataset(list(np.linspace(0, 1, 7)), np.zeros(7))
    K1 = kernel_matrix(d, rbf)
    K4 = kernel_matrix(d, rbf, threads=4)
    assert np.array_equal(K1, K4)
    assert np.array_equal(K1, K1.T)
    assert np.allclose(np.diag(K1), 1)


def test_kernel_matrix_reports_failing_entry():
    def broken(x, y):
        if x == y == 2:
            raise RuntimeError("boom")
        return 1.0

    with pytest.raises(KernelEvaluationError, match=r"\(2, 2\)"):
        kernel_matrix(Dataset([0, 1, 2], np.zeros(3)), broken)


def test_coherent_state_kernel_matrix_is_psd():
    xs = np.linspace(-1, 1, 6)
    d = Dataset([G.coherent([x]) for x in xs], np.sin(xs))
    K = kernel_matrix(d, G.exact_gaussian_kernel)
    assert np.linalg.eigvalsh(K).min() > -1e-12
    assert np.allclose(K, np.exp(-np.subtract.outer(xs, xs) ** 2))


def test_ridge_interpolates_with_small_regulariser():
    xs = np.linspace(0, 1, 5)
    y = xs**2
    K = np.exp(-np.subtract.outer(xs, xs) ** 2 * 10)
    model = ridge_fit(K, y, 1e-9, points=xs)
    preds = [predict(model, K[i]) for i in range(5)]
    assert np.allclose(preds, y, atol=1e-5)
    assert model.points == tuple(xs)


@settings(max_examples=40)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 10), lam=st.floats(1e-4, 1.0))
def test_ridge_solves_normal_equations(seed, n, lam):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    K = A @ A.T
    y = rng.normal(size=n)
    model = ridge_fit(K, y, lam)
    assert np.allclose((K + n * lam * np.eye(n)) @ model.alphas, y, atol=1e-8 * max(1, np.abs(y).max()))


def test_indefinite_estimated_kernel():
    K = np.array([[1.0, 1.1], [1.1, 1.0]])
    y = np.array([1.0, -1.0])
    model = ridge_fit(K, y, 0.1)
    w, Q = np.linalg.eigh(K)
    Kp = (Q * np.maximum(w, 0)) @ Q.T
    assert np.allclose((Kp + 0.2 * np.eye(2)) @ model.alphas, y)
    with pytest.raises(np.linalg.LinAlgError):
        ridge_fit(K, y, 0.1, project=False)


def test_ridge_argument_checks():
    with pytest.raises(ValueError):
        ridge_fit(np.eye(2), [1, 2], 0.0)
    with pytest.raises(ValueError):
        ridge_fit(np.eye(3), [1, 2], 0.1)
    model = ridge_fit(np.eye(2), [1, 2], 0.1)
    with pytest.raises(ValueError):
        predict(model, [1, 2, 3])
