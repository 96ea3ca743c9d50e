import numpy as np
import pytest
from hypothesis import given, strategies as st

from soiltag.linalg import NotHermitianError, jacobi_eigh


def _hermitian(seed, n):
    r = np.random.default_rng(seed)
    a = r.standard_normal((n, n)) + 1j * r.standard_normal((n, n))
    return a + a.conj().T


@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_matches_reference_solver(seed, n):
    a = _hermitian(seed, n)
    w, v = jacobi_eigh(a)
    np.testing.assert_allclose(w, np.linalg.eigvalsh(a), atol=1e-10 * max(1, np.abs(a).max()))
    np.testing.assert_allclose(v.conj().T @ v, np.eye(n), atol=1e-10)
    np.testing.assert_allclose(a @ v, v * w, atol=1e-9 * max(1, np.abs(a).max()))


def test_diagonal_input_is_sorted():
    w, v = jacobi_eigh(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_array_equal(w, [1.0, 2.0, 3.0])


def test_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        jacobi_eigh(np.array([[1, 2j], [2j, 1]]))
    with pytest.raises(NotHermitianError):
        jacobi_eigh(np.ones((2, 3)))
