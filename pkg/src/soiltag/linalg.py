"""Cyclic Jacobi eigendecomposition for small Hermitian matrices."""
from __future__ import annotations

import math

import numpy as np


class NotHermitianError(ValueError):
    pass


def jacobi_eigh(a, tol=1e-13, max_sweeps=100):
    """Eigenvalues (ascending) and unitary eigenvectors of a Hermitian matrix.

    Each rotation first rephases column q so the pivot A[p, q] is real, then
    applies the real symmetric Jacobi rotation that annihilates it.
    """
    A = np.array(a, dtype=complex)
    n, m = A.shape
    if n != m:
        raise NotHermitianError("matrix must be square")
    scale = max(np.abs(A).max(), 1e-300)
    if not np.allclose(A, A.conj().T, rtol=0, atol=1e-12 * scale):
        raise NotHermitianError("matrix must be Hermitian")
    A = 0.5 * (A + A.conj().T)
    V = np.eye(n, dtype=complex)

    for _ in range(max_sweeps):
        off = math.sqrt(np.sum(np.abs(np.triu(A, 1)) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                r = abs(apq)
                if r <= 1e-300:
                    continue
                phase = apq / r
                app, aqq = A[p, p].real, A[q, q].real
                theta = 0.5 * math.atan2(2 * r, aqq - app)
                c, s = math.cos(theta), math.sin(theta)
                # G = diag(1, conj(phase)) @ [[c, s], [-s, c]] in the (p, q) plane
                gp = np.array([c, -s * phase.conjugate()])
                gq = np.array([s, c * phase.conjugate()])
                cols = A[:, [p, q]]
                A[:, p] = cols @ gp
                A[:, q] = cols @ gq
                rows = A[[p, q], :]
                A[p, :] = gp.conj() @ rows
                A[q, :] = gq.conj() @ rows
                A[p, q] = A[q, p] = 0.0
                A[p, p] = A[p, p].real
                A[q, q] = A[q, q].real
                vcols = V[:, [p, q]]
                V[:, p] = vcols @ gp
                V[:, q] = vcols @ gq
    else:
        raise RuntimeError("Jacobi sweeps did not converge")

    w = np.real(np.diag(A))
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]
