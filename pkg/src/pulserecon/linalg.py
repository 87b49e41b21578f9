"""Small dense linear algebra used throughout: Hermitian eigensystems,
unitary exponentials, Hilbert-Schmidt overlaps and gate fidelity.

Everything here works on plain ``numpy`` arrays. Dimensions in this
project never exceed a handful of levels, so exponentials are taken
through the eigendecomposition, which keeps results unitary to machine
precision.
"""

import numpy as np

HERMITIAN_ATOL = 1e-12


class NotHermitianError(ValueError):
    pass


class EigenConvergenceError(RuntimeError):
    pass


def _as_square(M, name="matrix"):
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def is_hermitian(M, atol=HERMITIAN_ATOL):
    M = np.asarray(M)
    return M.ndim == 2 and M.shape[0] == M.shape[1] and np.allclose(M, M.conj().T, rtol=0, atol=atol)


def is_unitary(U, atol=1e-10):
    U = np.asarray(U)
    eye = np.eye(U.shape[0])
    return np.max(np.abs(U.conj().T @ U - eye)) <= atol


def hermitian_eig(H, atol=HERMITIAN_ATOL):
    """Eigenvalues (ascending) and unitary eigenvectors of a Hermitian matrix.

    Raises NotHermitianError when ``H`` differs from its adjoint by more than
    ``atol`` in any entry, and EigenConvergenceError if the reassembled
    matrix does not reproduce ``H``.
    """
    H = _as_square(H, "H")
    if not is_hermitian(H, atol):
        dev = np.max(np.abs(H - H.conj().T))
        raise NotHermitianError(f"matrix is not Hermitian (max |H - H^dag| = {dev:.3e})")
    try:
        w, V = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise EigenConvergenceError(str(exc)) from exc
    residual = np.max(np.abs(V @ np.diag(w) @ V.conj().T - H), initial=0.0)
    scale = max(1.0, np.max(np.abs(H), initial=0.0))
    if residual > 1e-10 * scale:
        raise EigenConvergenceError(f"eigendecomposition residual {residual:.3e}")
    return w, V


def expm_neg_i(H, scale):
    """exp(-i * scale * H) for Hermitian ``H``."""
    if not np.isfinite(scale):
        raise ValueError("scale must be finite")
    w, V = hermitian_eig(H)
    return (V * np.exp(-1j * scale * w)) @ V.conj().T


def hs_inner(A, B):
    """Normalized Hilbert-Schmidt product Tr(A^dag B) / dim."""
    A = _as_square(A, "A")
    B = _as_square(B, "B")
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return np.vdot(A, B) / A.shape[0]


def fidelity(U_target, U_actual):
    """Phase-insensitive gate fidelity |Tr(U_target^dag U_actual)|^2 / dim^2."""
    overlap = hs_inner(U_target, U_actual)
    return float(min(1.0, abs(overlap) ** 2))


def expm_series(A, tol=1e-16):
    """General matrix exponential by scaling and squaring of a Taylor series.

    Independent of the eigendecomposition route; used as a reference in
    tests.
    """
    A = np.asarray(A, dtype=complex)
    norm = np.linalg.norm(A, 1)
    s = max(0, int(np.ceil(np.log2(norm))) + 1) if norm > 0 else 0
    X = A / 2**s
    term = np.eye(A.shape[0], dtype=complex)
    result = term.copy()
    for k in range(1, 60):
        term = term @ X / k
        result = result + term
        if np.max(np.abs(term)) < tol:
            break
    for _ in range(s):
        result = result @ result
    return result
