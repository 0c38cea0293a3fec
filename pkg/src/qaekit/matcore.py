"""Dense complex linear-algebra primitives.

Register ordering convention (used everywhere in the package): in a tensor
product ``a ⊗ b`` the left factor is the most-significant index, i.e.
``np.kron`` ordering.  For a QAE this means register A sits above ancilla B,
latent C above discarded D, output F above discarded G.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

HERMITIAN_TOL = 1e-10
ISOMETRY_TOL = 1e-10


class MatrixError(ValueError):
    """Raised when an operator fails a structural precondition."""


def as_cmatrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise MatrixError(f"expected a 2-d array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise MatrixError("matrix has non-finite entries")
    return m


def ket(amplitudes, normalize: bool = False) -> np.ndarray:
    """Return a 1-d complex state vector, checking the unit norm."""
    v = np.asarray(amplitudes, dtype=complex).reshape(-1)
    nrm = np.linalg.norm(v)
    if normalize:
        if nrm == 0:
            raise MatrixError("cannot normalize the zero vector")
        return v / nrm
    if abs(nrm - 1.0) > 1e-12:
        raise MatrixError(f"ket norm {nrm!r} differs from 1")
    return v


def basis(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def proj(v) -> np.ndarray:
    """Rank-one operator |v><v|."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def dag(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def is_hermitian(h, tol: float = HERMITIAN_TOL) -> bool:
    h = np.asarray(h)
    return h.shape[0] == h.shape[1] and np.linalg.norm(h - h.conj().T) <= tol


def check_hermitian(h, tol: float = HERMITIAN_TOL) -> np.ndarray:
    h = as_cmatrix(h)
    if h.shape[0] != h.shape[1]:
        raise MatrixError(f"Hermitian input must be square, got {h.shape}")
    err = np.linalg.norm(h - h.conj().T)
    if err > tol:
        raise MatrixError(f"matrix is not Hermitian (||H - H^†||_F = {err:.3e})")
    return h


def is_projector(p, tol: float = 1e-10) -> bool:
    p = np.asarray(p, dtype=complex)
    return (np.linalg.norm(p - p.conj().T) <= tol
            and np.linalg.norm(p @ p - p) <= tol)


def tensor(*ops) -> np.ndarray:
    """Kronecker product of the arguments, leftmost factor most significant."""
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        op = np.asarray(op, dtype=complex)
        if op.ndim == 1:
            op = op.reshape(-1, 1)
        out = np.kron(out, op)
    return out


def tensor_kets(*kets) -> np.ndarray:
    out = np.ones(1, dtype=complex)
    for k in kets:
        out = np.kron(out, np.asarray(k, dtype=complex).reshape(-1))
    return out


def partial_trace(rho, dims: tuple[int, int], keep: str = "first") -> np.ndarray:
    """Trace out one factor of a bipartite operator on ``dims[0] x dims[1]``.

    ``keep="first"`` returns Tr_2(rho), ``keep="second"`` returns Tr_1(rho).
    """
    rho = np.asarray(rho, dtype=complex)
    d1, d2 = dims
    if rho.shape != (d1 * d2, d1 * d2):
        raise MatrixError(f"operator shape {rho.shape} does not match dims {dims}")
    r = rho.reshape(d1, d2, d1, d2)
    if keep == "first":
        return np.einsum("ajbj->ab", r)
    if keep == "second":
        return np.einsum("iaib->ab", r)
    raise ValueError(f"keep must be 'first' or 'second', not {keep!r}")


def partial_transpose(rho, dims: tuple[int, int], which: str = "second") -> np.ndarray:
    """Transpose one tensor factor in the computational basis."""
    rho = np.asarray(rho, dtype=complex)
    d1, d2 = dims
    r = rho.reshape(d1, d2, d1, d2)
    if which == "second":
        r = r.transpose(0, 3, 2, 1)
    elif which == "first":
        r = r.transpose(2, 1, 0, 3)
    else:
        raise ValueError(f"which must be 'first' or 'second', not {which!r}")
    return r.reshape(d1 * d2, d1 * d2)


def eig_hermitian(h) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition with eigenvalues sorted in nonincreasing order."""
    h = check_hermitian(h)
    h = 0.5 * (h + h.conj().T)
    w, q = np.linalg.eigh(h)
    return w[::-1].copy(), q[:, ::-1].copy()


def unitary_from_generator(h) -> np.ndarray:
    """exp(iH) for Hermitian H, via the spectral decomposition."""
    w, q = eig_hermitian(h)
    return (q * np.exp(1j * w)) @ q.conj().T


def generator_from_unitary(u) -> np.ndarray:
    """A Hermitian H with exp(iH) = U and spectrum in (-pi, pi]."""
    u = as_cmatrix(u)
    if np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])) > 1e-9:
        raise MatrixError("input is not unitary")
    # complex Schur form of a normal matrix is diagonal
    t, z = scipy.linalg.schur(u, output="complex")
    angles = np.angle(np.diag(t))
    h = (z * angles) @ z.conj().T
    return 0.5 * (h + h.conj().T)


def complete_isometry(v) -> np.ndarray:
    """Extend a matrix with orthonormal columns to a square unitary.

    The new columns come from Gram-Schmidt on the standard basis vectors taken
    in ascending index order, so the result is reproducible bit for bit.
    """
    v = as_cmatrix(v)
    rows, cols = v.shape
    if cols > rows:
        raise MatrixError(f"isometry needs rows >= cols, got {v.shape}")
    if np.linalg.norm(v.conj().T @ v - np.eye(cols)) > ISOMETRY_TOL:
        raise MatrixError("columns are not orthonormal")
    out = np.zeros((rows, rows), dtype=complex)
    out[:, :cols] = v
    filled = cols
    for j in range(rows):
        if filled == rows:
            break
        cand = np.zeros(rows, dtype=complex)
        cand[j] = 1.0
        basis_so_far = out[:, :filled]
        for _ in range(2):  # reorthogonalise once for accuracy
            cand = cand - basis_so_far @ (basis_so_far.conj().T @ cand)
        nrm = np.linalg.norm(cand)
        if nrm > 1e-6:
            out[:, filled] = cand / nrm
            filled += 1
    if filled != rows:
        raise MatrixError("isometry completion failed")
    return out


def kyfan_sum(h, m: int) -> float:
    """Sum of the ``m`` largest eigenvalues of a Hermitian matrix."""
    w, _ = eig_hermitian(h)
    if not 0 <= m <= len(w):
        raise ValueError(f"m={m} out of range for dimension {len(w)}")
    return float(np.sum(w[:m]))


def top_projector(h, m: int) -> np.ndarray:
    """Projector onto the span of the top-``m`` eigenvectors."""
    _, q = eig_hermitian(h)
    qm = q[:, :m]
    return qm @ qm.conj().T


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary (QR with phase fix)."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * 0.5 * (a + a.conj().T)


def random_isometry(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return random_unitary(rows, rng)[:, :cols]


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
