"""Dense complex linear algebra on tensor-product spaces.

Conventions used across the package:

* operators are 2-D ``numpy`` arrays, vectorized row-major;
* composite spaces are big-endian, i.e. the first factor of ``dims`` owns the
  most significant block of the flat index, exactly as ``np.kron`` orders it.

So for ``dims = (2, 3)`` the basis vector ``|i> (x) |k>`` has flat index
``3 * i + k``.
"""

from __future__ import annotations

from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .config import TOL_HERM
from .errors import BadPermutation, BadShape, NoConvergence, NonHermitianInput


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise BadShape(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise BadShape("matrix has non-finite entries")
    return a


def check_hermitian(m, tol: float = TOL_HERM) -> np.ndarray:
    """Return ``m`` as a complex array, raising if it is not Hermitian within ``tol``."""
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise NonHermitianInput(f"matrix is not square: {a.shape}")
    dev = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    if dev > tol:
        raise NonHermitianInput(f"matrix deviates from Hermitian by {dev:.3e} > {tol:.1e}")
    return a


def hermitian_part(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    return 0.5 * (a + a.conj().T)


def eig_hermitian(m, method: str = "lapack", tol: float = TOL_HERM):
    """Eigendecomposition of a Hermitian matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues ascending and the
    eigenvectors as columns. ``method="jacobi"`` uses the in-house cyclic
    Jacobi solver, which is slower but independent of LAPACK.
    """
    a = check_hermitian(m, tol)
    if method == "lapack":
        w, v = np.linalg.eigh(hermitian_part(a))
        return w, v
    if method == "jacobi":
        return jacobi_eigh(a)
    raise ValueError(f"unknown eigensolver {method!r}")


def jacobi_eigh(m, max_sweeps: int = 100, tol: float = 1e-14):
    """Cyclic Jacobi eigensolver for complex Hermitian matrices.

    Each rotation first removes the phase of the pivot so the 2x2 problem is
    real symmetric, then applies the classical Jacobi rotation.
    """
    a = hermitian_part(as_matrix(m)).copy()
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    if n <= 1:
        return a.real.diagonal().copy(), v
    scale = max(np.linalg.norm(a), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= tol * scale * 1e-3:
                    continue
                phase = apq / mag
                app, aqq = a[p, p].real, a[q, q].real
                tau = (aqq - app) / (2.0 * mag)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # columns p, q of the unitary: D @ [[c, s], [-s, c]] with D = diag(1, conj(phase))
                up = np.array([c, -s * np.conj(phase)])
                uq = np.array([s, c * np.conj(phase)])
                cols = a[:, [p, q]]
                new_p = cols @ up
                new_q = cols @ uq
                a[:, p], a[:, q] = new_p, new_q
                rows = a[[p, q], :]
                a[p, :] = up.conj() @ rows
                a[q, :] = uq.conj() @ rows
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                vcols = v[:, [p, q]]
                v[:, p], v[:, q] = vcols @ up, vcols @ uq
    else:
        raise NoConvergence(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")
    w = a.real.diagonal().copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def kron(*ops) -> np.ndarray:
    """Kronecker product of any number of matrices (first factor most significant)."""
    if len(ops) == 1 and not isinstance(ops[0], np.ndarray) and isinstance(ops[0], (list, tuple)):
        ops = tuple(ops[0])
    if not ops:
        return np.ones((1, 1), dtype=complex)
    return reduce(np.kron, [np.asarray(o, dtype=complex) for o in ops])


def _check_dims(m: np.ndarray, dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise BadShape(f"factor dimensions must be positive: {dims}")
    total = int(np.prod(dims)) if dims else 1
    if m.shape != (total, total):
        raise BadShape(f"shape {dims} (product {total}) inconsistent with matrix {m.shape}")
    return dims


def partial_trace(m, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace out every factor not listed in ``keep``; kept factors stay in order."""
    a = as_matrix(m)
    dims = _check_dims(a, dims)
    k = len(dims)
    keep = sorted(set(int(i) for i in keep))
    if any(i < 0 or i >= k for i in keep):
        raise BadShape(f"keep indices {keep} out of range for {k} factors")
    t = a.reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    if 2 * k > len(letters) + len(letters.upper()):
        raise BadShape("too many tensor factors")
    alphabet = letters + letters.upper()
    row = list(alphabet[:k])
    col = [alphabet[k + i] if i in keep else row[i] for i in range(k)]
    out = [row[i] for i in keep] + [col[i] for i in keep]
    expr = "".join(row) + "".join(col) + "->" + "".join(out)
    kept = int(np.prod([dims[i] for i in keep])) if keep else 1
    return np.einsum(expr, t).reshape(kept, kept)


def partial_transpose(m, dims: Sequence[int], factor: int | Iterable[int]) -> np.ndarray:
    """Transpose the listed tensor factor(s) in place."""
    a = as_matrix(m)
    dims = _check_dims(a, dims)
    k = len(dims)
    factors = [factor] if np.isscalar(factor) else list(factor)
    if any(f < 0 or f >= k for f in factors):
        raise BadShape(f"factor {factors} out of range for {k} factors")
    axes = list(range(2 * k))
    for f in factors:
        axes[f], axes[k + f] = axes[k + f], axes[f]
    return a.reshape(dims + dims).transpose(axes).reshape(a.shape)


def _check_perm(sigma: Sequence[int], k: int) -> tuple[int, ...]:
    sigma = tuple(int(s) for s in sigma)
    if sorted(sigma) != list(range(k)):
        raise BadPermutation(f"{sigma} is not a permutation of 0..{k - 1}")
    return sigma


def permute_factors(m, dims: Sequence[int], sigma: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors so that output slot ``i`` holds input factor ``sigma[i]``.

    On product operators this is ``A_0 (x) ... (x) A_{k-1} -> A_sigma[0] (x) ...``.
    """
    a = as_matrix(m)
    dims = _check_dims(a, dims)
    k = len(dims)
    sigma = _check_perm(sigma, k)
    axes = list(sigma) + [k + s for s in sigma]
    return a.reshape(dims + dims).transpose(axes).reshape(a.shape)


def inverse_permutation(sigma: Sequence[int]) -> tuple[int, ...]:
    return tuple(int(i) for i in np.argsort(sigma))


def permutation_indices(dims: Sequence[int], sigma: Sequence[int]) -> np.ndarray:
    """Flat index map ``idx`` with ``permute_factors(m)[i, j] == m[idx[i], idx[j]]``."""
    dims = tuple(int(d) for d in dims)
    sigma = _check_perm(sigma, len(dims))
    total = int(np.prod(dims))
    return np.arange(total).reshape(dims).transpose(sigma).reshape(-1)


def psd_min_eigenvalue(m) -> float:
    return float(np.linalg.eigvalsh(hermitian_part(as_matrix(m)))[0])


def trace_norm(m) -> float:
    return float(np.sum(np.linalg.svd(as_matrix(m), compute_uv=False)))


def sqrtm_psd(m, inverse: bool = False) -> np.ndarray:
    """Square root (or inverse square root) of a positive definite matrix."""
    w, v = np.linalg.eigh(hermitian_part(as_matrix(m)))
    if inverse:
        if w[0] <= 0:
            raise NonHermitianInput("inverse square root needs a positive definite matrix")
        w = 1.0 / np.sqrt(w)
    else:
        w = np.sqrt(np.clip(w, 0.0, None))
    return (v * w) @ v.conj().T


def hermitian_basis(d: int) -> list[np.ndarray]:
    """Orthonormal (Hilbert-Schmidt) basis of the d x d Hermitian matrices."""
    basis = []
    for i in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[i, i] = 1.0
        basis.append(e)
    r = 1.0 / np.sqrt(2.0)
    for i in range(d):
        for j in range(i + 1, d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = e[j, i] = r
            basis.append(e)
            f = np.zeros((d, d), dtype=complex)
            f[i, j] = -1j * r
            f[j, i] = 1j * r
            basis.append(f)
    return basis


def herm_to_real(m) -> np.ndarray:
    """Isometric real coordinates of a Hermitian matrix (length d**2).

    Diagonal entries first, then sqrt(2)-scaled real and imaginary parts of the
    strict upper triangle, so Frobenius inner products become dot products.
    """
    a = np.asarray(m, dtype=complex)
    d = a.shape[0]
    iu = np.triu_indices(d, 1)
    upper = a[iu]
    return np.concatenate(
        [a.real.diagonal(), np.sqrt(2.0) * upper.real, np.sqrt(2.0) * upper.imag]
    )


def real_to_herm(v, d: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (d * d,):
        raise BadShape(f"expected {d * d} real coordinates, got {v.shape}")
    iu = np.triu_indices(d, 1)
    npair = len(iu[0])
    out = np.zeros((d, d), dtype=complex)
    out[np.diag_indices(d)] = v[:d]
    upper = (v[d : d + npair] + 1j * v[d + npair :]) / np.sqrt(2.0)
    out[iu] = upper
    out[(iu[1], iu[0])] = upper.conj()
    return out
