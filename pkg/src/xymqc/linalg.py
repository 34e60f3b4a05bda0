"""Dense kernels for small Hermitian matrices.

Everything here operates on plain complex numpy arrays.  Composite indices
follow the convention that the leftmost subsystem is the most significant
digit of the basis index.
"""

import numpy as np

HERMITICITY_TOL = 1e-10
PSD_TOL = 1e-9


class NotHermitianError(ValueError):
    pass


class NotPSDError(ValueError):
    pass


class DensityMatrix:
    """A Hermitian, unit-trace, PSD matrix over a list of subsystem dims."""

    def __init__(self, matrix, dims, validate=True):
        matrix = np.asarray(matrix, dtype=complex)
        dims = tuple(int(d) for d in dims)
        if matrix.shape != (int(np.prod(dims)), int(np.prod(dims))):
            raise ValueError(f"matrix shape {matrix.shape} does not match dims {dims}")
        self.matrix = matrix
        self.dims = dims
        if validate:
            self.validate()

    @property
    def dim(self):
        return self.matrix.shape[0]

    def validate(self):
        m = self.matrix
        herm_dev = np.max(np.abs(m - m.conj().T))
        if herm_dev > HERMITICITY_TOL:
            raise NotHermitianError(f"deviation from Hermiticity {herm_dev:.3e}")
        tr_dev = abs(np.trace(m) - 1.0)
        if tr_dev > HERMITICITY_TOL:
            raise ValueError(f"trace deviates from 1 by {tr_dev:.3e}")
        min_eig = np.linalg.eigvalsh(m)[0]
        if min_eig < -PSD_TOL:
            raise NotPSDError(f"minimum eigenvalue {min_eig:.3e}")

    @classmethod
    def from_matrix(cls, matrix, dims, symmetrize=True, validate=True):
        """Build from a raw array, optionally removing float asymmetry."""
        matrix = np.asarray(matrix, dtype=complex)
        if symmetrize:
            matrix = 0.5 * (matrix + matrix.conj().T)
        return cls(matrix, dims, validate=validate)


def hermitian_eig(m):
    """Eigendecomposition of a Hermitian matrix.

    Returns (eigenvalues descending, eigenvector columns in matching order).
    """
    m = np.asarray(m, dtype=complex)
    dev = np.max(np.abs(m - m.conj().T))
    if dev > HERMITICITY_TOL:
        raise NotHermitianError(f"deviation from Hermiticity {dev:.3e}")
    w, v = np.linalg.eigh(m)
    return w[::-1].copy(), v[:, ::-1].copy()


def _to_tensor(matrix, dims):
    n = len(dims)
    return np.asarray(matrix).reshape(dims + dims), n


def partial_transpose(matrix, dims, subsystem):
    """Transpose one tensor factor of a composite-system matrix."""
    dims = tuple(dims)
    if not 0 <= subsystem < len(dims):
        raise IndexError(f"subsystem {subsystem} out of range for dims {dims}")
    t, n = _to_tensor(matrix, dims)
    t = np.swapaxes(t, subsystem, subsystem + n)
    d = int(np.prod(dims))
    return t.reshape(d, d).copy()


def partial_trace(matrix, dims, keep):
    """Trace out all subsystems not in `keep`; returns (matrix, kept dims).

    `keep` preserves the order in which indices are listed.
    """
    dims = tuple(dims)
    keep = list(keep)
    if not keep:
        raise ValueError("keep set must be non-empty")
    if len(set(keep)) != len(keep):
        raise ValueError("duplicate subsystem in keep set")
    if any(not 0 <= k < len(dims) for k in keep):
        raise IndexError(f"keep {keep} out of range for dims {dims}")
    t, n = _to_tensor(matrix, dims)
    traced = [i for i in range(n) if i not in keep]
    for count, i in enumerate(sorted(traced, reverse=True)):
        t = np.trace(t, axis1=i, axis2=i + n - count)
    # axes now ordered by ascending original index; reorder to `keep`
    kept_sorted = sorted(keep)
    perm = [kept_sorted.index(k) for k in keep]
    m = len(keep)
    t = np.transpose(t, perm + [p + m for p in perm])
    kept_dims = tuple(dims[k] for k in keep)
    d = int(np.prod(kept_dims))
    return t.reshape(d, d).copy(), kept_dims


def realignment(matrix, dims):
    """Realign a bipartite matrix: R[(i,i'),(j,j')] = M[(i,j),(i',j')]."""
    dims = tuple(dims)
    if len(dims) != 2:
        raise ValueError(f"realignment needs exactly two subsystem dims, got {dims}")
    da, db = dims
    t = np.asarray(matrix).reshape(da, db, da, db)  # (i, j, i', j')
    return t.transpose(0, 2, 1, 3).reshape(da * da, db * db).copy()


def trace_norm(m):
    """Sum of singular values."""
    return float(np.sum(np.linalg.svd(np.asarray(m, dtype=complex), compute_uv=False)))


def matrix_sqrt_psd(m):
    """Principal square root of a Hermitian PSD matrix.

    Eigenvalues in (-1e-9, 0) are clamped to zero; anything lower is an error.
    """
    m = np.asarray(m, dtype=complex)
    dev = np.max(np.abs(m - m.conj().T))
    if dev > HERMITICITY_TOL:
        raise NotHermitianError(f"deviation from Hermiticity {dev:.3e}")
    w, v = np.linalg.eigh(m)
    if w[0] < -PSD_TOL:
        raise NotPSDError(f"minimum eigenvalue {w[0]:.3e}")
    w = np.clip(w, 0.0, None)
    root = (v * np.sqrt(w)) @ v.conj().T
    return 0.5 * (root + root.conj().T)


def determinant(m):
    """LU-based determinant (complex)."""
    return complex(np.linalg.det(np.asarray(m, dtype=complex)))
