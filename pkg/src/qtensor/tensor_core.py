"""Dense K-way tensor primitives: unfolding, Khatri-Rao, CP reconstruction.

Tensors are plain float64 numpy arrays in row-major (C) layout; CP factor
sets are lists of ``n_k x r`` matrices sharing the column count ``r``.

All operations are pure functions over immutable inputs and safe to call
concurrently.  Mode-``k`` unfolding places entry ``(i_1, ..., i_K)`` at row ``i_k`` and
column ``sum_{m != k} i_m * J_m`` with ``J_m = prod_{p < m, p != k} n_p``
(0-based; smaller mode indices vary fastest).  This pairing with the
Khatri-Rao order built by :func:`factor_coefficients` gives, for every mode,

    unfold(cp_reconstruct(factors), k) == factors[k] @ factor_coefficients(factors, k).T
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ObservationSet",
    "cp_als_init",
    "cp_reconstruct",
    "factor_coefficients",
    "fold",
    "frobenius_norm",
    "gram_spectral_norm",
    "khatri_rao",
    "khatri_rao_list",
    "unfold",
    "validate_factors",
]


def unfold(tensor: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` matricization of a K-way tensor (0-based mode)."""
    tensor = np.asarray(tensor, dtype=np.float64)
    if not 0 <= mode < tensor.ndim:
        raise ValueError(f"mode {mode} out of range for a {tensor.ndim}-way tensor")
    return np.reshape(
        np.moveaxis(tensor, mode, 0), (tensor.shape[mode], -1), order="F"
    )


def fold(matrix: np.ndarray, mode: int, shape) -> np.ndarray:
    """Inverse of :func:`unfold`: fold a matricization back into shape."""
    matrix = np.asarray(matrix, dtype=np.float64)
    shape = tuple(int(n) for n in shape)
    if not 0 <= mode < len(shape):
        raise ValueError(f"mode {mode} out of range for shape {shape}")
    other = shape[:mode] + shape[mode + 1 :]
    expected = (shape[mode], int(np.prod(other)) if other else 1)
    if matrix.shape != expected:
        raise ValueError(f"matrix shape {matrix.shape} does not match {expected}")
    return np.moveaxis(
        np.reshape(matrix, (shape[mode],) + other, order="F"), 0, mode
    )


def khatri_rao(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product; the second operand's rows vary fastest."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError(
            f"column counts must match, got shapes {a.shape} and {b.shape}"
        )
    r = a.shape[1]
    return (a[:, None, :] * b[None, :, :]).reshape(a.shape[0] * b.shape[0], r)


def khatri_rao_list(matrices) -> np.ndarray:
    """Khatri-Rao product over a list, folded left to right.

    The last listed matrix's row index varies fastest in the output rows.
    """
    matrices = list(matrices)
    if not matrices:
        raise ValueError("need at least one matrix")
    out = np.asarray(matrices[0], dtype=np.float64)
    for m in matrices[1:]:
        out = khatri_rao(out, m)
    return out


def validate_factors(factors) -> int:
    """Check a CP factor set and return its shared column count r."""
    if len(factors) < 1:
        raise ValueError("empty factor set")
    r = None
    for k, f in enumerate(factors):
        f = np.asarray(f)
        if f.ndim != 2:
            raise ValueError(f"factor {k} is not a matrix")
        if r is None:
            r = f.shape[1]
        elif f.shape[1] != r:
            raise ValueError(
                f"factor {k} has {f.shape[1]} columns, expected {r}"
            )
    if r < 1:
        raise ValueError("rank must be at least 1")
    return r


def factor_coefficients(factors, skip: int) -> np.ndarray:
    """Khatri-Rao product of all factors except ``skip``, highest mode first.

    For factors ``A_1 .. A_K`` (0-based list) and mode ``k`` this is
    ``A_K ⊙ ... ⊙ A_{k+1} ⊙ A_{k-1} ⊙ ... ⊙ A_1``, the coefficient matrix
    multiplying ``factors[k]`` in the mode-``k`` unfolding of the CP tensor.
    """
    if not 0 <= skip < len(factors):
        raise ValueError(f"mode {skip} out of range")
    mats = [factors[i] for i in reversed(range(len(factors))) if i != skip]
    if not mats:
        raise ValueError("need at least two factors")
    return khatri_rao_list(mats)


def cp_reconstruct(factors) -> np.ndarray:
    """Dense tensor with entries sum_j prod_k factors[k][i_k, j]."""
    validate_factors(factors)
    k = len(factors)
    if k < 2:
        raise ValueError("need at least two factors")
    letters = [chr(ord("a") + i) for i in range(k)]
    subscripts = ",".join(f"{c}z" for c in letters) + "->" + "".join(letters)
    arrays = [np.asarray(f, dtype=np.float64) for f in factors]
    return np.einsum(subscripts, *arrays, optimize=True)


def _spectral_norm_psd(gram: np.ndarray, tol: float = 1e-10, max_iter: int = 500) -> float:
    """Largest eigenvalue of a PSD matrix by deterministic power iteration."""
    r = gram.shape[0]
    v = np.ones(r) / np.sqrt(r)
    lam = 0.0
    for _ in range(max_iter):
        w = gram @ v
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        lam_new = float(v @ (gram @ v))
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
            return lam_new
        lam = lam_new
    return lam


def gram_spectral_norm(b: np.ndarray, tol: float = 1e-10, max_iter: int = 500) -> float:
    """Largest eigenvalue of ``b.T @ b``.

    Power iteration runs on the small r x r Gram matrix with a deterministic
    all-ones start vector; relative tolerance ``tol``, iteration cap
    ``max_iter``.  A zero matrix returns 0.
    """
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 2:
        raise ValueError("expected a matrix")
    return _spectral_norm_psd(b.T @ b, tol=tol, max_iter=max_iter)


def frobenius_norm(x: np.ndarray) -> float:
    """Square root of the sum of squared entries."""
    return float(np.linalg.norm(np.asarray(x, dtype=np.float64).ravel()))


def cp_als_init(x0: np.ndarray, rank: int, seed: int, sweeps: int = 10) -> list:
    """Seeded alternating least squares fit of a rank-``rank`` CP model.

    Factors start from a uniform(-1, 1) draw of ``default_rng(seed)`` and are
    refined by ``sweeps`` rounds of per-mode least-squares updates
    ``A_k <- unfold(x0, k) @ B_k @ pinv(B_k.T B_k)`` with singular-value
    cutoff 1e-10.  The reconstruction error is non-increasing sweep over
    sweep, and the result is bit-deterministic in (x0, rank, seed, sweeps).
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if rank < 1:
        raise ValueError("rank must be at least 1")
    if sweeps < 1:
        raise ValueError("sweeps must be at least 1")
    rng = np.random.default_rng(seed)
    factors = [rng.uniform(-1.0, 1.0, size=(n, rank)) for n in x0.shape]
    for _ in range(sweeps):
        for k in range(x0.ndim):
            bk = factor_coefficients(factors, k)
            gram = bk.T @ bk
            factors[k] = unfold(x0, k) @ bk @ np.linalg.pinv(gram, rcond=1e-10)
    return factors


class ObservationSet:
    """Sorted set of observed multi-indices of a dense tensor.

    Stored as strictly increasing row-major linear indices; 1-based tuples
    are used in documentation and file formats only.
    """

    def __init__(self, shape, linear_indices):
        self.shape = tuple(int(n) for n in shape)
        if len(self.shape) < 2 or any(n < 1 for n in self.shape):
            raise ValueError(f"invalid tensor shape {self.shape}")
        lin = np.asarray(linear_indices, dtype=np.int64)
        if lin.ndim != 1 or lin.size < 1:
            raise ValueError("observation set must contain at least one index")
        total = int(np.prod(self.shape))
        if lin[0] < 0 or lin[-1] >= total or np.any(np.diff(lin) <= 0):
            raise ValueError("linear indices must be strictly increasing and in range")
        self.linear_indices = lin

    @classmethod
    def full(cls, shape) -> "ObservationSet":
        return cls(shape, np.arange(int(np.prod(shape)), dtype=np.int64))

    @classmethod
    def from_tuples(cls, shape, tuples_1based) -> "ObservationSet":
        """Build from 1-based index tuples (any order, duplicates rejected)."""
        idx = np.asarray(tuples_1based, dtype=np.int64)
        if idx.ndim != 2 or idx.shape[1] != len(shape):
            raise ValueError("index tuples do not match tensor order")
        if np.any(idx < 1) or np.any(idx > np.asarray(shape, dtype=np.int64)):
            raise ValueError("index tuple outside the tensor shape")
        lin = np.ravel_multi_index(tuple((idx - 1).T), tuple(shape))
        order = np.argsort(lin, kind="stable")
        lin = lin[order]
        if np.any(np.diff(lin) == 0):
            raise ValueError("duplicate index tuples")
        return cls(shape, lin)

    @property
    def full_flag(self) -> bool:
        return self.linear_indices.size == int(np.prod(self.shape))

    def tuples_1based(self) -> np.ndarray:
        """(N, K) array of 1-based index tuples in storage order."""
        multi = np.unravel_index(self.linear_indices, self.shape)
        return np.stack(multi, axis=1) + 1

    def __len__(self) -> int:
        return int(self.linear_indices.size)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ObservationSet)
            and self.shape == other.shape
            and np.array_equal(self.linear_indices, other.linear_indices)
        )
