"""Dense tensor algebra for moment bookkeeping.

Tensors are plain ``numpy.ndarray`` objects stored dense in C order
(last index fastest).  Rank-k moment tensors of a d-vector have shape
``(d,) * k``; no symmetry packing is attempted since d <= 8 in every
supported model, so the largest tensor holds at most 4096 entries.

Only :func:`frobenius` pairs two tensors, so the index convention only
needs to be internally consistent: :func:`kron` puts the indices of its
first argument before those of its second.
"""

import numpy as np

__all__ = ["frobenius", "kron", "kron_power", "moment_tensor", "MAX_MOMENT_ORDER"]

# Expectations of moment tensors above this order are closed to zero.
MAX_MOMENT_ORDER = 4


def frobenius(a, b):
    """Sum of the elementwise product of two equal-shape tensors.

    Reduces to the dot product for vectors and ``trace(A.T @ B)`` for
    matrices.  Symmetric in its arguments.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(
            f"frobenius requires identical shapes, got {a.shape} and {b.shape}"
        )
    return (a * b).sum()


def kron(a, b):
    """Generalised Kronecker (outer) product of two tensors.

    The result has rank ``a.ndim + b.ndim`` with element
    ``out[i..., j...] = a[i...] * b[j...]``.
    """
    return np.multiply.outer(np.asarray(a), np.asarray(b))


def kron_power(a, n):
    """``a (x) a (x) ... (x) a`` with ``n`` factors; ``n = 0`` gives scalar 1."""
    if n < 0:
        raise ValueError("kron_power requires n >= 0")
    out = np.asarray(1.0)
    a = np.asarray(a)
    for _ in range(n):
        out = np.multiply.outer(out, a)
    return out


def moment_tensor(phi, k):
    """k-th order moment tensor of a vector: the Kronecker power ``phi^(x)k``.

    Element ``(a_1, ..., a_k)`` equals ``prod_i phi[a_i]``, so the result
    is supersymmetric (invariant under any index permutation).  ``k = 0``
    returns scalar 1 and ``k = 1`` returns ``phi`` itself.  Orders above
    :data:`MAX_MOMENT_ORDER` are rejected: the propagation formulas close
    the hierarchy by setting their expectations to zero.
    """
    phi = np.asarray(phi)
    if phi.ndim != 1 or phi.shape[0] < 1:
        raise ValueError(f"phi must be a non-empty vector, got shape {phi.shape}")
    if not 0 <= k <= MAX_MOMENT_ORDER:
        raise ValueError(
            f"moment order k={k} unsupported; orders above {MAX_MOMENT_ORDER} "
            "are closed to zero and never materialised"
        )
    return kron_power(phi, k)
