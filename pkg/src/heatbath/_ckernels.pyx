# cython: language_level=3
"""Compiled float kernels for the hot loops: sparse row-stochastic
application and distance accumulation.  `_pykernels` is the pure-Python
substitute with identical semantics."""

COMPILED = True


def csr_apply(double[:] src, long long[:] indptr, long long[:] indices,
              double[:] data, double[:] out):
    """Accumulate the row-stochastic action out += src . K for CSR rows K."""
    cdef Py_ssize_t i, k
    cdef double p
    for i in range(src.shape[0]):
        p = src[i]
        if p != 0.0:
            for k in range(indptr[i], indptr[i + 1]):
                out[indices[k]] += p * data[k]


def l1_diff(double[:] a, double[:] b):
    """Sum of |a_i - b_i|."""
    cdef Py_ssize_t i
    cdef double total = 0.0, d
    for i in range(a.shape[0]):
        d = a[i] - b[i]
        total += -d if d < 0.0 else d
    return total


def sq_l2_diff(double[:] a, double[:] b):
    """Sum of (a_i - b_i)^2."""
    cdef Py_ssize_t i
    cdef double total = 0.0, d
    for i in range(a.shape[0]):
        d = a[i] - b[i]
        total += d * d
    return total
