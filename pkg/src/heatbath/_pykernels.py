"""Pure-Python float kernels; drop-in substitute for the compiled module.

Same signatures as `_ckernels`.  All buffers are stdlib arrays: 'd' for
weights, 'q' for CSR index arrays.
"""

COMPILED = False


def csr_apply(src, indptr, indices, data, out):
    """Accumulate the row-stochastic action out += src . K for CSR rows K."""
    for i in range(len(src)):
        p = src[i]
        if p != 0.0:
            for k in range(indptr[i], indptr[i + 1]):
                out[indices[k]] += p * data[k]


def l1_diff(a, b):
    """Sum of |a_i - b_i|."""
    total = 0.0
    for i in range(len(a)):
        total += abs(a[i] - b[i])
    return total


def sq_l2_diff(a, b):
    """Sum of (a_i - b_i)^2."""
    total = 0.0
    for i in range(len(a)):
        d = a[i] - b[i]
        total += d * d
    return total
