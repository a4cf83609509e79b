# Compiled 3x3 same-padding cross-correlation kernels.
# Loop order keeps the innermost index contiguous so the C compiler can
# vectorize; zero padding is folded into the loop bounds instead of a copy.

import numpy as np

cimport numpy as cnp

cnp.import_array()


def conv2d_forward(double[:, :, ::1] x, double[:, :, :, ::1] k):
    cdef Py_ssize_t cin = x.shape[0], h = x.shape[1], w = x.shape[2]
    cdef Py_ssize_t cout = k.shape[0]
    cdef cnp.ndarray[double, ndim=3] out_arr = np.zeros((cout, h, w), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t v, m, dy, dx, i, j, i0, i1, j0, j1
    cdef double coef
    with nogil:
        for v in range(cout):
            for m in range(cin):
                for dy in range(3):
                    i0 = 0 if dy >= 1 else 1
                    i1 = h if dy <= 1 else h - 1
                    for dx in range(3):
                        coef = k[v, m, dy, dx]
                        if coef == 0.0:
                            continue
                        j0 = 0 if dx >= 1 else 1
                        j1 = w if dx <= 1 else w - 1
                        for i in range(i0, i1):
                            for j in range(j0, j1):
                                out[v, i, j] += coef * x[m, i + dy - 1, j + dx - 1]
    return out_arr


def conv2d_grad_kernel(double[:, :, ::1] x, double[:, :, ::1] gout):
    cdef Py_ssize_t cin = x.shape[0], h = x.shape[1], w = x.shape[2]
    cdef Py_ssize_t cout = gout.shape[0]
    cdef cnp.ndarray[double, ndim=4] gk_arr = np.zeros((cout, cin, 3, 3), dtype=np.float64)
    cdef double[:, :, :, ::1] gk = gk_arr
    cdef Py_ssize_t v, m, dy, dx, i, j, i0, i1, j0, j1
    cdef double acc
    with nogil:
        for v in range(cout):
            for m in range(cin):
                for dy in range(3):
                    i0 = 0 if dy >= 1 else 1
                    i1 = h if dy <= 1 else h - 1
                    for dx in range(3):
                        j0 = 0 if dx >= 1 else 1
                        j1 = w if dx <= 1 else w - 1
                        acc = 0.0
                        for i in range(i0, i1):
                            for j in range(j0, j1):
                                acc += gout[v, i, j] * x[m, i + dy - 1, j + dx - 1]
                        gk[v, m, dy, dx] = acc
    return gk_arr
