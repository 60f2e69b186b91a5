# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Fourier-Galerkin assembly kernel.

Mirrors :func:`floquet_lab._kernels_py.assemble_galerkin` entry for entry.
"""
import numpy as np
cimport numpy as cnp

cdef double TWO_PI = 6.283185307179586


def assemble_galerkin(int mf, int n, double complex[::1] k,
                      long[:, ::1] offsets, double complex[:, :, ::1] a_sup,
                      double complex[:, ::1] b_sup, double complex[::1] c_sup,
                      bint adjoint):
    cdef int width = 2 * mf + 1
    cdef Py_ssize_t size = 1
    cdef int d
    for d in range(n):
        size *= width
    out_arr = np.zeros((size, size), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef Py_ssize_t nsup = offsets.shape[0]
    cdef Py_ssize_t col, row, s, rem
    cdef int i, j
    cdef int mc[3]
    cdef int mr[3]
    cdef double complex kappa[3]
    cdef double complex val
    cdef bint inside
    for col in range(size):
        rem = col
        for d in range(n - 1, -1, -1):
            mc[d] = <int>(rem % width) - mf
            rem //= width
        for s in range(nsup):
            inside = True
            row = 0
            for d in range(n):
                mr[d] = mc[d] + <int>offsets[s, d]
                if mr[d] < -mf or mr[d] > mf:
                    inside = False
                    break
                row = row * width + (mr[d] + mf)
            if not inside:
                continue
            for d in range(n):
                if adjoint:
                    kappa[d] = TWO_PI * mr[d] + k[d]
                else:
                    kappa[d] = TWO_PI * mc[d] + k[d]
            val = c_sup[s]
            for i in range(n):
                if adjoint:
                    val = val - 1j * b_sup[s, i] * kappa[i]
                else:
                    val = val + 1j * b_sup[s, i] * kappa[i]
                for j in range(n):
                    val = val + a_sup[s, i, j] * kappa[i] * kappa[j]
            out[row, col] = out[row, col] + val
    return out_arr
