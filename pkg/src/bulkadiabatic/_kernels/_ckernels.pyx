# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Signatures mirror ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


def cosine_sum(double[::1] x, double[::1] c, double h):
    """out[j] = sum_i c[i] * cos(x[j] * i * h), by unit-circle rotation."""
    cdef Py_ssize_t nx = x.shape[0], nc = c.shape[0], j, i
    cdef double re, im, wr, wi, tmp, acc
    out = np.empty(nx, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for j in range(nx):
            wr = cos(x[j] * h)
            wi = sin(x[j] * h)
            re = 1.0
            im = 0.0
            acc = 0.0
            for i in range(nc):
                acc = acc + c[i] * re
                tmp = re * wr - im * wi
                im = re * wi + im * wr
                re = tmp
            o[j] = acc
    return out


def split_modes(cnp.int64_t[::1] states, int n_modes, cnp.int64_t[::1] positions):
    """Local bits, remaining bits and reordering sign for each basis state."""
    cdef Py_ssize_t n = states.shape[0], m = positions.shape[0], a, b
    cdef unsigned long long smask = 0, st, rest, loc
    cdef int bit, occ, par
    for b in range(m):
        smask |= (<unsigned long long>1) << (n_modes - 1 - positions[b])
    local = np.empty(n, dtype=np.int64)
    rests = np.empty(n, dtype=np.int64)
    signs = np.empty(n, dtype=np.int8)
    cdef cnp.int64_t[::1] lo = local
    cdef cnp.int64_t[::1] re = rests
    cdef cnp.int8_t[::1] sg = signs
    with nogil:
        for a in range(n):
            st = <unsigned long long>states[a]
            rest = st & ~smask
            loc = 0
            par = 0
            for b in range(m):
                bit = n_modes - 1 - positions[b]
                occ = (st >> bit) & 1
                loc = (loc << 1) | occ
                if occ:
                    par ^= __builtin_popcountll(rest >> (bit + 1)) & 1
            lo[a] = <cnp.int64_t>loc
            re[a] = <cnp.int64_t>rest
            sg[a] = 1 - 2 * par
    return local, rests, signs
